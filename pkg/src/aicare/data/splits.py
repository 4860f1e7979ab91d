"""Patient-level stratified cross-validation and minority oversampling."""

from __future__ import annotations

import numpy as np

from .labeling import LabeledCohort, LabeledRecord


def split_stratified_kfold(cohort: LabeledCohort, k: int = 10, seed: int = 42
                           ) -> list[tuple[LabeledCohort, LabeledCohort, LabeledCohort]]:
    """Patient-level stratified k-fold (train, val, test) splits.

    Fold i uses bucket i as test and bucket (i+1) mod k as validation, the
    remaining k-2 buckets as training.  Stratification deals shuffled
    positive and negative patients round-robin, so per-bucket positive
    counts differ by at most one.  Deterministic given `seed`.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    pos = [r for r in cohort.records if r.patient_label == 1]
    neg = [r for r in cohort.records if r.patient_label == 0]
    for cls, name in ((pos, "positive"), (neg, "negative")):
        if len(cls) < k:
            raise ValueError(f"{name} class has {len(cls)} patients, need >= {k}")

    rng = np.random.default_rng(seed)
    buckets: list[list[LabeledRecord]] = [[] for _ in range(k)]
    for cls in (pos, neg):
        ordered = sorted(cls, key=lambda r: r.record.patient_id)
        rng.shuffle(ordered)
        for i, rec in enumerate(ordered):
            buckets[i % k].append(rec)

    folds = []
    for i in range(k):
        test_b = buckets[i]
        # k=2 leaves no spare bucket; validation then reuses the test bucket
        val_idx = (i + 1) % k if k > 2 else i
        val_b = buckets[val_idx]
        train_b = [r for j in range(k) if j not in (i, val_idx)
                   for r in buckets[j]]
        folds.append((LabeledCohort(cohort.schema, list(train_b)),
                      LabeledCohort(cohort.schema, list(val_b)),
                      LabeledCohort(cohort.schema, list(test_b))))
    return folds


def oversample_minority(train: LabeledCohort, seed: int = 42) -> LabeledCohort:
    """Duplicate whole minority-class patients until class counts are equal.

    Duplicates are drawn with replacement from a seeded generator and
    marked `is_duplicate`, so evaluation can always filter them out.
    """
    pos = [r for r in train.records if r.patient_label == 1]
    neg = [r for r in train.records if r.patient_label == 0]
    if not pos or not neg:
        raise ValueError("oversampling needs both classes present")
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    deficit = len(majority) - len(minority)
    if deficit == 0:
        return LabeledCohort(train.schema, list(train.records))
    rng = np.random.default_rng(seed)
    ordered = sorted(minority, key=lambda r: r.record.patient_id)
    picks = rng.integers(0, len(ordered), size=deficit)
    extra = [LabeledRecord(ordered[i].record, ordered[i].labels.copy(),
                           ordered[i].included.copy(), is_duplicate=True)
             for i in picks]
    return LabeledCohort(train.schema, list(train.records) + extra)
