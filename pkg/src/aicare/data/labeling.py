"""Per-visit outcome labeling with leakage-safe exclusion windows."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .schema import Cohort, FeatureSchema, PatientRecord

log = logging.getLogger(__name__)


@dataclass
class LabeledRecord:
    record: PatientRecord
    labels: np.ndarray   # int, one per visit; meaningful only where included
    included: np.ndarray  # bool, one per visit
    is_duplicate: bool = False  # set by oversampling; never evaluated on

    def __post_init__(self):
        n = len(self.record.visits)
        assert len(self.labels) == n and len(self.included) == n

    @property
    def patient_label(self) -> int:
        """Patient-level stratum: 1 if any included visit is positive."""
        inc = self.included
        return int(bool(inc.any() and self.labels[inc].max() == 1))


@dataclass
class LabeledCohort:
    schema: FeatureSchema
    records: list[LabeledRecord]
    dropped_patients: int = 0

    def patient_ids(self) -> list[str]:
        return [r.record.patient_id for r in self.records]


def assign_mortality_labels(cohort: Cohort,
                            horizon_days: float = 365.0) -> LabeledCohort:
    """Label each visit for death within `horizon_days`.

    Deceased patients: a visit is positive iff the event falls within the
    horizon after it.  Survivors: visits closer than the horizon to the
    last follow-up are excluded (the window could hide an unobserved
    event), the rest are negative.
    """
    out: list[LabeledRecord] = []
    for rec in cohort.records:
        o = rec.outcome
        times = np.array([v.time for v in rec.visits])
        if o.event:
            if o.event_time is None:
                raise ValueError(f"patient {rec.patient_id}: event without event_time")
            if (times > o.event_time).any():
                raise ValueError(
                    f"patient {rec.patient_id}: visit after event time")
            labels = (o.event_time - times <= horizon_days).astype(int)
            included = np.ones(len(times), dtype=bool)
        else:
            if o.last_followup_time is None:
                raise ValueError(
                    f"patient {rec.patient_id}: survivor without follow-up time")
            included = (o.last_followup_time - times) >= horizon_days
            labels = np.zeros(len(times), dtype=int)
        out.append(LabeledRecord(rec, labels, included))
    return LabeledCohort(cohort.schema, out)


def assign_preterm_labels(cohort: Cohort, preterm_week: float = 37.0,
                          window_days: float = 300.0) -> LabeledCohort:
    """Label retained visits for delivery before `preterm_week` weeks.

    Only visits within `window_days` before delivery are retained; records
    lacking a delivery gestational age are dropped with a warning count.
    """
    out: list[LabeledRecord] = []
    dropped = 0
    for rec in cohort.records:
        o = rec.outcome
        if o.delivery_week is None:
            dropped += 1
            continue
        delivery_day = (o.delivery_day if o.delivery_day is not None
                        else o.delivery_week * 7.0)
        # visits outside the pre-delivery window are removed outright,
        # not merely masked: they never reach the model as history either
        kept = [v for v in rec.visits
                if delivery_day - v.time <= window_days and v.time <= delivery_day]
        if not kept:
            dropped += 1
            continue
        trimmed = PatientRecord(rec.patient_id, rec.static_values, kept, o)
        label = int(o.delivery_week < preterm_week)
        labels = np.full(len(kept), label, dtype=int)
        out.append(LabeledRecord(trimmed, labels, np.ones(len(kept), dtype=bool)))
    if dropped:
        log.warning("dropped %d records without delivery gestational age", dropped)
    return LabeledCohort(cohort.schema, out, dropped_patients=dropped)
