"""Leakage-safe preprocessing: aggregation, pruning, imputation, scaling.

All imputation/normalization statistics come from exactly one training
fold; `Preprocessor` serializes canonically so leakage tests can compare
fitted statistics byte for byte.
"""

from __future__ import annotations

import json
import warnings
import logging
import math
from dataclasses import dataclass

import numpy as np

from .labeling import LabeledCohort, LabeledRecord
from .schema import Cohort, Feature, FeatureSchema, PatientRecord, Visit

log = logging.getLogger(__name__)


def aggregate_same_day(cohort: Cohort) -> Cohort:
    """Collapse multiple measurements on one day into their mean.

    Missing entries are ignored in the mean; a feature missing in every
    same-day visit stays missing.
    """
    records = []
    for rec in cohort.records:
        by_day: dict[float, list[np.ndarray]] = {}
        order: list[float] = []
        for v in rec.visits:
            if v.time not in by_day:
                by_day[v.time] = []
                order.append(v.time)
            by_day[v.time].append(v.values)
        visits = []
        for t in sorted(order):
            stackd = np.stack(by_day[t])
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", category=RuntimeWarning)
                merged = np.nanmean(stackd, axis=0)
            visits.append(Visit(t, merged))
        records.append(PatientRecord(rec.patient_id, rec.static_values,
                                     visits, rec.outcome))
    return Cohort(cohort.schema, records, same_day_duplicates=[])


def prune_sparse_features(cohort: Cohort, max_missing_rate: float = 0.9
                          ) -> tuple[Cohort, list[str]]:
    """Drop dynamic features missing in strictly more than `max_missing_rate`
    of all visits."""
    if not (0.0 < max_missing_rate <= 1.0):
        raise ValueError("max_missing_rate must be in (0, 1]")
    dyn = cohort.schema.dynamic_features
    n_visits = sum(len(r.visits) for r in cohort.records)
    missing = np.zeros(len(dyn))
    for rec in cohort.records:
        for v in rec.visits:
            missing += np.isnan(v.values)
    rates = missing / max(n_visits, 1)
    keep = [i for i, r in enumerate(rates) if r <= max_missing_rate]
    removed = [dyn[i].name for i in range(len(dyn)) if i not in keep]
    if not keep:
        raise ValueError("pruning would remove every dynamic feature")
    if not removed:
        return cohort, []
    schema = FeatureSchema(tuple(
        f for f in cohort.schema.features
        if f.kind == "static" or f.name not in removed))
    records = []
    for rec in cohort.records:
        visits = [Visit(v.time, v.values[keep]) for v in rec.visits]
        records.append(PatientRecord(rec.patient_id, rec.static_values,
                                     visits, rec.outcome))
    return Cohort(schema, records, cohort.same_day_duplicates), removed


@dataclass
class Preprocessor:
    """Imputation and scaling statistics fitted on one training fold."""

    schema_hash: str
    fold_id: str
    dynamic_medians: np.ndarray
    dynamic_means: np.ndarray
    dynamic_stds: np.ndarray
    static_medians: np.ndarray
    static_means: np.ndarray
    static_stds: np.ndarray

    def to_dict(self) -> dict:
        return {
            "schema_hash": self.schema_hash,
            "fold_id": self.fold_id,
            "dynamic_medians": self.dynamic_medians.tolist(),
            "dynamic_means": self.dynamic_means.tolist(),
            "dynamic_stds": self.dynamic_stds.tolist(),
            "static_medians": self.static_medians.tolist(),
            "static_means": self.static_means.tolist(),
            "static_stds": self.static_stds.tolist(),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        return cls(d["schema_hash"], d["fold_id"],
                   np.array(d["dynamic_medians"]), np.array(d["dynamic_means"]),
                   np.array(d["dynamic_stds"]), np.array(d["static_medians"]),
                   np.array(d["static_means"]), np.array(d["static_stds"]))


def _locf(values: np.ndarray) -> np.ndarray:
    """Forward-fill each column along the time axis."""
    out = values.copy()
    for t in range(1, out.shape[0]):
        nan = np.isnan(out[t])
        out[t, nan] = out[t - 1, nan]
    return out


def _safe_std(x: np.ndarray, axis=0) -> np.ndarray:
    std = np.std(x, axis=axis)
    return np.where(std < 1e-12, 1.0, std)  # constant feature: unit scale


def fit_preprocessor(train: LabeledCohort, fold_id: str = "fold-0") -> Preprocessor:
    """Fit medians and z-score statistics on training patients only.

    Medians come from observed values; means/stds from the post-imputation
    values (LOCF then median), matching what the model will actually see.
    """
    if not train.records:
        raise ValueError("empty training split")
    n_static, n_dynamic = train.schema.counts

    observed: list[np.ndarray] = [np.empty(0)] * n_dynamic
    per_patient = []
    for lr in train.records:
        vals = np.stack([v.values for v in lr.record.visits])
        per_patient.append(vals)
    all_vals = np.concatenate(per_patient, axis=0) if per_patient else np.empty((0, n_dynamic))

    medians = np.zeros(n_dynamic)
    for j in range(n_dynamic):
        col = all_vals[:, j]
        obs = col[~np.isnan(col)]
        if obs.size == 0:
            log.warning("dynamic feature %d never observed in training; median=0", j)
            medians[j] = 0.0
        else:
            medians[j] = float(np.median(obs))

    imputed = []
    for vals in per_patient:
        filled = _locf(vals)
        nan = np.isnan(filled)
        filled[nan] = np.broadcast_to(medians, filled.shape)[nan]
        imputed.append(filled)
    imputed_all = np.concatenate(imputed, axis=0)
    dyn_means = imputed_all.mean(axis=0)
    dyn_stds = _safe_std(imputed_all)

    statics = np.stack([lr.record.static_values for lr in train.records]) \
        if n_static else np.empty((len(train.records), 0))
    static_medians = np.zeros(n_static)
    for j in range(n_static):
        obs = statics[:, j][~np.isnan(statics[:, j])]
        static_medians[j] = float(np.median(obs)) if obs.size else 0.0
    statics_imp = statics.copy()
    nan = np.isnan(statics_imp)
    statics_imp[nan] = np.broadcast_to(static_medians, statics_imp.shape)[nan]
    static_means = statics_imp.mean(axis=0) if n_static else np.empty(0)
    static_stds = _safe_std(statics_imp) if n_static else np.empty(0)

    return Preprocessor(train.schema.hash(), fold_id, medians, dyn_means,
                        dyn_stds, static_medians, static_means, static_stds)


@dataclass
class ModelReadyPatient:
    """One patient's dense model inputs plus everything display needs."""

    patient_id: str
    times: np.ndarray          # (T,)
    log_gaps: np.ndarray       # (T,) log(1 + days since previous visit)
    dynamic: np.ndarray        # (T, D) imputed + z-scored
    dynamic_raw: np.ndarray    # (T, D) imputed, original units
    observed_mask: np.ndarray  # (T, D) True where actually measured
    static: np.ndarray         # (S,) imputed + z-scored
    static_raw: np.ndarray     # (S,) original units
    static_observed: np.ndarray  # (S,)
    labels: np.ndarray         # (T,) int
    label_mask: np.ndarray     # (T,) bool
    patient_label: int
    is_duplicate: bool = False


def apply_preprocessor(split: LabeledCohort, pre: Preprocessor
                       ) -> list[ModelReadyPatient]:
    """LOCF, median backfill, then z-score, keeping the raw observation mask.

    The original missing mask survives preprocessing so downstream views
    can distinguish measured from imputed values.
    """
    if pre.schema_hash != split.schema.hash():
        raise ValueError("preprocessor was fitted on a different schema")
    out = []
    for lr in split.records:
        rec = lr.record
        times = np.array([v.time for v in rec.visits], dtype=float)
        gaps = np.diff(times, prepend=times[:1])
        vals = np.stack([v.values for v in rec.visits])
        mask = ~np.isnan(vals)
        filled = _locf(vals)
        nan = np.isnan(filled)
        filled[nan] = np.broadcast_to(pre.dynamic_medians, filled.shape)[nan]
        normed = (filled - pre.dynamic_means) / pre.dynamic_stds

        s_raw = rec.static_values.copy()
        s_obs = ~np.isnan(s_raw)
        s_filled = s_raw.copy()
        s_filled[~s_obs] = pre.static_medians[~s_obs]
        s_normed = ((s_filled - pre.static_means) / pre.static_stds
                    if s_raw.size else s_filled)

        out.append(ModelReadyPatient(
            patient_id=rec.patient_id,
            times=times,
            log_gaps=np.log1p(np.maximum(gaps, 0.0)),
            dynamic=normed,
            dynamic_raw=filled,
            observed_mask=mask,
            static=s_normed,
            static_raw=s_filled,
            static_observed=s_obs,
            labels=lr.labels.astype(int),
            label_mask=lr.included.astype(bool),
            patient_label=lr.patient_label,
            is_duplicate=lr.is_duplicate,
        ))
    return out
