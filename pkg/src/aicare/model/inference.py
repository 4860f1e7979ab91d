"""Trained-model wrapper: per-visit risk trajectories and feature ranking."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..analytics import CalibrationArtifact, calibrate
from ..data.preprocess import ModelReadyPatient, Preprocessor
from ..data.schema import FeatureSchema
from . import checkpoint as ckpt
from .network import Batch, ForwardOutputs, ModelHyper, forward, make_batch


@dataclass
class VisitAssessment:
    time: float
    raw_logit: float
    raw_risk: float          # sigmoid(logit)
    risk: float              # calibrated if a temperature is available
    importance: np.ndarray   # (dynamic_dim + static_dim,), sums to 1


@dataclass
class RiskAssessment:
    patient_id: str
    visits: list[VisitAssessment]
    patient: ModelReadyPatient
    schema: FeatureSchema
    threshold: float | None = None


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


class TrainedModel:
    """Immutable bundle of weights, schema, preprocessor and calibration.

    Safe to share across concurrent inference calls: forward passes build
    their own graphs and never mutate the parameters.
    """

    def __init__(self, params: dict[str, np.ndarray], hyper: ModelHyper,
                 schema: FeatureSchema, preprocessor: Preprocessor,
                 calibration: CalibrationArtifact | None = None,
                 meta: dict | None = None):
        self.params = params
        self.hyper = hyper
        self.schema = schema
        self.preprocessor = preprocessor
        self.calibration = calibration
        self.meta = meta or {}
        self._hash: str | None = None

    # -- persistence --------------------------------------------------
    def save(self, path) -> str:
        self._hash = ckpt.save_checkpoint(path, self.params, self.hyper,
                                          self.schema, self.preprocessor,
                                          self.calibration, self.meta)
        return self._hash

    @classmethod
    def load(cls, path) -> "TrainedModel":
        params, hyper, schema, pre, cal, meta, h = ckpt.load_checkpoint(path)
        model = cls(params, hyper, schema, pre, cal, meta)
        model._hash = h
        return model

    @property
    def model_hash(self) -> str:
        if self._hash is None:
            self._hash = ckpt.model_hash(ckpt.checkpoint_bytes(
                self.params, self.hyper, self.schema, self.preprocessor,
                self.calibration, self.meta))
        return self._hash

    # -- inference ----------------------------------------------------
    def _param_tensors(self) -> dict[str, ad.Tensor]:
        return {k: ad.Tensor(v) for k, v in self.params.items()}

    def forward_batch(self, patients: list[ModelReadyPatient]) -> ForwardOutputs:
        return forward(self._param_tensors(), make_batch(patients), self.hyper)

    def forward_patient(self, patient: ModelReadyPatient,
                        prefix_len: int | None = None):
        """Per-visit (logits, importances) for one patient, optionally
        truncated to the first `prefix_len` visits."""
        n = len(patient.times)
        if prefix_len is not None:
            if prefix_len > n:
                raise ValueError(f"prefix_len {prefix_len} exceeds {n} visits")
            patient = _truncate(patient, prefix_len)
        out = self.forward_batch([patient])
        return out.logits.data[0], out.importances.data[0]

    def predict_trajectory(self, patient: ModelReadyPatient) -> RiskAssessment:
        """Causal per-visit risks and importances for the whole timeline."""
        if patient.dynamic.shape[1] != self.hyper.dynamic_dim or \
                patient.static.shape[0] != self.hyper.static_dim:
            raise ValueError("patient tensors do not match the model schema")
        logits, imps = self.forward_patient(patient)
        raw = _sigmoid(logits)
        if self.calibration is not None:
            cal = calibrate(logits, self.calibration.temperature)
        else:
            cal = raw
        visits = [VisitAssessment(time=float(patient.times[t]),
                                  raw_logit=float(logits[t]),
                                  raw_risk=float(raw[t]),
                                  risk=float(cal[t]),
                                  importance=imps[t].copy())
                  for t in range(len(patient.times))]
        return RiskAssessment(
            patient_id=patient.patient_id, visits=visits, patient=patient,
            schema=self.schema,
            threshold=self.calibration.threshold if self.calibration else None)


def _truncate(p: ModelReadyPatient, n: int) -> ModelReadyPatient:
    return ModelReadyPatient(
        patient_id=p.patient_id, times=p.times[:n], log_gaps=p.log_gaps[:n],
        dynamic=p.dynamic[:n], dynamic_raw=p.dynamic_raw[:n],
        observed_mask=p.observed_mask[:n], static=p.static,
        static_raw=p.static_raw, static_observed=p.static_observed,
        labels=p.labels[:n], label_mask=p.label_mask[:n],
        patient_label=p.patient_label, is_duplicate=p.is_duplicate)


@dataclass
class RankedFeature:
    name: str
    kind: str
    value: float
    unit: str
    importance: float
    imputed: bool


def rank_features(assessment: RiskAssessment, visit_idx: int,
                  top_k: int = 10) -> list[RankedFeature]:
    """Top features at one visit, by descending importance.

    Ties keep schema order (stable sort); values are reported in original
    units with an imputed flag from the raw observation mask.
    """
    if top_k <= 0:
        raise ValueError("top_k must be positive")
    visits = assessment.visits
    if not (0 <= visit_idx < len(visits)):
        raise IndexError(f"visit {visit_idx} out of range")
    patient = assessment.patient
    schema_feats = [(f, "dynamic") for f in assessment.schema.dynamic_features]
    schema_feats += [(f, "static") for f in assessment.schema.static_features]
    imp = visits[visit_idx].importance
    order = np.argsort(-imp, kind="stable")
    n_dyn = patient.dynamic.shape[1]
    out = []
    for idx in order[:top_k]:
        feat, kind = schema_feats[idx]
        if kind == "dynamic":
            value = float(patient.dynamic_raw[visit_idx, idx])
            imputed = not bool(patient.observed_mask[visit_idx, idx])
        else:
            j = idx - n_dyn
            value = float(patient.static_raw[j])
            imputed = not bool(patient.static_observed[j])
        out.append(RankedFeature(feat.name, kind, value, feat.unit,
                                 float(imp[idx]), imputed))
    return out
