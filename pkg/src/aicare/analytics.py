"""Classification metrics, temperature scaling, threshold search and the
population-level (value, importance, risk) aggregation.

AUROC uses the Mann-Whitney rank formulation (ties credited 0.5); AUPRC is
average precision with step-wise integration over recall increments.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

THRESHOLD_GRID = np.linspace(0.01, 0.99, 200)


def auroc(scores, labels) -> float:
    """Area under the ROC curve via the rank statistic."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auroc needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    # average ranks over tied groups
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    pos_rank_sum = ranks[labels == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Average precision: sum of precision at each positive's rank times
    the recall increment.  Ties resolved by descending score then stable
    original index."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("auprc needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels)
    k = np.arange(1, len(labels) + 1)
    precision = tp / k
    return float((precision * sorted_labels).sum() / n_pos)


_UNDEFINED = None  # division-by-zero rates are reported as None, not 0


@dataclass
class MetricReport:
    tp: int
    fp: int
    tn: int
    fn: int
    auroc: float | None
    auprc: float | None
    accuracy: float | None
    precision: float | None
    recall: float | None
    specificity: float | None
    f_beta: float | None
    beta: float = 1.0
    threshold: float = 0.5

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _rate(num: float, den: float) -> float | None:
    return None if den == 0 else num / den


def f_beta_score(precision: float | None, recall: float | None,
                 beta: float) -> float | None:
    if precision is None or recall is None:
        return None
    denom = beta * beta * precision + recall
    if denom == 0:
        return 0.0
    return (1 + beta * beta) * precision * recall / denom


def confusion_metrics(scores, labels, threshold: float,
                      beta: float = 1.0) -> MetricReport:
    """Threshold at `score >= threshold` and derive all rates from counts."""
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must be in (0, 1)")
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    tn = int(np.sum(~pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    precision = _rate(tp, tp + fp)
    recall = _rate(tp, tp + fn)
    try:
        roc = auroc(scores, labels)
        prc = auprc(scores, labels)
    except ValueError:
        roc = prc = None
    return MetricReport(
        tp=tp, fp=fp, tn=tn, fn=fn,
        auroc=roc, auprc=prc,
        accuracy=_rate(tp + tn, tp + fp + tn + fn),
        precision=precision,
        recall=recall,
        specificity=_rate(tn, tn + fp),
        f_beta=f_beta_score(precision, recall, beta),
        beta=beta, threshold=threshold)


def _bce_from_logits(logits: np.ndarray, labels: np.ndarray,
                     temperature: float) -> float:
    z = logits / temperature
    # stable log(1 + e^z) - y*z
    return float(np.mean(np.maximum(z, 0) - labels * z + np.log1p(np.exp(-np.abs(z)))))


def fit_temperature(val_logits, val_labels, t_min: float = 0.05,
                    t_max: float = 10.0, grid_points: int = 200,
                    tol: float = 1e-4) -> float:
    """Scalar temperature minimizing validation BCE of sigmoid(logit/T).

    Coarse log-spaced grid search followed by golden-section refinement.
    T=1 is always a candidate, so calibration never increases BCE over
    the uncalibrated model.  Degenerate (constant) logits return T=1.
    """
    logits = np.asarray(val_logits, dtype=float)
    labels = np.asarray(val_labels, dtype=float)
    if labels.min() == labels.max():
        raise ValueError("fit_temperature needs both classes present")
    if np.ptp(logits) < 1e-12:
        log.warning("degenerate logits (all equal); returning T=1")
        return 1.0

    grid = np.geomspace(t_min, t_max, grid_points)
    losses = [_bce_from_logits(logits, labels, t) for t in grid]
    best = int(np.argmin(losses))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid_points - 1)]

    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - (b - a) * invphi
    d = a + (b - a) * invphi
    fc = _bce_from_logits(logits, labels, c)
    fd = _bce_from_logits(logits, labels, d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - (b - a) * invphi
            fc = _bce_from_logits(logits, labels, c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) * invphi
            fd = _bce_from_logits(logits, labels, d)
    t_star = (a + b) / 2
    if _bce_from_logits(logits, labels, 1.0) <= _bce_from_logits(logits, labels, t_star):
        return 1.0
    return float(t_star)


def calibrate(logits, temperature: float) -> np.ndarray:
    z = np.asarray(logits, dtype=float) / temperature
    return 1.0 / (1.0 + np.exp(-z))


def select_threshold(val_probs, val_labels, beta: float = 1.0) -> float:
    """Exact argmax of F-beta over the 200-point threshold grid.

    Ties break toward the lower (more sensitive) threshold.
    """
    probs = np.asarray(val_probs, dtype=float)
    labels = np.asarray(val_labels, dtype=int)
    if labels.min() == labels.max():
        raise ValueError("select_threshold needs both classes present")
    best_t, best_f = None, -1.0
    for t in THRESHOLD_GRID:
        pred = probs >= t
        tp = int(np.sum(pred & (labels == 1)))
        fp = int(np.sum(pred & (labels == 0)))
        fn = int(np.sum(~pred & (labels == 1)))
        p = _rate(tp, tp + fp)
        r = _rate(tp, tp + fn)
        f = f_beta_score(p if p is not None else 0.0,
                         r if r is not None else 0.0, beta)
        if f is not None and f > best_f:
            best_t, best_f = float(t), f
    return best_t


@dataclass
class CalibrationArtifact:
    """Fitted temperature and decision threshold with the metrics that
    selected them."""

    temperature: float
    threshold: float
    beta: float
    val_metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError("temperature must be finite positive")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must be in (0, 1)")

    def to_dict(self) -> dict:
        return {"temperature": self.temperature, "threshold": self.threshold,
                "beta": self.beta, "val_metrics": self.val_metrics}

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationArtifact":
        return cls(d["temperature"], d["threshold"], d["beta"],
                   d.get("val_metrics", {}))


def fit_calibration(val_logits, val_labels, beta: float = 1.0) -> CalibrationArtifact:
    """Temperature scaling then F-beta threshold search on the same split."""
    T = fit_temperature(val_logits, val_labels)
    probs = calibrate(val_logits, T)
    threshold = select_threshold(probs, val_labels, beta)
    report = confusion_metrics(probs, np.asarray(val_labels, int), threshold, beta)
    return CalibrationArtifact(T, threshold, beta, report.to_dict())


@dataclass
class PopulationSummary:
    """(value, importance, risk) triples for one feature over a sampled
    sub-cohort."""

    feature: str
    unit: str
    triples: list[tuple[float, float, float]]
    sample_size: int
    seed: int

    def to_csv(self) -> str:
        lines = ["value,importance,risk"]
        lines += [f"{v!r},{i!r},{r!r}" for v, i, r in self.triples]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"feature": self.feature, "unit": self.unit,
                "sample_size": self.sample_size, "seed": self.seed,
                "triples": [{"value": v, "importance": i, "risk": r}
                            for v, i, r in self.triples]}


def population_aggregate(trained_model, patients, feature: str, n: int = 100,
                         seed: int = 42) -> PopulationSummary:
    """Sample `n` patients and collect the feature's (value, importance,
    risk) at every visit where it was actually measured.

    `patients` are model-ready inputs; inference fans out per patient and
    results merge in patient-id order, so the summary is deterministic.
    """
    schema = trained_model.schema
    try:
        feat_idx = schema.dynamic_index(feature)
        unit = schema.dynamic_features[feat_idx].unit
        is_static = False
    except KeyError:
        static_names = [f.name for f in schema.static_features]
        if feature not in static_names:
            raise KeyError(f"unknown feature '{feature}'")
        feat_idx = static_names.index(feature)
        unit = schema.static_features[feat_idx].unit
        is_static = True

    ordered = sorted(patients, key=lambda p: p.patient_id)
    if len(ordered) < n:
        log.warning("cohort has %d < %d patients; using all", len(ordered), n)
        sampled = ordered
    else:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(ordered), size=n, replace=False)
        sampled = [ordered[i] for i in sorted(idx)]

    n_dynamic = len(schema.dynamic_features)
    triples = []
    for patient in sampled:
        assessment = trained_model.predict_trajectory(patient)
        for t, visit in enumerate(assessment.visits):
            if is_static:
                if not patient.static_observed[feat_idx]:
                    continue
                value = float(patient.static_raw[feat_idx])
                importance = float(visit.importance[n_dynamic + feat_idx])
            else:
                if not patient.observed_mask[t, feat_idx]:
                    continue
                value = float(patient.dynamic_raw[t, feat_idx])
                importance = float(visit.importance[feat_idx])
            triples.append((value, importance, float(visit.risk)))
    return PopulationSummary(feature, unit, triples, len(sampled), seed)
