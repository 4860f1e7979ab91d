"""Cross-validated training pipeline behind the CLI.

A run is fully described by a `RunConfig`; every artifact-producing step
writes into `out_dir` with a manifest, and identical config plus seed
reproduces identical bytes.  Fold i trains with seed `seed + i`, so folds
can run in parallel processes without sharing RNG state.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import auprc, auroc, fit_calibration
from .data.labeling import (LabeledCohort, assign_mortality_labels,
                            assign_preterm_labels)
from .data.preprocess import (aggregate_same_day, apply_preprocessor,
                              fit_preprocessor, prune_sparse_features)
from .data.schema import load_cohort
from .data.splits import oversample_minority, split_stratified_kfold
from .model.inference import TrainedModel, _sigmoid
from .model.network import ModelHyper
from .model.training import predict_logits, train_model

log = logging.getLogger(__name__)

# config keys use the published hyperparameter table's row names
_HYPER_KEYS = {
    "seed": "seed",
    "epochs": "max_epochs",
    "patience": "patience",
    "batch_size": "batch_size",
    "learning_rate": "lr",
    "hidden_dimension": "hidden_dim",
    "attention_heads": "n_heads",
    "decorrelation_weight": "lambda_dec",
}


@dataclass
class RunConfig:
    task: str
    visits_file: str
    static_file: str
    schema_file: str
    out_dir: str
    k_folds: int = 10
    seed: int = 42
    oversample: bool = True
    max_missing_rate: float = 0.9
    threshold_beta: float = 1.0
    hyper: ModelHyper = field(default_factory=ModelHyper)

    def __post_init__(self):
        if self.task not in ("mortality", "preterm"):
            raise ValueError(f"unknown task '{self.task}'")
        if self.k_folds < 2:
            raise ValueError("k_folds must be at least 2")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("task", "visits_file", "static_file", "schema_file", "out_dir",
              "k_folds", "seed", "oversample", "max_missing_rate",
              "threshold_beta")}
        hyper = self.hyper.to_dict()
        d["hyper"] = {cfg_key: hyper[attr]
                      for cfg_key, attr in _HYPER_KEYS.items()}
        return d

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True,
                           separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        hyper_cfg = d.pop("hyper", {})
        unknown = set(hyper_cfg) - set(_HYPER_KEYS)
        if unknown:
            raise ValueError(f"unknown hyper keys: {sorted(unknown)}")
        hyper = ModelHyper(**{_HYPER_KEYS[k]: v
                              for k, v in hyper_cfg.items()})
        return cls(hyper=hyper, **d)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def write_manifest(out_dir: str | Path, command: str, config_hash: str,
                   seed: int):
    """Reproducibility stamp; deliberately excludes timestamps so repeat
    runs stay byte-identical."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "config_hash": config_hash,
                "seed": seed, "code_version": __version__}
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")


def load_labeled(config: RunConfig) -> tuple[LabeledCohort, list[str]]:
    """Load, aggregate, prune and label the cohort described by the config."""
    cohort = load_cohort(config.visits_file, config.static_file,
                         config.schema_file)
    cohort = aggregate_same_day(cohort)
    cohort, removed = prune_sparse_features(cohort, config.max_missing_rate)
    if config.task == "mortality":
        labeled = assign_mortality_labels(cohort)
    else:
        labeled = assign_preterm_labels(cohort)
    return labeled, removed


def run_fold(labeled: LabeledCohort, config: RunConfig, fold_idx: int,
             with_calibration: bool = False) -> dict:
    """Train one fold, optionally calibrate, then evaluate on its test split.

    Writes model.ckpt (+ model_calibrated.ckpt), progress.jsonl and
    metrics.json under out_dir/fold-{i}/ and returns the metrics dict.
    """
    folds = split_stratified_kfold(labeled, config.k_folds, config.seed)
    train_c, val_c, test_c = folds[fold_idx]
    fold_id = f"fold-{fold_idx}"
    fold_dir = Path(config.out_dir) / fold_id
    fold_dir.mkdir(parents=True, exist_ok=True)

    pre = fit_preprocessor(train_c, fold_id)
    if config.oversample:
        train_c = oversample_minority(train_c, config.seed)
    train_ready = apply_preprocessor(train_c, pre)
    val_ready = apply_preprocessor(val_c, pre)
    test_ready = apply_preprocessor(test_c, pre)

    hyper = replace(config.hyper, seed=config.seed + fold_idx,
                    dynamic_dim=0, static_dim=0)
    model = train_model(train_ready, val_ready, labeled.schema, hyper, pre,
                        fold_id, progress_path=fold_dir / "progress.jsonl")
    model.save(fold_dir / "model.ckpt")

    if with_calibration:
        model = calibrate_checkpoint(fold_dir / "model.ckpt", val_ready,
                                     config.threshold_beta)
    metrics = evaluate_model(model, test_ready)
    metrics["fold"] = fold_idx
    (fold_dir / "metrics.json").write_text(
        json.dumps(metrics, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    return metrics


def calibrate_checkpoint(checkpoint_path: str | Path, val_ready,
                         beta: float = 1.0) -> TrainedModel:
    """Fit temperature and threshold on the validation split and save the
    result next to the input checkpoint as model_calibrated.ckpt."""
    model = TrainedModel.load(checkpoint_path)
    val_eval = [p for p in val_ready if not p.is_duplicate]
    logits, labels = predict_logits(model.params, model.hyper, val_eval)
    artifact = fit_calibration(logits, labels, beta)
    calibrated = TrainedModel(model.params, model.hyper, model.schema,
                              model.preprocessor, artifact, model.meta)
    calibrated.save(Path(checkpoint_path).parent / "model_calibrated.ckpt")
    return calibrated


def evaluate_model(model: TrainedModel, patients) -> dict:
    """Threshold-free metrics on labeled visits, plus thresholded ones when
    the model carries a calibration."""
    eval_patients = [p for p in patients if not p.is_duplicate]
    logits, labels = predict_logits(model.params, model.hyper, eval_patients)
    probs = _sigmoid(logits)
    metrics = {
        "n_patients": len(eval_patients),
        "n_visits": int(labels.size),
        "prevalence": float(labels.mean()),
        "auroc": auroc(probs, labels),
        "auprc": auprc(probs, labels),
    }
    if model.calibration is not None:
        from .analytics import calibrate, confusion_metrics
        cal_probs = calibrate(logits, model.calibration.temperature)
        report = confusion_metrics(cal_probs, labels,
                                   model.calibration.threshold,
                                   model.calibration.beta)
        metrics["temperature"] = model.calibration.temperature
        metrics["threshold"] = model.calibration.threshold
        metrics["thresholded"] = report.to_dict()
    return metrics


def run_cross_validation(config: RunConfig, with_calibration: bool = False,
                         folds: list[int] | None = None) -> dict:
    """Run the requested folds and write the cross-fold summary.json."""
    labeled, removed = load_labeled(config)
    fold_indices = folds if folds is not None else list(range(config.k_folds))
    per_fold = [run_fold(labeled, config, i, with_calibration)
                for i in fold_indices]

    aurocs = np.array([m["auroc"] for m in per_fold])
    auprcs = np.array([m["auprc"] for m in per_fold])
    summary = {
        "config_hash": config.config_hash(),
        "task": config.task,
        "k_folds": config.k_folds,
        "folds_run": fold_indices,
        "pruned_features": removed,
        "auroc_mean": float(aurocs.mean()),
        "auroc_sd": float(aurocs.std(ddof=1)) if len(aurocs) > 1 else 0.0,
        "auprc_mean": float(auprcs.mean()),
        "auprc_sd": float(auprcs.std(ddof=1)) if len(auprcs) > 1 else 0.0,
        "per_fold": per_fold,
    }
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    write_manifest(out, "train", config.config_hash(), config.seed)
    return summary
