"""Mini-batch training with early stopping on validation AUPRC.

One logical sequence of updates per fold: shuffled mini-batches, Adam
with global-norm clipping at 1.0, per-epoch validation AUPRC, and the
checkpoint with the best AUPRC kept.  Fully deterministic for a fixed
seed and data order.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..analytics import auprc
from ..data.preprocess import ModelReadyPatient, Preprocessor
from ..data.schema import FeatureSchema
from .inference import TrainedModel, _sigmoid
from .network import ModelHyper, forward, init_params, loss, make_batch

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_auprc: float

    def to_json(self) -> str:
        return json.dumps({"epoch": self.epoch, "train_loss": self.train_loss,
                           "val_auprc": self.val_auprc})


def predict_logits(params: dict[str, np.ndarray], hyper: ModelHyper,
                   patients: list[ModelReadyPatient], batch_size: int = 64
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated (logits, labels) over all labeled visits."""
    all_logits, all_labels = [], []
    tensors = {k: ad.Tensor(v) for k, v in params.items()}
    for start in range(0, len(patients), batch_size):
        chunk = patients[start:start + batch_size]
        batch = make_batch(chunk)
        out = forward(tensors, batch, hyper)
        mask = batch.label_mask.astype(bool)
        all_logits.append(out.logits.data[mask])
        all_labels.append(batch.labels[mask])
    return np.concatenate(all_logits), np.concatenate(all_labels).astype(int)


def train_model(train_patients: list[ModelReadyPatient],
                val_patients: list[ModelReadyPatient],
                schema: FeatureSchema, hyper: ModelHyper, pre: Preprocessor,
                fold_id: str = "fold-0",
                progress_path: str | Path | None = None) -> TrainedModel:
    """Train on (oversampled) training patients, early-stop on val AUPRC."""
    params = init_params(schema, hyper)
    names = sorted(params)
    state = ad.AdamState({k: params[k].shape for k in names}, lr=hyper.lr)
    order_rng = np.random.default_rng(hyper.seed)

    # evaluation must never see oversampling duplicates
    val_eval = [p for p in val_patients if not p.is_duplicate]

    best_params = {k: v.copy() for k, v in params.items()}
    best_auprc = -1.0
    best_epoch = 0
    epochs_without_improvement = 0
    history: list[EpochRecord] = []
    progress_fh = open(progress_path, "w") if progress_path else None

    try:
        epochs_run = 0
        for epoch in range(1, hyper.max_epochs + 1):
            epochs_run = epoch
            idx = order_rng.permutation(len(train_patients))
            epoch_loss, n_batches = 0.0, 0
            for start in range(0, len(idx), hyper.batch_size):
                chunk = [train_patients[i] for i in idx[start:start + hyper.batch_size]]
                batch = make_batch(chunk)
                if batch.label_mask.sum() == 0:
                    continue
                leaves = {k: ad.Tensor(v, requires_grad=True)
                          for k, v in params.items()}
                out = forward(leaves, batch, hyper)
                l = loss(out, batch, hyper)
                if not np.isfinite(l.item()):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, batch {n_batches}")
                grads_list = ad.GradTape().gradient(l, [leaves[k] for k in names])
                grads = dict(zip(names, grads_list))
                grads = ad.clip_gradients(grads, 1.0)
                params = ad.adam_update(params, grads, state)
                epoch_loss += l.item()
                n_batches += 1

            logits, labels = predict_logits(params, hyper, val_eval)
            try:
                val_score = auprc(_sigmoid(logits), labels)
            except ValueError:
                val_score = 0.0
            rec = EpochRecord(epoch, epoch_loss / max(n_batches, 1), val_score)
            history.append(rec)
            if progress_fh:
                progress_fh.write(rec.to_json() + "\n")
                progress_fh.flush()
            log.debug("%s epoch %d: loss=%.4f val_auprc=%.4f",
                      fold_id, epoch, rec.train_loss, val_score)

            if val_score > best_auprc:
                best_auprc = val_score
                best_params = {k: v.copy() for k, v in params.items()}
                best_epoch = epoch
                epochs_without_improvement = 0
            else:
                epochs_without_improvement += 1
                if epochs_without_improvement >= hyper.patience:
                    break
    finally:
        if progress_fh:
            progress_fh.close()

    meta = {"fold_id": fold_id, "epochs_run": epochs_run,
            "best_epoch": best_epoch, "best_val_auprc": best_auprc}
    return TrainedModel(best_params, hyper, schema, pre, None, meta)
