from .network import (Batch, ForwardOutputs, ModelHyper, forward, init_params,
                      loss, make_batch)
from .inference import (RankedFeature, RiskAssessment, TrainedModel,
                        VisitAssessment, rank_features)
from .training import EpochRecord, TrainingDiverged, predict_logits, train_model
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Batch", "ForwardOutputs", "ModelHyper", "forward", "init_params", "loss",
    "make_batch", "RankedFeature", "RiskAssessment", "TrainedModel",
    "VisitAssessment", "rank_features", "EpochRecord", "TrainingDiverged",
    "predict_logits", "train_model", "load_checkpoint", "save_checkpoint",
]
