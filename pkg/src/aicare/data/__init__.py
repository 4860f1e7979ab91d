from .schema import (Cohort, Feature, FeatureSchema, Outcome, PatientRecord,
                     Visit, load_cohort, load_schema, save_cohort, save_schema)
from .labeling import (LabeledCohort, LabeledRecord, assign_mortality_labels,
                       assign_preterm_labels)
from .preprocess import (ModelReadyPatient, Preprocessor, aggregate_same_day,
                         apply_preprocessor, fit_preprocessor,
                         prune_sparse_features)
from .splits import oversample_minority, split_stratified_kfold
from .synthetic import SyntheticSpec, generate_synthetic_cohort

__all__ = [
    "Cohort", "Feature", "FeatureSchema", "Outcome", "PatientRecord", "Visit",
    "load_cohort", "load_schema", "save_cohort", "save_schema",
    "LabeledCohort", "LabeledRecord", "assign_mortality_labels",
    "assign_preterm_labels",
    "ModelReadyPatient", "Preprocessor", "aggregate_same_day",
    "apply_preprocessor", "fit_preprocessor", "prune_sparse_features",
    "oversample_minority", "split_stratified_kfold",
    "SyntheticSpec", "generate_synthetic_cohort",
]
