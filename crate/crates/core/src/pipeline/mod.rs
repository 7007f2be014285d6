//! Embedding → standardization → per-class SVR → simplex, plus the
//! raw-band baselines and the cross-validated comparison.

mod baseline;
mod evaluate;
mod model;
mod simplex;
mod standardize;
mod svrs;

pub use baseline::{train_baseline, BaselineModel, FeatureMode, MeanLabelPredictor};
pub use evaluate::{
    run_cross_validation, train_fold, CrossValidation, EvaluationConfig, EvaluationReport, FoldModels, Method,
};
pub use model::{
    embed, pretrain_encoder, train_from_encoder, train_pipeline, PipelineConfig, PipelineModel, TrainedPipeline,
};
pub use simplex::simplex_normalize;
pub use standardize::Standardizer;
pub use svrs::{fit_class_svrs, SvrSelection, DEFAULT_C_GRID, DEFAULT_INNER_FOLDS, DEFAULT_SIGMA_GRID};
