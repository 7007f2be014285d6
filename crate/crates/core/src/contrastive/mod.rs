//! Self-supervised pretraining and label-aware fine-tuning of the encoder.

mod augment;
mod loss;
mod spline;
mod train;

pub use augment::{magnitude_warp, AugmentationConfig};
pub use loss::{cosine_sim, finetune_loss, simclr_loss, FinetuneLossOutput, LossOutput};
pub use spline::NaturalSpline;
pub use train::{
    finetune, history_csv, pretrain, write_history_csv, EpochLoss, FinetuneConfig, PretrainConfig,
};
