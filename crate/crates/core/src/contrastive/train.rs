use std::path::Path;

use rand::seq::SliceRandom;

use super::{finetune_loss, magnitude_warp, simclr_loss, AugmentationConfig};
use crate::nn::{AdamW, AdamWConfig, EncoderModel, Matrix, Tensor3};
use crate::rng::{domain, epoch_sample_index, substream};
use crate::spectra::{AbundanceVector, LabeledSample, Spectrum};
use crate::{Error, Result};

/// Rows per eval-mode forward when caching latents.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    pub tau: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Optional cap on the unlabeled pool, drawn once per run.
    pub max_unlabeled: Option<usize>,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            tau: 0.0866,
            batch_size: 64,
            epochs: 100,
            lr: 0.0094,
            weight_decay: 0.0343,
            seed: 0,
            max_unlabeled: None,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || self.batch_size < 2 || self.epochs == 0 {
            return Err(Error::Config(format!(
                "pretraining needs tau > 0, batch_size >= 2, epochs >= 1 (got {}, {}, {})",
                self.tau, self.batch_size, self.epochs
            )));
        }
        if self.max_unlabeled.is_some_and(|m| m < self.batch_size) {
            return Err(Error::Config("max_unlabeled must be at least batch_size".into()));
        }
        AdamWConfig::new(self.lr, self.weight_decay).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinetuneConfig {
    pub lambda: f64,
    pub tau: f64,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            lambda: 0.6,
            tau: 0.0866,
            epochs: 100,
            lr: 0.0051,
            weight_decay: 0.0066,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.tau > 0.0) || self.epochs == 0 {
            return Err(Error::Config(format!(
                "fine-tuning needs lambda > 0, tau > 0, epochs >= 1 (got {}, {}, {})",
                self.lambda, self.tau, self.epochs
            )));
        }
        AdamWConfig::new(self.lr, self.weight_decay).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_loss: f64,
    pub skipped_anchors: usize,
}

/// SimCLR pretraining in place. Returns the per-epoch mean batch loss.
///
/// Each step runs two train-mode forwards (originals, then their warped
/// views) and stacks the embeddings as `[originals; views]`. A trailing
/// batch with fewer than two samples is dropped.
pub fn pretrain(
    model: &mut EncoderModel,
    unlabeled: &[Spectrum],
    cfg: &PretrainConfig,
    aug: &AugmentationConfig,
) -> Result<Vec<EpochLoss>> {
    cfg.validate()?;
    aug.validate()?;
    if unlabeled.len() < cfg.batch_size {
        return Err(Error::Invalid(format!(
            "pretraining needs at least {} unlabeled spectra, got {}",
            cfg.batch_size,
            unlabeled.len()
        )));
    }
    if let Some(bad) = unlabeled.iter().find(|s| s.len() != model.bands) {
        return Err(Error::Shape(format!("spectrum of {} bands for a {}-band encoder", bad.len(), model.bands)));
    }

    let mut pool: Vec<usize> = (0..unlabeled.len()).collect();
    if let Some(cap) = cfg.max_unlabeled.filter(|&c| c < pool.len()) {
        pool.shuffle(&mut substream(cfg.seed, domain::SUBSET, 0));
        pool.truncate(cap);
        pool.sort_unstable();
    }

    let sizes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
    let mut opt = AdamW::new(AdamWConfig::new(cfg.lr, cfg.weight_decay), &sizes)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order = pool.clone();
        order.shuffle(&mut substream(cfg.seed, domain::SHUFFLE, epoch as u64));
        let (mut total, mut batches) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size).filter(|b| b.len() >= 2) {
            let originals: Vec<&[f64]> = batch.iter().map(|&i| unlabeled[i].values()).collect();
            let views = batch
                .iter()
                .map(|&i| {
                    let mut rng = substream(aug.seed, domain::AUGMENT, epoch_sample_index(epoch, i));
                    magnitude_warp(&unlabeled[i], aug, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let x1 = Tensor3::from_rows(&originals)?;
            let x2 = Tensor3::from_rows(&views.iter().map(Spectrum::values).collect::<Vec<_>>())?;
            let (out1, cache1) = model.forward_train(&x1)?;
            let (out2, cache2) = model.forward_train(&x2)?;
            let z = out1.embedding.vstack(&out2.embedding)?;
            let loss = simclr_loss(&z, cfg.tau)?;
            let (g1, g2) = loss.grad.split_rows(batch.len());
            let mut grads = model.backward(&cache1, &g1)?;
            grads.add_assign(&model.backward(&cache2, &g2)?);
            model.update_running_stats(&cache1);
            model.update_running_stats(&cache2);
            opt.step(&mut model.parameters_mut(), &grads.slices())?;
            total += loss.loss;
            batches += 1;
        }
        history.push(EpochLoss {
            epoch,
            mean_loss: total / batches as f64,
            skipped_anchors: 0,
        });
    }
    Ok(history)
}

/// Eval-mode latents for a list of spectra, computed in chunks.
pub(crate) fn latents(model: &EncoderModel, spectra: &[&[f64]]) -> Result<Matrix> {
    let mut rows = Vec::with_capacity(spectra.len());
    for chunk in spectra.chunks(EVAL_CHUNK) {
        rows.extend(model.latent_eval(&Tensor3::from_rows(chunk)?)?.to_rows());
    }
    Matrix::from_rows(&rows)
}

/// Full-batch fine-tuning of the projection head only. Convolution and
/// batch-norm state, running statistics included, is never written.
pub fn finetune(model: &mut EncoderModel, labeled: &[LabeledSample], cfg: &FinetuneConfig) -> Result<Vec<EpochLoss>> {
    cfg.validate()?;
    if labeled.len() < 2 {
        return Err(Error::Invalid("fine-tuning needs at least 2 labeled samples".into()));
    }
    let spectra: Vec<&[f64]> = labeled.iter().map(|s| s.spectrum.values()).collect();
    let latent = latents(model, &spectra)?;
    let labels: Vec<AbundanceVector> = labeled.iter().map(|s| s.label).collect();
    let head = &mut model.head;
    let mut opt = AdamW::new(AdamWConfig::new(cfg.lr, cfg.weight_decay), &[head.weight.len(), head.bias.len()])?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let z = head.forward(&latent)?;
        let out = finetune_loss(&z, &labels, cfg.lambda, cfg.tau)?;
        let (grads, _) = head.backward(&latent, &out.grad)?;
        opt.step(&mut [&mut head.weight[..], &mut head.bias[..]], &[&grads.weight, &grads.bias])?;
        history.push(EpochLoss {
            epoch,
            mean_loss: out.loss,
            skipped_anchors: out.skipped,
        });
    }
    Ok(history)
}

pub fn history_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,mean_loss,skipped_anchors\n");
    for h in history {
        out.push_str(&format!("{},{},{}\n", h.epoch, h.mean_loss, h.skipped_anchors));
    }
    out
}

pub fn write_history_csv(path: &Path, history: &[EpochLoss]) -> Result<()> {
    std::fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}
