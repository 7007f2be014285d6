use std::path::Path;

use super::{fit_class_svrs, simplex_normalize, Standardizer, SvrSelection};
use crate::contrastive::{finetune, pretrain, AugmentationConfig, EpochLoss, FinetuneConfig, PretrainConfig};
use crate::nn::{EncoderModel, Tensor3, EMBEDDING_DIM};
use crate::spectra::{AbundanceVector, Dataset, LabeledSample};
use crate::svr::SvrModel;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"HPIP";
const VERSION: u32 = 1;
const TAGS: [&[u8; 4]; 5] = [b"ENCM", b"STDZ", b"SVR0", b"SVR1", b"SVR2"];
/// Rows per eval-mode encoder call.
const EMBED_CHUNK: usize = 256;

/// Hyperparameters for every training stage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub pretrain: PretrainConfig,
    pub augment: AugmentationConfig,
    pub finetune: FinetuneConfig,
    pub svr: SvrSelection,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.pretrain.validate()?;
        self.augment.validate()?;
        self.finetune.validate()?;
        self.svr.validate()
    }

    /// Copy with every stochastic stage keyed to `seed`.
    pub fn seeded(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.pretrain.seed = seed;
        cfg.augment.seed = seed;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub encoder: EncoderModel,
    pub standardizer: Standardizer,
    /// Indexed by [`crate::AbundanceClass::index`].
    pub svrs: [SvrModel; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub model: PipelineModel,
    pub pretrain_history: Vec<EpochLoss>,
    pub finetune_history: Vec<EpochLoss>,
}

/// Eval-mode embeddings, one row per spectrum.
pub fn embed(encoder: &EncoderModel, spectra: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    if let Some(bad) = spectra.iter().find(|s| s.len() != encoder.bands) {
        return Err(Error::Shape(format!(
            "spectrum of {} bands for a {}-band encoder",
            bad.len(),
            encoder.bands
        )));
    }
    let mut out = Vec::with_capacity(spectra.len());
    for chunk in spectra.chunks(EMBED_CHUNK) {
        out.extend(encoder.forward_eval(&Tensor3::from_rows(chunk)?)?.embedding.to_rows());
    }
    Ok(out)
}

/// Standardizes `features`, fits the three regressors, and returns both.
pub(crate) fn fit_head(
    features: Vec<Vec<f64>>,
    samples: &[LabeledSample],
    selection: &SvrSelection,
    seed: u64,
) -> Result<(Standardizer, [SvrModel; 3])> {
    let standardizer = Standardizer::fit(&features)?;
    let z = standardizer.transform_all(&features)?;
    let svrs = fit_class_svrs(&z, samples, selection, seed)?;
    Ok((standardizer, svrs))
}

pub(crate) fn predict_from_features(standardizer: &Standardizer, svrs: &[SvrModel; 3], features: &[f64]) -> Result<AbundanceVector> {
    let z = standardizer.transform(features)?;
    let mut raw = [0.0; 3];
    for (r, svr) in raw.iter_mut().zip(svrs) {
        *r = svr.predict(&z)?;
    }
    simplex_normalize(raw)
}

impl PipelineModel {
    pub fn bands(&self) -> usize {
        self.encoder.bands
    }

    pub fn embed(&self, spectra: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        embed(&self.encoder, spectra)
    }

    pub fn predict_abundance(&self, spectrum: &[f64]) -> Result<AbundanceVector> {
        Ok(self.predict_many(&[spectrum])?.remove(0))
    }

    pub fn predict_many(&self, spectra: &[&[f64]]) -> Result<Vec<AbundanceVector>> {
        self.embed(spectra)?
            .iter()
            .map(|e| predict_from_features(&self.standardizer, &self.svrs, e))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.standardizer.dim() != EMBEDDING_DIM || self.svrs.iter().any(|s| s.dim != EMBEDDING_DIM) {
            return Err(Error::Format("pipeline components disagree on feature width".into()));
        }
        Ok(())
    }

    /// `"HPIP" | version u32 | count u32 | count × (tag [4]u8, offset u64, length u64) | blocks`.
    /// Offsets are from the start of the file.
    pub fn to_bytes(&self) -> Vec<u8> {
        let blocks = [
            self.encoder.to_bytes(),
            self.standardizer.to_bytes(),
            self.svrs[0].to_bytes(),
            self.svrs[1].to_bytes(),
            self.svrs[2].to_bytes(),
        ];
        let header = 12 + 20 * blocks.len();
        let mut out = Vec::with_capacity(header + blocks.iter().map(Vec::len).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
        let mut offset = header as u64;
        for (tag, block) in TAGS.iter().zip(&blocks) {
            out.extend_from_slice(*tag);
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(block.len() as u64).to_le_bytes());
            offset += block.len() as u64;
        }
        for block in &blocks {
            out.extend_from_slice(block);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a pipeline checkpoint".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        if u32_at(4) != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", u32_at(4))));
        }
        let count = u32_at(8) as usize;
        if bytes.len() < 12 + 20 * count {
            return Err(Error::Format("truncated checkpoint table".into()));
        }
        let block = |tag: &[u8; 4]| -> Result<&[u8]> {
            for e in 0..count {
                let at = 12 + 20 * e;
                if &bytes[at..at + 4] == tag {
                    let off = u64::from_le_bytes(bytes[at + 4..at + 12].try_into().expect("8 bytes"));
                    let len = u64::from_le_bytes(bytes[at + 12..at + 20].try_into().expect("8 bytes"));
                    let end = off.checked_add(len).filter(|&e| e <= bytes.len() as u64);
                    return match end {
                        Some(end) => Ok(&bytes[off as usize..end as usize]),
                        None => Err(Error::Format(format!("block {} out of range", String::from_utf8_lossy(tag)))),
                    };
                }
            }
            Err(Error::Format(format!("checkpoint lacks a {} block", String::from_utf8_lossy(tag))))
        };
        let model = PipelineModel {
            encoder: EncoderModel::from_bytes(block(TAGS[0])?)?,
            standardizer: Standardizer::from_bytes(block(TAGS[1])?)?,
            svrs: [
                SvrModel::from_bytes(block(TAGS[2])?)?,
                SvrModel::from_bytes(block(TAGS[3])?)?,
                SvrModel::from_bytes(block(TAGS[4])?)?,
            ],
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        PipelineModel::from_bytes(&bytes)
    }
}

/// Pretrains a fresh encoder on the unlabeled spectra.
pub fn pretrain_encoder(dataset: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<(EncoderModel, Vec<EpochLoss>)> {
    let cfg = cfg.seeded(seed);
    let mut encoder = EncoderModel::new(dataset.band_count(), seed)?;
    let history = pretrain(&mut encoder, dataset.unlabeled(), &cfg.pretrain, &cfg.augment).map_err(|e| e.in_stage("pretrain"))?;
    Ok((encoder, history))
}

/// Fine-tunes a copy of `encoder` and fits the regressors on `labeled`.
pub fn train_from_encoder(
    encoder: &EncoderModel,
    labeled: &[LabeledSample],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(PipelineModel, Vec<EpochLoss>)> {
    let mut encoder = encoder.clone();
    let history = finetune(&mut encoder, labeled, &cfg.finetune).map_err(|e| e.in_stage("finetune"))?;
    let spectra: Vec<&[f64]> = labeled.iter().map(|s| s.spectrum.values()).collect();
    let features = embed(&encoder, &spectra)?;
    let (standardizer, svrs) = fit_head(features, labeled, &cfg.svr, seed).map_err(|e| e.in_stage("svr"))?;
    Ok((PipelineModel { encoder, standardizer, svrs }, history))
}

/// Pretrain on the unlabeled spectra, fine-tune on the labeled ones,
/// then fit the three regressors on standardized embeddings.
pub fn train_pipeline(dataset: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<TrainedPipeline> {
    cfg.validate()?;
    if dataset.labeled().len() < 2 {
        return Err(Error::Invalid("training needs at least 2 labeled samples".into()));
    }
    let (encoder, pretrain_history) = pretrain_encoder(dataset, cfg, seed)?;
    let (model, finetune_history) = train_from_encoder(&encoder, dataset.labeled(), cfg, seed)?;
    Ok(TrainedPipeline {
        model,
        pretrain_history,
        finetune_history,
    })
}
