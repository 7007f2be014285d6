//! Reference predictors: SVRs on raw or band-aggregated spectra, and the
//! constant mean-label floor.

use super::model::{fit_head, predict_from_features};
use super::{simplex_normalize, Standardizer, SvrSelection};
use crate::spectra::{AbundanceVector, LabeledSample};
use crate::svr::SvrModel;
use crate::synth::BandAggregation;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMode {
    RawHyperspectral,
    RawAggregated(BandAggregation),
}

impl FeatureMode {
    pub fn features(&self, spectrum: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureMode::RawHyperspectral => Ok(spectrum.to_vec()),
            FeatureMode::RawAggregated(agg) => agg.apply(spectrum),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub mode: FeatureMode,
    pub standardizer: Standardizer,
    pub svrs: [SvrModel; 3],
}

impl BaselineModel {
    pub fn feature_width(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn predict(&self, spectrum: &[f64]) -> Result<AbundanceVector> {
        predict_from_features(&self.standardizer, &self.svrs, &self.mode.features(spectrum)?)
    }
}

pub fn train_baseline(
    labeled: &[LabeledSample],
    mode: FeatureMode,
    selection: &SvrSelection,
    seed: u64,
) -> Result<BaselineModel> {
    if labeled.len() < 2 {
        return Err(Error::Invalid("baseline needs at least 2 labeled samples".into()));
    }
    let features = labeled
        .iter()
        .map(|s| mode.features(s.spectrum.values()))
        .collect::<Result<Vec<_>>>()?;
    let (standardizer, svrs) = fit_head(features, labeled, selection, seed)?;
    Ok(BaselineModel { mode, standardizer, svrs })
}

/// Predicts the mean training label for every input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanLabelPredictor {
    pub mean: AbundanceVector,
}

impl MeanLabelPredictor {
    pub fn fit(labeled: &[LabeledSample]) -> Result<Self> {
        if labeled.is_empty() {
            return Err(Error::Invalid("mean label of zero samples".into()));
        }
        let n = labeled.len() as f64;
        let mut sum = [0.0; 3];
        for s in labeled {
            for (acc, v) in sum.iter_mut().zip(s.label.as_array()) {
                *acc += v;
            }
        }
        Ok(MeanLabelPredictor {
            mean: simplex_normalize(sum.map(|v| v / n))?,
        })
    }

    pub fn predict(&self) -> AbundanceVector {
        self.mean
    }
}
