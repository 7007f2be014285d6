//! k-fold comparison of the proposed features against the raw-band baselines.

use std::fmt::Write as _;

use super::baseline::{train_baseline, FeatureMode, MeanLabelPredictor};
use super::model::{pretrain_encoder, train_from_encoder, PipelineConfig, PipelineModel};
use super::BaselineModel;
use crate::nn::EncoderModel;
use crate::spectra::{make_folds, rmse, AbundanceClass, AbundanceVector, Dataset, LabeledSample};
use crate::synth::BandAggregation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ModelFeatures,
    RawHyperspectral,
    RawAggregated,
    /// The constant mean-label floor; not one of the compared methods.
    MeanLabel,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ModelFeatures, Method::RawHyperspectral, Method::RawAggregated];

    pub fn tag(self) -> &'static str {
        match self {
            Method::ModelFeatures => "model-features",
            Method::RawHyperspectral => "raw-hyperspectral",
            Method::RawAggregated => "raw-aggregated",
            Method::MeanLabel => "mean-label",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub method: Method,
    /// Per-fold `[healthy, affected, dead]` RMSE.
    pub folds: Vec<[f64; 3]>,
    pub class_means: [f64; 3],
    pub grand_mean: f64,
}

impl EvaluationReport {
    pub fn from_folds(method: Method, folds: Vec<[f64; 3]>) -> Self {
        let k = folds.len() as f64;
        let class_means = std::array::from_fn(|c| folds.iter().map(|f| f[c]).sum::<f64>() / k);
        let grand_mean = class_means.iter().sum::<f64>() / 3.0;
        EvaluationReport {
            method,
            folds,
            class_means,
            grand_mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationConfig {
    pub pipeline: PipelineConfig,
    pub folds: usize,
    pub aggregation: Option<BandAggregation>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            pipeline: PipelineConfig::default(),
            folds: 5,
            aggregation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    /// In [`Method::ALL`] order.
    pub reports: [EvaluationReport; 3],
    /// The constant mean-label predictor under the same folds.
    pub floor: EvaluationReport,
    pub seed: u64,
}

impl CrossValidation {
    pub fn report(&self, method: Method) -> &EvaluationReport {
        &self.reports[Method::ALL.iter().position(|m| *m == method).expect("known method")]
    }

    /// `method,fold,class,rmse` rows, then `method,mean,class,rmse` rows
    /// including an `average` class, preceded by `# key=value` metadata.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# seed={}", self.seed).unwrap();
        writeln!(out, "# folds={}", self.floor.folds.len()).unwrap();
        writeln!(out, "# mean_label_floor={}", self.floor.grand_mean).unwrap();
        out.push_str("method,fold,class,rmse\n");
        for r in &self.reports {
            for (f, row) in r.folds.iter().enumerate() {
                for class in AbundanceClass::ALL {
                    writeln!(out, "{},{},{},{}", r.method.tag(), f, class.name(), row[class.index()]).unwrap();
                }
            }
        }
        for r in &self.reports {
            for class in AbundanceClass::ALL {
                writeln!(out, "{},mean,{},{}", r.method.tag(), class.name(), r.class_means[class.index()]).unwrap();
            }
            writeln!(out, "{},mean,average,{}", r.method.tag(), r.grand_mean).unwrap();
        }
        out
    }

    /// Fixed-width table: one row per method, Healthy / Affected / Dead / Average.
    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<20}{:>10}{:>10}{:>10}{:>10}\n", "method", "Healthy", "Affected", "Dead", "Average");
        for r in &self.reports {
            writeln!(
                out,
                "{:<20}{:>10.4}{:>10.4}{:>10.4}{:>10.4}",
                r.method.tag(),
                r.class_means[0],
                r.class_means[1],
                r.class_means[2],
                r.grand_mean
            )
            .unwrap();
        }
        out
    }
}

/// Every model trained on one fold's training split.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldModels {
    pub pipeline: PipelineModel,
    pub hyperspectral: BaselineModel,
    pub aggregated: BaselineModel,
    pub floor: MeanLabelPredictor,
}

/// Trains all methods on `train`. The pretrained encoder never saw labels.
pub fn train_fold(
    encoder: &EncoderModel,
    train: &[LabeledSample],
    cfg: &EvaluationConfig,
    seed: u64,
) -> Result<FoldModels> {
    let aggregation = match &cfg.aggregation {
        Some(a) => a.clone(),
        None => BandAggregation::multispectral(encoder.bands)?,
    };
    let (pipeline, _) = train_from_encoder(encoder, train, &cfg.pipeline, seed)?;
    let hyperspectral = train_baseline(train, FeatureMode::RawHyperspectral, &cfg.pipeline.svr, seed)
        .map_err(|e| e.in_stage(Method::RawHyperspectral.tag()))?;
    let aggregated = train_baseline(train, FeatureMode::RawAggregated(aggregation), &cfg.pipeline.svr, seed)
        .map_err(|e| e.in_stage(Method::RawAggregated.tag()))?;
    Ok(FoldModels {
        pipeline,
        hyperspectral,
        aggregated,
        floor: MeanLabelPredictor::fit(train)?,
    })
}

fn class_rmse(pred: &[AbundanceVector], truth: &[AbundanceVector]) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for class in AbundanceClass::ALL {
        let p: Vec<f64> = pred.iter().map(|v| v.get(class)).collect();
        let t: Vec<f64> = truth.iter().map(|v| v.get(class)).collect();
        out[class.index()] = rmse(&p, &t)?;
    }
    Ok(out)
}

impl FoldModels {
    /// Per-class RMSE of each method, in [`Method::ALL`] order, then the floor.
    pub fn score(&self, held: &[LabeledSample]) -> Result<[[f64; 3]; 4]> {
        let truth: Vec<AbundanceVector> = held.iter().map(|s| s.label).collect();
        let spectra: Vec<&[f64]> = held.iter().map(|s| s.spectrum.values()).collect();
        let model = self.pipeline.predict_many(&spectra)?;
        let hyper = spectra.iter().map(|s| self.hyperspectral.predict(s)).collect::<Result<Vec<_>>>()?;
        let agg = spectra.iter().map(|s| self.aggregated.predict(s)).collect::<Result<Vec<_>>>()?;
        let floor = vec![self.floor.predict(); held.len()];
        Ok([
            class_rmse(&model, &truth)?,
            class_rmse(&hyper, &truth)?,
            class_rmse(&agg, &truth)?,
            class_rmse(&floor, &truth)?,
        ])
    }
}

/// k-fold cross-validation of all three methods plus the mean-label floor.
/// The encoder is pretrained once on the unlabeled spectra and shared by
/// every fold.
pub fn run_cross_validation(dataset: &Dataset, cfg: &EvaluationConfig, seed: u64) -> Result<CrossValidation> {
    cfg.pipeline.validate()?;
    let n = dataset.labeled().len();
    if n < cfg.folds {
        return Err(Error::Invalid(format!("{n} labeled samples are too few for {} folds", cfg.folds)));
    }
    let plan = make_folds(n, cfg.folds, seed)?;
    let (encoder, _) = pretrain_encoder(dataset, &cfg.pipeline, seed)?;
    let mut rows: [Vec<[f64; 3]>; 4] = Default::default();
    for fold in 0..cfg.folds {
        let (train_idx, held_idx) = plan.split(fold);
        let train = dataset.labeled_subset(&train_idx);
        let held = dataset.labeled_subset(&held_idx);
        let models = train_fold(&encoder, &train, cfg, seed).map_err(|e| e.in_stage("cross-validation"))?;
        for (acc, r) in rows.iter_mut().zip(models.score(&held)?) {
            acc.push(r);
        }
    }
    let [model, hyper, agg, floor] = rows;
    Ok(CrossValidation {
        reports: [
            EvaluationReport::from_folds(Method::ModelFeatures, model),
            EvaluationReport::from_folds(Method::RawHyperspectral, hyper),
            EvaluationReport::from_folds(Method::RawAggregated, agg),
        ],
        floor: EvaluationReport::from_folds(Method::MeanLabel, floor),
        seed,
    })
}
