//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Unknown keys and repeated keys are errors. Lists are comma separated.

use std::path::Path;

use crate::contrastive::{AugmentationConfig, FinetuneConfig, PretrainConfig};
use crate::pipeline::{EvaluationConfig, PipelineConfig, SvrSelection, DEFAULT_C_GRID, DEFAULT_SIGMA_GRID};
use crate::svr::SvrConfig;
use crate::synth::{BandAggregation, SceneConfig, DEFAULT_AGGREGATED_BANDS, DEFAULT_NARROW_FRACTION, MIN_ENDMEMBER_BANDS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SvrMode {
    Grid,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    // scene
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    pub noise_std: f64,
    pub pure_fraction: f64,
    pub narrow_fraction: f64,
    pub labeled: usize,
    // pretraining
    pub tau: f64,
    pub batch_size: usize,
    pub epochs_self: usize,
    pub lr_self: f64,
    pub wd_self: f64,
    /// 0 means every unlabeled pixel.
    pub max_unlabeled: usize,
    // augmentation
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub num_knots: usize,
    // fine-tuning
    pub lambda: f64,
    pub epochs_ft: usize,
    pub lr_ft: f64,
    pub wd_ft: f64,
    // regression
    pub svr_mode: SvrMode,
    pub svr_c: f64,
    pub svr_sigma: f64,
    pub svr_epsilon: f64,
    pub svr_tol: f64,
    pub svr_max_passes: usize,
    pub svr_c_grid: Vec<f64>,
    pub svr_sigma_grid: Vec<f64>,
    pub svr_inner_folds: usize,
    // evaluation
    pub k: usize,
    pub split: f64,
    pub aggregated_bands: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pre = PretrainConfig::default();
        let aug = AugmentationConfig::default();
        let ft = FinetuneConfig::default();
        let svr = SvrConfig::default();
        let scene = SceneConfig::default();
        RunConfig {
            seed: 0,
            bands: scene.bands,
            height: scene.height,
            width: scene.width,
            noise_std: scene.noise_std,
            pure_fraction: scene.pure_fraction,
            narrow_fraction: DEFAULT_NARROW_FRACTION,
            labeled: 40,
            tau: pre.tau,
            batch_size: pre.batch_size,
            epochs_self: pre.epochs,
            lr_self: pre.lr,
            wd_self: pre.weight_decay,
            max_unlabeled: 0,
            alpha_min: aug.alpha_range.0,
            alpha_max: aug.alpha_range.1,
            sigma1: aug.sigma1,
            sigma2: aug.sigma2,
            num_knots: aug.num_knots,
            lambda: ft.lambda,
            epochs_ft: ft.epochs,
            lr_ft: ft.lr,
            wd_ft: ft.weight_decay,
            svr_mode: SvrMode::Grid,
            svr_c: svr.c,
            svr_sigma: svr.sigma,
            svr_epsilon: svr.epsilon,
            svr_tol: svr.tol,
            svr_max_passes: svr.max_passes,
            svr_c_grid: DEFAULT_C_GRID.to_vec(),
            svr_sigma_grid: DEFAULT_SIGMA_GRID.to_vec(),
            svr_inner_folds: 5,
            k: 5,
            split: 0.7,
            aggregated_bands: DEFAULT_AGGREGATED_BANDS,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses and validates. Keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", n + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("invalid configuration: "))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = num(key, v)?,
            "bands" => self.bands = num(key, v)?,
            "height" => self.height = num(key, v)?,
            "width" => self.width = num(key, v)?,
            "noise_std" => self.noise_std = num(key, v)?,
            "pure_fraction" => self.pure_fraction = num(key, v)?,
            "narrow_fraction" => self.narrow_fraction = num(key, v)?,
            "labeled" => self.labeled = num(key, v)?,
            "tau" => self.tau = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "epochs_self" => self.epochs_self = num(key, v)?,
            "lr_self" => self.lr_self = num(key, v)?,
            "wd_self" => self.wd_self = num(key, v)?,
            "max_unlabeled" => self.max_unlabeled = num(key, v)?,
            "alpha_min" => self.alpha_min = num(key, v)?,
            "alpha_max" => self.alpha_max = num(key, v)?,
            "sigma1" => self.sigma1 = num(key, v)?,
            "sigma2" => self.sigma2 = num(key, v)?,
            "num_knots" => self.num_knots = num(key, v)?,
            "lambda" => self.lambda = num(key, v)?,
            "epochs_ft" => self.epochs_ft = num(key, v)?,
            "lr_ft" => self.lr_ft = num(key, v)?,
            "wd_ft" => self.wd_ft = num(key, v)?,
            "svr_mode" => {
                self.svr_mode = match v {
                    "grid" => SvrMode::Grid,
                    "fixed" => SvrMode::Fixed,
                    _ => return Err(Error::Config(format!("svr_mode must be grid or fixed, got {v:?}"))),
                }
            }
            "svr_c" => self.svr_c = num(key, v)?,
            "svr_sigma" => self.svr_sigma = num(key, v)?,
            "svr_epsilon" => self.svr_epsilon = num(key, v)?,
            "svr_tol" => self.svr_tol = num(key, v)?,
            "svr_max_passes" => self.svr_max_passes = num(key, v)?,
            "svr_c_grid" => self.svr_c_grid = list(key, v)?,
            "svr_sigma_grid" => self.svr_sigma_grid = list(key, v)?,
            "svr_inner_folds" => self.svr_inner_folds = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "split" => self.split = num(key, v)?,
            "aggregated_bands" => self.aggregated_bands = num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a form [`RunConfig::parse`] accepts.
    pub fn to_text(&self) -> String {
        let mode = match self.svr_mode {
            SvrMode::Grid => "grid",
            SvrMode::Fixed => "fixed",
        };
        let pairs: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("bands", self.bands.to_string()),
            ("height", self.height.to_string()),
            ("width", self.width.to_string()),
            ("noise_std", self.noise_std.to_string()),
            ("pure_fraction", self.pure_fraction.to_string()),
            ("narrow_fraction", self.narrow_fraction.to_string()),
            ("labeled", self.labeled.to_string()),
            ("tau", self.tau.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs_self", self.epochs_self.to_string()),
            ("lr_self", self.lr_self.to_string()),
            ("wd_self", self.wd_self.to_string()),
            ("max_unlabeled", self.max_unlabeled.to_string()),
            ("alpha_min", self.alpha_min.to_string()),
            ("alpha_max", self.alpha_max.to_string()),
            ("sigma1", self.sigma1.to_string()),
            ("sigma2", self.sigma2.to_string()),
            ("num_knots", self.num_knots.to_string()),
            ("lambda", self.lambda.to_string()),
            ("epochs_ft", self.epochs_ft.to_string()),
            ("lr_ft", self.lr_ft.to_string()),
            ("wd_ft", self.wd_ft.to_string()),
            ("svr_mode", mode.to_string()),
            ("svr_c", self.svr_c.to_string()),
            ("svr_sigma", self.svr_sigma.to_string()),
            ("svr_epsilon", self.svr_epsilon.to_string()),
            ("svr_tol", self.svr_tol.to_string()),
            ("svr_max_passes", self.svr_max_passes.to_string()),
            ("svr_c_grid", join(&self.svr_c_grid)),
            ("svr_sigma_grid", join(&self.svr_sigma_grid)),
            ("svr_inner_folds", self.svr_inner_folds.to_string()),
            ("k", self.k.to_string()),
            ("split", self.split.to_string()),
            ("aggregated_bands", self.aggregated_bands.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.scene_config().validate()?;
        if self.bands < MIN_ENDMEMBER_BANDS {
            return Err(Error::Config(format!("bands = {} below {MIN_ENDMEMBER_BANDS}", self.bands)));
        }
        if !(0.0..=1.0).contains(&self.narrow_fraction) {
            return Err(Error::Config(format!("narrow_fraction {} outside [0, 1]", self.narrow_fraction)));
        }
        self.pipeline_config().validate()?;
        if self.k < 2 {
            return Err(Error::Config(format!("k = {} must be at least 2", self.k)));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split {} outside (0, 1)", self.split)));
        }
        if self.aggregated_bands == 0 || self.aggregated_bands > self.bands {
            return Err(Error::Config(format!(
                "aggregated_bands {} must be in 1..={}",
                self.aggregated_bands, self.bands
            )));
        }
        Ok(())
    }

    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig {
            height: self.height,
            width: self.width,
            bands: self.bands,
            noise_std: self.noise_std,
            pure_fraction: self.pure_fraction,
            seed: self.seed,
            ..SceneConfig::default()
        }
    }

    pub fn svr_selection(&self) -> SvrSelection {
        let base = SvrConfig {
            c: self.svr_c,
            sigma: self.svr_sigma,
            epsilon: self.svr_epsilon,
            tol: self.svr_tol,
            max_passes: self.svr_max_passes,
        };
        match self.svr_mode {
            SvrMode::Fixed => SvrSelection::Fixed([base; 3]),
            SvrMode::Grid => SvrSelection::Grid {
                c_grid: self.svr_c_grid.clone(),
                sigma_grid: self.svr_sigma_grid.clone(),
                folds: self.svr_inner_folds,
                base,
            },
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            pretrain: PretrainConfig {
                tau: self.tau,
                batch_size: self.batch_size,
                epochs: self.epochs_self,
                lr: self.lr_self,
                weight_decay: self.wd_self,
                seed: self.seed,
                max_unlabeled: (self.max_unlabeled > 0).then_some(self.max_unlabeled),
            },
            augment: AugmentationConfig {
                alpha_range: (self.alpha_min, self.alpha_max),
                sigma1: self.sigma1,
                sigma2: self.sigma2,
                num_knots: self.num_knots,
                seed: self.seed,
            },
            finetune: FinetuneConfig {
                lambda: self.lambda,
                tau: self.tau,
                epochs: self.epochs_ft,
                lr: self.lr_ft,
                weight_decay: self.wd_ft,
            },
            svr: self.svr_selection(),
        }
    }

    /// Aggregation for a cube with `bands` bands.
    pub fn aggregation(&self, bands: usize) -> Result<BandAggregation> {
        BandAggregation::equal_width(bands, self.aggregated_bands)
    }

    pub fn evaluation_config(&self, bands: usize) -> Result<EvaluationConfig> {
        Ok(EvaluationConfig {
            pipeline: self.pipeline_config(),
            folds: self.k,
            aggregation: Some(self.aggregation(bands)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_published_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!((c.tau, c.lr_self, c.wd_self, c.lr_ft, c.wd_ft, c.lambda), (0.0866, 0.0094, 0.0343, 0.0051, 0.0066, 0.6));
        assert_eq!((c.k, c.split, c.bands), (5, 0.7, 234));
        c.validate().unwrap();
    }

    #[test]
    fn parse_overrides_and_comments() {
        let c = RunConfig::parse("# run\nseed = 9\n\nheight=4 # tiny\nsvr_c_grid = 1, 10\nsvr_mode = fixed\n").unwrap();
        assert_eq!((c.seed, c.height, c.width), (9, 4, 64));
        assert_eq!(c.svr_c_grid, vec![1.0, 10.0]);
        assert!(matches!(c.svr_selection(), SvrSelection::Fixed(_)));
    }

    #[test]
    fn rejects_bad_input() {
        for bad in ["colour = red", "seed = -1", "seed 3", "seed = 1\nseed = 2", "height = 0", "tau = 0", "split = 1", "lambda = -1", "svr_mode = auto", "k = 1", "num_knots = 1"] {
            assert!(RunConfig::parse(bad).is_err(), "{bad}");
        }
        let e = RunConfig::parse("x = 1").unwrap_err().to_string();
        assert!(e.contains("line 1") && e.contains("unknown key"), "{e}");
    }

    #[test]
    fn text_round_trip() {
        let c = RunConfig { seed: 42, svr_sigma_grid: vec![0.5, 2.0], max_unlabeled: 300, ..RunConfig::default() };
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn derived_configs() {
        let c = RunConfig::parse("seed = 3\nmax_unlabeled = 128\naggregated_bands = 10").unwrap();
        let p = c.pipeline_config();
        assert_eq!((p.pretrain.seed, p.augment.seed, p.pretrain.max_unlabeled), (3, 3, Some(128)));
        assert_eq!(c.evaluation_config(234).unwrap().aggregation.unwrap().len(), 10);
        assert_eq!(RunConfig::default().pipeline_config().pretrain.max_unlabeled, None);
    }
}
