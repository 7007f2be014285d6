//! Fitting the three per-class regressors.

use crate::rng::{domain, substream};
use crate::spectra::{AbundanceClass, LabeledSample};
use crate::svr::{grid_search, svr_fit, GridCell, SvrConfig, SvrModel};
use crate::{Error, Result};
use rand::Rng as _;

pub const DEFAULT_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_SIGMA_GRID: [f64; 5] = [0.1, 0.3, 1.0, 3.0, 10.0];
pub const DEFAULT_INNER_FOLDS: usize = 5;

/// How each class's `(C, σ)` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SvrSelection {
    /// One fixed configuration per class.
    Fixed([SvrConfig; 3]),
    /// Cross-validated grid search on the training samples only.
    Grid {
        c_grid: Vec<f64>,
        sigma_grid: Vec<f64>,
        folds: usize,
        base: SvrConfig,
    },
}

impl Default for SvrSelection {
    fn default() -> Self {
        SvrSelection::Grid {
            c_grid: DEFAULT_C_GRID.to_vec(),
            sigma_grid: DEFAULT_SIGMA_GRID.to_vec(),
            folds: DEFAULT_INNER_FOLDS,
            base: SvrConfig::default(),
        }
    }
}

impl SvrSelection {
    pub fn validate(&self) -> Result<()> {
        match self {
            SvrSelection::Fixed(cfgs) => cfgs.iter().try_for_each(SvrConfig::validate),
            SvrSelection::Grid { c_grid, sigma_grid, folds, base } => {
                base.validate()?;
                if c_grid.is_empty() || sigma_grid.is_empty() || *folds < 2 {
                    return Err(Error::Config("SVR grid needs values and at least 2 folds".into()));
                }
                if c_grid.iter().chain(sigma_grid).any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::Config("SVR grid values must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

/// Fits one SVR per class on already standardized features.
/// The inner grid-search folds never exceed the sample count.
pub fn fit_class_svrs(
    features: &[Vec<f64>],
    samples: &[LabeledSample],
    selection: &SvrSelection,
    seed: u64,
) -> Result<[SvrModel; 3]> {
    selection.validate()?;
    let mut models = Vec::with_capacity(3);
    for class in AbundanceClass::ALL {
        let targets: Vec<f64> = samples.iter().map(|s| s.label.get(class)).collect();
        let candidates = match selection {
            SvrSelection::Fixed(cfgs) => vec![cfgs[class.index()]],
            SvrSelection::Grid { c_grid, sigma_grid, folds, base } => {
                let inner_seed = substream(seed, domain::FOLDS, 1 + class.index() as u64).random();
                let search = grid_search(features, &targets, c_grid, sigma_grid, base, (*folds).min(features.len()), inner_seed)?;
                ranked_cells(&search.table, base)
            }
        };
        models.push(fit_first_converged(features, &targets, &candidates).map_err(|e| e.in_stage(class.name()))?);
    }
    Ok(models.try_into().expect("three classes"))
}

/// Finite-score cells, best first, ties to smaller C then smaller σ.
fn ranked_cells(table: &[GridCell], base: &SvrConfig) -> Vec<SvrConfig> {
    let mut cells: Vec<&GridCell> = table.iter().filter(|c| c.score.is_finite()).collect();
    cells.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.c.total_cmp(&b.c))
            .then(a.sigma.total_cmp(&b.sigma))
    });
    cells.iter().map(|c| SvrConfig { c: c.c, sigma: c.sigma, ..*base }).collect()
}

/// A cell that converged on every inner fold can still stall on the full
/// training set; the next-ranked cell is used in that case.
fn fit_first_converged(features: &[Vec<f64>], targets: &[f64], candidates: &[SvrConfig]) -> Result<SvrModel> {
    let mut last = None;
    for cfg in candidates {
        match svr_fit(features, targets, cfg) {
            Ok(fit) => return Ok(fit.model),
            Err(e @ Error::NotConverged { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Invalid("no SVR configuration to fit".into())))
}
