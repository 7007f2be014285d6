use super::{check_training_data, kernel_from_sq, model_from_solution, solve_dual, sq_distance_matrix, SvrConfig};
use crate::spectra::{make_folds, rmse};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub c: f64,
    pub sigma: f64,
    /// Pooled held-out RMSE over all folds; `+∞` when any fold failed to fit.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: SvrConfig,
    pub best_score: f64,
    /// One row per `(C, σ)` in `c_grid`-major order.
    pub table: Vec<GridCell>,
}

/// k-fold cross-validated search over `c_grid × sigma_grid`.
/// Ties go to the smallest C, then the smallest σ.
pub fn grid_search(
    inputs: &[Vec<f64>],
    targets: &[f64],
    c_grid: &[f64],
    sigma_grid: &[f64],
    base: &SvrConfig,
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if c_grid.is_empty() || sigma_grid.is_empty() {
        return Err(Error::Config("grid search needs non-empty C and sigma grids".into()));
    }
    check_training_data(inputs, targets)?;
    let plan = make_folds(inputs.len(), folds, seed)?;
    let n = inputs.len();
    let sq = sq_distance_matrix(inputs);
    let splits: Vec<_> = (0..plan.k()).map(|f| plan.split(f)).collect();
    if splits.iter().any(|(train, _)| train.len() < 2) {
        return Err(Error::Invalid(format!("{n} samples are too few for {folds}-fold search")));
    }

    let mut table = Vec::with_capacity(c_grid.len() * sigma_grid.len());
    for &c in c_grid {
        for &sigma in sigma_grid {
            let cfg = SvrConfig { c, sigma, ..*base };
            let score = match cfg.validate() {
                Ok(()) => cv_score(inputs, targets, &sq, &splits, &cfg),
                Err(_) => f64::INFINITY,
            };
            table.push(GridCell { c, sigma, score });
        }
    }

    let best = table
        .iter()
        .filter(|cell| cell.score.is_finite())
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.c.total_cmp(&b.c))
                .then(a.sigma.total_cmp(&b.sigma))
        })
        .copied()
        .ok_or_else(|| Error::Invalid("every grid cell failed to fit".into()))?;
    Ok(GridSearchResult {
        best: SvrConfig { c: best.c, sigma: best.sigma, ..*base },
        best_score: best.score,
        table,
    })
}

fn cv_score(
    inputs: &[Vec<f64>],
    targets: &[f64],
    sq: &[f64],
    splits: &[(Vec<usize>, Vec<usize>)],
    cfg: &SvrConfig,
) -> f64 {
    let n = inputs.len();
    let dim = inputs[0].len();
    let mut preds = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for (train, held) in splits {
        let sub_sq: Vec<f64> = train
            .iter()
            .flat_map(|&i| train.iter().map(move |&j| sq[i * n + j]))
            .collect();
        let kernel = kernel_from_sq(&sub_sq, cfg.sigma);
        let sub_targets: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
        let sol = solve_dual(&kernel, &sub_targets, cfg);
        if !sol.diagnostics.converged {
            return f64::INFINITY;
        }
        let sub_inputs: Vec<Vec<f64>> = train.iter().map(|&i| inputs[i].clone()).collect();
        let model = model_from_solution(&sub_inputs, &sol, cfg.sigma, dim);
        for &h in held {
            match model.predict(&inputs[h]) {
                Ok(p) => preds.push(p),
                Err(_) => return f64::INFINITY,
            }
            truth.push(targets[h]);
        }
    }
    rmse(&preds, &truth).unwrap_or(f64::INFINITY)
}
