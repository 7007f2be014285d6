//! ε-insensitive support vector regression with an RBF kernel.
//!
//! Training solves the standard dual over the stacked variable
//! `β = (α, α*)` with sequential minimal optimisation, choosing the
//! maximal KKT-violating pair at every step.
//!
//! `SVRM` layout, little-endian:
//!
//! ```text
//! "SVRM" | version: u32 = 1 | sigma: f64 | bias: f64 | count: u32 | dim: u32 |
//! dual coefficients: f64 × count | support vectors: f64 × count·dim (row-major)
//! ```

mod grid;
mod smo;

pub use grid::{grid_search, GridCell, GridSearchResult};
pub use smo::{dual_objective, kkt_report, solve_dual, DualSolution, KktReport};

use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SVRM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrConfig {
    pub c: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            c: 10.0,
            sigma: 1.0,
            epsilon: 0.05,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.c) || !pos(self.sigma) || !pos(self.tol) || self.max_passes == 0 {
            return Err(Error::Config(format!(
                "SVR needs C, sigma, tol and max_passes > 0 (got C={}, sigma={}, tol={}, max_passes={})",
                self.c, self.sigma, self.tol, self.max_passes
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("SVR epsilon {} must be >= 0", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// Maximal violating-pair gap `m(β) − M(β)` at exit.
    pub kkt_gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i − α*_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub sigma: f64,
    /// Input width; kept separately so a model without support vectors
    /// still rejects inputs of the wrong length.
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrFit {
    pub model: SvrModel,
    pub diagnostics: FitDiagnostics,
}

pub fn rbf_kernel(u: &[f64], v: &[f64], sigma: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("kernel inputs of length {} and {}", u.len(), v.len())));
    }
    if !(sigma > 0.0) {
        return Err(Error::Invalid(format!("kernel width {sigma} must be positive")));
    }
    Ok(rbf_from_sq(squared_distance(u, v), sigma))
}

pub(crate) fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn rbf_from_sq(d2: f64, sigma: f64) -> f64 {
    (-d2 / (2.0 * sigma * sigma)).exp()
}

pub(crate) fn check_training_data(inputs: &[Vec<f64>], targets: &[f64]) -> Result<usize> {
    if inputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if inputs.len() < 2 {
        return Err(Error::Invalid("SVR needs at least 2 samples".into()));
    }
    let dim = inputs[0].len();
    if dim == 0 || inputs.iter().any(|x| x.len() != dim) {
        return Err(Error::Shape("SVR inputs must share a positive width".into()));
    }
    if targets.iter().chain(inputs.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("SVR training data must be finite".into()));
    }
    Ok(dim)
}

pub(crate) fn sq_distance_matrix(inputs: &[Vec<f64>]) -> Vec<f64> {
    let n = inputs.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = squared_distance(&inputs[i], &inputs[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

pub(crate) fn kernel_from_sq(sq: &[f64], sigma: f64) -> Vec<f64> {
    sq.iter().map(|&d| rbf_from_sq(d, sigma)).collect()
}

/// Fits one regressor. Non-convergence is reported as
/// [`Error::NotConverged`], which still carries the last model.
pub fn svr_fit(inputs: &[Vec<f64>], targets: &[f64], cfg: &SvrConfig) -> Result<SvrFit> {
    cfg.validate()?;
    let dim = check_training_data(inputs, targets)?;
    let kernel = kernel_from_sq(&sq_distance_matrix(inputs), cfg.sigma);
    let sol = solve_dual(&kernel, targets, cfg);
    let model = model_from_solution(inputs, &sol, cfg.sigma, dim);
    if !sol.diagnostics.converged {
        return Err(Error::NotConverged {
            diagnostics: sol.diagnostics,
            model: Box::new(model),
        });
    }
    Ok(SvrFit {
        model,
        diagnostics: sol.diagnostics,
    })
}

pub(crate) fn model_from_solution(inputs: &[Vec<f64>], sol: &DualSolution, sigma: f64, dim: usize) -> SvrModel {
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (i, x) in inputs.iter().enumerate() {
        let coef = sol.alpha[i] - sol.alpha_star[i];
        if coef != 0.0 {
            support_vectors.push(x.clone());
            dual_coefs.push(coef);
        }
    }
    SvrModel {
        support_vectors,
        dual_coefs,
        bias: sol.bias,
        sigma,
        dim,
    }
}

impl SvrModel {
    /// A model with no support vectors that predicts `bias` everywhere.
    pub fn constant(bias: f64, dim: usize, sigma: f64) -> Self {
        SvrModel {
            support_vectors: Vec::new(),
            dual_coefs: Vec::new(),
            bias,
            sigma,
            dim,
        }
    }

    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.dim {
            return Err(Error::Shape(format!(
                "SVR expects {} features, got {}",
                self.dim,
                input.len()
            )));
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * rbf_from_sq(squared_distance(sv, input), self.sigma))
            .sum::<f64>()
            + self.bias)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.sigma.to_le_bytes());
        out.extend_from_slice(&self.bias.to_le_bytes());
        out.extend_from_slice(&(self.dual_coefs.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for c in &self.dual_coefs {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for v in self.support_vectors.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 4 + 4 + 8 + 8 + 4 + 4;
        if bytes.len() < HEADER || &bytes[..4] != MAGIC {
            return Err(Error::Format("bad SVR model magic".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported SVR model version {version}")));
        }
        let sigma = f64_at(8);
        let bias = f64_at(16);
        let count = u32_at(24) as usize;
        let dim = u32_at(28) as usize;
        let expected = HEADER + 8 * count * (1 + dim);
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "SVR model has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let floats: Vec<f64> = bytes[HEADER..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if !(sigma > 0.0) || !bias.is_finite() || floats.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("SVR model contains invalid values".into()));
        }
        let (coefs, vectors) = floats.split_at(count);
        Ok(SvrModel {
            support_vectors: vectors.chunks_exact(dim.max(1)).take(count).map(<[f64]>::to_vec).collect(),
            dual_coefs: coefs.to_vec(),
            bias,
            sigma,
            dim,
        })
    }
}
