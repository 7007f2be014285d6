//! SMO over `β = (α, α*)` with labels `y = (+1…, −1…)`:
//!
//! ```text
//! min ½ βᵀQβ + pᵀβ,  Q_st = y_s y_t K(s mod n, t mod n),
//! p = (ε − t, ε + t),  0 ≤ β ≤ C,  yᵀβ = 0
//! ```

use super::{FitDiagnostics, SvrConfig};

/// Second-order curvature floor for a pair whose kernel rows coincide.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub bias: f64,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `max(m − M, 0)` recomputed from scratch.
    pub gap: f64,
    /// Largest distance of any dual variable outside `[0, C]`.
    pub box_violation: f64,
    /// `|Σ(α − α*)|`.
    pub balance: f64,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.gap < tol && self.box_violation <= 1e-9 && self.balance < tol
    }
}

struct Problem<'a> {
    kernel: &'a [f64],
    n: usize,
}

impl Problem<'_> {
    fn y(&self, s: usize) -> f64 {
        if s < self.n {
            1.0
        } else {
            -1.0
        }
    }

    fn q(&self, s: usize, t: usize) -> f64 {
        self.y(s) * self.y(t) * self.kernel[(s % self.n) * self.n + t % self.n]
    }
}

fn linear_term(targets: &[f64], epsilon: f64) -> Vec<f64> {
    let n = targets.len();
    (0..2 * n)
        .map(|s| if s < n { epsilon - targets[s] } else { epsilon + targets[s - n] })
        .collect()
}

fn in_up(y: f64, beta: f64, c: f64) -> bool {
    (y > 0.0 && beta < c) || (y < 0.0 && beta > 0.0)
}

fn in_low(y: f64, beta: f64, c: f64) -> bool {
    (y > 0.0 && beta > 0.0) || (y < 0.0 && beta < c)
}

/// Returns `(i, m, j, M)` for the maximal violating pair.
fn select_pair(p: &Problem, beta: &[f64], grad: &[f64], c: f64) -> (Option<usize>, f64, Option<usize>, f64) {
    let (mut i, mut m) = (None, f64::NEG_INFINITY);
    let (mut j, mut big_m) = (None, f64::INFINITY);
    for s in 0..beta.len() {
        let y = p.y(s);
        let v = -y * grad[s];
        if in_up(y, beta[s], c) && v > m {
            m = v;
            i = Some(s);
        }
        if in_low(y, beta[s], c) && v < big_m {
            big_m = v;
            j = Some(s);
        }
    }
    (i, m, j, big_m)
}

fn gap_of(m: f64, big_m: f64) -> f64 {
    if m.is_finite() && big_m.is_finite() {
        (m - big_m).max(0.0)
    } else {
        0.0
    }
}

/// Solves the dual for a precomputed row-major kernel matrix.
/// Never fails; non-convergence is reported in the diagnostics.
pub fn solve_dual(kernel: &[f64], targets: &[f64], cfg: &SvrConfig) -> DualSolution {
    let n = targets.len();
    assert_eq!(kernel.len(), n * n, "kernel must be n×n");
    let p = Problem { kernel, n };
    let c = cfg.c;
    let lin = linear_term(targets, cfg.epsilon);
    let mut beta = vec![0.0; 2 * n];
    let mut grad = lin.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut gap;

    loop {
        let (i, m, j, big_m) = select_pair(&p, &beta, &grad, c);
        gap = gap_of(m, big_m);
        let (Some(i), Some(j)) = (i, j) else {
            converged = true;
            break;
        };
        if m - big_m < cfg.tol {
            converged = true;
            break;
        }
        if iterations == cfg.max_passes {
            break;
        }
        iterations += 1;

        let (yi, yj) = (p.y(i), p.y(j));
        let (old_i, old_j) = (beta[i], beta[j]);
        let quad = (p.q(i, i) + p.q(j, j) - 2.0 * yi * yj * p.q(i, j)).max(TAU);
        if yi != yj {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = beta[i] - beta[j];
            beta[i] += delta;
            beta[j] += delta;
            if diff > 0.0 {
                if beta[j] < 0.0 {
                    beta[j] = 0.0;
                    beta[i] = diff;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = -diff;
            }
            if diff > 0.0 {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = c - diff;
                }
            } else if beta[j] > c {
                beta[j] = c;
                beta[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = beta[i] + beta[j];
            beta[i] -= delta;
            beta[j] += delta;
            if sum > c {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = sum - c;
                }
            } else if beta[j] < 0.0 {
                beta[j] = 0.0;
                beta[i] = sum;
            }
            if sum > c {
                if beta[j] > c {
                    beta[j] = c;
                    beta[i] = sum - c;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = sum;
            }
        }

        let (di, dj) = (beta[i] - old_i, beta[j] - old_j);
        for (s, g) in grad.iter_mut().enumerate() {
            *g += p.q(s, i) * di + p.q(s, j) * dj;
        }
    }

    let bias = -rho(&p, &beta, &grad, c);
    DualSolution {
        alpha: beta[..n].to_vec(),
        alpha_star: beta[n..].to_vec(),
        bias,
        diagnostics: FitDiagnostics {
            iterations,
            kkt_gap: gap,
            converged,
        },
    }
}

/// Average of `y_s ∇_s` over free variables, else the midpoint of the
/// feasible interval.
fn rho(p: &Problem, beta: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for s in 0..beta.len() {
        let yg = p.y(s) * grad[s];
        let at_upper = beta[s] >= c;
        let at_lower = beta[s] <= 0.0;
        if at_upper {
            if p.y(s) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if p.y(s) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// `½ (α−α*)ᵀK(α−α*) + ε Σ(α+α*) − Σ t(α−α*)`.
pub fn dual_objective(kernel: &[f64], targets: &[f64], epsilon: f64, alpha: &[f64], alpha_star: &[f64]) -> f64 {
    let n = targets.len();
    let coef: Vec<f64> = alpha.iter().zip(alpha_star).map(|(a, s)| a - s).collect();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += coef[i] * kernel[i * n + j] * coef[j];
        }
    }
    let eps_term: f64 = alpha.iter().zip(alpha_star).map(|(a, s)| a + s).sum::<f64>() * epsilon;
    let lin: f64 = coef.iter().zip(targets).map(|(c, t)| c * t).sum();
    0.5 * quad + eps_term - lin
}

/// Post-hoc audit of a dual point; recomputes every gradient.
pub fn kkt_report(kernel: &[f64], targets: &[f64], cfg: &SvrConfig, alpha: &[f64], alpha_star: &[f64]) -> KktReport {
    let n = targets.len();
    let p = Problem { kernel, n };
    let beta: Vec<f64> = alpha.iter().chain(alpha_star).copied().collect();
    let lin = linear_term(targets, cfg.epsilon);
    let grad: Vec<f64> = (0..2 * n)
        .map(|s| lin[s] + (0..2 * n).map(|t| p.q(s, t) * beta[t]).sum::<f64>())
        .collect();
    let (_, m, _, big_m) = select_pair(&p, &beta, &grad, cfg.c);
    let box_violation = beta
        .iter()
        .map(|&b| (-b).max(b - cfg.c).max(0.0))
        .fold(0.0, f64::max);
    let balance = alpha.iter().zip(alpha_star).map(|(a, s)| a - s).sum::<f64>().abs();
    KktReport {
        gap: gap_of(m, big_m),
        box_violation,
        balance,
    }
}
