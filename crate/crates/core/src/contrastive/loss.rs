//! Contrastive losses over cosine similarity with analytic gradients.
//!
//! Both losses are functions of `S = ẐẐᵀ/τ` where `Ẑ` holds the
//! row-normalised embeddings. Each returns `∂L/∂S` implicitly through
//! a coefficient matrix `A`, so that `∂L/∂Ẑ = (A + Aᵀ)Ẑ / τ`.

use crate::nn::Matrix;
use crate::spectra::AbundanceVector;
use crate::{Error, Result};

const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// Gradient with respect to the unnormalised embeddings.
    pub grad: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneLossOutput {
    pub loss: f64,
    pub grad: Matrix,
    /// Anchors without any positive partner; excluded from the mean.
    pub skipped: usize,
}

pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", u.len(), v.len())));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu < MIN_NORM || nv < MIN_NORM {
        return Err(Error::Invalid("cosine similarity of a zero-norm vector".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Normalized {
    unit: Matrix,
    norms: Vec<f64>,
}

fn normalize_rows(z: &Matrix) -> Result<Normalized> {
    let mut unit = z.clone();
    let mut norms = Vec::with_capacity(z.rows);
    for r in 0..z.rows {
        let n = norm(z.row(r));
        if !(n >= MIN_NORM) {
            return Err(Error::Invalid(format!("embedding row {r} has zero norm")));
        }
        unit.row_mut(r).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    Ok(Normalized { unit, norms })
}

fn scaled_similarities(unit: &Matrix, tau: f64) -> Vec<f64> {
    let n = unit.rows;
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let d: f64 = unit.row(i).iter().zip(unit.row(j)).map(|(a, b)| a * b).sum();
            s[i * n + j] = d / tau;
            s[j * n + i] = d / tau;
        }
    }
    s
}

/// Softmax of `row` restricted to `keep`, written into `out` (zeros elsewhere).
/// Returns the log-sum-exp over the kept entries.
fn masked_softmax(row: &[f64], keep: impl Fn(usize) -> bool, out: &mut [f64]) -> f64 {
    let max = (0..row.len()).filter(|&j| keep(j)).map(|j| row[j]).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for j in 0..row.len() {
        out[j] = if keep(j) { (row[j] - max).exp() } else { 0.0 };
        sum += out[j];
    }
    out.iter_mut().for_each(|v| *v /= sum);
    max + sum.ln()
}

/// Maps `A` (with `∂L/∂S = A`) back to the raw embeddings.
fn backprop(coef: &[f64], normed: &Normalized, tau: f64) -> Matrix {
    let unit = &normed.unit;
    let (n, d) = (unit.rows, unit.cols);
    let mut grad = Matrix::zeros(n, d);
    for k in 0..n {
        let mut g_unit = vec![0.0; d];
        for j in 0..n {
            let w = (coef[k * n + j] + coef[j * n + k]) / tau;
            if w != 0.0 {
                for (g, u) in g_unit.iter_mut().zip(unit.row(j)) {
                    *g += w * u;
                }
            }
        }
        let u = unit.row(k);
        let proj: f64 = u.iter().zip(&g_unit).map(|(a, b)| a * b).sum();
        for ((out, g), uk) in grad.row_mut(k).iter_mut().zip(&g_unit).zip(u) {
            *out = (g - uk * proj) / normed.norms[k];
        }
    }
    grad
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature {tau} must be positive")))
    }
}

/// NT-Xent over `2B` rows: rows `i` and `(i + B) mod 2B` are positives,
/// the denominator runs over every `j ≠ i`. Mean over all `2B` anchors.
pub fn simclr_loss(z: &Matrix, tau: f64) -> Result<LossOutput> {
    check_tau(tau)?;
    if z.rows < 2 || !z.rows.is_multiple_of(2) {
        return Err(Error::Shape(format!("contrastive batch needs an even row count >= 2, got {}", z.rows)));
    }
    let n = z.rows;
    let b = n / 2;
    let normed = normalize_rows(z)?;
    let s = scaled_similarities(&normed.unit, tau);
    let mut coef = vec![0.0; n * n];
    let mut loss = 0.0;
    for i in 0..n {
        let pos = (i + b) % n;
        let row = &s[i * n..(i + 1) * n];
        let lse = masked_softmax(row, |j| j != i, &mut coef[i * n..(i + 1) * n]);
        loss += lse - row[pos];
        coef[i * n + pos] -= 1.0;
    }
    let scale = 1.0 / n as f64;
    coef.iter_mut().for_each(|c| *c *= scale);
    Ok(LossOutput {
        loss: loss * scale,
        grad: backprop(&coef, &normed, tau),
    })
}

/// Label-aware contrastive loss. Positives of anchor `i` are the other
/// samples whose label lies within Euclidean distance `lambda`; the
/// numerator sums their exponentials, the denominator every `j ≠ i`.
pub fn finetune_loss(z: &Matrix, labels: &[AbundanceVector], lambda: f64, tau: f64) -> Result<FinetuneLossOutput> {
    check_tau(tau)?;
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("label threshold {lambda} must be positive")));
    }
    if z.rows < 2 || labels.len() != z.rows {
        return Err(Error::Shape(format!("{} embeddings vs {} labels (need >= 2)", z.rows, labels.len())));
    }
    let n = z.rows;
    let normed = normalize_rows(z)?;
    let s = scaled_similarities(&normed.unit, tau);
    let mut coef = vec![0.0; n * n];
    let mut positive = vec![0.0; n];
    let mut loss = 0.0;
    let mut valid = 0usize;
    for i in 0..n {
        let is_pos = |k: usize| k != i && labels[i].distance(&labels[k]) < lambda;
        if !(0..n).any(is_pos) {
            continue;
        }
        valid += 1;
        let row = &s[i * n..(i + 1) * n];
        let lse_all = masked_softmax(row, |j| j != i, &mut coef[i * n..(i + 1) * n]);
        let lse_pos = masked_softmax(row, is_pos, &mut positive);
        loss += lse_all - lse_pos;
        for (c, p) in coef[i * n..(i + 1) * n].iter_mut().zip(&positive) {
            *c -= p;
        }
    }
    if valid == 0 {
        return Err(Error::NoPositivePairs { threshold: lambda });
    }
    let scale = 1.0 / valid as f64;
    coef.iter_mut().for_each(|c| *c *= scale);
    Ok(FinetuneLossOutput {
        loss: loss * scale,
        grad: backprop(&coef, &normed, tau),
        skipped: n - valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, substream};
    use proptest::prelude::*;
    use rand::Rng as _;

    fn random_matrix(rows: usize, cols: usize, idx: u64) -> Matrix {
        let mut rng = substream(77, domain::SUBSET, idx);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_labels(n: usize, idx: u64) -> Vec<AbundanceVector> {
        let mut rng = substream(78, domain::SUBSET, idx);
        (0..n)
            .map(|_| {
                let r: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.05f64..1.0).powi(4));
                let s: f64 = r.iter().sum();
                AbundanceVector::from_label(r[0] / s, r[1] / s, r[2] / s).unwrap()
            })
            .collect()
    }

    fn sim(a: &[f64], b: &[f64]) -> f64 {
        cosine_sim(a, b).unwrap()
    }

    /// Term-by-term NT-Xent with plain exponentials.
    fn simclr_direct(z: &Matrix, tau: f64) -> f64 {
        let n = z.rows;
        let b = n / 2;
        let mut total = 0.0;
        for i in 0..n {
            let pos = if i < b { i + b } else { i - b };
            let num = (sim(z.row(i), z.row(pos)) / tau).exp();
            let mut den = 0.0;
            for j in 0..n {
                if j != i {
                    den += (sim(z.row(i), z.row(j)) / tau).exp();
                }
            }
            total += -(num / den).ln();
        }
        total / n as f64
    }

    fn finetune_direct(z: &Matrix, labels: &[AbundanceVector], lambda: f64, tau: f64) -> f64 {
        let n = z.rows;
        let (mut total, mut valid) = (0.0, 0);
        for i in 0..n {
            let mut num = 0.0;
            let mut den = 0.0;
            let mut any = false;
            for k in 0..n {
                if k == i {
                    continue;
                }
                let e = (sim(z.row(i), z.row(k)) / tau).exp();
                den += e;
                if labels[i].distance(&labels[k]) < lambda {
                    num += e;
                    any = true;
                }
            }
            if any {
                total += -(num / den).ln();
                valid += 1;
            }
        }
        total / valid as f64
    }

    /// Entry errors are scaled by the largest gradient magnitude so that
    /// near-zero entries are not judged on truncation noise.
    fn fd_check(z: &Matrix, analytic: &Matrix, f: impl Fn(&Matrix) -> f64) {
        let h = 1e-5;
        let scale = analytic.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..z.data.len() {
            let mut plus = z.clone();
            plus.data[i] += h;
            let mut minus = z.clone();
            minus.data[i] -= h;
            let num = (f(&plus) - f(&minus)) / (2.0 * h);
            let a = analytic.data[i];
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(scale).max(1e-12);
            assert!(rel < 1e-6, "entry {i}: analytic {a} vs numeric {num}");
        }
    }

    #[test]
    fn cosine_examples() {
        assert!((sim(&[0.3, -2.0], &[0.3, -2.0]) - 1.0).abs() < 1e-15);
        assert!((sim(&[0.3, -2.0], &[-0.3, 2.0]) + 1.0).abs() < 1e-15);
        assert_eq!(sim(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert!(cosine_sim(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(cosine_sim(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn single_pair_has_zero_loss() {
        let z = random_matrix(2, 16, 0);
        assert_eq!(simclr_loss(&z, 0.0866).unwrap().loss, 0.0);
    }

    #[test]
    fn simclr_matches_direct_evaluation_and_fd() {
        for idx in 0..5 {
            let z = random_matrix(8, 16, idx);
            let tau = 0.5;
            let out = simclr_loss(&z, tau).unwrap();
            assert!(out.loss > 0.0);
            assert!((out.loss - simclr_direct(&z, tau)).abs() < 1e-10);
            fd_check(&z, &out.grad, |m| simclr_loss(m, tau).unwrap().loss);
        }
    }

    #[test]
    fn finetune_matches_direct_evaluation_and_fd() {
        for idx in 0..5 {
            let z = random_matrix(6, 16, 10 + idx);
            let labels = random_labels(6, idx);
            let out = finetune_loss(&z, &labels, 0.6, 0.0866).unwrap();
            assert!((out.loss - finetune_direct(&z, &labels, 0.6, 0.0866)).abs() < 1e-10);
            fd_check(&z, &out.grad, |m| finetune_loss(m, &labels, 0.6, 0.0866).unwrap().loss);
        }
    }

    #[test]
    fn finetune_identical_samples_have_zero_loss() {
        let row: Vec<f64> = (0..16).map(|i| i as f64 - 7.5).collect();
        let z = Matrix::from_rows(&vec![row; 5]).unwrap();
        let labels = vec![AbundanceVector::pure(crate::AbundanceClass::Dead); 5];
        let out = finetune_loss(&z, &labels, 0.6, 0.0866).unwrap();
        assert!(out.loss.abs() < 1e-12);
        assert_eq!(out.skipped, 0);
    }

    #[test]
    fn finetune_without_positives_errors() {
        let z = random_matrix(2, 16, 3);
        let labels = [
            AbundanceVector::pure(crate::AbundanceClass::Healthy),
            AbundanceVector::pure(crate::AbundanceClass::Dead),
        ];
        assert!(matches!(finetune_loss(&z, &labels, 0.6, 0.1), Err(Error::NoPositivePairs { .. })));
    }

    #[test]
    fn finetune_counts_skipped_anchors() {
        use crate::AbundanceClass::*;
        let z = random_matrix(3, 16, 4);
        let labels = [AbundanceVector::pure(Healthy), AbundanceVector::pure(Healthy), AbundanceVector::pure(Dead)];
        let out = finetune_loss(&z, &labels, 0.6, 0.1).unwrap();
        assert_eq!(out.skipped, 1);
        // The lone anchor still appears in the others' denominators.
        assert!(out.grad.row(2).iter().any(|v| *v != 0.0));
    }

    #[test]
    fn positives_are_the_offset_rows() {
        // Rows 0..B are orthonormal axes; row i+B copies row π(i). Only the
        // identity pairing makes every positive an exact copy.
        let b = 4;
        let axis = |k: usize| -> Vec<f64> { (0..16).map(|j| if j == k { 1.0 } else { 0.0 }).collect() };
        let build = |perm: [usize; 4]| {
            let mut rows: Vec<Vec<f64>> = (0..b).map(axis).collect();
            rows.extend(perm.iter().map(|&p| axis(p)));
            Matrix::from_rows(&rows).unwrap()
        };
        let tau = 0.1;
        let aligned = simclr_loss(&build([0, 1, 2, 3]), tau).unwrap().loss;
        let shifted = simclr_loss(&build([1, 2, 3, 0]), tau).unwrap().loss;
        // Aligned: the positive (sim 1) competes with 6 orthogonal rows (sim 0).
        let expected = -((1.0f64 / tau).exp() / ((1.0f64 / tau).exp() + 6.0)).ln();
        assert!((aligned - expected).abs() < 1e-12);
        assert!(shifted > aligned + 5.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn simclr_scale_and_rotation_invariant(idx in 0u64..10_000, c in 0.01f64..100.0, theta in 0.0f64..std::f64::consts::TAU) {
            let z = random_matrix(6, 16, idx);
            let base = simclr_loss(&z, 0.2).unwrap().loss;
            let mut scaled = z.clone();
            scaled.data.iter_mut().for_each(|v| *v *= c);
            prop_assert!((simclr_loss(&scaled, 0.2).unwrap().loss - base).abs() < 1e-9);
            // Givens rotation in the (0, 5) plane followed by (3, 11).
            let mut rotated = z.clone();
            for (p, q) in [(0, 5), (3, 11)] {
                for r in 0..rotated.rows {
                    let row = rotated.row_mut(r);
                    let (a, b) = (row[p], row[q]);
                    row[p] = theta.cos() * a - theta.sin() * b;
                    row[q] = theta.sin() * a + theta.cos() * b;
                }
            }
            prop_assert!((simclr_loss(&rotated, 0.2).unwrap().loss - base).abs() < 1e-9);
        }

        #[test]
        fn finetune_permutation_symmetric(idx in 0u64..10_000, shift in 1usize..7) {
            let z = random_matrix(7, 16, idx);
            let labels = random_labels(7, idx);
            let base = finetune_loss(&z, &labels, 0.6, 0.0866);
            let rows: Vec<Vec<f64>> = (0..7).map(|r| z.row((r + shift) % 7).to_vec()).collect();
            let perm_labels: Vec<_> = (0..7).map(|r| labels[(r + shift) % 7]).collect();
            let permuted = finetune_loss(&Matrix::from_rows(&rows).unwrap(), &perm_labels, 0.6, 0.0866);
            match (base, permuted) {
                (Ok(a), Ok(b)) => prop_assert!((a.loss - b.loss).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "permutation changed validity"),
            }
        }
    }
}
