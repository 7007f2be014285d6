//! Natural cubic spline interpolation.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl NaturalSpline {
    /// Knot positions must be strictly increasing.
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::Invalid(format!(
                "spline needs at least 2 knots with matching values, got {} positions and {} values",
                n,
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("spline knots must be finite and strictly increasing".into()));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let (h0, h1) = (xs[i + 1] - xs[i], xs[i + 2] - xs[i + 1]);
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(NaturalSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    /// Outside the knot range the end segments are extended.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let seg = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.xs[seg + 1] - self.xs[seg];
        let t = (x - self.xs[seg]) / h;
        let s = 1.0 - t;
        let (y0, y1) = (self.ys[seg], self.ys[seg + 1]);
        // Written as a correction to linear interpolation so equal knots give
        // exactly their common value.
        y0 + t * (y1 - y0) + h * h / 6.0 * ((s * s * s - s) * self.m[seg] + (t * t * t - t) * self.m[seg + 1])
    }

    pub fn second_derivatives(&self) -> &[f64] {
        &self.m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense 4(N−1) system over per-segment cubic coefficients
    /// `a + b(x−x_k) + c(x−x_k)² + d(x−x_k)³`, solved by Gaussian elimination.
    fn dense_oracle(xs: &[f64], ys: &[f64], probes: &[f64]) -> Vec<f64> {
        let segs = xs.len() - 1;
        let dim = 4 * segs;
        let mut a = vec![vec![0.0; dim + 1]; dim];
        let mut row = 0;
        for k in 0..segs {
            let h = xs[k + 1] - xs[k];
            let base = 4 * k;
            a[row][base] = 1.0;
            a[row][dim] = ys[k];
            row += 1;
            a[row][base..base + 4].copy_from_slice(&[1.0, h, h * h, h * h * h]);
            a[row][dim] = ys[k + 1];
            row += 1;
            if k + 1 < segs {
                a[row][base + 1] = 1.0;
                a[row][base + 2] = 2.0 * h;
                a[row][base + 3] = 3.0 * h * h;
                a[row][base + 5] = -1.0;
                row += 1;
                a[row][base + 2] = 2.0;
                a[row][base + 3] = 6.0 * h;
                a[row][base + 6] = -2.0;
                row += 1;
            }
        }
        a[row][2] = 2.0;
        row += 1;
        let h = xs[segs] - xs[segs - 1];
        a[row][4 * (segs - 1) + 2] = 2.0;
        a[row][4 * (segs - 1) + 3] = 6.0 * h;
        for col in 0..dim {
            let piv = (col..dim).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for r in 0..dim {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..=dim {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        let coef: Vec<f64> = (0..dim).map(|i| a[i][dim] / a[i][i]).collect();
        probes
            .iter()
            .map(|&x| {
                let k = (0..segs).rev().find(|&k| x >= xs[k]).unwrap_or(0);
                let d = x - xs[k];
                coef[4 * k] + coef[4 * k + 1] * d + coef[4 * k + 2] * d * d + coef[4 * k + 3] * d * d * d
            })
            .collect()
    }

    #[test]
    fn matches_dense_oracle() {
        let xs = [0.0, 1.0, 2.5, 3.0, 5.0, 7.5, 8.0];
        let ys = [1.0, 0.8, 1.3, 0.9, 1.1, 1.05, 0.7];
        let s = NaturalSpline::new(&xs, &ys).unwrap();
        let probes: Vec<f64> = (0..=160).map(|i| i as f64 * 0.05).collect();
        let want = dense_oracle(&xs, &ys, &probes);
        for (p, w) in probes.iter().zip(want) {
            assert!((s.eval(*p) - w).abs() < 1e-10, "x={p}");
        }
    }

    #[test]
    fn interpolates_knots_and_natural_ends() {
        let xs = [0.0, 2.0, 4.0, 6.0];
        let ys = [0.0, 1.0, -1.0, 0.5];
        let s = NaturalSpline::new(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert!((s.eval(*x) - y).abs() < 1e-12);
        }
        let m = s.second_derivatives();
        assert_eq!((m[0], m[3]), (0.0, 0.0));
    }

    #[test]
    fn constant_knots_are_exact() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64 * 33.0).collect();
        let s = NaturalSpline::new(&xs, &[1.0; 8]).unwrap();
        assert!((0..=231).all(|i| s.eval(i as f64) == 1.0));
    }

    #[test]
    fn two_knots_are_linear() {
        let s = NaturalSpline::new(&[0.0, 4.0], &[1.0, 3.0]).unwrap();
        assert_eq!(s.eval(1.0), 1.5);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(NaturalSpline::new(&[0.0], &[1.0]).is_err());
        assert!(NaturalSpline::new(&[0.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(NaturalSpline::new(&[0.0, 1.0], &[1.0]).is_err());
    }
}
