use super::Tensor3;
use crate::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPSILON: f64 = 1e-5;

/// Per-channel normalisation over the batch and length axes.
///
/// Running statistics follow `running = momentum * running + (1 - momentum) * batch`,
/// with the unbiased batch variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    xhat: Tensor3,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var_unbiased: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        BatchNorm1d {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
        }
    }

    fn check(&self, x: &Tensor3) -> Result<()> {
        if x.channels != self.channels {
            return Err(Error::Shape(format!(
                "batch norm expects {} channels, got {}",
                self.channels, x.channels
            )));
        }
        Ok(())
    }

    pub fn forward_train(&self, x: &Tensor3) -> Result<(Tensor3, BatchNormCache)> {
        self.check(x)?;
        let n = x.batch * x.length;
        if n < 2 {
            return Err(Error::Invalid(
                "batch norm in train mode needs at least 2 values per channel".into(),
            ));
        }
        let len = x.length;
        let mut mean = vec![0.0; self.channels];
        let mut var = vec![0.0; self.channels];
        for b in 0..x.batch {
            for (c, chunk) in x.sample(b).chunks_exact(len).enumerate() {
                mean[c] += chunk.iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for b in 0..x.batch {
            for (c, chunk) in x.sample(b).chunks_exact(len).enumerate() {
                var[c] += chunk.iter().map(|v| (v - mean[c]) * (v - mean[c])).sum::<f64>();
            }
        }
        let biased: Vec<f64> = var.iter().map(|v| v / n as f64).collect();
        let unbiased: Vec<f64> = var.iter().map(|v| v / (n - 1) as f64).collect();
        let inv_std: Vec<f64> = biased.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();

        let mut xhat = x.clone();
        let mut y = x.clone();
        for b in 0..x.batch {
            let xs = xhat.sample_mut(b);
            let ys = y.sample_mut(b);
            for c in 0..self.channels {
                for l in 0..len {
                    let i = c * len + l;
                    xs[i] = (xs[i] - mean[c]) * inv_std[c];
                    ys[i] = self.gamma[c] * xs[i] + self.beta[c];
                }
            }
        }
        Ok((
            y,
            BatchNormCache {
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var_unbiased: unbiased,
            },
        ))
    }

    pub fn forward_eval(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check(x)?;
        let len = x.length;
        let mut y = x.clone();
        for b in 0..x.batch {
            let ys = y.sample_mut(b);
            for c in 0..self.channels {
                let scale = self.gamma[c] / (self.running_var[c] + self.epsilon).sqrt();
                for v in &mut ys[c * len..(c + 1) * len] {
                    *v = scale * (*v - self.running_mean[c]) + self.beta[c];
                }
            }
        }
        Ok(y)
    }

    pub fn update_running_stats(&mut self, cache: &BatchNormCache) {
        let m = self.momentum;
        for c in 0..self.channels {
            self.running_mean[c] = m * self.running_mean[c] + (1.0 - m) * cache.batch_mean[c];
            self.running_var[c] = m * self.running_var[c] + (1.0 - m) * cache.batch_var_unbiased[c];
        }
    }

    pub fn backward(&self, cache: &BatchNormCache, grad_out: &Tensor3) -> Result<(BatchNormGrads, Tensor3)> {
        let xhat = &cache.xhat;
        if grad_out.data.len() != xhat.data.len() || grad_out.channels != self.channels {
            return Err(Error::Shape("batch norm upstream gradient does not match forward pass".into()));
        }
        let len = xhat.length;
        let n = (xhat.batch * len) as f64;
        let mut dgamma = vec![0.0; self.channels];
        let mut dbeta = vec![0.0; self.channels];
        for b in 0..xhat.batch {
            let (xs, gs) = (xhat.sample(b), grad_out.sample(b));
            for c in 0..self.channels {
                for i in c * len..(c + 1) * len {
                    dgamma[c] += gs[i] * xs[i];
                    dbeta[c] += gs[i];
                }
            }
        }
        let mut dx = grad_out.clone();
        for b in 0..xhat.batch {
            let xs = xhat.sample(b);
            let ds = dx.sample_mut(b);
            for c in 0..self.channels {
                let k = self.gamma[c] * cache.inv_std[c] / n;
                for i in c * len..(c + 1) * len {
                    ds[i] = k * (n * ds[i] - dbeta[c] - xs[i] * dgamma[c]);
                }
            }
        }
        Ok((
            BatchNormGrads {
                gamma: dgamma,
                beta: dbeta,
            },
            dx,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_input() -> Tensor3 {
        Tensor3::from_vec(3, 2, 4, (0..24).map(|i| ((i * 13 % 7) as f64).sqrt() + i as f64 * 0.1).collect())
            .unwrap()
    }

    #[test]
    fn train_mode_standardizes() {
        let bn = BatchNorm1d::new(2);
        let (y, _) = bn.forward_train(&sample_input()).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = (0..3).flat_map(|b| y.sample(b)[c * 4..(c + 1) * 4].to_vec()).collect();
            let mean = vals.iter().sum::<f64>() / 12.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 12.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4, "var {var}"); // epsilon shrinks it slightly
        }
    }

    #[test]
    fn eval_mode_uses_running_stats() {
        let mut bn = BatchNorm1d::new(1);
        bn.gamma[0] = 2.0;
        bn.beta[0] = 1.0;
        let y = bn.forward_eval(&Tensor3::from_vec(1, 1, 1, vec![3.0]).unwrap()).unwrap();
        assert!((y.data[0] - 7.0).abs() < 1e-4);
        assert!((y.data[0] - (1.0 + 6.0 / (1.0 + BN_EPSILON).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn constant_channel_gives_zeros() {
        let bn = BatchNorm1d::new(1);
        let (y, _) = bn.forward_train(&Tensor3::from_vec(2, 1, 3, vec![4.2; 6]).unwrap()).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn running_stats_update() {
        let mut bn = BatchNorm1d::new(1);
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (_, cache) = bn.forward_train(&x).unwrap();
        bn.update_running_stats(&cache);
        assert!((bn.running_mean[0] - 0.25).abs() < 1e-12);
        // unbiased variance of 1..4 is 5/3
        assert!((bn.running_var[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);
        assert!(bn.forward_train(&Tensor3::zeros(1, 1, 1)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut bn = BatchNorm1d::new(2);
        bn.gamma = vec![1.3, 0.7];
        bn.beta = vec![0.2, -0.1];
        let x = sample_input();
        let probe: Vec<f64> = (0..24).map(|i| ((i * 5 % 9) as f64 - 4.0) / 3.0).collect();
        let loss = |bn: &BatchNorm1d, x: &Tensor3| -> f64 {
            bn.forward_train(x).unwrap().0.data.iter().zip(&probe).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = bn.forward_train(&x).unwrap();
        let (grads, dx) = bn.backward(&cache, &Tensor3::from_vec(3, 2, 4, probe.clone()).unwrap()).unwrap();
        let h = 1e-5;
        for c in 0..2 {
            let (mut p, mut m) = (bn.clone(), bn.clone());
            p.gamma[c] += h;
            m.gamma[c] -= h;
            assert!(((loss(&p, &x) - loss(&m, &x)) / (2.0 * h) - grads.gamma[c]).abs() < 1e-7);
            let (mut p, mut m) = (bn.clone(), bn.clone());
            p.beta[c] += h;
            m.beta[c] -= h;
            assert!(((loss(&p, &x) - loss(&m, &x)) / (2.0 * h) - grads.beta[c]).abs() < 1e-7);
        }
        for i in 0..x.data.len() {
            let (mut p, mut m) = (x.clone(), x.clone());
            p.data[i] += h;
            m.data[i] -= h;
            let fd = (loss(&bn, &p) - loss(&bn, &m)) / (2.0 * h);
            assert!((fd - dx.data[i]).abs() < 1e-7, "input {i}: {fd} vs {}", dx.data[i]);
        }
    }
}
