use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamWConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamWConfig {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} and weight decay {} must be finite and >= 0",
                self.lr, self.weight_decay
            )));
        }
        if !unit(self.beta1) || !unit(self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config("moment decays must lie in (0, 1), epsilon > 0".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment optimiser with decoupled weight decay:
///
/// ```text
/// m ← β1·m + (1-β1)·g        v ← β2·v + (1-β2)·g²
/// p ← p·(1 - lr·wd) - lr · m̂ / (√v̂ + ε)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub config: AdamWConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(config: AdamWConfig, sizes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(AdamW {
            config,
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::Shape("parameter, gradient and moment sizes differ".into()));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        let decay = 1.0 - c.lr * c.weight_decay;
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for i in 0..p.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let update = (m[i] / bias1) / ((v[i] / bias2).sqrt() + c.epsilon);
                p[i] = p[i] * decay - c.lr * update;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let mut opt = AdamW::new(AdamWConfig::new(0.1, 0.0), &[3]).unwrap();
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        opt.step(&mut [&mut p[..]], &[&[0.0; 3][..]]).unwrap();
        assert_eq!(p, before);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = 1, v̂ = 1 after bias correction, so the step is lr / (1 + ε)
        let mut opt = AdamW::new(AdamWConfig::new(0.1, 0.0), &[1]).unwrap();
        let mut p = [0.0];
        opt.step(&mut [&mut p[..]], &[&[1.0][..]]).unwrap();
        assert!((p[0] + 0.1).abs() < 1e-8);
        assert!((p[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn decoupled_decay_shrinks_geometrically() {
        let (lr, wd) = (0.01, 0.5);
        let mut opt = AdamW::new(AdamWConfig::new(lr, wd), &[1]).unwrap();
        let mut p = [2.0];
        for step in 1..=3 {
            opt.step(&mut [&mut p[..]], &[&[0.0][..]]).unwrap();
            assert!((p[0] - 2.0 * (1.0 - lr * wd).powi(step)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut opt = AdamW::new(AdamWConfig::new(0.0, 0.3), &[2]).unwrap();
        let mut p = vec![0.7, -0.3];
        opt.step(&mut [&mut p[..]], &[&[5.0, -1.0][..]]).unwrap();
        assert_eq!(p, vec![0.7, -0.3]);
    }

    #[test]
    fn shape_mismatch() {
        let mut opt = AdamW::new(AdamWConfig::new(0.1, 0.0), &[2]).unwrap();
        let mut p = [0.0; 3];
        assert!(opt.step(&mut [&mut p[..]], &[&[0.0; 3][..]]).is_err());
        assert!(AdamW::new(AdamWConfig { beta1: 1.0, ..AdamWConfig::new(0.1, 0.0) }, &[1]).is_err());
    }
}
