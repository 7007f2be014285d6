//! Magnitude warping: `x' = β ⊙ (αx + n)`.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::spline::NaturalSpline;
use crate::rng::Rng;
use crate::spectra::Spectrum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationConfig {
    pub alpha_range: (f64, f64),
    /// Additive noise std.
    pub sigma1: f64,
    /// Knot std around 1.
    pub sigma2: f64,
    pub num_knots: usize,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            alpha_range: (0.9, 1.1),
            sigma1: 0.01,
            sigma2: 0.1,
            num_knots: 8,
            seed: 0,
        }
    }
}

impl AugmentationConfig {
    /// No scaling, noise or warping.
    pub fn identity() -> Self {
        AugmentationConfig {
            alpha_range: (1.0, 1.0),
            sigma1: 0.0,
            sigma2: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.alpha_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!("alpha range ({lo}, {hi}) must satisfy 0 < lo <= hi")));
        }
        if !(self.sigma1 >= 0.0 && self.sigma1.is_finite() && self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config("augmentation noise levels must be finite and >= 0".into()));
        }
        if self.num_knots < 2 {
            return Err(Error::Config(format!("need at least 2 spline knots, got {}", self.num_knots)));
        }
        Ok(())
    }
}

/// Draw order: α, per-band noise, knot values. Zero-width ranges and zero
/// stds consume no randomness.
pub fn magnitude_warp(x: &Spectrum, cfg: &AugmentationConfig, rng: &mut Rng) -> Result<Spectrum> {
    cfg.validate()?;
    let len = x.len();
    if len < cfg.num_knots {
        return Err(Error::Invalid(format!(
            "spectrum of {len} bands is shorter than {} knots",
            cfg.num_knots
        )));
    }
    let (lo, hi) = cfg.alpha_range;
    let alpha = if lo == hi { lo } else { rng.random_range(lo..hi) };
    let mut out: Vec<f64> = x.values().iter().map(|v| alpha * v).collect();
    if cfg.sigma1 > 0.0 {
        let noise = Normal::new(0.0, cfg.sigma1).expect("finite std");
        for v in &mut out {
            *v += noise.sample(rng);
        }
    }
    if cfg.sigma2 > 0.0 {
        let knots = Normal::new(1.0, cfg.sigma2).expect("finite std");
        let ys: Vec<f64> = (0..cfg.num_knots).map(|_| knots.sample(rng)).collect();
        let step = (len - 1) as f64 / (cfg.num_knots - 1) as f64;
        let xs: Vec<f64> = (0..cfg.num_knots).map(|k| k as f64 * step).collect();
        let spline = NaturalSpline::new(&xs, &ys)?;
        for (i, v) in out.iter_mut().enumerate() {
            *v *= spline.eval(i as f64);
        }
    }
    Spectrum::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, substream};
    use proptest::prelude::*;

    fn ramp(n: usize) -> Spectrum {
        Spectrum::new((0..n).map(|i| 0.1 + i as f64 * 0.003).collect()).unwrap()
    }

    #[test]
    fn identity_configuration() {
        let x = ramp(40);
        let y = magnitude_warp(&x, &AugmentationConfig::identity(), &mut substream(1, domain::AUGMENT, 0)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn pure_scaling() {
        let x = ramp(40);
        let cfg = AugmentationConfig { alpha_range: (2.0, 2.0), ..AugmentationConfig::identity() };
        let y = magnitude_warp(&x, &cfg, &mut substream(1, domain::AUGMENT, 0)).unwrap();
        assert!(x.values().iter().zip(y.values()).all(|(a, b)| *b == 2.0 * a));
    }

    #[test]
    fn monte_carlo_mean_is_unbiased() {
        let x = Spectrum::new(vec![0.4; 50]).unwrap();
        let cfg = AugmentationConfig::default();
        let mut sum = vec![0.0; 50];
        let draws = 10_000;
        for d in 0..draws {
            let y = magnitude_warp(&x, &cfg, &mut substream(3, domain::AUGMENT, d)).unwrap();
            for (s, v) in sum.iter_mut().zip(y.values()) {
                *s += v;
            }
        }
        for s in sum {
            let mean = s / draws as f64;
            assert!((mean - 0.4).abs() / 0.4 < 0.02, "band mean {mean}");
        }
    }

    #[test]
    fn warp_is_smooth_and_varies() {
        let x = Spectrum::new(vec![1.0; 100]).unwrap();
        let cfg = AugmentationConfig { alpha_range: (1.0, 1.0), sigma1: 0.0, ..Default::default() };
        let y = magnitude_warp(&x, &cfg, &mut substream(5, domain::AUGMENT, 0)).unwrap();
        assert!(y.values().iter().any(|v| (v - 1.0).abs() > 1e-3));
        let max_step = y.values().windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(max_step < 0.05, "step {max_step}");
    }

    #[test]
    fn short_spectrum_is_rejected() {
        let x = ramp(7);
        assert!(magnitude_warp(&x, &AugmentationConfig::default(), &mut substream(0, 0, 0)).is_err());
        let bad = AugmentationConfig { num_knots: 1, ..Default::default() };
        assert!(magnitude_warp(&ramp(20), &bad, &mut substream(0, 0, 0)).is_err());
    }

    proptest! {
        #[test]
        fn preserves_length(len in 8usize..80, idx in 0u64..1000) {
            let x = ramp(len);
            let y = magnitude_warp(&x, &AugmentationConfig::default(), &mut substream(9, domain::AUGMENT, idx)).unwrap();
            prop_assert_eq!(y.len(), len);
        }

        #[test]
        fn disabled_randomness_is_identity(vals in prop::collection::vec(-2.0f64..2.0, 8..40), idx in 0u64..100) {
            let x = Spectrum::new(vals).unwrap();
            let y = magnitude_warp(&x, &AugmentationConfig::identity(), &mut substream(2, domain::AUGMENT, idx)).unwrap();
            prop_assert_eq!(x, y);
        }
    }
}
