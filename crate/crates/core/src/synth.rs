//! Synthetic linear-mixture scenes with known abundances.
//!
//! Endmembers are smooth vegetation-like curves. Outside a narrow spectral
//! window the "affected" endmember is almost an affine blend of "healthy"
//! and "dead", so most of what separates it lives inside that window as a
//! pattern with zero mean on either side of an aggregation boundary. The
//! equal-width 13-window aggregation therefore averages it away, which is
//! what makes the multispectral emulation strictly less informative than
//! the full band set.

use rand::Rng as _;
use rand_distr::{Dirichlet, Distribution, Normal};

use crate::io::{AbundanceMap, Cube};
use crate::rng::{self, domain};
use crate::spectra::{AbundanceClass, AbundanceVector, Dataset, LabeledSample, Spectrum};
use crate::{Error, Result};

pub const DEFAULT_BANDS: usize = 234;
pub const DEFAULT_AGGREGATED_BANDS: usize = 13;
pub const MIN_ENDMEMBER_BANDS: usize = 8;
/// Default share of the affected-vs-blend contrast placed in the narrow window.
pub const DEFAULT_NARROW_FRACTION: f64 = 1.0;

/// Weights of healthy and dead in the affected endmember outside the window.
const AFFECTED_BLEND: [f64; 2] = [0.55, 0.45];

/// Upper bound applied to noisy reflectance.
pub const MAX_REFLECTANCE: f64 = 1.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Endmember {
    pub class: AbundanceClass,
    pub spectrum: Spectrum,
}

/// Where the narrow discriminative window sits for a given band count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NarrowWindow {
    /// First band index of the window.
    pub start: usize,
    /// Aggregation boundary the window straddles.
    pub center: usize,
    /// Bands on each side of `center`.
    pub half_width: usize,
}

impl NarrowWindow {
    pub fn for_bands(bands: usize) -> Result<Self> {
        if bands < MIN_ENDMEMBER_BANDS {
            return Err(Error::Invalid(format!(
                "{bands} bands cannot host the narrow window (need at least {MIN_ENDMEMBER_BANDS})"
            )));
        }
        let half_width = ((bands as f64 * 0.025).floor() as usize).max(1);
        let target = 0.7 * bands as f64;
        let windows = BandAggregation::equal_width(bands, DEFAULT_AGGREGATED_BANDS.min(bands))?;
        let center = windows
            .windows()
            .iter()
            .skip(1)
            .map(|w| w.0)
            .filter(|&b| b >= half_width && b + half_width <= bands)
            .min_by(|a, b| {
                (*a as f64 - target)
                    .abs()
                    .total_cmp(&(*b as f64 - target).abs())
            })
            .ok_or_else(|| Error::Invalid(format!("no aggregation boundary fits in {bands} bands")))?;
        Ok(NarrowWindow {
            start: center - half_width,
            center,
            half_width,
        })
    }

    pub fn width(&self) -> usize {
        2 * self.half_width
    }

    /// Zero-mean-per-side pattern value at `band`, or 0 outside the window.
    fn pattern(&self, band: usize) -> f64 {
        if band < self.start || band >= self.start + self.width() {
            return 0.0;
        }
        let (j, sign) = if band < self.center {
            (band - self.start, 1.0)
        } else {
            (band - self.center, -1.0)
        };
        sign * (std::f64::consts::TAU * (j as f64 + 0.5) / self.half_width as f64).sin()
    }
}

pub fn make_endmembers(bands: usize, seed: u64) -> Result<[Endmember; 3]> {
    make_endmembers_with(bands, seed, DEFAULT_NARROW_FRACTION)
}

/// `narrow_fraction` in [0, 1] moves the affected endmember's distinctive
/// signal from a broad pre-edge bump (0) into the narrow window (1).
pub fn make_endmembers_with(bands: usize, seed: u64, narrow_fraction: f64) -> Result<[Endmember; 3]> {
    if !(0.0..=1.0).contains(&narrow_fraction) {
        return Err(Error::Invalid(format!(
            "narrow fraction {narrow_fraction} outside [0, 1]"
        )));
    }
    let window = NarrowWindow::for_bands(bands)?;
    let mut rng = rng::substream(seed, domain::ENDMEMBERS, 0);
    let mut jitter = |scale: f64| 1.0 + scale * (2.0 * rng.random::<f64>() - 1.0);
    let edge = 0.45 * jitter(0.06);
    let step = 0.40 * jitter(0.1);
    let green = 0.04 * jitter(0.2);
    let dead_base = 0.12 * jitter(0.1);
    let dead_slope = 0.2 * jitter(0.15);
    let bump = 0.12 * jitter(0.1);
    let wiggle = 0.25 * jitter(0.1);

    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let gauss = |x: f64, c: f64, w: f64| (-((x - c) / w).powi(2)).exp();
    let position = |b: usize| b as f64 / (bands - 1) as f64;

    let healthy: Vec<f64> = (0..bands)
        .map(|b| {
            let t = position(b);
            0.05 + green * gauss(t, 0.15, 0.05) + step * sigmoid((t - edge) / 0.02)
                - 0.12 * sigmoid((t - 0.78) / 0.04)
        })
        .collect();
    let dead: Vec<f64> = (0..bands)
        .map(|b| dead_base + dead_slope * position(b))
        .collect();
    let affected: Vec<f64> = (0..bands)
        .map(|b| {
            let t = position(b);
            AFFECTED_BLEND[0] * healthy[b]
                + AFFECTED_BLEND[1] * dead[b]
                + (1.0 - narrow_fraction) * bump * gauss(t, edge - 0.08, 0.04)
                + narrow_fraction * wiggle * window.pattern(b)
        })
        .collect();

    let make = |class, v: Vec<f64>| -> Result<Endmember> {
        Ok(Endmember {
            class,
            spectrum: Spectrum::new(v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())?,
        })
    };
    Ok([
        make(AbundanceClass::Healthy, healthy)?,
        make(AbundanceClass::Affected, affected)?,
        make(AbundanceClass::Dead, dead)?,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub noise_std: f64,
    /// Dirichlet concentration for mixed pixels.
    pub abundance_prior: [f64; 3],
    /// Share of pixels forced pure, spread evenly over the three classes.
    pub pure_fraction: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            height: 64,
            width: 64,
            bands: DEFAULT_BANDS,
            noise_std: 0.01,
            abundance_prior: [1.0, 1.0, 1.0],
            pure_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.bands == 0 {
            return Err(Error::Config(format!(
                "scene dimensions must be positive, got {}x{}x{}",
                self.height, self.width, self.bands
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise_std {} must be >= 0", self.noise_std)));
        }
        if self.abundance_prior.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::Config("Dirichlet concentrations must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pure_fraction) {
            return Err(Error::Config(format!(
                "pure_fraction {} outside [0, 1]",
                self.pure_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub cube: Cube,
    pub truth: Vec<AbundanceVector>,
}

impl Scene {
    pub fn truth_map(&self) -> Result<AbundanceMap> {
        AbundanceMap::from_abundances(self.cube.height, self.cube.width, &self.truth)
    }
}

pub fn mix(endmembers: &[Endmember; 3], abundance: &AbundanceVector) -> Vec<f64> {
    let a = abundance.as_array();
    let bands = endmembers[0].spectrum.len();
    (0..bands)
        .map(|b| {
            a[0] * endmembers[0].spectrum.values()[b]
                + a[1] * endmembers[1].spectrum.values()[b]
                + a[2] * endmembers[2].spectrum.values()[b]
        })
        .collect()
}

/// Each pixel draws from its own substream of `(seed, pixel index)`.
pub fn generate_scene(config: &SceneConfig, endmembers: &[Endmember; 3]) -> Result<Scene> {
    config.validate()?;
    for e in endmembers {
        if e.spectrum.len() != config.bands {
            return Err(Error::Shape(format!(
                "{} endmember has {} bands, scene expects {}",
                e.class,
                e.spectrum.len(),
                config.bands
            )));
        }
    }
    let dirichlet = Dirichlet::new(config.abundance_prior)
        .map_err(|e| Error::Config(format!("Dirichlet prior: {e}")))?;
    let noise = Normal::new(0.0, config.noise_std)
        .map_err(|e| Error::Config(format!("noise: {e}")))?;

    let n = config.height * config.width;
    let mut values = Vec::with_capacity(n * config.bands);
    let mut truth = Vec::with_capacity(n);
    for pixel in 0..n {
        let mut rng = rng::substream(config.seed, domain::PIXEL, pixel as u64);
        let u: f64 = rng.random();
        let abundance = if u < config.pure_fraction {
            let class = ((u / config.pure_fraction * 3.0) as usize).min(2);
            AbundanceVector::pure(AbundanceClass::ALL[class])
        } else {
            let d: [f64; 3] = dirichlet.sample(&mut rng);
            AbundanceVector::from_simplex_unchecked(crate::spectra::renormalize(d))
        };
        let clean = mix(endmembers, &abundance);
        values.extend(
            clean
                .into_iter()
                .map(|x| (x + noise.sample(&mut rng)).clamp(0.0, MAX_REFLECTANCE)),
        );
        truth.push(abundance);
    }
    Ok(Scene {
        cube: Cube::new(config.height, config.width, config.bands, values)?,
        truth,
    })
}

/// Draws `count` distinct pixels as labeled samples with ids `px<index>`,
/// in draw order.
pub fn pick_labeled(scene: &Scene, count: usize, seed: u64) -> Result<Vec<LabeledSample>> {
    let n = scene.cube.pixel_count();
    if count > n {
        return Err(Error::Invalid(format!("cannot label {count} of {n} pixels")));
    }
    let mut rng = rng::substream(seed, domain::LABEL_PICK, 0);
    let picked = rand::seq::index::sample(&mut rng, n, count);
    picked
        .iter()
        .map(|i| {
            Ok(LabeledSample {
                id: format!("px{i}"),
                spectrum: Spectrum::new(scene.cube.pixel(i).to_vec())?,
                label: scene.truth[i],
            })
        })
        .collect()
}

/// Every pixel as unlabeled data plus `labeled` picked pixels with labels.
pub fn scene_dataset(scene: &Scene, labeled: usize, seed: u64) -> Result<Dataset> {
    Dataset::new(scene.cube.bands, pick_labeled(scene, labeled, seed)?, scene.cube.spectra()?)
}

/// Half-open band windows whose means form a coarser spectrum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandAggregation {
    windows: Vec<(usize, usize)>,
}

impl BandAggregation {
    pub fn new(windows: Vec<(usize, usize)>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::Invalid("no aggregation windows".into()));
        }
        if let Some(w) = windows.iter().find(|w| w.0 >= w.1) {
            return Err(Error::Invalid(format!("empty window {w:?}")));
        }
        Ok(BandAggregation { windows })
    }

    /// `count` contiguous windows partitioning `0..bands` as evenly as possible.
    pub fn equal_width(bands: usize, count: usize) -> Result<Self> {
        if count == 0 || count > bands {
            return Err(Error::Invalid(format!(
                "cannot split {bands} bands into {count} windows"
            )));
        }
        BandAggregation::new(
            (0..count)
                .map(|i| (i * bands / count, (i + 1) * bands / count))
                .collect(),
        )
    }

    /// The 13-window multispectral emulation.
    pub fn multispectral(bands: usize) -> Result<Self> {
        BandAggregation::equal_width(bands, DEFAULT_AGGREGATED_BANDS)
    }

    pub fn windows(&self) -> &[(usize, usize)] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn validate_for(&self, bands: usize) -> Result<()> {
        match self.windows.iter().find(|w| w.1 > bands) {
            Some(w) => Err(Error::Invalid(format!(
                "window {w:?} out of range for {bands} bands"
            ))),
            None => Ok(()),
        }
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.validate_for(values.len())?;
        Ok(self
            .windows
            .iter()
            .map(|&(s, e)| values[s..e].iter().sum::<f64>() / (e - s) as f64)
            .collect())
    }
}

pub fn aggregate_bands(spectrum: &Spectrum, agg: &BandAggregation) -> Result<Spectrum> {
    Spectrum::new(agg.apply(spectrum.values())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(a: &Spectrum, b: &Spectrum) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    fn noiseless(h: usize, w: usize, bands: usize, seed: u64) -> (Scene, [Endmember; 3]) {
        let em = make_endmembers(bands, seed).unwrap();
        let cfg = SceneConfig { height: h, width: w, bands, noise_std: 0.0, seed, ..Default::default() };
        (generate_scene(&cfg, &em).unwrap(), em)
    }

    #[test]
    fn endmembers_are_distinct() {
        let em = make_endmembers(234, 3).unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                let d = dist(&em[i].spectrum, &em[j].spectrum);
                assert!(d > 0.5, "endmembers {i},{j} distance {d}");
            }
        }
        assert_eq!(em, make_endmembers(234, 3).unwrap());
    }

    #[test]
    fn endmember_shapes() {
        let em = make_endmembers(234, 0).unwrap();
        let v = |i: usize| em[i].spectrum.values();
        let step = |s: &[f64]| s[150] - s[60];
        let ratio = step(v(1)) / step(v(0));
        assert!((0.5..=0.7).contains(&ratio), "attenuation ratio {ratio}");
        // dead rises without a step
        assert!(v(2).windows(2).all(|w| w[1] >= w[0]));
        assert!(v(2)[150] - v(2)[60] < 0.1);
    }

    #[test]
    fn small_band_counts() {
        let em = make_endmembers(8, 1).unwrap();
        for e in &em {
            assert_eq!(e.spectrum.len(), 8);
            assert!(e.spectrum.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(make_endmembers(7, 1).is_err());
    }

    #[test]
    fn narrow_window_layout() {
        let w = NarrowWindow::for_bands(234).unwrap();
        assert!(w.width() as f64 <= 0.05 * 234.0);
        let agg = BandAggregation::multispectral(234).unwrap();
        assert!(agg.windows().iter().any(|win| win.0 == w.center));
        // the pattern has zero mean on each side of the boundary
        let left: f64 = (w.start..w.center).map(|b| w.pattern(b)).sum();
        let right: f64 = (w.center..w.start + w.width()).map(|b| w.pattern(b)).sum();
        assert!(left.abs() < 1e-12 && right.abs() < 1e-12);
    }

    #[test]
    fn aggregation_hides_the_narrow_window() {
        let agg = BandAggregation::multispectral(234).unwrap();
        let full = make_endmembers_with(234, 4, 1.0).unwrap();
        // with all contrast in the window, aggregated affected equals the blend
        let blend: Vec<f64> = (0..234)
            .map(|b| {
                AFFECTED_BLEND[0] * full[0].spectrum.values()[b]
                    + AFFECTED_BLEND[1] * full[2].spectrum.values()[b]
            })
            .collect();
        let a = agg.apply(full[1].spectrum.values()).unwrap();
        let b = agg.apply(&blend).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_and_binary_pixels() {
        let (scene, em) = noiseless(16, 16, 40, 9);
        let mut saw_pure = false;
        for (i, t) in scene.truth.iter().enumerate() {
            if *t == AbundanceVector::pure(AbundanceClass::Healthy) {
                assert_eq!(scene.cube.pixel(i), em[0].spectrum.values());
                saw_pure = true;
            }
        }
        assert!(saw_pure);
        let half = AbundanceVector::new(0.5, 0.5, 0.0).unwrap();
        let m = mix(&em, &half);
        for b in 0..40 {
            let mean = 0.5 * (em[0].spectrum.values()[b] + em[1].spectrum.values()[b]);
            assert!((m[b] - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_level_matches_config() {
        let em = make_endmembers(234, 2).unwrap();
        let cfg = SceneConfig { seed: 2, ..Default::default() };
        let scene = generate_scene(&cfg, &em).unwrap();
        let mut ss = 0.0;
        let mut n = 0usize;
        for (i, t) in scene.truth.iter().enumerate() {
            let clean = mix(&em, t);
            for (x, c) in scene.cube.pixel(i).iter().zip(clean) {
                ss += (x - c) * (x - c);
                n += 1;
            }
        }
        let std = (ss / n as f64).sqrt();
        assert!((std - 0.01).abs() < 0.001, "residual std {std}");
    }

    #[test]
    fn pure_fraction_is_respected() {
        let em = make_endmembers(16, 0).unwrap();
        let cfg = SceneConfig { bands: 16, seed: 5, ..Default::default() };
        let scene = generate_scene(&cfg, &em).unwrap();
        let pure = scene.truth.iter().filter(|t| t.as_array().contains(&1.0)).count();
        let frac = pure as f64 / scene.truth.len() as f64;
        assert!((frac - 0.2).abs() < 0.03, "pure fraction {frac}");
    }

    #[test]
    fn noiseless_scene_unmixes_exactly() {
        // a broad bump keeps the endmembers well conditioned on few bands
        let em = make_endmembers_with(30, 1, 0.5).unwrap();
        let cfg = SceneConfig { height: 6, width: 6, bands: 30, noise_std: 0.0, seed: 1, ..Default::default() };
        let scene = generate_scene(&cfg, &em).unwrap();
        // least squares on the 3 endmembers through the normal equations
        let e: Vec<&[f64]> = em.iter().map(|e| e.spectrum.values()).collect();
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = e[i].iter().zip(e[j]).map(|(a, b)| a * b).sum();
            }
        }
        for (p, t) in scene.truth.iter().enumerate() {
            let x = scene.cube.pixel(p);
            let rhs: Vec<f64> = (0..3).map(|i| e[i].iter().zip(x).map(|(a, b)| a * b).sum()).collect();
            let sol = solve3(g, [rhs[0], rhs[1], rhs[2]]);
            for k in 0..3 {
                assert!((sol[k] - t.as_array()[k]).abs() < 1e-9, "pixel {p}");
            }
        }
    }

    fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(a);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let mut m = a;
            for r in 0..3 {
                m[r][c] = b[r];
            }
            out[c] = det(m) / d;
        }
        out
    }

    #[test]
    fn scene_is_deterministic_and_validated() {
        let (a, em) = noiseless(5, 7, 20, 3);
        let (b, _) = noiseless(5, 7, 20, 3);
        assert_eq!(a, b);
        let bad = SceneConfig { height: 0, bands: 20, ..Default::default() };
        assert!(generate_scene(&bad, &em).is_err());
        let mismatch = SceneConfig { bands: 21, ..Default::default() };
        assert!(matches!(generate_scene(&mismatch, &em), Err(Error::Shape(_))));
    }

    #[test]
    fn aggregation_examples() {
        let s = Spectrum::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let agg = BandAggregation::new(vec![(0, 2), (2, 4)]).unwrap();
        assert_eq!(aggregate_bands(&s, &agg).unwrap().values(), &[0.5, 2.5]);
        let flat = Spectrum::new(vec![0.3; 234]).unwrap();
        let out = aggregate_bands(&flat, &BandAggregation::multispectral(234).unwrap()).unwrap();
        assert_eq!(out.len(), 13);
        assert!(out.values().iter().all(|v| (v - 0.3).abs() < 1e-15));
        let oob = BandAggregation::new(vec![(0, 5)]).unwrap();
        assert!(aggregate_bands(&s, &oob).is_err());
        assert!(BandAggregation::new(vec![(2, 2)]).is_err());
    }

    #[test]
    fn labeled_picks_are_distinct_and_deterministic() {
        let (scene, _) = noiseless(6, 6, 16, 3);
        let a = pick_labeled(&scene, 10, 4).unwrap();
        assert_eq!(a, pick_labeled(&scene, 10, 4).unwrap());
        let mut ids: Vec<&str> = a.iter().map(|s| s.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 10);
        let i: usize = a[0].id[2..].parse().unwrap();
        assert_eq!(a[0].label, scene.truth[i]);
        assert_eq!(a[0].spectrum.values(), scene.cube.pixel(i));
        assert!(pick_labeled(&scene, 37, 0).is_err());
        let d = scene_dataset(&scene, 5, 0).unwrap();
        assert_eq!((d.labeled().len(), d.unlabeled().len()), (5, 36));
    }

    proptest! {
        #[test]
        fn aggregation_is_linear(
            x in prop::collection::vec(0.0f64..1.0, 30),
            y in prop::collection::vec(0.0f64..1.0, 30),
            a in 0.0f64..1.0,
        ) {
            let agg = BandAggregation::equal_width(30, 7).unwrap();
            let mixed: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + (1.0 - a) * q).collect();
            let lhs = agg.apply(&mixed).unwrap();
            let ax = agg.apply(&x).unwrap();
            let ay = agg.apply(&y).unwrap();
            for i in 0..7 {
                prop_assert!((lhs[i] - (a * ax[i] + (1.0 - a) * ay[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn truth_lies_on_simplex(seed in any::<u64>()) {
            let em = make_endmembers(12, seed).unwrap();
            let cfg = SceneConfig { height: 4, width: 4, bands: 12, seed, ..Default::default() };
            for t in generate_scene(&cfg, &em).unwrap().truth {
                let v = t.as_array();
                prop_assert!(v.iter().all(|&c| c >= 0.0));
                prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
