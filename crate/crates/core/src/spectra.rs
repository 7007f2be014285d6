//! Data model shared by every stage: spectra, abundance labels, datasets,
//! fold plans and the RMSE metric.

use std::fmt;

use rand::seq::SliceRandom;

use crate::rng::{self, domain};
use crate::{Error, Result};

/// Tolerance for the sum-to-one check on ingested labels.
pub const LABEL_SUM_TOLERANCE: f64 = 1e-6;
/// Tolerance for the sum-to-one check on constructed abundance vectors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Per-band reflectance of one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("spectrum has no bands".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite reflectance at band {i}")));
        }
        Ok(Spectrum(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Spectrum {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbundanceClass {
    Healthy,
    Affected,
    Dead,
}

impl AbundanceClass {
    pub const ALL: [AbundanceClass; 3] = [
        AbundanceClass::Healthy,
        AbundanceClass::Affected,
        AbundanceClass::Dead,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AbundanceClass::Healthy => "healthy",
            AbundanceClass::Affected => "affected",
            AbundanceClass::Dead => "dead",
        }
    }
}

impl fmt::Display for AbundanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Healthy / affected / dead fractions of one pixel, always on the simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbundanceVector([f64; 3]);

impl AbundanceVector {
    /// Strict constructor: components in [0, 1] summing to one within 1e-9.
    pub fn new(healthy: f64, affected: f64, dead: f64) -> Result<Self> {
        let v = [healthy, affected, dead];
        check_components(&v)?;
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Invalid(format!("abundances sum to {sum}, not 1")));
        }
        Ok(AbundanceVector(v))
    }

    /// Lenient constructor for field labels: accepts a sum within 1e-6 of
    /// one and rescales onto the simplex.
    pub fn from_label(healthy: f64, affected: f64, dead: f64) -> Result<Self> {
        let v = [healthy, affected, dead];
        check_components(&v)?;
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > LABEL_SUM_TOLERANCE {
            return Err(Error::Invalid(format!(
                "label sums to {sum}; sum-to-one violated"
            )));
        }
        Ok(AbundanceVector(renormalize(v)))
    }

    pub fn pure(class: AbundanceClass) -> Self {
        let mut v = [0.0; 3];
        v[class.index()] = 1.0;
        AbundanceVector(v)
    }

    pub(crate) fn from_simplex_unchecked(v: [f64; 3]) -> Self {
        AbundanceVector(v)
    }

    pub fn healthy(&self) -> f64 {
        self.0[0]
    }

    pub fn affected(&self) -> f64 {
        self.0[1]
    }

    pub fn dead(&self) -> f64 {
        self.0[2]
    }

    pub fn get(&self, class: AbundanceClass) -> f64 {
        self.0[class.index()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn distance(&self, other: &AbundanceVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Rescales non-negative components with a positive sum so that their
/// sum, evaluated left to right, is exactly `1.0`. Triples already summing
/// to exactly one are returned untouched, which makes the map idempotent.
pub(crate) fn renormalize(v: [f64; 3]) -> [f64; 3] {
    let sum = v[0] + v[1] + v[2];
    if sum == 1.0 {
        return v;
    }
    let mut p = v.map(|x| x / sum);
    // The last summand absorbs the residue. When p0 + p1 >= 0.5 the
    // subtraction is exact; otherwise the absorbing component is at least
    // 0.5 and single-ulp steps walk the sum onto 1.0.
    let head = p[0] + p[1];
    let r = if head <= 1.0 {
        p[2] = 1.0 - head;
        2
    } else {
        p[2] = 0.0;
        usize::from(p[1] > p[0])
    };
    for _ in 0..64 {
        let s = p[0] + p[1] + p[2];
        if s == 1.0 {
            break;
        }
        p[r] = if s > 1.0 { p[r].next_down() } else { p[r].next_up() }.max(0.0);
    }
    p
}

fn check_components(v: &[f64; 3]) -> Result<()> {
    for (class, &x) in AbundanceClass::ALL.iter().zip(v) {
        if !x.is_finite() {
            return Err(Error::Invalid(format!("{class} abundance is not finite")));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Invalid(format!("{class} abundance {x} outside [0, 1]")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub id: String,
    pub spectrum: Spectrum,
    pub label: AbundanceVector,
}

/// Labeled and unlabeled spectra sharing one band count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    band_count: usize,
    labeled: Vec<LabeledSample>,
    unlabeled: Vec<Spectrum>,
}

impl Dataset {
    pub fn new(
        band_count: usize,
        labeled: Vec<LabeledSample>,
        unlabeled: Vec<Spectrum>,
    ) -> Result<Self> {
        if band_count == 0 {
            return Err(Error::Invalid("band count must be positive".into()));
        }
        for s in &labeled {
            if s.spectrum.len() != band_count {
                return Err(Error::Shape(format!(
                    "labeled sample {} has {} bands, expected {band_count}",
                    s.id,
                    s.spectrum.len()
                )));
            }
        }
        if let Some(s) = unlabeled.iter().find(|s| s.len() != band_count) {
            return Err(Error::Shape(format!(
                "unlabeled spectrum has {} bands, expected {band_count}",
                s.len()
            )));
        }
        Ok(Dataset {
            band_count,
            labeled,
            unlabeled,
        })
    }

    pub fn band_count(&self) -> usize {
        self.band_count
    }

    pub fn labeled(&self) -> &[LabeledSample] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[Spectrum] {
        &self.unlabeled
    }

    pub fn labeled_subset(&self, indices: &[usize]) -> Vec<LabeledSample> {
        indices.iter().map(|&i| self.labeled[i].clone()).collect()
    }
}

/// Assignment of each labeled sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// `(train, held_out)` indices for one fold, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut held = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                held.push(i);
            } else {
                train.push(i);
            }
        }
        (train, held)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles `0..n_samples` with the seed, then deals the permutation out to
/// folds round-robin.
pub fn make_folds(n_samples: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Invalid(format!("need at least 2 folds, got {k}")));
    }
    if k > n_samples {
        return Err(Error::Invalid(format!(
            "{k} folds requested for only {n_samples} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut rng::substream(seed, domain::FOLDS, 0));
    let mut assignments = vec![0; n_samples];
    for (pos, &idx) in order.iter().enumerate() {
        assignments[idx] = pos % k;
    }
    Ok(FoldPlan { k, assignments })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainValSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    /// Set when one side of the split came out empty.
    pub warning: Option<String>,
}

/// Random split with `round_half_up(ratio * n)` items on the training side.
pub fn train_val_split(indices: &[usize], ratio: f64, seed: u64) -> Result<TrainValSplit> {
    if indices.is_empty() {
        return Err(Error::Invalid("cannot split an empty index list".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Invalid(format!("split ratio {ratio} outside (0, 1)")));
    }
    let n = indices.len();
    let n_train = ((ratio * n as f64 + 0.5).floor() as usize).min(n);
    let mut shuffled = indices.to_vec();
    shuffled.shuffle(&mut rng::substream(seed, domain::SPLIT, 0));
    let val = shuffled.split_off(n_train);
    let warning = if shuffled.is_empty() || val.is_empty() {
        Some(format!(
            "degenerate split of {n} samples: {} train, {} validation",
            shuffled.len(),
            val.len()
        ))
    } else {
        None
    };
    Ok(TrainValSplit {
        train: shuffled,
        val,
        warning,
    })
}

pub fn rmse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Invalid("rmse of empty input".into()));
    }
    let sse: f64 = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn label_tolerance_and_renormalization() {
        let v = AbundanceVector::from_label(0.5, 0.3, 0.2 + 5e-7).unwrap();
        let s: f64 = v.as_array().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(AbundanceVector::from_label(0.5, 0.5, 0.5).is_err());
        assert!(AbundanceVector::from_label(-0.1, 0.6, 0.5).is_err());
        assert!(AbundanceVector::new(0.5, 0.3, 0.2 + 5e-7).is_err());
    }

    #[test]
    fn spectrum_rejects_non_finite() {
        assert!(Spectrum::new(vec![0.1, f64::NAN]).is_err());
        assert!(Spectrum::new(vec![]).is_err());
    }

    #[test]
    fn folds_of_ten_into_five() {
        let plan = make_folds(10, 5, 42).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2; 5]);
        assert_eq!(plan, make_folds(10, 5, 42).unwrap());
    }

    #[test]
    fn folds_of_eleven_into_five() {
        let mut sizes = make_folds(11, 5, 1).unwrap().fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
    }

    #[test]
    fn folds_reject_too_many() {
        assert!(make_folds(3, 5, 0).is_err());
        assert!(make_folds(3, 1, 0).is_err());
    }

    #[test]
    fn seventy_thirty_split() {
        let idx: Vec<usize> = (0..10).collect();
        let s = train_val_split(&idx, 0.7, 3).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (7, 3));
        assert!(s.warning.is_none());
    }

    #[test]
    fn single_index_split_warns() {
        let s = train_val_split(&[4], 0.7, 3).unwrap();
        assert_eq!(s.train, vec![4]);
        assert!(s.val.is_empty());
        assert!(s.warning.is_some());
        assert!(train_val_split(&[], 0.7, 3).is_err());
    }

    #[test]
    fn split_rounds_half_up() {
        let idx: Vec<usize> = (0..5).collect();
        assert_eq!(train_val_split(&idx, 0.5, 0).unwrap().train.len(), 3);
    }

    #[test]
    fn seeds_permute_differently() {
        let idx: Vec<usize> = (0..100).collect();
        let a = train_val_split(&idx, 0.7, 1).unwrap();
        let b = train_val_split(&idx, 0.7, 2).unwrap();
        assert_eq!(a.train.len(), b.train.len());
        assert_ne!(a.train, b.train);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        let r = rmse(&[0.2, 0.6, 0.5], &[0.1, 0.5, 0.4]).unwrap();
        assert!((r - 0.1).abs() < 1e-12);
        let r = rmse(&[0.2, 0.6], &[0.0, 1.0]).unwrap();
        assert!((r - 0.1f64.sqrt()).abs() < 1e-12);
        assert!((r - 0.316228).abs() < 1e-6);
        assert!(rmse(&[1.0], &[]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn renormalize_sums_exactly(
            m in prop::array::uniform3(0.0f64..1.0),
            e in prop::array::uniform3(-30i32..30),
        ) {
            let v = [m[0] * 2f64.powi(e[0]), m[1] * 2f64.powi(e[1]), m[2] * 2f64.powi(e[2]) + 1e-300];
            let p = renormalize(v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert_eq!(p[0] + p[1] + p[2], 1.0);
            prop_assert_eq!(renormalize(p), p);
        }

        #[test]
        fn folds_partition_and_balance(n in 2usize..200, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let plan = make_folds(n, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().all(|&s| s > 0));
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut seen = vec![0; n];
            for f in 0..k {
                for i in plan.split(f).1 { seen[i] += 1; }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn split_is_a_partition(n in 1usize..100, ratio in 0.05f64..0.95, seed in any::<u64>()) {
            let idx: Vec<usize> = (0..n).collect();
            let s = train_val_split(&idx, ratio, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, idx);
            prop_assert_eq!(s.train.len(), ((ratio * n as f64 + 0.5).floor() as usize).min(n));
        }

        #[test]
        fn rmse_symmetric_and_permutation_invariant(
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..40),
            rot in 0usize..40,
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
            prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
            let r = rot % a.len();
            let mut pa = a.clone();
            let mut pb = b.clone();
            pa.rotate_left(r);
            pb.rotate_left(r);
            prop_assert!((rmse(&pa, &pb).unwrap() - rmse(&a, &b).unwrap()).abs() < 1e-12);
        }
    }
}
