use crate::spectra::{renormalize, AbundanceVector};
use crate::{Error, Result};

/// Clamps negatives to zero and rescales to sum one; an all-zero triple
/// maps to the uniform vector.
pub fn simplex_normalize(raw: [f64; 3]) -> Result<AbundanceVector> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("non-finite raw abundance {raw:?}")));
    }
    let clamped = raw.map(|v| v.max(0.0));
    if clamped.iter().sum::<f64>() == 0.0 {
        let third = 1.0 / 3.0;
        return Ok(AbundanceVector::from_simplex_unchecked(renormalize([third; 3])));
    }
    Ok(AbundanceVector::from_simplex_unchecked(renormalize(clamped)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: AbundanceVector, b: [f64; 3]) -> bool {
        a.as_array().iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn examples() {
        assert_eq!(simplex_normalize([0.2, 0.3, 0.5]).unwrap().as_array(), [0.2, 0.3, 0.5]);
        assert!(close(simplex_normalize([-0.1, 0.6, 0.5]).unwrap(), [0.0, 6.0 / 11.0, 5.0 / 11.0]));
        assert!(close(simplex_normalize([-1.0, -2.0, -3.0]).unwrap(), [1.0 / 3.0; 3]));
        assert!(simplex_normalize([f64::NAN, 0.0, 1.0]).is_err());
        assert!(simplex_normalize([f64::INFINITY, 0.0, 1.0]).is_err());
        let v = simplex_normalize([3.780668792678949, 1.1056867672177533, 0.10035871091320242]).unwrap();
        assert!(on_simplex(v.as_array()));
    }

    fn on_simplex(v: [f64; 3]) -> bool {
        v.iter().all(|&x| x >= 0.0) && v[0] + v[1] + v[2] == 1.0
    }

    proptest! {
        #[test]
        fn lands_on_simplex(raw in prop::array::uniform3(-5.0f64..5.0)) {
            let v = simplex_normalize(raw).unwrap().as_array();
            prop_assert!(on_simplex(v));
        }

        #[test]
        fn idempotent(raw in prop::array::uniform3(-5.0f64..5.0)) {
            let once = simplex_normalize(raw).unwrap().as_array();
            prop_assert_eq!(simplex_normalize(once).unwrap().as_array(), once);
        }

        #[test]
        fn power_of_two_scaling_is_exact(raw in prop::array::uniform3(0.0f64..5.0), e in -20i32..20) {
            let c = 2f64.powi(e);
            prop_assert_eq!(
                simplex_normalize(raw.map(|v| v * c)).unwrap().as_array(),
                simplex_normalize(raw).unwrap().as_array()
            );
        }

        #[test]
        fn arbitrary_scaling_within_rounding(raw in prop::array::uniform3(0.0f64..5.0), c in 1e-3f64..1e3) {
            let a = simplex_normalize(raw.map(|v| v * c)).unwrap().as_array();
            let b = simplex_normalize(raw).unwrap().as_array();
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 4.0 * f64::EPSILON);
            }
        }
    }
}
