use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"STDZ";
const VERSION: u32 = 1;

/// Per-feature affine map to zero mean and unit (population) variance.
/// Constant features keep a unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Invalid("cannot standardize zero rows".into()));
        };
        let dim = first.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("feature rows differ in width".into()));
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let std = (0..dim)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Shape(format!("expected {} features, got {}", self.dim(), row.len())));
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }

    /// `"STDZ" | version u32 | dim u32 | mean f64×dim | std f64×dim`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 16 * self.dim());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        for v in self.mean.iter().chain(&self.std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Format("bad standardizer magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported standardizer version {version}")));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        if bytes.len() != 12 + 16 * dim {
            return Err(Error::Format("standardizer length mismatch".into()));
        }
        let vals: Vec<f64> = bytes[12..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if vals.iter().any(|v| !v.is_finite()) || vals[dim..].iter().any(|&s| s <= 0.0) {
            return Err(Error::Format("standardizer holds invalid values".into()));
        }
        Ok(Standardizer {
            mean: vals[..dim].to_vec(),
            std: vals[dim..].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_unit_variance() {
        let rows = vec![vec![1.0, 5.0, 2.0], vec![3.0, 5.0, 4.0], vec![5.0, 5.0, 9.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.std[1], 1.0);
        let t = s.transform_all(&rows).unwrap();
        for j in [0, 2] {
            let m: f64 = t.iter().map(|r| r[j]).sum::<f64>() / 3.0;
            let v: f64 = t.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / 3.0;
            assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        }
        assert!(t.iter().all(|r| r[1] == 0.0));
        assert!(s.transform(&[1.0]).is_err());
    }

    #[test]
    fn round_trip() {
        let s = Standardizer::fit(&[vec![0.1, -3.0], vec![0.7, 2.5]]).unwrap();
        let b = s.to_bytes();
        assert_eq!(Standardizer::from_bytes(&b).unwrap(), s);
        assert!(Standardizer::from_bytes(&b[..b.len() - 8]).is_err());
    }
}
