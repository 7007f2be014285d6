//! File formats: labeled-sample CSV, `HSCN` spectral cubes, `HABN`
//! abundance maps and `HMSK` masks.
//!
//! Binary layouts (all integers u32 little-endian, all samples f32
//! little-endian, pixel-major):
//!
//! ```text
//! HSCN | H | W | BANDS    | H*W*BANDS samples
//! HABN | H | W | CHANNELS | H*W*CHANNELS samples   (3, or 4 with a mask flag)
//! HMSK | H | W            | H*W bytes, 0 = masked, 1 = active
//! ```

use std::fs;
use std::path::Path;

use crate::spectra::{AbundanceVector, LabeledSample, Spectrum};
use crate::{Error, Result};

pub const CUBE_MAGIC: &[u8; 4] = b"HSCN";
pub const MAP_MAGIC: &[u8; 4] = b"HABN";
pub const MASK_MAGIC: &[u8; 4] = b"HMSK";

/// Labeled samples read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    pub band_count: usize,
    pub samples: Vec<LabeledSample>,
}

pub fn load_labeled_csv(path: &Path) -> Result<LabeledTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_csv(&text, path)
}

pub fn parse_labeled_csv(text: &str, path: &Path) -> Result<LabeledTable> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    let has_id = cols.first() == Some(&"id");
    let band_cols = &cols[usize::from(has_id)..];
    if band_cols.len() < 4 || band_cols[band_cols.len() - 3..] != ["healthy", "affected", "dead"] {
        return Err(parse_err(
            1,
            "header must end with healthy,affected,dead after at least one band column".into(),
        ));
    }
    let band_count = band_cols.len() - 3;
    for (b, name) in band_cols[..band_count].iter().enumerate() {
        if *name != format!("band_{b}") {
            return Err(parse_err(1, format!("expected column band_{b}, found {name}")));
        }
    }

    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != cols.len() {
            return Err(parse_err(
                line,
                format!("{} columns, header has {}", record.len(), cols.len()),
            ));
        }
        let mut fields = record.iter();
        let id = if has_id {
            fields.next().unwrap_or_default().to_string()
        } else {
            row.to_string()
        };
        let numbers = fields
            .map(|f| {
                let v: f64 = f
                    .parse()
                    .map_err(|_| parse_err(line, format!("not a number: {f:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(line, format!("non-finite value {f}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = AbundanceVector::from_label(
            numbers[band_count],
            numbers[band_count + 1],
            numbers[band_count + 2],
        )
        .map_err(|e| parse_err(line, e.to_string()))?;
        let spectrum = Spectrum::new(numbers[..band_count].to_vec())
            .map_err(|e| parse_err(line, e.to_string()))?;
        samples.push(LabeledSample {
            id,
            spectrum,
            label,
        });
    }
    Ok(LabeledTable {
        band_count,
        samples,
    })
}

/// Serializes samples with an `id` column. Floats use shortest round-trip
/// formatting, so loading the file reproduces every value exactly.
pub fn labeled_csv_string(samples: &[LabeledSample]) -> Result<String> {
    let band_count = samples.first().map_or(0, |s| s.spectrum.len());
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend((0..band_count).map(|b| format!("band_{b}")));
    header.extend(["healthy", "affected", "dead"].map(String::from));
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    writer.write_record(&header).map_err(csv_err)?;
    for s in samples {
        if s.spectrum.len() != band_count {
            return Err(Error::Shape(format!("sample {} band count differs", s.id)));
        }
        let mut rec = vec![s.id.clone()];
        rec.extend(s.spectrum.values().iter().map(|v| v.to_string()));
        rec.extend(s.label.as_array().iter().map(|v| v.to_string()));
        writer.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_labeled_csv(path: &Path, samples: &[LabeledSample]) -> Result<()> {
    fs::write(path, labeled_csv_string(samples)?).map_err(|e| Error::io(path, e))
}

/// H×W grid of pixels with `depth` samples each, pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub values: Vec<f64>,
}

impl Cube {
    pub fn new(height: usize, width: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        check_grid(height, width, bands, values.len())?;
        Ok(Cube {
            height,
            width,
            bands,
            values,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.values[index * self.bands..(index + 1) * self.bands]
    }

    pub fn spectra(&self) -> Result<Vec<Spectrum>> {
        (0..self.pixel_count())
            .map(|i| Spectrum::new(self.pixel(i).to_vec()))
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        encode_grid(CUBE_MAGIC, self.height, self.width, self.bands, &self.values)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (height, width, bands, values) = decode_grid(CUBE_MAGIC, bytes)?;
        Cube::new(height, width, bands, values)
    }
}

pub fn load_unlabeled_cube(path: &Path) -> Result<Cube> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Cube::from_bytes(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_cube(path: &Path, cube: &Cube) -> Result<()> {
    fs::write(path, cube.to_bytes()?).map_err(|e| Error::io(path, e))
}

/// Per-pixel abundances. With four channels the last one is an activity
/// flag: 1 for predicted pixels, 0 for masked pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl AbundanceMap {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels != 3 && channels != 4 {
            return Err(Error::Format(format!(
                "abundance map must have 3 or 4 channels, got {channels}"
            )));
        }
        check_grid(height, width, channels, values.len())?;
        Ok(AbundanceMap {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn from_abundances(height: usize, width: usize, abundances: &[AbundanceVector]) -> Result<Self> {
        let values = abundances.iter().flat_map(|a| a.as_array()).collect();
        AbundanceMap::new(height, width, 3, values)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn abundance(&self, index: usize) -> [f64; 3] {
        let p = &self.values[index * self.channels..];
        [p[0], p[1], p[2]]
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.channels == 3 || self.values[index * self.channels + 3] != 0.0
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        encode_grid(MAP_MAGIC, self.height, self.width, self.channels, &self.values)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (height, width, channels, values) = decode_grid(MAP_MAGIC, bytes)?;
        AbundanceMap::new(height, width, channels, values)
    }
}

pub fn load_abundance_map(path: &Path) -> Result<AbundanceMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    AbundanceMap::from_bytes(&bytes)
}

pub fn write_abundance_map(path: &Path, map: &AbundanceMap) -> Result<()> {
    fs::write(path, map.to_bytes()?).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub active: Vec<bool>,
}

impl Mask {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.active.len());
        out.extend_from_slice(MASK_MAGIC);
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend(self.active.iter().map(|&a| u8::from(a)));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MASK_MAGIC {
            return Err(Error::Format("bad mask magic".into()));
        }
        let height = read_u32(bytes, 4) as usize;
        let width = read_u32(bytes, 8) as usize;
        let body = &bytes[12..];
        if body.len() != height * width {
            return Err(Error::Format(format!(
                "mask payload has {} bytes, expected {}",
                body.len(),
                height * width
            )));
        }
        let active = body
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Format(format!("mask byte {other} is not 0 or 1"))),
            })
            .collect::<Result<_>>()?;
        Ok(Mask {
            height,
            width,
            active,
        })
    }
}

pub fn load_mask(path: &Path) -> Result<Mask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Mask::from_bytes(&bytes)
}

fn check_grid(height: usize, width: usize, depth: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 || depth == 0 {
        return Err(Error::Format(format!(
            "dimensions must be positive, got {height}x{width}x{depth}"
        )));
    }
    if height * width * depth != len {
        return Err(Error::Shape(format!(
            "{height}x{width}x{depth} grid needs {} values, got {len}",
            height * width * depth
        )));
    }
    Ok(())
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn encode_grid(magic: &[u8; 4], h: usize, w: usize, d: usize, values: &[f64]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + values.len() * 4);
    out.extend_from_slice(magic);
    for dim in [h, w, d] {
        let dim = u32::try_from(dim).map_err(|_| Error::Format(format!("dimension {dim} exceeds u32")))?;
        out.extend_from_slice(&dim.to_le_bytes());
    }
    for &v in values {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::Format(format!("value {v} not representable as finite f32")));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

fn decode_grid(magic: &[u8; 4], bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic, expected {}",
            String::from_utf8_lossy(magic)
        )));
    }
    if bytes.len() < 16 {
        return Err(Error::Format("truncated header".into()));
    }
    let (h, w, d) = (
        read_u32(bytes, 4) as usize,
        read_u32(bytes, 8) as usize,
        read_u32(bytes, 12) as usize,
    );
    let expected = h
        .checked_mul(w)
        .and_then(|x| x.checked_mul(d))
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let body = &bytes[16..];
    if body.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {expected}",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .enumerate()
        .map(|(i, c)| {
            let v = f32::from_le_bytes(c.try_into().expect("4-byte chunk"));
            if v.is_finite() {
                Ok(f64::from(v))
            } else {
                Err(Error::Format(format!("non-finite value at offset {i}")))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((h, w, d, values))
}
