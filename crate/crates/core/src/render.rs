//! Abundance maps to binary PPM images.

use std::path::Path;

use crate::io::AbundanceMap;
use crate::{Error, Result};

/// Per-channel `[min, max]` over the active pixels of every given map.
pub fn channel_ranges(maps: &[&AbundanceMap]) -> [(f64, f64); 3] {
    let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); 3];
    for map in maps {
        for i in (0..map.pixel_count()).filter(|&i| map.is_active(i)) {
            for (r, v) in ranges.iter_mut().zip(map.abundance(i)) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
    }
    ranges
}

/// `P6` image with channel `c = round(255 (a_c − min_c) / (max_c − min_c))`.
/// A channel with zero range renders 0; masked pixels render black.
pub fn render_ppm(map: &AbundanceMap, ranges: &[(f64, f64); 3]) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", map.width, map.height).into_bytes();
    out.reserve(3 * map.pixel_count());
    for i in 0..map.pixel_count() {
        let a = map.abundance(i);
        for (v, &(lo, hi)) in a.iter().zip(ranges) {
            let byte = if !map.is_active(i) || !(hi > lo) {
                0
            } else {
                (255.0 * ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).round() as u8
            };
            out.push(byte);
        }
    }
    out
}

/// Renders `map`, pooling ranges with `joint` maps when any are given.
pub fn render_map_file(map: &AbundanceMap, joint: &[AbundanceMap], out: &Path) -> Result<()> {
    let mut all: Vec<&AbundanceMap> = vec![map];
    all.extend(joint.iter());
    let ranges = channel_ranges(&all);
    std::fs::write(out, render_ppm(map, &ranges)).map_err(|e| Error::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(values: Vec<f64>, w: usize) -> AbundanceMap {
        let n = values.len() / 3;
        AbundanceMap::new(n / w, w, 3, values).unwrap()
    }

    fn pixels(ppm: &[u8]) -> &[u8] {
        let mut newlines = 0;
        let start = ppm.iter().position(|&b| {
            newlines += (b == b'\n') as usize;
            newlines == 3
        });
        &ppm[start.unwrap() + 1..]
    }

    #[test]
    fn two_pixel_example() {
        let m = map(vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0], 2);
        let ppm = render_ppm(&m, &channel_ranges(&[&m]));
        assert!(ppm.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(pixels(&ppm), &[255, 0, 0, 0, 0, 255]);
    }

    #[test]
    fn uniform_map_is_black() {
        let m = map([0.2, 0.3, 0.5].repeat(6), 3);
        let ppm = render_ppm(&m, &channel_ranges(&[&m]));
        assert!(pixels(&ppm).iter().all(|&b| b == 0));
        assert_eq!(pixels(&ppm).len(), 18);
    }

    #[test]
    fn masked_pixels_are_black_and_excluded_from_ranges() {
        let m = AbundanceMap::new(1, 3, 4, vec![0.2, 0.3, 0.5, 1.0, 0.6, 0.2, 0.2, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let r = channel_ranges(&[&m]);
        assert_eq!(r[0], (0.2, 0.6));
        let ppm = render_ppm(&m, &r);
        assert_eq!(pixels(&ppm), &[0, 255, 255, 255, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn joint_ranges_pool_maps() {
        let a = map(vec![0.5, 0.25, 0.25], 1);
        let b = map(vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0], 2);
        let r = channel_ranges(&[&a, &b]);
        assert_eq!(pixels(&render_ppm(&a, &r)), &[128, 255, 64]);
        let solo = render_ppm(&a, &channel_ranges(&[&a]));
        assert_eq!(pixels(&solo), &[0, 0, 0]);
        assert_eq!(render_ppm(&a, &r), render_ppm(&a, &r));
    }
}
