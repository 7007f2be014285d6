//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export wraps a plain function returning `barkscan::Result` so the
//! logic is testable off the browser.

use barkscan::contrastive::{magnitude_warp, AugmentationConfig};
use barkscan::io::AbundanceMap;
use barkscan::pipeline::simplex_normalize;
use barkscan::render::channel_ranges;
use barkscan::rng::{domain, substream};
use barkscan::synth::{generate_scene, make_endmembers_with, BandAggregation, SceneConfig};
use barkscan::{Result, Spectrum};
use wasm_bindgen::prelude::*;

fn js(e: barkscan::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Endmember spectra concatenated as healthy | affected | dead.
pub fn endmember_spectra(bands: usize, narrow_fraction: f64, seed: u64) -> Result<Vec<f64>> {
    let em = make_endmembers_with(bands, seed, narrow_fraction)?;
    Ok(em.iter().flat_map(|e| e.spectrum.values().to_vec()).collect())
}

pub fn warp_spectrum(
    spectrum: &[f64],
    alpha_min: f64,
    alpha_max: f64,
    sigma1: f64,
    sigma2: f64,
    num_knots: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let cfg = AugmentationConfig {
        alpha_range: (alpha_min, alpha_max),
        sigma1,
        sigma2,
        num_knots,
        seed,
    };
    let mut rng = substream(seed, domain::AUGMENT, 0);
    Ok(magnitude_warp(&Spectrum::new(spectrum.to_vec())?, &cfg, &mut rng)?.into_inner())
}

/// Noise-free mixture of the endmembers, weights projected onto the simplex.
/// Returns the normalized weights followed by the mixed spectrum.
pub fn mix_spectrum(weights: [f64; 3], bands: usize, narrow_fraction: f64, seed: u64) -> Result<Vec<f64>> {
    let a = simplex_normalize(weights)?;
    let em = make_endmembers_with(bands, seed, narrow_fraction)?;
    let mut out = a.as_array().to_vec();
    out.extend(barkscan::synth::mix(&em, &a));
    Ok(out)
}

/// Window means over `count` equal-width band windows.
pub fn aggregate_spectrum(spectrum: &[f64], count: usize) -> Result<Vec<f64>> {
    BandAggregation::equal_width(spectrum.len(), count)?.apply(spectrum)
}

/// RGBA pixels of a map, each channel stretched over its own range; masked
/// pixels are opaque black.
pub fn map_rgba(map: &AbundanceMap) -> Vec<u8> {
    let ranges = channel_ranges(&[map]);
    let mut out = Vec::with_capacity(4 * map.pixel_count());
    for i in 0..map.pixel_count() {
        for (v, &(lo, hi)) in map.abundance(i).iter().zip(&ranges) {
            let byte = if map.is_active(i) && hi > lo {
                (255.0 * ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).round() as u8
            } else {
                0
            };
            out.push(byte);
        }
        out.push(255);
    }
    out
}

/// Truth-map RGBA of a synthetic scene.
pub fn scene_truth_rgba(height: usize, width: usize, pure_fraction: f64, seed: u64) -> Result<Vec<u8>> {
    let cfg = SceneConfig {
        height,
        width,
        bands: 24,
        pure_fraction,
        seed,
        ..SceneConfig::default()
    };
    let em = make_endmembers_with(cfg.bands, seed, barkscan::synth::DEFAULT_NARROW_FRACTION)?;
    Ok(map_rgba(&generate_scene(&cfg, &em)?.truth_map()?))
}

#[wasm_bindgen(js_name = endmemberSpectra)]
pub fn endmember_spectra_js(bands: usize, narrow_fraction: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    endmember_spectra(bands, narrow_fraction, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = warpSpectrum)]
pub fn warp_spectrum_js(
    spectrum: &[f64],
    alpha_min: f64,
    alpha_max: f64,
    sigma1: f64,
    sigma2: f64,
    num_knots: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    warp_spectrum(spectrum, alpha_min, alpha_max, sigma1, sigma2, num_knots, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = mixSpectrum)]
pub fn mix_spectrum_js(
    healthy: f64,
    affected: f64,
    dead: f64,
    bands: usize,
    narrow_fraction: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    mix_spectrum([healthy, affected, dead], bands, narrow_fraction, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = aggregateSpectrum)]
pub fn aggregate_spectrum_js(spectrum: &[f64], count: usize) -> Result<Vec<f64>, JsError> {
    aggregate_spectrum(spectrum, count).map_err(js)
}

/// `values` holds 3 or 4 channels per pixel, pixel-major.
#[wasm_bindgen(js_name = renderMapRgba)]
pub fn render_map_rgba_js(values: Vec<f64>, height: usize, width: usize) -> Result<Vec<u8>, JsError> {
    let channels = values.len().checked_div(height * width).unwrap_or(3);
    AbundanceMap::new(height, width, channels, values)
        .map(|m| map_rgba(&m))
        .map_err(js)
}

#[wasm_bindgen(js_name = sceneTruthRgba)]
pub fn scene_truth_rgba_js(height: usize, width: usize, pure_fraction: f64, seed: u32) -> Result<Vec<u8>, JsError> {
    scene_truth_rgba(height, width, pure_fraction, seed.into()).map_err(js)
}
