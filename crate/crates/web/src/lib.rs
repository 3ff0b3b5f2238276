//! Browser bindings: each export takes JSON model descriptions plus a
//! frequency band and returns a JSON document for plotting.

use daylight_core::daylight::{
    statistical_autocorrelation, thin_annulus_autocorrelation, DaylightOptions, NoiseSourceModel,
};
use daylight_core::propagator::PropagatorOptions;
use daylight_core::scattering::{eigenfrequency_scan, scattering_spectrum, Peak};
use daylight_core::spectrum::FrequencyGrid;
use daylight_core::{Medium, MediumSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest grid a single call will evaluate; keeps the page responsive.
pub const MAX_POINTS: usize = 20_000;

#[derive(Debug, Serialize)]
pub struct SpectrumCurve {
    pub l: usize,
    pub omega: Vec<f64>,
    pub operator: Vec<f64>,
    pub phase: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct CorrelationCurve {
    pub l: usize,
    pub omega: Vec<f64>,
    pub statistical: Vec<f64>,
    /// null where the thin-annulus form is not claimed.
    pub thin_annulus: Vec<Option<f64>>,
}

fn medium(json: &str) -> Result<Medium, String> {
    let spec: MediumSpec = serde_json::from_str(json).map_err(|e| format!("medium: {e}"))?;
    Medium::new(spec).map_err(|e| e.to_string())
}

fn grid(omega_min: f64, omega_max: f64, d_omega: f64) -> Result<FrequencyGrid, String> {
    let g = FrequencyGrid::new(omega_min, omega_max, d_omega).map_err(|e| e.to_string())?;
    if g.n > MAX_POINTS {
        return Err(format!("{} frequencies requested, at most {MAX_POINTS} allowed", g.n));
    }
    Ok(g)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub fn spectrum_json(
    medium_json: &str,
    omega_min: f64,
    omega_max: f64,
    d_omega: f64,
    l: usize,
) -> Result<String, String> {
    let m = medium(medium_json)?;
    let g = grid(omega_min, omega_max, d_omega)?;
    let rows = scattering_spectrum(&m, &g, &[l], &PropagatorOptions::default()).map_err(|e| e.to_string())?;
    to_json(&SpectrumCurve {
        l,
        omega: rows.iter().map(|r| r.omega).collect(),
        operator: rows.iter().map(|r| r.operator).collect(),
        phase: rows.iter().map(|r| r.reflection.arg()).collect(),
    })
}

pub fn peaks_json(medium_json: &str, omega_min: f64, omega_max: f64, d_omega: f64, l: usize) -> Result<String, String> {
    let m = medium(medium_json)?;
    let g = grid(omega_min, omega_max, d_omega)?;
    let peaks: Vec<Peak> = eigenfrequency_scan(&m, &g, l, &PropagatorOptions::default()).map_err(|e| e.to_string())?;
    to_json(&peaks)
}

pub fn correlation_json(
    medium_json: &str,
    noise_json: &str,
    omega_min: f64,
    omega_max: f64,
    d_omega: f64,
    l: usize,
) -> Result<String, String> {
    let m = medium(medium_json)?;
    let noise: NoiseSourceModel = serde_json::from_str(noise_json).map_err(|e| format!("noise: {e}"))?;
    noise.validate(&m).map_err(|e| e.to_string())?;
    let g = grid(omega_min, omega_max, d_omega)?;
    let opts = DaylightOptions::default();
    let mut curve = CorrelationCurve { l, omega: Vec::new(), statistical: Vec::new(), thin_annulus: Vec::new() };
    for k in 0..g.n {
        let w = g.omega(k);
        curve.omega.push(w);
        curve.statistical.push(statistical_autocorrelation(&m, &noise, w, l, &opts).map_err(|e| e.to_string())?);
        curve.thin_annulus.push(thin_annulus_autocorrelation(&m, &noise, w, l, &opts).ok());
    }
    to_json(&curve)
}

/// Scattering operator and reflection phase of mode l over a band.
#[wasm_bindgen(js_name = scatteringSpectrum)]
pub fn scattering_spectrum_js(
    medium: &str,
    omega_min: f64,
    omega_max: f64,
    d_omega: f64,
    l: usize,
) -> Result<String, JsError> {
    spectrum_json(medium, omega_min, omega_max, d_omega, l).map_err(|e| JsError::new(&e))
}

/// Resonance peaks of mode l.
#[wasm_bindgen(js_name = eigenfrequencies)]
pub fn eigenfrequencies_js(
    medium: &str,
    omega_min: f64,
    omega_max: f64,
    d_omega: f64,
    l: usize,
) -> Result<String, JsError> {
    peaks_json(medium, omega_min, omega_max, d_omega, l).map_err(|e| JsError::new(&e))
}

/// Noise autocorrelation spectrum of mode l, closed form and thin annulus.
#[wasm_bindgen(js_name = noiseCorrelation)]
pub fn noise_correlation_js(
    medium: &str,
    noise: &str,
    omega_min: f64,
    omega_max: f64,
    d_omega: f64,
    l: usize,
) -> Result<String, JsError> {
    correlation_json(medium, noise, omega_min, omega_max, d_omega, l).map_err(|e| JsError::new(&e))
}
