//! Noise-driven surface recordings and their autocorrelations.
//!
//! Sources n(t, r, angle) have covariance F((t - t')/eps) K(r) delta(r - r')
//! delta(angle). In the scaled transform this gives, per mode,
//! E[f(w, r) conj f(w', r')] = 2 pi F^(w) K(r) delta(r - r') delta(w - w').

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{angular_weights, AngularGrid, CoefficientTable};
use crate::medium::Medium;
use crate::propagator::{propagate_through, ModePropagator, PropagatorOptions};
use crate::quadrature::composite_gauss;
use crate::rng::stream;
use crate::scattering::{operator_value, symmetrized_from_state, FrequencyState, SourceTrace};
use crate::spectrum::Spectrum;

/// Radial source density K(r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialDensity {
    Zero,
    Uniform {
        r_lo: f64,
        r_hi: f64,
        amplitude: f64,
    },
    /// amplitude * sin^2(pi (r - r_lo) / (r_hi - r_lo)) on the support.
    Bump {
        r_lo: f64,
        r_hi: f64,
        amplitude: f64,
    },
}

impl RadialDensity {
    /// Uniform density on [R_o - d, R_o - d/20]: an annulus of thickness
    /// about d just below the surface.
    pub fn thin_annulus(medium: &Medium, d: f64, amplitude: f64) -> Self {
        let ro = medium.radius();
        RadialDensity::Uniform { r_lo: ro - d, r_hi: ro - d / 20.0, amplitude }
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            RadialDensity::Zero => None,
            RadialDensity::Uniform { r_lo, r_hi, .. } | RadialDensity::Bump { r_lo, r_hi, .. } => Some((r_lo, r_hi)),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match *self {
            RadialDensity::Zero => 0.0,
            RadialDensity::Uniform { r_lo, r_hi, amplitude } => {
                if (r_lo..=r_hi).contains(&r) {
                    amplitude
                } else {
                    0.0
                }
            }
            RadialDensity::Bump { r_lo, r_hi, amplitude } => {
                if (r_lo..=r_hi).contains(&r) {
                    amplitude * (PI * (r - r_lo) / (r_hi - r_lo)).sin().powi(2)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn validate(&self, medium: &Medium) -> Result<()> {
        if let Some((lo, hi)) = self.support() {
            let amplitude = match *self {
                RadialDensity::Uniform { amplitude, .. } | RadialDensity::Bump { amplitude, .. } => amplitude,
                RadialDensity::Zero => 0.0,
            };
            if !(amplitude >= 0.0) {
                return Err(Error::Domain(format!("source density must be nonnegative, got {amplitude}")));
            }
            if !(lo > medium.r_core() && hi < medium.radius() && lo < hi) {
                return Err(Error::Domain(format!(
                    "source support [{lo}, {hi}] must lie strictly inside ({}, {})",
                    medium.r_core(),
                    medium.radius()
                )));
            }
        }
        Ok(())
    }
}

/// Lateral source density G(theta, phi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AngularDensity {
    #[default]
    Uniform,
    Constant {
        value: f64,
    },
    /// `upper` for theta < pi/2, `lower` otherwise.
    Hemisphere {
        upper: f64,
        lower: f64,
    },
}

impl AngularDensity {
    pub fn value(&self, theta: f64, _phi: f64) -> f64 {
        match *self {
            AngularDensity::Uniform => 1.0,
            AngularDensity::Constant { value } => value,
            AngularDensity::Hemisphere { upper, lower } => {
                if theta < 0.5 * PI {
                    upper
                } else {
                    lower
                }
            }
        }
    }

    /// G_{l,m} for l <= l_max. Gauss nodes in cos(theta) come in +- pairs,
    /// so the hemispherical split is integrated exactly for |Y|^2.
    pub fn weights(&self, l_max: usize) -> Result<CoefficientTable<f64>> {
        let grid = AngularGrid::new(2 * (l_max + 1), 2 * l_max + 1)?;
        angular_weights(|t, p| self.value(t, p), l_max, &grid)
    }
}

/// Noise source: radial density, temporal spectrum and lateral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSourceModel {
    pub radial: RadialDensity,
    pub spectrum: Spectrum,
    #[serde(default)]
    pub angular: AngularDensity,
}

impl NoiseSourceModel {
    pub fn validate(&self, medium: &Medium) -> Result<()> {
        self.radial.validate(medium)?;
        self.spectrum.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DaylightOptions {
    pub propagator: PropagatorOptions,
    /// Thin-annulus approximation is claimed for d <= this * eps c_o / w.
    pub wavelength_fraction: f64,
    /// Gauss points per radial panel.
    pub radial_points: usize,
    /// Radial panel width; None picks the widest one that resolves the
    /// phase e^{-2 i w tau / eps}.
    pub radial_panel: Option<f64>,
}

impl Default for DaylightOptions {
    fn default() -> Self {
        Self {
            propagator: PropagatorOptions::default(),
            wavelength_fraction: 0.25,
            radial_points: 8,
            radial_panel: None,
        }
    }
}

/// Radial quadrature over the source support, valid up to `omega_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceLayer {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub density: Vec<f64>,
}

impl SourceLayer {
    pub fn new(medium: &Medium, noise: &NoiseSourceModel, omega_max: f64, opts: &DaylightOptions) -> Result<Self> {
        noise.validate(medium)?;
        let Some((lo, hi)) = noise.radial.support() else {
            return Ok(Self { nodes: Vec::new(), weights: Vec::new(), density: Vec::new() });
        };
        let c_min = medium.segments(lo, hi).iter().map(|s| 1.0 / s.max_slowness).fold(f64::INFINITY, f64::min);
        let required = opts.propagator.phase_fraction * PI * medium.epsilon() * c_min / omega_max;
        let panel = match opts.radial_panel {
            Some(p) if p > required => {
                return Err(Error::Config(format!(
                    "radial source grid is under-resolved: panel {p} exceeds the required spacing {required:.4e} \
                     (phase_fraction * pi * eps * c_o / w_max)"
                )))
            }
            Some(p) => p,
            None => required,
        };
        if opts.radial_points < 2 {
            return Err(Error::Config("radial quadrature needs >= 2 points per panel".into()));
        }
        // panels must not straddle kinks of K or breakpoints of the medium
        let mut edges = vec![lo];
        edges.extend(medium.breakpoints(lo, hi));
        edges.push(hi);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in edges.windows(2) {
            let (x, q) = composite_gauss(w[0], w[1], panel, opts.radial_points);
            nodes.extend(x);
            weights.extend(q);
        }
        let density = nodes.iter().map(|&r| noise.radial.value(r)).collect();
        Ok(Self { nodes, weights, density })
    }

    /// Integral of c_o(R_s)/R_s^2 K(R_s).
    pub fn weighted_mass(&self, medium: &Medium) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .zip(&self.density)
            .map(|((&r, &w), &k)| w * k * medium.speed(r) / (r * r))
            .sum()
    }
}

/// Propagators from r_core to every source node at one frequency.
#[derive(Debug, Clone)]
pub struct SourceKernel {
    pub state: FrequencyState,
    pub lowers: Vec<ModePropagator>,
}

impl SourceKernel {
    pub fn new(medium: &Medium, layer: &SourceLayer, omega: f64, opts: &PropagatorOptions) -> Result<Self> {
        let state = FrequencyState::new(medium, omega, opts)?;
        let lowers = propagate_through(medium, omega, medium.r_core(), &layer.nodes, opts)?;
        Ok(Self { state, lowers })
    }

    fn omega(&self) -> f64 {
        self.state.omega
    }

    /// Closed-form statistical autocorrelation C_l(w) per unit F^(w).
    pub fn statistical_unit(&self, medium: &Medium, layer: &SourceLayer, l: usize) -> Result<f64> {
        if layer.nodes.is_empty() {
            return Ok(0.0);
        }
        let omega = self.omega();
        let eps = medium.epsilon();
        let ro = medium.radius();
        let g = self.state.gamma;
        let r = self.state.reflection(medium, l)?;
        let d = self.state.resonance_denominator(r)?;
        let mut integral = 0.0;
        for (j, lower) in self.lowers.iter().enumerate() {
            let rs = layer.nodes[j];
            let (s, t) = self.state.source_factors(medium, lower, l);
            let phase = Complex64::from_polar(1.0, -2.0 * omega * medium.tau_to_surface(rs) / eps);
            integral += layer.weights[j] * layer.density[j] * medium.speed(rs) / (rs * rs) * (s + t * phase).norm_sqr();
        }
        let pref =
            eps * eps * medium.surface_speed() / (4.0 * ro * ro * omega * omega) * (1.0 + g).powi(2) / d.norm_sqr();
        Ok(pref * integral)
    }

    /// Surface response per unit F_{l,m} to a point source at node j,
    /// obtained by solving the amplitude system (center condition, jump at
    /// R_s, propagation to the surface, surface condition) directly.
    pub fn transfer(&self, medium: &Medium, layer: &SourceLayer, j: usize, l: usize) -> Result<Complex64> {
        let omega = self.omega();
        let eps = medium.epsilon();
        let rs = layer.nodes[j];
        let ro = medium.radius();
        let lower = &self.lowers[j];
        let upper = self.state.total.upper_part(lower)?;
        let e = crate::scattering::center_phase(medium, omega, l);
        // state just below the source per unit center amplitude
        let s1 = lower.a + lower.b.conj() * e;
        let t1 = lower.b + lower.a.conj() * e;
        let phi = omega * medium.tau_to_surface(rs) / eps;
        let jump = |r: f64| Complex64::from_polar((eps * medium.speed(r) / (2.0 * omega)).sqrt() / r, 0.25 * PI);
        let js = jump(rs);
        let (em, ep) = (Complex64::from_polar(1.0, -phi), Complex64::from_polar(1.0, phi));
        let (a2, b2) = (upper.a, upper.b);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut m = [
            [-(a2 * s1 + b2.conj() * t1), one, zero],
            [-(b2 * s1 + a2.conj() * t1), zero, one],
            [zero, one, Complex64::new(-self.state.gamma, 0.0)],
        ];
        let mut rhs = [js * (a2 * em - b2.conj() * ep), js * (b2 * em - a2.conj() * ep), zero];
        let x = solve3(&mut m, &mut rhs).ok_or(Error::NearResonance { omega, denominator: 0.0 })?;
        Ok(jump(ro) * (x[1] + x[2]))
    }

    /// F^ * sum_j w_j K_j |H_j|^2 per unit F^.
    pub fn brute_force_unit(&self, medium: &Medium, layer: &SourceLayer, l: usize) -> Result<f64> {
        let mut acc = 0.0;
        for j in 0..layer.nodes.len() {
            acc += layer.weights[j] * layer.density[j] * self.transfer(medium, layer, j, l)?.norm_sqr();
        }
        Ok(acc)
    }
}

/// Gaussian elimination with partial pivoting on a 3x3 complex system.
fn solve3(m: &mut [[Complex64; 3]; 3], b: &mut [Complex64; 3]) -> Option<[Complex64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))?;
        if m[piv][col].norm() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            #[allow(clippy::needless_range_loop)]
            for k in col..3 {
                let v = m[col][k];
                m[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Closed-form C_l(w) (independent of m for uniform lateral density).
pub fn statistical_autocorrelation(
    medium: &Medium,
    noise: &NoiseSourceModel,
    omega: f64,
    l: usize,
    opts: &DaylightOptions,
) -> Result<f64> {
    check_dissipative(medium)?;
    let f = noise.spectrum.value(omega);
    let layer = SourceLayer::new(medium, noise, omega, opts)?;
    if f == 0.0 || layer.nodes.is_empty() {
        return Ok(0.0);
    }
    let kernel = SourceKernel::new(medium, &layer, omega, &opts.propagator)?;
    Ok(f * kernel.statistical_unit(medium, &layer, l)?)
}

/// H_l(w, R_s): surface value per unit F_{l,m} for a point source at R_s.
pub fn surface_transfer(
    medium: &Medium,
    omega: f64,
    l: usize,
    r_s: f64,
    opts: &PropagatorOptions,
) -> Result<Complex64> {
    check_dissipative(medium)?;
    if !(r_s > medium.r_core() && r_s < medium.radius()) {
        return Err(Error::Domain(format!("source radius must lie in (r_core, R_o), got {r_s}")));
    }
    let layer = SourceLayer { nodes: vec![r_s], weights: vec![1.0], density: vec![1.0] };
    SourceKernel::new(medium, &layer, omega, opts)?.transfer(medium, &layer, 0, l)
}

fn check_dissipative(medium: &Medium) -> Result<()> {
    if medium.kappa() <= 0.0 {
        return Err(Error::Precondition("noise correlations need a dissipative surface (kappa > 0)".into()));
    }
    Ok(())
}

/// Thin-annulus approximation
/// eps^2 F^ c_o(R_o) / (4 R_o^2 w^2) [int c_o/R_s^2 K] |1 + Gamma|^2 |1 + R|^2 / |1 - Gamma R|^2.
pub fn thin_annulus_autocorrelation(
    medium: &Medium,
    noise: &NoiseSourceModel,
    omega: f64,
    l: usize,
    opts: &DaylightOptions,
) -> Result<f64> {
    check_dissipative(medium)?;
    let layer = SourceLayer::new(medium, noise, omega, opts)?;
    let Some((lo, _)) = noise.radial.support() else {
        return Ok(0.0);
    };
    let d = medium.radius() - lo;
    let limit = opts.wavelength_fraction * medium.epsilon() * medium.surface_speed() / omega;
    if d > limit {
        return Err(Error::Precondition(format!(
            "annulus thickness {d:.4e} exceeds {limit:.4e} = wavelength_fraction * eps c_o / w; \
             the thin-annulus form is not claimed there"
        )));
    }
    let st = FrequencyState::new(medium, omega, &opts.propagator)?;
    let r = st.reflection(medium, l)?;
    st.resonance_denominator(r)?;
    Ok(thin_from_reflection(medium, noise.spectrum.value(omega), layer.weighted_mass(medium), omega, r))
}

fn thin_from_reflection(medium: &Medium, f: f64, mass: f64, omega: f64, r: Complex64) -> f64 {
    let eps = medium.epsilon();
    let ro = medium.radius();
    let g = medium.gamma_surface();
    eps * eps * f * medium.surface_speed() / (4.0 * ro * ro * omega * omega)
        * mass
        * (1.0 + g).powi(2)
        * operator_value(g, r)
}

/// Periodic record of length T sampled at N points; w_k = k 2 pi eps / T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisGrid {
    pub epsilon: f64,
    pub record_length: f64,
    pub samples: usize,
}

impl SynthesisGrid {
    /// Smallest power-of-two sample count whose Nyquist frequency exceeds
    /// `omega_max` by at least 25%.
    pub fn covering(epsilon: f64, record_length: f64, omega_max: f64) -> Result<Self> {
        if !(record_length > 0.0 && omega_max > 0.0) {
            return Err(Error::Config("record length and band edge must be positive".into()));
        }
        let d_omega = 2.0 * PI * epsilon / record_length;
        let needed = (2.5 * omega_max / d_omega).ceil() as usize;
        Ok(Self { epsilon, record_length, samples: needed.next_power_of_two().max(8) })
    }

    pub fn d_omega(&self) -> f64 {
        2.0 * PI * self.epsilon / self.record_length
    }

    pub fn dt(&self) -> f64 {
        self.record_length / self.samples as f64
    }

    pub fn omega(&self, k: usize) -> f64 {
        k as f64 * self.d_omega()
    }

    /// Positive frequencies strictly below Nyquist.
    pub fn positive(&self) -> std::ops::Range<usize> {
        1..self.samples.div_ceil(2)
    }

    /// Indices k whose frequency lies in the spectral band.
    pub fn band_indices(&self, spectrum: &Spectrum) -> Vec<usize> {
        self.positive().filter(|&k| spectrum.value(self.omega(k)) > 0.0).collect()
    }

    /// Real series from positive-frequency coefficients X_k (k in
    /// `positive()`), p_n = (dw / 2 pi) sum_k X_k e^{-2 pi i k n / N}.
    pub fn synthesize(&self, coeffs: &[(usize, Complex64)]) -> Vec<f64> {
        let n = self.samples;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for &(k, x) in coeffs {
            buf[k] = x;
            buf[n - k] = x.conj();
        }
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = self.d_omega() / (2.0 * PI);
        buf.iter().map(|z| z.re * scale).collect()
    }

    /// Scaled transform p^(w_k) = (dt / eps) sum_n p_n e^{2 pi i k n / N}.
    pub fn transform(&self, series: &[f64]) -> Vec<Complex64> {
        let n = series.len();
        let mut buf: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let dt = self.record_length / n as f64;
        buf.iter().map(|z| z * (dt / self.epsilon)).collect()
    }
}

/// H_l(w_k, R_j) for every in-band frequency of a synthesis grid.
#[derive(Debug, Clone)]
pub struct TransferTable {
    pub l: usize,
    pub grid: SynthesisGrid,
    pub layer: SourceLayer,
    pub band: Vec<usize>,
    pub spectrum: Vec<f64>,
    pub transfer: Vec<Vec<Complex64>>,
    /// Closed-form C_l at the band frequencies.
    pub statistical: Vec<f64>,
}

impl TransferTable {
    pub fn new(
        medium: &Medium,
        noise: &NoiseSourceModel,
        grid: SynthesisGrid,
        l: usize,
        opts: &DaylightOptions,
    ) -> Result<Self> {
        check_dissipative(medium)?;
        if (grid.epsilon - medium.epsilon()).abs() > 1e-15 {
            return Err(Error::Contract(format!(
                "synthesis grid built for eps = {} used with eps = {}",
                grid.epsilon,
                medium.epsilon()
            )));
        }
        let band = grid.band_indices(&noise.spectrum);
        let omega_max = band.last().map(|&k| grid.omega(k)).unwrap_or(1.0);
        if let Some((_, hi)) = noise.spectrum.band() {
            if hi >= grid.omega(grid.samples / 2) {
                return Err(Error::Config(format!(
                    "noise band reaches {hi} but the sampling Nyquist frequency is {}",
                    grid.omega(grid.samples / 2)
                )));
            }
        }
        let layer = SourceLayer::new(medium, noise, omega_max, opts)?;
        let rows: Vec<(Vec<Complex64>, f64)> = band
            .par_iter()
            .map(|&k| {
                let kernel = SourceKernel::new(medium, &layer, grid.omega(k), &opts.propagator)?;
                let h = (0..layer.nodes.len())
                    .map(|j| kernel.transfer(medium, &layer, j, l))
                    .collect::<Result<Vec<_>>>()?;
                Ok((h, kernel.statistical_unit(medium, &layer, l)?))
            })
            .collect::<Result<_>>()?;
        let spectrum: Vec<f64> = band.iter().map(|&k| noise.spectrum.value(grid.omega(k))).collect();
        let statistical = rows.iter().zip(&spectrum).map(|((_, c), f)| c * f).collect();
        Ok(Self { l, grid, layer, band, spectrum, transfer: rows.into_iter().map(|(h, _)| h).collect(), statistical })
    }

    /// One realization of the surface recording of mode (l, m): independent
    /// circular Gaussian source coefficients per (w_k, R_j) with variance
    /// 2 pi F^ K / (w_j dw), propagated by H and summed over R_s.
    pub fn synthesize(&self, seed: u64, realization: u64, m: i64) -> Vec<f64> {
        self.grid.synthesize(&self.coefficients(seed, realization, m))
    }

    /// Fourier coefficients p^(w_k) of the realization drawn by `synthesize`.
    pub fn coefficients(&self, seed: u64, realization: u64, m: i64) -> Vec<(usize, Complex64)> {
        let mut rng = stream(seed, &[realization, self.l as u64, m as u64]);
        let dw = self.grid.d_omega();
        self.band
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let mut p = Complex64::new(0.0, 0.0);
                for j in 0..self.layer.nodes.len() {
                    let w = self.layer.weights[j];
                    let var = 2.0 * PI * self.spectrum[i] * self.layer.density[j] / (w * dw);
                    let s = (0.5 * var).sqrt();
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    p += w * self.transfer[i][j] * Complex64::new(s * re, s * im);
                }
                (k, p)
            })
            .collect()
    }

    /// Statistical C_l(t) at lags j dt (the periodic process has exactly
    /// this autocovariance).
    pub fn statistical_lags(&self, max_lag: usize) -> Vec<f64> {
        let dw = self.grid.d_omega();
        let eps = self.grid.epsilon;
        let dt = self.grid.dt();
        (0..=max_lag)
            .map(|j| {
                let t = j as f64 * dt;
                self.band
                    .iter()
                    .zip(&self.statistical)
                    .map(|(&k, &c)| c * (self.grid.omega(k) * t / eps).cos())
                    .sum::<f64>()
                    * dw
                    / PI
            })
            .collect()
    }
}

/// Where a correlation record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Statistical,
    Empirical,
    ThinAnnulus,
}

/// Autocorrelation of one mode in time (lags) and frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub l: usize,
    pub m: i64,
    pub provenance: Provenance,
    pub record_length: f64,
    pub realizations: usize,
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub omegas: Vec<f64>,
    pub spectrum: Vec<f64>,
}

/// C^T(j dt) = (1/T) int_0^T p(t) p(t + j dt) dt with the rectangle rule,
/// for j = 0..=max_lag.
pub fn empirical_autocorrelation(series: &[f64], dt: f64, window: f64, max_lag: usize) -> Result<Vec<f64>> {
    let n_window = (window / dt).round() as usize;
    if n_window == 0 {
        return Err(Error::Contract("correlation window shorter than one sample".into()));
    }
    if n_window + max_lag > series.len() {
        return Err(Error::Contract(format!(
            "window of {n_window} samples plus {max_lag} lags exceeds the {} available samples",
            series.len()
        )));
    }
    let scale = dt / window;
    Ok((0..=max_lag)
        .map(|j| series[..n_window].iter().zip(&series[j..j + n_window]).map(|(a, b)| a * b).sum::<f64>() * scale)
        .collect())
}

/// Periodogram estimate eps |p^(w_k)|^2 / T at the given indices.
pub fn periodogram(grid: &SynthesisGrid, series: &[f64], indices: &[usize]) -> Vec<f64> {
    let p = grid.transform(series);
    indices.iter().map(|&k| grid.epsilon * p[k].norm_sqr() / grid.record_length).collect()
}

/// Result of comparing d/dt C_l(t) with the symmetrized response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub l: usize,
    pub correlation: f64,
    pub fitted_constant: f64,
    pub predicted_constant: f64,
}

/// Builds d/dt C_l (from the full closed-form correlation) and p^sym_l (per
/// unit angular coefficient) on a common time grid and measures their
/// proportionality.
pub fn daylight_identity_check(
    medium: &Medium,
    noise: &NoiseSourceModel,
    source: &SourceTrace,
    l: usize,
    grid: SynthesisGrid,
    opts: &DaylightOptions,
) -> Result<IdentityReport> {
    check_dissipative(medium)?;
    if !source.pulse.is_even() {
        return Err(Error::Contract("the identity needs an even pulse".into()));
    }
    let scale = grid
        .positive()
        .map(|k| noise.spectrum.value(grid.omega(k)).max(source.pulse.transform(grid.omega(k)).norm()))
        .fold(0.0, f64::max);
    for k in grid.positive() {
        let w = grid.omega(k);
        let (f_noise, f_pulse) = (noise.spectrum.value(w), source.pulse.transform(w));
        if (f_pulse - f_noise).norm() > 1e-12 * scale {
            return Err(Error::Contract(format!(
                "noise spectrum and pulse transform differ at w = {w:.6}: F^ = {f_noise:.6e}, f^ = {:.6e}; \
                 the identity needs F^ = f^",
                f_pulse.re
            )));
        }
    }
    let band = grid.band_indices(&noise.spectrum);
    if band.is_empty() {
        return Err(Error::Contract("noise spectrum vanishes on the synthesis grid".into()));
    }
    let omega_max = grid.omega(*band.last().unwrap_or(&1));
    let layer = SourceLayer::new(medium, noise, omega_max, opts)?;
    let eps = medium.epsilon();
    let rows: Vec<(usize, Complex64, Complex64)> = band
        .par_iter()
        .map(|&k| {
            let w = grid.omega(k);
            let kernel = SourceKernel::new(medium, &layer, w, &opts.propagator)?;
            let c = noise.spectrum.value(w) * kernel.statistical_unit(medium, &layer, l)?;
            let dc = Complex64::new(0.0, -w / eps) * c;
            let sym = symmetrized_from_state(medium, &kernel.state, source.pulse.transform(w), l)?;
            Ok((k, dc, sym))
        })
        .collect::<Result<_>>()?;
    let x = grid.synthesize(&rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>());
    let y = grid.synthesize(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>());
    let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let xx: f64 = x.iter().map(|a| a * a).sum();
    let yy: f64 = y.iter().map(|b| b * b).sum();
    let g = medium.gamma_surface();
    Ok(IdentityReport {
        l,
        correlation: xy / (xx * yy).sqrt(),
        fitted_constant: xy / yy,
        predicted_constant: layer.weighted_mass(medium) * (1.0 + g) / (2.0 * (1.0 - g)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{FluctuationLayer, FluctuationSpec, MediumSpec};
    use crate::spectrum::Pulse;

    fn medium(kappa: f64) -> Medium {
        Medium::new(MediumSpec::homogeneous(1.0, 0.02, kappa).with_fluctuation(FluctuationSpec::Layered {
            layers: vec![
                FluctuationLayer { r_lo: 0.35, r_hi: 0.5, amplitude: 0.3 },
                FluctuationLayer { r_lo: 0.62, r_hi: 0.66, amplitude: -0.3 },
            ],
        }))
        .unwrap()
    }

    fn noise(radial: RadialDensity) -> NoiseSourceModel {
        NoiseSourceModel { radial, spectrum: Spectrum::gaussian(1.0, 0.15, 1.0), angular: AngularDensity::Uniform }
    }

    fn tight() -> DaylightOptions {
        DaylightOptions {
            propagator: PropagatorOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn zero_sources_give_zero() {
        let m = medium(0.5);
        let o = DaylightOptions::default();
        assert_eq!(statistical_autocorrelation(&m, &noise(RadialDensity::Zero), 1.0, 1, &o).unwrap(), 0.0);
        let zero_amp = noise(RadialDensity::Uniform { r_lo: 0.7, r_hi: 0.8, amplitude: 0.0 });
        assert_eq!(statistical_autocorrelation(&m, &zero_amp, 1.0, 1, &o).unwrap(), 0.0);
        let n = noise(RadialDensity::Uniform { r_lo: 0.7, r_hi: 0.8, amplitude: 1.0 });
        assert_eq!(statistical_autocorrelation(&m, &n, 3.0, 1, &o).unwrap(), 0.0);
        let thin = noise(RadialDensity::thin_annulus(&m, 0.001, 0.0));
        assert_eq!(thin_annulus_autocorrelation(&m, &thin, 1.0, 1, &o).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_matches_brute_force_transfer() {
        let m = medium(0.7);
        let n = noise(RadialDensity::Bump { r_lo: 0.3, r_hi: 0.9, amplitude: 2.0 });
        let o = tight();
        for k in 0..6 {
            let omega = 0.7 + 0.1 * k as f64;
            let layer = SourceLayer::new(&m, &n, omega, &o).unwrap();
            let kernel = SourceKernel::new(&m, &layer, omega, &o.propagator).unwrap();
            for l in 0..4 {
                let a = kernel.statistical_unit(&m, &layer, l).unwrap();
                let b = kernel.brute_force_unit(&m, &layer, l).unwrap();
                assert!((a - b).abs() <= 1e-10 * a, "w={omega} l={l}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn transfer_tends_to_point_response_at_surface() {
        let m = medium(0.4);
        let src = SourceTrace::single_mode(
            Pulse::Spectral { spectrum: Spectrum::Flat { lo: 0.1, hi: 5.0, amplitude: 1.0, taper: 0.0 } },
            1,
            0,
        )
        .unwrap();
        let omega = 1.1;
        let p = crate::scattering::point_source_response(&m, &src, omega, 1, 0, &PropagatorOptions::default()).unwrap();
        let h = surface_transfer(&m, omega, 1, 1.0 - 1e-9, &PropagatorOptions::default()).unwrap();
        assert!((h - p).norm() < 1e-6 * p.norm(), "{h} vs {p}");
        assert!(surface_transfer(&m, omega, 1, 1.0, &PropagatorOptions::default()).is_err());
    }

    #[test]
    fn under_resolved_radial_grid_is_rejected() {
        let m = medium(0.4);
        let n = noise(RadialDensity::Uniform { r_lo: 0.3, r_hi: 0.9, amplitude: 1.0 });
        let o = DaylightOptions { radial_panel: Some(0.1), ..Default::default() };
        let err = statistical_autocorrelation(&m, &n, 1.0, 0, &o).unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("required spacing")), "{err}");
    }

    #[test]
    fn thin_annulus_precondition_and_convergence() {
        let m = medium(0.4);
        let o = DaylightOptions::default();
        let omega = 1.2;
        let thick = noise(RadialDensity::thin_annulus(&m, 0.01, 1.0));
        assert!(matches!(thin_annulus_autocorrelation(&m, &thick, omega, 1, &o), Err(Error::Precondition(_))));
        // pointwise gaps blow up where |1 + R| vanishes; compare over the band
        let gap = |d: f64| {
            let n = noise(RadialDensity::thin_annulus(&m, d, 1.0));
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..=60 {
                let w = 0.6 + 0.02 * k as f64;
                let s = statistical_autocorrelation(&m, &n, w, 1, &o).unwrap();
                let t = thin_annulus_autocorrelation(&m, &n, w, 1, &o).unwrap();
                num += (s - t).powi(2);
                den += t * t;
            }
            (num / den).sqrt()
        };
        let d = 0.1 * 0.02 / 1.8;
        let (g1, g2) = (gap(d), gap(0.5 * d));
        assert!(g1 < 0.05 && (g2 / g1 - 0.5).abs() < 0.05, "{g1} {g2}");
    }

    #[test]
    fn synthesis_round_trip_and_zero_spectrum() {
        let grid = SynthesisGrid::covering(0.02, 10.0, 1.0).unwrap();
        let coeffs = vec![(3, Complex64::new(1.0, -2.0)), (7, Complex64::new(0.5, 0.0))];
        let s = grid.synthesize(&coeffs);
        let back = grid.transform(&s);
        assert!((back[3] - coeffs[0].1).norm() < 1e-12 && (back[7] - coeffs[1].1).norm() < 1e-12);
        assert!(back[5].norm() < 1e-12);
        let m = medium(0.5);
        let n = NoiseSourceModel { spectrum: Spectrum::Zero, ..noise(RadialDensity::thin_annulus(&m, 0.002, 1.0)) };
        let table = TransferTable::new(&m, &n, grid, 1, &DaylightOptions::default()).unwrap();
        assert!(table.synthesize(1, 0, 0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empirical_autocorrelation_examples() {
        let c = vec![1.5; 100];
        let r = empirical_autocorrelation(&c, 0.1, 5.0, 10).unwrap();
        assert!(r.iter().all(|&v| (v - 2.25).abs() < 1e-12));
        assert!(matches!(empirical_autocorrelation(&c, 0.1, 9.5, 10), Err(Error::Contract(_))));
        let mut rng = stream(3, &[0]);
        let white: Vec<f64> = (0..40_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = empirical_autocorrelation(&white, 1.0, 30_000.0, 50).unwrap();
        let var: f64 = white[..30_000].iter().map(|x| x * x).sum::<f64>() / 30_000.0;
        assert!((r[0] - var).abs() < 1e-12);
        let sigma = 1.0 / (30_000f64).sqrt();
        assert!(r[50].abs() < 3.0 * sigma);
    }

    #[test]
    fn recordings_have_zero_mean_and_right_spectrum() {
        let m = medium(1.0);
        let n = noise(RadialDensity::Uniform { r_lo: 0.8, r_hi: 0.95, amplitude: 1.0 });
        let grid = SynthesisGrid::covering(0.02, 20.0, 1.7).unwrap();
        let table = TransferTable::new(&m, &n, grid, 2, &DaylightOptions::default()).unwrap();
        let reals = 200;
        let series: Vec<Vec<f64>> = (0..reals as u64).into_par_iter().map(|r| table.synthesize(9, r, 1)).collect();
        // mean at a fixed time across realizations
        let x: Vec<f64> = series.iter().map(|s| s[17]).collect();
        let mean = x.iter().sum::<f64>() / reals as f64;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reals - 1) as f64).sqrt();
        assert!(mean.abs() <= 3.0 * sd / (reals as f64).sqrt());
        // ensemble periodogram vs closed form
        let mut avg = vec![0.0; table.band.len()];
        for s in &series {
            for (a, v) in avg.iter_mut().zip(periodogram(&grid, s, &table.band)) {
                *a += v / reals as f64;
            }
        }
        let num: f64 = avg.iter().zip(&table.statistical).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = table.statistical.iter().map(|b| b * b).sum();
        assert!((num / den).sqrt() < 0.1, "{}", (num / den).sqrt());
        // m does not change the statistics, only the stream
        assert_ne!(table.synthesize(9, 0, 1), table.synthesize(9, 0, -1));
        assert_eq!(table.synthesize(9, 0, 1), series[0]);
    }

    #[test]
    fn identity_holds_for_thin_annulus() {
        let m = medium(0.5);
        let spec = Spectrum::gaussian(1.0, 0.12, 1.0);
        let grid = SynthesisGrid::covering(0.02, 40.0, 1.8).unwrap();
        let d = 0.05 * 0.02 / 1.72;
        let n = NoiseSourceModel {
            radial: RadialDensity::thin_annulus(&m, d, 1.0),
            spectrum: spec.clone(),
            angular: AngularDensity::Uniform,
        };
        let src = SourceTrace::single_mode(Pulse::Spectral { spectrum: spec }, 2, 0).unwrap();
        let mut consts = Vec::new();
        for l in 0..3 {
            let r = daylight_identity_check(&m, &n, &src, l, grid, &DaylightOptions::default()).unwrap();
            assert!(r.correlation > 0.99, "{r:?}");
            assert!((r.fitted_constant / r.predicted_constant - 1.0).abs() < 0.05, "{r:?}");
            consts.push(r.fitted_constant);
        }
        let mismatched =
            SourceTrace::single_mode(Pulse::Spectral { spectrum: Spectrum::gaussian(1.1, 0.12, 1.0) }, 2, 0).unwrap();
        let err = daylight_identity_check(&m, &n, &mismatched, 1, grid, &DaylightOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Contract(ref s) if s.contains("F^ = f^")));
    }

    #[test]
    fn hemisphere_weights_are_half() {
        let w = AngularDensity::Hemisphere { upper: 1.0, lower: 0.0 }.weights(4).unwrap();
        assert!(w.values.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }
}
