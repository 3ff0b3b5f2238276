//! Robustness experiments: partial aperture, lateral source weighting,
//! angular medium perturbations and measurement noise.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::daylight::{CorrelationRecord, SynthesisGrid, TransferTable};
use crate::error::{Error, Result};
use crate::harmonics::{
    legendre, real_spherical_harmonic, spherical_harmonic, AngularGrid, CoefficientTable, LegendreGrid, ModeIndex,
};
use crate::integrator::{integrate_adaptive, AdaptiveOptions};
use crate::medium::Medium;
use crate::oracle::loglog_slope;
use crate::propagator::PropagatorOptions;
use crate::rng::stream;
use crate::scattering::{center_phase, find_peaks};
use crate::spectrum::{FrequencyGrid, Spectrum};

/// Samples of the angle-pair covariance E[p(0, x) p(t, x')] on Gauss nodes
/// in cos(Omega); the axis may be time lags or frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnglePairCovariance {
    pub axis: Vec<f64>,
    pub angles: Vec<f64>,
    pub weights: Vec<f64>,
    /// values[j][k]: angle j, axis sample k.
    pub values: Vec<Vec<f64>>,
    pub pairs_per_angle: usize,
}

impl AnglePairCovariance {
    /// Covariance with known Legendre coefficients c_l(axis) (outer index l).
    pub fn from_legendre(axis: Vec<f64>, c_l: &[Vec<f64>], grid: &LegendreGrid) -> Result<Self> {
        let angles = grid.angles();
        let values = grid
            .cosines()
            .iter()
            .map(|&x| {
                (0..axis.len()).map(|k| c_l.iter().enumerate().map(|(l, c)| c[k] * legendre(l, x)).sum()).collect()
            })
            .collect();
        Ok(Self { axis, angles, weights: grid.rule.weights.clone(), values, pairs_per_angle: 0 })
    }

    /// Largest polynomial degree in cos(Omega) the angle rule integrates exactly.
    pub fn exact_degree(&self) -> usize {
        (2 * self.angles.len()).saturating_sub(1)
    }

    fn validate(&self) -> Result<()> {
        if self.angles.len() != self.weights.len() || self.angles.len() != self.values.len() {
            return Err(Error::Contract("angle, weight and value counts differ".into()));
        }
        if let Some(a) = self.angles.iter().find(|&&a| !(a > 0.0 && a < PI)) {
            return Err(Error::Config(format!("pair angle {a} lies outside (0, pi)")));
        }
        if self.values.iter().any(|v| v.len() != self.axis.len()) {
            return Err(Error::Contract("covariance rows must match the axis length".into()));
        }
        Ok(())
    }
}

/// C_l = (2l+1)/2 int C(Omega) P_l(cos Omega) sin(Omega) dOmega per axis sample.
pub fn reconstruct_cl_from_pairs(cov: &AnglePairCovariance, l: usize) -> Result<Vec<f64>> {
    cov.validate()?;
    if cov.exact_degree() < 2 * l {
        return Err(Error::Config(format!(
            "{} pair angles integrate exactly only to degree {}; l = {l} needs degree {}. \
             Add receiver pairs whose angles cover (0, pi) more densely",
            cov.angles.len(),
            cov.exact_degree(),
            2 * l
        )));
    }
    let pl: Vec<f64> = cov.angles.iter().map(|a| legendre(l, a.cos())).collect();
    let scale = 0.5 * (2 * l + 1) as f64;
    Ok((0..cov.axis.len())
        .map(|k| scale * cov.values.iter().zip(&cov.weights).zip(&pl).map(|((v, w), p)| v[k] * w * p).sum::<f64>())
        .collect())
}

/// Per-(l, m) records scaled by G_{l,m}, and per-l m-summed records.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRecords {
    pub weighted: Vec<CorrelationRecord>,
    pub summed: Vec<CorrelationRecord>,
}

pub fn apply_angular_weights(records: &[CorrelationRecord], g: &CoefficientTable<f64>) -> Result<WeightedRecords> {
    if let Some(w) = g.values.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::Domain(format!("angular weights must be nonnegative, got {w}")));
    }
    let mut weighted = Vec::with_capacity(records.len());
    let mut summed: Vec<CorrelationRecord> = Vec::new();
    for rec in records {
        if rec.l > g.l_max {
            return Err(Error::Contract(format!("no angular weight for l = {} (table stops at {})", rec.l, g.l_max)));
        }
        let w = g.get(rec.l, rec.m);
        let mut r = rec.clone();
        r.values.iter_mut().for_each(|v| *v *= w);
        r.spectrum.iter_mut().for_each(|v| *v *= w);
        match summed.iter_mut().find(|s| s.l == rec.l) {
            Some(s) => {
                if s.spectrum.len() != r.spectrum.len() || s.values.len() != r.values.len() {
                    return Err(Error::Contract(format!("records for l = {} have different grids", rec.l)));
                }
                s.values.iter_mut().zip(&r.values).for_each(|(a, b)| *a += b);
                s.spectrum.iter_mut().zip(&r.spectrum).for_each(|(a, b)| *a += b);
            }
            None => summed.push(CorrelationRecord { m: 0, ..r.clone() }),
        }
        weighted.push(r);
    }
    Ok(WeightedRecords { weighted, summed })
}

/// A real spherical-harmonic expansion of an angular profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularTerm {
    pub l: usize,
    pub m: i64,
    pub amplitude: f64,
}

fn profile_value(terms: &[AngularTerm], theta: f64, phi: f64) -> Result<f64> {
    terms.iter().map(|t| Ok(t.amplitude * real_spherical_harmonic(t.l, t.m, theta, phi)?)).sum()
}

/// eps^a V21: sin^2 bump in r on [r_lo, r_hi] times an angular profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowComponent {
    pub r_lo: f64,
    pub r_hi: f64,
    pub angular: Vec<AngularTerm>,
}

/// eps^b V22(r / eps): (mean + cos(2 pi r / (eps period))) on [r_lo, r_hi].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastComponent {
    pub r_lo: f64,
    pub r_hi: f64,
    pub period: f64,
    #[serde(default)]
    pub mean: f64,
    pub angular: Vec<AngularTerm>,
}

/// eps^c V23(r / eps^2): zero-mean layered Ornstein-Uhlenbeck samples with
/// cells of width correlation_length * eps^2, unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingComponent {
    pub r_lo: f64,
    pub r_hi: f64,
    pub correlation_length: f64,
    #[serde(default)]
    pub seed: u64,
    pub angular: Vec<AngularTerm>,
}

impl MixingComponent {
    /// Cell edges and values for a given eps; values are centered so the
    /// realization has exactly zero mean over its support.
    pub fn realization(&self, eps: f64) -> (Vec<f64>, Vec<f64>) {
        let width = self.correlation_length * eps * eps;
        let n = ((self.r_hi - self.r_lo) / width).ceil().max(1.0) as usize;
        let h = (self.r_hi - self.r_lo) / n as f64;
        let edges: Vec<f64> = (0..=n).map(|i| self.r_lo + i as f64 * h).collect();
        let rho = (-h / width).exp();
        let mut rng = stream(self.seed, &[n as u64]);
        let mut x: f64 = StandardNormal.sample(&mut rng);
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(x);
            let z: f64 = StandardNormal.sample(&mut rng);
            x = rho * x + (1.0 - rho * rho).sqrt() * z;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        values.iter_mut().for_each(|v| *v -= mean);
        (edges, values)
    }
}

/// V2^eps = eps^a V21 + eps^b V22(r/eps) + eps^c V23(r/eps^2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularPerturbation {
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    pub slow: Option<SlowComponent>,
    pub fast: Option<FastComponent>,
    pub mixing: Option<MixingComponent>,
    #[serde(default = "default_lmax")]
    pub l_max: usize,
}

fn default_lmax() -> usize {
    2
}

impl AngularPerturbation {
    pub fn none(l_max: usize) -> Self {
        Self { a: 0.0, b: 0.0, c: 0.0, slow: None, fast: None, mixing: None, l_max }
    }

    fn validate(&self, medium: &Medium) -> Result<()> {
        if !(self.a >= 0.0 && self.b >= 0.0 && self.c >= 0.0) {
            return Err(Error::Domain("perturbation exponents a, b, c must be >= 0".into()));
        }
        let check = |name: &str, lo: f64, hi: f64, terms: &[AngularTerm]| -> Result<()> {
            if !(lo >= medium.r_core() && hi <= medium.radius() && lo < hi) {
                return Err(Error::Domain(format!("{name} support [{lo}, {hi}] must lie in [r_core, R_o]")));
            }
            for t in terms {
                ModeIndex::new(t.l, t.m)?;
                if t.l > self.l_max {
                    return Err(Error::Config(format!(
                        "{name} profile has degree {} above the truncation l_max = {}; the truncated system \
                         needs band-limited profiles",
                        t.l, self.l_max
                    )));
                }
            }
            Ok(())
        };
        if let Some(s) = &self.slow {
            check("slow", s.r_lo, s.r_hi, &s.angular)?;
        }
        if let Some(f) = &self.fast {
            check("fast", f.r_lo, f.r_hi, &f.angular)?;
            if !(f.period > 0.0) {
                return Err(Error::Domain("fast component period must be positive".into()));
            }
        }
        if let Some(x) = &self.mixing {
            check("mixing", x.r_lo, x.r_hi, &x.angular)?;
            if !(x.correlation_length > 0.0) {
                return Err(Error::Domain("mixing correlation length must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Coupling matrix int conj(Y_lm) Theta Y_l'm' over the sphere.
fn coupling_matrix(modes: &[ModeIndex], terms: &[AngularTerm], l_max: usize) -> Result<DMatrix<Complex64>> {
    let grid = AngularGrid::new(2 * l_max + 2, 3 * l_max + 2)?;
    let n = modes.len();
    let mut m = DMatrix::zeros(n, n);
    for node in grid.nodes() {
        let theta = profile_value(terms, node.theta, node.phi)?;
        if theta == 0.0 {
            continue;
        }
        let y: Vec<Complex64> =
            modes.iter().map(|k| spherical_harmonic(k.l, k.m, node.theta, node.phi)).collect::<Result<_>>()?;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += node.weight * theta * y[i].conj() * y[j];
            }
        }
    }
    Ok(m)
}

/// Surface reflection matrix of the truncated coupled system: beta_o = R alpha_o.
#[derive(Debug, Clone)]
pub struct CoupledSolution {
    pub omega: f64,
    pub modes: Vec<ModeIndex>,
    pub reflection: DMatrix<Complex64>,
    /// max |X^H J X - J| of the fundamental matrix, J = diag(I, -I).
    pub energy_residual: f64,
}

impl CoupledSolution {
    /// Normalized Frobenius distance to another solution on the same modes.
    pub fn deviation(&self, other: &CoupledSolution) -> f64 {
        (&self.reflection - &other.reflection).norm() / (self.modes.len() as f64).sqrt()
    }
}

pub fn coupled_mode_integrate(
    medium: &Medium,
    perturbation: &AngularPerturbation,
    omega: f64,
    opts: &PropagatorOptions,
) -> Result<CoupledSolution> {
    opts.validate()?;
    perturbation.validate(medium)?;
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {omega}")));
    }
    let eps = medium.epsilon();
    let modes: Vec<ModeIndex> = ModeIndex::all(perturbation.l_max).collect();
    let n = modes.len();
    let l_max = perturbation.l_max;
    let zero = || DMatrix::<Complex64>::zeros(n, n);
    // q = (1/eps) * eps^x * profile(r) * M
    let slow = match &perturbation.slow {
        Some(s) => {
            Some((s, coupling_matrix(&modes, &s.angular, l_max)? * Complex64::from(eps.powf(perturbation.a) / eps)))
        }
        None => None,
    };
    let fast = match &perturbation.fast {
        Some(f) => {
            Some((f, coupling_matrix(&modes, &f.angular, l_max)? * Complex64::from(eps.powf(perturbation.b) / eps)))
        }
        None => None,
    };
    let mixing = match &perturbation.mixing {
        Some(x) => {
            let (edges, values) = x.realization(eps);
            Some((
                edges,
                values,
                coupling_matrix(&modes, &x.angular, l_max)? * Complex64::from(eps.powf(perturbation.c) / eps),
            ))
        }
        None => None,
    };

    let (r0, r1) = (medium.r_core(), medium.radius());
    let mut edges = vec![r0, r1];
    edges.extend(medium.breakpoints(r0, r1));
    if let Some((s, _)) = &slow {
        edges.extend([s.r_lo, s.r_hi]);
    }
    if let Some((f, _)) = &fast {
        edges.extend([f.r_lo, f.r_hi]);
    }
    if let Some((e, _, _)) = &mixing {
        edges.extend(e.iter().copied());
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let dim = 2 * n;
    let mut x = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        x[i * dim + i] = Complex64::new(1.0, 0.0);
    }
    let mut q = zero();
    let mut qa = vec![Complex64::new(0.0, 0.0); n * dim];
    let mut qb = vec![Complex64::new(0.0, 0.0); n * dim];
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let v1 = medium.slowness_perturbation(mid);
        let slow_on = slow.as_ref().filter(|(s, _)| mid > s.r_lo && mid < s.r_hi);
        let fast_on = fast.as_ref().filter(|(f, _)| mid > f.r_lo && mid < f.r_hi);
        let mix_on = mixing.as_ref().and_then(|(e, v, m)| {
            let i = e.partition_point(|&r| r <= mid);
            (i >= 1 && i < e.len()).then(|| (v[i - 1], m))
        });
        if v1 == 0.0 && slow_on.is_none() && fast_on.is_none() && mix_on.is_none() {
            continue;
        }
        let seg = medium.segments(lo, hi);
        let max_slowness = seg.iter().map(|s| s.max_slowness).fold(0.0, f64::max);
        let mut h_max = opts.phase_fraction * PI * eps / (omega * max_slowness);
        if let Some((f, _)) = fast_on {
            h_max = h_max.min(0.125 * f.period * eps);
        }
        let adaptive = AdaptiveOptions { rtol: opts.rtol, atol: opts.atol, h_max, max_steps: opts.max_steps };
        let rhs = |r: f64, y: &[Complex64], dy: &mut [Complex64]| {
            q.fill(Complex64::new(0.0, 0.0));
            for i in 0..n {
                q[(i, i)] = Complex64::from(v1 / eps);
            }
            if let Some((s, m)) = slow_on {
                let prof = (PI * (r - s.r_lo) / (s.r_hi - s.r_lo)).sin().powi(2);
                q.zip_apply(m, |a, b| *a += b * prof);
            }
            if let Some((f, m)) = fast_on {
                let prof = f.mean + (2.0 * PI * r / (eps * f.period)).cos();
                q.zip_apply(m, |a, b| *a += b * prof);
            }
            if let Some((v, m)) = mix_on {
                q.zip_apply(m, |a, b| *a += b * v);
            }
            let k = 0.5 * omega * medium.speed_beside(r, mid);
            let e = Complex64::from_polar(1.0, 2.0 * omega * medium.tau_to_surface(r) / eps);
            // QA = Q X_top, QB = Q X_bottom
            for i in 0..n {
                for c in 0..dim {
                    let (mut sa, mut sb) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                    for j in 0..n {
                        let qij = q[(i, j)];
                        sa += qij * y[j * dim + c];
                        sb += qij * y[(n + j) * dim + c];
                    }
                    qa[i * dim + c] = sa;
                    qb[i * dim + c] = sb;
                }
            }
            let ik = Complex64::new(0.0, k);
            for i in 0..n {
                for c in 0..dim {
                    let (a, b) = (qa[i * dim + c], qb[i * dim + c]);
                    dy[i * dim + c] = -ik * (a + e.conj() * b);
                    dy[(n + i) * dim + c] = ik * (e * a + b);
                }
            }
        };
        integrate_adaptive(rhs, lo, hi, &mut x, &adaptive, |_, _| {})?;
    }

    let xm = DMatrix::from_row_slice(dim, dim, &x);
    let mut j = DMatrix::<Complex64>::identity(dim, dim);
    for i in n..dim {
        j[(i, i)] = Complex64::from(-1.0);
    }
    let energy_residual = (xm.adjoint() * &j * &xm - &j).iter().map(|z| z.norm()).fold(0.0, f64::max);

    let e = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        modes.iter().map(|k| center_phase(medium, omega, k.l)),
    ));
    let top = xm.view((0, 0), (n, n)) + xm.view((0, n), (n, n)) * &e;
    let bottom = xm.view((n, 0), (n, n)) + xm.view((n, n), (n, n)) * &e;
    // R = bottom top^{-1}  <=>  top^T R^T = bottom^T
    let rt = top
        .transpose()
        .lu()
        .solve(&bottom.transpose())
        .ok_or_else(|| Error::Consistency(format!("singular surface system at w = {omega}")))?;
    Ok(CoupledSolution { omega, modes, reflection: rt.transpose(), energy_residual })
}

/// One rung of an eps ladder: deviation of the perturbed surface reflection
/// from the unperturbed one, RMS over frequencies and mixing realizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub deviation: f64,
    pub energy_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub slope: f64,
}

pub fn perturbation_scaling(
    spec: &crate::medium::MediumSpec,
    perturbation: &AngularPerturbation,
    omegas: &[f64],
    eps_ladder: &[f64],
    realizations: u64,
    opts: &PropagatorOptions,
) -> Result<ScalingReport> {
    // only the mixing component is random; other parts need one realization
    let members: Vec<AngularPerturbation> = match &perturbation.mixing {
        Some(x) => (0..realizations.max(1))
            .map(|i| AngularPerturbation {
                mixing: Some(MixingComponent { seed: x.seed.wrapping_add(i), ..x.clone() }),
                ..perturbation.clone()
            })
            .collect(),
        None => vec![perturbation.clone()],
    };
    let rows: Vec<ScalingRow> = eps_ladder
        .par_iter()
        .map(|&eps| {
            let medium = Medium::new(crate::medium::MediumSpec { epsilon: eps, ..spec.clone() })?;
            let bare = AngularPerturbation::none(perturbation.l_max);
            let mut acc = 0.0;
            let mut residual: f64 = 0.0;
            for &w in omegas {
                let u = coupled_mode_integrate(&medium, &bare, w, opts)?;
                residual = residual.max(u.energy_residual);
                for member in &members {
                    let p = coupled_mode_integrate(&medium, member, w, opts)?;
                    acc += p.deviation(&u).powi(2);
                    residual = residual.max(p.energy_residual);
                }
            }
            let count = (omegas.len() * members.len()) as f64;
            Ok(ScalingRow { epsilon: eps, deviation: (acc / count).sqrt(), energy_residual: residual })
        })
        .collect::<Result<_>>()?;
    let slope = loglog_slope(&rows.iter().map(|r| (r.epsilon, r.deviation)).collect::<Vec<_>>());
    Ok(ScalingReport { rows, slope })
}

/// Quasi-uniform receiver directions (theta, phi) on a Fibonacci lattice.
pub fn fibonacci_receivers(n: usize) -> Vec<(f64, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            (z.acos(), (i as f64 * golden).rem_euclid(2.0 * PI))
        })
        .collect()
}

/// Mode series p_lm(t) ~ (4 pi / N) sum_i p(t, x_i) Y_lm(x_i) (real basis).
pub fn project_mode(series: &[Vec<f64>], receivers: &[(f64, f64)], l: usize, m: i64) -> Result<Vec<f64>> {
    if series.len() != receivers.len() || series.is_empty() {
        return Err(Error::Contract("one series per receiver is required".into()));
    }
    let w = 4.0 * PI / receivers.len() as f64;
    let mut out = vec![0.0; series[0].len()];
    for (s, &(t, p)) in series.iter().zip(receivers) {
        let y = w * real_spherical_harmonic(l, m, t, p)?;
        out.iter_mut().zip(s).for_each(|(o, v)| *o += y * v);
    }
    Ok(out)
}

const MEASUREMENT_STREAM: u64 = 0x6e_6f_69_73_65;

/// Adds independent noise with spectral density F^n to every receiver.
pub fn inject_measurement_noise(
    series: &mut [Vec<f64>],
    grid: &SynthesisGrid,
    noise: &Spectrum,
    seed: u64,
    realization: u64,
) -> Result<()> {
    noise.validate()?;
    if series.is_empty() {
        return Err(Error::Domain("measurement noise needs at least one receiver".into()));
    }
    let band = grid.band_indices(noise);
    if band.is_empty() {
        return Ok(());
    }
    let dw = grid.d_omega();
    for (i, s) in series.iter_mut().enumerate() {
        if s.len() != grid.samples {
            return Err(Error::Contract(format!("series {i} has {} samples, grid has {}", s.len(), grid.samples)));
        }
        let mut rng = stream(seed, &[MEASUREMENT_STREAM, realization, i as u64]);
        let coeffs: Vec<(usize, Complex64)> = band
            .iter()
            .map(|&k| {
                let sd = (PI * noise.value(grid.omega(k)) / dw).sqrt();
                (
                    k,
                    Complex64::new(
                        sd * rng.sample::<f64, _>(StandardNormal),
                        sd * rng.sample::<f64, _>(StandardNormal),
                    ),
                )
            })
            .collect();
        s.iter_mut().zip(grid.synthesize(&coeffs)).for_each(|(a, b)| *a += b);
    }
    Ok(())
}

/// Expected additive bias (4 pi / N) F^n(j dt) of mode autocorrelations
/// estimated from N uniformly spread receivers.
pub fn noise_floor(n: usize, noise: &Spectrum, grid: &SynthesisGrid, max_lag: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("noise floor needs at least one receiver".into()));
    }
    let dw = grid.d_omega();
    let band = grid.band_indices(noise);
    Ok((0..=max_lag)
        .map(|j| {
            let t = j as f64 * grid.dt();
            let f: f64 = band
                .iter()
                .map(|&k| noise.value(grid.omega(k)) * (grid.omega(k) * t / grid.epsilon).cos())
                .sum::<f64>()
                * dw
                / PI;
            4.0 * PI / n as f64 * f
        })
        .collect())
}

/// Measured vs predicted lag-0 bias that measurement noise adds to mode
/// autocorrelations estimated from N receivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseContamination {
    pub receivers: usize,
    pub measured: f64,
    pub predicted: f64,
}

/// Synthesizes the field from `tables` (modes l <= tables.len() - 1) at N
/// Fibonacci receivers, adds measurement noise, projects back on modes
/// l <= l_proj, and averages C_noisy(0) - C_clean(0) over modes and
/// realizations.
pub fn measurement_noise_contamination(
    tables: &[TransferTable],
    receivers: usize,
    l_proj: usize,
    noise: &Spectrum,
    realizations: u64,
    seed: u64,
) -> Result<NoiseContamination> {
    let Some(first) = tables.first() else {
        return Err(Error::Contract("at least one mode table is required".into()));
    };
    let grid = first.grid;
    let rx = fibonacci_receivers(receivers);
    let floor = noise_floor(receivers, noise, &grid, 0)?[0];
    let l_field = tables.len() - 1;
    let per: Vec<f64> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let modes: Vec<(ModeIndex, Vec<f64>)> =
                ModeIndex::all(l_field).map(|k| (k, tables[k.l].synthesize(seed, r, k.m))).collect();
            let mut clean = vec![vec![0.0; grid.samples]; rx.len()];
            for (s, &(t, p)) in clean.iter_mut().zip(&rx) {
                for (k, series) in &modes {
                    let y = real_spherical_harmonic(k.l, k.m, t, p)?;
                    s.iter_mut().zip(series).for_each(|(a, b)| *a += y * b);
                }
            }
            let mut noisy = clean.clone();
            inject_measurement_noise(&mut noisy, &grid, noise, seed, r)?;
            let mut acc = 0.0;
            let mut count = 0.0;
            for k in ModeIndex::all(l_proj) {
                let c0 = |s: &[Vec<f64>]| -> Result<f64> {
                    let p = project_mode(s, &rx, k.l, k.m)?;
                    Ok(crate::daylight::empirical_autocorrelation(&p, grid.dt(), grid.record_length, 0)?[0])
                };
                acc += c0(&noisy)? - c0(&clean)?;
                count += 1.0;
            }
            Ok(acc / count)
        })
        .collect::<Result<_>>()?;
    Ok(NoiseContamination { receivers, measured: per.iter().sum::<f64>() / per.len().max(1) as f64, predicted: floor })
}

/// Outcome of the partial-aperture pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApertureReport {
    pub d_omega: f64,
    pub omegas: Vec<f64>,
    /// Per l: (direct C_l, reconstructed C_l) on `omegas`.
    pub direct: Vec<Vec<f64>>,
    pub reconstructed: Vec<Vec<f64>>,
    /// Per l: largest |w_reconstructed - w_direct| over significant peaks.
    pub peak_mismatch: Vec<f64>,
    pub receivers: usize,
}

/// Synthesizes the surface field from modes l <= l_field at anchors plus
/// partners placed at the Gauss angles from each anchor, estimates the
/// angle-pair cross spectra, and recovers C_l for l <= l_max.
#[allow(clippy::too_many_arguments)]
pub fn aperture_reconstruction(
    medium: &Medium,
    noise: &crate::daylight::NoiseSourceModel,
    grid: SynthesisGrid,
    l_field: usize,
    l_max: usize,
    angles: usize,
    anchors: usize,
    realizations: u64,
    seed: u64,
    opts: &crate::daylight::DaylightOptions,
) -> Result<ApertureReport> {
    if l_max > l_field {
        return Err(Error::Config(format!("cannot recover l = {l_max} from a field truncated at {l_field}")));
    }
    let lg = LegendreGrid::new(angles);
    // P_l times a covariance of degree l_field must be integrated exactly
    if lg.rule.exact_degree() < l_field + l_max {
        return Err(Error::Config(format!(
            "{angles} pair angles integrate exactly to degree {}; recovering l = {l_max} from a field with \
             l <= {l_field} needs degree {}",
            lg.rule.exact_degree(),
            l_field + l_max
        )));
    }
    let angles = lg.angles();
    let tables: Vec<TransferTable> = (0..=l_field)
        .into_par_iter()
        .map(|l| TransferTable::new(medium, noise, grid, l, opts))
        .collect::<Result<_>>()?;
    let band = tables[0].band.clone();
    let nb = band.len();

    let mut placement = stream(seed, &[0x7265_6376]);
    let mut receivers = Vec::new();
    for _ in 0..anchors {
        let z: f64 = placement.random_range(-1.0..1.0);
        let (t0, p0) = (z.acos(), placement.random_range(0.0..2.0 * PI));
        receivers.push((t0, p0));
        for &omega_j in &angles {
            let az: f64 = placement.random_range(0.0..2.0 * PI);
            receivers.push(rotate_from(t0, p0, omega_j, az));
        }
    }
    let y: Vec<Vec<f64>> = receivers
        .iter()
        .map(|&(t, p)| ModeIndex::all(l_field).map(|k| real_spherical_harmonic(k.l, k.m, t, p)).collect())
        .collect::<Result<_>>()?;

    let stride = angles.len() + 1;
    let cross: Vec<Vec<Vec<f64>>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let coeffs: Vec<Vec<Complex64>> = ModeIndex::all(l_field)
                .map(|k| tables[k.l].coefficients(seed, r, k.m).into_iter().map(|(_, c)| c).collect())
                .collect();
            let field: Vec<Vec<Complex64>> = y
                .iter()
                .map(|yr| (0..nb).map(|i| coeffs.iter().zip(yr).map(|(c, w)| c[i] * w).sum()).collect())
                .collect();
            (0..angles.len())
                .map(|j| {
                    (0..nb)
                        .map(|i| {
                            (0..anchors)
                                .map(|a| (field[a * stride][i] * field[a * stride + 1 + j][i].conj()).re)
                                .sum::<f64>()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let norm = grid.epsilon / grid.record_length / (anchors as f64 * realizations as f64);
    let values: Vec<Vec<f64>> = (0..angles.len())
        .map(|j| (0..nb).map(|i| cross.iter().map(|c| c[j][i]).sum::<f64>() * norm).collect())
        .collect();
    let omegas: Vec<f64> = band.iter().map(|&k| grid.omega(k)).collect();
    let cov = AnglePairCovariance {
        axis: omegas.clone(),
        angles,
        weights: lg.rule.weights.clone(),
        values,
        pairs_per_angle: anchors,
    };
    let fg = FrequencyGrid::with_count(omegas[0], grid.d_omega(), nb)?;
    let mut direct = Vec::new();
    let mut reconstructed = Vec::new();
    let mut peak_mismatch = Vec::new();
    for (l, table) in tables.iter().enumerate().take(l_max + 1) {
        // addition theorem: the P_l coefficient of the pair covariance is (2l+1)/(4 pi) C_l
        let scale = 4.0 * PI / (2 * l + 1) as f64;
        let rec: Vec<f64> = reconstruct_cl_from_pairs(&cov, l)?.into_iter().map(|v| v * scale).collect();
        peak_mismatch.push(peak_mismatch_of(&table.statistical, &rec, &fg, l));
        direct.push(table.statistical.clone());
        reconstructed.push(rec);
    }
    Ok(ApertureReport {
        d_omega: grid.d_omega(),
        omegas,
        direct,
        reconstructed,
        peak_mismatch,
        receivers: receivers.len(),
    })
}

/// Direction at angular distance `omega` from (theta0, phi0), azimuth `az`.
fn rotate_from(theta0: f64, phi0: f64, omega: f64, az: f64) -> (f64, f64) {
    let (st, ct) = theta0.sin_cos();
    let (sp, cp) = phi0.sin_cos();
    let (so, co) = omega.sin_cos();
    let n = [st * cp, st * sp, ct];
    let e1 = [ct * cp, ct * sp, -st];
    let e2 = [-sp, cp, 0.0];
    let v: Vec<f64> = (0..3).map(|i| co * n[i] + so * (az.cos() * e1[i] + az.sin() * e2[i])).collect();
    (v[2].clamp(-1.0, 1.0).acos(), v[1].atan2(v[0]).rem_euclid(2.0 * PI))
}

/// For each direct peak above 10% of the maximum, the distance to the
/// argmax of `estimate` within half the distance to neighbouring peaks.
pub fn peak_mismatch_of(direct: &[f64], estimate: &[f64], grid: &FrequencyGrid, l: usize) -> f64 {
    let top = direct.iter().cloned().fold(0.0, f64::max);
    let peaks: Vec<usize> = find_peaks(direct, grid, l, false)
        .iter()
        .filter(|p| p.value >= 0.1 * top)
        .map(|p| ((p.omega - grid.omega_min) / grid.d_omega).round() as usize)
        .collect();
    let mut worst: f64 = 0.0;
    for (i, &p) in peaks.iter().enumerate() {
        let left = if i == 0 { 0 } else { (peaks[i - 1] + p) / 2 + 1 };
        let right = if i + 1 == peaks.len() { direct.len() - 1 } else { (p + peaks[i + 1]) / 2 };
        let arg = (left..=right).max_by(|&a, &b| estimate[a].total_cmp(&estimate[b])).unwrap_or(p);
        worst = worst.max((arg as f64 - p as f64).abs() * grid.d_omega);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daylight::{AngularDensity, DaylightOptions, NoiseSourceModel, Provenance, RadialDensity};
    use crate::harmonics::legendre_expand;
    use crate::medium::{FluctuationLayer, FluctuationSpec, MediumSpec};
    use crate::scattering::reflection_fundamental;

    fn tight() -> PropagatorOptions {
        PropagatorOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() }
    }

    #[test]
    fn constant_covariance_projects_on_l0() {
        let lg = LegendreGrid::new(5);
        let cov = AnglePairCovariance::from_legendre(vec![0.0, 1.0], &[vec![2.0, -1.0]], &lg).unwrap();
        assert!(cov.values.iter().all(|v| v[0] == 2.0 && v[1] == -1.0));
        let c0 = reconstruct_cl_from_pairs(&cov, 0).unwrap();
        assert!((c0[0] - 2.0).abs() < 1e-13 && (c0[1] + 1.0).abs() < 1e-13);
        for l in 1..5 {
            assert!(reconstruct_cl_from_pairs(&cov, l).unwrap().iter().all(|v| v.abs() < 1e-13));
        }
        assert!(matches!(reconstruct_cl_from_pairs(&cov, 5), Err(Error::Config(_))));
    }

    #[test]
    fn legendre_round_trip() {
        let lg = LegendreGrid::for_lmax(6);
        let c = [0.3, -1.2, 0.5, 2.0, 0.0, 0.7, -0.1];
        let samples = legendre_expand(&c, &lg).unwrap();
        let cov = AnglePairCovariance {
            axis: vec![0.0],
            angles: lg.angles(),
            weights: lg.rule.weights.clone(),
            values: samples.iter().map(|&v| vec![v]).collect(),
            pairs_per_angle: 1,
        };
        for (l, &cl) in c.iter().enumerate() {
            assert!((reconstruct_cl_from_pairs(&cov, l).unwrap()[0] - cl).abs() < 1e-8);
        }
    }

    fn record(l: usize, m: i64, spectrum: Vec<f64>) -> CorrelationRecord {
        CorrelationRecord {
            l,
            m,
            provenance: Provenance::Statistical,
            record_length: 1.0,
            realizations: 0,
            lags: vec![0.0],
            values: vec![spectrum.iter().sum()],
            omegas: (0..spectrum.len()).map(|k| k as f64).collect(),
            spectrum,
        }
    }

    #[test]
    fn angular_weights_scale_records() {
        let recs: Vec<CorrelationRecord> =
            ModeIndex::all(2).map(|k| record(k.l, k.m, vec![1.0, 3.0, 2.0 + k.l as f64])).collect();
        let ones = AngularDensity::Uniform.weights(2).unwrap();
        let out = apply_angular_weights(&recs, &ones).unwrap();
        for (a, b) in out.weighted.iter().zip(&recs) {
            assert!(a.spectrum.iter().zip(&b.spectrum).all(|(x, y)| (x - y).abs() < 1e-12));
        }
        let twos = AngularDensity::Constant { value: 2.0 }.weights(2).unwrap();
        let out = apply_angular_weights(&recs, &twos).unwrap();
        assert!(out.weighted.iter().zip(&recs).all(|(a, b)| (a.spectrum[1] - 2.0 * b.spectrum[1]).abs() < 1e-12));
        assert_eq!(out.summed.len(), 3);
        assert!((out.summed[2].spectrum[1] - 2.0 * 5.0 * 3.0).abs() < 1e-11);
        let neg = CoefficientTable { l_max: 2, values: vec![-1.0; 9] };
        assert!(matches!(apply_angular_weights(&recs, &neg), Err(Error::Domain(_))));
    }

    fn layered(eps: f64) -> Medium {
        Medium::new(MediumSpec::homogeneous(1.0, eps, 0.5).with_fluctuation(FluctuationSpec::Layered {
            layers: vec![FluctuationLayer { r_lo: 0.4, r_hi: 0.55, amplitude: 0.3 }],
        }))
        .unwrap()
    }

    fn profile() -> Vec<AngularTerm> {
        vec![
            AngularTerm { l: 1, m: 0, amplitude: 0.6 },
            AngularTerm { l: 2, m: 0, amplitude: 1.0 },
            AngularTerm { l: 2, m: 1, amplitude: -0.4 },
        ]
    }

    #[test]
    fn coupling_matrix_is_hermitian_and_selects_m() {
        let modes: Vec<ModeIndex> = ModeIndex::all(2).collect();
        let m = coupling_matrix(&modes, &[AngularTerm { l: 0, m: 0, amplitude: (4.0 * PI).sqrt() }], 2).unwrap();
        assert!((m.clone() - DMatrix::identity(9, 9)).norm() < 1e-12);
        let m = coupling_matrix(&modes, &profile(), 2).unwrap();
        assert!((m.adjoint() - &m).norm() < 1e-12);
        // Y_20 alone couples only equal m
        let m = coupling_matrix(&modes, &[AngularTerm { l: 2, m: 0, amplitude: 1.0 }], 2).unwrap();
        for (i, a) in modes.iter().enumerate() {
            for (j, b) in modes.iter().enumerate() {
                if a.m != b.m {
                    assert!(m[(i, j)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unperturbed_system_decouples() {
        let medium = layered(0.02);
        for &w in &[0.9, 1.37] {
            let s = coupled_mode_integrate(&medium, &AngularPerturbation::none(2), w, &tight()).unwrap();
            for (i, k) in s.modes.iter().enumerate() {
                let r = reflection_fundamental(&medium, w, k.l, &tight()).unwrap();
                assert!((s.reflection[(i, i)] - r).norm() < 1e-10, "{} vs {r}", s.reflection[(i, i)]);
                for j in 0..s.modes.len() {
                    if j != i {
                        assert!(s.reflection[(i, j)].norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn coupled_system_conserves_energy() {
        let medium = layered(0.02);
        let p = AngularPerturbation {
            a: 1.0,
            b: 1.5,
            c: 0.5,
            slow: Some(SlowComponent { r_lo: 0.3, r_hi: 0.9, angular: profile() }),
            fast: Some(FastComponent { r_lo: 0.5, r_hi: 0.7, period: 1.3, mean: 0.2, angular: profile() }),
            mixing: Some(MixingComponent {
                r_lo: 0.6,
                r_hi: 0.8,
                correlation_length: 1.0,
                seed: 4,
                angular: profile(),
            }),
            l_max: 2,
        };
        let s = coupled_mode_integrate(&medium, &p, 1.1, &PropagatorOptions::default()).unwrap();
        assert!(s.energy_residual < 1e-7, "{}", s.energy_residual);
        let u = &s.reflection;
        assert!((u.adjoint() * u - DMatrix::identity(9, 9)).norm() < 1e-7);
        let bare =
            coupled_mode_integrate(&medium, &AngularPerturbation::none(2), 1.1, &PropagatorOptions::default()).unwrap();
        assert!(s.deviation(&bare) > 1e-3);
    }

    #[test]
    fn mixing_realization_is_centered() {
        let x = MixingComponent { r_lo: 0.3, r_hi: 0.9, correlation_length: 1.0, seed: 11, angular: profile() };
        let (edges, values) = x.realization(0.02);
        assert_eq!(edges.len(), values.len() + 1);
        assert!(values.iter().sum::<f64>().abs() < 1e-10);
        let var = values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64;
        assert!((var - 1.0).abs() < 0.2, "{var}");
    }

    #[test]
    fn truncation_must_cover_profile() {
        let medium = layered(0.02);
        let p = AngularPerturbation {
            a: 1.5,
            slow: Some(SlowComponent {
                r_lo: 0.3,
                r_hi: 0.9,
                angular: vec![AngularTerm { l: 3, m: 0, amplitude: 1.0 }],
            }),
            ..AngularPerturbation::none(2)
        };
        assert!(matches!(coupled_mode_integrate(&medium, &p, 1.0, &tight()), Err(Error::Config(_))));
    }

    #[test]
    fn measurement_noise_basics() {
        let grid = SynthesisGrid::covering(0.02, 10.0, 3.0).unwrap();
        let mut s = vec![vec![1.0; grid.samples]; 3];
        inject_measurement_noise(&mut s, &grid, &Spectrum::Zero, 1, 0).unwrap();
        assert!(s.iter().all(|v| v.iter().all(|&x| x == 1.0)));
        assert!(matches!(noise_floor(0, &Spectrum::Zero, &grid, 3), Err(Error::Domain(_))));
        assert!(inject_measurement_noise(&mut [], &grid, &Spectrum::gaussian(2.0, 0.2, 1.0), 1, 0).is_err());
        let f = Spectrum::gaussian(2.0, 0.2, 1.0);
        let a = noise_floor(10, &f, &grid, 4).unwrap();
        let b = noise_floor(20, &f, &grid, 4).unwrap();
        assert!((a[0] / b[0] - 2.0).abs() < 1e-12);
        // lag-0 floor is (4 pi / N) * (1/pi) int F^ dw
        let exact = 4.0 * PI / 10.0 * 0.2 * (2.0 * PI).sqrt() / PI;
        assert!((a[0] - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn fibonacci_receivers_integrate_low_harmonics() {
        let rx = fibonacci_receivers(400);
        let w = 4.0 * PI / 400.0;
        let s: f64 = rx.iter().map(|&(t, p)| w * real_spherical_harmonic(2, 1, t, p).unwrap().powi(2)).sum();
        assert!((s - 1.0).abs() < 0.02, "{s}");
    }

    #[test]
    fn rotation_places_partners_at_requested_angle() {
        for &(t, p, o, az) in &[(0.3, 1.0, 0.7, 2.0), (2.9, 5.0, 2.5, 0.1), (0.0, 0.0, 1.0, 0.5)] {
            let (t2, p2) = rotate_from(t, p, o, az);
            let c = t.cos() * t2.cos() + t.sin() * t2.sin() * (p - p2).cos();
            assert!((c - o.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn aperture_pipeline_small() {
        let medium = Medium::new(MediumSpec::homogeneous(1.0, 0.02, 0.4)).unwrap();
        let noise = NoiseSourceModel {
            radial: RadialDensity::thin_annulus(&medium, 0.001, 1.0),
            spectrum: Spectrum::gaussian(1.0, 0.1, 1.0),
            angular: AngularDensity::Uniform,
        };
        let grid = SynthesisGrid::covering(0.02, 20.0, 1.7).unwrap();
        let rep =
            aperture_reconstruction(&medium, &noise, grid, 3, 1, 3, 4, 8, 5, &DaylightOptions::default()).unwrap();
        assert!(aperture_reconstruction(&medium, &noise, grid, 3, 1, 2, 4, 8, 5, &DaylightOptions::default()).is_err());
        assert_eq!(rep.receivers, 4 * (1 + 3));
        assert_eq!(rep.direct.len(), 2);
        assert!(rep.reconstructed[0].iter().any(|v| *v > 0.0));
    }
}
