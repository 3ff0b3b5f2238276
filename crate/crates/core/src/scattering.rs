//! Surface reflection function, point-source responses and the scattering
//! operator |1 + R|^2 / |1 - Gamma R|^2.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{spherical_harmonic, CoefficientTable, ModeIndex};
use crate::medium::Medium;
use crate::propagator::{integrate_propagator, ModePropagator, PropagatorOptions};
use crate::spectrum::{FrequencyGrid, Pulse};

/// |1 - Gamma R| below this is treated as an exact resonance.
pub const RESONANCE_GUARD: f64 = 1e-10;

/// Center phase E_l = (-1)^{l+1} e^{2 i w tau(0, R_o) / eps}.
///
/// The sign comes from the large-argument form of j_l in the regular-center
/// condition; it makes odd-l eigenfrequencies n pi eps / tau and even-l ones
/// (n + 1/2) pi eps / tau.
pub fn center_phase(medium: &Medium, omega: f64, l: usize) -> Complex64 {
    let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
    Complex64::from_polar(sign, 2.0 * omega * medium.total_travel_time() / medium.epsilon())
}

/// Everything at one frequency that does not depend on the source: the
/// propagator through the whole shell [r_core, R_o].
#[derive(Debug, Clone, Copy)]
pub struct FrequencyState {
    pub omega: f64,
    pub total: ModePropagator,
    pub gamma: f64,
}

impl FrequencyState {
    pub fn new(medium: &Medium, omega: f64, opts: &PropagatorOptions) -> Result<Self> {
        let total = integrate_propagator(medium, omega, medium.r_core(), medium.radius(), opts)?;
        Ok(Self { omega, total, gamma: medium.gamma_surface() })
    }

    /// (a + conj(b) E, b + conj(a) E) for a propagator starting at r_core.
    fn center_pair(p: &ModePropagator, e: Complex64) -> (Complex64, Complex64) {
        (p.a + p.b.conj() * e, p.b + p.a.conj() * e)
    }

    /// R_l(w).
    pub fn reflection(&self, medium: &Medium, l: usize) -> Result<Complex64> {
        let e = center_phase(medium, self.omega, l);
        let (den, num) = Self::center_pair(&self.total, e);
        // |den| >= |a| - |b| > 0 whenever |a|^2 - |b|^2 = 1.
        if den.norm() < 1e-300 || !den.norm().is_finite() {
            return Err(Error::Consistency(format!("vanishing reflection denominator at w = {}", self.omega)));
        }
        Ok(num / den)
    }

    /// (S_l, T_l) for a source at the upper end of `lower` = P(r_core, R_s).
    pub fn source_factors(&self, medium: &Medium, lower: &ModePropagator, l: usize) -> (Complex64, Complex64) {
        let e = center_phase(medium, self.omega, l);
        let (den, _) = Self::center_pair(&self.total, e);
        let (s, t) = Self::center_pair(lower, e);
        (s / den, t / den)
    }

    /// 1 - Gamma R, guarded against exact resonance.
    pub fn resonance_denominator(&self, r: Complex64) -> Result<Complex64> {
        let d = 1.0 - self.gamma * r;
        if d.norm() < RESONANCE_GUARD {
            return Err(Error::NearResonance { omega: self.omega, denominator: d.norm() });
        }
        Ok(d)
    }
}

/// R_l(w) (unit modulus).
pub fn reflection_fundamental(medium: &Medium, omega: f64, l: usize, opts: &PropagatorOptions) -> Result<Complex64> {
    FrequencyState::new(medium, omega, opts)?.reflection(medium, l)
}

/// |1 + R|^2 / |1 - Gamma R|^2 without a resonance guard (may be +inf).
pub fn operator_value(gamma: f64, r: Complex64) -> f64 {
    let den = (1.0 - gamma * r).norm_sqr();
    let num = (1.0 + r).norm_sqr();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

pub fn scattering_operator(medium: &Medium, omega: f64, l: usize, opts: &PropagatorOptions) -> Result<f64> {
    let st = FrequencyState::new(medium, omega, opts)?;
    let r = st.reflection(medium, l)?;
    let d = st.resonance_denominator(r)?;
    Ok((1.0 + r).norm_sqr() / d.norm_sqr())
}

/// Deterministic source: pulse profile and angular coefficients g_{l,m};
/// F_{l,m}(w) = f^(w) g_{l,m}.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTrace {
    pub pulse: Pulse,
    pub angular: CoefficientTable<Complex64>,
}

impl SourceTrace {
    /// Source concentrated in a single mode (g_{l,m} = 1).
    pub fn single_mode(pulse: Pulse, l: usize, m: i64) -> Result<Self> {
        let mode = ModeIndex::new(l, m)?;
        let mut values = vec![Complex64::new(0.0, 0.0); (l + 1) * (l + 1)];
        values[mode.packed()] = Complex64::new(1.0, 0.0);
        Ok(Self { pulse, angular: CoefficientTable { l_max: l, values } })
    }

    /// Point source in angle: g_{l,m} = conj(Y_{l,m}(theta, phi)).
    pub fn point(pulse: Pulse, theta: f64, phi: f64, l_max: usize) -> Result<Self> {
        let values = ModeIndex::all(l_max)
            .map(|q| spherical_harmonic(q.l, q.m, theta, phi).map(|y| y.conj()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pulse, angular: CoefficientTable { l_max, values } })
    }

    pub fn angular_coefficient(&self, l: usize, m: i64) -> Complex64 {
        if l > self.angular.l_max || m.unsigned_abs() as usize > l {
            Complex64::new(0.0, 0.0)
        } else {
            self.angular.get(l, m)
        }
    }

    /// F_{l,m}(w).
    pub fn coefficient(&self, omega: f64, l: usize, m: i64) -> Complex64 {
        self.pulse.transform(omega) * self.angular_coefficient(l, m)
    }
}

/// -(i eps c_o(R_o) / (w R_o^2)).
fn response_prefactor(medium: &Medium, omega: f64) -> Complex64 {
    let r = medium.radius();
    Complex64::new(0.0, -medium.epsilon() * medium.surface_speed() / (omega * r * r))
}

/// p_{l,m}(w, R_o) for a source just below the surface.
pub fn point_source_response(
    medium: &Medium,
    source: &SourceTrace,
    omega: f64,
    l: usize,
    m: i64,
    opts: &PropagatorOptions,
) -> Result<Complex64> {
    let st = FrequencyState::new(medium, omega, opts)?;
    response_from_state(medium, &st, source.coefficient(omega, l, m), l)
}

/// Prop-1 response given a cached frequency state and F_{l,m}(w).
pub fn response_from_state(medium: &Medium, st: &FrequencyState, f_lm: Complex64, l: usize) -> Result<Complex64> {
    let r = st.reflection(medium, l)?;
    let d = st.resonance_denominator(r)?;
    Ok(response_prefactor(medium, st.omega) * f_lm * (0.5 * (1.0 + st.gamma)) * (1.0 + r) / d)
}

/// Transform at -w of the same response, i.e. the transform of p(-t):
/// R(-w) = conj R(w) and F(-w) = F(w) for even pulses.
fn reversed_response(medium: &Medium, st: &FrequencyState, f_lm: Complex64, l: usize) -> Result<Complex64> {
    let r = st.reflection(medium, l)?.conj();
    let d = 1.0 - st.gamma * r;
    Ok(-response_prefactor(medium, st.omega) * f_lm * (0.5 * (1.0 + st.gamma)) * (1.0 + r) / d)
}

/// Closed-form symmetrized response
/// -(i eps c / (2 w R^2)) F (1 - Gamma^2) |1 + R|^2 / |1 - Gamma R|^2.
pub fn symmetrized_response(
    medium: &Medium,
    source: &SourceTrace,
    omega: f64,
    l: usize,
    m: i64,
    opts: &PropagatorOptions,
) -> Result<Complex64> {
    if !source.pulse.is_even() {
        return Err(Error::Contract("symmetrization needs an even pulse (real transform)".into()));
    }
    let st = FrequencyState::new(medium, omega, opts)?;
    symmetrized_from_state(medium, &st, source.coefficient(omega, l, m), l)
}

pub fn symmetrized_from_state(medium: &Medium, st: &FrequencyState, f_lm: Complex64, l: usize) -> Result<Complex64> {
    let r = st.reflection(medium, l)?;
    let d = st.resonance_denominator(r)?;
    let g = st.gamma;
    Ok(response_prefactor(medium, st.omega) * f_lm * (0.5 * (1.0 - g * g)) * (1.0 + r).norm_sqr() / d.norm_sqr())
}

/// p(w) minus the transform of p(-t), assembled from the Prop-1 response.
pub fn symmetrized_by_reversal(medium: &Medium, st: &FrequencyState, f_lm: Complex64, l: usize) -> Result<Complex64> {
    Ok(response_from_state(medium, st, f_lm, l)? - reversed_response(medium, st, f_lm, l)?)
}

/// One row of a scattering spectrum table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub l: usize,
    pub omega: f64,
    pub reflection: Complex64,
    pub operator: f64,
    pub conservation_residual: f64,
}

/// R_l and the scattering operator for every (w, l); rows ordered by l then w.
pub fn scattering_spectrum(
    medium: &Medium,
    grid: &FrequencyGrid,
    ls: &[usize],
    opts: &PropagatorOptions,
) -> Result<Vec<SpectrumRow>> {
    let states: Vec<FrequencyState> =
        (0..grid.n).into_par_iter().map(|k| FrequencyState::new(medium, grid.omega(k), opts)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(states.len() * ls.len());
    for &l in ls {
        for st in &states {
            let r = st.reflection(medium, l)?;
            rows.push(SpectrumRow {
                l,
                omega: st.omega,
                reflection: r,
                operator: operator_value(st.gamma, r),
                conservation_residual: st.total.max_residual,
            });
        }
    }
    Ok(rows)
}

/// A resonance peak of the scattering operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub l: usize,
    pub omega: f64,
    pub value: f64,
    /// Full width at half maximum; None if a half-maximum crossing is not
    /// inside the grid.
    pub width: Option<f64>,
    /// Lossless surface: the true peak is a pole.
    pub divergent: bool,
}

/// Resolution needed to see individual peaks: half the predicted FWHM
/// eps (1 - Gamma) / (tau0 sqrt(Gamma)). None when there is no finite width.
pub fn resonance_width_bound(medium: &Medium) -> Option<f64> {
    let g = medium.gamma_surface();
    if g >= 1.0 || g <= 0.0 {
        return None;
    }
    Some(medium.epsilon() * (1.0 - g) / (2.0 * medium.total_travel_time() * g.sqrt()))
}

/// Local maxima of the scattering operator with sub-grid refinement.
pub fn eigenfrequency_scan(
    medium: &Medium,
    grid: &FrequencyGrid,
    l: usize,
    opts: &PropagatorOptions,
) -> Result<Vec<Peak>> {
    if grid.n == 0 {
        return Err(Error::Config("eigenfrequency scan needs a non-empty grid".into()));
    }
    let rows = scattering_spectrum(medium, grid, &[l], opts)?;
    let values: Vec<f64> = rows.iter().map(|r| r.operator).collect();
    Ok(find_peaks(&values, grid, l, medium.kappa() == 0.0))
}

/// Peak detection on sampled operator values.
pub fn find_peaks(values: &[f64], grid: &FrequencyGrid, l: usize, divergent: bool) -> Vec<Peak> {
    let n = values.len();
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
        if !(y1 > y0 && y1 >= y2) {
            continue;
        }
        let mut shift = 0.0;
        let mut value = y1;
        if y0 > 0.0 && y1.is_finite() && y2 > 0.0 {
            // parabola through log values: Lorentzian tops are nearly quadratic there
            let (l0, l1, l2) = (y0.ln(), y1.ln(), y2.ln());
            let curv = l0 - 2.0 * l1 + l2;
            if curv < 0.0 {
                shift = (0.5 * (l0 - l2) / curv).clamp(-0.5, 0.5);
                value = (l1 - 0.25 * (l0 - l2) * shift).exp();
            }
        }
        let half = 0.5 * value;
        let cross = |dir: isize| -> Option<f64> {
            let mut j = i as isize;
            loop {
                let k = j + dir;
                if k < 0 || k as usize >= n {
                    return None;
                }
                let (a, b) = (values[j as usize], values[k as usize]);
                if b <= half {
                    let t = if a.is_finite() { (a - half) / (a - b) } else { 0.0 };
                    return Some(grid.omega(j as usize) + dir as f64 * t * grid.d_omega);
                }
                j = k;
            }
        };
        let width = match (cross(-1), cross(1)) {
            (Some(lo), Some(hi)) => Some(hi - lo),
            _ => None,
        };
        peaks.push(Peak { l, omega: grid.omega(i) + shift * grid.d_omega, value, width, divergent });
    }
    peaks
}
