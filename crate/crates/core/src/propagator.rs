//! The 2x2 symplectic mode propagator (a, b) of the leading-order WKB
//! amplitude system
//!
//!   d/dr (a, b) = i (w / 2 eps) c_o V [[-1, -e^{-i theta}], [e^{i theta}, 1]] (a, b),
//!   theta(r) = 2 w tau(r, R_o) / eps,
//!
//! with a = 1, b = 0 at the lower radius. The system does not involve l, so
//! one propagator serves every angular mode.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_adaptive, AdaptiveOptions};
use crate::medium::Medium;

/// Drift in |a|^2 - |b|^2 beyond which integration is repeated with
/// tighter tolerances, and after the retry, rejected.
pub const CONSERVATION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Steps never exceed this fraction of pi eps / (w max 1/c_o).
    pub phase_fraction: f64,
    pub max_steps: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, phase_fraction: 0.25, max_steps: 20_000_000 }
    }
}

impl PropagatorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Config("integrator tolerances must be positive".into()));
        }
        if !(self.phase_fraction > 0.0 && self.phase_fraction <= 1.0) {
            return Err(Error::Config(format!("phase_fraction must lie in (0, 1], got {}", self.phase_fraction)));
        }
        Ok(())
    }

    fn tightened(&self) -> Self {
        Self { rtol: self.rtol / 100.0, atol: self.atol / 100.0, ..*self }
    }
}

/// P(w, r_from, r_to) = [[a, conj b], [b, conj a]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePropagator {
    pub a: Complex64,
    pub b: Complex64,
    pub omega: f64,
    pub r_from: f64,
    pub r_to: f64,
    /// Largest | |a|^2 - |b|^2 - 1 | seen at any accepted step.
    pub max_residual: f64,
}

impl ModePropagator {
    pub fn identity(omega: f64, r: f64) -> Self {
        Self { a: Complex64::new(1.0, 0.0), b: Complex64::new(0.0, 0.0), omega, r_from: r, r_to: r, max_residual: 0.0 }
    }

    pub fn conservation_residual(&self) -> f64 {
        (self.a.norm_sqr() - self.b.norm_sqr() - 1.0).abs()
    }

    /// Propagator over [self.r_from, upper.r_to] = upper * self.
    pub fn compose(&self, upper: &ModePropagator) -> Result<ModePropagator> {
        let tol = 1e-12 * self.r_to.abs().max(1.0);
        if (self.r_to - upper.r_from).abs() > tol {
            return Err(Error::Contract(format!(
                "cannot compose propagators over [{}, {}] and [{}, {}]",
                self.r_from, self.r_to, upper.r_from, upper.r_to
            )));
        }
        if self.omega != upper.omega {
            return Err(Error::Contract(format!(
                "cannot compose propagators at w = {} and w = {}",
                self.omega, upper.omega
            )));
        }
        Ok(ModePropagator {
            a: upper.a * self.a + upper.b.conj() * self.b,
            b: upper.b * self.a + upper.a.conj() * self.b,
            omega: self.omega,
            r_from: self.r_from,
            r_to: upper.r_to,
            max_residual: self.max_residual.max(upper.max_residual),
        })
    }

    /// The propagator from r_to back to r_from (unit determinant inverse).
    pub fn inverse(&self) -> ModePropagator {
        ModePropagator {
            a: self.a.conj(),
            b: -self.b,
            omega: self.omega,
            r_from: self.r_to,
            r_to: self.r_from,
            max_residual: self.max_residual,
        }
    }

    /// Propagator over [mid, self.r_to] given `lower` over [self.r_from, mid].
    pub fn upper_part(&self, lower: &ModePropagator) -> Result<ModePropagator> {
        if lower.r_from != self.r_from {
            return Err(Error::Contract(format!(
                "lower propagator starts at {} instead of {}",
                lower.r_from, self.r_from
            )));
        }
        let mut p = lower.inverse().compose(self)?;
        p.max_residual = p.max_residual.max(p.conservation_residual());
        Ok(p)
    }
}

fn check_request(medium: &Medium, omega: f64, r_from: f64, r_to: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("frequency must be positive, got {omega}")));
    }
    if !(0.0 <= r_from && r_from <= r_to && r_to <= medium.radius()) {
        return Err(Error::Domain(format!(
            "propagator needs 0 <= r_from <= r_to <= {}, got [{r_from}, {r_to}]",
            medium.radius()
        )));
    }
    Ok(())
}

/// P(w, r_from, r_to).
pub fn integrate_propagator(
    medium: &Medium,
    omega: f64,
    r_from: f64,
    r_to: f64,
    opts: &PropagatorOptions,
) -> Result<ModePropagator> {
    Ok(propagate_through(medium, omega, r_from, &[r_to], opts)?[0])
}

/// P(w, r_from, s) for each stop s (ascending), in a single sweep.
pub fn propagate_through(
    medium: &Medium,
    omega: f64,
    r_from: f64,
    stops: &[f64],
    opts: &PropagatorOptions,
) -> Result<Vec<ModePropagator>> {
    opts.validate()?;
    if stops.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("propagator stops must be ascending".into()));
    }
    let Some(&last) = stops.last() else {
        return Ok(Vec::new());
    };
    check_request(medium, omega, r_from, stops[0])?;
    check_request(medium, omega, r_from, last)?;
    let first = sweep(medium, omega, r_from, stops, opts)?;
    if worst(&first) <= CONSERVATION_LIMIT {
        return Ok(first);
    }
    let retry = sweep(medium, omega, r_from, stops, &opts.tightened())?;
    let residual = worst(&retry);
    if residual > CONSERVATION_LIMIT {
        return Err(Error::Conservation { residual, limit: CONSERVATION_LIMIT });
    }
    Ok(retry)
}

fn worst(ps: &[ModePropagator]) -> f64 {
    ps.iter().map(|p| p.max_residual).fold(0.0, f64::max)
}

fn sweep(
    medium: &Medium,
    omega: f64,
    r_from: f64,
    stops: &[f64],
    opts: &PropagatorOptions,
) -> Result<Vec<ModePropagator>> {
    let eps = medium.epsilon();
    let last = stops[stops.len() - 1];
    let mut y = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let mut max_residual: f64 = 0.0;
    let mut out = Vec::with_capacity(stops.len());
    let mut next = 0;
    let mut emit = |r: f64, y: &[Complex64; 2], max_residual: f64, out: &mut Vec<ModePropagator>| {
        while next < stops.len() && stops[next] <= r {
            out.push(ModePropagator { a: y[0], b: y[1], omega, r_from, r_to: stops[next], max_residual });
            next += 1;
        }
    };
    emit(r_from, &y, 0.0, &mut out);
    // Stops become segment edges so states are read exactly there.
    let mut segments = medium.segments(r_from, last);
    for &s in stops {
        if let Some(i) = segments.iter().position(|g| g.r0 < s && s < g.r1) {
            let mut upper = segments[i];
            upper.r0 = s;
            segments[i].r1 = s;
            segments.insert(i + 1, upper);
        }
    }
    for seg in segments {
        if seg.v != 0.0 {
            let h_max = opts.phase_fraction * std::f64::consts::PI * eps / (omega * seg.max_slowness);
            let adaptive = AdaptiveOptions { rtol: opts.rtol, atol: opts.atol, h_max, max_steps: opts.max_steps };
            let v = seg.v;
            let mid = 0.5 * (seg.r0 + seg.r1);
            let rhs = |r: f64, y: &[Complex64], dy: &mut [Complex64]| {
                let q = 0.5 * omega / eps * medium.speed_beside(r, mid) * v;
                let theta = 2.0 * omega * medium.tau_to_surface(r) / eps;
                let e = Complex64::from_polar(1.0, theta);
                let iq = Complex64::new(0.0, q);
                dy[0] = -iq * (y[0] + e.conj() * y[1]);
                dy[1] = iq * (e * y[0] + y[1]);
            };
            integrate_adaptive(rhs, seg.r0, seg.r1, &mut y, &adaptive, |_, y| {
                let res = (y[0].norm_sqr() - y[1].norm_sqr() - 1.0).abs();
                max_residual = max_residual.max(res);
            })?;
        }
        emit(seg.r1, &y, max_residual, &mut out);
    }
    emit(f64::INFINITY, &y, max_residual, &mut out);
    Ok(out)
}
