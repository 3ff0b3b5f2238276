//! Reference solutions of the exact radial mode equation
//!
//!   (r^2 p')' - l(l+1) p + k^2 r^2 (1/c_o^2 + V) p = F delta(r - R_s),  k = w / eps,
//!
//! with the regular (spherical Bessel) solution in the homogeneous core and
//! the dissipative surface condition p' - p / R_o = i kappa k p. No WKB
//! ingredient is used anywhere in this module.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::integrate_fixed;
use crate::medium::{Medium, MediumSpec};
use crate::propagator::PropagatorOptions;
use crate::scattering::{response_from_state, FrequencyState};

/// (j_l(x), j_l'(x)).
///
/// Upward recurrence from j_0, j_1 when x > l (stable there), Miller's
/// downward recurrence normalized by j_0 otherwise, power series for tiny x.
pub fn spherical_bessel_j(l: usize, x: f64) -> (f64, f64) {
    if x.abs() < 1e-3 {
        // j_l(x) = x^l / (2l+1)!! (1 - x^2 / (2(2l+3)) + ...)
        let dfact: f64 = (0..=l).map(|k| (2 * k + 1) as f64).product();
        let lf = l as f64;
        let x2 = x * x;
        let s = 1.0 - x2 / (2.0 * (2.0 * lf + 3.0)) + x2 * x2 / (8.0 * (2.0 * lf + 3.0) * (2.0 * lf + 5.0));
        let ds = -x / (2.0 * lf + 3.0) + x2 * x / (2.0 * (2.0 * lf + 3.0) * (2.0 * lf + 5.0));
        let xl = x.powi(l as i32);
        let dxl = if l == 0 { 0.0 } else { lf * x.powi(l as i32 - 1) };
        return ((xl * s) / dfact, (dxl * s + xl * ds) / dfact);
    }
    let j0 = x.sin() / x;
    if l == 0 {
        return (j0, (x.cos() - j0) / x);
    }
    let values = if x > l as f64 {
        let mut v = Vec::with_capacity(l + 1);
        v.push(j0);
        v.push(x.sin() / (x * x) - x.cos() / x);
        for n in 1..l {
            let next = (2 * n + 1) as f64 / x * v[n] - v[n - 1];
            v.push(next);
        }
        v
    } else {
        let start = l + 20 + (x.abs().sqrt() * 10.0) as usize;
        let mut v = vec![0.0; start + 2];
        v[start + 1] = 0.0;
        v[start] = 1e-300;
        for n in (1..=start).rev() {
            v[n - 1] = (2 * n + 1) as f64 / x * v[n] - v[n + 1];
            if v[n - 1].abs() > 1e250 {
                for w in v.iter_mut().skip(n - 1) {
                    *w *= 1e-250;
                }
            }
        }
        let scale = j0 / v[0];
        v.truncate(l + 1);
        v.iter_mut().for_each(|w| *w *= scale);
        v
    };
    let jl = values[l];
    (jl, values[l - 1] - (l + 1) as f64 / x * jl)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleOptions {
    /// Fixed fifth-order steps per local wavelength 2 pi c / k.
    pub points_per_wavelength: f64,
    /// Relative change tolerated when the grid is halved.
    pub richardson_tolerance: f64,
    /// Two-point solves with a larger condition estimate are rejected.
    pub max_condition: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { points_per_wavelength: 400.0, richardson_tolerance: 1e-8, max_condition: 1e12 }
    }
}

/// Regular solution u with u(r_core) = j_l(k r_core / c), reported as
/// (u, u') at each ascending stop.
pub fn regular_solution(
    medium: &Medium,
    omega: f64,
    l: usize,
    stops: &[f64],
    opts: &OracleOptions,
) -> Result<Vec<(f64, f64)>> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {omega}")));
    }
    if !(opts.points_per_wavelength >= 20.0) {
        return Err(Error::Config(format!(
            "oracle needs >= 20 points per wavelength, got {}",
            opts.points_per_wavelength
        )));
    }
    let r0 = medium.r_core();
    if stops.iter().any(|&s| s < r0 || s > medium.radius()) || stops.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain(format!("oracle stops must be ascending inside [{r0}, {}]", medium.radius())));
    }
    let k = omega / medium.epsilon();
    let c_core = medium.speed(0.0);
    let (j, dj) = spherical_bessel_j(l, k * r0 / c_core);
    let ll = (l * (l + 1)) as f64;
    let mut y = [j, r0 * r0 * (k / c_core) * dj];
    let mut out = Vec::with_capacity(stops.len());
    let mut next = 0;
    let mut emit = |r: f64, y: &[f64; 2], out: &mut Vec<(f64, f64)>| {
        while next < stops.len() && stops[next] <= r {
            out.push((y[0], y[1] / (r * r)));
            next += 1;
        }
    };
    emit(r0, &y, &mut out);
    let Some(&last) = stops.last() else {
        return Ok(out);
    };
    let mut edges = vec![r0];
    edges.extend(medium.breakpoints(r0, last));
    edges.extend(stops.iter().copied().filter(|&s| s > r0));
    edges.push(last);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let v = medium.slowness_perturbation(mid);
        let slow2 =
            medium.segments(a, b).iter().map(|s| s.max_slowness * s.max_slowness + v.max(0.0)).fold(0.0, f64::max);
        let wavelength = 2.0 * std::f64::consts::PI / (k * slow2.sqrt());
        let steps = ((b - a) * opts.points_per_wavelength / wavelength).ceil().max(1.0) as usize;
        let rhs = |r: f64, y: &[f64], dy: &mut [f64]| {
            let c = medium.speed_beside(r, mid);
            dy[0] = y[1] / (r * r);
            dy[1] = (ll - k * k * r * r * (1.0 / (c * c) + v)) * y[0];
        };
        integrate_fixed(rhs, a, b, steps, &mut y);
        emit(b, &y, &mut out);
    }
    Ok(out)
}

fn oracle_at(medium: &Medium, r_s: f64, omega: f64, l: usize, opts: &OracleOptions) -> Result<Complex64> {
    let ro = medium.radius();
    let sol = if r_s < ro {
        regular_solution(medium, omega, l, &[r_s, ro], opts)?
    } else {
        regular_solution(medium, omega, l, &[ro], opts)?
    };
    let (us, _) = sol[0];
    let (u, du) = sol[sol.len() - 1];
    let k = omega / medium.epsilon();
    let imp = Complex64::new(1.0 / ro, medium.kappa() * k);
    // r^2 times the Wronskian of u and the surface-matched solution
    let w = ro * ro * (imp * u - du);
    let scale = ro * ro * (imp.norm() * u.abs() + du.abs());
    let condition = scale / w.norm();
    if !(condition <= opts.max_condition) {
        return Err(Error::Consistency(format!(
            "ill-conditioned two-point solve at w = {omega}, l = {l}: condition estimate {condition:.3e}"
        )));
    }
    Ok(Complex64::new(us, 0.0) / w)
}

/// Exact surface value p_l(w, R_o) per unit F for a source at R_s
/// (R_s = R_o means just below the surface), with a grid-halving check.
pub fn direct_surface_response(
    medium: &Medium,
    r_s: f64,
    omega: f64,
    l: usize,
    opts: &OracleOptions,
) -> Result<Complex64> {
    if !(r_s > medium.r_core() && r_s <= medium.radius()) {
        return Err(Error::Domain(format!("source radius must lie in (r_core, R_o], got {r_s}")));
    }
    let coarse = oracle_at(medium, r_s, omega, l, opts)?;
    let fine_opts = OracleOptions { points_per_wavelength: 2.0 * opts.points_per_wavelength, ..*opts };
    let fine = oracle_at(medium, r_s, omega, l, &fine_opts)?;
    let change = (fine - coarse).norm() / fine.norm();
    if change > opts.richardson_tolerance {
        return Err(Error::Consistency(format!(
            "oracle not converged at w = {omega}, l = {l}: grid halving changed the response by {change:.3e}"
        )));
    }
    Ok(fine)
}

/// Residuals of the two boundary conditions for the assembled solution
/// (center: proportional to j_l; surface: dissipative condition).
pub fn boundary_residuals(medium: &Medium, omega: f64, l: usize, opts: &OracleOptions) -> Result<(f64, f64)> {
    let k = omega / medium.epsilon();
    let r0 = medium.r_core();
    let ro = medium.radius();
    let c = medium.speed(0.0);
    let sol = regular_solution(medium, omega, l, &[r0, ro], opts)?;
    let (u0, du0) = sol[0];
    let (j, dj) = spherical_bessel_j(l, k * r0 / c);
    let center =
        (j * du0 - (k / c) * dj * u0).abs() / (j.abs() * du0.abs() + (k / c) * dj.abs() * u0.abs()).max(1e-300);
    // Field above the source at R_o^-: p = u(R_o) C with C from the jump.
    let p = oracle_at(medium, ro, omega, l, opts)?;
    let (u, du) = sol[1];
    let c_lower = p / u;
    let dp_above = c_lower * du + 1.0 / (ro * ro);
    let imp = Complex64::new(1.0 / ro, medium.kappa() * k);
    let surface = (dp_above - imp * p).norm() / (dp_above.norm() + (imp * p).norm());
    Ok((center, surface))
}

/// Maps an exact surface response to the equivalent reflection function:
/// X = p / (-(i eps c / (w R^2)) (1 + Gamma)/2) = (1 + R)/(1 - Gamma R).
pub fn oracle_reflection(medium: &Medium, omega: f64, l: usize, opts: &OracleOptions) -> Result<Complex64> {
    let p = direct_surface_response(medium, medium.radius(), omega, l, opts)?;
    let ro = medium.radius();
    let g = medium.gamma_surface();
    let pref = Complex64::new(0.0, -medium.epsilon() * medium.surface_speed() / (omega * ro * ro)) * (0.5 * (1.0 + g));
    let x = p / pref;
    Ok((x - 1.0) / (1.0 + g * x))
}

/// Lossless eigenfrequencies in [lo, hi]: roots of u'(R_o) - u(R_o)/R_o.
pub fn direct_eigenfrequencies(medium: &Medium, l: usize, lo: f64, hi: f64, opts: &OracleOptions) -> Result<Vec<f64>> {
    if medium.kappa() != 0.0 {
        return Err(Error::Precondition("eigenfrequencies are defined for the lossless surface (kappa = 0)".into()));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("invalid frequency window [{lo}, {hi}]")));
    }
    let ro = medium.radius();
    let det = |w: f64| -> Result<f64> {
        let (u, du) = regular_solution(medium, w, l, &[ro], opts)?[0];
        // scale-free: divide by the local amplitude
        let k = w / medium.epsilon();
        Ok((du - u / ro) / (u * u * k * k + du * du).sqrt())
    };
    let step = std::f64::consts::PI * medium.epsilon() / (8.0 * medium.total_travel_time());
    let n = ((hi - lo) / step).ceil() as usize;
    let samples: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let w = (lo + i as f64 * step).min(hi);
            det(w).map(|d| (w, d))
        })
        .collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for pair in samples.windows(2) {
        let ((mut a, mut fa), (mut b, fb)) = (pair[0], pair[1]);
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb > 0.0 || b <= a {
            continue;
        }
        while b - a > 1e-10 {
            let m = 0.5 * (a + b);
            let fm = det(m)?;
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        roots.push(0.5 * (a + b));
    }
    if let Some(&(w, f)) = samples.last() {
        if f == 0.0 && roots.last() != Some(&w) {
            roots.push(w);
        }
    }
    Ok(roots)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkbErrorRow {
    pub epsilon: f64,
    pub omega: f64,
    pub l: usize,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WkbErrorReport {
    pub rows: Vec<WkbErrorRow>,
    /// (eps, sqrt(sum |wkb - exact|^2 / sum |exact|^2) over all (w, l) at that eps).
    pub aggregate: Vec<(f64, f64)>,
    /// Least-squares slope of the log aggregate error against log eps.
    pub fitted_order: f64,
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(p, q), &(x, y)| {
        let dx = x.ln() - mx;
        (p + dx * (y.ln() - my), q + dx * dx)
    });
    num / den
}

/// Relative error of the WKB surface response (source at R_o^-) against the
/// exact solve, over an eps ladder.
pub fn wkb_error_report(
    spec: &MediumSpec,
    omegas: &[f64],
    ls: &[usize],
    eps_ladder: &[f64],
    prop: &PropagatorOptions,
    opts: &OracleOptions,
) -> Result<WkbErrorReport> {
    let mut rows = Vec::new();
    let mut aggregate = Vec::new();
    for &eps in eps_ladder {
        let medium = Medium::new(MediumSpec { epsilon: eps, ..spec.clone() })?;
        let cells: Vec<(f64, usize)> = omegas.iter().flat_map(|&w| ls.iter().map(move |&l| (w, l))).collect();
        let rung: Vec<(WkbErrorRow, f64)> = cells
            .par_iter()
            .map(|&(omega, l)| {
                let st = FrequencyState::new(&medium, omega, prop)?;
                let wkb = response_from_state(&medium, &st, Complex64::new(1.0, 0.0), l)?;
                let exact = direct_surface_response(&medium, medium.radius(), omega, l, opts)?;
                let row = WkbErrorRow { epsilon: eps, omega, l, rel_error: (wkb - exact).norm() / exact.norm() };
                Ok((row, exact.norm()))
            })
            .collect::<Result<_>>()?;
        // relative L2 error over the whole (w, l) set; pointwise ratios blow up
        // near anti-resonances where the exact response vanishes
        let (num, den) = rung
            .iter()
            .fold((0.0, 0.0), |(n, d), (row, exact)| (n + (row.rel_error * exact).powi(2), d + exact * exact));
        aggregate.push((eps, (num / den).sqrt()));
        rows.extend(rung.into_iter().map(|(row, _)| row));
    }
    let fitted_order = if aggregate.len() >= 2 { loglog_slope(&aggregate) } else { f64::NAN };
    Ok(WkbErrorReport { rows, aggregate, fitted_order })
}
