//! Acceptance checks at desk scale. Each returns a pass/fail outcome with
//! the measured quantity; numerical failures count as failed checks.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::daylight::{
    daylight_identity_check, empirical_autocorrelation, statistical_autocorrelation, thin_annulus_autocorrelation,
    AngularDensity, CorrelationRecord, DaylightOptions, NoiseSourceModel, Provenance, RadialDensity, SourceKernel,
    SourceLayer, SynthesisGrid, TransferTable,
};
use crate::error::Result;
use crate::harmonics::ModeIndex;
use crate::medium::{FluctuationLayer, FluctuationSpec, Medium, MediumSpec, SmoothProfileSpec, SpeedLayer};
use crate::oracle::{direct_eigenfrequencies, loglog_slope, wkb_error_report, OracleOptions};
use crate::propagator::PropagatorOptions;
use crate::rng::counter_uniform;
use crate::robustness::{
    aperture_reconstruction, apply_angular_weights, measurement_noise_contamination, perturbation_scaling,
    AngularPerturbation, AngularTerm, MixingComponent, SlowComponent,
};
use crate::scattering::{eigenfrequency_scan, find_peaks, resonance_width_bound, FrequencyState, SourceTrace};
use crate::spectrum::{FrequencyGrid, Pulse, Spectrum};

pub const CRITERIA: [(u32, &str); 12] = [
    (1, "energy conservation"),
    (2, "unit-modulus reflection"),
    (3, "homogeneous spectrum"),
    (4, "wkb vs exact response"),
    (5, "closed-form correlation identity"),
    (6, "thin-annulus convergence"),
    (7, "daylight identity"),
    (8, "empirical variance decay"),
    (9, "partial-aperture peaks"),
    (10, "lateral source weighting"),
    (11, "angular perturbation scaling"),
    (12, "measurement-noise floor"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub requirement: String,
    /// Wall time; not serialized so reports stay byte-stable.
    #[serde(skip)]
    pub seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {:>2} ({}): {} | need {} [{:.1}s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.requirement,
            self.seconds
        )
    }
}

fn outcome(id: u32, passed: bool, measured: String, requirement: &str) -> CheckOutcome {
    CheckOutcome {
        id,
        name: CRITERIA[id as usize - 1].1.to_string(),
        passed,
        measured,
        requirement: requirement.to_string(),
        seconds: 0.0,
    }
}

/// Runs one criterion; errors become failed outcomes.
pub fn run_check(id: u32, seed: u64) -> CheckOutcome {
    let start = Instant::now();
    let result = match id {
        1 | 2 => conservation(seed).map(|(a, b)| if id == 1 { a } else { b }),
        3 => homogeneous_spectrum(),
        4 => wkb_order(),
        5 => closed_form_identity(),
        6 => thin_annulus(),
        7 => daylight_identity(),
        8 => variance_decay(seed),
        9 => aperture(seed),
        10 => source_weighting(),
        11 => perturbation(seed),
        12 => noise_floor(seed),
        _ => Ok(outcome(id.clamp(1, 12), false, format!("no criterion {id}"), "1..=12")),
    };
    let mut out = result.unwrap_or_else(|e| outcome(id, false, format!("error: {e}"), "completes without error"));
    out.seconds = start.elapsed().as_secs_f64();
    out
}

pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let both = {
        let start = Instant::now();
        let r = conservation(seed);
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok((a, b)) => [a, b].map(|mut o| {
                o.seconds = secs;
                o
            }),
            Err(e) => [1, 2].map(|id| outcome(id, false, format!("error: {e}"), "completes without error")),
        }
    };
    out.extend(both);
    out.extend((3..=12).map(|id| run_check(id, seed)));
    out
}

/// Random medium number `index`: cycles through every smooth-profile and
/// fluctuation kind.
pub fn random_medium(seed: u64, index: u64) -> MediumSpec {
    let u = |k: u64| counter_uniform(seed, &[index, k]);
    let eps = [0.02, 0.03, 0.05][(index / 9 % 3) as usize];
    let r_core = 0.15 + 0.1 * u(0);
    let c0 = 0.8 + 0.6 * u(1);
    let smooth = match (index / 3) % 3 {
        0 => SmoothProfileSpec::Constant { speed: c0 },
        1 => {
            let split = r_core + (0.9 - r_core) * (0.2 + 0.6 * u(2));
            SmoothProfileSpec::Layers {
                layers: vec![
                    SpeedLayer { r_lo: 0.0, r_hi: split, speed: c0 },
                    SpeedLayer { r_lo: split, r_hi: 1.0, speed: 0.7 + 0.6 * u(3) },
                ],
            }
        }
        _ => SmoothProfileSpec::Sampled {
            radii: vec![0.0, r_core, 0.6, 1.0],
            speeds: vec![c0, c0, 0.8 + 0.5 * u(4), 0.7 + 0.4 * u(5)],
        },
    };
    let fluctuation = match index % 3 {
        0 => FluctuationSpec::None,
        1 => {
            let n = 1 + (u(6) * 3.0) as usize;
            let width = (0.95 - r_core) / n as f64;
            FluctuationSpec::Layered {
                layers: (0..n)
                    .map(|i| {
                        let lo = r_core + width * (i as f64 + 0.2 * u(10 + i as u64));
                        FluctuationLayer { r_lo: lo, r_hi: lo + 0.6 * width, amplitude: 0.6 * u(20 + i as u64) - 0.3 }
                    })
                    .collect(),
            }
        }
        _ => FluctuationSpec::StationaryRandom {
            amplitude: 0.1 + 0.2 * u(7),
            correlation_length: 1.0 + 2.0 * u(8),
            r_lo: r_core + 0.05,
            r_hi: 0.95,
        },
    };
    MediumSpec { radius: 1.0, epsilon: eps, kappa: 2.0 * u(9), r_core, smooth, fluctuation, seed: seed ^ index }
}

fn conservation(seed: u64) -> Result<(CheckOutcome, CheckOutcome)> {
    let grid = FrequencyGrid::with_count(0.5, 2.5 / 199.0, 200)?;
    let opts = PropagatorOptions::default();
    let per: Vec<(f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let medium = Medium::new(random_medium(seed, i))?;
            let mut worst = (0.0f64, 0.0f64);
            for w in grid.values() {
                let st = FrequencyState::new(&medium, w, &opts)?;
                worst.0 = worst.0.max(st.total.conservation_residual()).max(st.total.max_residual);
                for l in [0, 1, 5] {
                    worst.1 = worst.1.max((st.reflection(&medium, l)?.norm() - 1.0).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let res = per.iter().map(|p| p.0).fold(0.0, f64::max);
    let unit = per.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok((
        outcome(1, res <= 1e-8, format!("max ||a|^2-|b|^2-1| = {res:.2e} over 100 media x 200 w"), "<= 1e-8"),
        outcome(2, unit <= 1e-8, format!("max ||R|-1| = {unit:.2e} over 100 media x 200 w, l in {{0,1,5}}"), "<= 1e-8"),
    ))
}

fn homogeneous_spectrum() -> Result<CheckOutcome> {
    let opts = PropagatorOptions::default();
    let eps = 0.01;
    let m = Medium::new(MediumSpec::homogeneous(1.0, eps, 0.02))?;
    let dw = resonance_width_bound(&m).unwrap_or(1e-3);
    let grid = FrequencyGrid::new(0.5, 0.5 + 12.0 * PI * eps, dw)?;
    let peaks = eigenfrequency_scan(&m, &grid, 1, &opts)?;
    let scan_gap =
        peaks.iter().map(|p| (p.omega - (p.omega / (PI * eps)).round() * PI * eps).abs()).fold(0.0, f64::max);
    let mut gaps = Vec::new();
    for &e in &[0.02, 0.01] {
        let lossless = Medium::new(MediumSpec::homogeneous(1.0, e, 0.0))?;
        let roots = direct_eigenfrequencies(&lossless, 1, 0.5, 0.5 + 6.0 * PI * e, &OracleOptions::default())?;
        let gap = roots.iter().map(|w| (w - (w / (PI * e)).round() * PI * e).abs()).fold(0.0, f64::max);
        gaps.push(gap);
    }
    let passed =
        peaks.len() >= 10 && scan_gap <= 0.5 * grid.d_omega && gaps[0] <= 0.05 * 0.02 * PI && gaps[1] <= 0.6 * gaps[0];
    Ok(outcome(
        3,
        passed,
        format!(
            "{} peaks, max offset {:.2} dw; exact-root gaps {:.2e} (eps .02), {:.2e} (eps .01), ratio {:.2}",
            peaks.len(),
            scan_gap / grid.d_omega,
            gaps[0],
            gaps[1],
            gaps[1] / gaps[0]
        ),
        ">= 10 peaks within dw/2; gap <= 0.05 pi eps, ratio <= 0.6",
    ))
}

fn wkb_media() -> Vec<MediumSpec> {
    let base = MediumSpec::homogeneous(1.0, 0.02, 0.5);
    vec![
        base.clone(),
        MediumSpec {
            smooth: SmoothProfileSpec::Sampled { radii: vec![0.0, 0.3, 1.0], speeds: vec![1.4, 1.4, 1.0] },
            r_core: 0.3,
            ..base.clone()
        },
        base.with_fluctuation(FluctuationSpec::Layered {
            layers: vec![FluctuationLayer { r_lo: 0.45, r_hi: 0.6, amplitude: 0.35 }],
        }),
    ]
}

fn wkb_order() -> Result<CheckOutcome> {
    let omegas: Vec<f64> = (0..20).map(|k| 1.0 + 0.05 * k as f64).collect();
    let orders: Vec<f64> = wkb_media()
        .iter()
        .map(|s| {
            Ok(wkb_error_report(
                s,
                &omegas,
                &[0, 1, 2],
                &[0.04, 0.02, 0.01],
                &PropagatorOptions::default(),
                &OracleOptions::default(),
            )?
            .fitted_order)
        })
        .collect::<Result<_>>()?;
    let worst = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(outcome(
        4,
        worst >= 0.7,
        format!(
            "fitted orders {:?} (3 media, 20 w, l <= 2)",
            orders.iter().map(|o| (o * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
        "every order >= 0.7",
    ))
}

fn layered(eps: f64, kappa: f64) -> Medium {
    Medium::new(MediumSpec::homogeneous(1.0, eps, kappa).with_fluctuation(FluctuationSpec::Layered {
        layers: vec![
            FluctuationLayer { r_lo: 0.35, r_hi: 0.5, amplitude: 0.3 },
            FluctuationLayer { r_lo: 0.62, r_hi: 0.66, amplitude: -0.3 },
        ],
    }))
    .expect("fixed medium is valid")
}

/// Integration tolerance used where algebraic identities are checked at
/// 1e-10: they hold exactly only for |a|^2 - |b|^2 = 1.
pub fn identity_options() -> DaylightOptions {
    DaylightOptions {
        propagator: PropagatorOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() },
        ..Default::default()
    }
}

fn closed_form_identity() -> Result<CheckOutcome> {
    let m = layered(0.02, 0.7);
    let noise = NoiseSourceModel {
        radial: RadialDensity::Bump { r_lo: 0.3, r_hi: 0.9, amplitude: 2.0 },
        spectrum: Spectrum::gaussian(1.0, 0.15, 1.0),
        angular: AngularDensity::Uniform,
    };
    let o = identity_options();
    let cells: Vec<(f64, usize)> = (0..10).flat_map(|k| (0..5).map(move |l| (0.6 + 0.1 * k as f64, l))).collect();
    let errs: Vec<f64> = cells
        .par_iter()
        .map(|&(w, l)| {
            let layer = SourceLayer::new(&m, &noise, w, &o)?;
            let kernel = SourceKernel::new(&m, &layer, w, &o.propagator)?;
            let a = kernel.statistical_unit(&m, &layer, l)?;
            let b = kernel.brute_force_unit(&m, &layer, l)?;
            Ok((a - b).abs() / a.abs())
        })
        .collect::<Result<_>>()?;
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Ok(outcome(5, worst <= 1e-10, format!("max relative difference {worst:.2e} over 10 w x l <= 4"), "<= 1e-10"))
}

/// Relative L2 gap between the full and thin-annulus correlations over the
/// noise band.
pub fn thin_annulus_gap(medium: &Medium, spectrum: &Spectrum, d: f64, l: usize, omegas: &[f64]) -> Result<f64> {
    let noise = NoiseSourceModel {
        radial: RadialDensity::thin_annulus(medium, d, 1.0),
        spectrum: spectrum.clone(),
        angular: AngularDensity::Uniform,
    };
    let o = DaylightOptions::default();
    let pairs: Vec<(f64, f64)> = omegas
        .par_iter()
        .map(|&w| {
            Ok((
                statistical_autocorrelation(medium, &noise, w, l, &o)?,
                thin_annulus_autocorrelation(medium, &noise, w, l, &o)?,
            ))
        })
        .collect::<Result<_>>()?;
    let num: f64 = pairs.iter().map(|(s, t)| (s - t).powi(2)).sum();
    let den: f64 = pairs.iter().map(|(_, t)| t * t).sum();
    Ok((num / den).sqrt())
}

fn thin_annulus() -> Result<CheckOutcome> {
    let spec = Spectrum::gaussian(1.2, 0.1, 1.0);
    let omegas: Vec<f64> = (0..=240).map(|k| 0.6 + 0.005 * k as f64).collect();
    let omega_max = 1.8;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut rows = Vec::new();
    for kappa in [0.4, 1.0] {
        let m = layered(0.02, kappa);
        let d = 0.1 * m.epsilon() * m.surface_speed() / omega_max;
        for l in [0, 3] {
            let g1 = thin_annulus_gap(&m, &spec, d, l, &omegas)?;
            let g2 = thin_annulus_gap(&m, &spec, 0.5 * d, l, &omegas)?;
            worst_ratio = worst_ratio.max((g2 / g1 - 0.5).abs());
            worst_gap = worst_gap.max(g1);
            rows.push(format!("{g1:.3}->{g2:.3}"));
        }
    }
    Ok(outcome(
        6,
        worst_gap <= 0.05 && worst_ratio <= 0.1,
        format!("band L2 gaps d -> d/2: {} (kappa .4, 1; l 0, 3)", rows.join(", ")),
        "gap(d) <= 0.05 with d = 0.1 eps c/w_max, gap(d/2)/gap(d) = 0.5 +- 0.1",
    ))
}

fn daylight_identity() -> Result<CheckOutcome> {
    let m = layered(0.02, 0.5);
    let spec = Spectrum::gaussian(1.0, 0.12, 1.0);
    let grid = SynthesisGrid::covering(0.02, 40.0, 1.8)?;
    let omega_max = 1.0 + 6.0 * 0.12;
    let d = 0.05 * m.epsilon() * m.surface_speed() / omega_max;
    let noise = NoiseSourceModel {
        radial: RadialDensity::thin_annulus(&m, d, 1.0),
        spectrum: spec.clone(),
        angular: AngularDensity::Uniform,
    };
    let src = SourceTrace::single_mode(Pulse::Spectral { spectrum: spec }, 0, 0)?;
    let reports = (0..=4)
        .map(|l| daylight_identity_check(&m, &noise, &src, l, grid, &DaylightOptions::default()))
        .collect::<Result<Vec<_>>>()?;
    let min_corr = reports.iter().map(|r| r.correlation).fold(1.0, f64::min);
    let consts: Vec<f64> = reports.iter().map(|r| r.fitted_constant).collect();
    let mean = consts.iter().sum::<f64>() / consts.len() as f64;
    let spread =
        (consts.iter().cloned().fold(f64::MIN, f64::max) - consts.iter().cloned().fold(f64::MAX, f64::min)) / mean;
    let predicted = reports[0].predicted_constant;
    Ok(outcome(
        7,
        min_corr >= 0.99 && spread <= 0.05,
        format!(
            "min correlation {min_corr:.5}, constant spread {:.2}% (fitted mean {mean:.4e}, predicted {predicted:.4e})",
            100.0 * spread
        ),
        "correlation >= 0.99, spread <= 5% over l = 0..4",
    ))
}

/// Variance of the lag-0 empirical correlation across realizations for
/// each window length; series span twice the window.
pub fn empirical_variance(
    medium: &Medium,
    noise: &NoiseSourceModel,
    l: usize,
    windows: &[f64],
    realizations: u64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let omega_max = noise.spectrum.band().map(|b| b.1).unwrap_or(1.0);
    windows
        .iter()
        .map(|&t| {
            let grid = SynthesisGrid::covering(medium.epsilon(), 2.0 * t, omega_max)?;
            let table = TransferTable::new(medium, noise, grid, l, &DaylightOptions::default())?;
            let c0: Vec<f64> = (0..realizations)
                .into_par_iter()
                .map(|r| Ok(empirical_autocorrelation(&table.synthesize(seed, r, 0), grid.dt(), t, 0)?[0]))
                .collect::<Result<_>>()?;
            let mean = c0.iter().sum::<f64>() / c0.len() as f64;
            let var = c0.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (c0.len() - 1) as f64;
            Ok((t, var))
        })
        .collect()
}

fn synthesis_noise(m: &Medium) -> NoiseSourceModel {
    NoiseSourceModel {
        radial: RadialDensity::thin_annulus(m, 0.002, 1.0),
        spectrum: Spectrum::gaussian(1.0, 0.1, 1.0),
        angular: AngularDensity::Uniform,
    }
}

fn variance_decay(seed: u64) -> Result<CheckOutcome> {
    let m = layered(0.02, 0.5);
    let rows = empirical_variance(&m, &synthesis_noise(&m), 1, &[20.0, 40.0, 80.0, 160.0], 100, seed)?;
    let slope = loglog_slope(&rows);
    Ok(outcome(
        8,
        (slope + 1.0).abs() <= 0.2,
        format!("slope {slope:.3} over T = 20..160, 100 realizations each"),
        "-1 +- 0.2",
    ))
}

fn aperture(seed: u64) -> Result<CheckOutcome> {
    let m = Medium::new(MediumSpec::homogeneous(1.0, 0.02, 0.4))?;
    let grid = SynthesisGrid::covering(0.02, 40.0, 1.7)?;
    let rep =
        aperture_reconstruction(&m, &synthesis_noise(&m), grid, 4, 4, 9, 6, 1000, seed, &DaylightOptions::default())?;
    let worst = rep.peak_mismatch.iter().cloned().fold(0.0, f64::max);
    Ok(outcome(
        9,
        worst <= rep.d_omega * (1.0 + 1e-9),
        format!(
            "{} receivers; worst peak offset {:.2} dw over l <= 4 (per l: {:?})",
            rep.receivers,
            worst / rep.d_omega,
            rep.peak_mismatch.iter().map(|x| (x / rep.d_omega).round() as i64).collect::<Vec<_>>()
        ),
        "<= dw",
    ))
}

fn source_weighting() -> Result<CheckOutcome> {
    let m = layered(0.02, 0.4);
    let noise = NoiseSourceModel {
        radial: RadialDensity::thin_annulus(&m, 0.002, 1.0),
        spectrum: Spectrum::gaussian(1.0, 0.1, 1.0),
        angular: AngularDensity::Uniform,
    };
    let dw = resonance_width_bound(&m).unwrap_or(1e-3);
    let grid = FrequencyGrid::new(0.6, 1.4, dw)?;
    let o = DaylightOptions::default();
    let l_max = 4;
    let spectra: Vec<Vec<f64>> = (0..=l_max)
        .map(|l| grid.values().par_iter().map(|&w| statistical_autocorrelation(&m, &noise, w, l, &o)).collect())
        .collect::<Result<_>>()?;
    let records: Vec<CorrelationRecord> = ModeIndex::all(l_max)
        .map(|k| CorrelationRecord {
            l: k.l,
            m: k.m,
            provenance: Provenance::Statistical,
            record_length: f64::INFINITY,
            realizations: 0,
            lags: Vec::new(),
            values: Vec::new(),
            omegas: grid.values(),
            spectrum: spectra[k.l].clone(),
        })
        .collect();
    let uniform = apply_angular_weights(&records, &AngularDensity::Uniform.weights(l_max)?)?;
    let g = AngularDensity::Hemisphere { upper: 1.0, lower: 0.25 }.weights(l_max)?;
    let hemi = apply_angular_weights(&records, &g)?;
    let mut worst_shift: f64 = 0.0;
    let mut worst_amp: f64 = 0.0;
    for (u, h) in uniform.summed.iter().zip(&hemi.summed) {
        let pu = find_peaks(&u.spectrum, &grid, u.l, false);
        let ph = find_peaks(&h.spectrum, &grid, h.l, false);
        if pu.len() != ph.len() {
            worst_shift = f64::INFINITY;
        }
        for (a, b) in pu.iter().zip(&ph) {
            worst_shift = worst_shift.max((a.omega - b.omega).abs());
        }
        let sum_g: f64 = (-(u.l as i64)..=u.l as i64).map(|mm| g.get(u.l, mm)).sum();
        for (a, b) in u.spectrum.iter().zip(&h.spectrum) {
            // uniform sum is (2l+1) C_l
            let expect = sum_g * a / (2 * u.l + 1) as f64;
            if expect != 0.0 {
                worst_amp = worst_amp.max((b - expect).abs() / expect.abs());
            }
        }
    }
    Ok(outcome(
        10,
        worst_shift <= grid.d_omega && worst_amp <= 1e-8,
        format!(
            "max peak shift {:.2} dw, max amplitude error {worst_amp:.2e} (hemispherical G, l <= 4)",
            worst_shift / grid.d_omega
        ),
        "shift <= dw, amplitude factor sum_m G_lm to 1e-8",
    ))
}

fn perturbation(seed: u64) -> Result<CheckOutcome> {
    let spec = MediumSpec::homogeneous(1.0, 0.02, 0.5).with_fluctuation(FluctuationSpec::Layered {
        layers: vec![FluctuationLayer { r_lo: 0.4, r_hi: 0.55, amplitude: 0.3 }],
    });
    let profile = vec![
        AngularTerm { l: 1, m: 0, amplitude: 0.6 },
        AngularTerm { l: 2, m: 0, amplitude: 1.0 },
        AngularTerm { l: 2, m: 1, amplitude: -0.4 },
    ];
    let omegas = [1.0, 1.3, 1.6];
    let ladder = [0.04, 0.02, 0.01];
    let opts = PropagatorOptions::default();
    let mut slopes = Vec::new();
    for a in [1.5, 2.0] {
        let p = AngularPerturbation {
            a,
            slow: Some(SlowComponent { r_lo: 0.3, r_hi: 0.9, angular: profile.clone() }),
            ..AngularPerturbation::none(2)
        };
        slopes.push(perturbation_scaling(&spec, &p, &omegas, &ladder, 1, &opts)?.slope);
    }
    let p = AngularPerturbation {
        c: 0.5,
        mixing: Some(MixingComponent { r_lo: 0.3, r_hi: 0.9, correlation_length: 1.0, seed, angular: profile }),
        ..AngularPerturbation::none(2)
    };
    let c_slope = perturbation_scaling(&spec, &p, &omegas, &ladder, 12, &opts)?.slope;
    Ok(outcome(
        11,
        (slopes[0] - 0.5).abs() <= 0.2 && (slopes[1] - 1.0).abs() <= 0.2 && c_slope > 0.0,
        format!("slopes a=1.5: {:.3}, a=2: {:.3}, c=0.5: {c_slope:.3} (12 mixing realizations)", slopes[0], slopes[1]),
        "a - 1 +- 0.2; c slope > 0",
    ))
}

fn noise_floor(seed: u64) -> Result<CheckOutcome> {
    let m = layered(0.02, 0.5);
    let signal = synthesis_noise(&m);
    let measurement = Spectrum::gaussian(3.0, 0.2, 1.0);
    let grid = SynthesisGrid::covering(0.02, 20.0, 3.0 + 6.0 * 0.2)?;
    let tables = (0..=2)
        .map(|l| TransferTable::new(&m, &signal, grid, l, &DaylightOptions::default()))
        .collect::<Result<Vec<_>>>()?;
    let a = measurement_noise_contamination(&tables, 100, 2, &measurement, 20, seed)?;
    let b = measurement_noise_contamination(&tables, 200, 2, &measurement, 20, seed)?;
    let ratio = a.measured / b.measured;
    Ok(outcome(
        12,
        (ratio - 2.0).abs() <= 0.4,
        format!(
            "contamination N=100: {:.4e} (predicted {:.4e}), N=200: {:.4e} (predicted {:.4e}); ratio {ratio:.3}",
            a.measured, a.predicted, b.measured, b.predicted
        ),
        "ratio 2 +- 20%",
    ))
}
