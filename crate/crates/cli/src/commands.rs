//! One experiment per subcommand; each writes its tables through `Output`.

use daylight_core::daylight::{
    daylight_identity_check, empirical_autocorrelation, periodogram, thin_annulus_autocorrelation, CorrelationRecord,
    NoiseSourceModel, Provenance, SourceKernel, SourceLayer, SynthesisGrid, TransferTable,
};
use daylight_core::oracle::wkb_error_report;
use daylight_core::robustness::{
    aperture_reconstruction, apply_angular_weights, measurement_noise_contamination, perturbation_scaling,
};
use daylight_core::scattering::{
    eigenfrequency_scan, find_peaks, resonance_width_bound, response_from_state, scattering_spectrum,
    symmetrized_from_state, FrequencyState,
};
use daylight_core::spectrum::FrequencyGrid;
use daylight_core::{Error, Result, SmoothProfileSpec};
use rayon::prelude::*;
use serde_json::json;
use std::f64::consts::PI;

use crate::config::Resolved;
use crate::output::{Cell, Output};
use Cell::{B, F, I, U};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Scatter,
    Respond,
    Correlate,
    Synthesize,
    Eigenfreqs,
    Robustness,
    Oracle,
    DaylightCheck,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Scatter => "scatter",
            Subcommand::Respond => "respond",
            Subcommand::Correlate => "correlate",
            Subcommand::Synthesize => "synthesize",
            Subcommand::Eigenfreqs => "eigenfreqs",
            Subcommand::Robustness => "robustness",
            Subcommand::Oracle => "oracle",
            Subcommand::DaylightCheck => "daylight-check",
        }
    }

    /// Acceptance criteria exercised by `--check`.
    pub fn criteria(self) -> &'static [u32] {
        match self {
            Subcommand::Scatter | Subcommand::Respond => &[1, 2],
            Subcommand::Eigenfreqs => &[3],
            Subcommand::Oracle => &[4],
            Subcommand::Correlate => &[5, 6],
            Subcommand::DaylightCheck => &[7],
            Subcommand::Synthesize => &[8],
            Subcommand::Robustness => &[9, 10, 11, 12],
        }
    }

    pub fn run(self, run: &Resolved, out: &Output) -> Result<()> {
        match self {
            Subcommand::Scatter => scatter(run, out),
            Subcommand::Respond => respond(run, out),
            Subcommand::Correlate => correlate(run, out),
            Subcommand::Synthesize => synthesize(run, out),
            Subcommand::Eigenfreqs => eigenfreqs(run, out),
            Subcommand::Robustness => robustness(run, out),
            Subcommand::Oracle => oracle(run, out),
            Subcommand::DaylightCheck => daylight_check(run, out),
        }
    }
}

const FOURIER: &str = "p^(w) = int p(t) e^{i w t / eps} dt / eps; w is the scaled frequency";

fn ls(run: &Resolved) -> Vec<usize> {
    (0..=run.config.l_max).collect()
}

fn noise<'a>(run: &'a Resolved, what: &str) -> Result<&'a NoiseSourceModel> {
    run.config.noise.as_ref().ok_or_else(|| Error::Config(format!("`{what}` needs a [noise] table (radial, spectrum)")))
}

fn dissipative(run: &Resolved, what: &str) -> Result<()> {
    if run.medium.kappa() > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "`{what}` needs a dissipative surface (medium.kappa > 0); noise correlations diverge at the eigenfrequencies otherwise"
        )))
    }
}

fn band_edge(noise: &NoiseSourceModel, grid: &FrequencyGrid) -> f64 {
    noise.spectrum.band().map(|b| b.1).unwrap_or(grid.omega_max())
}

fn scatter(run: &Resolved, out: &Output) -> Result<()> {
    let popts = run.config.tolerances.propagator();
    let rows = scattering_spectrum(&run.medium, &run.grid, &ls(run), &popts)?;
    out.table(
        "scatter.csv",
        &["l", "omega", "reflection_re", "reflection_im", "operator", "conservation_residual"],
        rows.iter().map(|r| {
            vec![U(r.l), F(r.omega), F(r.reflection.re), F(r.reflection.im), F(r.operator), F(r.conservation_residual)]
        }),
        json!({
            "provenance": "wkb propagator",
            "grid": run.grid,
            "gamma": run.medium.gamma_surface(),
            "operator": "|1 + R|^2 / |1 - Gamma R|^2",
        }),
    )
}

fn respond(run: &Resolved, out: &Output) -> Result<()> {
    let source = run
        .config
        .source
        .as_ref()
        .ok_or_else(|| Error::Config("`respond` needs a [source] table (pulse, angular)".into()))?;
    let trace = source.trace(run.config.l_max)?;
    let modes = source.modes(run.config.l_max);
    let even = trace.pulse.is_even();
    let popts = run.config.tolerances.propagator();
    let per_omega: Vec<Vec<Vec<Cell>>> = (0..run.grid.n)
        .into_par_iter()
        .map(|k| {
            let w = run.grid.omega(k);
            let st = FrequencyState::new(&run.medium, w, &popts)?;
            modes
                .iter()
                .map(|&(l, m)| {
                    let f = trace.coefficient(w, l, m);
                    let p = response_from_state(&run.medium, &st, f, l)?;
                    let s = if even { symmetrized_from_state(&run.medium, &st, f, l)? } else { f64::NAN.into() };
                    Ok(vec![U(l), I(m), F(w), F(p.re), F(p.im), F(s.re), F(s.im)])
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows = (0..modes.len()).flat_map(|i| per_omega.iter().map(move |row| row[i].clone()));
    out.table(
        "respond.csv",
        &["l", "m", "omega", "response_re", "response_im", "symmetrized_re", "symmetrized_im"],
        rows,
        json!({
            "provenance": "wkb propagator, surface response per unit source",
            "grid": run.grid,
            "convention": FOURIER,
            "symmetrized": if even { "p(t) - p(-t)" } else { "undefined for a non-even pulse (nan)" },
        }),
    )
}

/// C_l(w) on the run grid for every l, sharing one source quadrature.
fn statistical_table(run: &Resolved, noise: &NoiseSourceModel) -> Result<(SourceLayer, Vec<Vec<f64>>)> {
    let dopts = run.config.tolerances.daylight();
    let layer = SourceLayer::new(&run.medium, noise, run.grid.omega_max(), &dopts)?;
    let per_omega: Vec<Vec<f64>> = (0..run.grid.n)
        .into_par_iter()
        .map(|k| {
            let w = run.grid.omega(k);
            let f = noise.spectrum.value(w);
            if f == 0.0 || layer.nodes.is_empty() {
                return Ok(vec![0.0; run.config.l_max + 1]);
            }
            let kernel = SourceKernel::new(&run.medium, &layer, w, &dopts.propagator)?;
            ls(run).into_iter().map(|l| Ok(f * kernel.statistical_unit(&run.medium, &layer, l)?)).collect()
        })
        .collect::<Result<_>>()?;
    let by_l = ls(run).into_iter().map(|l| per_omega.iter().map(|v| v[l]).collect()).collect();
    Ok((layer, by_l))
}

fn correlate(run: &Resolved, out: &Output) -> Result<()> {
    dissipative(run, "correlate")?;
    let noise = noise(run, "correlate")?;
    let dopts = run.config.tolerances.daylight();
    let (layer, stat) = statistical_table(run, noise)?;
    let thin: Vec<Vec<f64>> = ls(run)
        .into_iter()
        .map(|l| {
            (0..run.grid.n)
                .into_par_iter()
                .map(|k| match thin_annulus_autocorrelation(&run.medium, noise, run.grid.omega(k), l, &dopts) {
                    Ok(v) => Ok(v),
                    Err(Error::Precondition(_)) => Ok(f64::NAN),
                    Err(e) => Err(e),
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for l in ls(run) {
        for k in 0..run.grid.n {
            let w = run.grid.omega(k);
            rows.push(vec![U(l), F(w), F(noise.spectrum.value(w)), F(stat[l][k]), F(thin[l][k])]);
        }
    }
    out.table(
        "correlate.csv",
        &["l", "omega", "noise_spectrum", "statistical", "thin_annulus"],
        rows,
        json!({
            "provenance": "closed-form statistical autocorrelation; thin-annulus approximation (nan where the annulus is thicker than the claimed fraction of a wavelength)",
            "grid": run.grid,
            "convention": FOURIER,
            "radial_nodes": layer.nodes.len(),
            "source_mass": layer.weighted_mass(&run.medium),
        }),
    )?;

    let synth =
        SynthesisGrid::covering(run.medium.epsilon(), run.config.synthesis.record_length, band_edge(noise, &run.grid))?;
    let max_lag = run.config.synthesis.max_lag.unwrap_or(synth.samples / 4).min(synth.samples - 1);
    let mut rows = Vec::new();
    for l in ls(run) {
        let table = TransferTable::new(&run.medium, noise, synth, l, &dopts)?;
        for (j, c) in table.statistical_lags(max_lag).into_iter().enumerate() {
            rows.push(vec![U(l), U(j), F(j as f64 * synth.dt()), F(c)]);
        }
    }
    out.table(
        "correlate_lags.csv",
        &["l", "lag", "t", "statistical"],
        rows,
        json!({ "provenance": Provenance::Statistical, "synthesis_grid": synth, "convention": FOURIER }),
    )
}

fn mean_std(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let len = samples.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..len).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect();
    let std =
        (0..len).map(|j| (samples.iter().map(|s| (s[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()).collect();
    (mean, std)
}

fn synthesize(run: &Resolved, out: &Output) -> Result<()> {
    dissipative(run, "synthesize")?;
    let noise = noise(run, "synthesize")?;
    let spec = run.config.synthesis;
    let seed = run.config.seed;
    let window = spec.record_length;
    let grid = SynthesisGrid::covering(run.medium.epsilon(), 2.0 * window, band_edge(noise, &run.grid))?;
    let dt = grid.dt();
    let max_lag = spec.max_lag.unwrap_or(grid.samples / 4);
    let dopts = run.config.tolerances.daylight();
    let (mut traces, mut lags, mut spectra) = (Vec::new(), Vec::new(), Vec::new());
    let mut records = Vec::new();
    for l in ls(run) {
        let table = TransferTable::new(&run.medium, noise, grid, l, &dopts)?;
        let statistical = table.statistical_lags(max_lag);
        let ms: Vec<i64> = if spec.all_m { (-(l as i64)..=l as i64).collect() } else { vec![0] };
        for m in ms {
            let per: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..spec.realizations)
                .into_par_iter()
                .map(|r| {
                    let series = table.synthesize(seed, r, m);
                    let c = empirical_autocorrelation(&series, dt, window, max_lag)?;
                    let p = periodogram(&grid, &series, &table.band);
                    Ok((series, c, p))
                })
                .collect::<Result<_>>()?;
            for (n, x) in per[0].0.iter().enumerate() {
                traces.push(vec![U(l), I(m), U(n), F(n as f64 * dt), F(*x)]);
            }
            let (c_mean, c_std) = mean_std(&per.iter().map(|p| p.1.clone()).collect::<Vec<_>>());
            let (p_mean, p_std) = mean_std(&per.iter().map(|p| p.2.clone()).collect::<Vec<_>>());
            for j in 0..=max_lag {
                lags.push(vec![U(l), I(m), U(j), F(j as f64 * dt), F(c_mean[j]), F(c_std[j]), F(statistical[j])]);
            }
            for (i, &k) in table.band.iter().enumerate() {
                spectra.push(vec![U(l), I(m), F(grid.omega(k)), F(p_mean[i]), F(p_std[i]), F(table.statistical[i])]);
            }
            records.push(CorrelationRecord {
                l,
                m,
                provenance: Provenance::Empirical,
                record_length: window,
                realizations: spec.realizations as usize,
                lags: (0..=max_lag).map(|j| j as f64 * dt).collect(),
                values: c_mean,
                omegas: table.band.iter().map(|&k| grid.omega(k)).collect(),
                spectrum: p_mean,
            });
        }
    }
    let extra = json!({
        "synthesis_grid": grid,
        "averaging_window": window,
        "realizations": spec.realizations,
        "streams": "one counter-based stream per (seed, realization, l, m)",
        "convention": FOURIER,
    });
    out.table(
        "recordings.csv",
        &["l", "m", "sample", "t", "pressure"],
        traces,
        json!({ "realization": 0, "synthesis_grid": grid }),
    )?;
    out.table(
        "empirical.csv",
        &["l", "m", "lag", "t", "empirical_mean", "empirical_std", "statistical"],
        lags,
        extra.clone(),
    )?;
    out.table(
        "periodogram.csv",
        &["l", "m", "omega", "periodogram_mean", "periodogram_std", "statistical"],
        spectra,
        extra.clone(),
    )?;
    out.report("records.json", &records, extra)
}

fn eigenfreqs(run: &Resolved, out: &Output) -> Result<()> {
    let popts = run.config.tolerances.propagator();
    // homogeneous sphere: R = (-1)^{l+1} e^{2 i w R / (eps c)}, so peaks sit at
    // n pi eps c / R for odd l and half a spacing off for even l
    let homogeneous = match run.config.medium.smooth {
        SmoothProfileSpec::Constant { speed } if run.medium.is_unperturbed() => Some(speed),
        _ => None,
    };
    let analytic = |l: usize, w: f64| match homogeneous {
        Some(c) => {
            let spacing = PI * run.medium.epsilon() * c / run.medium.radius();
            let offset = if l.is_multiple_of(2) { 0.5 } else { 0.0 };
            ((w / spacing - offset).round() + offset) * spacing
        }
        None => f64::NAN,
    };
    let mut rows = Vec::new();
    for l in ls(run) {
        for p in eigenfrequency_scan(&run.medium, &run.grid, l, &popts)? {
            rows.push(vec![
                U(p.l),
                F(p.omega),
                F(p.value),
                F(p.width.unwrap_or(f64::NAN)),
                B(p.divergent),
                F(analytic(l, p.omega)),
            ]);
        }
    }
    out.table(
        "eigenfreqs.csv",
        &["l", "omega", "operator", "fwhm", "divergent", "analytic"],
        rows,
        json!({
            "provenance": "local maxima of the scattering operator, log-parabolic refinement",
            "grid": run.grid,
            "resonance_width_bound": resonance_width_bound(&run.medium),
            "analytic": "nearest (n + 1/2 [l even]) pi eps c / R for homogeneous media, nan otherwise",
            "travel_time": run.medium.total_travel_time(),
        }),
    )
}

fn robustness(run: &Resolved, out: &Output) -> Result<()> {
    let spec = &run.config.robustness;
    if spec.weighting.is_none() && spec.aperture.is_none() && spec.measurement.is_none() && spec.perturbation.is_none()
    {
        return Err(Error::Config(
            "`robustness` needs at least one of [robustness.weighting], [robustness.aperture], \
             [robustness.measurement], [robustness.perturbation]"
                .into(),
        ));
    }
    let seed = run.config.seed;
    let dopts = run.config.tolerances.daylight();

    if let Some(w) = &spec.weighting {
        dissipative(run, "robustness.weighting")?;
        let noise = noise(run, "robustness.weighting")?;
        let (_, stat) = statistical_table(run, noise)?;
        let omegas = run.grid.values();
        let records: Vec<CorrelationRecord> = daylight_core::harmonics::ModeIndex::all(run.config.l_max)
            .map(|i| CorrelationRecord {
                l: i.l,
                m: i.m,
                provenance: Provenance::Statistical,
                record_length: f64::INFINITY,
                realizations: 0,
                lags: Vec::new(),
                values: Vec::new(),
                omegas: omegas.clone(),
                spectrum: stat[i.l].clone(),
            })
            .collect();
        let g = w.angular.weights(run.config.l_max)?;
        let weighted = apply_angular_weights(&records, &g)?;
        let uniform = apply_angular_weights(
            &records,
            &daylight_core::daylight::AngularDensity::Uniform.weights(run.config.l_max)?,
        )?;
        let mut rows = Vec::new();
        let mut peaks = Vec::new();
        for (a, b) in uniform.summed.iter().zip(&weighted.summed) {
            for (k, w) in omegas.iter().enumerate() {
                rows.push(vec![U(a.l), F(*w), F(a.spectrum[k]), F(b.spectrum[k])]);
            }
            let pu = find_peaks(&a.spectrum, &run.grid, a.l, false);
            let pw = find_peaks(&b.spectrum, &run.grid, b.l, false);
            let gsum: f64 = (-(a.l as i64)..=a.l as i64).map(|m| g.get(a.l, m)).sum();
            peaks.push(json!({ "l": a.l, "uniform": pu, "weighted": pw, "weight_sum": gsum }));
        }
        out.table(
            "weighting.csv",
            &["l", "omega", "uniform_summed", "weighted_summed"],
            rows,
            json!({ "angular": w.angular, "provenance": "statistical records scaled by G_lm and summed over m" }),
        )?;
        out.report("weighting_peaks.json", &peaks, json!({ "grid": run.grid }))?;
    }

    if let Some(a) = &spec.aperture {
        dissipative(run, "robustness.aperture")?;
        let noise = noise(run, "robustness.aperture")?;
        let grid = SynthesisGrid::covering(
            run.medium.epsilon(),
            run.config.synthesis.record_length,
            band_edge(noise, &run.grid),
        )?;
        let rep = aperture_reconstruction(
            &run.medium,
            noise,
            grid,
            a.l_field,
            run.config.l_max,
            a.angles,
            a.anchors,
            a.realizations,
            seed,
            &dopts,
        )?;
        let mut rows = Vec::new();
        for l in 0..rep.direct.len() {
            for (k, w) in rep.omegas.iter().enumerate() {
                rows.push(vec![U(l), F(*w), F(rep.direct[l][k]), F(rep.reconstructed[l][k])]);
            }
        }
        let extra = json!({ "study": a, "synthesis_grid": grid });
        out.table("aperture.csv", &["l", "omega", "direct", "reconstructed"], rows, extra.clone())?;
        out.report(
            "aperture.json",
            &json!({ "d_omega": rep.d_omega, "receivers": rep.receivers, "peak_mismatch": rep.peak_mismatch }),
            extra,
        )?;
    }

    if let Some(m) = &spec.measurement {
        dissipative(run, "robustness.measurement")?;
        let noise = noise(run, "robustness.measurement")?;
        let edge = m.spectrum.band().map(|b| b.1).unwrap_or(0.0).max(band_edge(noise, &run.grid));
        let grid = SynthesisGrid::covering(run.medium.epsilon(), run.config.synthesis.record_length, edge)?;
        let tables = ls(run)
            .into_iter()
            .map(|l| TransferTable::new(&run.medium, noise, grid, l, &dopts))
            .collect::<Result<Vec<_>>>()?;
        let rows = m
            .receivers
            .iter()
            .map(|&n| {
                let c =
                    measurement_noise_contamination(&tables, n, run.config.l_max, &m.spectrum, m.realizations, seed)?;
                Ok(vec![U(c.receivers), F(c.measured), F(c.predicted)])
            })
            .collect::<Result<Vec<_>>>()?;
        out.table(
            "measurement.csv",
            &["receivers", "measured", "predicted"],
            rows,
            json!({ "study": m, "synthesis_grid": grid, "predicted": "(4 pi / N) F^n(0)" }),
        )?;
    }

    if let Some(p) = &spec.perturbation {
        let popts = run.config.tolerances.propagator();
        let rep = perturbation_scaling(
            &run.config.medium,
            &p.perturbation,
            &p.omegas,
            &p.eps_ladder,
            p.realizations,
            &popts,
        )?;
        let extra = json!({ "study": p, "slope": rep.slope, "deviation": "||R - R0||_F / sqrt(n), RMS over frequencies and realizations" });
        out.table(
            "perturbation.csv",
            &["epsilon", "deviation", "energy_residual"],
            rep.rows.iter().map(|r| vec![F(r.epsilon), F(r.deviation), F(r.energy_residual)]),
            extra,
        )?;
    }
    Ok(())
}

fn oracle(run: &Resolved, out: &Output) -> Result<()> {
    let o = &run.config.oracle;
    let n = o.frequencies;
    let (lo, hi) = (run.grid.omega_min, run.grid.omega_max());
    let omegas: Vec<f64> =
        (0..n).map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect();
    let rep = wkb_error_report(
        &run.config.medium,
        &omegas,
        &o.ls,
        &o.eps_ladder,
        &run.config.tolerances.propagator(),
        &run.config.tolerances.oracle(),
    )?;
    let extra = json!({ "provenance": "wkb response vs direct radial solve", "fitted_order": rep.fitted_order });
    out.table(
        "oracle.csv",
        &["epsilon", "omega", "l", "rel_error"],
        rep.rows.iter().map(|r| vec![F(r.epsilon), F(r.omega), U(r.l), F(r.rel_error)]),
        extra.clone(),
    )?;
    out.table(
        "oracle_aggregate.csv",
        &["epsilon", "relative_l2_error"],
        rep.aggregate.iter().map(|&(e, x)| vec![F(e), F(x)]),
        extra,
    )
}

fn daylight_check(run: &Resolved, out: &Output) -> Result<()> {
    dissipative(run, "daylight-check")?;
    let noise = noise(run, "daylight-check")?;
    let source = run.config.source.as_ref().ok_or_else(|| {
        Error::Config("`daylight-check` needs a [source] table whose pulse matches the noise spectrum".into())
    })?;
    let trace = source.trace(run.config.l_max)?;
    let grid =
        SynthesisGrid::covering(run.medium.epsilon(), run.config.synthesis.record_length, band_edge(noise, &run.grid))?;
    let dopts = run.config.tolerances.daylight();
    let reports = ls(run)
        .into_par_iter()
        .map(|l| daylight_identity_check(&run.medium, noise, &trace, l, grid, &dopts))
        .collect::<Result<Vec<_>>>()?;
    for r in &reports {
        println!(
            "l = {}: correlation {:.6}, constant {:.6e} (predicted {:.6e})",
            r.l, r.correlation, r.fitted_constant, r.predicted_constant
        );
    }
    out.table(
        "daylight_check.csv",
        &["l", "correlation", "fitted_constant", "predicted_constant"],
        reports.iter().map(|r| vec![U(r.l), F(r.correlation), F(r.fitted_constant), F(r.predicted_constant)]),
        json!({ "provenance": "d/dt C_l(t) against the symmetrized response p(t) - p(-t)", "synthesis_grid": grid }),
    )
}
