use daylight_core::daylight::{
    empirical_autocorrelation, periodogram, AngularDensity, CorrelationRecord, DaylightOptions, NoiseSourceModel,
    Provenance, RadialDensity, SynthesisGrid, TransferTable,
};
use daylight_core::harmonics::{real_spherical_harmonic, ModeIndex};
use daylight_core::medium::{FluctuationLayer, FluctuationSpec, Medium, MediumSpec};
use daylight_core::robustness::{apply_angular_weights, fibonacci_receivers, inject_measurement_noise, project_mode};
use daylight_core::spectrum::Spectrum;

const EPS: f64 = 0.05;

fn medium() -> Medium {
    Medium::new(MediumSpec::homogeneous(1.0, EPS, 0.5).with_fluctuation(FluctuationSpec::Layered {
        layers: vec![FluctuationLayer { r_lo: 0.3, r_hi: 0.4, amplitude: 0.3 }],
    }))
    .unwrap()
}

fn band() -> Spectrum {
    Spectrum::Flat { lo: 0.8, hi: 1.2, amplitude: 1.0, taper: 0.05 }
}

fn noise(spectrum: Spectrum) -> NoiseSourceModel {
    NoiseSourceModel {
        radial: RadialDensity::Bump { r_lo: 0.5, r_hi: 0.7, amplitude: 1.0 },
        spectrum,
        angular: AngularDensity::Uniform,
    }
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (mean, (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn finite_record_error_decays_like_inverse_root_t() {
    let m = medium();
    let tau = 2.0;
    let reals = 24u64;
    let ts = [10.0, 20.0, 40.0, 80.0];
    let errors: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let grid = SynthesisGrid::covering(EPS, 2.0 * t, 1.4).unwrap();
            let table = TransferTable::new(&m, &noise(band()), grid, 1, &DaylightOptions::default()).unwrap();
            let max_lag = (tau / grid.dt()).round() as usize;
            let exact = table.statistical_lags(max_lag);
            let sq: f64 = (0..reals)
                .map(|r| {
                    let c = empirical_autocorrelation(&table.synthesize(5, r, 0), grid.dt(), t, max_lag).unwrap();
                    c.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * grid.dt()
                })
                .sum();
            (sq / reals as f64).sqrt()
        })
        .collect();
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() <= 0.15, "slope {slope}, errors {errors:?}");
}

#[test]
fn statistics_do_not_depend_on_m_and_mean_vanishes() {
    let m = medium();
    let grid = SynthesisGrid::covering(EPS, 20.0, 1.4).unwrap();
    let table = TransferTable::new(&m, &noise(band()), grid, 1, &DaylightOptions::default()).unwrap();
    let exact = table.statistical_lags(0)[0];
    let reals = 300u64;
    let mut stats = Vec::new();
    for mm in -1..=1 {
        let series: Vec<Vec<f64>> = (0..reals).map(|r| table.synthesize(21, r, mm)).collect();
        let c0: Vec<f64> =
            series.iter().map(|s| empirical_autocorrelation(s, grid.dt(), grid.record_length, 0).unwrap()[0]).collect();
        let (mean, sd) = mean_sd(&c0);
        let se = sd / (reals as f64).sqrt();
        assert!((mean - exact).abs() <= 4.0 * se, "m = {mm}: {mean} vs {exact} (se {se})");
        stats.push((mean, se));

        let at: Vec<f64> = series.iter().map(|s| s[s.len() / 3]).collect();
        let (mu, sigma) = mean_sd(&at);
        assert!(mu.abs() <= 3.0 * sigma / (reals as f64).sqrt(), "m = {mm}: mean {mu}, sd {sigma}");
    }
    for a in &stats {
        for b in &stats {
            assert!((a.0 - b.0).abs() <= 4.0 * (a.1 * a.1 + b.1 * b.1).sqrt(), "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn silent_spectrum_gives_silent_recordings() {
    let m = medium();
    let grid = SynthesisGrid::covering(EPS, 20.0, 1.4).unwrap();
    for spectrum in [Spectrum::Zero, Spectrum::Flat { lo: 0.8, hi: 1.2, amplitude: 0.0, taper: 0.0 }] {
        let table = TransferTable::new(&m, &noise(spectrum), grid, 2, &DaylightOptions::default()).unwrap();
        assert!(table.synthesize(3, 0, 1).iter().all(|&x| x == 0.0));
        assert!(table.statistical_lags(10).iter().all(|&x| x == 0.0));
    }
}

#[test]
fn ensemble_periodogram_matches_closed_form() {
    let m = medium();
    let grid = SynthesisGrid::covering(EPS, 20.0, 1.4).unwrap();
    let table = TransferTable::new(&m, &noise(band()), grid, 2, &DaylightOptions::default()).unwrap();
    let reals = 1500u64;
    let mut avg = vec![0.0; table.band.len()];
    for r in 0..reals {
        for (a, v) in avg.iter_mut().zip(periodogram(&grid, &table.synthesize(8, r, 0), &table.band)) {
            *a += v / reals as f64;
        }
    }
    let num: f64 = avg.iter().zip(&table.statistical).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = table.statistical.iter().map(|b| b * b).sum();
    assert!((num / den).sqrt() <= 0.05, "relative L2 {}", (num / den).sqrt());
}

#[test]
fn doubling_the_lateral_density_doubles_correlations() {
    let m = medium();
    let grid = SynthesisGrid::covering(EPS, 20.0, 1.4).unwrap();
    let records: Vec<CorrelationRecord> = (0..=2)
        .flat_map(|l| {
            let table = TransferTable::new(&m, &noise(band()), grid, l, &DaylightOptions::default()).unwrap();
            let values = table.statistical_lags(40);
            let lags: Vec<f64> = (0..=40).map(|j| j as f64 * grid.dt()).collect();
            let omegas: Vec<f64> = table.band.iter().map(|&k| grid.omega(k)).collect();
            ModeIndex::all(2).filter(move |k| k.l == l).map(move |k| CorrelationRecord {
                l,
                m: k.m,
                provenance: Provenance::Statistical,
                record_length: grid.record_length,
                realizations: 0,
                lags: lags.clone(),
                values: values.clone(),
                omegas: omegas.clone(),
                spectrum: table.statistical.clone(),
            })
        })
        .collect();
    let one = apply_angular_weights(&records, &AngularDensity::Uniform.weights(2).unwrap()).unwrap();
    let two = apply_angular_weights(&records, &AngularDensity::Constant { value: 2.0 }.weights(2).unwrap()).unwrap();
    for (a, b) in one.weighted.iter().chain(&one.summed).zip(two.weighted.iter().chain(&two.summed)) {
        for (x, y) in a.values.iter().zip(&b.values).chain(a.spectrum.iter().zip(&b.spectrum)) {
            assert!((y - 2.0 * x).abs() <= 1e-12 * x.abs().max(1e-300), "{y} vs 2 x {x}");
        }
    }
}

#[test]
fn out_of_band_measurement_noise_leaves_the_band_untouched() {
    let m = medium();
    let grid = SynthesisGrid::covering(EPS, 20.0, 2.4).unwrap();
    let tables: Vec<TransferTable> = (0..=2)
        .map(|l| TransferTable::new(&m, &noise(band()), grid, l, &DaylightOptions::default()).unwrap())
        .collect();
    let rx = fibonacci_receivers(60);
    let modes: Vec<(ModeIndex, Vec<f64>)> = ModeIndex::all(2).map(|k| (k, tables[k.l].synthesize(4, 0, k.m))).collect();
    let mut clean = vec![vec![0.0; grid.samples]; rx.len()];
    for (s, &(t, p)) in clean.iter_mut().zip(&rx) {
        for (k, series) in &modes {
            let y = real_spherical_harmonic(k.l, k.m, t, p).unwrap();
            s.iter_mut().zip(series).for_each(|(a, b)| *a += y * b);
        }
    }
    let measurement = Spectrum::Flat { lo: 1.6, hi: 2.0, amplitude: 5.0, taper: 0.0 };
    let mut noisy = clean.clone();
    inject_measurement_noise(&mut noisy, &grid, &measurement, 4, 0).unwrap();
    let out_of_band = grid.band_indices(&measurement);
    for k in ModeIndex::all(2) {
        let band = &tables[k.l].band;
        let a = periodogram(&grid, &project_mode(&clean, &rx, k.l, k.m).unwrap(), band);
        let b = periodogram(&grid, &project_mode(&noisy, &rx, k.l, k.m).unwrap(), band);
        let scale = a.iter().cloned().fold(0.0, f64::max);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-9 * scale), "({}, {})", k.l, k.m);
        let peak = |v: &[f64]| v.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
        assert_eq!(peak(&a), peak(&b));
        let leaked = periodogram(&grid, &project_mode(&noisy, &rx, k.l, k.m).unwrap(), &out_of_band);
        assert!(leaked.iter().any(|&v| v > 0.0), "noise was not injected");
    }
}
