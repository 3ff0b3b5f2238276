//! Temporal spectra (noise power spectral densities, pulse transforms) and
//! uniform frequency grids.
//!
//! Convention: f^(w) = integral of f(s) e^{i w s} ds in the scaled time
//! s = t / eps, so a trace f(t/eps) has transform eps f^(w) at physical
//! frequency w/eps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real, nonnegative, even-in-w spectral profile, described on w > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Spectrum {
    Zero,
    /// amplitude * exp(-(w - center)^2 / (2 width^2)), cut to zero beyond
    /// `cutoff` widths from the center.
    GaussianBand {
        center: f64,
        width: f64,
        amplitude: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    /// Constant on [lo, hi] with raised-cosine tapers of the given width.
    Flat {
        lo: f64,
        hi: f64,
        amplitude: f64,
        #[serde(default)]
        taper: f64,
    },
    /// Piecewise-linear through (omega, value), zero outside.
    Tabulated {
        omegas: Vec<f64>,
        values: Vec<f64>,
    },
}

fn default_cutoff() -> f64 {
    6.0
}

impl Spectrum {
    pub fn gaussian(center: f64, width: f64, amplitude: f64) -> Self {
        Spectrum::GaussianBand { center, width, amplitude, cutoff: default_cutoff() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        match self {
            Spectrum::Zero => Ok(()),
            Spectrum::GaussianBand { center, width, amplitude, cutoff } => {
                if !(*width > 0.0 && *amplitude >= 0.0 && *cutoff > 0.0) {
                    return bad("gaussian band needs width > 0, amplitude >= 0, cutoff > 0".into());
                }
                if center - cutoff * width <= 0.0 {
                    return bad(format!(
                        "gaussian band must vanish near w = 0: center - cutoff*width = {}",
                        center - cutoff * width
                    ));
                }
                Ok(())
            }
            Spectrum::Flat { lo, hi, amplitude, taper } => {
                if !(*lo > 0.0 && hi > lo && *amplitude >= 0.0 && *taper >= 0.0 && lo - taper > 0.0) {
                    return bad(format!(
                        "flat band needs 0 < lo - taper, lo < hi, amplitude >= 0; got lo={lo}, hi={hi}, taper={taper}"
                    ));
                }
                Ok(())
            }
            Spectrum::Tabulated { omegas, values } => {
                if omegas.len() != values.len() || omegas.len() < 2 {
                    return bad("tabulated spectrum needs >= 2 matching samples".into());
                }
                if omegas.windows(2).any(|w| w[1] <= w[0]) || omegas[0] <= 0.0 {
                    return bad("tabulated frequencies must be positive and increasing".into());
                }
                if values.iter().any(|v| !(*v >= 0.0)) {
                    return bad("spectral density must be nonnegative".into());
                }
                Ok(())
            }
        }
    }

    /// Value at |w|.
    pub fn value(&self, omega: f64) -> f64 {
        let w = omega.abs();
        match self {
            Spectrum::Zero => 0.0,
            Spectrum::GaussianBand { center, width, amplitude, cutoff } => {
                let z = (w - center) / width;
                if z.abs() > *cutoff {
                    0.0
                } else {
                    amplitude * (-0.5 * z * z).exp()
                }
            }
            Spectrum::Flat { lo, hi, amplitude, taper } => {
                if w < lo - taper || w > hi + taper {
                    0.0
                } else if w < *lo {
                    amplitude * 0.5 * (1.0 - (std::f64::consts::PI * (lo - w) / taper).cos())
                } else if w > *hi {
                    amplitude * 0.5 * (1.0 - (std::f64::consts::PI * (w - hi) / taper).cos())
                } else {
                    *amplitude
                }
            }
            Spectrum::Tabulated { omegas, values } => {
                if w < omegas[0] || w > omegas[omegas.len() - 1] {
                    return 0.0;
                }
                let i = omegas.partition_point(|&x| x <= w).clamp(1, omegas.len() - 1);
                let t = (w - omegas[i - 1]) / (omegas[i] - omegas[i - 1]);
                values[i - 1] + t * (values[i] - values[i - 1])
            }
        }
    }

    /// Frequency band [lo, hi] outside which the spectrum vanishes.
    pub fn band(&self) -> Option<(f64, f64)> {
        match self {
            Spectrum::Zero => None,
            Spectrum::GaussianBand { center, width, cutoff, .. } => {
                Some((center - cutoff * width, center + cutoff * width))
            }
            Spectrum::Flat { lo, hi, taper, .. } => Some((lo - taper, hi + taper)),
            Spectrum::Tabulated { omegas, .. } => Some((omegas[0], omegas[omegas.len() - 1])),
        }
    }
}

/// Pulse profile f of a deterministic source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pulse {
    /// Defined through a real even transform, so f is even by construction.
    Spectral { spectrum: Spectrum },
    /// Samples f(s_j), s_j = (j - (n-1)/2) dt, in scaled time.
    Samples { dt: f64, values: Vec<f64> },
}

impl Pulse {
    pub fn validate(&self) -> Result<()> {
        match self {
            Pulse::Spectral { spectrum } => spectrum.validate(),
            Pulse::Samples { dt, values } => {
                if !(*dt > 0.0) || values.is_empty() {
                    return Err(Error::Domain("sampled pulse needs dt > 0 and samples".into()));
                }
                Ok(())
            }
        }
    }

    /// f^(w).
    pub fn transform(&self, omega: f64) -> Complex64 {
        match self {
            Pulse::Spectral { spectrum } => Complex64::new(spectrum.value(omega), 0.0),
            Pulse::Samples { dt, values } => {
                let c = 0.5 * (values.len() as f64 - 1.0);
                values
                    .iter()
                    .enumerate()
                    .map(|(j, &f)| Complex64::from_polar(f * dt, omega * (j as f64 - c) * dt))
                    .sum()
            }
        }
    }

    /// Even pulses have real transforms; odd-length symmetric sample sets
    /// are checked to 1e-12 of their peak.
    pub fn is_even(&self) -> bool {
        match self {
            Pulse::Spectral { .. } => true,
            Pulse::Samples { values, .. } => {
                let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                values.len() % 2 == 1
                    && values.iter().zip(values.iter().rev()).all(|(a, b)| (a - b).abs() <= 1e-12 * peak)
            }
        }
    }
}

/// Uniform grid w_k = omega_min + k dw, k = 0..n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub d_omega: f64,
    pub n: usize,
}

impl FrequencyGrid {
    /// Grid from omega_min to (at least) omega_max with spacing d_omega.
    pub fn new(omega_min: f64, omega_max: f64, d_omega: f64) -> Result<Self> {
        if !(omega_min > 0.0) {
            return Err(Error::Config(format!("frequency grid must start above zero, got omega_min = {omega_min}")));
        }
        if !(d_omega > 0.0 && omega_max >= omega_min) {
            return Err(Error::Config(format!(
                "frequency grid needs d_omega > 0 and omega_max >= omega_min, got [{omega_min}, {omega_max}] step {d_omega}"
            )));
        }
        let n = ((omega_max - omega_min) / d_omega * (1.0 + 1e-12)).floor() as usize + 1;
        Ok(Self { omega_min, d_omega, n })
    }

    /// n points starting at omega_min.
    pub fn with_count(omega_min: f64, d_omega: f64, n: usize) -> Result<Self> {
        let g = Self::new(omega_min, omega_min, d_omega)?;
        Ok(Self { n, ..g })
    }

    pub fn omega(&self, k: usize) -> f64 {
        self.omega_min + k as f64 * self.d_omega
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.omega(k)).collect()
    }

    pub fn omega_max(&self) -> f64 {
        self.omega(self.n.saturating_sub(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_band_is_cut() {
        let s = Spectrum::gaussian(1.0, 0.1, 2.0);
        s.validate().unwrap();
        assert_eq!(s.value(1.0), 2.0);
        assert_eq!(s.value(-1.0), 2.0);
        assert_eq!(s.value(1.61), 0.0);
        assert!(Spectrum::gaussian(0.3, 0.1, 1.0).validate().is_err());
    }

    #[test]
    fn flat_and_tabulated() {
        let f = Spectrum::Flat { lo: 0.5, hi: 1.0, amplitude: 3.0, taper: 0.1 };
        f.validate().unwrap();
        assert_eq!(f.value(0.7), 3.0);
        assert!((f.value(0.45) - 1.5).abs() < 1e-12);
        assert_eq!(f.value(1.2), 0.0);
        let t = Spectrum::Tabulated { omegas: vec![0.5, 1.0], values: vec![0.0, 2.0] };
        assert!((t.value(0.75) - 1.0).abs() < 1e-15);
        assert_eq!(t.value(2.0), 0.0);
        assert!(Spectrum::Tabulated { omegas: vec![0.5, 1.0], values: vec![0.0, -2.0] }.validate().is_err());
    }

    #[test]
    fn sampled_gaussian_pulse_transform() {
        // f(s) = exp(-s^2/2) has transform sqrt(2 pi) exp(-w^2/2)
        let dt = 0.05;
        let values: Vec<f64> = (-200..=200).map(|j| (-0.5 * (j as f64 * dt).powi(2)).exp()).collect();
        let p = Pulse::Samples { dt, values };
        assert!(p.is_even());
        for &w in &[0.0, 0.7, 1.9] {
            let f = p.transform(w);
            let exact = (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * w * w).exp();
            assert!((f.re - exact).abs() < 1e-10 && f.im.abs() < 1e-10);
        }
        let odd = Pulse::Samples { dt, values: vec![0.0, 1.0, 2.0] };
        assert!(!odd.is_even());
    }

    #[test]
    fn grid_construction() {
        let g = FrequencyGrid::new(0.1, 0.2, 0.01).unwrap();
        assert_eq!(g.n, 11);
        assert!((g.omega_max() - 0.2).abs() < 1e-15);
        assert!(FrequencyGrid::new(0.0, 1.0, 0.1).is_err());
        assert!(FrequencyGrid::new(0.1, 1.0, 0.0).is_err());
    }
}
