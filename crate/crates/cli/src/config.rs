//! Run files: strict TOML with defaults, suggestions for misspelled keys and
//! cross-field validation at load time.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::{Path, PathBuf};

use daylight_core::daylight::{AngularDensity, DaylightOptions, NoiseSourceModel};
use daylight_core::harmonics::ModeIndex;
use daylight_core::oracle::OracleOptions;
use daylight_core::propagator::PropagatorOptions;
use daylight_core::robustness::AngularPerturbation;
use daylight_core::scattering::{resonance_width_bound, SourceTrace};
use daylight_core::spectrum::{FrequencyGrid, Pulse, Spectrum};
use daylight_core::{Medium, MediumSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Read { path: PathBuf, reason: String },
    Syntax { line: usize, message: String },
    Invalid { field: String, line: Option<usize>, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read { path, reason } => write!(f, "cannot read config {}: {reason}", path.display()),
            ConfigError::Syntax { line, message } => write!(f, "syntax error at line {line}: {message}"),
            ConfigError::Invalid { field, line: Some(line), message } => {
                write!(f, "invalid config at `{field}` (line {line}): {message}")
            }
            ConfigError::Invalid { field, line: None, message } => write!(f, "invalid config at `{field}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid { field: field.into(), line: None, message: message.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub omega_min: f64,
    pub omega_max: f64,
    pub d_omega: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { omega_min: 0.5, omega_max: 3.0, d_omega: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceAngular {
    Mode { l: usize, m: i64 },
    Point { theta: f64, phi: f64 },
}

impl Default for SourceAngular {
    fn default() -> Self {
        SourceAngular::Mode { l: 0, m: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub pulse: Pulse,
    #[serde(default)]
    pub angular: SourceAngular,
}

impl SourceSpec {
    pub fn trace(&self, l_max: usize) -> daylight_core::Result<SourceTrace> {
        match self.angular {
            SourceAngular::Mode { l, m } => SourceTrace::single_mode(self.pulse.clone(), l, m),
            SourceAngular::Point { theta, phi } => SourceTrace::point(self.pulse.clone(), theta, phi, l_max),
        }
    }

    /// Modes with a nonzero angular coefficient.
    pub fn modes(&self, l_max: usize) -> Vec<(usize, i64)> {
        match self.angular {
            SourceAngular::Mode { l, m } => vec![(l, m)],
            SourceAngular::Point { .. } => ModeIndex::all(l_max).map(|i| (i.l, i.m)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSpec {
    /// Averaging window T; recordings span 2T so every lag sees a full window.
    pub record_length: f64,
    pub realizations: u64,
    /// Largest lag in samples; defaults to a quarter of the recording.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<usize>,
    /// Synthesize every m instead of m = 0 only.
    pub all_m: bool,
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        Self { record_length: 40.0, realizations: 20, max_lag: None, all_m: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub phase_fraction: f64,
    pub wavelength_fraction: f64,
    pub radial_points: usize,
    pub points_per_wavelength: f64,
    pub richardson_tolerance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let p = PropagatorOptions::default();
        let d = DaylightOptions::default();
        let o = OracleOptions::default();
        Self {
            rtol: p.rtol,
            atol: p.atol,
            phase_fraction: p.phase_fraction,
            wavelength_fraction: d.wavelength_fraction,
            radial_points: d.radial_points,
            points_per_wavelength: o.points_per_wavelength,
            richardson_tolerance: o.richardson_tolerance,
        }
    }
}

impl Tolerances {
    pub fn propagator(&self) -> PropagatorOptions {
        PropagatorOptions {
            rtol: self.rtol,
            atol: self.atol,
            phase_fraction: self.phase_fraction,
            ..PropagatorOptions::default()
        }
    }

    pub fn daylight(&self) -> DaylightOptions {
        DaylightOptions {
            propagator: self.propagator(),
            wavelength_fraction: self.wavelength_fraction,
            radial_points: self.radial_points,
            radial_panel: None,
        }
    }

    pub fn oracle(&self) -> OracleOptions {
        OracleOptions {
            points_per_wavelength: self.points_per_wavelength,
            richardson_tolerance: self.richardson_tolerance,
            ..OracleOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    pub eps_ladder: Vec<f64>,
    /// Frequencies spread uniformly over the grid range.
    pub frequencies: usize,
    pub ls: Vec<usize>,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self { eps_ladder: vec![0.04, 0.02, 0.01], frequencies: 20, ls: vec![0, 1, 2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightingStudy {
    pub angular: AngularDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApertureStudy {
    pub l_field: usize,
    pub angles: usize,
    pub anchors: usize,
    pub realizations: u64,
}

impl Default for ApertureStudy {
    fn default() -> Self {
        Self { l_field: 4, angles: 9, anchors: 6, realizations: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementStudy {
    pub receivers: Vec<usize>,
    pub spectrum: Spectrum,
    pub realizations: u64,
}

impl Default for MeasurementStudy {
    fn default() -> Self {
        Self { receivers: vec![100, 200], spectrum: Spectrum::gaussian(3.0, 0.2, 1.0), realizations: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationStudy {
    pub perturbation: AngularPerturbation,
    #[serde(default = "default_pert_ladder")]
    pub eps_ladder: Vec<f64>,
    #[serde(default = "default_pert_omegas")]
    pub omegas: Vec<f64>,
    #[serde(default = "one")]
    pub realizations: u64,
}

fn default_pert_ladder() -> Vec<f64> {
    vec![0.04, 0.02, 0.01]
}

fn default_pert_omegas() -> Vec<f64> {
    vec![1.0, 1.3, 1.7]
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighting: Option<WeightingStudy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aperture: Option<ApertureStudy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementStudy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationStudy>,
}

fn default_lmax() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lmax")]
    pub l_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub medium: MediumSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSourceModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpec>,
    #[serde(default)]
    pub synthesis: SynthesisSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub robustness: RobustnessSpec,
}

/// A validated run: the config with every default filled in, the built
/// medium and grid, and the canonical text the hash is taken over.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub medium: Medium,
    pub grid: FrequencyGrid,
    pub canonical: String,
    pub hash: String,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Names quoted in backticks in a serde message, in order.
fn quoted(message: &str) -> Vec<&str> {
    message.split('`').skip(1).step_by(2).collect()
}

/// "did you mean" hint for serde's unknown field / variant messages.
fn suggestion(message: &str) -> Option<String> {
    if !(message.contains("unknown field") || message.contains("unknown variant")) {
        return None;
    }
    let names = quoted(message);
    let (bad, candidates) = names.split_first()?;
    candidates
        .iter()
        .map(|c| (strsim::damerau_levenshtein(bad, c), *c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| c.to_string())
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    if let Err(e) = text.parse::<toml::Table>() {
        return Err(ConfigError::Syntax {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
            message: e.message().trim().to_string(),
        });
    }
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let mut message = inner.message().trim().to_string();
        if let Some(s) = suggestion(&message) {
            message = format!("{message}; did you mean `{s}`?");
        }
        ConfigError::Invalid {
            field: if path == "." { "(top level)".into() } else { path },
            line: inner.span().map(|s| line_of(text, s.start)),
            message,
        }
    })
}

pub fn load(path: &Path, seed: Option<u64>) -> Result<Resolved, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.to_path_buf(), reason: e.to_string() })?;
    let mut config = parse_str(&text)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    resolve(config)
}

pub fn resolve(config: RunConfig) -> Result<Resolved, ConfigError> {
    let medium = Medium::new(config.medium.clone()).map_err(|e| invalid("medium", e))?;
    let g = config.grid;
    let grid = FrequencyGrid::new(g.omega_min, g.omega_max, g.d_omega).map_err(|e| invalid("grid", e))?;
    if let Some(bound) = resonance_width_bound(&medium) {
        if g.d_omega > bound {
            return Err(invalid(
                "grid.d_omega",
                format!(
                    "d_omega = {} is coarser than the resonance-width bound eps (1 - Gamma) / (2 tau sqrt(Gamma)) = \
                     {bound:.4e} for kappa = {}; resonance peaks would be unresolved, use d_omega <= {bound:.4e}",
                    g.d_omega, config.medium.kappa
                ),
            ));
        }
    }
    let t = &config.tolerances;
    t.propagator().validate().map_err(|e| invalid("tolerances", e))?;
    if !(t.wavelength_fraction > 0.0) {
        return Err(invalid("tolerances.wavelength_fraction", "must be positive"));
    }
    if t.radial_points == 0 {
        return Err(invalid("tolerances.radial_points", "must be at least 1"));
    }
    if !(t.points_per_wavelength >= 8.0) {
        return Err(invalid("tolerances.points_per_wavelength", "must be at least 8"));
    }
    if let Some(noise) = &config.noise {
        noise.validate(&medium).map_err(|e| invalid("noise", e))?;
    }
    if let Some(source) = &config.source {
        source.pulse.validate().map_err(|e| invalid("source.pulse", e))?;
        source.trace(config.l_max).map_err(|e| invalid("source.angular", e))?;
    }
    let s = &config.synthesis;
    if !(s.record_length > 0.0) {
        return Err(invalid("synthesis.record_length", "must be positive"));
    }
    if s.realizations < 2 {
        return Err(invalid("synthesis.realizations", "at least 2 realizations are needed for a spread estimate"));
    }
    let o = &config.oracle;
    if o.eps_ladder.len() < 2 || o.eps_ladder.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("oracle.eps_ladder", "needs at least two positive values"));
    }
    if o.frequencies == 0 || o.ls.is_empty() {
        return Err(invalid("oracle", "needs at least one frequency and one l"));
    }
    if let Some(a) = &config.robustness.aperture {
        if a.l_field < config.l_max {
            return Err(invalid(
                "robustness.aperture.l_field",
                format!("field degree {} is below l_max = {}", a.l_field, config.l_max),
            ));
        }
    }
    if let Some(m) = &config.robustness.measurement {
        m.spectrum.validate().map_err(|e| invalid("robustness.measurement.spectrum", e))?;
        if m.receivers.is_empty() || m.receivers.contains(&0) {
            return Err(invalid("robustness.measurement.receivers", "needs positive receiver counts"));
        }
    }

    let mut echo = config.clone();
    echo.output_dir = None;
    let canonical = toml::to_string(&echo).map_err(|e| invalid("(top level)", e))?;
    let hash = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    Ok(Resolved { config, medium, grid, canonical, hash })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_str("").unwrap();
        assert_eq!(c.medium, MediumSpec::default());
        assert_eq!(c.grid, GridSpec::default());
        assert_eq!(c.l_max, 4);
        resolve(c).unwrap();
    }

    #[test]
    fn misspelled_key_gets_suggestion() {
        let err = parse_str("seed = 1\n[medium]\nepsilon = 0.02\nkapa = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("did you mean `kappa`"), "{msg}");
        assert!(msg.contains("medium"), "{msg}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_str("seed = 1\n\n[medium]\nepsilon = = 0.02\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 4, .. }), "{err}");
    }

    #[test]
    fn coarse_grid_names_resonance_bound() {
        let c = parse_str("[medium]\nkappa = 0.1\n[grid]\nd_omega = 0.01\n").unwrap();
        let msg = resolve(c).unwrap_err().to_string();
        assert!(msg.contains("resonance-width bound"), "{msg}");
    }

    #[test]
    fn canonical_text_round_trips() {
        let text = "seed = 3\n[noise]\nradial = { kind = \"uniform\", r_lo = 0.9, r_hi = 0.99, amplitude = 1.0 }\n\
                    spectrum = { kind = \"gaussian_band\", center = 1.0, width = 0.1, amplitude = 1.0 }\n";
        let r = resolve(parse_str(text).unwrap()).unwrap();
        let again = resolve(parse_str(&r.canonical).unwrap()).unwrap();
        assert_eq!(r.canonical, again.canonical);
        assert_eq!(r.hash, again.hash);
    }

    #[test]
    fn suggestion_ignores_distant_names() {
        assert_eq!(suggestion("unknown field `zzzzzz`, expected `kappa` or `epsilon`"), None);
        assert_eq!(
            suggestion("unknown variant `constnt`, expected one of `constant`, `layers`").as_deref(),
            Some("constant")
        );
    }
}
