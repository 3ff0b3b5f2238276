//! Stratified-sphere configuration: smooth background speed, rapid
//! slowness fluctuations, surface dissipation and the scale parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::counter_uniform;

/// One constant-speed shell of a layered background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedLayer {
    pub r_lo: f64,
    pub r_hi: f64,
    pub speed: f64,
}

/// Background speed c_o(r) on [0, R_o].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothProfileSpec {
    Constant {
        speed: f64,
    },
    /// Piecewise-constant shells covering [0, R_o] without gaps.
    Layers {
        layers: Vec<SpeedLayer>,
    },
    /// Nodal values with linear interpolation; radii start at 0 and end at R_o.
    Sampled {
        radii: Vec<f64>,
        speeds: Vec<f64>,
    },
}

/// One shell of a deterministic layered fluctuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluctuationLayer {
    pub r_lo: f64,
    pub r_hi: f64,
    pub amplitude: f64,
}

/// Rapid slowness-squared perturbation V^eps(r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluctuationSpec {
    #[default]
    None,
    Layered {
        layers: Vec<FluctuationLayer>,
    },
    /// Piecewise-constant realization nu(r/eps): cells of width
    /// `correlation_length * eps`, values uniform in [-amplitude, amplitude].
    StationaryRandom {
        amplitude: f64,
        correlation_length: f64,
        r_lo: f64,
        r_hi: f64,
    },
}

impl FluctuationSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            FluctuationSpec::None => "none",
            FluctuationSpec::Layered { .. } => "layered",
            FluctuationSpec::StationaryRandom { .. } => "stationary_random",
        }
    }
}

fn default_radius() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    0.02
}

fn default_core() -> f64 {
    0.2
}

fn default_smooth() -> SmoothProfileSpec {
    SmoothProfileSpec::Constant { speed: 1.0 }
}

/// Declarative medium description (the `[medium]` table of a run file).
/// Omitted fields describe a lossless homogeneous unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "default_core")]
    pub r_core: f64,
    #[serde(default = "default_smooth")]
    pub smooth: SmoothProfileSpec,
    #[serde(default)]
    pub fluctuation: FluctuationSpec,
    #[serde(default)]
    pub seed: u64,
}

impl MediumSpec {
    /// Unit-radius homogeneous sphere with the given speed.
    pub fn homogeneous(speed: f64, epsilon: f64, kappa: f64) -> Self {
        Self {
            radius: 1.0,
            epsilon,
            kappa,
            r_core: default_core(),
            smooth: SmoothProfileSpec::Constant { speed },
            fluctuation: FluctuationSpec::None,
            seed: 0,
        }
    }

    pub fn with_fluctuation(mut self, fluctuation: FluctuationSpec) -> Self {
        self.fluctuation = fluctuation;
        self
    }
}

impl Default for MediumSpec {
    fn default() -> Self {
        Self::homogeneous(1.0, default_epsilon(), 0.0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    r0: f64,
    r1: f64,
    c0: f64,
    c1: f64,
}

impl Piece {
    fn slope(&self) -> f64 {
        (self.c1 - self.c0) / (self.r1 - self.r0)
    }

    fn speed(&self, r: f64) -> f64 {
        if self.c0 == self.c1 {
            self.c0
        } else {
            self.c0 + self.slope() * (r - self.r0)
        }
    }

    /// Integral of 1/c from r0 to r, exact for linear c.
    fn time_from_start(&self, r: f64) -> f64 {
        let d = r - self.r0;
        if self.c0 == self.c1 {
            d / self.c0
        } else {
            let s = self.slope();
            (s * d / self.c0).ln_1p() / s
        }
    }
}

/// A radial interval on which V^eps is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub r0: f64,
    pub r1: f64,
    pub v: f64,
    /// Largest slowness 1/c_o on the interval.
    pub max_slowness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    r0: f64,
    r1: f64,
    v: f64,
}

/// Immutable stratified-sphere configuration.
#[derive(Debug, Clone)]
pub struct Medium {
    spec: MediumSpec,
    pieces: Vec<Piece>,
    cumulative: Vec<f64>,
    total_time: f64,
    cells: Vec<Cell>,
}

impl Medium {
    pub fn new(spec: MediumSpec) -> Result<Self> {
        let radius = spec.radius;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("radius must be positive, got {radius}")));
        }
        if !(spec.epsilon > 0.0 && spec.epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {}", spec.epsilon)));
        }
        if !(spec.kappa >= 0.0 && spec.kappa.is_finite()) {
            return Err(Error::Domain(format!("kappa must be >= 0, got {}", spec.kappa)));
        }
        if !(spec.r_core > 0.0 && spec.r_core < radius) {
            return Err(Error::Domain(format!("r_core must lie in (0, {radius}), got {}", spec.r_core)));
        }
        let pieces = build_pieces(&spec.smooth, radius)?;
        let core: Vec<&Piece> = pieces.iter().filter(|p| p.r0 < spec.r_core).collect();
        let c_core = core[0].c0;
        if core.iter().any(|p| {
            let hi = p.r1.min(spec.r_core);
            p.c0 != c_core || (p.speed(hi) - c_core).abs() > 1e-14 * c_core
        }) {
            return Err(Error::Domain(format!("background speed must be constant on the core [0, {}]", spec.r_core)));
        }
        let mut cumulative = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for p in &pieces {
            cumulative.push(acc);
            acc += p.time_from_start(p.r1);
        }
        let cells = build_cells(&spec, radius)?;
        let mut medium = Self { spec, pieces, cumulative, total_time: acc, cells };
        medium.check_positive_slowness()?;
        medium.cells.shrink_to_fit();
        Ok(medium)
    }

    fn check_positive_slowness(&self) -> Result<()> {
        for cell in &self.cells {
            if cell.v >= 0.0 {
                continue;
            }
            let c_max = self
                .pieces
                .iter()
                .filter(|p| p.r1 > cell.r0 && p.r0 < cell.r1)
                .map(|p| p.speed(p.r0.max(cell.r0)).max(p.speed(p.r1.min(cell.r1))))
                .fold(0.0, f64::max);
            if 1.0 / (c_max * c_max) + cell.v <= 0.0 {
                return Err(Error::Domain(format!(
                    "total slowness squared 1/c_o^2 + V is not positive on [{}, {}]",
                    cell.r0, cell.r1
                )));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &MediumSpec {
        &self.spec
    }
    pub fn radius(&self) -> f64 {
        self.spec.radius
    }
    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }
    pub fn kappa(&self) -> f64 {
        self.spec.kappa
    }
    pub fn r_core(&self) -> f64 {
        self.spec.r_core
    }
    pub fn fluctuation_kind(&self) -> &'static str {
        self.spec.fluctuation.kind()
    }

    fn piece_index(&self, r: f64) -> usize {
        self.pieces.partition_point(|p| p.r1 <= r).min(self.pieces.len() - 1)
    }

    /// Background speed c_o(r); radii outside [0, R_o] are clamped.
    pub fn speed(&self, r: f64) -> f64 {
        let r = r.clamp(0.0, self.radius());
        self.pieces[self.piece_index(r)].speed(r)
    }

    /// c_o(r) from the piece containing `inside`: the one-sided limit at a
    /// jump, for integrators that stop at breakpoints.
    pub fn speed_beside(&self, r: f64, inside: f64) -> f64 {
        let inside = inside.clamp(0.0, self.radius());
        self.pieces[self.piece_index(inside)].speed(r)
    }

    pub fn surface_speed(&self) -> f64 {
        let last = self.pieces.last().expect("profile has pieces");
        last.c1
    }

    /// Travel time from the center to r.
    fn time_from_center(&self, r: f64) -> f64 {
        let i = self.piece_index(r);
        self.cumulative[i] + self.pieces[i].time_from_start(r)
    }

    /// tau(r, R_o) without range checks (r is clamped).
    pub fn tau_to_surface(&self, r: f64) -> f64 {
        let r = r.clamp(0.0, self.radius());
        (self.total_time - self.time_from_center(r)).max(0.0)
    }

    /// tau(0, R_o).
    pub fn total_travel_time(&self) -> f64 {
        self.total_time
    }

    /// Integral of 1/c_o from `r` to `r_ref`.
    pub fn travel_time(&self, r: f64, r_ref: f64) -> Result<f64> {
        if !(0.0 <= r && r <= r_ref && r_ref <= self.radius()) {
            return Err(Error::Domain(format!(
                "travel_time needs 0 <= r <= r_ref <= {}, got r = {r}, r_ref = {r_ref}",
                self.radius()
            )));
        }
        if r == r_ref {
            return Ok(0.0);
        }
        Ok(self.time_from_center(r_ref) - self.time_from_center(r))
    }

    /// Surface reflectivity (1 - kappa c_o(R_o)) / (1 + kappa c_o(R_o)).
    pub fn gamma_surface(&self) -> f64 {
        let kc = self.kappa() * self.surface_speed();
        (1.0 - kc) / (1.0 + kc)
    }

    /// V^eps(r); zero outside the declared support and inside the core.
    pub fn slowness_perturbation(&self, r: f64) -> f64 {
        if r < self.r_core() {
            return 0.0;
        }
        let i = self.cells.partition_point(|c| c.r1 <= r);
        match self.cells.get(i) {
            Some(c) if c.r0 <= r && r < c.r1 => c.v,
            _ => 0.0,
        }
    }

    /// 1/c^2 = 1/c_o^2 + V^eps.
    pub fn total_slowness_squared(&self, r: f64) -> f64 {
        let c = self.speed(r);
        1.0 / (c * c) + self.slowness_perturbation(r)
    }

    /// Breakpoints of either c_o or V^eps strictly inside (r_from, r_to).
    pub fn breakpoints(&self, r_from: f64, r_to: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .pieces
            .iter()
            .map(|p| p.r0)
            .chain(self.cells.iter().flat_map(|c| [c.r0, c.r1]))
            .filter(|&x| x > r_from && x < r_to)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Partition of [r_from, r_to] into intervals of constant V^eps that do
    /// not straddle any background breakpoint.
    pub fn segments(&self, r_from: f64, r_to: f64) -> Vec<Segment> {
        let mut edges = vec![r_from];
        edges.extend(self.breakpoints(r_from, r_to));
        edges.push(r_to);
        edges
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let p = &self.pieces[self.piece_index(mid)];
                let c_min = p.speed(w[0].max(p.r0)).min(p.speed(w[1].min(p.r1)));
                Segment { r0: w[0], r1: w[1], v: self.slowness_perturbation(mid), max_slowness: 1.0 / c_min }
            })
            .collect()
    }

    /// Largest 1/c_o over the whole ball.
    pub fn max_slowness(&self) -> f64 {
        self.pieces.iter().map(|p| 1.0 / p.c0.min(p.c1)).fold(0.0, f64::max)
    }

    /// True when c_o has no jumps (the asymptotic theory assumes this).
    pub fn background_is_continuous(&self) -> bool {
        self.pieces.windows(2).all(|w| (w[0].c1 - w[1].c0).abs() <= 1e-12 * w[0].c1)
    }

    /// True when V^eps vanishes identically.
    pub fn is_unperturbed(&self) -> bool {
        self.cells.iter().all(|c| c.v == 0.0)
    }
}

fn build_pieces(spec: &SmoothProfileSpec, radius: f64) -> Result<Vec<Piece>> {
    let pieces = match spec {
        SmoothProfileSpec::Constant { speed } => vec![Piece { r0: 0.0, r1: radius, c0: *speed, c1: *speed }],
        SmoothProfileSpec::Layers { layers } => {
            if layers.is_empty() {
                return Err(Error::Domain("layered profile needs at least one layer".into()));
            }
            let mut expected = 0.0;
            for l in layers {
                if l.r_lo != expected || l.r_hi <= l.r_lo {
                    return Err(Error::Domain(format!(
                        "layer boundaries must increase and be contiguous from 0; \
                         layer [{}, {}] does not start at {expected}",
                        l.r_lo, l.r_hi
                    )));
                }
                expected = l.r_hi;
            }
            if (expected - radius).abs() > 1e-12 * radius {
                return Err(Error::Domain(format!("layers end at {expected} but the surface radius is {radius}")));
            }
            layers.iter().map(|l| Piece { r0: l.r_lo, r1: l.r_hi, c0: l.speed, c1: l.speed }).collect()
        }
        SmoothProfileSpec::Sampled { radii, speeds } => {
            if radii.len() < 2 || radii.len() != speeds.len() {
                return Err(Error::Domain("sampled profile needs >= 2 nodes and matching speed values".into()));
            }
            if radii[0] != 0.0 || (radii[radii.len() - 1] - radius).abs() > 1e-12 * radius {
                return Err(Error::Domain(format!("sampled profile must span [0, {radius}]")));
            }
            if radii.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Domain("sampled radii must strictly increase".into()));
            }
            radii
                .windows(2)
                .zip(speeds.windows(2))
                .map(|(r, c)| Piece { r0: r[0], r1: r[1], c0: c[0], c1: c[1] })
                .collect()
        }
    };
    if pieces.iter().any(|p| !(p.c0 > 0.0 && p.c1 > 0.0 && p.c0.is_finite() && p.c1.is_finite())) {
        return Err(Error::Domain("background speed must be positive everywhere".into()));
    }
    let mut pieces = pieces;
    if let Some(last) = pieces.last_mut() {
        last.r1 = radius;
    }
    Ok(pieces)
}

fn build_cells(spec: &MediumSpec, radius: f64) -> Result<Vec<Cell>> {
    let check_support = |lo: f64, hi: f64| -> Result<()> {
        if !(lo >= spec.r_core && hi <= radius && lo < hi) {
            return Err(Error::Domain(format!(
                "fluctuation support [{lo}, {hi}] must lie inside [r_core = {}, {radius}]",
                spec.r_core
            )));
        }
        Ok(())
    };
    let mut cells = match &spec.fluctuation {
        FluctuationSpec::None => Vec::new(),
        FluctuationSpec::Layered { layers } => {
            let mut cells = Vec::with_capacity(layers.len());
            for l in layers {
                check_support(l.r_lo, l.r_hi)?;
                if !l.amplitude.is_finite() {
                    return Err(Error::Domain("fluctuation amplitude must be finite".into()));
                }
                cells.push(Cell { r0: l.r_lo, r1: l.r_hi, v: l.amplitude });
            }
            cells.sort_by(|a, b| a.r0.total_cmp(&b.r0));
            if cells.windows(2).any(|w| w[1].r0 < w[0].r1) {
                return Err(Error::Domain("fluctuation layers overlap".into()));
            }
            cells
        }
        FluctuationSpec::StationaryRandom { amplitude, correlation_length, r_lo, r_hi } => {
            check_support(*r_lo, *r_hi)?;
            if !(*correlation_length > 0.0 && amplitude.is_finite()) {
                return Err(Error::Domain("random fluctuation needs a positive correlation length".into()));
            }
            let width = correlation_length * spec.epsilon;
            let k_lo = (r_lo / width).floor() as i64;
            let k_hi = (r_hi / width).ceil() as i64;
            (k_lo..k_hi)
                .filter_map(|k| {
                    let r0 = (k as f64 * width).max(*r_lo);
                    let r1 = ((k + 1) as f64 * width).min(*r_hi);
                    (r1 > r0).then(|| Cell {
                        r0,
                        r1,
                        v: amplitude * (2.0 * counter_uniform(spec.seed, &[k as u64]) - 1.0),
                    })
                })
                .collect()
        }
    };
    cells.retain(|c| c.r1 > c.r0);
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layered_two_speed() -> Medium {
        Medium::new(MediumSpec {
            radius: 1.0,
            epsilon: 0.01,
            kappa: 0.0,
            r_core: 0.2,
            smooth: SmoothProfileSpec::Layers {
                layers: vec![
                    SpeedLayer { r_lo: 0.0, r_hi: 0.5, speed: 1.0 },
                    SpeedLayer { r_lo: 0.5, r_hi: 1.0, speed: 2.0 },
                ],
            },
            fluctuation: FluctuationSpec::None,
            seed: 0,
        })
        .unwrap()
    }

    #[test]
    fn travel_time_examples() {
        let unit = Medium::new(MediumSpec::homogeneous(1.0, 0.01, 0.0)).unwrap();
        assert_eq!(unit.travel_time(0.0, 1.0).unwrap(), 1.0);
        let two = Medium::new(MediumSpec::homogeneous(2.0, 0.01, 0.0)).unwrap();
        assert_eq!(two.travel_time(0.0, 1.0).unwrap(), 0.5);
        let layered = layered_two_speed();
        assert!((layered.travel_time(0.0, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(layered.travel_time(0.7, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn travel_time_rejects_bad_radii() {
        let m = layered_two_speed();
        assert!(matches!(m.travel_time(0.6, 0.5), Err(Error::Domain(_))));
        assert!(matches!(m.travel_time(-0.1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(m.travel_time(0.1, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn linear_profile_travel_time_matches_quadrature() {
        let m = Medium::new(MediumSpec {
            smooth: SmoothProfileSpec::Sampled { radii: vec![0.0, 0.3, 1.0], speeds: vec![1.6, 1.6, 1.0] },
            r_core: 0.3,
            ..MediumSpec::homogeneous(1.0, 0.02, 0.1)
        })
        .unwrap();
        let (x, w) = crate::quadrature::composite_gauss(0.3, 1.0, 0.05, 8);
        let q: f64 = x.iter().zip(&w).map(|(&r, &w)| w / (1.6 - 0.6 * (r - 0.3) / 0.7)).sum();
        let exact = m.travel_time(0.3, 1.0).unwrap();
        assert!((q - exact).abs() < 1e-12, "{q} vs {exact}");
        assert!((m.travel_time(0.0, 0.3).unwrap() - 0.3 / 1.6).abs() < 1e-15);
    }

    #[test]
    fn gamma_examples() {
        let mut spec = MediumSpec::homogeneous(1.0, 0.01, 0.0);
        assert_eq!(Medium::new(spec.clone()).unwrap().gamma_surface(), 1.0);
        spec.kappa = 1.0;
        assert_eq!(Medium::new(spec.clone()).unwrap().gamma_surface(), 0.0);
        spec.kappa = 3.0;
        assert_eq!(Medium::new(spec).unwrap().gamma_surface(), -0.5);
    }

    #[test]
    fn slowness_perturbation_examples() {
        let none = Medium::new(MediumSpec::homogeneous(1.0, 0.01, 0.0)).unwrap();
        assert_eq!(none.slowness_perturbation(0.5), 0.0);
        let layered = Medium::new(MediumSpec::homogeneous(1.0, 0.01, 0.0).with_fluctuation(FluctuationSpec::Layered {
            layers: vec![FluctuationLayer { r_lo: 0.4, r_hi: 0.6, amplitude: 0.1 }],
        }))
        .unwrap();
        assert_eq!(layered.slowness_perturbation(0.5), 0.1);
        assert_eq!(layered.slowness_perturbation(0.1), 0.0);
        assert_eq!(layered.slowness_perturbation(0.7), 0.0);
    }

    #[test]
    fn random_realization_is_frozen_and_bounded() {
        let spec = MediumSpec {
            seed: 11,
            ..MediumSpec::homogeneous(1.0, 0.02, 0.1).with_fluctuation(FluctuationSpec::StationaryRandom {
                amplitude: 0.3,
                correlation_length: 1.0,
                r_lo: 0.3,
                r_hi: 0.9,
            })
        };
        let a = Medium::new(spec.clone()).unwrap();
        let b = Medium::new(spec).unwrap();
        for i in 0..200 {
            let r = i as f64 / 200.0;
            let v = a.slowness_perturbation(r);
            assert_eq!(v.to_bits(), a.slowness_perturbation(r).to_bits());
            assert_eq!(v.to_bits(), b.slowness_perturbation(r).to_bits());
            assert!(v.abs() <= 0.3);
            if !(0.3..0.9).contains(&r) {
                assert_eq!(v, 0.0);
            }
        }
        // cells of width eps
        let segs = a.segments(0.3, 0.9);
        assert!(segs.iter().all(|s| s.r1 - s.r0 <= 0.02 + 1e-12));
    }

    #[test]
    fn invalid_media_are_rejected() {
        let base = MediumSpec::homogeneous(1.0, 0.01, 0.0);
        let mut s = base.clone();
        s.kappa = -1.0;
        assert!(Medium::new(s).is_err());
        let mut s = base.clone();
        s.r_core = 1.2;
        assert!(Medium::new(s).is_err());
        let s = base.clone().with_fluctuation(FluctuationSpec::Layered {
            layers: vec![FluctuationLayer { r_lo: 0.1, r_hi: 0.3, amplitude: 0.1 }],
        });
        assert!(Medium::new(s).is_err(), "support must exclude the core");
        let s = base.clone().with_fluctuation(FluctuationSpec::Layered {
            layers: vec![FluctuationLayer { r_lo: 0.4, r_hi: 0.5, amplitude: -1.5 }],
        });
        assert!(Medium::new(s).is_err(), "negative total slowness");
        let mut s = base;
        s.smooth = SmoothProfileSpec::Layers {
            layers: vec![
                SpeedLayer { r_lo: 0.0, r_hi: 0.1, speed: 1.0 },
                SpeedLayer { r_lo: 0.1, r_hi: 1.0, speed: 1.2 },
            ],
        };
        assert!(Medium::new(s).is_err(), "core must be homogeneous");
    }

    #[test]
    fn segments_snap_to_all_breakpoints() {
        let m = Medium::new(MediumSpec {
            smooth: SmoothProfileSpec::Layers {
                layers: vec![
                    SpeedLayer { r_lo: 0.0, r_hi: 0.5, speed: 1.0 },
                    SpeedLayer { r_lo: 0.5, r_hi: 1.0, speed: 1.0 },
                ],
            },
            ..MediumSpec::homogeneous(1.0, 0.01, 0.0).with_fluctuation(FluctuationSpec::Layered {
                layers: vec![FluctuationLayer { r_lo: 0.4, r_hi: 0.6, amplitude: 0.1 }],
            })
        })
        .unwrap();
        let edges: Vec<f64> = m.segments(0.2, 1.0).iter().map(|s| s.r0).collect();
        assert_eq!(edges, vec![0.2, 0.4, 0.5, 0.6]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn travel_time_is_additive(a in 0.0..1.0f64, b in 0.0..1.0f64) {
                let m = Medium::new(MediumSpec {
                    smooth: SmoothProfileSpec::Sampled {
                        radii: vec![0.0, 0.2, 0.55, 1.0],
                        speeds: vec![1.5, 1.5, 1.2, 0.9],
                    },
                    ..MediumSpec::homogeneous(1.0, 0.02, 0.1)
                }).unwrap();
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let whole = m.travel_time(lo, 1.0).unwrap();
                let split = m.travel_time(lo, hi).unwrap() + m.travel_time(hi, 1.0).unwrap();
                prop_assert!((whole - split).abs() < 1e-12);
            }

            #[test]
            fn gamma_decreases_with_kappa(k1 in 0.0..10.0f64, dk in 1e-6..10.0f64) {
                let g = |k| Medium::new(MediumSpec::homogeneous(1.3, 0.02, k)).unwrap().gamma_surface();
                prop_assert!(g(k1 + dk) < g(k1));
                prop_assert!(g(k1) <= 1.0 && g(k1) > -1.0);
            }
        }
    }
}
