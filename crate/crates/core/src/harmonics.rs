//! Spherical harmonics (Condon–Shortley phase), angular quadrature, source
//! projection and Legendre series in the inter-point angle.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{legendre_and_derivative, GaussLegendre};

/// (l, m) with |m| <= l.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub l: usize,
    pub m: i64,
}

impl ModeIndex {
    pub fn new(l: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(Error::Domain(format!("|m| must not exceed l, got l={l}, m={m}")));
        }
        Ok(Self { l, m })
    }

    /// Position in the packed table ordering (0,0), (1,-1), (1,0), (1,1), ...
    pub fn packed(&self) -> usize {
        self.l * self.l + (self.l as i64 + self.m) as usize
    }

    /// All modes with l <= l_max in packed order.
    pub fn all(l_max: usize) -> impl Iterator<Item = ModeIndex> {
        (0..=l_max).flat_map(|l| (-(l as i64)..=l as i64).map(move |m| ModeIndex { l, m }))
    }
}

fn check_x(x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("Legendre argument must lie in [-1, 1], got {x}")));
    }
    Ok(())
}

/// Unnormalized P_l^m(x) with the Condon–Shortley phase, by upward
/// recursion in l from the diagonal term. Negative m uses
/// P_l^{-m} = (-1)^m (l-m)!/(l+m)! P_l^m.
pub fn associated_legendre(l: usize, m: i64, x: f64) -> Result<f64> {
    ModeIndex::new(l, m)?;
    check_x(x)?;
    let ma = m.unsigned_abs() as usize;
    let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = 1.0;
    for i in 0..ma {
        pmm *= -((2 * i + 1) as f64) * somx2;
    }
    let value = if l == ma {
        pmm
    } else {
        let mut p0 = pmm;
        let mut p1 = x * (2 * ma + 1) as f64 * pmm;
        for ll in (ma + 2)..=l {
            let p2 = (x * (2 * ll - 1) as f64 * p1 - (ll + ma - 1) as f64 * p0) / (ll - ma) as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    if m >= 0 {
        return Ok(value);
    }
    let ratio: f64 = ((l - ma + 1)..=(l + ma)).map(|k| 1.0 / k as f64).product();
    let sign = if ma.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * ratio * value)
}

/// sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m(x) for m >= 0, computed with the
/// normalized recurrence so no factorials overflow.
fn normalized_legendre(l: usize, m: usize, x: f64) -> f64 {
    let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for k in 1..=m {
        pmm *= -((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * somx2;
    }
    if l == m {
        return pmm;
    }
    let mut p0 = pmm;
    let mut p1 = x * ((2 * m + 3) as f64).sqrt() * pmm;
    for ll in (m + 2)..=l {
        let (lf, mf) = (ll as f64, m as f64);
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let p2 = a * (x * p1 - b * p0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Orthonormal Y_{l,m}(theta, phi).
pub fn spherical_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    ModeIndex::new(l, m)?;
    let ma = m.unsigned_abs() as usize;
    let p = normalized_legendre(l, ma, theta.cos().clamp(-1.0, 1.0));
    let y = Complex64::from_polar(p, ma as f64 * phi);
    if m >= 0 {
        Ok(y)
    } else if ma.is_multiple_of(2) {
        Ok(y.conj())
    } else {
        Ok(-y.conj())
    }
}

/// Real orthonormal harmonics: sqrt(2) N P cos(m phi) for m > 0,
/// sqrt(2) N P sin(|m| phi) for m < 0 (no Condon–Shortley sign).
pub fn real_spherical_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> Result<f64> {
    ModeIndex::new(l, m)?;
    let ma = m.unsigned_abs() as usize;
    let mut p = normalized_legendre(l, ma, theta.cos().clamp(-1.0, 1.0));
    if ma % 2 == 1 {
        p = -p;
    }
    Ok(match m {
        0 => p,
        m if m > 0 => std::f64::consts::SQRT_2 * p * (ma as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * p * (ma as f64 * phi).sin(),
    })
}

/// Gauss–Legendre in cos(theta) times a uniform periodic rule in phi.
#[derive(Debug, Clone)]
pub struct AngularGrid {
    rule: GaussLegendre,
    n_phi: usize,
}

/// One quadrature node on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereNode {
    pub theta: f64,
    pub phi: f64,
    pub weight: f64,
}

impl AngularGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::Config("angular grid needs at least one node per axis".into()));
        }
        Ok(Self { rule: GaussLegendre::new(n_theta), n_phi })
    }

    /// Smallest grid integrating products of harmonics with l <= l_max exactly.
    pub fn for_lmax(l_max: usize) -> Self {
        Self { rule: GaussLegendre::new(l_max + 1), n_phi: 2 * l_max + 1 }
    }

    pub fn n_theta(&self) -> usize {
        self.rule.len()
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    /// Largest l_max for which Y products are integrated exactly.
    pub fn supported_lmax(&self) -> usize {
        (self.n_theta() - 1).min((self.n_phi - 1) / 2)
    }

    pub fn ensure_supports(&self, l_max: usize) -> Result<()> {
        if self.supported_lmax() < l_max {
            return Err(Error::Config(format!(
                "angular grid {}x{} is too coarse for l_max = {l_max}; need n_theta >= {} and n_phi >= {}",
                self.n_theta(),
                self.n_phi,
                l_max + 1,
                2 * l_max + 1
            )));
        }
        Ok(())
    }

    pub fn nodes(&self) -> impl Iterator<Item = SphereNode> + '_ {
        let dphi = 2.0 * PI / self.n_phi as f64;
        self.rule.nodes.iter().zip(&self.rule.weights).flat_map(move |(&x, &w)| {
            (0..self.n_phi).map(move |j| SphereNode { theta: x.acos(), phi: j as f64 * dphi, weight: w * dphi })
        })
    }
}

/// Coefficients indexed by (l, m), l <= l_max, in packed order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable<T> {
    pub l_max: usize,
    pub values: Vec<T>,
}

impl<T: Copy> CoefficientTable<T> {
    pub fn get(&self, l: usize, m: i64) -> T {
        self.values[ModeIndex { l, m }.packed()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, T)> + '_ {
        ModeIndex::all(self.l_max).zip(self.values.iter().copied())
    }
}

/// g_{l,m} = integral of conj(Y_{l,m}) g over the sphere.
pub fn project_source<F>(g: F, l_max: usize, grid: &AngularGrid) -> Result<CoefficientTable<Complex64>>
where
    F: Fn(f64, f64) -> Complex64,
{
    grid.ensure_supports(l_max)?;
    let mut values = vec![Complex64::new(0.0, 0.0); (l_max + 1) * (l_max + 1)];
    for node in grid.nodes() {
        let gv = g(node.theta, node.phi) * node.weight;
        for mode in ModeIndex::all(l_max) {
            let y = spherical_harmonic(mode.l, mode.m, node.theta, node.phi)?;
            values[mode.packed()] += y.conj() * gv;
        }
    }
    Ok(CoefficientTable { l_max, values })
}

/// G_{l,m} = integral of |Y_{l,m}|^2 G over the sphere.
pub fn angular_weights<F>(density: F, l_max: usize, grid: &AngularGrid) -> Result<CoefficientTable<f64>>
where
    F: Fn(f64, f64) -> f64,
{
    grid.ensure_supports(l_max)?;
    let mut values = vec![0.0; (l_max + 1) * (l_max + 1)];
    for node in grid.nodes() {
        let g = density(node.theta, node.phi);
        if !(g >= 0.0) {
            return Err(Error::Domain(format!(
                "angular source density must be nonnegative, got {g} at theta={}, phi={}",
                node.theta, node.phi
            )));
        }
        for mode in ModeIndex::all(l_max) {
            let y = spherical_harmonic(mode.l, mode.m, node.theta, node.phi)?;
            values[mode.packed()] += y.norm_sqr() * g * node.weight;
        }
    }
    Ok(CoefficientTable { l_max, values })
}

/// Legendre polynomial P_l(x).
pub fn legendre(l: usize, x: f64) -> f64 {
    legendre_and_derivative(l, x).0
}

/// Gauss rule in cos(Omega) used for angle-pair expansions.
#[derive(Debug, Clone)]
pub struct LegendreGrid {
    pub rule: GaussLegendre,
}

impl LegendreGrid {
    pub fn new(n: usize) -> Self {
        Self { rule: GaussLegendre::new(n) }
    }

    /// Smallest grid whose projection is exact for series up to l_max.
    pub fn for_lmax(l_max: usize) -> Self {
        Self::new(l_max + 1)
    }

    /// Inter-point angles Omega at the nodes, ascending in cos(Omega).
    pub fn angles(&self) -> Vec<f64> {
        self.rule.nodes.iter().map(|x| x.acos()).collect()
    }

    pub fn cosines(&self) -> &[f64] {
        &self.rule.nodes
    }

    fn ensure_degree(&self, degree: usize) -> Result<()> {
        if self.rule.exact_degree() < degree {
            return Err(Error::Config(format!(
                "Legendre grid with {} nodes is exact to degree {}, need {degree}",
                self.rule.len(),
                self.rule.exact_degree()
            )));
        }
        Ok(())
    }
}

/// C(Omega) = sum_l C_l P_l(cos Omega) at the grid nodes.
pub fn legendre_expand(c_l: &[f64], grid: &LegendreGrid) -> Result<Vec<f64>> {
    let l_max = c_l.len().saturating_sub(1);
    grid.ensure_degree(2 * l_max)?;
    Ok(grid.cosines().iter().map(|&x| c_l.iter().enumerate().map(|(l, c)| c * legendre(l, x)).sum()).collect())
}

/// C_l = (2l+1)/2 * integral of C(Omega) P_l(cos Omega) d(cos Omega).
pub fn legendre_project(samples: &[f64], grid: &LegendreGrid, l: usize) -> Result<f64> {
    if samples.len() != grid.rule.len() {
        return Err(Error::Contract(format!("{} samples for a {}-node Legendre grid", samples.len(), grid.rule.len())));
    }
    grid.ensure_degree(2 * l)?;
    let s: f64 = samples
        .iter()
        .zip(grid.cosines().iter().zip(&grid.rule.weights))
        .map(|(c, (&x, &w))| c * legendre(l, x) * w)
        .sum();
    Ok(0.5 * (2 * l + 1) as f64 * s)
}
