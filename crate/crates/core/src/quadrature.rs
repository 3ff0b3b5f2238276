//! Gauss–Legendre rules on [-1, 1] and composite rules on arbitrary intervals.

use std::f64::consts::PI;

/// An n-point Gauss–Legendre rule on [-1, 1]; exact for polynomials of
/// degree <= 2n - 1. Nodes ascend.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_and_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }

    /// Maps the rule onto [a, b].
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|&t| mid + half * t).collect();
        let w = self.weights.iter().map(|&w| half * w).collect();
        (x, w)
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
pub(crate) fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// Composite Gauss–Legendre nodes and weights on [a, b] with panels no
/// wider than `max_panel` and `points` nodes per panel.
pub fn composite_gauss(a: f64, b: f64, max_panel: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = (((b - a) / max_panel).ceil() as usize).max(1);
    let rule = GaussLegendre::new(points);
    let width = (b - a) / panels as f64;
    let mut x = Vec::with_capacity(panels * points);
    let mut w = Vec::with_capacity(panels * points);
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { lo + width };
        let (px, pw) = rule.on_interval(lo, hi);
        x.extend(px);
        w.extend(pw);
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_are_positive() {
        for n in 1..40 {
            let g = GaussLegendre::new(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            assert!(g.weights.iter().all(|&w| w > 0.0));
            assert!(g.nodes.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn integrates_polynomials_exactly_up_to_degree() {
        let g = GaussLegendre::new(6);
        for d in 0..=g.exact_degree() {
            let q: f64 = g.nodes.iter().zip(&g.weights).map(|(&x, &w)| w * x.powi(d as i32)).sum();
            let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {d}: {q} vs {exact}");
        }
    }

    #[test]
    fn composite_rule_integrates_sine() {
        let (x, w) = composite_gauss(0.0, PI, 0.3, 4);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.sin()).sum();
        assert!((s - 2.0).abs() < 1e-10);
    }
}
