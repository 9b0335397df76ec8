//! Composite Gauss–Legendre rules on geometric and uniform panels.
//!
//! Integrands here are power-law singular at the origin and decay
//! algebraically, so panels double in width away from zero and the far tail
//! is closed with a single node that integrates a pure power law exactly.

use gauss_quad::GaussLegendre;
use std::num::NonZeroUsize;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct Legendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Legendre {
    pub fn new(n: usize) -> Self {
        let gl = GaussLegendre::new(NonZeroUsize::new(n).expect("rule size must be positive"));
        let (nodes, weights) = gl.as_node_weight_pairs().iter().copied().unzip();
        Legendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Appends the mapped rule for [a, b].
    pub fn panel(&self, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            out.push((c + h * x, h * w));
        }
    }

    /// Appends panels [lo, 2lo], [2lo, 4lo], ... up to `hi`.
    pub fn geometric(&self, lo: f64, hi: f64, out: &mut Vec<(f64, f64)>) {
        let mut a = lo;
        while a < hi {
            let b = (2.0 * a).min(hi);
            self.panel(a, b, out);
            a = b;
        }
    }

    /// Appends `count` panels of width `width` starting at `start`.
    pub fn uniform(&self, start: f64, width: f64, count: usize, out: &mut Vec<(f64, f64)>) {
        for i in 0..count {
            let a = start + width * i as f64;
            self.panel(a, a + width, out);
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }
}

/// Node set for a non-oscillatory integral over (0, inf) whose integrand
/// decays like `y^{-p}` with `p > 1`.
///
/// Covers [lo, hi] with doubling panels, adds one midpoint node for (0, lo),
/// and closes [hi, inf) with the node `(hi, hi/(p-1))`.
pub fn half_line(rule: &Legendre, lo: f64, hi: f64, decay: f64) -> Vec<(f64, f64)> {
    assert!(decay > 1.0, "tail exponent must exceed 1");
    let mut out = vec![(0.5 * lo, lo)];
    rule.geometric(lo, hi, &mut out);
    out.push((hi, hi / (decay - 1.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_is_exact_for_polynomials() {
        let r = Legendre::new(6);
        let v = r.integrate(0.0, 2.0, |x| x.powi(11));
        assert!((v - 2f64.powi(12) / 12.0).abs() < 1e-10);
    }

    #[test]
    fn half_line_handles_slow_power_tails() {
        let r = Legendre::new(8);
        // integral of 1/(1+y)^{1.2} over (0, inf) is 1/0.2 = 5
        let nodes = half_line(&r, 1e-12, 1e12, 1.2);
        let v: f64 = nodes.iter().map(|(y, w)| w * (1.0 + y).powf(-1.2)).sum();
        assert!((v - 5.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn geometric_panels_resolve_integrable_singularity() {
        let r = Legendre::new(8);
        let mut nodes = vec![];
        r.geometric(1e-30, 1.0, &mut nodes);
        let v: f64 = nodes.iter().map(|(y, w)| w * y.powf(-0.6)).sum();
        assert!((v - 2.5).abs() < 1e-9, "{v}");
    }
}
