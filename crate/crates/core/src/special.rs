//! Special functions not covered by `statrs`: the Riemann zeta function on
//! the real line (s > 0) and the exact transform of a discrete Pareto law.

use num_complex::Complex64;
use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;

const BERNOULLI_2K: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Riemann zeta for real `s > 0`, `s != 1`, by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 0.0 && s != 1.0, "zeta: s = {s} outside supported range");
    if s > 60.0 {
        return 1.0 + 2f64.powf(-s) + 3f64.powf(-s);
    }
    let n = 16.0f64;
    let mut sum = 0.0;
    for k in 1..16 {
        sum += (k as f64).powf(-s);
    }
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s(s+1)...(s+2k-2) over (2k)!
    let mut coef = s / 2.0;
    let mut npow = n.powf(-s - 1.0);
    for (k, b) in BERNOULLI_2K.iter().enumerate() {
        sum += b * coef * npow;
        let k2 = 2.0 * (k as f64 + 1.0);
        coef *= (s + k2 - 1.0) * (s + k2) / ((k2 + 1.0) * (k2 + 2.0));
        npow /= n * n;
    }
    sum
}

/// Precomputed expansion of `Li_s(e^{ix})` around `x = 0` for one `s` in (0,1):
/// `Li_s(e^{ix}) = Gamma(1-s) (-ix)^{s-1} + sum_k zeta(s-k) (ix)^k / k!`,
/// with the negative-argument zeta values taken from the functional equation.
#[derive(Clone, Debug)]
pub struct ParetoCf {
    alpha: f64,
    lead: f64,
    coefs: Vec<f64>,
}

impl ParetoCf {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
        let s = alpha;
        let base = 2.0 * (2.0 * PI).powf(s - 1.0);
        let mut coefs = vec![zeta(s)];
        for k in 1..400 {
            let kf = k as f64;
            let g = (ln_gamma(1.0 - s + kf) - ln_gamma(kf + 1.0)).exp();
            // coefficient of (i x / 2pi)^k
            let c = base * (PI * (s - kf) / 2.0).sin() * g * zeta(1.0 - s + kf);
            coefs.push(c);
            if c.abs() * 0.5f64.powi(k) < 1e-18 && k > 8 {
                break;
            }
        }
        ParetoCf { alpha, lead: gamma(1.0 - s), coefs }
    }

    /// `Li_alpha(e^{ix})` for `x` in (0, pi].
    fn polylog(&self, x: f64) -> Complex64 {
        let s = self.alpha;
        let lead = self.lead * x.powf(s - 1.0) * Complex64::from_polar(1.0, -PI * (s - 1.0) / 2.0);
        let z = Complex64::new(0.0, x / (2.0 * PI));
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coefs.iter().rev() {
            acc = acc * z + c;
        }
        lead + acc
    }

    /// Exact `1 - P(x)` for the discrete Pareto law `P(Z >= n) = n^{-alpha}`,
    /// via `1 - P(x) = (e^{-ix} - 1) Li_alpha(e^{ix})`.
    pub fn one_minus(&self, x: f64) -> Complex64 {
        // reduce |x| so tiny negative arguments do not round to 2 pi
        let mut y = x.abs().rem_euclid(2.0 * PI);
        let mut conj = x < 0.0;
        if y > PI {
            y = 2.0 * PI - y;
            conj = !conj;
        }
        if y == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let h = (y / 2.0).sin();
        let factor = Complex64::new(-2.0 * h * h, -y.sin());
        let v = factor * self.polylog(y);
        if conj {
            v.conj()
        } else {
            v
        }
    }
}

/// One-off evaluation of [`ParetoCf::one_minus`].
pub fn pareto_one_minus_cf(alpha: f64, x: f64) -> Complex64 {
    ParetoCf::new(alpha).one_minus(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_known_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        // zeta(1/2)
        assert!((zeta(0.5) + 1.460_354_508_809_586_8).abs() < 1e-13);
    }

    #[test]
    fn cf_matches_direct_sum_at_moderate_x() {
        // the pmf tail beyond 2^22 is small for alpha = 0.7 at x = 1
        let alpha = 0.7;
        let x = 1.0;
        let n_max = 1u64 << 22;
        let mut p = Complex64::new(0.0, 0.0);
        for n in 1..=n_max {
            let nf = n as f64;
            let w = nf.powf(-alpha) - (nf + 1.0).powf(-alpha);
            p += Complex64::from_polar(w, x * nf);
        }
        let exact = pareto_one_minus_cf(alpha, x);
        let direct = Complex64::new(1.0, 0.0) - p;
        // oscillating tail is bounded by 2 (n_max)^{-alpha} / |1 - e^{ix}|
        assert!((exact - direct).norm() < 1e-4, "{exact} vs {direct}");
    }

    #[test]
    fn cf_matches_high_precision_polylog() {
        // (e^{-ix} - 1) Li_a(e^{ix}) evaluated at 30 digits
        let cases = [
            (0.3, 1e-6, 0.018330485977083442, -0.0093389560922029108),
            (0.3, 0.01, 0.28980433333006909, -0.14043127600033087),
            (0.3, 1.0, 0.99085629865021293, -0.20381126426540207),
            (0.3, 3.0, 1.1293553033407585, -0.01315254752222285),
            (0.6, 1e-6, 0.00032749989679365123, -0.0004488127484137514),
            (0.6, 0.01, 0.081769725265513624, -0.094110145829604303),
            (0.6, 1.0, 0.95285596861089506, -0.36646499218282302),
            (0.6, 3.0, 1.2467525355376993, -0.026377246947456915),
        ];
        for (a, x, re, im) in cases {
            let v = pareto_one_minus_cf(a, x);
            let want = Complex64::new(re, im);
            assert!((v - want).norm() < 1e-12 * want.norm(), "a={a} x={x}: {v} vs {want}");
        }
    }

    #[test]
    fn cf_is_conjugate_symmetric_and_periodic() {
        let a = pareto_one_minus_cf(0.3, 0.4);
        let b = pareto_one_minus_cf(0.3, -0.4);
        assert!((a - b.conj()).norm() < 1e-14);
        let c = pareto_one_minus_cf(0.3, 0.4 + 2.0 * PI);
        assert!((a - c).norm() < 1e-12);
    }
}
