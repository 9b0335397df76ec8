//! Sample moments, jackknife errors, and a Kolmogorov–Smirnov normality check.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Delete-one jackknife standard error of the mean of `x`.
///
/// For a plain mean the jackknife coincides with `sd / sqrt(n)`; the explicit
/// form is kept so the same routine serves ratio statistics.
pub fn jackknife_se<F: Fn(&[f64]) -> f64>(x: &[f64], stat: F) -> f64 {
    let n = x.len();
    let mut buf = Vec::with_capacity(n.saturating_sub(1));
    let mut loo = Vec::with_capacity(n);
    for i in 0..n {
        buf.clear();
        buf.extend(x[..i].iter().chain(&x[i + 1..]));
        loo.push(stat(&buf));
    }
    let m = mean(&loo);
    let s: f64 = loo.iter().map(|v| (v - m) * (v - m)).sum();
    (s * (n as f64 - 1.0) / n as f64).sqrt()
}

/// Jackknife standard error of `mean(x)` in O(n).
pub fn jackknife_se_mean(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let total: f64 = x.iter().sum();
    let loo: Vec<f64> = x.iter().map(|v| (total - v) / (n - 1.0)).collect();
    let m = mean(&loo);
    let s: f64 = loo.iter().map(|v| (v - m) * (v - m)).sum();
    (s * (n - 1.0) / n).sqrt()
}

/// Standardized third moment.
pub fn skewness(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Standardized fourth moment minus 3.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Kolmogorov–Smirnov distance between the empirical law of `x` and N(0,1).
pub fn ks_distance_normal(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Critical KS distance at the 1% level (Stephens' small-sample correction).
pub fn ks_critical_1pct(n: usize) -> f64 {
    let r = (n as f64).sqrt();
    1.628 / (r + 0.12 + 0.11 / r)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Gaussianity {
    pub samples: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_distance: f64,
    pub ks_critical: f64,
    pub degenerate: bool,
    pub pass: bool,
}

/// Standardizes by sample mean and SD, then runs the KS check at 1%.
pub fn gaussianity_test(samples: &[f64]) -> Gaussianity {
    let n = samples.len();
    let crit = ks_critical_1pct(n.max(1));
    let sd = if n > 1 { variance(samples).sqrt() } else { 0.0 };
    if n < 2 || !(sd > 1e-300) {
        return Gaussianity {
            samples: n,
            skewness: f64::NAN,
            excess_kurtosis: f64::NAN,
            ks_distance: f64::NAN,
            ks_critical: crit,
            degenerate: true,
            pass: false,
        };
    }
    let m = mean(samples);
    let z: Vec<f64> = samples.iter().map(|v| (v - m) / sd).collect();
    let ks = ks_distance_normal(&z);
    Gaussianity {
        samples: n,
        skewness: skewness(samples),
        excess_kurtosis: excess_kurtosis(samples),
        ks_distance: ks,
        ks_critical: crit,
        degenerate: false,
        pass: ks < crit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;
    use rand_distr::StandardNormal;

    #[test]
    fn jackknife_of_mean_equals_textbook_se() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
        let a = jackknife_se(&x, mean);
        let b = jackknife_se_mean(&x);
        let c = (variance(&x) / x.len() as f64).sqrt();
        assert!((a - c).abs() < 1e-12 && (b - c).abs() < 1e-12);
    }

    #[test]
    fn ks_distance_of_perfect_quantiles_is_small() {
        let n = 1000;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                Normal::standard().inverse_cdf(p)
            })
            .collect();
        assert!(ks_distance_normal(&x) <= 0.5 / n as f64 + 1e-9);
    }

    #[test]
    fn gaussian_samples_pass_and_constants_are_degenerate() {
        let mut rng = crate::rng::chacha(3);
        let x: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let g = gaussianity_test(&x);
        assert!(g.pass, "{g:?}");
        assert!(g.skewness.abs() < 0.4);
        let c = gaussianity_test(&[2.0; 200]);
        assert!(c.degenerate && !c.pass);
    }

    #[test]
    fn uniform_samples_fail() {
        let x: Vec<f64> = (0..2000).map(|i| (i as f64 / 2000.0).powi(4)).collect();
        assert!(!gaussianity_test(&x).pass);
    }
}
