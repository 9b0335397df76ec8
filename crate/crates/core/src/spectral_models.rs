//! Step distribution on N*^d and the log-characteristic function of its
//! operator-stable limit.

use crate::error::{Error, Result};
use crate::rng;
use crate::special::ParetoCf;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::sync::Arc;

/// Diagonal exponent `E = diag(1/alpha_1, ..., 1/alpha_d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentMatrix {
    pub alphas: Vec<f64>,
}

impl ExponentMatrix {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Config("at least one alpha is required".into()));
        }
        for (k, &a) in alphas.iter().enumerate() {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("alpha_{} = {a} must lie in (0,1)", k + 1)));
            }
        }
        Ok(ExponentMatrix { alphas })
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    /// Trace `q(E) = sum 1/alpha_k`.
    pub fn q(&self) -> f64 {
        self.alphas.iter().map(|a| 1.0 / a).sum()
    }

    /// `t^E x`.
    pub fn scale(&self, t: f64, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.alphas).map(|(xi, a)| xi * t.powf(1.0 / a)).collect()
    }
}

/// `q(E) > p`: local integrability of `|log psi|^{-p}` near the origin.
pub fn local_integrability_flag(exponent: &ExponentMatrix, p: f64) -> bool {
    exponent.q() > p
}

/// Default scale weight for a discrete Pareto axis with unit tail constant.
pub fn calibrated_gamma(alpha: f64) -> f64 {
    gamma(1.0 - alpha) * (PI * alpha / 2.0).cos()
}

/// Finite probability table on N*^d.
#[derive(Clone, Debug, PartialEq)]
pub struct PmfTable {
    points: Vec<Vec<i64>>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl PmfTable {
    pub fn new(entries: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        let d = entries.first().map(|e| e.0.len()).ok_or_else(|| Error::Config("empty pmf table".into()))?;
        let mut points = Vec::with_capacity(entries.len());
        let mut probs = Vec::with_capacity(entries.len());
        for (k, p) in entries {
            if k.len() != d {
                return Err(Error::Config("pmf table rows have inconsistent dimension".into()));
            }
            if k.iter().any(|&c| c < 1) {
                return Err(Error::Config(format!("pmf support point {k:?} is outside N*^d")));
            }
            if !(p >= 0.0) {
                return Err(Error::Config(format!("negative probability at {k:?}")));
            }
            if p > 0.0 {
                points.push(k);
                probs.push(p);
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("pmf table sums to {total}, not 1")));
        }
        for axis in 0..d {
            let g = points.iter().fold(0i64, |g, k| gcd(g, k[axis]));
            if g != 1 {
                return Err(Error::Config(format!(
                    "pmf support is periodic along axis {}: coordinates share the factor {g}",
                    axis + 1
                )));
            }
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(PmfTable { points, probs, cdf })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn support(&self) -> impl Iterator<Item = (&[i64], f64)> {
        self.points.iter().map(|k| k.as_slice()).zip(self.probs.iter().copied())
    }

    fn prob(&self, k: &[i64]) -> f64 {
        self.points.iter().position(|p| p == k).map_or(0.0, |i| self.probs[i])
    }

    fn invert(&self, u: f64) -> &[i64] {
        let total = *self.cdf.last().unwrap();
        let i = self.cdf.partition_point(|&c| c < u * total);
        &self.points[i.min(self.points.len() - 1)]
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub type LogPsiFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    ProductPareto,
    CustomPmf(PmfTable),
}

/// The pair (mu, nu): step law, limit weights, and the +-1 marginal parameter.
#[derive(Clone)]
pub struct SpectralModel {
    pub exponent: ExponentMatrix,
    pub gammas: Vec<f64>,
    pub family: Family,
    pub p: f64,
    log_psi_override: Option<LogPsiFn>,
    cf: Vec<ParetoCf>,
}

impl std::fmt::Debug for SpectralModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralModel")
            .field("exponent", &self.exponent)
            .field("gammas", &self.gammas)
            .field("family", &self.family)
            .field("p", &self.p)
            .field("custom_log_psi", &self.log_psi_override.is_some())
            .finish()
    }
}

impl SpectralModel {
    /// Product of discrete Pareto axes with calibrated weights.
    pub fn product_pareto(alphas: &[f64], p: f64) -> Result<Self> {
        let exponent = ExponentMatrix::new(alphas.to_vec())?;
        let gammas = alphas.iter().map(|&a| calibrated_gamma(a)).collect();
        Self::build(exponent, gammas, Family::ProductPareto, p)
    }

    /// Table-driven step law. `alphas`/`gammas` describe the claimed limit; the
    /// closed product form is used for `log psi` unless an evaluator is set.
    pub fn custom(table: PmfTable, alphas: &[f64], gammas: Option<Vec<f64>>, p: f64) -> Result<Self> {
        if table.dim() != alphas.len() {
            return Err(Error::Config("pmf table dimension differs from alphas".into()));
        }
        let exponent = ExponentMatrix::new(alphas.to_vec())?;
        let gammas = gammas.unwrap_or_else(|| alphas.iter().map(|&a| calibrated_gamma(a)).collect());
        Self::build(exponent, gammas, Family::CustomPmf(table), p)
    }

    fn build(exponent: ExponentMatrix, gammas: Vec<f64>, family: Family, p: f64) -> Result<Self> {
        if gammas.len() != exponent.dim() {
            return Err(Error::Config("gammas and alphas differ in length".into()));
        }
        if gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Config("gammas must be positive".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("p = {p} must lie in [0,1]")));
        }
        let cf = exponent.alphas.iter().map(|&a| ParetoCf::new(a)).collect();
        Ok(SpectralModel { exponent, gammas, family, p, log_psi_override: None, cf })
    }

    pub fn with_gammas(mut self, gammas: Vec<f64>) -> Result<Self> {
        if gammas.len() != self.dim() || gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Config("gammas must be positive, one per axis".into()));
        }
        self.gammas = gammas;
        Ok(self)
    }

    /// Replaces the closed product form of `log psi` by a user evaluator.
    pub fn with_log_psi(mut self, f: LogPsiFn) -> Self {
        self.log_psi_override = Some(f);
        self
    }

    pub fn dim(&self) -> usize {
        self.exponent.dim()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.exponent.alphas
    }

    /// True when `log psi` is a sum of per-axis terms.
    pub fn is_additive(&self) -> bool {
        self.log_psi_override.is_none()
    }

    /// Axis term `-gamma |y|^alpha (1 - i sgn(y) tan(pi alpha / 2))`.
    #[inline]
    pub fn log_psi_axis(&self, k: usize, y: f64) -> Complex64 {
        if y == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let a = self.exponent.alphas[k];
        let m = self.gammas[k] * y.abs().powf(a);
        Complex64::new(-m, m * y.signum() * (PI * a / 2.0).tan())
    }

    pub fn log_psi(&self, x: &[f64]) -> Complex64 {
        match &self.log_psi_override {
            Some(f) => f(x),
            None => (0..self.dim()).map(|k| self.log_psi_axis(k, x[k])).sum(),
        }
    }

    /// One step drawn from the stream `key`.
    pub fn sample_step(&self, key: u64, out: &mut [i64]) {
        match &self.family {
            Family::ProductPareto => {
                for (k, (o, &a)) in out.iter_mut().zip(&self.exponent.alphas).enumerate() {
                    *o = pareto_step(a, rng::uniform_at(key, k as u64));
                }
            }
            Family::CustomPmf(t) => out.copy_from_slice(t.invert(rng::uniform_at(key, 0))),
        }
    }

    pub fn pmf(&self, k: &[i64]) -> Result<f64> {
        if k.len() != self.dim() || k.iter().any(|&c| c < 1) {
            return Err(Error::Domain(format!("pmf evaluated at {k:?}, outside N*^d")));
        }
        Ok(match &self.family {
            Family::ProductPareto => k.iter().enumerate().map(|(a, &n)| self.axis_pmf(a, n)).product(),
            Family::CustomPmf(t) => t.prob(k),
        })
    }

    /// Marginal pmf of a product-pareto axis at `n >= 1`.
    pub fn axis_pmf(&self, axis: usize, n: i64) -> f64 {
        pareto_pmf(self.exponent.alphas[axis], n)
    }

    /// Mass of `[1, n]^d`.
    pub fn box_mass(&self, n: i64) -> f64 {
        match &self.family {
            Family::ProductPareto => self
                .exponent
                .alphas
                .iter()
                .map(|&a| 1.0 - ((n + 1) as f64).powf(-a))
                .product(),
            Family::CustomPmf(t) => t
                .support()
                .filter(|(k, _)| k.iter().all(|&c| c <= n))
                .map(|(_, p)| p)
                .sum(),
        }
    }

    /// Truncated transform `sum_{k in [1,N]^d} pmf(k) e^{i x.k}` and the
    /// neglected mass.
    pub fn fourier_p(&self, x: &[f64], n: i64) -> (Complex64, f64) {
        let tail = 1.0 - self.box_mass(n);
        let v = match &self.family {
            Family::ProductPareto => (0..self.dim())
                .map(|a| {
                    let step = Complex64::from_polar(1.0, x[a]);
                    let mut z = Complex64::new(1.0, 0.0);
                    let mut s = Complex64::new(0.0, 0.0);
                    for m in 1..=n {
                        z *= step;
                        if m % 64 == 0 {
                            z = Complex64::from_polar(1.0, x[a] * m as f64);
                        }
                        s += z * self.axis_pmf(a, m);
                    }
                    s
                })
                .product(),
            Family::CustomPmf(t) => t
                .support()
                .filter(|(k, _)| k.iter().all(|&c| c <= n))
                .map(|(k, p)| {
                    let ph: f64 = k.iter().zip(x).map(|(&c, xi)| c as f64 * xi).sum();
                    Complex64::from_polar(p, ph)
                })
                .sum(),
        };
        (v, tail)
    }

    /// Untruncated `1 - P(x)`.
    pub fn one_minus_p(&self, x: &[f64]) -> Complex64 {
        match &self.family {
            Family::ProductPareto => {
                // 1 - prod(1 - c_k), accumulated without cancellation
                let mut r = Complex64::new(0.0, 0.0);
                for (k, &xk) in x.iter().enumerate() {
                    let c = self.axis_one_minus_p(k, xk);
                    r = r + c - r * c;
                }
                r
            }
            Family::CustomPmf(t) => t
                .support()
                .map(|(k, p)| {
                    let th: f64 = k.iter().zip(x).map(|(&c, xi)| c as f64 * xi).sum();
                    let h = (th / 2.0).sin();
                    Complex64::new(2.0 * h * h, -th.sin()) * p
                })
                .sum(),
        }
    }

    /// Exact `1 - P_k(x)` for one product-pareto axis.
    pub fn axis_one_minus_p(&self, k: usize, x: f64) -> Complex64 {
        self.cf[k].one_minus(x)
    }

    /// `|1 - P(t^{-E} theta)| / |log psi(t^{-E} theta)|` for every pair.
    pub fn g_ratio_check(&self, directions: &[Vec<f64>], scales: &[f64]) -> Vec<GRatio> {
        let mut out = Vec::new();
        for th in directions {
            for &t in scales {
                let x = self.exponent.scale(1.0 / t, th);
                let ratio = self.one_minus_p(&x).norm() / self.log_psi(&x).norm();
                out.push(GRatio { direction: th.clone(), scale: t, ratio });
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GRatio {
    pub direction: Vec<f64>,
    pub scale: f64,
    pub ratio: f64,
}

/// `floor(u^{-1/alpha})`, saturating for astronomically large steps.
#[inline]
pub fn pareto_step(alpha: f64, u: f64) -> i64 {
    let z = u.powf(-1.0 / alpha).floor();
    if z >= 4.0e18 {
        4_000_000_000_000_000_000
    } else {
        z as i64
    }
}

/// `n^{-alpha} - (n+1)^{-alpha}`, computed without cancellation.
#[inline]
pub fn pareto_pmf(alpha: f64, n: i64) -> f64 {
    let nf = n as f64;
    -nf.powf(-alpha) * (-alpha * (1.0 / nf).ln_1p()).exp_m1()
}

/// Serializable description of a model, as read from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Explicit step table; product-pareto steps when absent.
    #[serde(default)]
    pub pmf: Option<Vec<PmfEntry>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfEntry {
    pub step: Vec<i64>,
    pub prob: f64,
}

fn default_p() -> f64 {
    0.5
}

impl ModelSpec {
    pub fn product(alphas: &[f64], p: f64) -> Self {
        ModelSpec { alphas: alphas.to_vec(), gammas: None, p, pmf: None }
    }

    pub fn build(&self) -> Result<SpectralModel> {
        match &self.pmf {
            None => {
                let m = SpectralModel::product_pareto(&self.alphas, self.p)?;
                match &self.gammas {
                    Some(g) => m.with_gammas(g.clone()),
                    None => Ok(m),
                }
            }
            Some(entries) => {
                let table = PmfTable::new(entries.iter().map(|e| (e.step.clone(), e.prob)).collect())?;
                SpectralModel::custom(table, &self.alphas, self.gammas.clone(), self.p)
            }
        }
    }
}
