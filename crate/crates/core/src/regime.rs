//! Scaling-regime classification for a pair of diagonal exponents `(E, E')`.

use crate::error::{Error, Result};
use crate::spectral_models::ExponentMatrix;
use serde::{Deserialize, Serialize};

const EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AxisClass {
    Less,
    Equal,
    Greater,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IncrementClass {
    Independent,
    Invariant,
    LongRange,
}

/// Everything derived from `(E, E')`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RegimeReport {
    pub alphas: Vec<f64>,
    pub alpha_primes: Vec<f64>,
    pub rhos: Vec<f64>,
    /// `None` when `q(E) <= 2` and no candidate satisfies the defining sums.
    pub gamma0: Option<f64>,
    pub partition: Vec<AxisClass>,
    #[serde(rename = "E_doubleprime")]
    pub e_doubleprime: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Option<f64>,
    pub valid: bool,
    pub reasons: Vec<String>,
    pub warnings: Vec<String>,
    pub is_critical: bool,
    pub is_fbs: bool,
    pub hurst: Option<Vec<f64>>,
    pub holder: Vec<f64>,
    /// Axes whose Hölder exponent is a free parameter (I_= axis with alpha = 1/2
    /// and no invariant direction).
    pub holder_free_axes: Vec<usize>,
    pub increment_class: Vec<IncrementClass>,
}

impl RegimeReport {
    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn axes(&self, class: AxisClass) -> Vec<usize> {
        (0..self.dim()).filter(|&k| self.partition[k] == class).collect()
    }

    /// `q(pi_> E)`.
    pub fn q_greater(&self) -> f64 {
        self.axes(AxisClass::Greater).iter().map(|&k| 1.0 / self.alphas[k]).sum()
    }

    pub fn require_valid(&self) -> Result<()> {
        if self.valid {
            Ok(())
        } else {
            Err(Error::Domain(format!("regime is not covered: {}", self.reasons.join("; "))))
        }
    }

    /// Normalization exponent, failing for invalid regimes.
    pub fn exponent_h(&self) -> Result<f64> {
        self.require_valid()?;
        self.h.ok_or_else(|| Error::Internal("valid report without H".into()))
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS * a.abs().max(b.abs()).max(1.0)
}

/// Default Hölder exponent returned for the free case.
pub const FREE_HOLDER_DEFAULT: f64 = 1.0 - 1e-3;

pub fn classify(e: &ExponentMatrix, alpha_primes: &[f64]) -> Result<RegimeReport> {
    classify_with(e, alpha_primes, FREE_HOLDER_DEFAULT)
}

/// As [`classify`], with the exponent to report on free Hölder axes.
pub fn classify_with(e: &ExponentMatrix, alpha_primes: &[f64], free_holder: f64) -> Result<RegimeReport> {
    let d = e.dim();
    if alpha_primes.len() != d {
        return Err(Error::Config(format!("{} alpha' values for dimension {d}", alpha_primes.len())));
    }
    if alpha_primes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::Config("alpha' values must be positive".into()));
    }
    if !(free_holder > 0.0 && free_holder < 1.0) {
        return Err(Error::Config("free Hölder exponent must lie in (0,1)".into()));
    }
    let alphas = e.alphas.clone();
    let rhos: Vec<f64> = alphas.iter().zip(alpha_primes).map(|(a, b)| a / b).collect();
    let inv: Vec<f64> = alphas.iter().map(|a| 1.0 / a).collect();
    let mut reasons = Vec::new();
    let mut warnings = Vec::new();

    if d == 1 && alphas[0] >= 0.5 {
        reasons.push("α_1 < 1/2 required for d=1".to_string());
    }

    let mut candidates = rhos.clone();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup_by(|a, b| near(*a, *b));
    let mut gamma0 = None;
    for &g in &candidates {
        let mut ge = 0.0;
        let mut gt = 0.0;
        for k in 0..d {
            if g > rhos[k] && !near(g, rhos[k]) {
                gt += inv[k];
                ge += inv[k];
            } else if near(g, rhos[k]) {
                if g != rhos[k] {
                    warnings.push(format!("ρ_{} within 1e-12 of a candidate γ; treated as equal", k + 1));
                }
                ge += inv[k];
            }
        }
        for s in [ge, gt] {
            if s != 2.0 && near(s, 2.0) {
                warnings.push(format!("defining sum {s} within 1e-12 of 2"));
            }
        }
        if ge > 2.0 + EPS && gt <= 2.0 + EPS {
            gamma0 = Some(g);
            break;
        }
    }

    let Some(g0) = gamma0 else {
        if e.q() > 2.0 + EPS {
            return Err(Error::Internal("no γ0 candidate satisfies the defining sums".into()));
        }
        reasons.push(format!("q(E) = {} must exceed 2", e.q()));
        return Ok(RegimeReport {
            alphas,
            alpha_primes: alpha_primes.to_vec(),
            rhos,
            gamma0: None,
            partition: vec![],
            e_doubleprime: vec![],
            h: None,
            valid: false,
            reasons,
            warnings,
            is_critical: false,
            is_fbs: false,
            hurst: None,
            holder: vec![],
            holder_free_axes: vec![],
            increment_class: vec![],
        });
    };

    let partition: Vec<AxisClass> = rhos
        .iter()
        .map(|&r| {
            if near(g0, r) {
                AxisClass::Equal
            } else if g0 < r {
                AxisClass::Less
            } else {
                AxisClass::Greater
            }
        })
        .collect();
    let e_doubleprime: Vec<f64> = (0..d)
        .map(|k| {
            let gk = if partition[k] == AxisClass::Greater { g0 / rhos[k] } else { 1.0 };
            gk / alpha_primes[k]
        })
        .collect();
    let q_prime: f64 = alpha_primes.iter().map(|a| 1.0 / a).sum();
    let q_dd: f64 = e_doubleprime.iter().sum();
    let h = g0 + q_prime - q_dd / 2.0;

    let q_greater: f64 = (0..d).filter(|&k| partition[k] == AxisClass::Greater).map(|k| inv[k]).sum();
    if near(q_greater, 2.0) {
        reasons.push("q(π_>E) = 2 is a boundary not covered by the invariance principle".into());
    } else if q_greater > 2.0 {
        reasons.push(format!("q(π_>E) = {q_greater} must be below 2"));
    }
    if !(h > 0.0) {
        reasons.push(format!("normalization exponent H = {h} must be positive"));
    }

    let n_equal = partition.iter().filter(|&&c| c == AxisClass::Equal).count();
    let greater: Vec<usize> = (0..d).filter(|&k| partition[k] == AxisClass::Greater).collect();
    let increment_class = partition
        .iter()
        .map(|c| match c {
            AxisClass::Less => IncrementClass::Independent,
            AxisClass::Equal => IncrementClass::LongRange,
            AxisClass::Greater => IncrementClass::Invariant,
        })
        .collect();

    let mut holder = Vec::with_capacity(d);
    let mut holder_free_axes = Vec::new();
    for k in 0..d {
        holder.push(match partition[k] {
            AxisClass::Greater => 1.0,
            AxisClass::Less => 0.5,
            AxisClass::Equal => {
                if !greater.is_empty() || alphas[k] < 0.5 {
                    alphas[k] * (1.0 - q_greater / 2.0) + 0.5
                } else if alphas[k] == 0.5 {
                    holder_free_axes.push(k);
                    free_holder
                } else {
                    1.0
                }
            }
        });
    }

    let is_fbs = n_equal == 1;
    let hurst = is_fbs.then(|| {
        (0..d)
            .map(|k| match partition[k] {
                AxisClass::Less => 0.5,
                AxisClass::Greater => 1.0,
                AxisClass::Equal => match greater.first() {
                    Some(&g) => alphas[k] * (1.0 - 1.0 / (2.0 * alphas[g])) + 0.5,
                    None if alphas[k] < 0.5 => alphas[k] + 0.5,
                    None => 1.0,
                },
            })
            .collect()
    });

    Ok(RegimeReport {
        alphas,
        alpha_primes: alpha_primes.to_vec(),
        rhos,
        gamma0: Some(g0),
        is_critical: n_equal == d,
        partition,
        e_doubleprime,
        h: Some(h),
        valid: reasons.is_empty(),
        reasons,
        warnings,
        is_fbs,
        hurst,
        holder,
        holder_free_axes,
        increment_class,
    })
}

/// `(is_fbs, hurst)` for a valid report.
pub fn fbs_detect(report: &RegimeReport) -> Result<(bool, Option<Vec<f64>>)> {
    report.require_valid()?;
    Ok((report.is_fbs, report.hurst.clone()))
}

/// Per-axis Hölder exponents and, per axis, whether the value is the free
/// parameter rather than a derived exponent.
pub fn holder_exponents(report: &RegimeReport) -> Result<(Vec<f64>, Vec<bool>)> {
    report.require_valid()?;
    let flags = (0..report.dim()).map(|k| report.holder_free_axes.contains(&k)).collect();
    Ok((report.holder.clone(), flags))
}

/// Which constant multiplies the fBs covariance in the two-dimensional
/// non-critical cases. Axes are zero-based.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Sigma2Form {
    /// `C_H |log psi(e_axis)|^{-2} / (2 pi)` with `H` the Hurst index of `axis`.
    Point { axis: usize },
    /// `C_H int |log psi(e_axis + y e_other)|^{-2} dy / (2 pi)`.
    Line { axis: usize },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PlanarCase {
    pub case: u8,
    pub beta: f64,
    pub h1: f64,
    pub h2: f64,
    pub sigma2: Sigma2Form,
}

/// Closed forms for `d = 2`, `E' = diag(1/alpha_1, 1/alpha_2')`.
pub fn planar_case(a1: f64, a2: f64, a2p: f64) -> Result<PlanarCase> {
    for (name, a) in [("α_1", a1), ("α_2", a2)] {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Domain(format!("{name} = {a} outside (0,1)")));
        }
    }
    if !(a2p > 0.0) {
        return Err(Error::Domain(format!("α_2' = {a2p} must be positive")));
    }
    if a2 == a2p {
        return Err(Error::Domain("α_2' = α_2 is the critical regime, not a case".into()));
    }
    if a2p > a2 {
        if a2 == 0.5 {
            return Err(Error::Domain("α_2 = 1/2 lies on the boundary between cases (i) and (ii)".into()));
        }
        if a2 < 0.5 {
            Ok(PlanarCase {
                case: 1,
                beta: a2 / a2p + 0.5 * (1.0 / a1 + 1.0 / a2p),
                h1: 0.5,
                h2: 0.5 + a2,
                sigma2: Sigma2Form::Point { axis: 1 },
            })
        } else {
            Ok(PlanarCase {
                case: 2,
                beta: 1.0 + 1.0 / (2.0 * a1) + 1.0 / a2p - 1.0 / (2.0 * a2),
                h1: 0.5 + a1 * (1.0 - 1.0 / (2.0 * a2)),
                h2: 1.0,
                sigma2: Sigma2Form::Line { axis: 0 },
            })
        }
    } else {
        if a1 == 0.5 {
            return Err(Error::Domain("α_1 = 1/2 lies on the boundary between cases (iii) and (iv)".into()));
        }
        if a1 < 0.5 {
            Ok(PlanarCase {
                case: 3,
                beta: 1.0 + 0.5 * (1.0 / a1 + 1.0 / a2p),
                h1: 0.5 + a1,
                h2: 0.5,
                sigma2: Sigma2Form::Point { axis: 0 },
            })
        } else {
            Ok(PlanarCase {
                case: 4,
                beta: a2 / a2p * (1.0 - 1.0 / (2.0 * a1)) + 1.0 / a1 + 1.0 / (2.0 * a2p),
                h1: 1.0,
                h2: 0.5 + a2 * (1.0 - 1.0 / (2.0 * a1)),
                sigma2: Sigma2Form::Line { axis: 1 },
            })
        }
    }
}
