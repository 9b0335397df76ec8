//! The limit field `W`: covariance by spectral quadrature, fractional-Brownian-
//! sheet closed forms, increment variances, and grid synthesis.

mod synth;

pub use synth::{discretization_check, synthesize_w, DiscretizationCheck, SynthConfig, Synthesis};

use crate::error::{Error, Result};
use crate::quadrature::{half_line, Legendre};
use crate::regime::{AxisClass, RegimeReport};
use crate::rng;
use crate::spectral_models::SpectralModel;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// `C_H = pi / (H Gamma(2H) sin(pi H))`, the constant with
/// `int |e^{ity} - 1|^2 |y|^{-1-2H} dy = C_H |t|^{2H}`.
pub fn c_h(h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("C_H needs H in (0,1), got {h}")));
    }
    Ok(PI / (h * gamma(2.0 * h) * (PI * h).sin()))
}

/// `Cov(B_H(t), B_H(s))` for standard fractional Brownian motion.
pub fn fbm_cov(h: f64, t: f64, s: f64) -> f64 {
    0.5 * (t.abs().powf(2.0 * h) + s.abs().powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    /// Gauss-Legendre order per panel.
    pub order: usize,
    /// Lower order used for the error estimate; 0 skips the estimate.
    pub check_order: usize,
    /// Half-periods integrated explicitly before the asymptotic tail node.
    pub half_periods: usize,
    /// Octaves of geometric refinement towards the origin.
    pub low_octaves: i32,
    /// Octaves covered before a power-law tail node.
    pub high_octaves: i32,
    /// Failure threshold on `est_error / |value|`.
    pub rel_tol: f64,
    /// Points per randomized shift when `|I_>=| >= 3`.
    pub qmc_points: usize,
    pub qmc_shifts: usize,
    pub qmc_rel_tol: f64,
    pub seed: u64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            order: 8,
            check_order: 5,
            half_periods: 64,
            low_octaves: 60,
            high_octaves: 90,
            rel_tol: 1e-4,
            qmc_points: 1 << 16,
            qmc_shifts: 8,
            qmc_rel_tol: 2e-2,
            seed: 0x5eed,
        }
    }
}

impl QuadConfig {
    /// Cheaper settings without the second-order error estimate.
    pub fn fast() -> Self {
        QuadConfig { check_order: 0, half_periods: 32, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CovValue {
    pub value: f64,
    pub est_error: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CovMethod {
    Quadrature,
    ClosedForm,
    Prelimit,
    Empirical,
}

/// Covariance values on a list of `(t, s)` pairs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CovarianceGrid {
    pub points: Vec<(Vec<f64>, Vec<f64>)>,
    pub values: Vec<f64>,
    pub method: CovMethod,
    pub est_error: Vec<f64>,
}

/// Nodes on `y > 0` with complex weights; the `y < 0` half uses conjugates.
struct AxisRule {
    y: Vec<f64>,
    w: Vec<Complex64>,
}

/// Rule for `int_0^inf f(y) (e^{ity}-1) conj(e^{isy}-1) / (2 pi y^2) dy` with
/// `f` smooth on `(0, inf)`, `f(y) ~ y^b` at the origin and `f(y) (2 pi y^2)^{-1}`
/// decaying like `y^{-p}`.
fn oscillatory_rule(rule: &Legendre, t: f64, s: f64, b: f64, p: f64, cfg: &QuadConfig) -> AxisRule {
    let mut y = Vec::new();
    let mut w = Vec::new();
    let push = |nodes: &[(f64, f64)], f: &dyn Fn(f64) -> Complex64, y: &mut Vec<f64>, w: &mut Vec<Complex64>| {
        for &(x, wt) in nodes {
            y.push(x);
            w.push(f(x) * wt);
        }
    };
    let two_pi = 2.0 * PI;
    let wmax = t.abs().max(s.abs()).max((t - s).abs());
    let y0 = PI / wmax;
    let lo = y0 * 2f64.powi(-cfg.low_octaves);
    let mut nodes = vec![(lo, lo / (1.0 + b))];
    rule.geometric(lo, y0, &mut nodes);
    let near = |x: f64| {
        let amp = 4.0 * (t * x / 2.0).sin() * (s * x / 2.0).sin() / (two_pi * x * x);
        Complex64::from_polar(amp, (t - s) * x / 2.0)
    };
    push(&nodes, &near, &mut y, &mut w);

    let mut constant = 1.0;
    for (c, om) in [(1.0, t - s), (-1.0, t), (-1.0, -s)] {
        if om == 0.0 {
            constant += c;
            continue;
        }
        let half = PI / om.abs();
        let mut nodes = Vec::new();
        rule.geometric(y0, half, &mut nodes);
        rule.uniform(half.max(y0), half, cfg.half_periods, &mut nodes);
        let term = |x: f64| Complex64::from_polar(c / (two_pi * x * x), om * x);
        push(&nodes, &term, &mut y, &mut w);
        let end = half.max(y0) + half * cfg.half_periods as f64;
        y.push(end);
        w.push(term(end) * Complex64::new(p / (end * om * om), 1.0 / om));
    }
    if constant != 0.0 {
        let hi = y0 * 2f64.powi(cfg.high_octaves);
        let mut nodes = Vec::new();
        rule.geometric(y0, hi, &mut nodes);
        nodes.push((hi, hi / (p - 1.0)));
        let term = |x: f64| Complex64::new(constant / (two_pi * x * x), 0.0);
        push(&nodes, &term, &mut y, &mut w);
    }
    AxisRule { y, w }
}

/// Rule for `int_0^inf f(y) dy` with `f` decaying like `y^{-p}`.
fn plain_rule(rule: &Legendre, p: f64, cfg: &QuadConfig) -> AxisRule {
    let span = cfg.high_octaves + cfg.low_octaves;
    let nodes = half_line(rule, 2f64.powi(-span), 2f64.powi(span), p);
    AxisRule {
        y: nodes.iter().map(|n| n.0).collect(),
        w: nodes.iter().map(|n| Complex64::new(n.1, 0.0)).collect(),
    }
}

/// `int_0^inf |e^{ity} - 1|^2 |y|^{-1-2H} dy` doubled to the whole line, by
/// the same oscillatory rule `cov_w` uses.
pub fn fbm_spectral_quadrature(h: f64, t: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("H = {h} outside (0,1)")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let rule = Legendre::new(cfg.order);
    let r = oscillatory_rule(&rule, t, t, 1.0 - 2.0 * h, 1.0 + 2.0 * h, cfg);
    let v: f64 = r.y.iter().zip(&r.w).map(|(y, w)| (w * y.powf(1.0 - 2.0 * h)).re).sum();
    Ok(2.0 * 2.0 * PI * v)
}

fn check_point(report: &RegimeReport, t: &[f64], s: &[f64]) -> Result<()> {
    report.require_valid()?;
    if t.len() != report.dim() || s.len() != report.dim() {
        return Err(Error::Domain("point dimension differs from the regime".into()));
    }
    if t.iter().chain(s).any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite covariance argument".into()));
    }
    Ok(())
}

/// `prod_{I_<} Cov(B_{1/2}) * prod_{I_>} t_k s_k / (2 pi)`.
fn degenerate_factor(report: &RegimeReport, t: &[f64], s: &[f64]) -> f64 {
    let mut f = 1.0;
    for k in 0..report.dim() {
        match report.partition[k] {
            AxisClass::Less => f *= fbm_cov(0.5, t[k], s[k]),
            AxisClass::Greater => f *= t[k] * s[k] / (2.0 * PI),
            AxisClass::Equal => {}
        }
    }
    f
}

/// `Cov(W(t), W(s))` by spectral quadrature over the `I_>=` coordinates.
pub fn cov_w(
    report: &RegimeReport,
    model: &SpectralModel,
    sigma_x2: f64,
    t: &[f64],
    s: &[f64],
    cfg: &QuadConfig,
) -> Result<CovValue> {
    check_point(report, t, s)?;
    if model.dim() != report.dim() {
        return Err(Error::Domain("model and regime dimensions differ".into()));
    }
    if t.iter().chain(s).any(|&x| x == 0.0) {
        return Ok(CovValue { value: 0.0, est_error: 0.0 });
    }
    let pre = sigma_x2 * degenerate_factor(report, t, s);
    if pre == 0.0 {
        return Ok(CovValue { value: 0.0, est_error: 0.0 });
    }
    let axes: Vec<usize> = (0..report.dim()).filter(|&k| report.partition[k] != AxisClass::Less).collect();
    let integral = |order: usize| -> Result<(f64, f64)> {
        let rule = Legendre::new(order);
        let rules: Vec<AxisRule> = axes
            .iter()
            .map(|&k| {
                let a = report.alphas[k];
                if report.partition[k] == AxisClass::Equal {
                    oscillatory_rule(&rule, t[k], s[k], -2.0 * a, 2.0 + 2.0 * a, cfg)
                } else {
                    plain_rule(&rule, 2.0 * a, cfg)
                }
            })
            .collect();
        if axes.len() >= 3 {
            qmc_sum(model, &axes, &rules, cfg)
        } else {
            Ok((tensor_sum(model, &axes, &rules), 0.0))
        }
    };
    let (hi, qmc_err) = integral(cfg.order)?;
    let mut est = qmc_err;
    if cfg.check_order > 0 && axes.len() < 3 {
        let (lo, _) = integral(cfg.check_order)?;
        est = (hi - lo).abs();
    }
    let value = pre * hi;
    let est_error = pre.abs() * est;
    let tol = if axes.len() >= 3 { cfg.qmc_rel_tol } else { cfg.rel_tol };
    if !value.is_finite() || est_error > tol * value.abs() + 1e-300 {
        return Err(Error::Numerical(format!(
            "cov_W({t:?}, {s:?}) = {value} with estimated error {est_error} above tolerance {tol} \
             (order {} vs {}, {} half-periods)",
            cfg.order, cfg.check_order, cfg.half_periods
        )));
    }
    Ok(CovValue { value, est_error })
}

/// `log psi` at `pi_>= y`, with `y` given on the listed axes.
fn log_psi_on(model: &SpectralModel, axes: &[usize], y: &[f64], buf: &mut [f64]) -> Complex64 {
    buf.iter_mut().for_each(|v| *v = 0.0);
    for (i, &k) in axes.iter().enumerate() {
        buf[k] = y[i];
    }
    model.log_psi(buf)
}

/// Full tensor product over sign patterns with the first axis positive.
fn tensor_sum(model: &SpectralModel, axes: &[usize], rules: &[AxisRule]) -> f64 {
    let m = axes.len();
    let additive = model.is_additive();
    let phis: Vec<Vec<Complex64>> = if additive {
        axes.iter()
            .zip(rules)
            .map(|(&k, r)| r.y.iter().map(|&y| model.log_psi_axis(k, y)).collect())
            .collect()
    } else {
        vec![]
    };
    let mut buf = vec![0.0; model.dim()];
    let mut yv = vec![0.0; m];
    let mut total = 0.0;
    match m {
        1 => {
            for (i, w) in rules[0].w.iter().enumerate() {
                let phi = if additive { phis[0][i] } else { log_psi_on(model, axes, &[rules[0].y[i]], &mut buf) };
                total += w.re / phi.norm_sqr();
            }
        }
        _ => {
            let sizes: Vec<usize> = rules.iter().map(|r| r.y.len()).collect();
            let count: usize = sizes.iter().product();
            let mut idx = vec![0usize; m];
            for pattern in 0..(1usize << (m - 1)) {
                let neg = |a: usize| a > 0 && (pattern >> (a - 1)) & 1 == 1;
                // innermost axis 0 is looped directly for speed
                let outer = count / sizes[0];
                for r in 0..outer {
                    let mut rem = r;
                    let mut wo = Complex64::new(1.0, 0.0);
                    let mut po = Complex64::new(0.0, 0.0);
                    for a in 1..m {
                        idx[a] = rem % sizes[a];
                        rem /= sizes[a];
                        let (w, y) = (rules[a].w[idx[a]], rules[a].y[idx[a]]);
                        wo *= if neg(a) { w.conj() } else { w };
                        yv[a] = if neg(a) { -y } else { y };
                        if additive {
                            let p = phis[a][idx[a]];
                            po += if neg(a) { p.conj() } else { p };
                        }
                    }
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..sizes[0] {
                        let phi = if additive {
                            phis[0][i] + po
                        } else {
                            yv[0] = rules[0].y[i];
                            log_psi_on(model, axes, &yv, &mut buf)
                        };
                        acc += rules[0].w[i] / phi.norm_sqr();
                    }
                    total += (acc * wo).re;
                }
            }
        }
    }
    2.0 * total
}

/// Randomized Kronecker sampling of tensor nodes with probability
/// proportional to `|w|` per axis.
fn qmc_sum(model: &SpectralModel, axes: &[usize], rules: &[AxisRule], cfg: &QuadConfig) -> Result<(f64, f64)> {
    let m = axes.len();
    let cdfs: Vec<(Vec<f64>, f64)> = rules
        .iter()
        .map(|r| {
            let mut c = Vec::with_capacity(r.w.len());
            let mut acc = 0.0;
            for w in &r.w {
                acc += w.norm();
                c.push(acc);
            }
            (c, acc)
        })
        .collect();
    // square roots of primes give an irrational lattice
    let primes = [2.0f64, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0];
    let dims = 2 * m - 1;
    if dims > primes.len() {
        return Err(Error::Config(format!("quasi-Monte Carlo supports at most {} axes", primes.len() / 2)));
    }
    let gen: Vec<f64> = primes[..dims].iter().map(|p| p.sqrt().fract()).collect();
    let estimates: Vec<f64> = (0..cfg.qmc_shifts)
        .into_par_iter()
        .map(|sh| {
            let key = rng::key(cfg.seed, rng::tag::QMC, &[sh as i64]);
            let shift: Vec<f64> = (0..dims).map(|d| rng::uniform_at(key, d as u64)).collect();
            let mut buf = vec![0.0; model.dim()];
            let mut y = vec![0.0; m];
            let mut sum = 0.0;
            for n in 1..=cfg.qmc_points {
                let mut weight = Complex64::new(1.0, 0.0);
                let mut density = 1.0;
                for a in 0..m {
                    let u = (shift[a] + n as f64 * gen[a]).fract();
                    let (c, total) = &cdfs[a];
                    let i = c.partition_point(|&v| v < u * total).min(c.len() - 1);
                    let w = rules[a].w[i];
                    let negative = a > 0 && (shift[m - 1 + a] + n as f64 * gen[m - 1 + a]).fract() < 0.5;
                    weight *= if negative { w.conj() } else { w };
                    y[a] = if negative { -rules[a].y[i] } else { rules[a].y[i] };
                    density *= w.norm() / total;
                }
                let phi = log_psi_on(model, axes, &y, &mut buf);
                sum += (weight / phi.norm_sqr()).re / density;
            }
            // each sign pattern was drawn with probability 2^{1-m}
            2.0 * 2f64.powi(m as i32 - 1) * sum / cfg.qmc_points as f64
        })
        .collect();
    let mean = crate::stats::mean(&estimates);
    let se = (crate::stats::variance(&estimates) / estimates.len() as f64).sqrt();
    Ok((mean, se))
}

/// Covariances on a list of pairs, evaluated in parallel and returned in order.
pub fn cov_grid(
    report: &RegimeReport,
    model: &SpectralModel,
    sigma_x2: f64,
    points: &[(Vec<f64>, Vec<f64>)],
    cfg: &QuadConfig,
) -> Result<CovarianceGrid> {
    let vals: Vec<Result<CovValue>> =
        points.par_iter().map(|(t, s)| cov_w(report, model, sigma_x2, t, s, cfg)).collect();
    let mut values = Vec::with_capacity(points.len());
    let mut est_error = Vec::with_capacity(points.len());
    for v in vals {
        let v = v?;
        values.push(v.value);
        est_error.push(v.est_error);
    }
    Ok(CovarianceGrid { points: points.to_vec(), values, method: CovMethod::Quadrature, est_error })
}

/// Fractional-Brownian-sheet form when `|I_=| = 1`.
pub fn closed_form_cov(
    report: &RegimeReport,
    model: &SpectralModel,
    sigma_x2: f64,
    t: &[f64],
    s: &[f64],
) -> Result<f64> {
    check_point(report, t, s)?;
    let eq = report.axes(AxisClass::Equal);
    if eq.len() != 1 {
        return Err(Error::Domain(format!("closed form needs exactly one I_= axis, found {}", eq.len())));
    }
    let j = eq[0];
    let h = report.hurst.as_ref().ok_or_else(|| Error::Internal("fBs report without Hurst indices".into()))?[j];
    let constant = fbs_sigma2(report, model)?;
    Ok(sigma_x2 * degenerate_factor(report, t, s) * constant * fbm_cov(h, t[j], s[j]))
}

/// The constant `sigma^2` with `Cov(W) = sigma_X^2 sigma^2 prod Cov(B_{H_k})`
/// restricted to the `I_=` axis, i.e. excluding the `I_<`, `I_>` factors.
pub fn fbs_sigma2(report: &RegimeReport, model: &SpectralModel) -> Result<f64> {
    let eq = report.axes(AxisClass::Equal);
    let gt = report.axes(AxisClass::Greater);
    if eq.len() != 1 {
        return Err(Error::Domain("fBs constant needs exactly one I_= axis".into()));
    }
    let j = eq[0];
    let h = report.hurst.as_ref().ok_or_else(|| Error::Internal("fBs report without Hurst indices".into()))?[j];
    let ch = c_h(h)?;
    let mut x = vec![0.0; model.dim()];
    x[j] = 1.0;
    match gt.first() {
        None => Ok(ch / model.log_psi(&x).norm_sqr() / (2.0 * PI)),
        Some(&k) => {
            let rule = Legendre::new(10);
            let nodes = half_line(&rule, 2f64.powi(-150), 2f64.powi(150), 2.0 * report.alphas[k]);
            let mut line = 0.0;
            for (z, w) in nodes {
                for sign in [1.0, -1.0] {
                    x[k] = sign * z;
                    line += w / model.log_psi(&x).norm_sqr();
                }
            }
            Ok(ch * line / (2.0 * PI))
        }
    }
}

/// `Var(W(u + delta e_j) - W(u))`.
///
/// Every direction has stationary increments in the spectral integrand, so the
/// variance is `Var(W(v))` with `v = u` except `v_j = delta`.
pub fn var_increment(
    report: &RegimeReport,
    model: &SpectralModel,
    sigma_x2: f64,
    axis: usize,
    delta: f64,
    u: &[f64],
    cfg: &QuadConfig,
) -> Result<CovValue> {
    if axis >= report.dim() || u.len() != report.dim() {
        return Err(Error::Domain("axis or point outside the regime dimension".into()));
    }
    let mut v = u.to_vec();
    v[axis] = delta;
    cov_w(report, model, sigma_x2, &v, &v, cfg)
}

/// `|cov(lambda^{E'} t, lambda^{E'} s) - lambda^{2H} cov(t, s)|`, relative to
/// the larger of the two.
pub fn operator_scaling_check(
    report: &RegimeReport,
    model: &SpectralModel,
    lambda: f64,
    t: &[f64],
    s: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain("lambda must be positive".into()));
    }
    let h = report.exponent_h()?;
    let scale = |x: &[f64]| -> Vec<f64> {
        x.iter().zip(&report.alpha_primes).map(|(v, a)| v * lambda.powf(1.0 / a)).collect()
    };
    let base = cov_w(report, model, 1.0, t, s, cfg)?.value * lambda.powf(2.0 * h);
    let scaled = cov_w(report, model, 1.0, &scale(t), &scale(s), cfg)?.value;
    let denom = base.abs().max(scaled.abs());
    Ok(if denom == 0.0 { 0.0 } else { (scaled - base).abs() / denom })
}
