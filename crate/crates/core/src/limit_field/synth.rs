use crate::error::{Error, Result};
use super::{cov_w, QuadConfig};
use crate::regime::{AxisClass, RegimeReport};
use crate::rng;
use crate::spectral_models::SpectralModel;
use num_complex::Complex64;
use rand::RngExt;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Per-axis frequency grid `[2^-low_octaves, 2^high_octaves]` (mirrored),
/// `cells_per_octave` geometric cells per octave.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub low_octaves: i32,
    pub high_octaves: i32,
    pub cells_per_octave: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { low_octaves: 40, high_octaves: 12, cells_per_octave: 4, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub points: Vec<Vec<f64>>,
    /// `values[r][i]`: realization `r` at point `i`.
    pub values: Vec<Vec<f64>>,
    pub cells: usize,
    kernel: Vec<Complex64>,
}

impl Synthesis {
    /// Exact covariance of the discretized field between points `i` and `j`;
    /// its gap to `cov_w` is the discretization bias.
    pub fn grid_cov(&self, i: usize, j: usize) -> f64 {
        let n = self.points.len();
        let mut acc = 0.0;
        for c in 0..self.cells {
            acc += (self.kernel[c * n + i] * self.kernel[c * n + j].conj()).re;
        }
        4.0 * acc
    }

    pub fn samples_at(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[i]).collect()
    }
}

/// Geometric midpoints and widths on `y > 0`.
fn axis_cells(cfg: &SynthConfig) -> Vec<(f64, f64)> {
    let count = (cfg.low_octaves + cfg.high_octaves) as usize * cfg.cells_per_octave;
    let ratio = 2f64.powf(1.0 / cfg.cells_per_octave as f64);
    let mut a = 2f64.powi(-cfg.low_octaves);
    (0..count)
        .map(|_| {
            let b = a * ratio;
            let c = ((a * b).sqrt(), b - a);
            a = b;
            c
        })
        .collect()
}

/// Riemann discretization of the harmonizable representation with
/// independent complex Gaussian cell weights, made real by Hermitian pairing.
pub fn synthesize_w(
    report: &RegimeReport,
    model: &SpectralModel,
    sigma_x2: f64,
    points: &[Vec<f64>],
    cfg: &SynthConfig,
    realizations: usize,
) -> Result<Synthesis> {
    report.require_valid()?;
    let d = report.dim();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::Domain("synthesis point dimension differs from the regime".into()));
    }
    if cfg.low_octaves + cfg.high_octaves < 1 || cfg.cells_per_octave < 1 {
        return Err(Error::Config("synthesis grid needs at least one octave and one cell".into()));
    }
    let half = axis_cells(cfg);
    let per_axis = 2 * half.len();
    let signed = |i: usize| -> (f64, f64) {
        let (y, w) = half[i % half.len()];
        if i < half.len() {
            (y, w)
        } else {
            (-y, w)
        }
    };
    // the first axis only takes positive frequencies; conjugates cover the rest
    let cells = half.len() * per_axis.pow(d as u32 - 1);
    let n = points.len();
    let norm = sigma_x2.sqrt() * (2.0 * PI).powf(-(d as f64) / 2.0);
    let mut kernel = vec![Complex64::new(0.0, 0.0); cells * n];
    let mut y = vec![0.0; d];
    let mut ypsi = vec![0.0; d];
    for c in 0..cells {
        let mut rem = c;
        let mut vol = 1.0;
        for k in 0..d {
            let (yk, wk) = if k == 0 {
                let i = rem % half.len();
                rem /= half.len();
                half[i]
            } else {
                let i = rem % per_axis;
                rem /= per_axis;
                signed(i)
            };
            y[k] = yk;
            vol *= wk;
            ypsi[k] = if report.partition[k] == AxisClass::Less { 0.0 } else { yk };
        }
        let amp = norm * (vol / 2.0).sqrt() / model.log_psi(&ypsi).norm();
        for (i, p) in points.iter().enumerate() {
            let mut a = Complex64::new(amp, 0.0);
            for k in 0..d {
                a *= match report.partition[k] {
                    AxisClass::Greater => Complex64::new(p[k], 0.0),
                    _ => (Complex64::from_polar(1.0, p[k] * y[k]) - 1.0) / Complex64::new(0.0, y[k]),
                };
            }
            kernel[c * n + i] = a;
        }
    }
    let values: Vec<Vec<f64>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::chacha(rng::key(cfg.seed, rng::tag::SYNTH, &[r as i64]));
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..cells {
                let w = Complex64::new(g.sample(StandardNormal), g.sample(StandardNormal));
                for (i, a) in acc.iter_mut().enumerate() {
                    *a += w * kernel[c * n + i];
                }
            }
            acc.iter().map(|a| 2.0 * a.re).collect()
        })
        .collect();
    Ok(Synthesis { points: points.to_vec(), values, cells, kernel })
}

/// Gap between the covariance the synthesized field actually has and the
/// exact limit covariance, per grid point.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiscretizationCheck {
    pub discretized: Vec<f64>,
    pub exact: Vec<f64>,
    /// `|discretized - exact| / exact` (0 when both vanish).
    pub relative_gap: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Compares `Var W(t)` of the discretized spectral field with quadrature at
/// every synthesis point; points with a gap above `tol` produce a warning.
pub fn discretization_check(
    syn: &Synthesis,
    report: &RegimeReport,
    model: &SpectralModel,
    sigma_x2: f64,
    quad: &QuadConfig,
    tol: f64,
) -> Result<DiscretizationCheck> {
    let n = syn.points.len();
    let discretized: Vec<f64> = (0..n).map(|i| syn.grid_cov(i, i)).collect();
    let mut exact = Vec::with_capacity(n);
    for p in &syn.points {
        exact.push(cov_w(report, model, sigma_x2, p, p, quad)?.value);
    }
    let mut relative_gap = Vec::with_capacity(n);
    let mut warnings = Vec::new();
    for i in 0..n {
        let gap = if exact[i] == 0.0 && discretized[i] == 0.0 {
            0.0
        } else {
            (discretized[i] - exact[i]).abs() / exact[i].abs()
        };
        if !(gap <= tol) {
            warnings.push(format!(
                "frequency grid too coarse at t = {:?}: discretized variance off by {:.2}%",
                syn.points[i],
                100.0 * gap
            ));
        }
        relative_gap.push(gap);
    }
    Ok(DiscretizationCheck { discretized, exact, relative_gap, warnings })
}
