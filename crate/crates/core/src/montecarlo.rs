//! Replica experiments: normalized covariance against the limit, Gaussianity
//! of the normalized sums, and the exact second-order identities.

use crate::error::{Error, Result};
use crate::graph_field::{self, box_extents, window_extents, DEFAULT_SITE_BUDGET};
use crate::limit_field::{cov_grid, QuadConfig};
use crate::q_engine::build_qtable;
use crate::regime::{classify, RegimeReport};
use crate::rng;
use crate::spectral_models::{ModelSpec, SpectralModel};
use crate::stats::{self, Gaussianity};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Pass/fail thresholds. All are engineering choices; the limit theorems give
/// no convergence rates.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Allowed `|empirical / target - 1|` on diagonal entries at the largest n.
    pub rel_tol: f64,
    /// Allowed `|z|` at the largest n.
    pub z_max: f64,
    /// Slack, in combined standard errors, for the successive-n trend.
    pub trend_z: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel_tol: 0.15, z_max: 4.0, trend_z: 2.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub model: ModelSpec,
    pub alpha_primes: Vec<f64>,
    pub n_schedule: Vec<u64>,
    pub replicas: usize,
    pub t_grid: Vec<Vec<f64>>,
    /// Index pairs into `t_grid` to compare; the diagonal when absent.
    #[serde(default)]
    pub pairs: Option<Vec<(usize, usize)>>,
    pub seed: u64,
    /// Buffer depth as a multiple of the largest window extent.
    #[serde(default = "one")]
    pub buffer_factor: f64,
    #[serde(default = "site_budget")]
    pub site_budget: u64,
    /// Extent of the q-table that supplies `sigma_X^2`.
    pub qtable_extent: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Grid index whose normalized sums go through the Gaussianity test.
    #[serde(default)]
    pub gaussianity_point: Option<usize>,
    #[serde(default)]
    pub quad: QuadConfig,
}

fn one() -> f64 {
    1.0
}

fn site_budget() -> u64 {
    DEFAULT_SITE_BUDGET
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let d = self.model.alphas.len();
        if self.alpha_primes.len() != d {
            return Err(Error::Config("alpha_primes length differs from alphas".into()));
        }
        if self.n_schedule.is_empty() || self.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n schedule must be non-empty and strictly increasing".into()));
        }
        if self.n_schedule[0] < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.replicas < 2 {
            return Err(Error::Config("at least 2 replicas are needed".into()));
        }
        if self.t_grid.is_empty() {
            return Err(Error::Config("t grid is empty".into()));
        }
        for t in &self.t_grid {
            if t.len() != d || t.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                return Err(Error::Config(format!("grid point {t:?} outside (0,1]^{d}")));
            }
        }
        for &(i, j) in self.pairs().iter() {
            if i >= self.t_grid.len() || j >= self.t_grid.len() {
                return Err(Error::Config(format!("pair ({i},{j}) indexes past the t grid")));
            }
        }
        if let Some(g) = self.gaussianity_point {
            if g >= self.t_grid.len() {
                return Err(Error::Config("gaussianity point indexes past the t grid".into()));
            }
        }
        if !(self.buffer_factor > 0.0) {
            return Err(Error::Config("buffer factor must be positive".into()));
        }
        Ok(())
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.pairs.clone().unwrap_or_else(|| (0..self.t_grid.len()).map(|i| (i, i)).collect())
    }

    pub fn buffer_depth(&self, extents: &[usize]) -> usize {
        ((*extents.iter().max().unwrap() as f64 * self.buffer_factor).ceil() as usize).max(1)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerdictRow {
    pub n: u64,
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub empirical: f64,
    pub se: f64,
    pub target: f64,
    pub target_error: f64,
    pub z: f64,
    /// `empirical / target` (NaN for a zero target).
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScaleSummary {
    pub n: u64,
    pub extents: Vec<usize>,
    pub buffer_depth: usize,
    pub mean_truncated_fraction: f64,
    pub mean_tracked_sites: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Trend {
    pub pair: (usize, usize),
    pub ratios: Vec<f64>,
    pub ratio_se: Vec<f64>,
    /// `|ratio - 1|` never grows by more than the allowed noise.
    pub monotone: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Checks {
    pub within_tolerance: bool,
    pub z_scores: bool,
    pub trend: bool,
    pub gaussianity: Option<bool>,
}

/// Outcome of an invariance experiment. Contains no timing or worker data, so
/// reruns are byte-identical.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerdictReport {
    pub schema_version: u32,
    pub plan: ExperimentPlan,
    pub regime: RegimeReport,
    pub sigma_x2: f64,
    pub normalization_exponent: f64,
    pub scales: Vec<ScaleSummary>,
    pub rows: Vec<VerdictRow>,
    pub trend: Vec<Trend>,
    pub gaussianity: Option<Gaussianity>,
    pub checks: Checks,
    pub pass: bool,
    pub notes: Vec<String>,
}

fn z_score(emp: f64, target: f64, se: f64) -> f64 {
    if se > 0.0 {
        (emp - target) / se
    } else if emp == target {
        0.0
    } else {
        (emp - target).signum() * f64::INFINITY
    }
}

/// Runs the plan on a pool of `workers` threads. The report does not depend on
/// `workers`.
pub fn run_invariance_experiment(plan: &ExperimentPlan, workers: usize) -> Result<VerdictReport> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Resource(format!("worker pool: {e}")))?;
    pool.install(|| run_inner(plan))
}

fn run_inner(plan: &ExperimentPlan) -> Result<VerdictReport> {
    let model = plan.model.build()?;
    let regime = classify(&model.exponent, &plan.alpha_primes)?;
    regime.require_valid()?;
    let h = regime.exponent_h()?;
    let table = build_qtable(&model, plan.qtable_extent, plan.site_budget)?;
    if !table.sum_sq_tail_estimate.is_finite() {
        return Err(Error::Domain(
            "sum of q_k^2 does not converge on the table (single-component regime); plan rejected".into(),
        ));
    }
    let sigma_x2 = table.sigma_x2(model.p);
    let pairs = plan.pairs();
    let points: Vec<(Vec<f64>, Vec<f64>)> =
        pairs.iter().map(|&(i, j)| (plan.t_grid[i].clone(), plan.t_grid[j].clone())).collect();
    let targets = cov_grid(&regime, &model, sigma_x2, &points, &plan.quad)?;

    let mut rows = Vec::new();
    let mut scales = Vec::new();
    let mut last_samples = Vec::new();
    for (stage, &n) in plan.n_schedule.iter().enumerate() {
        let extents = window_extents(n as f64, &plan.alpha_primes);
        let depth = plan.buffer_depth(&extents);
        let norm = (n as f64).powf(h);
        let runs: Vec<Result<(Vec<f64>, f64, usize)>> = (0..plan.replicas)
            .into_par_iter()
            .map(|r| {
                let seed = rng::replica_seed(plan.seed, stage as u64, r as u64);
                let w = graph_field::simulate_window(&model, &extents, depth, seed, plan.site_budget)?;
                let sums = graph_field::partial_sums(&w, &plan.t_grid, r as u64)?;
                let x = sums.centered(model.p).into_iter().map(|v| v / norm).collect();
                Ok((x, w.truncated_fraction(), w.tracked_sites))
            })
            .collect();
        let mut samples = Vec::with_capacity(plan.replicas);
        let mut trunc = 0.0;
        let mut tracked = 0.0;
        for run in runs {
            let (x, f, t) = run?;
            samples.push(x);
            trunc += f;
            tracked += t as f64;
        }
        scales.push(ScaleSummary {
            n,
            extents: extents.clone(),
            buffer_depth: depth,
            mean_truncated_fraction: trunc / plan.replicas as f64,
            mean_tracked_sites: tracked / plan.replicas as f64,
        });
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let prod: Vec<f64> = samples.iter().map(|x| x[i] * x[j]).collect();
            let empirical = stats::mean(&prod);
            let se = stats::jackknife_se_mean(&prod);
            let target = targets.values[p];
            rows.push(VerdictRow {
                n,
                t: plan.t_grid[i].clone(),
                s: plan.t_grid[j].clone(),
                empirical,
                se,
                target,
                target_error: targets.est_error[p],
                z: z_score(empirical, target, se),
                ratio: if target != 0.0 { empirical / target } else { f64::NAN },
            });
        }
        last_samples = samples;
    }

    let np = pairs.len();
    let last = &rows[rows.len() - np..];
    let within_tolerance = last.iter().zip(&pairs).filter(|(_, (i, j))| i == j).all(|(r, _)| {
        if r.target == 0.0 {
            r.empirical == 0.0
        } else {
            (r.ratio - 1.0).abs() <= plan.tolerances.rel_tol
        }
    });
    let z_scores = last.iter().all(|r| r.z.abs() <= plan.tolerances.z_max);
    let trend: Vec<Trend> = (0..np)
        .map(|p| {
            let series: Vec<&VerdictRow> = rows.iter().skip(p).step_by(np).collect();
            let ratios: Vec<f64> = series.iter().map(|r| r.ratio).collect();
            let ratio_se: Vec<f64> = series.iter().map(|r| r.se / r.target.abs()).collect();
            let monotone = series[0].target == 0.0
                || (1..ratios.len()).all(|k| {
                    let slack = plan.tolerances.trend_z * ratio_se[k].hypot(ratio_se[k - 1]);
                    (ratios[k] - 1.0).abs() <= (ratios[k - 1] - 1.0).abs() + slack
                });
            Trend { pair: pairs[p], ratios, ratio_se, monotone }
        })
        .collect();
    let trend_ok = trend.iter().all(|t| t.monotone);
    let gaussianity = plan.gaussianity_point.map(|g| {
        let x: Vec<f64> = last_samples.iter().map(|s| s[g]).collect();
        stats::gaussianity_test(&x)
    });
    let checks = Checks {
        within_tolerance,
        z_scores,
        trend: trend_ok,
        gaussianity: gaussianity.as_ref().map(|g| g.pass),
    };
    let pass = checks.within_tolerance && checks.z_scores && checks.trend && checks.gaussianity.unwrap_or(true);
    Ok(VerdictReport {
        schema_version: SCHEMA_VERSION,
        plan: plan.clone(),
        sigma_x2,
        normalization_exponent: h,
        regime,
        scales,
        rows,
        trend,
        gaussianity,
        checks,
        pass,
        notes: vec![
            "tolerances are engineering choices: the invariance principle states no rate".into(),
            "centering uses the exact mean (2p-1)|R(n,t)|".into(),
            "ancestral chains are truncated at the buffer depth; truncation can only miss merges".into(),
        ],
    })
}

/// Gaussianity of raw samples (thin wrapper kept beside the experiment API).
pub fn gaussianity_test(samples: &[f64]) -> Result<Gaussianity> {
    if samples.len() < 100 {
        return Err(Error::Config(format!("Gaussianity test needs at least 100 samples, got {}", samples.len())));
    }
    Ok(stats::gaussianity_test(samples))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityConfig {
    pub qtable_extent: usize,
    pub var_replicas: usize,
    pub var_k: usize,
    pub var_buffer: usize,
    pub meeting_offsets: Vec<Vec<i64>>,
    pub meeting_replicas: usize,
    pub meeting_depth: usize,
    pub seed: u64,
    pub z_max: f64,
    pub site_budget: u64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig {
            qtable_extent: 1 << 14,
            var_replicas: 10_000,
            var_k: 1 << 12,
            var_buffer: 1 << 18,
            meeting_offsets: vec![vec![8], vec![32], vec![128]],
            meeting_replicas: 100_000,
            meeting_depth: 1 << 14,
            seed: 0,
            z_max: 3.0,
            site_budget: DEFAULT_SITE_BUDGET,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VarCheck {
    pub mc: f64,
    pub se: f64,
    pub target: f64,
    pub z: f64,
    pub truncation_bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeetingCheck {
    pub offset: Vec<i64>,
    pub mc: f64,
    pub se: f64,
    pub target: f64,
    /// Extrapolated part of the correlation sum beyond the table.
    pub residue: f64,
    pub z: f64,
    /// `|mc - target| <= z_max se + residue`: both sides miss far meetings.
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IdentityReport {
    pub schema_version: u32,
    pub sum_sq: f64,
    pub var_xstar: VarCheck,
    pub meeting: Vec<MeetingCheck>,
    pub pass: bool,
}

/// Monte Carlo against q-table values for `Var(X*_0)` and meeting
/// probabilities.
pub fn verify_identities(model: &SpectralModel, cfg: &IdentityConfig) -> Result<IdentityReport> {
    let table = build_qtable(model, cfg.qtable_extent, cfg.site_budget)?;
    let v = graph_field::estimate_var_xstar(model, cfg.var_replicas, cfg.var_k, cfg.var_buffer, cfg.seed)?;
    let target = table.sigma_x2(model.p);
    let z = z_score(v.estimate.value, target, v.estimate.se);
    let var_xstar = VarCheck {
        mc: v.estimate.value,
        se: v.estimate.se,
        target,
        z,
        truncation_bound: v.truncation_bound,
        pass: z.abs() <= cfg.z_max,
    };
    let mut meeting = Vec::new();
    for (i, off) in cfg.meeting_offsets.iter().enumerate() {
        if off.iter().any(|c| c.unsigned_abs() as usize > cfg.qtable_extent) {
            return Err(Error::Config(format!("offset {off:?} exceeds the q-table extent")));
        }
        let exact = table.pair_meeting_prob(off);
        let seed = rng::key(cfg.seed, rng::tag::REPLICA, &[0x3e, i as i64]);
        let e = graph_field::estimate_meeting_prob(model, off, cfg.meeting_replicas, cfg.meeting_depth, seed)?;
        let diff = e.estimate.value - exact.value;
        meeting.push(MeetingCheck {
            offset: off.clone(),
            mc: e.estimate.value,
            se: e.estimate.se,
            target: exact.value,
            residue: exact.residue,
            z: z_score(e.estimate.value, exact.value, e.estimate.se),
            pass: diff.abs() <= cfg.z_max * e.estimate.se + exact.residue.abs(),
        });
    }
    let pass = var_xstar.pass && meeting.iter().all(|m| m.pass);
    Ok(IdentityReport { schema_version: SCHEMA_VERSION, sum_sq: table.sum_sq, var_xstar, meeting, pass })
}

/// Window extents and the rectangle sizes `|R(n, t)|` a plan will use.
pub fn plan_boxes(plan: &ExperimentPlan) -> Vec<(u64, Vec<usize>, Vec<Vec<usize>>)> {
    plan.n_schedule
        .iter()
        .map(|&n| {
            let ext = window_extents(n as f64, &plan.alpha_primes);
            let boxes = plan.t_grid.iter().map(|t| box_extents(&ext, t)).collect();
            (n, ext, boxes)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan(p: f64) -> ExperimentPlan {
        ExperimentPlan {
            model: ModelSpec::product(&[0.3], p),
            alpha_primes: vec![1.0],
            n_schedule: vec![256, 512],
            replicas: 40,
            t_grid: vec![vec![1.0], vec![0.5]],
            pairs: Some(vec![(0, 0), (0, 1)]),
            seed: 17,
            buffer_factor: 4.0,
            site_budget: DEFAULT_SITE_BUDGET,
            qtable_extent: 256,
            tolerances: Tolerances::default(),
            gaussianity_point: None,
            quad: QuadConfig::fast(),
        }
    }

    #[test]
    fn degenerate_marginal_gives_zero_everywhere() {
        let r = run_invariance_experiment(&small_plan(1.0), 1).unwrap();
        assert!(r.rows.iter().all(|row| row.empirical == 0.0 && row.target == 0.0 && row.z == 0.0));
        assert!(r.checks.within_tolerance);
    }

    #[test]
    fn single_component_plan_is_rejected() {
        let mut plan = small_plan(0.5);
        plan.model.pmf = Some(vec![crate::spectral_models::PmfEntry { step: vec![1], prob: 1.0 }]);
        assert!(matches!(run_invariance_experiment(&plan, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn schedule_must_increase() {
        let mut plan = small_plan(0.5);
        plan.n_schedule = vec![512, 256];
        assert!(matches!(plan.validate(), Err(Error::Config(_))));
    }
}
