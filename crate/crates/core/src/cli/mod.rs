//! Command-line front end: one TOML config plus flag overrides, outputs under a
//! run directory with a `manifest.json`.
//!
//! Exit codes: 0 success, 2 configuration or domain error, 3 numerical
//! tolerance failure (including a failed `verify` verdict), 4 resource budget.

mod config;

pub use config::{
    ClassifySection, LimitCovSection, ModelSection, QtableSection, RunConfig, ScalingSection, SimulateSection,
    SynthesizeSection, VerifySection,
};

use crate::error::{Error, Result};
use crate::graph_field::{partial_sums, simulate_window, window_extents};
use crate::limit_field::{cov_grid, discretization_check, synthesize_w};
use crate::montecarlo::{run_invariance_experiment, verify_identities, ExperimentPlan, SCHEMA_VERSION};
use crate::q_engine::build_qtable;
use crate::regime::{classify_with, RegimeReport};
use crate::rng;
use crate::spectral_models::{ExponentMatrix, SpectralModel};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SEED_ENV: &str = "OSGRF_SEED";

#[derive(Parser, Debug)]
#[command(name = "osgrf", version, about = "Ancestor-graph random fields and their Gaussian limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Step exponents alpha_1..alpha_d.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Window exponents alpha'_1..alpha'_d.
    #[arg(long = "alpha-prime", value_delimiter = ',')]
    alpha_prime: Option<Vec<f64>>,
    /// Per-axis scales of log psi (default: calibrated to the step law).
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// Probability of the +1 value.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default `osgrf-out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regime report for (E, E').
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        free_holder: Option<f64>,
    },
    /// q_k table on [0, N]^d.
    Qtable {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        extent: Option<usize>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Limit covariance at the (t, s) pairs of a points CSV.
    LimitCov {
        #[command(flatten)]
        common: Common,
        /// CSV with columns t_1..t_d, s_1..s_d.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Simulate windows and write their partial sums.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        buffer_depth: Option<usize>,
    },
    /// Spectral synthesis of the limit field.
    SynthesizeW {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        realizations: Option<usize>,
        /// One CSV per realization instead of a single long-format file.
        #[arg(long)]
        per_realization: bool,
    },
    /// Invariance experiment (and optional identity checks).
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        n_schedule: Option<Vec<u64>>,
        #[arg(long)]
        replicas: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::Qtable { .. } => "qtable",
            Command::LimitCov { .. } => "limit-cov",
            Command::Simulate { .. } => "simulate",
            Command::SynthesizeW { .. } => "synthesize-w",
            Command::Verify { .. } => "verify",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Classify { common, .. }
            | Command::Qtable { common, .. }
            | Command::LimitCov { common, .. }
            | Command::Simulate { common, .. }
            | Command::SynthesizeW { common, .. }
            | Command::Verify { common, .. } => common,
        }
    }

    fn stochastic(&self) -> bool {
        matches!(self, Command::Simulate { .. } | Command::SynthesizeW { .. } | Command::Verify { .. })
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code. Diagnostics go to stderr.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("osgrf: {e}");
            e.exit_code()
        }
    }
}

fn run(cmd: Command) -> Result<i32> {
    let start = Instant::now();
    let cfg = effective_config(&cmd, std::env::var(SEED_ENV).ok())?;
    let out = cfg.output_dir.clone().expect("resolved");
    fs::create_dir_all(&out)?;
    let workers = cfg.workers.unwrap_or(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Resource(format!("worker pool: {e}")))?;
    let (files, code) = pool.install(|| match &cmd {
        Command::Classify { .. } => run_classify(&cfg, &out),
        Command::Qtable { .. } => run_qtable(&cfg, &out),
        Command::LimitCov { .. } => run_limit_cov(&cfg, &out),
        Command::Simulate { .. } => run_simulate(&cfg, &out),
        Command::SynthesizeW { .. } => run_synthesize(&cfg, &out),
        Command::Verify { .. } => run_verify(&cfg, &out, workers),
    })?;
    write_manifest(&out, cmd.name(), &cfg, &files, start.elapsed().as_secs_f64())?;
    Ok(code)
}

/// Merges the config file, flags and the seed environment variable; flags win.
fn effective_config(cmd: &Command, env_seed: Option<String>) -> Result<RunConfig> {
    let common = cmd.common();
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(a) = &common.alpha {
        cfg.model.alphas = Some(a.clone());
    }
    if let Some(g) = &common.gamma {
        cfg.model.gammas = Some(g.clone());
    }
    if let Some(p) = common.p {
        cfg.model.p = Some(p);
    }
    if let Some(a) = &common.alpha_prime {
        cfg.scaling.alpha_primes = Some(a.clone());
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = Some(o.clone());
    }
    match cmd {
        Command::Classify { free_holder, .. } => {
            if free_holder.is_some() {
                cfg.classify.free_holder = *free_holder;
            }
        }
        Command::Qtable { extent, budget, .. } => {
            if let Some(e) = extent {
                cfg.qtable.extent = *e;
            }
            if let Some(b) = budget {
                cfg.qtable.budget = *b;
            }
        }
        Command::LimitCov { points, .. } => {
            if let Some(p) = points {
                cfg.limit_cov.points_file = Some(p.clone());
            }
        }
        Command::Simulate { n, replicas, buffer_depth, .. } => {
            if n.is_some() {
                cfg.simulate.n = *n;
            }
            if let Some(r) = replicas {
                cfg.simulate.replicas = *r;
            }
            if buffer_depth.is_some() {
                cfg.simulate.buffer_depth = *buffer_depth;
            }
        }
        Command::SynthesizeW { realizations, per_realization, .. } => {
            if let Some(r) = realizations {
                cfg.synthesize.realizations = *r;
            }
            if *per_realization {
                cfg.synthesize.per_realization = true;
            }
        }
        Command::Verify { n_schedule, replicas, .. } => {
            if n_schedule.is_some() {
                cfg.scaling.n_schedule = n_schedule.clone();
            }
            if let Some(r) = replicas {
                cfg.verify.replicas = *r;
            }
        }
    }
    if cfg.seed.is_none() {
        if let Some(s) = env_seed {
            let s = s.trim();
            cfg.seed = Some(s.parse().map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not a u64")))?);
        }
    }
    if cmd.stochastic() && cfg.seed.is_none() {
        return Err(Error::Config(format!(
            "`{}` needs a seed: pass --seed, set `seed` in the config or {SEED_ENV}",
            cmd.name()
        )));
    }
    if cfg.workers == Some(0) {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    cfg.resolve_paths()?;
    Ok(cfg)
}

type Outcome = (Vec<String>, i32);

fn model_of(cfg: &RunConfig) -> Result<SpectralModel> {
    cfg.model.spec()?.build()
}

fn regime_of(cfg: &RunConfig, model: &SpectralModel) -> Result<RegimeReport> {
    let ap = cfg.scaling.alpha_primes()?;
    classify_with(&model.exponent, &ap, cfg.classify.free_holder.unwrap_or(crate::regime::FREE_HOLDER_DEFAULT))
}

fn sigma_x2_of(cfg: &RunConfig, model: &SpectralModel) -> Result<f64> {
    let table = build_qtable(model, cfg.qtable.extent, cfg.qtable.budget)?;
    Ok(table.sigma_x2(model.p))
}

fn run_classify(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let alphas = cfg.model.alphas.clone().ok_or_else(|| Error::Config("model.alphas (--alpha) is required".into()))?;
    let e = ExponentMatrix::new(alphas)?;
    let ap = cfg.scaling.alpha_primes()?;
    let report = classify_with(&e, &ap, cfg.classify.free_holder.unwrap_or(crate::regime::FREE_HOLDER_DEFAULT))?;
    let body = json!({ "schema_version": SCHEMA_VERSION, "regime": report });
    write_json(&out.join("regime.json"), &body)?;
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&body).expect("serializable"));
    Ok((vec!["regime.json".into()], 0))
}

fn run_qtable(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let model = model_of(cfg)?;
    let table = build_qtable(&model, cfg.qtable.extent, cfg.qtable.budget)?;
    let bytes: Vec<u8> = table.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(out.join("qtable.bin"), &bytes)?;
    let header = json!({
        "schema_version": SCHEMA_VERSION,
        "dims": table.dim,
        "extent": table.extent,
        "shape": vec![table.side(); table.dim],
        "len": table.values.len(),
        "dtype": "f64-le",
        "order": "colexicographic, axis 0 fastest",
        "sha256": hex(&Sha256::digest(&bytes)),
    });
    write_json(&out.join("qtable.json"), &header)?;
    let mut w = csv_writer(&out.join("qtable.csv"))?;
    w.write_record(["sum_sq", "sigma_x2", "tail_mass", "sum_sq_tail_estimate", "nonmonotone_cells"]).map_err(csv_err)?;
    w.write_record([
        table.sum_sq.to_string(),
        table.sigma_x2(model.p).to_string(),
        table.tail_mass.to_string(),
        table.sum_sq_tail_estimate.to_string(),
        table.nonmonotone_cells.to_string(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok((vec!["qtable.bin".into(), "qtable.json".into(), "qtable.csv".into()], 0))
}

fn run_limit_cov(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let model = model_of(cfg)?;
    let regime = regime_of(cfg, &model)?;
    regime.require_valid()?;
    let d = model.dim();
    let points = cfg.limit_cov.points(d)?;
    let sigma_x2 = sigma_x2_of(cfg, &model)?;
    let grid = cov_grid(&regime, &model, sigma_x2, &points, &cfg.limit_cov.quad)?;
    let mut w = csv_writer(&out.join("limit_cov.csv"))?;
    let mut head: Vec<String> = (1..=d).map(|k| format!("t_{k}")).collect();
    head.extend((1..=d).map(|k| format!("s_{k}")));
    head.extend(["value".into(), "est_error".into()]);
    w.write_record(&head).map_err(csv_err)?;
    for (i, (t, s)) in grid.points.iter().enumerate() {
        let mut row: Vec<String> = t.iter().chain(s).map(|x| x.to_string()).collect();
        row.push(grid.values[i].to_string());
        row.push(grid.est_error[i].to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    let body = json!({ "schema_version": SCHEMA_VERSION, "regime": regime, "sigma_x2": sigma_x2, "grid": grid });
    write_json(&out.join("limit_cov.json"), &body)?;
    Ok((vec!["limit_cov.csv".into(), "limit_cov.json".into()], 0))
}

fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let model = model_of(cfg)?;
    let d = model.dim();
    let ap = cfg.scaling.alpha_primes()?;
    if ap.len() != d {
        return Err(Error::Config("alpha_primes length differs from alphas".into()));
    }
    let n = cfg.simulate.n.ok_or_else(|| Error::Config("simulate.n (--n) is required".into()))?;
    let seed = cfg.seed.expect("checked");
    let extents = window_extents(n as f64, &ap);
    let depth = cfg.simulate.buffer_depth.unwrap_or(*extents.iter().max().expect("d >= 1"));
    let t_grid = cfg.simulate.t_grid.clone().unwrap_or_else(|| vec![vec![1.0; d]]);
    let sims: Vec<Result<_>> = {
        use rayon::prelude::*;
        (0..cfg.simulate.replicas)
            .into_par_iter()
            .map(|r| {
                let s = rng::replica_seed(seed, 0, r as u64);
                let w = simulate_window(&model, &extents, depth, s, cfg.simulate.site_budget)?;
                let sums = partial_sums(&w, &t_grid, r as u64)?;
                Ok((w.truncated_components, w.tracked_sites, sums))
            })
            .collect()
    };
    let mut w = csv_writer(&out.join("simulate.csv"))?;
    let mut head = vec!["replica".to_string()];
    head.extend((1..=d).map(|k| format!("t_{k}")));
    head.extend(["S".into(), "S_centered".into()]);
    w.write_record(&head).map_err(csv_err)?;
    let mut meta = Vec::new();
    for sim in sims {
        let (truncated, tracked, sums) = sim?;
        let centered = sums.centered(model.p);
        for (i, t) in sums.t_grid.iter().enumerate() {
            let mut row = vec![sums.replica.to_string()];
            row.extend(t.iter().map(|x| x.to_string()));
            row.push(sums.sums[i].to_string());
            row.push(centered[i].to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        meta.push(json!({
            "replica": sums.replica,
            "seed": sums.seed,
            "truncated_components": truncated,
            "tracked_sites": tracked,
        }));
    }
    w.flush()?;
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "n": n,
        "extents": extents,
        "buffer_depth": depth,
        "seed": seed,
        "replicas": meta,
    });
    write_json(&out.join("simulate.json"), &body)?;
    Ok((vec!["simulate.csv".into(), "simulate.json".into()], 0))
}

fn run_synthesize(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let model = model_of(cfg)?;
    let regime = regime_of(cfg, &model)?;
    let d = model.dim();
    let points = cfg.synthesize.points.clone().unwrap_or_else(|| vec![vec![1.0; d]]);
    let sigma_x2 = sigma_x2_of(cfg, &model)?;
    let mut sc = cfg.synthesize.grid.clone();
    sc.seed = cfg.seed.expect("checked");
    let syn = synthesize_w(&regime, &model, sigma_x2, &points, &sc, cfg.synthesize.realizations)?;
    let mut head = vec!["point".to_string()];
    head.extend((1..=d).map(|k| format!("t_{k}")));
    head.push("w".into());
    let mut files = Vec::new();
    let row = |i: usize, v: f64| -> Vec<String> {
        let mut r = vec![i.to_string()];
        r.extend(points[i].iter().map(|x| x.to_string()));
        r.push(v.to_string());
        r
    };
    if cfg.synthesize.per_realization {
        for (r, vals) in syn.values.iter().enumerate() {
            let name = format!("synthesize_w_{r:05}.csv");
            let mut w = csv_writer(&out.join(&name))?;
            w.write_record(&head).map_err(csv_err)?;
            for (i, &v) in vals.iter().enumerate() {
                w.write_record(row(i, v)).map_err(csv_err)?;
            }
            w.flush()?;
            files.push(name);
        }
    } else {
        let mut w = csv_writer(&out.join("synthesize_w.csv"))?;
        let mut h = vec!["realization".to_string()];
        h.extend(head.iter().cloned());
        w.write_record(&h).map_err(csv_err)?;
        for (r, vals) in syn.values.iter().enumerate() {
            for (i, &v) in vals.iter().enumerate() {
                let mut rec = vec![r.to_string()];
                rec.extend(row(i, v));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush()?;
        files.push("synthesize_w.csv".into());
    }
    let n = points.len();
    let grid_cov: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| syn.grid_cov(i, j)).collect()).collect();
    let check = discretization_check(&syn, &regime, &model, sigma_x2, &cfg.limit_cov.quad, cfg.synthesize.gap_warning)?;
    for w in &check.warnings {
        eprintln!("osgrf: warning: {w}");
    }
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "points": points,
        "cells": syn.cells,
        "sigma_x2": sigma_x2,
        "config": sc,
        "discretized_covariance": grid_cov,
        "discretization": check,
    });
    write_json(&out.join("synthesize_w.json"), &body)?;
    files.push("synthesize_w.json".into());
    Ok((files, 0))
}

fn run_verify(cfg: &RunConfig, out: &Path, workers: usize) -> Result<Outcome> {
    let v = &cfg.verify;
    let d = cfg.model.alphas.as_ref().map(|a| a.len()).unwrap_or(0);
    let plan = ExperimentPlan {
        model: cfg.model.spec()?,
        alpha_primes: cfg.scaling.alpha_primes()?,
        n_schedule: cfg
            .scaling
            .n_schedule
            .clone()
            .ok_or_else(|| Error::Config("scaling.n_schedule (--n-schedule) is required".into()))?,
        replicas: v.replicas,
        t_grid: v.t_grid.clone().unwrap_or_else(|| vec![vec![1.0; d]]),
        pairs: v.pairs.clone(),
        seed: cfg.seed.expect("checked"),
        buffer_factor: v.buffer_factor,
        site_budget: v.site_budget,
        qtable_extent: cfg.qtable.extent,
        tolerances: v.tolerances.clone(),
        gaussianity_point: v.gaussianity_point,
        quad: v.quad.clone(),
    };
    let report = run_invariance_experiment(&plan, workers)?;
    write_json(&out.join("verdict.json"), &report)?;
    let mut w = csv_writer(&out.join("verdict.csv"))?;
    w.write_record(["n", "t", "s", "empirical", "se", "target", "z"]).map_err(csv_err)?;
    let join = |x: &[f64]| x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
    for r in &report.rows {
        w.write_record([
            r.n.to_string(),
            join(&r.t),
            join(&r.s),
            r.empirical.to_string(),
            r.se.to_string(),
            r.target.to_string(),
            r.z.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    let mut files = vec!["verdict.json".to_string(), "verdict.csv".to_string()];
    let mut pass = report.pass;
    if let Some(ic) = &v.identities {
        let mut ic = ic.clone();
        ic.seed = plan.seed;
        let model = plan.model.build()?;
        let id = verify_identities(&model, &ic)?;
        pass &= id.pass;
        write_json(&out.join("identities.json"), &id)?;
        files.push("identities.json".into());
    }
    if !pass {
        eprintln!("osgrf: verdict failed, see {}", out.join("verdict.json").display());
    }
    Ok((files, if pass { 0 } else { 3 }))
}

fn write_manifest(out: &Path, command: &str, cfg: &RunConfig, files: &[String], wall: f64) -> Result<()> {
    let canonical = serde_json::to_string(cfg).expect("serializable");
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": hex(&Sha256::digest(canonical.as_bytes())),
        "effective_config": cfg,
        "seed": cfg.seed,
        "workers": cfg.workers.unwrap_or(1),
        "outputs": files,
        "wall_time_s": wall,
    });
    write_json(&out.join("manifest.json"), &body)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Internal(e.to_string()))?;
    f.write_all(b"\n")?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(fs::File::create(path)?))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        Cli::try_parse_from(std::iter::once("osgrf").chain(args.iter().copied())).unwrap().command
    }

    #[test]
    fn flags_override_and_seed_falls_back_to_env() {
        let cmd = parse(&["simulate", "--alpha", "0.3", "--alpha-prime", "1", "--n", "16"]);
        let cfg = effective_config(&cmd, Some("42".into())).unwrap();
        assert_eq!(cfg.seed, Some(42));
        assert_eq!(cfg.model.alphas, Some(vec![0.3]));
        let cmd = parse(&["simulate", "--alpha", "0.3", "--seed", "7"]);
        assert_eq!(effective_config(&cmd, Some("42".into())).unwrap().seed, Some(7));
    }

    #[test]
    fn stochastic_commands_need_a_seed() {
        let cmd = parse(&["simulate", "--alpha", "0.3", "--alpha-prime", "1", "--n", "16"]);
        assert!(matches!(effective_config(&cmd, None), Err(Error::Config(_))));
        let cmd = parse(&["classify", "--alpha", "0.3", "--alpha-prime", "1"]);
        assert!(effective_config(&cmd, None).is_ok());
    }

    #[test]
    fn bad_env_seed_is_a_config_error() {
        let cmd = parse(&["verify", "--alpha", "0.3"]);
        assert!(matches!(effective_config(&cmd, Some("x".into())), Err(Error::Config(_))));
    }
}
