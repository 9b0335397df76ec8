//! A small invariance experiment: normalized partial-sum covariances against
//! the limit as the window grows.

use osgrf::error::Result;
use osgrf::limit_field::QuadConfig;
use osgrf::montecarlo::{run_invariance_experiment, ExperimentPlan, Tolerances};
use osgrf::spectral_models::ModelSpec;

pub fn run_example() -> Result<()> {
    let plan = ExperimentPlan {
        model: ModelSpec::product(&[0.3], 0.5),
        alpha_primes: vec![1.0],
        n_schedule: vec![256, 1024],
        replicas: 100,
        t_grid: vec![vec![1.0], vec![0.5]],
        pairs: Some(vec![(0, 0), (0, 1), (1, 1)]),
        seed: 2024,
        buffer_factor: 16.0,
        site_budget: 1 << 26,
        qtable_extent: 1 << 12,
        tolerances: Tolerances { rel_tol: 0.3, ..Tolerances::default() },
        gaussianity_point: Some(0),
        quad: QuadConfig::fast(),
    };
    let report = run_invariance_experiment(&plan, 2)?;
    println!("H = {:.3}, sigma_X^2 = {:.5}", report.normalization_exponent, report.sigma_x2);
    for r in &report.rows {
        println!(
            "n {:>5} t {:?} s {:?}: {:.4} ± {:.4} vs {:.4} (z {:+.2})",
            r.n, r.t, r.s, r.empirical, r.se, r.target, r.z
        );
    }
    for s in &report.scales {
        println!("n {}: buffer {} mean truncated fraction {:.3}", s.n, s.buffer_depth, s.mean_truncated_fraction);
    }
    println!("checks {:?} -> pass {}", report.checks, report.pass);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
