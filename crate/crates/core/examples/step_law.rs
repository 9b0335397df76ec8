//! Heavy-tailed lattice steps: sampling, exact probabilities, and how close
//! `1 - P` gets to the stable exponent `log psi` near the origin.

use osgrf::error::Result;
use osgrf::rng;
use osgrf::spectral_models::SpectralModel;

pub fn run_example() -> Result<()> {
    let model = SpectralModel::product_pareto(&[0.3, 0.6], 0.5)?;
    println!("alphas {:?}, calibrated gammas {:?}", model.alphas(), model.gammas);

    let mut step = [0i64; 2];
    for i in 0..5 {
        model.sample_step(rng::key(7, rng::tag::STEP, &[i]), &mut step);
        println!("step {i}: {step:?}  pmf {:.3e}", model.pmf(&step)?);
    }

    // |1 - P| / |log psi| tends to one along every direction as the scale grows
    let dirs = vec![vec![1.0, 0.0], vec![0.6, -0.8], vec![0.0, 1.0]];
    for g in model.g_ratio_check(&dirs, &[1e1, 1e3, 1e5]) {
        println!("theta {:?} t {:>8.0e}: ratio {:.6}", g.direction, g.scale, g.ratio);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
