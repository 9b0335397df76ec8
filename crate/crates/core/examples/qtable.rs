//! Ancestral-line probabilities `q_k`, the innovation variance and meeting
//! probabilities, with a Parseval cross-check against the Fourier side.

use osgrf::error::Result;
use osgrf::q_engine::{build_qtable, parseval_check, recursion_residual};
use osgrf::spectral_models::SpectralModel;

pub fn run_example() -> Result<()> {
    let model = SpectralModel::product_pareto(&[0.3], 0.5)?;
    let table = build_qtable(&model, 1 << 12, u64::MAX)?;
    println!("q_0..q_4 = {:?}", &table.values[..5]);
    println!("sum q^2 = {:.6} (+{:.2e} beyond the box)", table.sum_sq, table.sum_sq_tail_estimate);
    println!("Var X*_0 = {:.6}", table.sigma_x2(model.p));
    println!("recursion residual {:.1e}", recursion_residual(&model, &table)?);
    for m in [1, 8, 64] {
        let mp = table.pair_meeting_prob(&[m]);
        println!("P(lines of 0 and {m} meet) = {:.5} (residue {:.1e})", mp.value, mp.residue);
    }
    let pv = parseval_check(&model, &table, 8)?;
    println!("Parseval: table {:.6} vs integral {:.6}, rel {:.2e}", pv.sum_sq, pv.integral, pv.rel_discrepancy);

    let planar = SpectralModel::product_pareto(&[0.6, 0.6], 0.5)?;
    let t2 = build_qtable(&planar, 64, u64::MAX)?;
    println!("d=2: q(1,1) = {:.5}, sum q^2 = {:.5}", t2.get(&[1, 1]), t2.sum_sq);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
