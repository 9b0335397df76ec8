//! Covariance of the Gaussian limit: quadrature, the fractional-Brownian-sheet
//! closed form where it exists, and the operator-scaling property.

use osgrf::error::Result;
use osgrf::limit_field::{closed_form_cov, cov_w, operator_scaling_check, QuadConfig};
use osgrf::regime::classify;
use osgrf::spectral_models::SpectralModel;

pub fn run_example() -> Result<()> {
    let cfg = QuadConfig::default();

    let m1 = SpectralModel::product_pareto(&[0.3], 0.5)?;
    let r1 = classify(&m1.exponent, &[1.0])?;
    for (t, s) in [(1.0, 1.0), (0.5, 1.0), (0.25, 0.75)] {
        let q = cov_w(&r1, &m1, 1.0, &[t], &[s], &cfg)?;
        let c = closed_form_cov(&r1, &m1, 1.0, &[t], &[s])?;
        println!("d=1 cov({t}, {s}) = {:.8} ± {:.1e}  closed form {:.8}", q.value, q.est_error, c);
    }

    let m2 = SpectralModel::product_pareto(&[0.7, 0.4], 0.5)?;
    let r2 = classify(&m2.exponent, &[0.7, 0.6])?;
    let (t, s) = ([1.0, 0.5], [0.5, 1.0]);
    let q = cov_w(&r2, &m2, 1.0, &t, &s, &cfg)?;
    println!("planar cov = {:.6}  closed form {:.6}", q.value, closed_form_cov(&r2, &m2, 1.0, &t, &s)?);
    for lambda in [0.5, 2.0] {
        let res = operator_scaling_check(&r2, &m2, lambda, &t, &s, &cfg)?;
        println!("scaling residual at lambda {lambda}: {res:.1e}");
    }

    let mc = SpectralModel::product_pareto(&[0.6, 0.6], 0.5)?;
    let rc = classify(&mc.exponent, &[0.6, 0.6])?;
    let v = cov_w(&rc, &mc, 1.0, &[1.0, 1.0], &[1.0, 1.0], &cfg)?;
    println!("critical d=2 Var W(1,1) = {:.6} ± {:.1e} (H = {})", v.value, v.est_error, rc.h.unwrap());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
