//! Which limit does a window shape produce? Prints the axis partition,
//! normalization exponent and Hölder exponents for a few `(E, E')` pairs.

use osgrf::error::Result;
use osgrf::regime::{classify, planar_case};
use osgrf::spectral_models::ExponentMatrix;

pub fn run_example() -> Result<()> {
    let cases: [(&[f64], &[f64]); 5] = [
        (&[0.3], &[1.0]),
        (&[0.5], &[0.5]),
        (&[0.6, 0.6], &[0.6, 0.6]),
        (&[0.7, 0.4], &[0.7, 0.6]),
        (&[0.3, 0.6], &[0.3, 0.9]),
    ];
    for (a, ap) in cases {
        let r = classify(&ExponentMatrix::new(a.to_vec())?, ap)?;
        println!("alpha {a:?} alpha' {ap:?}");
        if !r.valid {
            println!("  invalid: {}", r.reasons.join("; "));
            continue;
        }
        println!(
            "  gamma0 {:.6}  partition {:?}  H {:.6}  holder {:?}  fBs {}",
            r.gamma0.unwrap(),
            r.partition,
            r.h.unwrap(),
            r.holder,
            r.is_fbs
        );
        if a.len() == 2 && !r.is_critical {
            let c = planar_case(a[0], a[1], ap[1])?;
            println!("  planar case {}: beta {:.6}, Hurst ({}, {})", c.case, c.beta, c.h1, c.h2);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
