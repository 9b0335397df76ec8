//! Monte Carlo against the exact second-order identities: innovation
//! variance and meeting probabilities of two ancestral lines.

use osgrf::error::Result;
use osgrf::montecarlo::{verify_identities, IdentityConfig};
use osgrf::spectral_models::SpectralModel;

pub fn run_example() -> Result<()> {
    let model = SpectralModel::product_pareto(&[0.3], 0.5)?;
    let cfg = IdentityConfig {
        qtable_extent: 1 << 12,
        var_replicas: 1000,
        var_k: 512,
        var_buffer: 1 << 14,
        meeting_offsets: vec![vec![4], vec![16]],
        meeting_replicas: 5000,
        meeting_depth: 1 << 12,
        seed: 9,
        ..IdentityConfig::default()
    };
    let r = verify_identities(&model, &cfg)?;
    let v = &r.var_xstar;
    println!("Var X*_0: MC {:.4} ± {:.4}, exact {:.4}, z {:+.2}", v.mc, v.se, v.target, v.z);
    for m in &r.meeting {
        println!("meet {:?}: MC {:.4} ± {:.4}, exact {:.4}, z {:+.2}", m.offset, m.mc, m.se, m.target, m.z);
    }
    println!("pass {}", r.pass);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
