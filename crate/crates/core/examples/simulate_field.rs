//! Simulates a ±1 field on a planar window and draws its components, then
//! reports the partial sums that feed the invariance experiments.

use osgrf::error::Result;
use osgrf::graph_field::{partial_sums, simulate_window, window_extents, DEFAULT_SITE_BUDGET};
use osgrf::spectral_models::SpectralModel;

pub fn run_example() -> Result<()> {
    let model = SpectralModel::product_pareto(&[0.6, 0.6], 0.5)?;
    let ext = window_extents(12.0, &[0.6, 0.6]);
    let w = simulate_window(&model, &ext, 256, 11, DEFAULT_SITE_BUDGET)?;
    println!("window {ext:?}, {} components, {} tracked sites", w.truncated_components, w.tracked_sites);
    for y in (0..ext[1].min(24)).rev() {
        let row: String =
            (0..ext[0].min(64)).map(|x| if w.values[w.index(&[x, y])] > 0 { '#' } else { '.' }).collect();
        println!("{row}");
    }
    let grid = vec![vec![1.0, 1.0], vec![0.5, 1.0], vec![0.5, 0.5]];
    let s = partial_sums(&w, &grid, 0)?;
    for (t, (raw, c)) in grid.iter().zip(s.sums.iter().zip(s.centered(model.p))) {
        println!("S({t:?}) = {raw}, centered {c}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
