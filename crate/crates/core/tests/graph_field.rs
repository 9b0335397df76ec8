use osgrf::graph_field::{
    box_extents, estimate_meeting_prob, partial_sums, simulate_window, window_extents, DEFAULT_SITE_BUDGET,
};
use osgrf::rng::{self, tag};
use osgrf::{Error, SpectralModel};
use proptest::prelude::*;
use std::collections::HashMap;

/// Walks every chain separately and labels sites by the terminal point of
/// their chain, which is shared by exactly the sites of one component.
fn naive_field(model: &SpectralModel, extents: &[usize], depth: usize, seed: u64) -> (Vec<Vec<i64>>, Vec<i8>) {
    let d = extents.len();
    let sites: usize = extents.iter().product();
    let lo = -(depth as i64);
    let mut terminals = Vec::with_capacity(sites);
    let mut values = Vec::with_capacity(sites);
    let mut step = vec![0i64; d];
    for idx in 0..sites {
        let mut x: Vec<i64> = Vec::with_capacity(d);
        let mut r = idx;
        for &n in extents {
            x.push((r % n) as i64);
            r /= n;
        }
        loop {
            model.sample_step(rng::key(seed, tag::STEP, &x), &mut step);
            let next: Vec<i64> = x.iter().zip(&step).map(|(a, b)| a - b).collect();
            if next.iter().any(|&c| c < lo) {
                break;
            }
            x = next;
        }
        let v = if rng::uniform_at(rng::key(seed, tag::SIGN, &x), 0) < model.p { 1 } else { -1 };
        terminals.push(x);
        values.push(v);
    }
    (terminals, values)
}

fn check_against_naive(model: &SpectralModel, extents: &[usize], depth: usize, seed: u64) {
    let w = simulate_window(model, extents, depth, seed, DEFAULT_SITE_BUDGET).unwrap();
    let (terms, values) = naive_field(model, extents, depth, seed);
    assert_eq!(w.values, values);
    let mut by_term: HashMap<&Vec<i64>, u32> = HashMap::new();
    for (i, t) in terms.iter().enumerate() {
        let id = *by_term.entry(t).or_insert(w.component_id[i]);
        assert_eq!(id, w.component_id[i], "site {i}");
    }
    assert_eq!(by_term.len(), w.truncated_components);
    let distinct: std::collections::HashSet<_> = w.component_id.iter().collect();
    assert_eq!(distinct.len(), by_term.len());
}

#[test]
fn matches_chain_by_chain_walk() {
    let m1 = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
    check_against_naive(&m1, &[500], 2000, 11);
    let m2 = SpectralModel::product_pareto(&[0.6, 0.6], 0.4).unwrap();
    check_against_naive(&m2, &[40, 30], 200, 12);
    let m3 = SpectralModel::product_pareto(&[0.7, 0.4], 0.5).unwrap();
    check_against_naive(&m3, &[25, 60], 1000, 13);
}

#[test]
fn sparse_store_agrees_with_chain_walk() {
    // a tracked box above the dense limit
    let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
    check_against_naive(&m, &[300], 1 << 23, 5);
}

#[test]
fn deterministic_given_seed() {
    let m = SpectralModel::product_pareto(&[0.6, 0.6], 0.5).unwrap();
    let a = simulate_window(&m, &[32, 32], 64, 7, DEFAULT_SITE_BUDGET).unwrap();
    let b = simulate_window(&m, &[32, 32], 64, 7, DEFAULT_SITE_BUDGET).unwrap();
    assert_eq!(a, b);
    let c = simulate_window(&m, &[32, 32], 64, 8, DEFAULT_SITE_BUDGET).unwrap();
    assert_ne!(a.values, c.values);
}

#[test]
fn window_is_a_restriction_of_a_larger_window() {
    // same seed and buffer floor: the smaller box sees the same field
    let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
    let big = simulate_window(&m, &[400], 1000, 3, DEFAULT_SITE_BUDGET).unwrap();
    let small = simulate_window(&m, &[100], 1000, 3, DEFAULT_SITE_BUDGET).unwrap();
    assert_eq!(&big.values[..100], &small.values[..]);
}

#[test]
fn marginal_mean_is_two_p_minus_one() {
    let m = SpectralModel::product_pareto(&[0.3], 0.7).unwrap();
    let means: Vec<f64> = (0..400)
        .map(|r| {
            let w = simulate_window(&m, &[64], 4096, 100 + r, DEFAULT_SITE_BUDGET).unwrap();
            w.values.iter().map(|&v| v as f64).sum::<f64>() / 64.0
        })
        .collect();
    let mu = osgrf::stats::mean(&means);
    let se = (osgrf::stats::variance(&means) / means.len() as f64).sqrt();
    assert!((mu - 0.4).abs() <= 4.0 * se, "{mu} +- {se}");
}

#[test]
fn degenerate_p_gives_constant_field() {
    let m = SpectralModel::product_pareto(&[0.6, 0.6], 0.0).unwrap();
    let w = simulate_window(&m, &[16, 16], 16, 2, DEFAULT_SITE_BUDGET).unwrap();
    assert!(w.values.iter().all(|&v| v == -1));
}

#[test]
fn meeting_probability_decays_with_offset() {
    let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
    let near = estimate_meeting_prob(&m, &[1], 4000, 1 << 14, 1).unwrap().estimate;
    let far = estimate_meeting_prob(&m, &[64], 4000, 1 << 14, 1).unwrap().estimate;
    assert!(near.value - far.value > 4.0 * near.se.hypot(far.se), "{near:?} {far:?}");
}

#[test]
fn budget_and_shape_errors() {
    let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
    assert!(matches!(simulate_window(&m, &[1000], 10, 1, 500), Err(Error::Resource(_))));
    assert!(matches!(simulate_window(&m, &[1000], 1 << 20, 1, 1200), Err(Error::Resource(_))));
    assert!(matches!(simulate_window(&m, &[10, 10], 10, 1, 1000), Err(Error::Config(_))));
    assert!(matches!(simulate_window(&m, &[10], 0, 1, 1000), Err(Error::Config(_))));
    let w = simulate_window(&m, &[10], 10, 1, 1000).unwrap();
    assert!(partial_sums(&w, &[vec![0.0]], 0).is_err());
    assert!(partial_sums(&w, &[vec![1.5]], 0).is_err());
}

#[test]
fn scaling_windows() {
    assert_eq!(window_extents(1024.0, &[1.0]), vec![1024]);
    assert_eq!(window_extents(64.0, &[0.6, 0.6]), vec![1024, 1024]);
    assert_eq!(box_extents(&[1024, 1024], &[0.5, 1.0]), vec![512, 1024]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partial_sums_match_direct_sums(seed in 0u64..1000, t0 in 0.05f64..1.0, t1 in 0.05f64..1.0) {
        let m = SpectralModel::product_pareto(&[0.6, 0.6], 0.5).unwrap();
        let w = simulate_window(&m, &[13, 9], 20, seed, DEFAULT_SITE_BUDGET).unwrap();
        let g = partial_sums(&w, &[vec![t0, t1]], 0).unwrap();
        let b = box_extents(&w.extents, &[t0, t1]);
        let mut direct = 0i64;
        for j in 0..b[1] {
            for i in 0..b[0] {
                direct += w.values[w.index(&[i, j])] as i64;
            }
        }
        prop_assert_eq!(g.sums[0], direct);
        let c = g.centered(0.5)[0];
        prop_assert_eq!(c, direct as f64);
    }

    #[test]
    fn components_share_values(seed in 0u64..1000) {
        let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
        let w = simulate_window(&m, &[200], 400, seed, DEFAULT_SITE_BUDGET).unwrap();
        let mut seen: HashMap<u32, i8> = HashMap::new();
        for (c, v) in w.component_id.iter().zip(&w.values) {
            prop_assert_eq!(*seen.entry(*c).or_insert(*v), *v);
        }
        prop_assert!(w.truncated_fraction() > 0.0 && w.truncated_fraction() <= 1.0);
    }
}
