use approx::assert_relative_eq;
use osgrf::q_engine::{b_coefficients, build_qtable, parseval_check, prelimit_cov, recursion_residual, PrelimitPath};
use osgrf::spectral_models::{ModelSpec, PmfEntry, SpectralModel};
use proptest::prelude::*;

fn naive_renewal(alpha: f64, n: usize) -> Vec<f64> {
    let mu = |j: usize| (j as f64).powf(-alpha) - ((j + 1) as f64).powf(-alpha);
    let mut q = vec![0.0; n + 1];
    q[0] = 1.0;
    for k in 1..=n {
        q[k] = (1..=k).map(|j| mu(j) * q[k - j]).sum();
    }
    q
}

#[test]
fn one_dimensional_table_matches_naive_renewal() {
    let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
    let t = build_qtable(&m, 1500, u64::MAX).unwrap();
    let oracle = naive_renewal(0.3, 1500);
    for (k, (a, b)) in t.values.iter().zip(&oracle).enumerate() {
        assert_relative_eq!(*a, *b, max_relative = 1e-11, epsilon = 1e-300);
        assert!(k > 0 || *a == 1.0);
    }
}

#[test]
fn planar_table_matches_naive_convolution() {
    let (a1, a2) = (0.6, 0.4);
    let m = SpectralModel::product_pareto(&[a1, a2], 0.5).unwrap();
    let n = 24;
    let t = build_qtable(&m, n, u64::MAX).unwrap();
    let mu = |a: f64, j: usize| (j as f64).powf(-a) - ((j + 1) as f64).powf(-a);
    let mut q = vec![vec![0.0; n + 1]; n + 1];
    q[0][0] = 1.0;
    for x in 0..=n {
        for y in 0..=n {
            if x == 0 && y == 0 {
                continue;
            }
            let mut s = 0.0;
            for i in 1..=x {
                for j in 1..=y {
                    s += mu(a1, i) * mu(a2, j) * q[x - i][y - j];
                }
            }
            q[x][y] = s;
        }
    }
    for x in 0..=n {
        for y in 0..=n {
            assert_relative_eq!(t.get(&[x as i64, y as i64]), q[x][y], max_relative = 1e-11, epsilon = 1e-300);
        }
    }
    // a site off the diagonal cone is never an ancestor
    assert_eq!(t.get(&[0, 5]), 0.0);
}

/// Probability that walks started at gap `m` ever share a point, from the gap
/// chain: the higher walk moves, the gap becomes `|g - Z|`, and 0 means a
/// meeting. States above `g_max` are bounded by 0 and by `h(g_max)` (the
/// meeting probability decreases with the gap), which brackets the answer.
fn gap_chain(alpha: f64, m: usize, g_max: usize) -> (f64, f64) {
    let mu = |j: usize| (j as f64).powf(-alpha) - ((j + 1) as f64).powf(-alpha);
    let mut bounds = [0.0, 0.0];
    for (b, upper) in bounds.iter_mut().zip([false, true]) {
        let mut h = vec![0.0; g_max + 1];
        h[0] = 1.0;
        for _ in 0..400 {
            let far = if upper { h[g_max] } else { 0.0 };
            let mut next = h.clone();
            for g in 1..=g_max {
                let mut s = 0.0;
                let mut mass = 0.0;
                for z in 1..=(2 * g_max).min(g + g_max) {
                    let p = mu(z);
                    s += p * h[g.abs_diff(z)];
                    mass += p;
                }
                next[g] = s + (1.0 - mass) * far;
            }
            h = next;
        }
        *b = h[m];
    }
    (bounds[0], bounds[1])
}

#[test]
fn meeting_probability_sits_inside_the_gap_chain_bracket() {
    let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
    let t = build_qtable(&m, 1 << 14, u64::MAX).unwrap();
    for off in [1usize, 4, 16] {
        let (lo, hi) = gap_chain(0.3, off, 512);
        let v = t.pair_meeting_prob(&[off as i64]);
        assert!(v.value - v.residue <= hi && v.value + v.residue >= lo, "m={off}: {v:?} not in [{lo}, {hi}]");
    }
}

#[test]
fn meeting_probability_basics() {
    let m = SpectralModel::product_pareto(&[0.3, 0.6], 0.5).unwrap();
    let t = build_qtable(&m, 32, u64::MAX).unwrap();
    assert_relative_eq!(t.pair_meeting_prob(&[0, 0]).value, 1.0, max_relative = 1e-14);
    let a = t.pair_meeting_prob(&[3, -2]).value;
    let b = t.pair_meeting_prob(&[-3, 2]).value;
    assert_relative_eq!(a, b, max_relative = 1e-14);
    assert!(a > 0.0 && a < 1.0);
}

#[test]
fn two_point_law_meets_surely() {
    // support {1, 2}: the gap chain is finite and recurrent
    let spec = ModelSpec {
        alphas: vec![0.3],
        gammas: Some(vec![1.0]),
        p: 0.5,
        pmf: Some(vec![PmfEntry { step: vec![1], prob: 0.5 }, PmfEntry { step: vec![2], prob: 0.5 }]),
    };
    let m = spec.build().unwrap();
    let t = build_qtable(&m, 4096, u64::MAX).unwrap();
    // renewal theorem: q_k -> 1 / E Z = 2/3
    assert_relative_eq!(t.values[4096], 2.0 / 3.0, max_relative = 1e-12);
    assert!(t.pair_meeting_prob(&[5]).value > 0.99);
    assert!(t.sum_sq_tail_estimate.is_nan());
}

#[test]
fn parseval_in_two_dimensions() {
    let m = SpectralModel::product_pareto(&[0.6, 0.6], 0.5).unwrap();
    let t = build_qtable(&m, 64, u64::MAX).unwrap();
    let p = parseval_check(&m, &t, 8).unwrap();
    assert!(p.rel_discrepancy < 0.05, "{p:?}");
}

#[test]
fn coefficient_and_spectral_paths_agree() {
    let m = SpectralModel::product_pareto(&[0.6, 0.6], 0.5).unwrap();
    let t = build_qtable(&m, 64, u64::MAX).unwrap();
    for (a, b) in [([8usize, 8], [8usize, 8]), ([16, 8], [8, 16]), ([32, 32], [16, 24])] {
        let c = prelimit_cov(&m, &t, 1.0, &a, &b, PrelimitPath::Coefficients).unwrap().value;
        let s = prelimit_cov(&m, &t, 1.0, &a, &b, PrelimitPath::SpectralTable).unwrap().value;
        assert_relative_eq!(c, s, max_relative = 1e-6);
    }
}

#[test]
fn b_coefficients_spread_out() {
    let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
    let t = build_qtable(&m, 4096, u64::MAX).unwrap();
    let ratios: Vec<f64> = [8usize, 32, 128, 512].iter().map(|&n| b_coefficients(&t, &[n]).unwrap().ratio).collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recursion_holds_on_every_cell(a1 in 0.1f64..0.9, a2 in 0.1f64..0.9, n in 4usize..40) {
        let m = SpectralModel::product_pareto(&[a1, a2], 0.5).unwrap();
        let t = build_qtable(&m, n, u64::MAX).unwrap();
        prop_assert!(recursion_residual(&m, &t).unwrap() < 1e-12);
        prop_assert!(t.values.iter().all(|&q| (0.0..=1.0).contains(&q)));
    }

    #[test]
    fn meeting_probability_is_a_probability(a in 0.1f64..0.45, m in 1i64..200) {
        let model = SpectralModel::product_pareto(&[a], 0.5).unwrap();
        let t = build_qtable(&model, 1024, u64::MAX).unwrap();
        let v = t.pair_meeting_prob(&[m]).value;
        prop_assert!(v > 0.0 && v <= 1.0);
    }
}
