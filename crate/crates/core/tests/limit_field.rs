use approx::assert_relative_eq;
use nalgebra::DMatrix;
use osgrf::limit_field::{
    c_h, closed_form_cov, cov_grid, cov_w, discretization_check, fbm_cov, fbm_spectral_quadrature, fbs_sigma2,
    operator_scaling_check, synthesize_w, var_increment, QuadConfig, SynthConfig,
};
use osgrf::regime::{classify, RegimeReport};
use osgrf::spectral_models::SpectralModel;
use osgrf::stats;
use proptest::prelude::*;
use std::f64::consts::PI;

// mpmath, 30 digits
const C_H_REF: [(f64, f64); 4] =
    [(0.55, 6.0789221579153437), (0.8, 7.4772031963956233), (0.9, 12.128199521080814), (0.95, 21.979837735993421)];
// C_0.8 / (2 pi Gamma(0.7)^2): d = 1, alpha = 0.3, unit sigma_X^2
const COV_D1: f64 = 0.70627348665686275;
// C_0.9 / (2 pi Gamma(0.6)^2): alpha = (0.7, 0.4), alpha' = (0.7, 0.6)
const COV_CASE1: f64 = 0.87039207972138352;

fn setup(a: &[f64], ap: &[f64]) -> (RegimeReport, SpectralModel) {
    let m = SpectralModel::product_pareto(a, 0.5).unwrap();
    (classify(&m.exponent, ap).unwrap(), m)
}

#[test]
fn c_h_reference_values() {
    assert_relative_eq!(c_h(0.5).unwrap(), 2.0 * PI, max_relative = 1e-15);
    for (h, v) in C_H_REF {
        assert_relative_eq!(c_h(h).unwrap(), v, max_relative = 1e-13);
    }
    assert!(c_h(0.0).is_err() && c_h(1.0).is_err());
}

#[test]
fn spectral_fbm_identity() {
    let cfg = QuadConfig::default();
    for h in [0.55, 0.8, 0.95] {
        for t in [0.5, 1.0] {
            let q = fbm_spectral_quadrature(h, t, &cfg).unwrap();
            assert_relative_eq!(q, c_h(h).unwrap() * t.powf(2.0 * h), max_relative = 1e-6);
        }
    }
}

#[test]
fn one_dimensional_covariance_reference() {
    let (r, m) = setup(&[0.3], &[1.0]);
    let cfg = QuadConfig::default();
    for (t, s) in [(1.0, 1.0), (0.5, 1.0), (0.3, 0.7), (0.9, 0.2)] {
        let v = cov_w(&r, &m, 1.0, &[t], &[s], &cfg).unwrap();
        let reference = COV_D1 * fbm_cov(0.8, t, s);
        assert_relative_eq!(v.value, reference, max_relative = 1e-6);
        assert!(v.est_error < 1e-6 * reference.abs().max(1e-3));
        assert_relative_eq!(closed_form_cov(&r, &m, 1.0, &[t], &[s]).unwrap(), reference, max_relative = 1e-12);
    }
    assert_eq!(cov_w(&r, &m, 1.0, &[0.0], &[1.0], &cfg).unwrap().value, 0.0);
}

#[test]
fn case_one_constant_and_quadrature() {
    let (r, m) = setup(&[0.7, 0.4], &[0.7, 0.6]);
    assert_relative_eq!(fbs_sigma2(&r, &m).unwrap(), COV_CASE1, max_relative = 1e-12);
    let cfg = QuadConfig::default();
    let pts = [([1.0, 1.0], [1.0, 1.0]), ([0.5, 1.0], [1.0, 0.5]), ([0.3, 0.8], [0.6, 0.4]), ([1.0, 0.25], [0.75, 0.75])];
    for (t, s) in pts {
        let q = cov_w(&r, &m, 1.0, &t, &s, &cfg).unwrap().value;
        let reference = COV_CASE1 * t[0].min(s[0]) * fbm_cov(0.9, t[1], s[1]);
        assert_relative_eq!(q, reference, max_relative = 1e-6);
    }
}

#[test]
fn case_two_line_constant() {
    // I_= = {0}, I_> = {1}: C_H int |log psi(e_0 + z e_1)|^{-2} dz / (2 pi)
    let (r, m) = setup(&[0.3, 0.6], &[0.3, 0.9]);
    let h = r.hurst.as_ref().unwrap()[0];
    // trapezoid in s = log z; the integrand decays like e^{s} and e^{-0.2 s}
    let (lo, hi, steps) = (-80.0f64, 400.0f64, 400_000);
    let ds = (hi - lo) / steps as f64;
    let mut line = 0.0;
    for i in 0..=steps {
        let z = (lo + i as f64 * ds).exp();
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        for sgn in [1.0, -1.0] {
            line += w * ds * z / m.log_psi(&[1.0, sgn * z]).norm_sqr();
        }
    }
    let reference = c_h(h).unwrap() * line / (2.0 * PI);
    assert_relative_eq!(fbs_sigma2(&r, &m).unwrap(), reference, max_relative = 1e-5);
    let cfg = QuadConfig::default();
    let (t, s) = ([0.7, 0.5], [0.4, 1.0]);
    let q = cov_w(&r, &m, 1.0, &t, &s, &cfg).unwrap().value;
    let c = closed_form_cov(&r, &m, 1.0, &t, &s).unwrap();
    assert_relative_eq!(q, c, max_relative = 1e-5);
}

#[test]
fn degenerate_directions() {
    let cfg = QuadConfig::default();
    // I_> axis 1: bilinear
    let (r, m) = setup(&[0.3, 0.6], &[0.3, 0.9]);
    let a = cov_w(&r, &m, 1.0, &[0.6, 0.3], &[0.8, 0.4], &cfg).unwrap().value;
    let b = cov_w(&r, &m, 1.0, &[0.6, 0.6], &[0.8, 0.4], &cfg).unwrap().value;
    assert_relative_eq!(b, 2.0 * a, max_relative = 1e-9);
    // I_< axis 0: through min(t_0, s_0)
    let (r, m) = setup(&[0.7, 0.4], &[0.7, 0.6]);
    let a = cov_w(&r, &m, 1.0, &[0.3, 0.5], &[0.9, 0.8], &cfg).unwrap().value;
    let b = cov_w(&r, &m, 1.0, &[0.3, 0.5], &[0.5, 0.8], &cfg).unwrap().value;
    assert_relative_eq!(a, b, max_relative = 1e-9);
}

#[test]
fn increments_by_axis_class() {
    let cfg = QuadConfig::default();
    let u = [0.4, 0.7];
    let (r, m) = setup(&[0.3, 0.6], &[0.3, 0.9]);
    let mut base = u;
    base[1] = 1.0;
    let v1 = cov_w(&r, &m, 1.0, &base, &base, &cfg).unwrap().value;
    let inc = var_increment(&r, &m, 1.0, 1, 0.25, &u, &cfg).unwrap().value;
    assert_relative_eq!(inc, 0.0625 * v1, max_relative = 1e-9);
    let (r, m) = setup(&[0.7, 0.4], &[0.7, 0.6]);
    let mut base = u;
    base[0] = 1.0;
    let v1 = cov_w(&r, &m, 1.0, &base, &base, &cfg).unwrap().value;
    let inc = var_increment(&r, &m, 1.0, 0, 0.25, &u, &cfg).unwrap().value;
    assert_relative_eq!(inc, 0.25 * v1, max_relative = 1e-9);
    let (r, m) = setup(&[0.3], &[1.0]);
    let ratios: Vec<f64> = (1..8)
        .map(|k| {
            let d = 2f64.powi(-k);
            var_increment(&r, &m, 1.0, 0, d, &[0.5], &cfg).unwrap().value / d.powf(1.6)
        })
        .collect();
    for w in ratios.windows(2) {
        assert_relative_eq!(w[0], w[1], max_relative = 1e-3);
    }
}

#[test]
fn operator_scaling_at_unit_lambda_is_exact() {
    let (r, m) = setup(&[0.7, 0.4], &[0.7, 0.6]);
    let res = operator_scaling_check(&r, &m, 1.0, &[0.5, 0.5], &[1.0, 0.3], &QuadConfig::default()).unwrap();
    assert_eq!(res, 0.0);
}

#[test]
fn grid_is_ordered_and_symmetric() {
    let (r, m) = setup(&[0.6, 0.6], &[0.6, 0.6]);
    let pts = vec![
        (vec![1.0, 0.5], vec![0.3, 0.9]),
        (vec![0.3, 0.9], vec![1.0, 0.5]),
        (vec![0.5, 0.5], vec![0.5, 0.5]),
    ];
    let g = cov_grid(&r, &m, 1.0, &pts, &QuadConfig::fast()).unwrap();
    assert_relative_eq!(g.values[0], g.values[1], max_relative = 1e-10);
    assert!(g.values[2] > 0.0);
}

fn gram_min_eig(r: &RegimeReport, m: &SpectralModel, pts: &[Vec<f64>], cfg: &QuadConfig) -> (f64, f64) {
    let n = pts.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = cov_w(r, m, 1.0, &pts[i], &pts[j], cfg).unwrap().value;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let eig = g.clone().symmetric_eigen().eigenvalues;
    (eig.min(), g.trace())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gram_matrices_are_psd_d1(pts in prop::collection::vec(0.01f64..1.0, 8)) {
        let (r, m) = setup(&[0.3], &[1.0]);
        let pts: Vec<Vec<f64>> = pts.into_iter().map(|t| vec![t]).collect();
        let (min, tr) = gram_min_eig(&r, &m, &pts, &QuadConfig::default());
        prop_assert!(min >= -1e-8 * tr, "{min} {tr}");
    }

    #[test]
    fn symmetry_in_the_arguments(t in prop::collection::vec(0.01f64..1.0, 2), s in prop::collection::vec(0.01f64..1.0, 2)) {
        let (r, m) = setup(&[0.6, 0.6], &[0.6, 0.6]);
        let cfg = QuadConfig::fast();
        let a = cov_w(&r, &m, 1.0, &t, &s, &cfg).unwrap().value;
        let b = cov_w(&r, &m, 1.0, &s, &t, &cfg).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-12));
    }
}

#[test]
fn synthesis_is_deterministic_and_seeded() {
    let (r, m) = setup(&[0.3], &[1.0]);
    let pts = vec![vec![0.5], vec![1.0]];
    let cfg = SynthConfig { seed: 4, ..SynthConfig::default() };
    let a = synthesize_w(&r, &m, 1.0, &pts, &cfg, 20).unwrap();
    let b = synthesize_w(&r, &m, 1.0, &pts, &cfg, 20).unwrap();
    assert_eq!(a.values, b.values);
    let c = synthesize_w(&r, &m, 1.0, &pts, &SynthConfig { seed: 5, ..cfg.clone() }, 20).unwrap();
    assert_ne!(a.values, c.values);
    let z = synthesize_w(&r, &m, 1.0, &[vec![0.0]], &cfg, 5).unwrap();
    assert!(z.values.iter().all(|v| v[0] == 0.0));
}

#[test]
fn synthesized_field_is_gaussian_with_the_limit_covariance() {
    let (r, m) = setup(&[0.7, 0.4], &[0.7, 0.6]);
    let pts = vec![vec![1.0, 1.0], vec![0.5, 0.75]];
    let cfg = SynthConfig { seed: 77, ..SynthConfig::default() };
    let syn = synthesize_w(&r, &m, 1.0, &pts, &cfg, 500).unwrap();
    let g = stats::gaussianity_test(&syn.samples_at(0));
    assert!(g.pass, "{g:?}");
    let check = discretization_check(&syn, &r, &m, 1.0, &QuadConfig::fast(), 0.01).unwrap();
    assert!(check.warnings.is_empty(), "{check:?}");
    let coarse = SynthConfig { low_octaves: 4, high_octaves: 2, cells_per_octave: 1, seed: 1 };
    let syn = synthesize_w(&r, &m, 1.0, &pts, &coarse, 0).unwrap();
    let check = discretization_check(&syn, &r, &m, 1.0, &QuadConfig::fast(), 0.01).unwrap();
    assert_eq!(check.warnings.len(), 2);
}
