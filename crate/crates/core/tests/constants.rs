mod common;

use std::f64::consts::PI;

use degenbranch::limit_constants::*;
use degenbranch::stable_motion::StableIndexVector;
use degenbranch::test_function::GaussianTestFunction;
use degenbranch::Error;
use statrs::function::gamma::gamma;

fn idx(a: &[f64]) -> StableIndexVector {
    StableIndexVector::new(a.to_vec()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// Frozen from the raw nested oracle (and equal to Γ(1/2) = √π).
const T_GOLDEN_1_5: f64 = 1.772_453_850_905_516;
// Frozen from the tanh-sinh oracle of the raw frequency integral.
const LARGE_DIM_GOLDEN: f64 = 15.496_645_674_043_9;

#[test]
fn tanh_sinh_oracle_sanity() {
    let v = common::tanh_sinh(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-13);
    assert!((v - 2.0).abs() < 1e-10, "{v}");
    let v = common::tanh_sinh(|x: f64| x.cos(), 0.0, PI / 2.0, 1e-13);
    assert!((v - 1.0).abs() < 1e-13);
}

#[test]
fn raw_nested_oracle_matches_reduced_triple_integral() {
    let oracle = common::raw_triple_integral(1.5, 1.0, 1e-6);
    assert!(rel(oracle, T_GOLDEN_1_5) < 1e-4, "oracle {oracle}");
    let reduced = c2_triple_integral(1.5, 1.0).unwrap();
    assert!(rel(reduced.value, oracle) < 1e-4);
    assert!(reduced.truncation > 0.0 && reduced.abs_error < 1e-6);
    let c = c2(&idx(&[2.0 / 3.0]), 1.0, 1.0).unwrap();
    assert!((c.value - (0.423_142_f64 * oracle).sqrt()).abs() < 1e-5);
}

#[test]
fn raw_nested_oracle_other_index() {
    // ᾱ = 1.25, θ = 1.5: independent check off the shipped parameters
    let oracle = common::raw_triple_integral(1.25, 1.5, 1e-6);
    let reduced = c2_triple_integral(1.25, 1.5).unwrap();
    assert!(rel(reduced.value, oracle) < 1e-4, "{} vs {oracle}", reduced.value);
}

#[test]
fn c2_scaling_laws() {
    let i = idx(&[2.0 / 3.0]);
    let base = c2(&i, 1.0, 1.0).unwrap().value;
    for theta in [2.0, 0.5, 3.0] {
        let v = c2(&i, 1.0, theta).unwrap().value;
        assert!(rel(v / base, theta.powf((1.5 - 3.0) / 2.0)) < 1e-6, "theta {theta}");
    }
    for lambda in [2.0, 3.0] {
        let v = c2(&i, lambda * lambda, 1.0).unwrap().value;
        assert!(rel(v / base, lambda) < 1e-10);
    }
    let two_d = idx(&[1.6, 1.6]);
    let v = c2(&two_d, 1.0, 1.0).unwrap();
    let cf = c2_closed_form(&two_d, 1.0, 1.0).unwrap();
    assert!(rel(v.value, cf.value) < 1e-6);
}

#[test]
fn c1_homogeneity_and_examples() {
    let i = idx(&[0.5]);
    let base = c1(&i, 1.0, 1.0, 0.5).unwrap().value;
    assert!((base - 0.564_190).abs() < 1e-6);
    for lambda in [2.0, 3.0] {
        let v = c1(&i, lambda * lambda, 1.0, 0.5).unwrap().value;
        assert!(rel(v / base, lambda) < 1e-10);
    }
    let v = c1(&idx(&[1.0, 1.0]), 1.0, 1.0, 0.5).unwrap().value;
    assert!((v - 0.225_079).abs() < 1e-6);
    let aniso = c1(&idx(&[0.8, 4.0 / 3.0]), 1.0, 1.0, 0.5).unwrap();
    assert!(aniso.value > 0.0);
}

#[test]
fn cubic_integral_grid_agreement() {
    for a in [
        &[2.0 / 3.0][..],
        &[0.5][..],
        &[0.4][..],
        &[1.5, 1.0][..],
        &[1.0, 1.0][..],
        &[0.8, 0.8][..],
        &[1.5, 1.5, 2.0][..],
        &[2.0, 2.0, 2.0, 2.0, 2.0][..],
    ] {
        let r = anisotropic_cubic_integral_routes(&idx(a)).unwrap();
        assert!(rel(r.quadrature.value, r.closed_form) <= 1e-6, "{a:?}");
    }
    // d = 1, α = 2: 3π/8
    let r = anisotropic_cubic_integral(&idx(&[2.0])).unwrap();
    assert!((r - 3.0 * PI / 8.0).abs() < 1e-12);
    // tanh-sinh oracle in the original variable
    let direct = 2.0 * common::tanh_sinh(|y: f64| (1.0 + y.powf(0.75)).powi(-3), 0.0, 1.0, 1e-12)
        + 2.0 * common::tanh_sinh(|s: f64| (1.0 + (1.0 / s).powf(0.75)).powi(-3) / (s * s), 0.0, 1.0, 1e-12);
    let r = anisotropic_cubic_integral(&idx(&[0.75])).unwrap();
    assert!(rel(r, direct) < 1e-8, "{r} vs {direct}");
}

#[test]
fn divergence_and_regime_errors() {
    assert!(matches!(anisotropic_cubic_integral(&idx(&[0.3])), Err(Error::Divergence(_))));
    assert!(matches!(c2(&idx(&[0.5]), 1.0, 1.0), Err(Error::UnsupportedRegime { .. })));
    assert!(matches!(c1(&idx(&[1.0]), 1.0, 1.0, 0.5), Err(Error::UnsupportedRegime { .. })));
    let err = regime_validate(&idx(&[2.0 / 3.0]), ConstantKind::C1).unwrap_err().to_string();
    assert!(err.contains("1e-12"), "{err}");
    // within the documented window around ᾱ = 2
    let near = idx(&[0.5 * (1.0 + 1e-14)]);
    assert_eq!(regime_validate(&near, ConstantKind::C1).unwrap(), degenbranch::stable_motion::Regime::Critical);
}

#[test]
fn large_dimension_covariance_oracle() {
    let phi = GaussianTestFunction::standard(1);
    let oracle = common::raw_large_dim_covariance_1d(0.4, 1.0, 1.0, 1.0);
    assert!(rel(oracle, LARGE_DIM_GOLDEN) < 1e-6, "oracle {oracle}");
    assert!(rel(oracle, 2.0 * gamma(0.3) + gamma(0.1)) < 1e-6);
    let v = large_dim_covariance(&phi, &phi, &idx(&[0.4]), 1.0, 1.0).unwrap();
    assert!(rel(v, oracle) < 1e-4);
    let narrow = GaussianTestFunction::new(vec![0.0], vec![0.6], 1.0).unwrap();
    let v = large_dim_covariance(&narrow, &narrow, &idx(&[0.45]), 2.0, 1.5).unwrap();
    let oracle = common::raw_large_dim_covariance_1d(0.45, 0.6, 2.0, 1.5);
    assert!(rel(v, oracle) < 1e-6, "{v} vs {oracle}");
}

#[test]
fn large_dimension_covariance_symmetry_and_bilinearity() {
    let i = idx(&[0.8, 0.8]);
    let p1 = GaussianTestFunction::new(vec![0.5, -0.2], vec![1.0, 0.7], 1.0).unwrap();
    let p2 = GaussianTestFunction::new(vec![-0.3, 0.4], vec![0.8, 1.2], 2.0).unwrap();
    let a = large_dim_covariance(&p1, &p2, &i, 1.0, 1.0).unwrap();
    let b = large_dim_covariance(&p2, &p1, &i, 1.0, 1.0).unwrap();
    assert!(rel(a, b) < 1e-10);
    let scaled = large_dim_covariance(&p1.scaled(3.0), &p2, &i, 1.0, 1.0).unwrap();
    assert!(rel(scaled, 3.0 * a) < 1e-10);
    assert!(large_dim_covariance(&p1, &p1, &i, 1.0, 1.0).unwrap() > 0.0);
    assert!(matches!(large_dim_covariance(&p1, &p2, &idx(&[1.0, 1.0]), 1.0, 1.0), Err(Error::Divergence(_))));
}
