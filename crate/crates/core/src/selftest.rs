//! Oracle and invariant checks behind the `selftest` subcommand.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::branching_sim::{expected_population, BranchingLaw, RootBirth, TreeSimulator};
use crate::limit_constants::{anisotropic_cubic_integral_routes, c1, c2, c2_triple_integral_closed_form, large_dim_covariance};
use crate::quadrature::{integrate, Tolerance};
use crate::rng::derive_stream;
use crate::stable_motion::{empirical_cf_deviation, semigroup_apply, StableIndexVector, StableSampler, symmetric_grid};
use crate::test_function::GaussianTestFunction;
use crate::Result;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn idx(a: &[f64]) -> Result<StableIndexVector> {
    StableIndexVector::new(a.to_vec())
}

/// Monte Carlo mean and standard error of `g(tree)` over `trees` one-ancestor trees.
fn tree_mean<F>(law: BranchingLaw, indices: &StableIndexVector, s: f64, trees: u64, seed: u64, mut g: F) -> Result<(f64, f64)>
where
    F: FnMut(&crate::branching_sim::TreeRealization) -> f64,
{
    let sim = TreeSimulator::new(law, indices.clone(), s, vec![s])?;
    let root = RootBirth {
        time: 0.0,
        position: vec![0.0; indices.dim()],
    };
    let mut branch = derive_stream(seed, 0, "branching");
    let mut motion = derive_stream(seed, 0, "motion");
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..trees {
        let v = g(&sim.simulate(&root, &mut branch, &mut motion)?);
        sum += v;
        sum2 += v * v;
    }
    let m = sum / trees as f64;
    let var = (sum2 / trees as f64 - m * m) * trees as f64 / (trees as f64 - 1.0);
    Ok((m, (var / trees as f64).sqrt()))
}

/// Sum of `φ` over the particles alive at the horizon.
pub fn alive_sum(tree: &crate::branching_sim::TreeRealization, phi: &GaussianTestFunction) -> f64 {
    tree.particles
        .iter()
        .filter(|p| p.death_time.is_none())
        .map(|p| phi.value(p.last_position()))
        .sum()
}

pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    for a in [&[0.5][..], &[1.0, 1.0][..]] {
        let r = anisotropic_cubic_integral_routes(&idx(a)?)?;
        out.push(check(
            &format!("cubic integral alpha={a:?}"),
            (r.closed_form - 2.0).abs() < 1e-9 && rel(r.quadrature.value, r.closed_form) <= 1e-6,
            format!("closed form {}, quadrature {}", r.closed_form, r.quadrature.value),
        ));
    }

    let v = c1(&idx(&[0.5])?, 1.0, 1.0, 0.5)?;
    out.push(check("c1 = 1/sqrt(pi)", (v.value - 1.0 / PI.sqrt()).abs() <= 1e-6, format!("{}", v.value)));

    let i23 = idx(&[2.0 / 3.0])?;
    let v = c2(&i23, 1.0, 1.0)?;
    let v2 = c2(&i23, 1.0, 2.0)?;
    let closed = (0.75f64).sqrt();
    out.push(check(
        "c2 reduced quadrature",
        rel(v.value, closed) <= 1e-6 && rel(v2.value / v.value, 2f64.powf(-0.75)) <= 1e-6,
        format!(
            "c2 = {} (closed form {closed}), theta ratio {} vs {}; T(1.5, 1) = {}",
            v.value,
            v2.value / v.value,
            2f64.powf(-0.75),
            c2_triple_integral_closed_form(1.5, 1.0)
        ),
    ));

    let phi = GaussianTestFunction::standard(1);
    let cov = large_dim_covariance(&phi, &phi, &idx(&[0.4])?, 1.0, 1.0)?;
    let expect = 2.0 * gamma(0.3) + gamma(0.1);
    out.push(check(
        "large-dimension covariance",
        rel(cov, expect) <= 1e-6,
        format!("{cov} vs 2Γ(0.3) + Γ(0.1) = {expect}"),
    ));

    // Plancherel: ∫φ₁φ₂ dx = (2π)^{-1} ∫ φ̂₁ conj(φ̂₂) dz
    let p1 = GaussianTestFunction::new(vec![0.3], vec![0.8], 1.5)?;
    let p2 = GaussianTestFunction::new(vec![-0.4], vec![1.3], 0.7)?;
    let tol = Tolerance::new(1e-14, 1e-12);
    let space = integrate(|x| p1.value(&[x]) * p2.value(&[x]), -30.0, 30.0, tol).value;
    let freq = integrate(|z| (p1.fourier(&[z]) * p2.fourier(&[z]).conj()).re, -30.0, 30.0, tol).value / (2.0 * PI);
    out.push(check("Plancherel", rel(freq, space) <= 1e-10, format!("{space} vs {freq}")));

    let z = symmetric_grid(3.0, 61);
    let n = 100_000;
    for alpha in [0.5, 1.0, 1.5, 2.0] {
        let sampler = StableSampler::new(alpha);
        for t in [0.5, 1.0] {
            let mut rng = derive_stream(seed, (alpha * 1000.0) as u64 + (t * 10.0) as u64, "selftest-cf");
            let xs: Vec<f64> = (0..n).map(|_| sampler.increment(t, &mut rng)).collect();
            let dev = empirical_cf_deviation(&xs, alpha, t, &z)?;
            let bound = 5.0 / (n as f64).sqrt();
            out.push(check(
                &format!("characteristic function alpha={alpha} t={t}"),
                dev <= bound,
                format!("max deviation {dev:.5} (bound {bound:.5})"),
            ));
        }
    }

    let trees = 100_000;
    for (g, d, s) in [(1.0, 0.0, 2.0), (1.0, 0.5, 1.0), (2.0, 0.3, 1.5)] {
        let law = BranchingLaw::new(g, d)?;
        let (m, se) = tree_mean(law, &idx(&[2.0])?, s, trees, seed, |t| t.alive_count(s) as f64)?;
        let e = expected_population(s, g, d)?;
        out.push(check(
            &format!("mean population gamma={g} delta={d} s={s}"),
            (m - e).abs() <= 4.0 * se,
            format!("MC {m:.5} ± {se:.5} vs {e:.6}"),
        ));
    }

    let law = BranchingLaw::new(1.0, 0.2)?;
    let cauchy = idx(&[1.0])?;
    let (m, se) = tree_mean(law, &cauchy, 1.0, trees, seed ^ 1, |t| alive_sum(t, &phi))?;
    let e = expected_population(1.0, 1.0, 0.2)? * semigroup_apply(&phi, 1.0, &[0.0], &cauchy)?;
    out.push(check(
        "expectation identity",
        (m - e).abs() <= 4.0 * se,
        format!("MC {m:.5} ± {se:.5} vs f(1) T_1 φ(0) = {e:.6}"),
    ));

    Ok(out)
}
