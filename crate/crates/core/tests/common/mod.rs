//! Independent oracles for the tests. Everything here uses tanh-sinh
//! quadrature, a different family from the library's Gauss-Kronrod engine.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Tanh-sinh quadrature on `[a, b]`, halving the step until two levels
/// agree to `rel`. Endpoint singularities are fine: nodes are placed by
/// their distance to the nearer endpoint, so `f` is never called at `a` or `b`.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel: f64) -> f64 {
    let half = 0.5 * (b - a);
    if half == 0.0 {
        return 0.0;
    }
    let t_max = 4.0;
    let center = f(a + half) * 0.5 * PI;
    // weighted sum of the node pair at distance `half·d` from each endpoint;
    // a node that rounds onto its endpoint carries negligible weight
    let mut pair = |t: f64| -> f64 {
        let s = 0.5 * PI * t.sinh();
        let e = (-2.0 * s).exp();
        let d = 2.0 * e / (1.0 + e);
        let w = 0.5 * PI * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let (xl, xr) = (a + half * d, b - half * d);
        let left = if xl > a { f(xl) } else { 0.0 };
        let right = if xr < b { f(xr) } else { 0.0 };
        w * (left + right)
    };
    let mut sum = center;
    let mut h = 0.5;
    let mut k = 1;
    while (k as f64) * h <= t_max {
        sum += pair(k as f64 * h);
        k += 1;
    }
    let mut prev = sum * h * half;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            sum += pair(k as f64 * h);
            k += 2;
        }
        let cur = sum * h * half;
        if (cur - prev).abs() <= rel * cur.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Raw nested evaluation of
/// `T = ∫∫ e^{-θ(u+v)} ∫_0^{u∧v} e^{θs} (u+v-2s)^{-ᾱ} ds dv du`
/// with no analytic reduction. The `v` integral is split at `u` and runs
/// in the offset `w = |v - u|`; the `s` integral runs in
/// `r = u + v - 2s = w·e^y`. Both keep the near-singular corner `s = u = v`
/// at an exactly representable endpoint. Inner levels run tighter than
/// `rel` so their noise does not stall the outer one.
pub fn raw_triple_integral(bar_alpha: f64, theta: f64, rel: f64) -> f64 {
    let upper = 40.0 / theta;
    let (rel_inner, rel_middle) = (rel * 1e-3, rel * 1e-1);
    let inner = |sum: f64, w: f64| -> f64 {
        0.5 * tanh_sinh(
            |y| {
                let r = w * y.exp();
                (-0.5 * theta * (sum + r)).exp() * r.powf(1.0 - bar_alpha)
            },
            0.0,
            (sum / w).ln(),
            rel_inner,
        )
    };
    let middle = |u: f64| -> f64 {
        tanh_sinh(|w| inner(2.0 * u - w, w), 0.0, u, rel_middle)
            + tanh_sinh(|w| inner(2.0 * u + w, w), 0.0, upper, rel_middle)
    };
    tanh_sinh(middle, 0.0, upper, rel)
}

/// `(θ(2π))^{-1} ∫_R [2/|z|^α + γ/|z|^{2α}] |φ̂(z)|² dz` for a centred
/// one-dimensional Gaussian of width `sigma` and unit amplitude.
pub fn raw_large_dim_covariance_1d(alpha: f64, sigma: f64, gamma: f64, theta: f64) -> f64 {
    let mass2 = 2.0 * PI * sigma * sigma;
    let z_max = (80.0f64).sqrt() / sigma;
    // z = w^p removes the |z|^{-2α} singularity, which tanh-sinh alone
    // under-resolves as 2α approaches 1
    let p = (1.0 / (1.0 - 2.0 * alpha)).ceil();
    let body = tanh_sinh(
        |w| {
            let z = w.powf(p);
            let kernel = 2.0 * w.powf(p * (1.0 - alpha) - 1.0) + gamma * w.powf(p * (1.0 - 2.0 * alpha) - 1.0);
            p * kernel * mass2 * (-sigma * sigma * z * z).exp()
        },
        0.0,
        z_max.powf(1.0 / p),
        1e-12,
    );
    2.0 * body / (theta * 2.0 * PI)
}

/// Plain Monte Carlo mean and standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn configs_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}
