//! Limit constants of the fluctuation theorems.
//!
//! * critical dimension: `C1 = sqrt(2γκ / (θ (2π)^d) · ∫ (1 + Σ|y_k|^{α_k})^{-3} dy)`
//! * intermediate dimension: `C2 = sqrt(γ/π^d · Π Γ(1/α_k)/α_k · T)` with
//!   `T = ∫∫ e^{-θ(u+v)} ∫_0^{u∧v} e^{θs} (u+v-2s)^{-ᾱ} ds dv du`
//! * large dimension: the covariance functional
//!   `(θ(2π)^d)^{-1} ∫ [2/S + γ/S²] φ̂₁ conj(φ̂₂) dz`, `S = Σ|z_k|^{α_k}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, integrate_panels, Estimate, Tolerance};
use crate::special::upper_incomplete_gamma;
use crate::stable_motion::{Regime, StableIndexVector};
use crate::test_function::GaussianTestFunction;

/// Relative agreement required between two evaluation routes.
pub const CROSS_CHECK_RTOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantKind {
    C1,
    C2,
    LargeDimCov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantResult {
    pub value: f64,
    pub method: Method,
    pub est_abs_error: f64,
    pub regime: Regime,
}

pub fn regime_validate(indices: &StableIndexVector, requested: ConstantKind) -> Result<Regime> {
    let found = indices.regime();
    let (ok, window) = match requested {
        ConstantKind::C1 => (found == Regime::Critical, "|bar_alpha - 2| <= 1e-12"),
        ConstantKind::C2 => (found == Regime::Intermediate, "1 < bar_alpha < 2"),
        ConstantKind::LargeDimCov => (found == Regime::Large, "bar_alpha > 2"),
    };
    if ok {
        Ok(found)
    } else {
        Err(Error::UnsupportedRegime {
            requested: format!("{requested:?} (bar_alpha = {})", indices.bar_alpha()),
            found,
            window: window.into(),
        })
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Both evaluations of `∫_{R^d} (1 + Σ|y_k|^{α_k})^{-3} dy`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicIntegral {
    pub closed_form: f64,
    pub quadrature: Estimate,
}

/// Closed form `Γ(3-ᾱ)/2 · Π 2Γ(1/α_k)/α_k`, from
/// `(1+S)^{-3} = ½ ∫ t² e^{-t(1+S)} dt` and `∫ e^{-t|y|^α} dy = (2/α)Γ(1/α) t^{-1/α}`.
pub fn cubic_integral_closed_form(indices: &StableIndexVector) -> Result<f64> {
    check_cubic_convergence(indices)?;
    let prod: f64 = indices.alphas().iter().map(|a| 2.0 * gamma(1.0 / a) / a).product();
    Ok(0.5 * gamma(3.0 - indices.bar_alpha()) * prod)
}

fn check_cubic_convergence(indices: &StableIndexVector) -> Result<()> {
    if indices.bar_alpha() >= 3.0 {
        return Err(Error::Divergence(format!(
            "∫(1+Σ|y_k|^α_k)^-3 dy needs bar_alpha < 3, got {}",
            indices.bar_alpha()
        )));
    }
    Ok(())
}

fn inner_tol() -> Tolerance {
    Tolerance::new(1e-13, 1e-11).with_max_intervals(10_000)
}

/// Direct quadrature: raw nested integration in log coordinates for
/// `d ≤ 2`; the one-dimensional Laplace representation with numerically
/// integrated coordinate factors otherwise.
pub fn cubic_integral_quadrature(indices: &StableIndexVector) -> Result<Estimate> {
    check_cubic_convergence(indices)?;
    let a = indices.alphas();
    let est = match a.len() {
        1 => {
            let a0 = a[0];
            // y = e^u on each half-line.
            let upper = 45.0 / (3.0 * a0 - 1.0);
            let e = integrate(
                |u: f64| 2.0 * (u - 3.0 * (a0 * u).exp().ln_1p()).exp(),
                -45.0,
                upper,
                inner_tol(),
            );
            e
        }
        2 => {
            let (a1, a2) = (a[0], a[1]);
            let outer_upper = 45.0 / (a1 * (3.0 - 1.0 / a2) - 1.0);
            let mut inner_err = 0.0f64;
            let mut e = integrate(
                |u1: f64| {
                    let c = 1.0 + (a1 * u1).exp();
                    let upper = c.ln() / a2 + 45.0 / (3.0 * a2 - 1.0);
                    let inner = integrate(
                        |u2: f64| (u1 + u2 - 3.0 * (c + (a2 * u2).exp()).ln()).exp(),
                        -45.0,
                        upper,
                        inner_tol(),
                    );
                    inner_err = inner_err.max(inner.abs_error);
                    4.0 * inner.value
                },
                -45.0,
                outer_upper,
                Tolerance::new(1e-11, 1e-10).with_max_intervals(4000),
            );
            e.abs_error += 4.0 * inner_err * (outer_upper + 45.0);
            e
        }
        _ => {
            // ½ ∫ t² e^{-t} Π_k (2∫_0^∞ e^{-t y^α_k} dy) dt, with t = e^v and y = e^u.
            let coord = |t: f64, alpha: f64| -> f64 {
                let centre = -t.ln() / alpha;
                2.0 * integrate(
                    |u: f64| (u - t * (alpha * u).exp()).exp(),
                    centre - 45.0,
                    centre + 4.0 / alpha,
                    inner_tol(),
                )
                .value
            };
            integrate(
                |v: f64| {
                    let t = v.exp();
                    let prod: f64 = a.iter().map(|&al| coord(t, al)).product();
                    0.5 * (3.0 * v - t).exp() * prod
                },
                -45.0,
                4.5,
                Tolerance::new(1e-11, 1e-10),
            )
        }
    };
    est.require("direct quadrature of the cubic integral")
}

pub fn anisotropic_cubic_integral_routes(indices: &StableIndexVector) -> Result<CubicIntegral> {
    let closed_form = cubic_integral_closed_form(indices)?;
    let quadrature = cubic_integral_quadrature(indices)?;
    let gap = relative_gap(closed_form, quadrature.value);
    if gap > CROSS_CHECK_RTOL {
        return Err(Error::CrossCheck {
            what: "cubic integral closed form vs quadrature".into(),
            first: closed_form,
            second: quadrature.value,
            rel_gap: gap,
        });
    }
    Ok(CubicIntegral {
        closed_form,
        quadrature,
    })
}

/// `∫ (1 + Σ|y_k|^{α_k})^{-3} dy`, cross-checked between both routes.
pub fn anisotropic_cubic_integral(indices: &StableIndexVector) -> Result<f64> {
    Ok(anisotropic_cubic_integral_routes(indices)?.closed_form)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite and > 0, got {v}")))
    }
}

pub fn c1(indices: &StableIndexVector, gamma_rate: f64, theta: f64, kappa: f64) -> Result<ConstantResult> {
    let regime = regime_validate(indices, ConstantKind::C1)?;
    check_positive("gamma", gamma_rate)?;
    check_positive("theta", theta)?;
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(domain(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let routes = anisotropic_cubic_integral_routes(indices)?;
    let d = indices.dim() as i32;
    let value = (2.0 * gamma_rate * kappa / (theta * (2.0 * PI).powi(d)) * routes.closed_form).sqrt();
    let gap = relative_gap(routes.closed_form, routes.quadrature.value);
    Ok(ConstantResult {
        value,
        method: Method::ClosedForm,
        est_abs_error: value * (0.5 * gap).max(4.0 * f64::EPSILON),
        regime,
    })
}

fn c2_prefactor(indices: &StableIndexVector, gamma_rate: f64) -> f64 {
    let d = indices.dim() as i32;
    gamma_rate / PI.powi(d) * indices.alphas().iter().map(|a| gamma(1.0 / a) / a).product::<f64>()
}

/// The triple integral of the intermediate-dimension constant, evaluated
/// through its reduced form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleIntegral {
    pub value: f64,
    pub abs_error: f64,
    /// Truncation of the outer `a = u + v` integral.
    pub truncation: f64,
}

/// Reduced evaluation: `w = u + v - 2s` turns the inner integral into
/// `½ e^{θa/2} ∫_{|b|}^{a} e^{-θw/2} w^{-ᾱ} dw` (incomplete gamma), with
/// `(a, b) = (u + v, u - v)`; the `|b|^{1-ᾱ}` singularity is flattened by
/// `b = b'^{1/(2-ᾱ)}` and `a` is truncated once further chunks fall below
/// `1e-10` of the running total.
pub fn c2_triple_integral(bar_alpha: f64, theta: f64) -> Result<TripleIntegral> {
    if !(bar_alpha > 1.0 && bar_alpha < 2.0) {
        return Err(domain(format!("reduced triple integral needs 1 < bar_alpha < 2, got {bar_alpha}")));
    }
    check_positive("theta", theta)?;
    let s = 1.0 - bar_alpha;
    let power = 1.0 / (2.0 - bar_alpha);
    let scale = (0.5 * theta).powf(bar_alpha - 1.0);
    // I(b, a) = ∫_b^a e^{-θw/2} w^{-ᾱ} dw
    let tail = |b: f64, a: f64| -> f64 {
        scale * (upper_incomplete_gamma(s, 0.5 * theta * b) - upper_incomplete_gamma(s, 0.5 * theta * a))
    };
    let mut inner_err = 0.0f64;
    let mut outer = |a: f64| -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        let top = a.powf(2.0 - bar_alpha);
        let inner = integrate(
            |bp: f64| {
                let b = bp.powf(power);
                tail(b, a) * power * bp.powf(power - 1.0)
            },
            0.0,
            top,
            Tolerance::new(1e-13, 1e-11).with_max_intervals(2000),
        );
        inner_err = inner_err.max(inner.abs_error);
        0.5 * (-0.5 * theta * a).exp() * inner.value
    };
    let chunk = 20.0 / theta;
    let mut total = 0.0;
    let mut err = 0.0;
    let mut lo = 0.0;
    let mut converged = false;
    for _ in 0..64 {
        let hi = lo + chunk;
        let e = integrate(&mut outer, lo, hi, Tolerance::new(1e-12, 1e-10));
        total += e.value;
        err += e.abs_error;
        lo = hi;
        if !e.converged {
            return Err(Error::NumericAccuracy {
                what: "outer integral of the intermediate constant".into(),
                achieved: err,
                target: 1e-10 * total.abs(),
            });
        }
        if e.value.abs() <= 1e-10 * total.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericAccuracy {
            what: "truncation of the intermediate constant".into(),
            achieved: err,
            target: 1e-10 * total.abs(),
        });
    }
    Ok(TripleIntegral {
        value: total,
        abs_error: err + inner_err * lo,
        truncation: lo,
    })
}

/// `T(θ, ᾱ) = Γ(2-ᾱ) θ^{ᾱ-3}`: shifting `(u, v) = (s+p, s+q)` separates the
/// `s` integral and leaves `∫∫ e^{-θ(p+q)} (p+q)^{-ᾱ} dp dq`.
pub fn c2_triple_integral_closed_form(bar_alpha: f64, theta: f64) -> f64 {
    gamma(2.0 - bar_alpha) * theta.powf(bar_alpha - 3.0)
}

pub fn c2(indices: &StableIndexVector, gamma_rate: f64, theta: f64) -> Result<ConstantResult> {
    let regime = regime_validate(indices, ConstantKind::C2)?;
    check_positive("gamma", gamma_rate)?;
    let triple = c2_triple_integral(indices.bar_alpha(), theta)?;
    let closed = c2_triple_integral_closed_form(indices.bar_alpha(), theta);
    let gap = relative_gap(triple.value, closed);
    if gap > CROSS_CHECK_RTOL {
        return Err(Error::CrossCheck {
            what: "intermediate triple integral, reduced quadrature vs closed form".into(),
            first: triple.value,
            second: closed,
            rel_gap: gap,
        });
    }
    let pre = c2_prefactor(indices, gamma_rate);
    let value = (pre * triple.value).sqrt();
    Ok(ConstantResult {
        value,
        method: Method::Quadrature,
        // d sqrt(x) = dx / (2 sqrt(x))
        est_abs_error: pre * triple.abs_error / (2.0 * value),
        regime,
    })
}

pub fn c2_closed_form(indices: &StableIndexVector, gamma_rate: f64, theta: f64) -> Result<ConstantResult> {
    let regime = regime_validate(indices, ConstantKind::C2)?;
    check_positive("gamma", gamma_rate)?;
    check_positive("theta", theta)?;
    let value = (c2_prefactor(indices, gamma_rate) * c2_triple_integral_closed_form(indices.bar_alpha(), theta)).sqrt();
    Ok(ConstantResult {
        value,
        method: Method::ClosedForm,
        est_abs_error: 8.0 * f64::EPSILON * value,
        regime,
    })
}

/// `∫_R e^{-t|z|^α} φ̂₁(z) conj(φ̂₂(z)) dz` for coordinate `k` (amplitudes excluded).
fn coordinate_spectral_overlap(
    phi1: &GaussianTestFunction,
    phi2: &GaussianTestFunction,
    k: usize,
    alpha: f64,
    t: f64,
) -> Result<f64> {
    let var = 0.5 * (phi1.widths[k].powi(2) + phi2.widths[k].powi(2));
    let shift = phi1.centers[k] - phi2.centers[k];
    let amp = phi1.coordinate_integral(k) * phi2.coordinate_integral(k);
    let gauss_window = (32.3 / var).sqrt();
    let window = if t > 0.0 {
        gauss_window.min((32.3 / t).powf(1.0 / alpha))
    } else {
        gauss_window
    };
    let panels = ((window * shift.abs() / PI).ceil() as usize).clamp(1, 100_000);
    let pts: Vec<f64> = (0..=panels).map(|i| window * i as f64 / panels as f64).collect();
    let tol = Tolerance::new(f64::MIN_POSITIVE, 1e-12).with_max_intervals(20_000);
    let weight = |z: f64| (-var * z * z - t * z.powf(alpha)).exp();
    // The weight is even, so the sine part of e^{i shift z} cancels.
    let re = integrate_panels(|z| weight(z) * (shift * z).cos(), &pts, tol).require("spectral overlap")?;
    Ok(2.0 * amp * re.value)
}

/// Large-dimension covariance functional, via
/// `2/S + γ/S² = ∫_0^∞ (2 + γt) e^{-tS} dt`, which makes the `z` integral a
/// product of one-dimensional factors. `t` runs to `1e10` by quadrature in
/// `log t`, and the remaining tail uses the leading-order asymptotics of the
/// factors.
pub fn large_dim_covariance(
    phi1: &GaussianTestFunction,
    phi2: &GaussianTestFunction,
    indices: &StableIndexVector,
    gamma_rate: f64,
    theta: f64,
) -> Result<f64> {
    if indices.regime() != Regime::Large {
        return Err(Error::Divergence(format!(
            "large-dimension covariance needs bar_alpha > 2, got {}",
            indices.bar_alpha()
        )));
    }
    check_positive("gamma", gamma_rate)?;
    check_positive("theta", theta)?;
    phi1.validate()?;
    phi2.validate()?;
    if phi1.dim() != indices.dim() || phi2.dim() != indices.dim() {
        return Err(domain("test function and motion dimensions differ"));
    }
    let alphas = indices.alphas();
    let bar = indices.bar_alpha();
    let t_max: f64 = 1e10;
    let mut failure: Option<Error> = None;
    let mut integrand = |v: f64| -> f64 {
        let t = v.exp();
        let mut prod = 1.0;
        for (k, &a) in alphas.iter().enumerate() {
            match coordinate_spectral_overlap(phi1, phi2, k, a, t) {
                Ok(c) => prod *= c,
                Err(e) => {
                    failure.get_or_insert(e);
                    return f64::NAN;
                }
            }
        }
        (2.0 + gamma_rate * t) * t * prod
    };
    let body = integrate(&mut integrand, -60.0, t_max.ln(), Tolerance::new(1e-13, 1e-11).with_max_intervals(4000));
    if let Some(e) = failure {
        return Err(e);
    }
    let body = body.require("large-dimension covariance")?;
    // Tail: factor k ~ φ̂₁φ̂₂(0) · (2/α)Γ(1/α) t^{-1/α}.
    let lead: f64 = alphas
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            phi1.coordinate_integral(k) * phi2.coordinate_integral(k) * 2.0 / a * gamma(1.0 / a)
        })
        .product();
    let tail = lead * (2.0 * t_max.powf(1.0 - bar) / (bar - 1.0) + gamma_rate * t_max.powf(2.0 - bar) / (bar - 2.0));
    let d = indices.dim() as i32;
    Ok(phi1.amplitude * phi2.amplitude * (body.value + tail) / (theta * (2.0 * PI).powi(d)))
}
