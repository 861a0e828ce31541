//! Gamma-function helpers on top of `statrs`.

use statrs::function::gamma::{gamma, gamma_ur};

/// Upper incomplete gamma `Γ(s, x) = ∫_x^∞ e^{-w} w^{s-1} dw` for
/// `s ∈ (-1, 0) ∪ (0, ∞)` and `x > 0`.
///
/// Negative orders use `Γ(s, x) = (Γ(s+1, x) - x^s e^{-x}) / s`.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if s > 0.0 {
        gamma(s) * gamma_ur(s, x)
    } else {
        debug_assert!(s > -1.0 && s != 0.0);
        (gamma(s + 1.0) * gamma_ur(s + 1.0, x) - x.powf(s) * (-x).exp()) / s
    }
}
