//! Anisotropic Lévy motion with independent symmetric stable coordinates.
//!
//! Scale convention: coordinate `k` at time `t` has characteristic function
//! `exp(-t |z|^{α_k})`. At `α = 2` this is `N(0, 2t)`, not the `N(0, t)`
//! that some libraries use for their unit-scale Gaussian; at `α = 1` it is
//! the standard Cauchy law scaled by `t`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quadrature::{integrate_panels, Tolerance};
use crate::test_function::GaussianTestFunction;

/// Width of the `ᾱ = 2` window.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

/// Dimension regime fixed by `ᾱ = Σ 1/α_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Large,
    Critical,
    Intermediate,
    Subcritical,
}

impl Regime {
    pub fn classify(bar_alpha: f64) -> Self {
        if (bar_alpha - 2.0).abs() <= CRITICAL_TOLERANCE {
            Regime::Critical
        } else if bar_alpha > 2.0 {
            Regime::Large
        } else if bar_alpha > 1.0 {
            Regime::Intermediate
        } else {
            Regime::Subcritical
        }
    }
}

/// Stability indices `α_k ∈ (0, 2]`, one per coordinate. Serialized as the
/// bare array of indices.
#[derive(Clone, Debug, PartialEq)]
pub struct StableIndexVector {
    alphas: Vec<f64>,
    bar_alpha: f64,
    regime: Regime,
}

impl StableIndexVector {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(domain("need at least one stability index"));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 2.0)) {
            return Err(domain(format!("stability index {a} outside (0, 2]")));
        }
        let bar_alpha: f64 = alphas.iter().map(|a| 1.0 / a).sum();
        Ok(Self {
            regime: Regime::classify(bar_alpha),
            alphas,
            bar_alpha,
        })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn bar_alpha(&self) -> f64 {
        self.bar_alpha
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn min_alpha(&self) -> f64 {
        self.alphas.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl Serialize for StableIndexVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.alphas.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StableIndexVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let alphas = Vec::<f64>::deserialize(d)?;
        StableIndexVector::new(alphas).map_err(serde::de::Error::custom)
    }
}

/// The law of the motion; fully determined by the index vector.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionLaw {
    pub indices: StableIndexVector,
}

impl MotionLaw {
    pub fn new(indices: StableIndexVector) -> Self {
        Self { indices }
    }

    pub fn cf(&self, z: &[f64], t: f64) -> Result<f64> {
        motion_cf(z, t, &self.indices)
    }

    pub fn samplers(&self) -> Vec<StableSampler> {
        self.indices.alphas().iter().map(|&a| StableSampler::new(a)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SamplerKind {
    Gaussian,
    Cauchy,
    General,
}

/// Chambers–Mallows–Stuck sampler for one symmetric coordinate, with the
/// exponents precomputed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableSampler {
    alpha: f64,
    inv_alpha: f64,
    tail_exponent: f64,
    kind: SamplerKind,
}

impl StableSampler {
    /// `alpha` must already be validated to lie in `(0, 2]`.
    pub fn new(alpha: f64) -> Self {
        let kind = if alpha == 2.0 {
            SamplerKind::Gaussian
        } else if alpha == 1.0 {
            SamplerKind::Cauchy
        } else {
            SamplerKind::General
        };
        Self {
            alpha,
            inv_alpha: 1.0 / alpha,
            tail_exponent: (1.0 - alpha) / alpha,
            kind,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Draw from the standard law `exp(-|z|^α)`.
    #[inline]
    pub fn standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            SamplerKind::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                std::f64::consts::SQRT_2 * z
            }
            SamplerKind::Cauchy => (PI * (open_unit(rng) - 0.5)).tan(),
            SamplerKind::General => {
                let v = PI * (open_unit(rng) - 0.5);
                let w = -open_unit(rng).ln();
                let a = self.alpha;
                let cos_v = v.cos();
                (a * v).sin() / cos_v.powf(self.inv_alpha)
                    * (((1.0 - a) * v).cos() / w).powf(self.tail_exponent)
            }
        }
    }

    /// Draw the increment over elapsed time `dt` (> 0, unchecked).
    #[inline]
    pub fn increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        let scale = match self.kind {
            SamplerKind::Gaussian => dt.sqrt(),
            SamplerKind::Cauchy => dt,
            SamplerKind::General => dt.powf(self.inv_alpha),
        };
        scale * self.standard(rng)
    }
}

/// Uniform on the open interval (0, 1).
#[inline]
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(domain(format!("stability index {alpha} outside (0, 2]")))
    }
}

pub fn sample_stable_increment<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(domain(format!("elapsed time must be > 0, got {t}")));
    }
    Ok(StableSampler::new(alpha).increment(t, rng))
}

/// `exp(-t Σ_k |z_k|^{α_k})`.
pub fn motion_cf(z: &[f64], t: f64, indices: &StableIndexVector) -> Result<f64> {
    if z.len() != indices.dim() {
        return Err(domain(format!(
            "frequency has dimension {}, motion has {}",
            z.len(),
            indices.dim()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(domain("frequency vector must be finite"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(domain(format!("time must be ≥ 0, got {t}")));
    }
    let exponent: f64 = z
        .iter()
        .zip(indices.alphas())
        .map(|(zk, a)| zk.abs().powf(*a))
        .sum();
    Ok((-t * exponent).exp())
}

// Tail cut for the frequency window: exp(-32.3) < 1e-14.
const LOG_TAIL: f64 = 32.3;

fn frequency_window(sigma: f64, alpha: f64, t: f64) -> f64 {
    let gaussian = (2.0 * LOG_TAIL).sqrt() / sigma;
    if t > 0.0 {
        gaussian.min((LOG_TAIL / t).powf(1.0 / alpha))
    } else {
        gaussian
    }
}

fn oscillation_breakpoints(window: f64, frequency: f64) -> Vec<f64> {
    let panels = ((window * frequency.abs() / PI).ceil() as usize).clamp(1, 200_000);
    (0..=panels).map(|i| window * i as f64 / panels as f64).collect()
}

fn semigroup_tolerance() -> Tolerance {
    Tolerance::new(1e-13, 1e-11).with_max_intervals(400_000)
}

/// `T_t` applied to the unit-amplitude coordinate factor `k` of `phi`.
pub fn semigroup_coordinate(
    phi: &GaussianTestFunction,
    k: usize,
    alpha: f64,
    t: f64,
    x: f64,
) -> Result<f64> {
    let m = phi.centers[k];
    let s = phi.widths[k];
    if t == 0.0 {
        return Ok(phi.coordinate_value(k, x));
    }
    if alpha == 2.0 {
        // Gaussian convolved with N(0, 2t).
        let v2 = s * s + 2.0 * t;
        return Ok(s / v2.sqrt() * (-(x - m) * (x - m) / (2.0 * v2)).exp());
    }
    // (1/2π) ∫ φ̂_k(z) e^{-t|z|^α} e^{-ixz} dz, folded onto z ≥ 0.
    let window = frequency_window(s, alpha, t);
    let shift = x - m;
    let points = oscillation_breakpoints(window, shift);
    let est = integrate_panels(
        |z| (-0.5 * s * s * z * z - t * z.powf(alpha)).exp() * (shift * z).cos(),
        &points,
        semigroup_tolerance(),
    )
    .require("semigroup Fourier inversion")?;
    Ok(s * (2.0 * PI).sqrt() / PI * est.value)
}

pub fn semigroup_apply(
    phi: &GaussianTestFunction,
    t: f64,
    x: &[f64],
    indices: &StableIndexVector,
) -> Result<f64> {
    check_semigroup_args(phi, t, indices)?;
    if x.len() != phi.dim() || x.iter().any(|v| !v.is_finite()) {
        return Err(domain("evaluation point must be finite with the motion's dimension"));
    }
    let mut value = phi.amplitude;
    for (k, &alpha) in indices.alphas().iter().enumerate() {
        value *= semigroup_coordinate(phi, k, alpha, t, x[k])?;
    }
    Ok(value)
}

fn check_semigroup_args(phi: &GaussianTestFunction, t: f64, indices: &StableIndexVector) -> Result<()> {
    phi.validate()?;
    if phi.dim() != indices.dim() {
        return Err(domain("test function and motion dimensions differ"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(domain(format!("time must be ≥ 0, got {t}")));
    }
    Ok(())
}

/// `∫_{-L}^{L} T_t φ_k(x) dx` for the unit-amplitude coordinate factor `k`.
pub fn semigroup_coordinate_box_integral(
    phi: &GaussianTestFunction,
    k: usize,
    alpha: f64,
    t: f64,
    half_width: f64,
) -> Result<f64> {
    let m = phi.centers[k];
    let s = phi.widths[k];
    let l = half_width;
    if t == 0.0 || alpha == 2.0 {
        let v = (s * s + 2.0 * t).sqrt();
        let r = std::f64::consts::SQRT_2 * v;
        return Ok(phi.coordinate_integral(k)
            * 0.5
            * (statrs::function::erf::erf((l - m) / r) + statrs::function::erf::erf((l + m) / r)));
    }
    // (1/2π) ∫ φ̂_k(z) e^{-t|z|^α} 2 sin(Lz)/z dz, folded onto z ≥ 0.
    let window = frequency_window(s, alpha, t);
    let points = oscillation_breakpoints(window, l + m.abs());
    let est = integrate_panels(
        |z| {
            let sinc = if z == 0.0 { l } else { (l * z).sin() / z };
            (-0.5 * s * s * z * z - t * z.powf(alpha)).exp() * (m * z).cos() * sinc
        },
        &points,
        semigroup_tolerance(),
    )
    .require("box integral of the semigroup")?;
    Ok(2.0 * s * (2.0 * PI).sqrt() / PI * est.value)
}

/// `∫_box T_t φ(x) dx` over the box `Π [-L_k, L_k]`.
pub fn semigroup_box_integral(
    phi: &GaussianTestFunction,
    t: f64,
    half_widths: &[f64],
    indices: &StableIndexVector,
) -> Result<f64> {
    check_semigroup_args(phi, t, indices)?;
    if half_widths.len() != phi.dim() {
        return Err(domain("box and test function dimensions differ"));
    }
    let mut value = phi.amplitude;
    for (k, &alpha) in indices.alphas().iter().enumerate() {
        value *= semigroup_coordinate_box_integral(phi, k, alpha, t, half_widths[k])?;
    }
    Ok(value)
}

/// `max_z |mean(cos(z X)) - exp(-t|z|^α)|` over `z_grid`.
pub fn empirical_cf_deviation(samples: &[f64], alpha: f64, t: f64, z_grid: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(domain("empirical CF needs at least one sample"));
    }
    check_alpha(alpha)?;
    if z_grid.iter().any(|z| !z.is_finite()) {
        return Err(domain("frequency grid must be finite"));
    }
    let n = samples.len() as f64;
    Ok(z_grid
        .iter()
        .map(|&z| {
            let ecf = samples.iter().map(|x| (z * x).cos()).sum::<f64>() / n;
            (ecf - (-t * z.abs().powf(alpha)).exp()).abs()
        })
        .fold(0.0, f64::max))
}

/// Evenly spaced grid of `points` frequencies on `[-half, half]`.
pub fn symmetric_grid(half: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2);
    (0..points)
        .map(|i| -half + 2.0 * half * i as f64 / (points - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use rand::SeedableRng;
    use std::f64::consts::FRAC_PI_2;
    use rand_chacha::ChaCha8Rng;

    fn draws(alpha: f64, t: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| sample_stable_increment(alpha, t, &mut rng).unwrap())
            .collect()
    }

    #[test]
    fn regime_classification() {
        let r = |a: Vec<f64>| StableIndexVector::new(a).unwrap().regime();
        assert_eq!(r(vec![0.5]), Regime::Critical);
        assert_eq!(r(vec![1.0, 1.0]), Regime::Critical);
        assert_eq!(r(vec![2.0 / 3.0]), Regime::Intermediate);
        assert_eq!(r(vec![0.8, 0.8]), Regime::Large);
        assert_eq!(r(vec![2.0]), Regime::Subcritical);
        assert_eq!(r(vec![1.0]), Regime::Subcritical);
        assert!(StableIndexVector::new(vec![]).is_err());
        assert!(StableIndexVector::new(vec![2.5]).is_err());
        assert!(StableIndexVector::new(vec![0.0]).is_err());
    }

    #[test]
    fn sampler_domain_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_stable_increment(0.0, 1.0, &mut rng).is_err());
        assert!(sample_stable_increment(2.1, 1.0, &mut rng).is_err());
        assert!(sample_stable_increment(1.5, 0.0, &mut rng).is_err());
        assert!(sample_stable_increment(1.5, -1.0, &mut rng).is_err());
    }

    #[test]
    fn gaussian_branch_has_variance_two() {
        let x = draws(2.0, 1.0, 100_000, 3);
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        // SE of the second moment is sqrt(2·4/N) ≈ 0.009
        assert!((var - 2.0).abs() < 0.04, "{var}");
    }

    #[test]
    fn cauchy_quartiles() {
        let mut x = draws(1.0, 1.0, 100_000, 4);
        x.sort_by(f64::total_cmp);
        let q = |p: f64| x[(p * x.len() as f64) as usize];
        assert!(q(0.5).abs() < 0.02);
        assert!((q(0.25) + 1.0).abs() < 0.03);
        assert!((q(0.75) - 1.0).abs() < 0.03);
    }

    #[test]
    fn half_stable_cf_at_one() {
        let n = 100_000;
        let x = draws(0.5, 1.0, n, 5);
        let dev = empirical_cf_deviation(&x, 0.5, 1.0, &[1.0]).unwrap();
        assert!(dev <= 5.0 / (n as f64).sqrt(), "{dev}");
    }

    #[test]
    fn ecf_detects_mislabelled_alpha() {
        let n = 100_000;
        let x = draws(2.0, 1.0, n, 6);
        let grid = symmetric_grid(3.0, 61);
        let dev = empirical_cf_deviation(&x, 1.0, 1.0, &grid).unwrap();
        assert!(dev > 0.05, "{dev}");
        assert_eq!(empirical_cf_deviation(&[0.0, 0.0], 1.0, 0.0, &[0.0]).unwrap(), 0.0);
        assert!(empirical_cf_deviation(&[], 1.0, 1.0, &[0.0]).is_err());
    }

    #[test]
    fn motion_cf_values() {
        let one = StableIndexVector::new(vec![0.5]).unwrap();
        assert_eq!(motion_cf(&[0.0], 3.0, &one).unwrap(), 1.0);
        assert!((motion_cf(&[4.0], 1.0, &one).unwrap() - (-2f64).exp()).abs() < 1e-15);
        let two = StableIndexVector::new(vec![1.0, 1.0]).unwrap();
        assert!((motion_cf(&[1.0, 2.0], 0.5, &two).unwrap() - (-1.5f64).exp()).abs() < 1e-15);
        assert!(motion_cf(&[f64::NAN, 0.0], 1.0, &two).is_err());
        assert_eq!(motion_cf(&[5.0, -3.0], 0.0, &two).unwrap(), 1.0);
    }

    #[test]
    fn semigroup_identity_at_time_zero() {
        let idx = StableIndexVector::new(vec![0.7, 1.3]).unwrap();
        let phi = GaussianTestFunction::new(vec![0.5, -1.0], vec![1.0, 0.6], 2.0).unwrap();
        for x in [[0.0, 0.0], [1.5, -2.0]] {
            assert!((semigroup_apply(&phi, 0.0, &x, &idx).unwrap() - phi.value(&x)).abs() < 1e-15);
        }
    }

    #[test]
    fn semigroup_gaussian_closed_form() {
        let idx = StableIndexVector::new(vec![2.0]).unwrap();
        let phi = GaussianTestFunction::standard(1);
        for (t, x) in [(0.3f64, 0.0f64), (1.0, 1.5), (4.0, -2.0)] {
            let expect = (1.0f64 + 2.0 * t).powf(-0.5) * (-x * x / (2.0 * (1.0 + 2.0 * t))).exp();
            let got = semigroup_apply(&phi, t, &[x], &idx).unwrap();
            assert!((got - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn semigroup_fourier_route_agrees_with_gaussian_limit() {
        // Fourier inversion with α just below 2 is close to the α = 2 closed form.
        let phi = GaussianTestFunction::standard(1);
        let near = semigroup_coordinate(&phi, 0, 1.999_999, 0.8, 0.7).unwrap();
        let v2: f64 = 1.0 + 1.6;
        let exact = (1.0 / v2).sqrt() * (-0.49 / (2.0 * v2)).exp();
        assert!((near - exact).abs() < 1e-5);
    }

    #[test]
    fn semigroup_cauchy_matches_direct_convolution() {
        // T_1 φ(0) = ∫ φ(y) / (π (1 + y²)) dy, integrated on y = tan(u).
        let phi = GaussianTestFunction::standard(1);
        let idx = StableIndexVector::new(vec![1.0]).unwrap();
        let direct = integrate(
            |u: f64| {
                let y = u.tan();
                (-0.5 * y * y).exp() / PI
            },
            -FRAC_PI_2,
            FRAC_PI_2,
            Tolerance::new(1e-14, 1e-13),
        )
        .value;
        let got = semigroup_apply(&phi, 1.0, &[0.0], &idx).unwrap();
        assert!((got - direct).abs() < 1e-8, "{got} vs {direct}");
    }

    #[test]
    fn box_integral_limits() {
        let phi = GaussianTestFunction::new(vec![0.4], vec![1.0], 1.0).unwrap();
        let idx = StableIndexVector::new(vec![2.0 / 3.0]).unwrap();
        // Large box: essentially all the mass of T_tφ, which equals ∫φ.
        let at0 = semigroup_box_integral(&phi, 0.0, &[9.0], &idx).unwrap();
        assert!((at0 - phi.integral()).abs() < 1e-10);
        let small_t = semigroup_box_integral(&phi, 1e-3, &[50.0], &idx).unwrap();
        assert!(small_t <= phi.integral() && small_t > 0.99 * phi.integral());
        // Compare the Fourier route against direct integration of semigroup values.
        let t = 0.7;
        let l = 3.0;
        let direct = integrate(
            |x| semigroup_apply(&phi, t, &[x], &idx).unwrap(),
            -l,
            l,
            Tolerance::new(1e-11, 1e-10),
        )
        .value;
        let fourier = semigroup_box_integral(&phi, t, &[l], &idx).unwrap();
        assert!((direct - fourier).abs() < 1e-9, "{direct} vs {fourier}");
    }
}
