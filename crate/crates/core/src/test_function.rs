//! Separable Gaussian test functions, the concrete smooth rapidly
//! decreasing family used throughout.
//!
//! Fourier convention: `f̂(z) = ∫ e^{i⟨x,z⟩} f(x) dx`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// `A · Π_k exp(-(x_k - m_k)² / (2 σ_k²))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianTestFunction {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub amplitude: f64,
}

impl GaussianTestFunction {
    pub fn new(centers: Vec<f64>, widths: Vec<f64>, amplitude: f64) -> Result<Self> {
        let g = Self {
            centers,
            widths,
            amplitude,
        };
        g.validate()?;
        Ok(g)
    }

    /// Unit-amplitude, unit-width Gaussian centred at the origin of `R^d`.
    pub fn standard(dim: usize) -> Self {
        Self {
            centers: vec![0.0; dim],
            widths: vec![1.0; dim],
            amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() || self.centers.len() != self.widths.len() {
            return Err(domain(format!(
                "test function needs matching non-empty centers/widths, got {} and {}",
                self.centers.len(),
                self.widths.len()
            )));
        }
        if self.widths.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(domain("test function widths must be finite and > 0"));
        }
        if self.centers.iter().any(|m| !m.is_finite()) || !self.amplitude.is_finite() {
            return Err(domain("test function centers and amplitude must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            amplitude: self.amplitude * factor,
            ..self.clone()
        }
    }

    /// Unit-amplitude factor for coordinate `k`.
    #[inline]
    pub fn coordinate_value(&self, k: usize, x: f64) -> f64 {
        let u = (x - self.centers[k]) / self.widths[k];
        (-0.5 * u * u).exp()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        // One exp for all coordinates.
        let q: f64 = x
            .iter()
            .zip(self.centers.iter().zip(&self.widths))
            .map(|(xk, (m, s))| {
                let u = (xk - m) / s;
                u * u
            })
            .sum();
        self.amplitude * (-0.5 * q).exp()
    }

    pub fn coordinate_integral(&self, k: usize) -> f64 {
        self.widths[k] * (2.0 * PI).sqrt()
    }

    pub fn integral(&self) -> f64 {
        self.amplitude * (0..self.dim()).map(|k| self.coordinate_integral(k)).product::<f64>()
    }

    pub fn coordinate_fourier(&self, k: usize, z: f64) -> Complex64 {
        let s = self.widths[k];
        let mag = self.coordinate_integral(k) * (-0.5 * s * s * z * z).exp();
        Complex64::from_polar(mag, self.centers[k] * z)
    }

    pub fn fourier(&self, z: &[f64]) -> Complex64 {
        (0..self.dim()).fold(Complex64::new(self.amplitude, 0.0), |acc, k| {
            acc * self.coordinate_fourier(k, z[k])
        })
    }
}

/// A finite sum of separable Gaussians. Every statistic in this crate is
/// linear in the test function, so sums are handled term by term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestFunction {
    pub terms: Vec<GaussianTestFunction>,
}

impl TestFunction {
    pub fn new(terms: Vec<GaussianTestFunction>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(domain("test function must have at least one term"));
        };
        let d = first.dim();
        for t in &terms {
            t.validate()?;
            if t.dim() != d {
                return Err(domain("all test function terms must share a dimension"));
            }
        }
        Ok(Self { terms })
    }

    pub fn dim(&self) -> usize {
        self.terms[0].dim()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|g| g.value(x)).sum()
    }

    pub fn integral(&self) -> f64 {
        self.terms.iter().map(GaussianTestFunction::integral).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|g| g.amplitude == 0.0)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &TestFunction, b: f64) -> Self {
        let mut terms: Vec<_> = self.terms.iter().map(|g| g.scaled(a)).collect();
        terms.extend(other.terms.iter().map(|g| g.scaled(b)));
        Self { terms }
    }
}

impl From<GaussianTestFunction> for TestFunction {
    fn from(g: GaussianTestFunction) -> Self {
        Self { terms: vec![g] }
    }
}
