//! Sample statistics used by the verification harness.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{domain, Result};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub estimate: f64,
    pub ci: Interval,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Bessel-corrected sample variance (two-pass).
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for an arbitrary statistic of one sample.
pub fn bootstrap_interval<R, F>(samples: &[f64], resamples: usize, level: f64, rng: &mut R, mut stat: F) -> Interval
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    let n = samples.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    Interval {
        lower: quantile_sorted(&stats, tail),
        upper: quantile_sorted(&stats, 1.0 - tail),
    }
}

pub fn bootstrap_variance<R: Rng + ?Sized>(
    samples: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> Result<VarianceEstimate> {
    if samples.len() < 30 {
        return Err(domain(format!("variance estimate needs at least 30 samples, got {}", samples.len())));
    }
    if resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(domain("bootstrap needs resamples > 0 and a level in (0, 1)"));
    }
    Ok(VarianceEstimate {
        estimate: sample_variance(samples),
        ci: bootstrap_interval(samples, resamples, level, rng, sample_variance),
    })
}

/// Unbiased variance with a 95% percentile-bootstrap interval (1000 resamples).
pub fn estimate_variance<R: Rng + ?Sized>(samples: &[f64], rng: &mut R) -> Result<VarianceEstimate> {
    bootstrap_variance(samples, DEFAULT_RESAMPLES, DEFAULT_LEVEL, rng)
}

/// Least-squares line `log var = intercept + slope · log n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` with only two points (no residual degrees of freedom).
    pub stderr: Option<f64>,
    /// Residual standard error of the log-variance fit.
    pub rse: Option<f64>,
}

fn log_points(ns: &[f64], variances: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if ns.len() != variances.len() {
        return Err(domain("scales and variances differ in length"));
    }
    if ns.len() < 2 {
        return Err(domain("a slope needs at least two scales"));
    }
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(domain(format!("variances must be positive and finite, got {v}")));
    }
    if ns.iter().any(|n| !(*n > 0.0)) {
        return Err(domain("scales must be positive"));
    }
    Ok((ns.iter().map(|n| n.ln()).collect(), variances.iter().map(|v| v.ln()).collect()))
}

pub fn scaling_exponent(ns: &[f64], variances: &[f64]) -> Result<SlopeFit> {
    let (x, y) = log_points(ns, variances)?;
    let k = x.len() as f64;
    let mx = mean(&x);
    let my = mean(&y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(domain("scales must not all be equal"));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (stderr, rse) = if x.len() > 2 {
        let ssr: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        let s2 = ssr / (k - 2.0);
        (Some((s2 / sxx).sqrt()), Some(s2.sqrt()))
    } else {
        (None, None)
    };
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        rse,
    })
}

/// Fit of `log var = c + κ log n + log log n` (only `c` free).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LnCorrectedFit {
    pub intercept: f64,
    pub rse: Option<f64>,
}

pub fn ln_corrected_fit(ns: &[f64], variances: &[f64], kappa: f64) -> Result<LnCorrectedFit> {
    let (x, y) = log_points(ns, variances)?;
    if x.iter().any(|lx| *lx <= 0.0) {
        return Err(domain("the ln-corrected model needs n > 1"));
    }
    let resid: Vec<f64> = x.iter().zip(&y).map(|(lx, ly)| ly - kappa * lx - lx.ln()).collect();
    let intercept = mean(&resid);
    let rse = (resid.len() > 1).then(|| {
        let ssr: f64 = resid.iter().map(|r| (r - intercept).powi(2)).sum();
        (ssr / (resid.len() as f64 - 1.0)).sqrt()
    });
    Ok(LnCorrectedFit { intercept, rse })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityStats {
    pub ks_statistic: f64,
    /// Asymptotic Kolmogorov p-value. The normal's mean and variance are
    /// estimated from the sample, so this is conservative guidance rather
    /// than an exact test.
    pub p_value: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // P(K ≤ x) = √(2π)/x Σ exp(-(2j-1)²π²/(8x²))
        let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let s: f64 = (1..=20).map(|j| (-((2 * j - 1) as f64).powi(2) * c).exp()).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|j| {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (j * j) as f64 * x * x).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// KS distance to the normal with the sample's mean and variance, plus
/// moment statistics.
pub fn normality_test(samples: &[f64]) -> Result<NormalityStats> {
    let n = samples.len();
    if n < 100 {
        return Err(domain(format!("normality test needs at least 100 samples, got {n}")));
    }
    let m = mean(samples);
    let var = sample_variance(samples);
    if !(var > 0.0) {
        return Err(domain("normality test on zero-variance samples"));
    }
    let sd = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let ks = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal_cdf((x - m) / sd);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let m2 = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / nf;
    let m3 = samples.iter().map(|x| (x - m).powi(3)).sum::<f64>() / nf;
    let m4 = samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / nf;
    Ok(NormalityStats {
        ks_statistic: ks,
        p_value: kolmogorov_survival(nf.sqrt() * ks),
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(domain("correlation needs two matched columns of length ≥ 2"));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(domain("correlation of a constant column"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation matrix of the columns (one column per time point).
pub fn cross_time_correlation(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = columns.len();
    let mut out = vec![vec![1.0; k]; k];
    for i in 0..k {
        if sample_variance(&columns[i]) == 0.0 || columns[i].len() < 2 {
            return Err(domain(format!("column {i} is degenerate")));
        }
        for j in (i + 1)..k {
            let r = pearson(&columns[i], &columns[j])?;
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}
