//! Experiments over a schedule of scales and the statistical checks run on
//! their output.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branching_sim::{simulate_system, ModelParams, SimulationDomain};
use crate::error::{Error, Result};
use crate::fluctuation::{refine_schedule, uniform_schedule, CenteringMode, FluctuationContext, FluctuationSample};
use crate::limit_constants::{c1, c2, large_dim_covariance, ConstantResult};
use crate::rng::{derive_stream, replicate_key};
use crate::stable_motion::{Regime, StableIndexVector};
use crate::stats::{
    self, cross_time_correlation, ln_corrected_fit, normality_test, scaling_exponent, Interval, LnCorrectedFit,
    NormalityStats, SlopeFit, VarianceEstimate,
};
use crate::test_function::{GaussianTestFunction, TestFunction};

/// Gate band for the fitted exponent; an engineering choice.
pub const EXPONENT_BAND: f64 = 0.20;
pub const SKEWNESS_BAND: f64 = 0.3;
pub const KURTOSIS_BAND: f64 = 0.6;
/// Sanity envelope for `Var⟨X_n(t), φ⟩ / predicted limit variance`.
pub const ENVELOPE: (f64, f64) = (0.1, 10.0);
pub const MIN_REPLICATES: usize = 100;

fn default_t_grid() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

fn default_delta() -> f64 {
    0.25
}

fn default_resamples() -> usize {
    stats::DEFAULT_RESAMPLES
}

/// Box half-width `L(n) = scale · n^{1/α_min}` in every coordinate, shrunk
/// so the expected initial particle count stays within `particle_budget`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSchedule {
    pub scale: f64,
    /// The truncation diagnostic reruns every scale with `L · secondary_fraction`.
    pub secondary_fraction: f64,
    pub particle_budget: f64,
}

impl Default for DomainSchedule {
    fn default() -> Self {
        Self {
            scale: 1.0,
            secondary_fraction: 0.5,
            particle_budget: 4096.0,
        }
    }
}

/// Every `every`-th replicate is also evaluated on the grid with half the
/// spacing; the sample is flagged when the two differ by more than `tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefinementConfig {
    pub every: u64,
    pub tolerance: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            every: 20,
            tolerance: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alphas: StableIndexVector,
    pub gamma: f64,
    pub theta: f64,
    pub kappa: f64,
    pub n_schedule: Vec<f64>,
    pub replicates: usize,
    pub phi: GaussianTestFunction,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub domain: DomainSchedule,
    pub master_seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub centering_mode: CenteringMode,
    #[serde(default)]
    pub refinement: RefinementConfig,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(path, format!("must be finite and > 0, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        positive("gamma", self.gamma)?;
        positive("theta", self.theta)?;
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(config_err("kappa", format!("must lie in the open interval (0, 1), got {}", self.kappa)));
        }
        if self.alphas.regime() == Regime::Subcritical {
            return Err(config_err(
                "alphas",
                format!("bar_alpha = {} ≤ 1 has no fluctuation limit; need bar_alpha > 1", self.alphas.bar_alpha()),
            ));
        }
        if self.n_schedule.is_empty() {
            return Err(config_err("n_schedule", "must not be empty"));
        }
        for (i, &n) in self.n_schedule.iter().enumerate() {
            let path = format!("n_schedule[{i}]");
            if !(n >= 2.0 && n.is_finite()) {
                return Err(config_err(&path, format!("scales must be finite and ≥ 2, got {n}")));
            }
            if i > 0 && n <= self.n_schedule[i - 1] {
                return Err(config_err(&path, "scales must be strictly increasing"));
            }
            ModelParams::new(self.gamma, self.theta, self.kappa, n).map_err(|e| config_err(&path, e.to_string()))?;
        }
        if self.replicates < MIN_REPLICATES {
            return Err(config_err(
                "replicates",
                format!("need at least {MIN_REPLICATES}, got {}", self.replicates),
            ));
        }
        self.phi.validate().map_err(|e| config_err("phi", e.to_string()))?;
        if self.phi.dim() != self.alphas.dim() {
            return Err(config_err(
                "phi",
                format!("dimension {} differs from alphas ({})", self.phi.dim(), self.alphas.dim()),
            ));
        }
        if self.t_grid.is_empty() {
            return Err(config_err("t_grid", "must not be empty"));
        }
        for (i, &t) in self.t_grid.iter().enumerate() {
            if !(t > 0.0 && t <= 1.0) {
                return Err(config_err(&format!("t_grid[{i}]"), format!("must lie in (0, 1], got {t}")));
            }
            if i > 0 && t <= self.t_grid[i - 1] {
                return Err(config_err(&format!("t_grid[{i}]"), "times must be strictly increasing"));
            }
        }
        positive("domain.scale", self.domain.scale)?;
        if !(self.domain.secondary_fraction > 0.0 && self.domain.secondary_fraction < 1.0) {
            return Err(config_err(
                "domain.secondary_fraction",
                format!("must lie in (0, 1), got {}", self.domain.secondary_fraction),
            ));
        }
        positive("domain.particle_budget", self.domain.particle_budget)?;
        positive("delta", self.delta)?;
        if self.refinement.every == 0 {
            return Err(config_err("refinement.every", "must be ≥ 1"));
        }
        positive("refinement.tolerance", self.refinement.tolerance)?;
        if self.bootstrap_resamples < 100 {
            return Err(config_err("bootstrap_resamples", "need at least 100 resamples"));
        }
        Ok(())
    }

    /// Primary box half-width for `n`.
    pub fn half_width(&self, n: f64) -> f64 {
        let d = self.alphas.dim() as f64;
        let natural = self.domain.scale * n.powf(1.0 / self.alphas.min_alpha());
        let budget = 0.5 * self.domain.particle_budget.powf(1.0 / d);
        let support = self
            .phi
            .centers
            .iter()
            .zip(&self.phi.widths)
            .map(|(m, s)| m.abs() + 8.0 * s)
            .fold(0.0, f64::max);
        natural.min(budget).max(support)
    }

    pub fn test_function(&self) -> TestFunction {
        self.phi.clone().into()
    }

    /// Index of `t = 1` (or the largest time) on the grid.
    pub fn reference_t_index(&self) -> usize {
        self.t_grid.len() - 1
    }
}

/// The limit constant the experiment is compared against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub regime: Regime,
    pub bar_alpha: f64,
    /// Exponent of `F_n²`; for the critical regime this is `κ` and the
    /// `ln n` factor is fitted separately.
    pub exponent: f64,
    pub exponent_provenance: String,
    pub constant: Option<ConstantResult>,
    pub constant_provenance: String,
    /// Limit variance of `⟨X_n(t), φ⟩`.
    pub limit_variance: f64,
}

pub fn predict(config: &ExperimentConfig) -> Result<Prediction> {
    let idx = &config.alphas;
    let phi_int = config.phi.integral();
    let (exponent, exponent_provenance, constant, constant_provenance, limit_variance) = match idx.regime() {
        Regime::Intermediate => {
            let c = c2(idx, config.gamma, config.theta)?;
            let v = c.value * c.value * phi_int * phi_int;
            (
                (3.0 - idx.bar_alpha()) * config.kappa,
                "F_n^2 = n^((3 - bar_alpha) kappa)".to_string(),
                Some(c),
                "limit_constants::c2, C^2 (∫φ)^2".to_string(),
                v,
            )
        }
        Regime::Critical => {
            let c = c1(idx, config.gamma, config.theta, config.kappa)?;
            let v = c.value * c.value * phi_int * phi_int;
            (
                config.kappa,
                "F_n^2 = n^kappa ln n".to_string(),
                Some(c),
                "limit_constants::c1, C^2 (∫φ)^2".to_string(),
                v,
            )
        }
        Regime::Large => {
            let v = large_dim_covariance(&config.phi, &config.phi, idx, config.gamma, config.theta)?;
            (
                config.kappa,
                "F_n^2 = n^kappa".to_string(),
                None,
                "limit_constants::large_dim_covariance(phi, phi)".to_string(),
                v,
            )
        }
        found @ Regime::Subcritical => {
            return Err(Error::UnsupportedRegime {
                requested: "experiment".into(),
                found,
                window: "bar_alpha > 1".into(),
            })
        }
    };
    Ok(Prediction {
        regime: idx.regime(),
        bar_alpha: idx.bar_alpha(),
        exponent,
        exponent_provenance,
        constant,
        constant_provenance,
        limit_variance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeStats {
    pub t: f64,
    pub mean: f64,
    pub sd: f64,
    /// `4 · sd / √M`.
    pub mean_bound: f64,
    pub variance: VarianceEstimate,
    /// `F_n² · variance`.
    pub unnormalized_variance: VarianceEstimate,
    /// `variance / predicted limit variance`.
    pub normalized_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub t: f64,
    pub primary: VarianceEstimate,
    pub secondary: VarianceEstimate,
    /// Primary over secondary variance.
    pub ratio: f64,
    /// The primary interval reaches at least the secondary lower bound.
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub checked: usize,
    pub flagged: usize,
    pub max_abs_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub n: f64,
    pub half_width: f64,
    pub secondary_half_width: f64,
    pub f_n: f64,
    pub replicates: usize,
    pub particles_simulated: u64,
    pub per_t: Vec<TimeStats>,
    pub truncation: Vec<TruncationCheck>,
    pub refinement: RefinementReport,
    /// Correlation matrix over the t grid; `None` for degenerate samples.
    pub cross_time_correlation: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub t: f64,
    pub fit: SlopeFit,
    pub slope_ci: Interval,
    pub predicted: f64,
    pub ln_corrected: LnCorrectedFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub n: f64,
    pub t: f64,
    pub stats: NormalityStats,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub id: String,
    pub passed: bool,
    pub detail: String,
    /// The threshold is an engineering choice, not a consequence of the
    /// limit theorem.
    pub engineering_choice: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub tool_version: String,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub centering_mode: CenteringMode,
    pub t_grid: Vec<f64>,
    pub prediction: Prediction,
    pub scales: Vec<ScaleSummary>,
    pub scaling: Option<ScalingReport>,
    pub normality: Option<NormalityReport>,
    /// All samples were identical (for example `φ ≡ 0`).
    pub degenerate: bool,
    pub gates: Vec<Gate>,
}

impl SummaryReport {
    pub fn all_gates_pass(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn gate(&self, id: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.id == id)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub summary: SummaryReport,
    /// Primary-box samples first, then the secondary box, each ordered by
    /// `(n, replicate, t)`.
    pub samples: Vec<FluctuationSample>,
}

struct ReplicateResult {
    values: Vec<f64>,
    accuracy_flag: Option<bool>,
    change: Option<f64>,
    particles: u64,
}

struct ScaleJob {
    scale_index: usize,
    box_index: usize,
    ctx: FluctuationContext,
    schedule: Vec<f64>,
}

fn run_replicate(config: &ExperimentConfig, job: &ScaleJob, r: u64) -> Result<ReplicateResult> {
    let refine = job.box_index == 0 && r % config.refinement.every == 0;
    let schedule = if refine {
        refine_schedule(&job.schedule)
    } else {
        job.schedule.clone()
    };
    let key = replicate_key(job.scale_index, job.box_index, r);
    let ctx = &job.ctx;
    let system = simulate_system(
        &ctx.domain,
        &ctx.params.branching(),
        &ctx.indices,
        ctx.horizon(),
        schedule,
        config.master_seed,
        key,
    )?;
    let particles = system.particle_count() as u64;
    if refine {
        let coarse = ctx.evaluate(&system, Some(&job.schedule))?;
        let fine = ctx.evaluate(&system, None)?;
        let change = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok(ReplicateResult {
            values: coarse,
            accuracy_flag: Some(change <= config.refinement.tolerance),
            change: Some(change),
            particles,
        })
    } else {
        Ok(ReplicateResult {
            values: ctx.evaluate(&system, None)?,
            accuracy_flag: None,
            change: None,
            particles,
        })
    }
}

fn build_job(config: &ExperimentConfig, scale_index: usize, box_index: usize) -> Result<ScaleJob> {
    let n = config.n_schedule[scale_index];
    let params = ModelParams::new(config.gamma, config.theta, config.kappa, n)?;
    let mut half = config.half_width(n);
    if box_index == 1 {
        half *= config.domain.secondary_fraction;
    }
    let domain = SimulationDomain::new(vec![half; config.alphas.dim()])?;
    let ctx = FluctuationContext::new(
        params,
        config.alphas.clone(),
        domain,
        config.test_function(),
        &config.t_grid,
        config.centering_mode,
    )?;
    let schedule = uniform_schedule(ctx.horizon(), config.delta, &ctx.cuts)?;
    Ok(ScaleJob {
        scale_index,
        box_index,
        ctx,
        schedule,
    })
}

fn column(results: &[ReplicateResult], j: usize) -> Vec<f64> {
    results.iter().map(|r| r.values[j]).collect()
}

fn is_degenerate(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

fn bootstrap_stream(config: &ExperimentConfig, scale_index: usize, box_index: usize, t_index: usize) -> crate::rng::Stream {
    derive_stream(config.master_seed, replicate_key(scale_index, box_index, t_index as u64), "bootstrap")
}

fn scale_variance(f_n: f64, v: VarianceEstimate) -> VarianceEstimate {
    let f2 = f_n * f_n;
    VarianceEstimate {
        estimate: f2 * v.estimate,
        ci: Interval {
            lower: f2 * v.ci.lower,
            upper: f2 * v.ci.upper,
        },
    }
}

/// Runs every scale of the schedule (plus the secondary box) on a pool of
/// `workers` threads. The report does not depend on `workers`.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ExperimentOutcome> {
    config.validate()?;
    let prediction = predict(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| crate::error::domain(format!("worker pool: {e}")))?;
    pool.install(|| run_in_pool(config, prediction))
}

fn run_in_pool(config: &ExperimentConfig, prediction: Prediction) -> Result<ExperimentOutcome> {
    let m = config.replicates;
    let k = config.n_schedule.len();
    let jobs: Vec<ScaleJob> = (0..2 * k)
        .into_par_iter()
        .map(|j| build_job(config, j % k, j / k))
        .collect::<Result<_>>()?;
    let mut results: Vec<Vec<ReplicateResult>> = Vec::with_capacity(jobs.len());
    for job in &jobs {
        let n = job.ctx.params.n;
        let batch = (0..m as u64)
            .into_par_iter()
            .map(|r| {
                run_replicate(config, job, r).map_err(|e| Error::Replicate {
                    n: n as u64,
                    replicate: r,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        results.push(batch);
    }

    let mut samples = Vec::with_capacity(2 * k * m * config.t_grid.len());
    for (job, batch) in jobs.iter().zip(&results) {
        for (r, res) in batch.iter().enumerate() {
            for (j, &t) in config.t_grid.iter().enumerate() {
                samples.push(FluctuationSample {
                    n: job.ctx.params.n,
                    t,
                    value: res.values[j],
                    replicate_id: r as u64,
                    seed: config.master_seed,
                    half_widths: job.ctx.domain.half_widths.clone(),
                    centering_mode: config.centering_mode,
                    accuracy_flag: res.accuracy_flag,
                });
            }
        }
    }

    let degenerate = results.iter().all(|batch| {
        (0..config.t_grid.len()).all(|j| {
            let c = column(batch, j);
            is_degenerate(&c) && c[0] == 0.0
        })
    });

    let mut scales = Vec::with_capacity(k);
    for i in 0..k {
        let (job, batch) = (&jobs[i], &results[i]);
        let (sjob, sbatch) = (&jobs[k + i], &results[k + i]);
        let f_n = job.ctx.f_n;
        let mut per_t = Vec::new();
        let mut truncation = Vec::new();
        for (j, &t) in config.t_grid.iter().enumerate() {
            let col = column(batch, j);
            let var = stats::bootstrap_variance(
                &col,
                config.bootstrap_resamples,
                stats::DEFAULT_LEVEL,
                &mut bootstrap_stream(config, i, 0, j),
            )?;
            let sd = var.estimate.sqrt();
            per_t.push(TimeStats {
                t,
                mean: stats::mean(&col),
                sd,
                mean_bound: 4.0 * sd / (m as f64).sqrt(),
                variance: var,
                unnormalized_variance: scale_variance(f_n, var),
                normalized_ratio: var.estimate / prediction.limit_variance,
            });
            let scol = column(sbatch, j);
            let svar = stats::bootstrap_variance(
                &scol,
                config.bootstrap_resamples,
                stats::DEFAULT_LEVEL,
                &mut bootstrap_stream(config, i, 1, j),
            )?;
            truncation.push(TruncationCheck {
                t,
                primary: var,
                secondary: svar,
                ratio: var.estimate / svar.estimate,
                consistent: var.ci.upper >= svar.ci.lower,
            });
        }
        let changes: Vec<f64> = batch.iter().filter_map(|r| r.change).collect();
        let refinement = RefinementReport {
            checked: changes.len(),
            flagged: batch.iter().filter(|r| r.accuracy_flag == Some(false)).count(),
            max_abs_change: changes.iter().copied().fold(0.0, f64::max),
        };
        let columns: Vec<Vec<f64>> = (0..config.t_grid.len()).map(|j| column(batch, j)).collect();
        scales.push(ScaleSummary {
            n: job.ctx.params.n,
            half_width: job.ctx.domain.half_widths[0],
            secondary_half_width: sjob.ctx.domain.half_widths[0],
            f_n,
            replicates: m,
            particles_simulated: batch.iter().chain(sbatch).map(|r| r.particles).sum(),
            per_t,
            truncation,
            refinement,
            cross_time_correlation: cross_time_correlation(&columns).ok(),
        });
    }

    let t_ref = config.reference_t_index();
    let scaling = if degenerate || k < 2 {
        None
    } else {
        let ns: Vec<f64> = scales.iter().map(|s| s.n).collect();
        let unnorm: Vec<f64> = scales.iter().map(|s| s.per_t[t_ref].unnormalized_variance.estimate).collect();
        let cols: Vec<Vec<f64>> = results[..k].iter().map(|b| column(b, t_ref)).collect();
        let f_ns: Vec<f64> = scales.iter().map(|s| s.f_n).collect();
        let fit = scaling_exponent(&ns, &unnorm)?;
        let slope_ci = slope_bootstrap(config, &ns, &f_ns, &cols)?;
        Some(ScalingReport {
            t: config.t_grid[t_ref],
            fit,
            slope_ci,
            predicted: prediction.exponent,
            ln_corrected: ln_corrected_fit(&ns, &unnorm, config.kappa)?,
        })
    };

    let normality = if degenerate {
        None
    } else {
        let col = column(&results[k - 1], t_ref);
        normality_test(&col).ok().map(|stats| NormalityReport {
            n: config.n_schedule[k - 1],
            t: config.t_grid[t_ref],
            stats,
            note: "KS against a normal with the sample mean and variance; the asymptotic Kolmogorov p-value \
                   ignores parameter estimation and is conservative guidance only"
                .into(),
        })
    };

    let mut summary = SummaryReport {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: config.master_seed,
        seed_derivation: crate::rng::DERIVATION_RULE.into(),
        centering_mode: config.centering_mode,
        t_grid: config.t_grid.clone(),
        prediction,
        scales,
        scaling,
        normality,
        degenerate,
        gates: Vec::new(),
    };
    summary.gates = evaluate_gates(&summary);
    Ok(ExperimentOutcome { summary, samples })
}

/// Percentile interval of the slope, resampling every scale independently.
fn slope_bootstrap(config: &ExperimentConfig, ns: &[f64], f_ns: &[f64], cols: &[Vec<f64>]) -> Result<Interval> {
    let mut rng = derive_stream(config.master_seed, u64::MAX, "slope-bootstrap");
    let mut slopes = Vec::with_capacity(config.bootstrap_resamples);
    let mut buf = Vec::new();
    for _ in 0..config.bootstrap_resamples {
        let vars: Vec<f64> = cols
            .iter()
            .zip(f_ns)
            .map(|(c, f)| {
                buf.clear();
                buf.extend((0..c.len()).map(|_| c[rng.random_range(0..c.len())]));
                f * f * stats::sample_variance(&buf)
            })
            .collect();
        if let Ok(fit) = scaling_exponent(ns, &vars) {
            slopes.push(fit.slope);
        }
    }
    if slopes.is_empty() {
        return Err(crate::error::domain("no bootstrap resample gave positive variances"));
    }
    slopes.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - stats::DEFAULT_LEVEL);
    Ok(Interval {
        lower: stats::quantile_sorted(&slopes, tail),
        upper: stats::quantile_sorted(&slopes, 1.0 - tail),
    })
}

fn correlation_at(s: &ScaleSummary, t_grid: &[f64], a: f64, b: f64) -> Option<f64> {
    let i = t_grid.iter().position(|t| (t - a).abs() < 1e-12)?;
    let j = t_grid.iter().position(|t| (t - b).abs() < 1e-12)?;
    s.cross_time_correlation.as_ref().map(|m| m[i][j])
}

/// Pass/fail checks appropriate to the experiment's regime.
pub fn evaluate_gates(s: &SummaryReport) -> Vec<Gate> {
    let mut gates = Vec::new();
    let regime = s.prediction.regime;
    if s.centering_mode == CenteringMode::TruncationCorrected {
        let worst = s
            .scales
            .iter()
            .flat_map(|sc| sc.per_t.iter().map(move |p| (sc.n, p)))
            .map(|(n, p)| (n, p.t, if p.mean_bound > 0.0 { p.mean.abs() / p.mean_bound } else { 0.0 }))
            .fold((0.0, 0.0, 0.0), |acc, x| if x.2 > acc.2 { x } else { acc });
        gates.push(Gate {
            id: "mean_zero".into(),
            passed: worst.2 <= 1.0,
            detail: format!(
                "max |mean| / (4 sd/√M) = {:.4} at n = {}, t = {}",
                worst.2, worst.0, worst.1
            ),
            engineering_choice: false,
        });
    }
    if s.degenerate {
        return gates;
    }
    let last = s.scales.last().expect("non-empty schedule");
    let first = s.scales.first().expect("non-empty schedule");
    if regime == Regime::Intermediate {
        if let Some(sc) = &s.scaling {
            gates.push(Gate {
                id: "scaling_exponent".into(),
                passed: (sc.fit.slope - sc.predicted).abs() <= EXPONENT_BAND,
                detail: format!(
                    "slope {:.4} (bootstrap 95% CI [{:.4}, {:.4}]) vs predicted {:.4} ± {EXPONENT_BAND}",
                    sc.fit.slope, sc.slope_ci.lower, sc.slope_ci.upper, sc.predicted
                ),
                engineering_choice: true,
            });
        }
        if let Some(nr) = &s.normality {
            gates.push(Gate {
                id: "gaussianity".into(),
                passed: nr.stats.skewness.abs() <= SKEWNESS_BAND && nr.stats.excess_kurtosis.abs() <= KURTOSIS_BAND,
                detail: format!(
                    "n = {}: skewness {:.4} (band {SKEWNESS_BAND}), excess kurtosis {:.4} (band {KURTOSIS_BAND}), KS {:.4} (p ≈ {:.3})",
                    nr.n, nr.stats.skewness, nr.stats.excess_kurtosis, nr.stats.ks_statistic, nr.stats.p_value
                ),
                engineering_choice: true,
            });
        }
        if let (Some(hi), Some(lo)) = (
            correlation_at(last, &s.t_grid, 0.5, 1.0),
            correlation_at(first, &s.t_grid, 0.5, 1.0),
        ) {
            if s.scales.len() > 1 {
                gates.push(Gate {
                    id: "time_flatness_trend".into(),
                    passed: hi > lo,
                    detail: format!("corr(t=0.5, t=1): {hi:.4} at n = {} vs {lo:.4} at n = {}", last.n, first.n),
                    engineering_choice: false,
                });
            }
        }
    }
    if regime == Regime::Critical {
        if let Some(sc) = &s.scaling {
            if let (Some(ln), Some(pw)) = (sc.ln_corrected.rse, sc.fit.rse) {
                gates.push(Gate {
                    id: "ln_corrected_model".into(),
                    passed: ln < pw,
                    detail: format!("residual standard error: ln-corrected {ln:.5} vs power law {pw:.5}"),
                    engineering_choice: false,
                });
            }
        }
    }
    if matches!(regime, Regime::Intermediate | Regime::Critical) {
        let t_ref = s.t_grid.len() - 1;
        let ratios: Vec<(f64, f64)> = s.scales.iter().map(|sc| (sc.n, sc.per_t[t_ref].normalized_ratio)).collect();
        gates.push(Gate {
            id: "variance_envelope".into(),
            passed: ratios.iter().all(|(_, r)| *r >= ENVELOPE.0 && *r <= ENVELOPE.1),
            detail: format!(
                "Var / predicted limit variance at t = {}: {}",
                s.t_grid[t_ref],
                ratios.iter().map(|(n, r)| format!("n={n}: {r:.3}")).collect::<Vec<_>>().join(", ")
            ),
            engineering_choice: true,
        });
    }
    let bad: Vec<String> = s
        .scales
        .iter()
        .flat_map(|sc| sc.truncation.iter().filter(|c| !c.consistent).map(move |c| format!("n={}, t={}", sc.n, c.t)))
        .collect();
    gates.push(Gate {
        id: "truncation_monotone".into(),
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "larger box never has a significantly smaller variance".into()
        } else {
            format!("smaller variance at the larger box: {}", bad.join("; "))
        },
        engineering_choice: false,
    });
    gates
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            alphas: StableIndexVector::new(vec![2.0 / 3.0]).unwrap(),
            gamma: 1.0,
            theta: 1.0,
            kappa: 0.5,
            n_schedule: vec![4.0, 8.0],
            replicates: 100,
            phi: GaussianTestFunction::standard(1),
            t_grid: default_t_grid(),
            domain: DomainSchedule {
                particle_budget: 64.0,
                ..Default::default()
            },
            master_seed: 5,
            delta: 0.25,
            centering_mode: CenteringMode::TruncationCorrected,
            refinement: RefinementConfig::default(),
            bootstrap_resamples: 200,
        }
    }

    #[test]
    fn validation_names_fields() {
        let mut c = small_config();
        c.kappa = 1.5;
        match c.validate() {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "kappa");
                assert!(message.contains("(0, 1)"));
            }
            other => panic!("{other:?}"),
        }
        let mut c = small_config();
        c.n_schedule = vec![8.0, 4.0];
        assert!(matches!(c.validate(), Err(Error::Config { path, .. }) if path == "n_schedule[1]"));
        let mut c = small_config();
        c.replicates = 99;
        assert!(c.validate().is_err());
    }

    #[test]
    fn half_width_schedule() {
        let c = small_config();
        // 4^{1.5} = 8 sits exactly at the support floor 8σ
        assert_eq!(c.half_width(4.0), 8.0);
        // 8^{1.5} ≈ 22.6 is capped by the budget 64 / 2 = 32 → no cap
        assert!((c.half_width(8.0) - 8f64.powf(1.5)).abs() < 1e-12);
        assert_eq!(c.half_width(64.0), 32.0);
    }

    #[test]
    fn zero_test_function_is_degenerate() {
        let mut c = small_config();
        c.n_schedule = vec![4.0];
        c.phi = c.phi.scaled(0.0);
        let out = run_experiment(&c, 1).unwrap();
        assert!(out.summary.degenerate);
        assert!(out.samples.iter().all(|s| s.value == 0.0));
        assert_eq!(out.summary.scales[0].per_t[0].variance.estimate, 0.0);
    }

    #[test]
    fn small_run_is_worker_independent() {
        let c = small_config();
        let a = run_experiment(&c, 1).unwrap();
        let b = run_experiment(&c, 3).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.samples.len(), 2 * 2 * 100 * 4);
    }
}
