//! The occupation-time fluctuation statistic
//! `⟨X_n(t), φ⟩ = F_n^{-1} ∫_0^{nt} ⟨N_n(s) - centering(s), φ⟩ ds`.
//!
//! The particle part is a trapezoid rule along each particle's own recorded
//! path (birth, scheduled times, death), so population jumps at split times
//! are resolved exactly. The centering part is deterministic and integrated
//! separately to quadrature accuracy.

use serde::{Deserialize, Serialize};

use crate::branching_sim::{expected_population, integrated_expected_population, ModelParams, SystemRealization, SimulationDomain};
use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::stable_motion::{semigroup_box_integral, Regime, StableIndexVector};
use crate::test_function::TestFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum CenteringMode {
    /// `f_n(s) ∫φ`, the infinite-system centering.
    ExactInfinite,
    /// `f_n(s) ∫_box T_s φ`, the exact mean of the truncated system.
    #[default]
    TruncationCorrected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSample {
    pub n: f64,
    pub t: f64,
    pub value: f64,
    pub replicate_id: u64,
    pub seed: u64,
    pub half_widths: Vec<f64>,
    pub centering_mode: CenteringMode,
    /// `None` when no refinement check ran for this replicate.
    pub accuracy_flag: Option<bool>,
}

/// `F_n` for the regime of `indices`.
pub fn scaling_fn(params: &ModelParams, indices: &StableIndexVector) -> Result<f64> {
    let n = params.n;
    let k = params.kappa;
    match indices.regime() {
        Regime::Critical => {
            if n < 2.0 {
                return Err(domain(format!("critical scaling needs n ≥ 2, got {n}")));
            }
            Ok((n.powf(k) * n.ln()).sqrt())
        }
        Regime::Intermediate => Ok(n.powf((3.0 - indices.bar_alpha()) * k / 2.0)),
        Regime::Large => Ok(n.powf(k / 2.0)),
        found @ Regime::Subcritical => Err(Error::UnsupportedRegime {
            requested: "fluctuation scaling".into(),
            found,
            window: "bar_alpha > 1".into(),
        }),
    }
}

fn centering_space_factor(
    s: f64,
    phi: &TestFunction,
    indices: &StableIndexVector,
    domain: &SimulationDomain,
    mode: CenteringMode,
) -> Result<f64> {
    match mode {
        CenteringMode::ExactInfinite => Ok(phi.integral()),
        CenteringMode::TruncationCorrected => phi
            .terms
            .iter()
            .map(|g| semigroup_box_integral(g, s, &domain.half_widths, indices))
            .sum(),
    }
}

/// Mean of `⟨N(s), φ⟩` under the chosen centering.
pub fn centering_value(
    s: f64,
    phi: &TestFunction,
    params: &ModelParams,
    indices: &StableIndexVector,
    domain: &SimulationDomain,
    mode: CenteringMode,
) -> Result<f64> {
    if !(s >= 0.0 && s <= params.n) {
        return Err(crate::error::domain(format!("time {s} outside [0, n = {}]", params.n)));
    }
    let law = params.branching();
    Ok(expected_population(s, law.gamma, law.delta)? * centering_space_factor(s, phi, indices, domain, mode)?)
}

/// `∫_a^b centering(s) ds`.
pub fn centering_integral(
    a: f64,
    b: f64,
    phi: &TestFunction,
    params: &ModelParams,
    indices: &StableIndexVector,
    domain: &SimulationDomain,
    mode: CenteringMode,
) -> Result<f64> {
    let law = params.branching();
    match mode {
        CenteringMode::ExactInfinite => {
            let fb = integrated_expected_population(b, law.gamma, law.delta)?;
            let fa = integrated_expected_population(a, law.gamma, law.delta)?;
            Ok((fb - fa) * phi.integral())
        }
        CenteringMode::TruncationCorrected => {
            if a == b {
                return Ok(0.0);
            }
            let scale = phi.terms.iter().map(|g| g.integral().abs()).sum::<f64>().max(f64::MIN_POSITIVE);
            let mut failure = None;
            let est = integrate(
                |s| match centering_space_factor(s, phi, indices, domain, mode) {
                    Ok(v) => expected_population(s, law.gamma, law.delta).unwrap_or(f64::NAN) * v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                a,
                b,
                Tolerance::new(1e-10 * scale, 1e-11).with_max_intervals(2000),
            );
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(est.require("centering integral")?.value)
        }
    }
}

/// Uniform recording grid `{kΔ : 0 < kΔ ≤ horizon}` merged with `cuts`.
pub fn uniform_schedule(horizon: f64, spacing: f64, cuts: &[f64]) -> Result<Vec<f64>> {
    if !(spacing > 0.0 && horizon > 0.0) {
        return Err(domain("grid spacing and horizon must be positive"));
    }
    let steps = (horizon / spacing).floor() as usize;
    let mut grid: Vec<f64> = (1..=steps).map(|k| k as f64 * spacing).collect();
    grid.extend(cuts.iter().copied().filter(|c| *c > 0.0 && *c <= horizon));
    grid.sort_by(f64::total_cmp);
    let eps = 1e-9 * horizon;
    let mut out: Vec<f64> = Vec::with_capacity(grid.len());
    for g in grid {
        match out.last_mut() {
            Some(last) if g - *last <= eps => {
                // Keep the exact cut value when a cut collides with a grid point.
                if cuts.contains(&g) {
                    *last = g;
                }
            }
            _ => out.push(g),
        }
    }
    Ok(out)
}

/// Inserts the midpoint of every gap (including the one after time 0).
pub fn refine_schedule(schedule: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * schedule.len());
    let mut prev = 0.0;
    for &s in schedule {
        out.push(0.5 * (prev + s));
        out.push(s);
        prev = s;
    }
    out
}

/// `∫_0^{c} ⟨N(s), φ⟩ ds` for each cut `c`, by the per-particle trapezoid
/// rule. With `coarse` set, interior path points not on that grid are
/// skipped, giving the coarse-grid value from a finer path.
pub fn occupation_integrals(
    system: &SystemRealization,
    phi: &TestFunction,
    cuts: &[f64],
    coarse: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if cuts.windows(2).any(|w| w[0] > w[1]) {
        return Err(domain("cuts must be sorted"));
    }
    let grid = coarse.unwrap_or(&system.schedule);
    for &c in cuts {
        if c > system.horizon || (c > 0.0 && grid.binary_search_by(|g| g.total_cmp(&c)).is_err()) {
            return Err(domain(format!("recording grid does not cover the cut time {c}")));
        }
    }
    let mut totals = vec![0.0; cuts.len()];
    let mut times: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for tree in &system.trees {
        for p in &tree.particles {
            times.clear();
            values.clear();
            let last = p.path_times.len() - 1;
            for (i, &t) in p.path_times.iter().enumerate() {
                let keep = match coarse {
                    None => true,
                    Some(g) => {
                        i == 0
                            || (i == last && p.death_time == Some(t))
                            || g.binary_search_by(|x| x.total_cmp(&t)).is_ok()
                    }
                };
                if keep {
                    times.push(t);
                    values.push(phi.value(p.position(i)));
                }
            }
            accumulate_trapezoid(&times, &values, cuts, &mut totals);
        }
    }
    Ok(totals)
}

fn accumulate_trapezoid(times: &[f64], values: &[f64], cuts: &[f64], totals: &mut [f64]) {
    let mut running = 0.0;
    let mut c = cuts.partition_point(|&c| c <= times[0]);
    for i in 1..times.len() {
        let (t0, t1) = (times[i - 1], times[i]);
        let (v0, v1) = (values[i - 1], values[i]);
        while c < cuts.len() && cuts[c] < t1 {
            let u = cuts[c];
            let vu = v0 + (v1 - v0) * (u - t0) / (t1 - t0);
            totals[c] += running + 0.5 * (v0 + vu) * (u - t0);
            c += 1;
        }
        running += 0.5 * (v0 + v1) * (t1 - t0);
    }
    for total in &mut totals[c..] {
        *total += running;
    }
}

/// Everything needed to evaluate the statistic on many replicates of one
/// system: scale, centering integrals at the cut times.
#[derive(Clone, Debug)]
pub struct FluctuationContext {
    pub params: ModelParams,
    pub indices: StableIndexVector,
    pub domain: SimulationDomain,
    pub phi: TestFunction,
    pub mode: CenteringMode,
    pub f_n: f64,
    pub t_grid: Vec<f64>,
    /// `n · t` for each entry of `t_grid`.
    pub cuts: Vec<f64>,
    /// Cumulative centering integral at each cut.
    pub centering: Vec<f64>,
}

impl FluctuationContext {
    pub fn new(
        params: ModelParams,
        indices: StableIndexVector,
        domain: SimulationDomain,
        phi: TestFunction,
        t_grid: &[f64],
        mode: CenteringMode,
    ) -> Result<Self> {
        params.validate()?;
        domain.validate()?;
        if phi.dim() != indices.dim() || domain.dim() != indices.dim() {
            return Err(crate::error::domain("dimension mismatch between test function, box and motion"));
        }
        if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) || t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(crate::error::domain("t grid must be increasing inside (0, 1]"));
        }
        let f_n = scaling_fn(&params, &indices)?;
        let cuts: Vec<f64> = t_grid.iter().map(|t| params.n * t).collect();
        let mut centering = Vec::with_capacity(cuts.len());
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &c in &cuts {
            acc += centering_integral(prev, c, &phi, &params, &indices, &domain, mode)?;
            centering.push(acc);
            prev = c;
        }
        Ok(Self {
            params,
            indices,
            domain,
            phi,
            mode,
            f_n,
            t_grid: t_grid.to_vec(),
            cuts,
            centering,
        })
    }

    pub fn horizon(&self) -> f64 {
        *self.cuts.last().expect("non-empty t grid")
    }

    /// Normalized statistic at every `t` of the grid.
    pub fn evaluate(&self, system: &SystemRealization, coarse: Option<&[f64]>) -> Result<Vec<f64>> {
        if system.horizon < self.horizon() {
            return Err(domain(format!(
                "replicate covers [0, {}] but the statistic needs [0, {}]",
                system.horizon,
                self.horizon()
            )));
        }
        let occ = occupation_integrals(system, &self.phi, &self.cuts, coarse)?;
        Ok(occ
            .iter()
            .zip(&self.centering)
            .map(|(o, c)| (o - c) / self.f_n)
            .collect())
    }
}

/// `⟨X_n(t), φ⟩` for one simulated replicate.
pub fn occupation_fluctuation(
    system: &SystemRealization,
    phi: &TestFunction,
    t: f64,
    params: &ModelParams,
    indices: &StableIndexVector,
    mode: CenteringMode,
) -> Result<FluctuationSample> {
    let ctx = FluctuationContext::new(*params, indices.clone(), system.domain.clone(), phi.clone(), &[t], mode)?;
    let value = ctx.evaluate(system, None)?[0];
    Ok(FluctuationSample {
        n: params.n,
        t,
        value,
        replicate_id: system.replicate_id,
        seed: system.seed,
        half_widths: system.domain.half_widths.clone(),
        centering_mode: mode,
        accuracy_flag: None,
    })
}

/// Trapezoid approximation of `∫ ⟨X_n(t), φ⟩ h(t) dt` over the given grid.
pub fn time_integrated_statistic(t_grid: &[f64], samples: &[f64], h_weights: &[f64]) -> Result<f64> {
    if t_grid.len() != samples.len() || t_grid.len() != h_weights.len() {
        return Err(domain(format!(
            "grid mismatch: {} times, {} samples, {} weights",
            t_grid.len(),
            samples.len(),
            h_weights.len()
        )));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("t grid must be strictly increasing"));
    }
    Ok(t_grid
        .windows(2)
        .zip(samples.windows(2).zip(h_weights.windows(2)))
        .map(|(t, (x, h))| 0.5 * (x[0] * h[0] + x[1] * h[1]) * (t[1] - t[0]))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching_sim::simulate_system;
    use crate::test_function::GaussianTestFunction;

    fn params(n: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, 0.5, n).unwrap()
    }

    #[test]
    fn scaling_values() {
        let crit = StableIndexVector::new(vec![0.5]).unwrap();
        let inter = StableIndexVector::new(vec![2.0 / 3.0]).unwrap();
        let large = StableIndexVector::new(vec![0.4]).unwrap();
        let p = params(100.0);
        assert!((scaling_fn(&p, &crit).unwrap() - (10.0 * 100f64.ln()).sqrt()).abs() < 1e-12);
        assert!((scaling_fn(&p, &crit).unwrap() - 6.78614).abs() < 1e-5);
        assert!((scaling_fn(&p, &inter).unwrap() - 5.62341).abs() < 1e-5);
        assert!((scaling_fn(&p, &large).unwrap() - 3.16228).abs() < 1e-5);
        let sub = StableIndexVector::new(vec![1.5]).unwrap();
        assert!(matches!(scaling_fn(&p, &sub), Err(Error::UnsupportedRegime { .. })));
        assert!(scaling_fn(&ModelParams::new(1.0, 0.5, 0.5, 1.0).unwrap(), &crit).is_err());
    }

    #[test]
    fn centering_values() {
        let idx = StableIndexVector::new(vec![2.0 / 3.0]).unwrap();
        let phi: TestFunction = GaussianTestFunction::standard(1).into();
        let p = ModelParams::new(1.0, 0.1, 0.5, 1.0).unwrap();
        let dom = SimulationDomain::new(vec![8.0]).unwrap();
        let exact = centering_value(1.0, &phi, &p, &idx, &dom, CenteringMode::ExactInfinite).unwrap();
        assert!((exact - 2.41765).abs() < 1e-5, "{exact}");
        let at0 = centering_value(0.0, &phi, &p, &idx, &dom, CenteringMode::TruncationCorrected).unwrap();
        assert!((at0 - phi.integral()).abs() < 1e-10);
        for s in [0.3, 1.0] {
            let tc = centering_value(s, &phi, &p, &idx, &dom, CenteringMode::TruncationCorrected).unwrap();
            let ei = centering_value(s, &phi, &p, &idx, &dom, CenteringMode::ExactInfinite).unwrap();
            assert!(tc <= ei && tc > 0.0);
        }
        assert!(centering_value(1.5, &phi, &p, &idx, &dom, CenteringMode::ExactInfinite).is_err());
    }

    #[test]
    fn schedules() {
        let s = uniform_schedule(2.0, 0.25, &[0.5, 1.3, 2.0]).unwrap();
        assert_eq!(s, vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.3, 1.5, 1.75, 2.0]);
        let f = refine_schedule(&[0.5, 1.0]);
        assert_eq!(f, vec![0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn trapezoid_with_cuts() {
        let mut totals = vec![0.0; 3];
        // v(t) = t on [0, 2], cuts at 0.5, 1.0, 3.0
        accumulate_trapezoid(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], &[0.5, 1.0, 3.0], &mut totals);
        assert!((totals[0] - 0.125).abs() < 1e-15);
        assert!((totals[1] - 0.5).abs() < 1e-15);
        assert!((totals[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn empty_system_closed_form() {
        let idx = StableIndexVector::new(vec![2.0 / 3.0]).unwrap();
        let p = params(8.0);
        let phi: TestFunction = GaussianTestFunction::standard(1).into();
        let dom = SimulationDomain::new(vec![4.0]).unwrap();
        let system = SystemRealization::empty(dom, 8.0, uniform_schedule(8.0, 0.25, &[]).unwrap());
        let s = occupation_fluctuation(&system, &phi, 1.0, &p, &idx, CenteringMode::ExactInfinite).unwrap();
        let law = p.branching();
        let expect = -integrated_expected_population(8.0, law.gamma, law.delta).unwrap() * phi.integral()
            / scaling_fn(&p, &idx).unwrap();
        assert!((s.value - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_test_function_gives_zero() {
        let idx = StableIndexVector::new(vec![2.0 / 3.0]).unwrap();
        let p = params(8.0);
        let phi: TestFunction = GaussianTestFunction::standard(1).scaled(0.0).into();
        let dom = SimulationDomain::new(vec![6.0]).unwrap();
        let ctx = FluctuationContext::new(p, idx.clone(), dom.clone(), phi, &[0.5, 1.0], CenteringMode::TruncationCorrected).unwrap();
        let sched = uniform_schedule(8.0, 0.25, &ctx.cuts).unwrap();
        let system = simulate_system(&dom, &p.branching(), &idx, 8.0, sched, 9, 0).unwrap();
        assert!(system.particle_count() > 0);
        assert_eq!(ctx.evaluate(&system, None).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn uncovered_grid_is_rejected() {
        let idx = StableIndexVector::new(vec![2.0 / 3.0]).unwrap();
        let p = params(8.0);
        let phi: TestFunction = GaussianTestFunction::standard(1).into();
        let dom = SimulationDomain::new(vec![3.0]).unwrap();
        let system = SystemRealization::empty(dom, 4.0, uniform_schedule(4.0, 0.25, &[]).unwrap());
        assert!(occupation_fluctuation(&system, &phi, 1.0, &p, &idx, CenteringMode::ExactInfinite).is_err());
    }

    #[test]
    fn time_integration() {
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        assert_eq!(time_integrated_statistic(&grid, &[1.0; 5], &[0.0; 5]).unwrap(), 0.0);
        assert!((time_integrated_statistic(&grid, &[3.0; 5], &[1.0; 5]).unwrap() - 3.0).abs() < 1e-15);
        assert!(time_integrated_statistic(&grid, &[1.0; 4], &[1.0; 5]).is_err());
        // h = 2·1[0.5, 1], samples x(t) = t: exact integral 2·(1 - 0.25)/2 = 0.75
        let fine: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
        let h: Vec<f64> = fine.iter().map(|&t| if t >= 0.5 { 2.0 } else { 0.0 }).collect();
        let v = time_integrated_statistic(&fine, &fine, &h).unwrap();
        // The half-cell at the jump contributes O(Δ).
        assert!((v - 0.75).abs() < 2.0 / 400.0, "{v}");
    }
}
