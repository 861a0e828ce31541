//! Event-driven simulation of the degenerate branching particle system.
//!
//! Every particle lives an `Exp(γ)` lifetime. At death, a particle of age
//! `a` leaves two newborn children with probability `e^{-δa}/2` and none
//! otherwise. Children start at the parent's death position with age 0, and
//! ancestors of the initial field are newborn at time 0.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, domain as domain_err, Error, Result};
use crate::rng::derive_stream;
use crate::stable_motion::{open_unit, StableIndexVector, StableSampler};

pub const DEFAULT_POPULATION_CAP: usize = 10_000_000;

/// One experiment scale: `δ_n = θ n^{-κ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub theta: f64,
    pub kappa: f64,
    pub n: f64,
}

impl ModelParams {
    pub fn new(gamma: f64, theta: f64, kappa: f64, n: f64) -> Result<Self> {
        let p = Self {
            gamma,
            theta,
            kappa,
            n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(domain(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(domain(format!("theta must be > 0, got {}", self.theta)));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(domain(format!("kappa must lie in (0, 1), got {}", self.kappa)));
        }
        if !(self.n >= 1.0 && self.n.is_finite()) {
            return Err(domain(format!("n must be ≥ 1, got {}", self.n)));
        }
        if self.delta_n() >= self.gamma {
            return Err(domain(format!(
                "delta_n = {} must be below gamma = {}",
                self.delta_n(),
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn delta_n(&self) -> f64 {
        self.theta * self.n.powf(-self.kappa)
    }

    pub fn branching(&self) -> BranchingLaw {
        BranchingLaw {
            gamma: self.gamma,
            delta: self.delta_n(),
        }
    }
}

/// The branching mechanism of a single system: split rate and degeneration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingLaw {
    pub gamma: f64,
    pub delta: f64,
}

impl BranchingLaw {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(domain(format!("gamma must be > 0, got {gamma}")));
        }
        if !(delta >= 0.0 && delta < gamma) {
            return Err(domain(format!("delta must lie in [0, gamma), got {delta}")));
        }
        Ok(Self { gamma, delta })
    }

    pub fn offspring(&self) -> OffspringLaw {
        OffspringLaw { delta: self.delta }
    }
}

/// Age-dependent offspring law with generating function
/// `(1 - e^{-δa}/2) + e^{-δa} s²/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffspringLaw {
    pub delta: f64,
}

impl OffspringLaw {
    pub fn prob_two(&self, age: f64) -> f64 {
        0.5 * (-self.delta * age).exp()
    }

    pub fn mean(&self, age: f64) -> f64 {
        (-self.delta * age).exp()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, age: f64, rng: &mut R) -> u8 {
        if open_unit(rng) < self.prob_two(age) {
            2
        } else {
            0
        }
    }
}

pub fn sample_offspring_count<R: Rng + ?Sized>(age: f64, delta: f64, rng: &mut R) -> Result<u8> {
    if !(age >= 0.0 && age.is_finite()) {
        return Err(domain(format!("age must be ≥ 0, got {age}")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(domain(format!("delta must be ≥ 0, got {delta}")));
    }
    Ok(OffspringLaw { delta }.sample(age, rng))
}

/// One-ancestor mean population `f(s) = [1 + δ/(γ-δ)(1 - e^{-(γ-δ)s})] e^{-δs}`.
pub fn expected_population(s: f64, gamma: f64, delta: f64) -> Result<f64> {
    BranchingLaw::new(gamma, delta)?;
    if !(s >= 0.0) {
        return Err(domain(format!("time must be ≥ 0, got {s}")));
    }
    // Same function written as the two-exponential renewal solution.
    Ok((gamma * (-delta * s).exp() - delta * (-gamma * s).exp()) / (gamma - delta))
}

/// `∫_0^T f(s) ds` in closed form.
pub fn integrated_expected_population(horizon: f64, gamma: f64, delta: f64) -> Result<f64> {
    BranchingLaw::new(gamma, delta)?;
    if !(horizon >= 0.0) {
        return Err(domain(format!("horizon must be ≥ 0, got {horizon}")));
    }
    if delta == 0.0 {
        return Ok(horizon);
    }
    let slow = -(-delta * horizon).exp_m1() / delta;
    let fast = -(-gamma * horizon).exp_m1() / gamma;
    Ok((gamma * slow - delta * fast) / (gamma - delta))
}

/// The truncation box `Π [-L_k, L_k]` carrying the unit-intensity Poisson field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationDomain {
    pub half_widths: Vec<f64>,
    pub intensity: f64,
}

impl SimulationDomain {
    pub fn new(half_widths: Vec<f64>) -> Result<Self> {
        let d = Self {
            half_widths,
            intensity: 1.0,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_widths.is_empty() {
            return Err(domain("box needs at least one coordinate"));
        }
        if self.half_widths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(domain("box half-widths must be finite and > 0 (volume > 0)"));
        }
        if !(self.intensity > 0.0 && self.intensity.is_finite()) {
            return Err(domain("intensity must be > 0"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.half_widths.len()
    }

    pub fn volume(&self) -> f64 {
        self.half_widths.iter().map(|l| 2.0 * l).product()
    }
}

/// Where and when an ancestor starts.
#[derive(Clone, Debug, PartialEq)]
pub struct RootBirth {
    pub time: f64,
    pub position: Vec<f64>,
}

pub fn sample_initial_field<R: Rng + ?Sized>(domain: &SimulationDomain, rng: &mut R) -> Result<Vec<RootBirth>> {
    domain.validate()?;
    let mean = domain.volume() * domain.intensity;
    let count = Poisson::new(mean)
        .map_err(|e| crate::error::domain(format!("poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    Ok((0..count)
        .map(|_| RootBirth {
            time: 0.0,
            position: domain
                .half_widths
                .iter()
                .map(|&l| l * (2.0 * open_unit(rng) - 1.0))
                .collect(),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub id: usize,
    pub parent: Option<usize>,
    pub birth_time: f64,
    /// `None` while alive at the horizon.
    pub death_time: Option<f64>,
    /// `None` while alive at the horizon, otherwise 0 or 2.
    pub n_offspring: Option<u8>,
    pub children: Option<[usize; 2]>,
    /// Strictly increasing; the first entry is the birth time.
    pub path_times: Vec<f64>,
    /// Row-major positions, `dim` values per entry of `path_times`.
    pub path_positions: Vec<f64>,
}

impl Particle {
    pub fn dim(&self) -> usize {
        self.path_positions.len() / self.path_times.len()
    }

    pub fn birth_position(&self) -> &[f64] {
        &self.path_positions[..self.dim()]
    }

    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.path_positions[i * d..(i + 1) * d]
    }

    pub fn last_position(&self) -> &[f64] {
        self.position(self.path_times.len() - 1)
    }

    pub fn is_alive_at(&self, s: f64) -> bool {
        self.birth_time <= s && self.death_time.is_none_or(|d| s < d)
    }

    /// End of the particle's life inside the simulated window.
    pub fn end_time(&self, horizon: f64) -> f64 {
        self.death_time.unwrap_or(horizon)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeRealization {
    pub particles: Vec<Particle>,
    pub horizon: f64,
    pub indices: StableIndexVector,
    /// Reproducibility token of the stream that produced the tree, if known.
    pub seed: Option<u64>,
}

impl TreeRealization {
    pub fn alive_count(&self, s: f64) -> usize {
        self.particles.iter().filter(|p| p.is_alive_at(s)).count()
    }

    pub fn split_events(&self) -> usize {
        self.particles.iter().filter(|p| p.death_time.is_some()).count()
    }
}

/// Reusable simulation settings for many trees of one system.
#[derive(Clone, Debug)]
pub struct TreeSimulator {
    law: BranchingLaw,
    indices: StableIndexVector,
    samplers: Vec<StableSampler>,
    horizon: f64,
    schedule: Vec<f64>,
    population_cap: usize,
}

#[derive(PartialEq)]
struct DeathEvent(f64, usize);
impl Eq for DeathEvent {}
impl Ord for DeathEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}
impl PartialOrd for DeathEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl TreeSimulator {
    /// `schedule` lists extra times at which every living particle's
    /// position is recorded; it must be strictly increasing.
    pub fn new(law: BranchingLaw, indices: StableIndexVector, horizon: f64, schedule: Vec<f64>) -> Result<Self> {
        BranchingLaw::new(law.gamma, law.delta)?;
        if !(horizon.is_finite()) {
            return Err(domain("horizon must be finite"));
        }
        if schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("recording schedule must be strictly increasing"));
        }
        let samplers = indices.alphas().iter().map(|&a| StableSampler::new(a)).collect();
        Ok(Self {
            law,
            indices,
            samplers,
            horizon,
            schedule,
            population_cap: DEFAULT_POPULATION_CAP,
        })
    }

    pub fn with_population_cap(mut self, cap: usize) -> Self {
        self.population_cap = cap;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn schedule(&self) -> &[f64] {
        &self.schedule
    }

    fn new_particle(&self, id: usize, parent: Option<usize>, birth: f64, position: &[f64]) -> Particle {
        Particle {
            id,
            parent,
            birth_time: birth,
            death_time: None,
            n_offspring: None,
            children: None,
            path_times: vec![birth],
            path_positions: position.to_vec(),
        }
    }

    /// Extends the path through the scheduled times after birth: up to and
    /// including `end` when `end_point` is false, or strictly before `end`
    /// followed by `end` itself when it is true.
    fn walk<R: Rng + ?Sized>(&self, p: &mut Particle, end: f64, end_point: bool, rng: &mut R) {
        let d = self.samplers.len();
        let start = self.schedule.partition_point(|&s| s <= p.birth_time);
        let stop = if end_point {
            self.schedule.partition_point(|&s| s < end)
        } else {
            self.schedule.partition_point(|&s| s <= end)
        };
        let extra = stop.saturating_sub(start) + usize::from(end_point);
        p.path_times.reserve(extra);
        p.path_positions.reserve(extra * d);
        let mut last_t = p.birth_time;
        let step = |p: &mut Particle, t: f64, from: f64, rng: &mut R| {
            let dt = t - from;
            let base = p.path_positions.len() - d;
            for (k, sampler) in self.samplers.iter().enumerate() {
                let x = p.path_positions[base + k] + sampler.increment(dt, rng);
                p.path_positions.push(x);
            }
            p.path_times.push(t);
        };
        for &t in &self.schedule[start..stop.max(start)] {
            step(p, t, last_t, rng);
            last_t = t;
        }
        if end_point && end > last_t {
            step(p, end, last_t, rng);
        }
    }

    pub fn simulate<RB, RM>(&self, root: &RootBirth, branch_rng: &mut RB, motion_rng: &mut RM) -> Result<TreeRealization>
    where
        RB: Rng + ?Sized,
        RM: Rng + ?Sized,
    {
        if root.position.len() != self.samplers.len() {
            return Err(domain("root position dimension differs from the motion's"));
        }
        if !(self.horizon > root.time) {
            return Err(domain(format!(
                "horizon {} must exceed the root birth time {}",
                self.horizon, root.time
            )));
        }
        let lifetime = Exp::new(self.law.gamma).map_err(|e| domain(e.to_string()))?;
        let offspring = self.law.offspring();
        let mut particles = vec![self.new_particle(0, None, root.time, &root.position)];
        let mut pending = BinaryHeap::new();
        let mut open = 0usize;

        let schedule_death =
            |p: &mut Particle, pending: &mut BinaryHeap<Reverse<DeathEvent>>, open: &mut usize, rng: &mut RB| {
                let death = p.birth_time + lifetime.sample(rng);
                if death < self.horizon {
                    p.death_time = Some(death);
                    pending.push(Reverse(DeathEvent(death, p.id)));
                } else {
                    *open += 1;
                }
            };

        schedule_death(&mut particles[0], &mut pending, &mut open, branch_rng);
        if particles[0].death_time.is_none() {
            let mut p = particles.pop().expect("root");
            self.walk(&mut p, self.horizon, false, motion_rng);
            particles.push(p);
        }

        while let Some(Reverse(DeathEvent(death, id))) = pending.pop() {
            let mut p = std::mem::replace(&mut particles[id], self.new_particle(id, None, 0.0, &[]));
            self.walk(&mut p, death, true, motion_rng);
            let age = death - p.birth_time;
            let count = offspring.sample(age, branch_rng);
            p.n_offspring = Some(count);
            if count == 2 {
                let first = particles.len();
                p.children = Some([first, first + 1]);
                for child_id in [first, first + 1] {
                    let mut child = self.new_particle(child_id, Some(id), death, p.last_position());
                    schedule_death(&mut child, &mut pending, &mut open, branch_rng);
                    if child.death_time.is_none() {
                        self.walk(&mut child, self.horizon, false, motion_rng);
                    }
                    particles.push(child);
                }
                let live = pending.len() + open;
                if live > self.population_cap {
                    return Err(Error::PopulationExplosion {
                        live,
                        cap: self.population_cap,
                    });
                }
            }
            particles[id] = p;
        }

        Ok(TreeRealization {
            particles,
            horizon: self.horizon,
            indices: self.indices.clone(),
            seed: None,
        })
    }
}

/// Simulates one tree up to `horizon`, recording positions at split times.
pub fn simulate_tree<RB, RM>(
    root: &RootBirth,
    horizon: f64,
    law: BranchingLaw,
    indices: &StableIndexVector,
    branch_rng: &mut RB,
    motion_rng: &mut RM,
) -> Result<TreeRealization>
where
    RB: Rng + ?Sized,
    RM: Rng + ?Sized,
{
    TreeSimulator::new(law, indices.clone(), horizon, Vec::new())?.simulate(root, branch_rng, motion_rng)
}

/// One replicate of the truncated system: every ancestor's tree, recorded
/// on a common schedule.
#[derive(Clone, Debug)]
pub struct SystemRealization {
    pub trees: Vec<TreeRealization>,
    pub domain: SimulationDomain,
    pub horizon: f64,
    pub schedule: Vec<f64>,
    pub replicate_id: u64,
    pub seed: u64,
}

impl SystemRealization {
    /// A replicate whose initial field happened to be empty.
    pub fn empty(domain: SimulationDomain, horizon: f64, schedule: Vec<f64>) -> Self {
        Self {
            trees: Vec::new(),
            domain,
            horizon,
            schedule,
            replicate_id: 0,
            seed: 0,
        }
    }

    pub fn particle_count(&self) -> usize {
        self.trees.iter().map(|t| t.particles.len()).sum()
    }
}

/// Simulates the Poisson-initialised truncated system for one replicate.
/// Streams are keyed by `(master_seed, replicate_id)` with the tags
/// `field`, `branching` and `motion`, so changing `schedule` leaves the
/// initial field and the genealogy untouched.
pub fn simulate_system(
    domain: &SimulationDomain,
    law: &BranchingLaw,
    indices: &StableIndexVector,
    horizon: f64,
    schedule: Vec<f64>,
    master_seed: u64,
    replicate_id: u64,
) -> Result<SystemRealization> {
    simulate_system_capped(domain, law, indices, horizon, schedule, master_seed, replicate_id, DEFAULT_POPULATION_CAP)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_system_capped(
    domain: &SimulationDomain,
    law: &BranchingLaw,
    indices: &StableIndexVector,
    horizon: f64,
    schedule: Vec<f64>,
    master_seed: u64,
    replicate_id: u64,
    population_cap: usize,
) -> Result<SystemRealization> {
    if domain.dim() != indices.dim() {
        return Err(domain_err("box and motion dimensions differ"));
    }
    let mut field_rng = derive_stream(master_seed, replicate_id, "field");
    let mut branch_rng = derive_stream(master_seed, replicate_id, "branching");
    let mut motion_rng = derive_stream(master_seed, replicate_id, "motion");
    let roots = sample_initial_field(domain, &mut field_rng)?;
    let sim = TreeSimulator::new(*law, indices.clone(), horizon, schedule)?.with_population_cap(population_cap);
    let trees = roots
        .iter()
        .map(|root| sim.simulate(root, &mut branch_rng, &mut motion_rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(SystemRealization {
        trees,
        domain: domain.clone(),
        horizon,
        schedule: sim.schedule,
        replicate_id,
        seed: master_seed,
    })
}

/// Positions of the particles alive at `s`.
///
/// Recorded times are returned as stored. A particle whose path ends before
/// `s` (it is alive past its last record) is extended by one exact
/// increment and the new point is kept, so later calls see the same value.
/// Times strictly inside an already recorded stretch would need a stable
/// bridge and are rejected.
pub fn positions_at<R: Rng + ?Sized>(
    tree: &mut TreeRealization,
    s: f64,
    rng: &mut R,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let root_birth = tree.particles.first().map_or(0.0, |p| p.birth_time);
    if !(s >= root_birth.min(0.0) && s <= tree.horizon) {
        return Err(domain(format!("query time {s} outside [0, {}]", tree.horizon)));
    }
    let samplers: Vec<StableSampler> = tree.indices.alphas().iter().map(|&a| StableSampler::new(a)).collect();
    let mut out = Vec::new();
    for p in tree.particles.iter_mut().filter(|p| p.is_alive_at(s)) {
        let i = p.path_times.partition_point(|&t| t < s);
        if i < p.path_times.len() && p.path_times[i] == s {
            out.push((p.id, p.position(i).to_vec()));
            continue;
        }
        if i < p.path_times.len() {
            return Err(Error::PathRefinement(format!(
                "particle {} already has a recorded position after {s}",
                p.id
            )));
        }
        let dt = s - p.path_times[i - 1];
        let base: Vec<f64> = p.last_position().to_vec();
        let pos: Vec<f64> = base
            .iter()
            .zip(&samplers)
            .map(|(x, smp)| x + smp.increment(dt, rng))
            .collect();
        p.path_times.push(s);
        p.path_positions.extend_from_slice(&pos);
        out.push((p.id, pos));
    }
    Ok(out)
}
