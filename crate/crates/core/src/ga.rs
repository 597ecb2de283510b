//! Genetic-algorithm synthesis of multi-beam RIS phase profiles.
//!
//! The fitness of a profile is its worst PDAF over the target departure
//! angles, so maximizing it spreads the array gain evenly across all
//! requested beams. Each generation draws parents in proportion to fitness,
//! blends pairs with a random convex weight, and jitters every phase with
//! Gaussian noise whose scale decays linearly over the run.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::radio::{ArrayGeometry, PhaseProfile};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    /// 2J, even and at least 4.
    pub population_size: usize,
    pub generations: usize,
    /// Mutation standard deviation at the first generation, radians.
    pub mutation_scale: f64,
    /// Mutation standard deviation reached at the last generation.
    pub mutation_floor: f64,
    /// Stop after this many generations without improvement.
    pub patience: Option<usize>,
    /// Seed the population with the co-phased profile for the first target
    /// and, for several targets, half of it with phase-only sums of the
    /// per-target profiles under random relative rotations.
    pub warm_start: bool,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            generations: 100,
            mutation_scale: 0.1,
            mutation_floor: 0.01,
            patience: None,
            warm_start: true,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 || self.population_size % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "population size must be even and at least 4, got {}",
                self.population_size
            )));
        }
        if self.generations == 0 {
            return Err(Error::InvalidInput("GA needs at least one generation".into()));
        }
        if !(self.mutation_scale > 0.0 && self.mutation_floor > 0.0) {
            return Err(Error::InvalidInput("mutation scales must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn sigma_at(&self, generation: usize) -> f64 {
        if self.generations <= 1 {
            return self.mutation_scale;
        }
        let t = generation as f64 / (self.generations - 1) as f64;
        self.mutation_scale + (self.mutation_floor - self.mutation_scale) * t
    }
}

/// Minimum angular gap between two targets of the same RIS.
pub const DEFAULT_MIN_TARGET_SEPARATION: f64 = 1e-3;

/// One RIS beam-design problem: fixed arrival angle, several departure angles.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamTask {
    pub geometry: ArrayGeometry,
    pub aoa: f64,
    pub targets: Vec<f64>,
}

impl BeamTask {
    pub fn new(geometry: ArrayGeometry, aoa: f64, targets: Vec<f64>) -> Result<Self> {
        Self::with_separation(geometry, aoa, targets, DEFAULT_MIN_TARGET_SEPARATION)
    }

    pub fn with_separation(geometry: ArrayGeometry, aoa: f64, targets: Vec<f64>, min_separation: f64) -> Result<Self> {
        geometry.validate()?;
        if targets.is_empty() {
            return Err(Error::InvalidInput("beam task needs at least one target".into()));
        }
        for (i, a) in targets.iter().enumerate() {
            if targets[..i].iter().any(|b| (a - b).abs() < min_separation) {
                return Err(Error::InvalidInput(format!("target {a} rad is within {min_separation} rad of another")));
            }
        }
        Ok(Self { geometry, aoa, targets })
    }

    /// Number of simultaneous beams U_m.
    pub fn beams(&self) -> usize {
        self.targets.len()
    }
}

/// Precomputed per-target phase slopes so fitness is one pass per target.
struct FitnessKernel {
    slopes: Vec<f64>,
}

impl FitnessKernel {
    fn new(task: &BeamTask) -> Self {
        let k = task.geometry.wavenumber_spacing();
        let s = task.aoa.sin();
        Self { slopes: task.targets.iter().map(|t| k * (s + t.sin())).collect() }
    }

    fn eval(&self, phases: &[f64]) -> f64 {
        self.slopes
            .iter()
            .map(|&slope| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &phi) in phases.iter().enumerate() {
                    let (s, c) = (phi - slope * n as f64).sin_cos();
                    re += c;
                    im += s;
                }
                re * re + im * im
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Worst-case PDAF over the task's targets.
pub fn fitness(profile: &PhaseProfile, task: &BeamTask) -> Result<f64> {
    if task.targets.is_empty() {
        return Err(Error::InvalidInput("beam task needs at least one target".into()));
    }
    if profile.len() != task.geometry.elements {
        return Err(Error::LengthMismatch { expected: task.geometry.elements, got: profile.len() });
    }
    Ok(FitnessKernel::new(task).eval(profile.phases()))
}

/// Draws `count` parent indices with probability proportional to fitness.
/// Falls back to uniform draws when every fitness is zero.
pub fn select_parents<R: Rng + ?Sized>(fitnesses: &[f64], count: usize, rng: &mut R) -> Result<Vec<usize>> {
    if fitnesses.is_empty() {
        return Err(Error::InvalidInput("cannot select from an empty population".into()));
    }
    if fitnesses.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
        return Err(Error::InvalidInput("fitness values must be finite and non-negative".into()));
    }
    match WeightedIndex::new(fitnesses) {
        Ok(dist) => Ok((0..count).map(|_| dist.sample(rng)).collect()),
        Err(_) => {
            log::warn!("all fitness values are zero; selecting parents uniformly");
            Ok((0..count).map(|_| rng.random_range(0..fitnesses.len())).collect())
        }
    }
}

/// Convex blend `w·a + (1−w)·b`, `(1−w)·a + w·b`, wrapped into [0, 2π).
pub fn blend(a: &PhaseProfile, b: &PhaseProfile, weight: f64) -> (PhaseProfile, PhaseProfile) {
    let mix = |wa: f64| {
        PhaseProfile::new(a.phases().iter().zip(b.phases()).map(|(x, y)| wa * x + (1.0 - wa) * y))
    };
    (mix(weight), mix(1.0 - weight))
}

/// Weighted-sum crossover with one uniform weight per pair.
pub fn crossover<R: Rng + ?Sized>(a: &PhaseProfile, b: &PhaseProfile, rng: &mut R) -> Result<(PhaseProfile, PhaseProfile)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), got: b.len() });
    }
    Ok(blend(a, b, rng.random::<f64>()))
}

/// Adds N(0, σ²) to every phase and wraps the result.
pub fn mutate<R: Rng + ?Sized>(profile: &PhaseProfile, sigma: f64, rng: &mut R) -> Result<PhaseProfile> {
    let noise = Normal::new(0.0, sigma)
        .map_err(|_| Error::InvalidInput(format!("mutation scale must be positive, got {sigma}")))?;
    Ok(PhaseProfile::new(profile.phases().iter().map(|p| p + noise.sample(rng))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub best_profile: PhaseProfile,
    pub best_fitness: f64,
    /// Best-ever fitness after each generation.
    pub fitness_history: Vec<f64>,
}

/// Runs the GA. Deterministic for a fixed `config.seed`.
///
/// The initial population is uniform random, except for the seeded
/// individuals when `warm_start` is set. The best individual seen so far replaces
/// one random offspring in every new generation.
pub fn run_ga(task: &BeamTask, config: &GaConfig) -> Result<GaOutcome> {
    config.validate()?;
    if task.targets.is_empty() {
        return Err(Error::InvalidInput("beam task needs at least one target".into()));
    }
    let n = task.geometry.elements;
    let size = config.population_size;
    let kernel = FitnessKernel::new(task);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut population: Vec<PhaseProfile> = (0..size)
        .map(|_| PhaseProfile::new((0..n).map(|_| rng.random_range(0.0..TAU))))
        .collect();
    if config.warm_start {
        population[0] = PhaseProfile::aligned(&task.geometry, task.aoa, task.targets[0]);
        if task.targets.len() > 1 {
            for (i, slot) in population.iter_mut().enumerate().take(size / 2).skip(1) {
                let offsets: Vec<f64> =
                    (0..task.targets.len()).map(|k| if i == 1 || k == 0 { 0.0 } else { rng.random_range(0.0..TAU) }).collect();
                *slot = superposition(task, &offsets);
            }
        }
    }

    let mut scores: Vec<f64> = population.iter().map(|p| kernel.eval(p.phases())).collect();
    let (mut best_fitness, mut best_profile) = best_of(&population, &scores);
    let mut history = Vec::with_capacity(config.generations);
    let mut stale = 0;

    for generation in 0..config.generations {
        let parents = select_parents(&scores, size, &mut rng)?;
        let sigma = config.sigma_at(generation);
        let mut next = Vec::with_capacity(size);
        for pair in parents.chunks_exact(2) {
            let (a, b) = crossover(&population[pair[0]], &population[pair[1]], &mut rng)?;
            next.push(mutate(&a, sigma, &mut rng)?);
            next.push(mutate(&b, sigma, &mut rng)?);
        }
        let elite_slot = rng.random_range(0..size);
        next[elite_slot] = best_profile.clone();

        population = next;
        scores = population.iter().map(|p| kernel.eval(p.phases())).collect();
        let (gen_best, gen_profile) = best_of(&population, &scores);
        if gen_best > best_fitness {
            best_fitness = gen_best;
            best_profile = gen_profile;
            stale = 0;
        } else {
            stale += 1;
        }
        history.push(best_fitness);
        if config.patience.is_some_and(|p| stale >= p) {
            break;
        }
    }

    Ok(GaOutcome { best_profile, best_fitness, fitness_history: history })
}

/// Phase of the sum of the co-phased profiles of every target, each
/// rotated by its offset.
fn superposition(task: &BeamTask, offsets: &[f64]) -> PhaseProfile {
    let k = task.geometry.wavenumber_spacing();
    let s = task.aoa.sin();
    PhaseProfile::new((0..task.geometry.elements).map(|n| {
        let (re, im) = task.targets.iter().zip(offsets).fold((0.0, 0.0), |(re, im), (t, psi)| {
            let (sin, cos) = (k * (s + t.sin()) * n as f64 + psi).sin_cos();
            (re + cos, im + sin)
        });
        im.atan2(re)
    }))
}

/// Highest score, lowest index on ties.
fn best_of(population: &[PhaseProfile], scores: &[f64]) -> (f64, PhaseProfile) {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    (scores[best], population[best].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::pdaf;
    use std::f64::consts::PI;

    fn half_wave(n: usize) -> ArrayGeometry {
        ArrayGeometry::new(n, 0.05, 0.1).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn fitness_of_aligned_single_target_is_n_squared() {
        let task = BeamTask::new(half_wave(10), 0.2, vec![0.7]).unwrap();
        let p = PhaseProfile::aligned(&task.geometry, 0.2, 0.7);
        assert!((fitness(&p, &task).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn fitness_takes_the_worst_target() {
        let g = half_wave(10);
        let task = BeamTask::new(g, 0.2, vec![0.7, -0.4]).unwrap();
        let p = PhaseProfile::aligned(&g, 0.2, 0.7);
        let second = pdaf(&g, &p, 0.2, -0.4).unwrap();
        assert!(second < 100.0);
        assert!((fitness(&p, &task).unwrap() - second).abs() < 1e-9);
    }

    #[test]
    fn fitness_matches_direct_pdaf_on_random_profile() {
        let g = half_wave(10);
        let mut r = rng();
        let p = PhaseProfile::new((0..10).map(|_| r.random_range(0.0..TAU)));
        let targets = vec![-1.0, 0.1, 0.9];
        let task = BeamTask::new(g, -0.3, targets.clone()).unwrap();
        let oracle = targets.iter().map(|&t| pdaf(&g, &p, -0.3, t).unwrap()).fold(f64::INFINITY, f64::min);
        assert!((fitness(&p, &task).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn fitness_rejects_wrong_length() {
        let task = BeamTask::new(half_wave(10), 0.0, vec![0.5]).unwrap();
        assert!(matches!(fitness(&PhaseProfile::zeros(9), &task), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn beam_task_validation() {
        assert!(BeamTask::new(half_wave(4), 0.0, vec![]).is_err());
        assert!(BeamTask::new(half_wave(4), 0.0, vec![0.5, 0.5005]).is_err());
        assert!(BeamTask::new(half_wave(4), 0.0, vec![0.5, 0.502]).is_ok());
    }

    #[test]
    fn degenerate_selection_mass() {
        let picks = select_parents(&[1.0, 0.0, 0.0, 0.0], 500, &mut rng()).unwrap();
        assert!(picks.iter().all(|&i| i == 0));
    }

    #[test]
    fn selection_frequencies() {
        let picks = select_parents(&[1.0, 1.0], 10_000, &mut rng()).unwrap();
        let freq = picks.iter().filter(|&&i| i == 0).count() as f64 / 1e4;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
        let picks = select_parents(&[3.0, 1.0], 10_000, &mut rng()).unwrap();
        let freq = picks.iter().filter(|&&i| i == 0).count() as f64 / 1e4;
        assert!((freq - 0.75).abs() < 0.02, "{freq}");
    }

    #[test]
    fn all_zero_fitness_selects_uniformly() {
        let picks = select_parents(&[0.0; 4], 8000, &mut rng()).unwrap();
        for k in 0..4 {
            let freq = picks.iter().filter(|&&i| i == k).count() as f64 / 8000.0;
            assert!((freq - 0.25).abs() < 0.03);
        }
    }

    #[test]
    fn blend_identities() {
        let a = PhaseProfile::new([0.1, 1.0, 4.0]);
        let b = PhaseProfile::new([2.0, 3.0, 0.5]);
        let (x, y) = blend(&a, &b, 1.0);
        assert_eq!((x, y), (a.clone(), b.clone()));
        let (x, y) = blend(&a, &a, 0.37);
        for (p, q) in x.phases().iter().chain(y.phases()).zip(a.phases().iter().cycle()) {
            assert!((p - q).abs() < 1e-12);
        }
        let (x, y) = blend(&PhaseProfile::zeros(3), &PhaseProfile::new([PI; 3]), 0.5);
        for p in x.phases().iter().chain(y.phases()) {
            assert!((p - PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn crossover_rejects_mismatched_parents() {
        assert!(crossover(&PhaseProfile::zeros(3), &PhaseProfile::zeros(4), &mut rng()).is_err());
    }

    #[test]
    fn tiny_mutation_is_nearly_identity() {
        let p = PhaseProfile::new([0.5, 1.5, 2.5]);
        let q = mutate(&p, 1e-12, &mut rng()).unwrap();
        for (a, b) in p.phases().iter().zip(q.phases()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn mutation_spread_matches_sigma() {
        let p = PhaseProfile::new([PI; 10_000]);
        let q = mutate(&p, 0.1, &mut rng()).unwrap();
        assert!(q.phases().iter().all(|&x| (0.0..TAU).contains(&x)));
        let d: Vec<f64> = q.phases().iter().map(|x| x - PI).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
        assert!((std - 0.1).abs() < 0.005, "{std}");
    }

    #[test]
    fn config_validation() {
        let bad = GaConfig { population_size: 5, ..GaConfig::default() };
        assert!(bad.validate().is_err());
        let bad = GaConfig { population_size: 2, ..GaConfig::default() };
        assert!(bad.validate().is_err());
        let bad = GaConfig { generations: 0, ..GaConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_beam_reaches_near_optimum() {
        let task = BeamTask::new(half_wave(10), 0.35, vec![-0.6]).unwrap();
        let out = run_ga(&task, &GaConfig::default().with_seed(3)).unwrap();
        assert!(out.best_fitness >= 90.0 && out.best_fitness <= 100.0 + 1e-9);
        assert_eq!(out.fitness_history.len(), 100);
    }

    #[test]
    fn cold_start_improves_on_random_population() {
        let task = BeamTask::new(half_wave(10), 0.35, vec![-0.6]).unwrap();
        let cold = GaConfig { warm_start: false, ..GaConfig::default().with_seed(3) };
        let out = run_ga(&task, &cold).unwrap();
        let short = run_ga(&task, &GaConfig { generations: 1, ..cold }).unwrap();
        assert!(out.best_fitness > short.best_fitness);
        assert!(out.best_fitness > 50.0);
    }

    #[test]
    fn single_element_fitness_is_one() {
        let task = BeamTask::new(half_wave(1), 0.3, vec![1.0]).unwrap();
        let out = run_ga(&task, &GaConfig::default()).unwrap();
        assert!((out.best_fitness - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_beams_beat_zero_profile() {
        let g = half_wave(10);
        let task = BeamTask::new(g, 0.0, vec![-0.5, 0.6]).unwrap();
        let floor = fitness(&PhaseProfile::zeros(10), &task).unwrap();
        let out = run_ga(&task, &GaConfig::default().with_seed(5)).unwrap();
        assert!(out.best_fitness >= floor);
        assert!(out.best_fitness <= 100.0);
        assert!((fitness(&out.best_profile, &task).unwrap() - out.best_fitness).abs() < 1e-9);
    }

    #[test]
    fn history_is_monotone_and_run_is_deterministic() {
        let task = BeamTask::new(half_wave(12), 0.1, vec![-0.9, 0.2, 1.1]).unwrap();
        let cfg = GaConfig { generations: 60, ..GaConfig::default().with_seed(9) };
        let a = run_ga(&task, &cfg).unwrap();
        let b = run_ga(&task, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.fitness_history.windows(2).all(|w| w[1] >= w[0]));
        assert!(a.best_profile.phases().iter().all(|&x| (0.0..TAU).contains(&x)));
    }

    #[test]
    fn patience_stops_early() {
        let task = BeamTask::new(half_wave(1), 0.0, vec![0.5]).unwrap();
        let cfg = GaConfig { patience: Some(20), ..GaConfig::default() };
        let out = run_ga(&task, &cfg).unwrap();
        assert_eq!(out.fitness_history.len(), 20);
    }
}
