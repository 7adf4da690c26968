//! Harris Hawks Optimization over the unit box `[0, 1]^D`.
//!
//! Each iteration the best position seen so far (the prey) is fixed, every
//! hawk draws an initial escape energy `E0 ∈ [-1, 1)` and moves:
//!
//! * `|E| ≥ 1`: exploration, perching next to a random hawk or relative to
//!   the swarm mean;
//! * `|E| < 1`: one of four besiege strategies, chosen by `|E|` and a random
//!   escape chance. The two "rapid dive" variants try a direct dive `Y` and a
//!   Lévy-perturbed dive `Z` and keep whichever improves on the hawk.
//!
//! Hawk moves within an iteration read only the iteration-start snapshot and
//! draw from their own stream seeded by `(seed, iteration, hawk)`, so they can
//! run in parallel and still reproduce the sequential schedule exactly.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_NEURON_BITS: usize = 10;

/// Binary encoding of a candidate: `n_features` selection bits followed by
/// `neuron_bits` bits encoding the hidden layer size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionLayout {
    pub n_features: usize,
    pub neuron_bits: usize,
}

impl SolutionLayout {
    pub fn new(n_features: usize, neuron_bits: usize) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidArgument("layout needs at least one feature".into()));
        }
        if !(1..=DEFAULT_NEURON_BITS).contains(&neuron_bits) {
            return Err(Error::InvalidArgument(format!(
                "neuron bits must be in [1, {DEFAULT_NEURON_BITS}], got {neuron_bits}"
            )));
        }
        Ok(SolutionLayout {
            n_features,
            neuron_bits,
        })
    }

    /// Layout whose neuron bits encode exactly `[1, max_neurons]`.
    pub fn with_max_neurons(n_features: usize, max_neurons: usize) -> Result<Self> {
        if !max_neurons.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "max neurons must be a power of two, got {max_neurons}"
            )));
        }
        Self::new(n_features, max_neurons.trailing_zeros() as usize)
    }

    pub fn dim(&self) -> usize {
        self.n_features + self.neuron_bits
    }

    pub fn max_neurons(&self) -> usize {
        1 << self.neuron_bits
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hawk {
    pub position: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HhoParams {
    pub population_size: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub levy_beta: f64,
}

impl Default for HhoParams {
    fn default() -> Self {
        HhoParams {
            population_size: 200,
            max_iterations: 100,
            seed: 0,
            levy_beta: 1.5,
        }
    }
}

impl HhoParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidArgument("population_size must be at least 2".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.levy_beta > 1.0 && self.levy_beta <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "levy_beta must lie in (1, 2], got {}",
                self.levy_beta
            )));
        }
        Ok(())
    }

    /// Upper bound on objective calls: the initial population plus at most
    /// three calls per hawk per iteration.
    pub fn evaluation_budget(&self) -> usize {
        self.population_size * (1 + 3 * self.max_iterations)
    }
}

/// Feature subset and hidden layer size encoded by a position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodedSolution {
    pub feature_mask: Vec<bool>,
    pub n_hidden: usize,
}

impl DecodedSolution {
    pub fn n_selected(&self) -> usize {
        self.feature_mask.iter().filter(|&&b| b).count()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.feature_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// `0101…:n_hidden`
    pub fn key(&self) -> String {
        let mut s: String = self.feature_mask.iter().map(|&b| if b { '1' } else { '0' }).collect();
        let _ = write!(s, ":{}", self.n_hidden);
        s
    }
}

/// Thresholds a position at 0.5. An empty feature mask is repaired by
/// selecting the feature with the largest coordinate (lowest index on ties).
/// The neuron bits are read most-significant first and offset by one.
pub fn decode(position: &[f64], layout: &SolutionLayout) -> DecodedSolution {
    assert_eq!(position.len(), layout.dim(), "position length does not match layout");
    let (features, neurons) = position.split_at(layout.n_features);
    let mut feature_mask: Vec<bool> = features.iter().map(|&x| x >= 0.5).collect();
    if !feature_mask.contains(&true) {
        let mut best = 0;
        for (i, &x) in features.iter().enumerate() {
            if x > features[best] {
                best = i;
            }
        }
        feature_mask[best] = true;
    }
    let n_hidden = 1 + neurons
        .iter()
        .fold(0usize, |acc, &x| (acc << 1) | usize::from(x >= 0.5));
    DecodedSolution {
        feature_mask,
        n_hidden,
    }
}

/// Best fitness after each iteration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub best_fitness_per_iteration: Vec<f64>,
}

impl ConvergenceCurve {
    pub fn len(&self) -> usize {
        self.best_fitness_per_iteration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best_fitness_per_iteration.is_empty()
    }

    pub fn is_non_increasing(&self) -> bool {
        self.best_fitness_per_iteration.windows(2).all(|w| w[1] <= w[0])
    }

    /// `iteration,best_fitness` rows, iterations counted from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,best_fitness\n");
        for (i, f) in self.best_fitness_per_iteration.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, f);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Element-wise mean of equally long curves.
    pub fn mean(curves: &[&ConvergenceCurve]) -> ConvergenceCurve {
        let Some(first) = curves.first() else {
            return ConvergenceCurve::default();
        };
        let n = curves.len() as f64;
        let best_fitness_per_iteration = (0..first.len())
            .map(|i| curves.iter().map(|c| c.best_fitness_per_iteration[i]).sum::<f64>() / n)
            .collect();
        ConvergenceCurve {
            best_fitness_per_iteration,
        }
    }
}

/// Function minimized by the optimizer.
pub trait Objective: Sync {
    fn evaluate(&self, position: &[f64]) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, position: &[f64]) -> Result<f64> {
        Ok(self(position))
    }
}

/// `E = 2 E0 (1 - t/T)`
pub fn escape_energy(t: usize, max_iterations: usize, e0: f64) -> f64 {
    2.0 * e0 * (1.0 - t as f64 / max_iterations as f64)
}

/// Mantegna's scale for Lévy-stable steps with index `beta`.
pub fn levy_sigma(beta: f64) -> f64 {
    let num = libm::tgamma(1.0 + beta) * (std::f64::consts::PI * beta / 2.0).sin();
    let den = libm::tgamma((1.0 + beta) / 2.0) * beta * 2f64.powf((beta - 1.0) / 2.0);
    (num / den).powf(1.0 / beta)
}

/// `0.01 · u σ / |v|^(1/β)` per coordinate, `u, v ~ N(0, 1)`.
pub fn levy<R: Rng + ?Sized>(dim: usize, beta: f64, rng: &mut R) -> Vec<f64> {
    let sigma = levy_sigma(beta);
    (0..dim)
        .map(|_| {
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            0.01 * u * sigma / v.abs().powf(1.0 / beta)
        })
        .collect()
}

fn clamp_unit(mut x: Vec<f64>) -> Vec<f64> {
    for v in &mut x {
        *v = v.clamp(0.0, 1.0);
    }
    x
}

/// Random numbers consumed by one exploration move, drawn in field order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationDraws {
    pub q: f64,
    pub partner: usize,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
}

impl ExplorationDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, population_size: usize) -> Self {
        ExplorationDraws {
            q: rng.random(),
            partner: rng.random_range(0..population_size),
            r1: rng.random(),
            r2: rng.random(),
            r3: rng.random(),
            r4: rng.random(),
        }
    }
}

/// Perch either relative to a random member (`q ≥ 0.5`) or relative to the
/// prey and the swarm mean (`q < 0.5`). The box is `[0, 1]`, so the random
/// offset `LB + r4 (UB − LB)` reduces to `r4`.
pub fn exploration_move(
    position: &[f64],
    partner: &[f64],
    prey: &[f64],
    mean: &[f64],
    d: &ExplorationDraws,
) -> Vec<f64> {
    let out = if d.q >= 0.5 {
        partner
            .iter()
            .zip(position)
            .map(|(&xr, &x)| xr - d.r1 * (xr - 2.0 * d.r2 * x).abs())
            .collect()
    } else {
        prey.iter()
            .zip(mean)
            .map(|(&p, &m)| (p - m) - d.r3 * d.r4)
            .collect()
    };
    clamp_unit(out)
}

/// Random numbers consumed by one exploitation move. The dive vectors are
/// drawn only when `escape < 0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploitationDraws {
    pub escape: f64,
    pub jump_draw: f64,
    pub dive_scale: Vec<f64>,
    pub dive_levy: Vec<f64>,
}

impl ExploitationDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, dim: usize, levy_beta: f64) -> Self {
        let escape: f64 = rng.random();
        let jump_draw: f64 = rng.random();
        let (dive_scale, dive_levy) = if escape < 0.5 {
            let s = (0..dim).map(|_| rng.random()).collect();
            (s, levy(dim, levy_beta, rng))
        } else {
            (Vec::new(), Vec::new())
        };
        ExploitationDraws {
            escape,
            jump_draw,
            dive_scale,
            dive_levy,
        }
    }

    /// Jump strength `J = 2 (1 − r5)`.
    pub fn jump(&self) -> f64 {
        2.0 * (1.0 - self.jump_draw)
    }
}

/// Which besiege strategy an exploitation move used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Besiege {
    Soft,
    Hard,
    SoftDive,
    HardDive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveOutcome {
    pub position: Vec<f64>,
    /// Known when the move already evaluated the accepted position.
    pub fitness: Option<f64>,
    pub evaluations: usize,
    pub strategy: Besiege,
}

pub fn besiege_strategy(energy: f64, escape: f64) -> Besiege {
    match (escape >= 0.5, energy.abs() >= 0.5) {
        (true, true) => Besiege::Soft,
        (true, false) => Besiege::Hard,
        (false, true) => Besiege::SoftDive,
        (false, false) => Besiege::HardDive,
    }
}

pub fn exploitation_move<O: Objective + ?Sized>(
    hawk: &Hawk,
    prey: &[f64],
    mean: &[f64],
    energy: f64,
    d: &ExploitationDraws,
    objective: &O,
) -> Result<MoveOutcome> {
    let x = &hawk.position;
    let e = energy;
    let j = d.jump();
    let strategy = besiege_strategy(energy, d.escape);
    let direct = |anchor: &[f64]| -> Vec<f64> {
        clamp_unit(
            prey.iter()
                .zip(anchor)
                .map(|(&p, &a)| p - e * (j * p - a).abs())
                .collect(),
        )
    };
    let simple = |position: Vec<f64>| MoveOutcome {
        position: clamp_unit(position),
        fitness: None,
        evaluations: 0,
        strategy,
    };
    match strategy {
        Besiege::Soft => Ok(simple(
            prey.iter()
                .zip(x)
                .map(|(&p, &xi)| (p - xi) - e * (j * p - xi).abs())
                .collect(),
        )),
        Besiege::Hard => Ok(simple(
            prey.iter().zip(x).map(|(&p, &xi)| p - e * (p - xi).abs()).collect(),
        )),
        Besiege::SoftDive | Besiege::HardDive => {
            let y = if strategy == Besiege::SoftDive {
                direct(x)
            } else {
                direct(mean)
            };
            let fy = objective.evaluate(&y)?;
            if fy < hawk.fitness {
                return Ok(MoveOutcome {
                    position: y,
                    fitness: Some(fy),
                    evaluations: 1,
                    strategy,
                });
            }
            let z = clamp_unit(
                y.iter()
                    .zip(&d.dive_scale)
                    .zip(&d.dive_levy)
                    .map(|((&yi, &s), &l)| yi + s * l)
                    .collect(),
            );
            let fz = objective.evaluate(&z)?;
            let (position, fitness) = if fz < hawk.fitness {
                (z, fz)
            } else {
                (x.clone(), hawk.fitness)
            };
            Ok(MoveOutcome {
                position,
                fitness: Some(fitness),
                evaluations: 2,
                strategy,
            })
        }
    }
}

/// Uniform `[0, 1)` positions, evaluated once each.
pub fn initialize<O: Objective + ?Sized>(params: &HhoParams, dim: usize, objective: &O) -> Result<Vec<Hawk>> {
    params.validate()?;
    let mut rng = seed::derived_rng(params.seed, &[seed::TAG_INIT]);
    let positions: Vec<Vec<f64>> = (0..params.population_size)
        .map(|_| (0..dim).map(|_| rng.random()).collect())
        .collect();
    positions
        .into_par_iter()
        .map(|position| {
            let fitness = objective.evaluate(&position)?;
            Ok(Hawk { position, fitness })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Optimization {
    pub best: Hawk,
    pub curve: ConvergenceCurve,
    pub evaluations: usize,
    pub population: Vec<Hawk>,
}

fn population_mean(population: &[Hawk], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for h in population {
        for (m, &x) in mean.iter_mut().zip(&h.position) {
            *m += x;
        }
    }
    let n = population.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

fn first_best(population: &[Hawk]) -> &Hawk {
    population
        .iter()
        .reduce(|best, h| if h.fitness < best.fitness { h } else { best })
        .expect("non-empty population")
}

/// Minimizes `objective` over `[0, 1]^dim`.
pub fn optimize<O: Objective + ?Sized>(params: &HhoParams, dim: usize, objective: &O) -> Result<Optimization> {
    let mut population = initialize(params, dim, objective)?;
    let mut evaluations = population.len();
    let mut best = first_best(&population).clone();
    let mut curve = Vec::with_capacity(params.max_iterations);
    let t_max = params.max_iterations;

    for t in 0..t_max {
        let prey = best.position.clone();
        let mean = population_mean(&population, dim);
        let snapshot = &population;
        let moved: Vec<(Hawk, usize)> = (0..snapshot.len())
            .into_par_iter()
            .map(|i| {
                let mut rng = seed::derived_rng(params.seed, &[seed::TAG_HHO, t as u64, i as u64]);
                let hawk = &snapshot[i];
                let e0 = 2.0 * rng.random::<f64>() - 1.0;
                let energy = escape_energy(t, t_max, e0);
                let outcome = if energy.abs() >= 1.0 {
                    let d = ExplorationDraws::sample(&mut rng, snapshot.len());
                    let position =
                        exploration_move(&hawk.position, &snapshot[d.partner].position, &prey, &mean, &d);
                    (position, None, 0)
                } else {
                    let d = ExploitationDraws::sample(&mut rng, dim, params.levy_beta);
                    let m = exploitation_move(hawk, &prey, &mean, energy, &d, objective)?;
                    (m.position, m.fitness, m.evaluations)
                };
                let (position, fitness, mut evals) = outcome;
                assert!(
                    position.iter().all(|x| (0.0..=1.0).contains(x)),
                    "hawk left the unit box"
                );
                let fitness = match fitness {
                    Some(f) => f,
                    None => {
                        evals += 1;
                        objective.evaluate(&position)?
                    }
                };
                Ok((Hawk { position, fitness }, evals))
            })
            .collect::<Result<_>>()?;

        population = Vec::with_capacity(moved.len());
        for (hawk, evals) in moved {
            evaluations += evals;
            population.push(hawk);
        }
        let candidate = first_best(&population);
        if candidate.fitness < best.fitness {
            best = candidate.clone();
        }
        curve.push(best.fitness);
    }
    assert!(evaluations <= params.evaluation_budget(), "evaluation budget exceeded");
    Ok(Optimization {
        best,
        curve: ConvergenceCurve {
            best_fitness_per_iteration: curve,
        },
        evaluations,
        population,
    })
}
