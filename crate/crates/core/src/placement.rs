//! Adam ascent on λ2 over RIS positions.
//!
//! With the assignment and phase profiles frozen, moving a RIS changes both
//! hop path losses and both angles it sees, which also de-steers its fixed
//! beams. The gradient is taken by central finite differences over the
//! flattened `[x0, y0, x1, y1, …]` position vector.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{lambda2, NetworkGraph, ReliabilityMap};
use crate::radio::{PhaseProfile, Point, Scenario, SinrModel};
use crate::selection::{augment_graph, qos_check, Assignment};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    /// Step size ν in metres.
    pub step: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations: usize,
    /// Finite-difference probe offset in metres.
    pub fd_step: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { step: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, iterations: 200, fd_step: 0.01 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.iterations >= 1
            && self.fd_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid Adam configuration {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub i: usize,
    pub positions: Vec<f64>,
}

impl AdamState {
    pub fn new(positions: Vec<f64>) -> Self {
        let n = positions.len();
        Self { m: vec![0.0; n], v: vec![0.0; n], i: 0, positions }
    }
}

/// One Adam update that ascends along `grad`.
///
/// The published recursion is a descent; feeding it `−grad` turns it into
/// ascent without touching the moment bookkeeping.
pub fn adam_step(state: &AdamState, grad: &[f64], config: &AdamConfig) -> AdamState {
    let i = state.i + 1;
    let bias1 = 1.0 - config.beta1.powi(i as i32);
    let bias2 = 1.0 - config.beta2.powi(i as i32);
    let mut next = AdamState { i, ..state.clone() };
    for k in 0..state.positions.len() {
        let g = -grad[k];
        next.m[k] = config.beta1 * state.m[k] + (1.0 - config.beta1) * g;
        next.v[k] = config.beta2 * state.v[k] + (1.0 - config.beta2) * g * g;
        let m_hat = next.m[k] / bias1;
        let v_hat = next.v[k] / bias2;
        next.positions[k] = state.positions[k] - config.step * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    next
}

pub fn flatten(points: &[Point]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y]).collect()
}

pub fn unflatten(coords: &[f64]) -> Vec<Point> {
    coords.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect()
}

/// Everything held fixed while the RISs move.
#[derive(Clone, Copy, Debug)]
pub struct PlacementProblem<'a> {
    pub scenario: &'a Scenario,
    pub base: &'a NetworkGraph,
    pub assignment: &'a Assignment,
    pub profiles: &'a [Option<PhaseProfile>],
    pub reliability: &'a ReliabilityMap,
    pub weight_model: SinrModel,
    pub normalize_reliability: bool,
}

impl PlacementProblem<'_> {
    fn moved(&self, positions: &[f64]) -> Result<Scenario> {
        if positions.len() != 2 * self.scenario.ris_count() {
            return Err(Error::LengthMismatch { expected: 2 * self.scenario.ris_count(), got: positions.len() });
        }
        Ok(self.scenario.with_ris_positions(&unflatten(positions)))
    }

    /// λ2 of the augmented graph with the RISs at `positions`.
    pub fn objective(&self, positions: &[f64]) -> Result<f64> {
        let scn = self.moved(positions)?;
        let g = augment_graph(self.base, &scn, self.assignment, self.profiles, self.weight_model)?;
        lambda2(&g)
    }

    /// True when every assigned link meets its QoS floor at `positions`.
    pub fn feasible(&self, positions: &[f64]) -> Result<bool> {
        let scn = self.moved(positions)?;
        for link in self.assignment.links() {
            if !qos_check(&scn, self.assignment, self.profiles, link, self.reliability, self.normalize_reliability)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Central-difference gradient. A coordinate whose probes fail or come
    /// back non-finite is retried with the step shrunk tenfold, three times
    /// at most.
    pub fn gradient(&self, positions: &[f64], fd_step: f64) -> Result<Vec<f64>> {
        (0..positions.len())
            .into_par_iter()
            .map(|k| {
                let mut h = fd_step;
                for _ in 0..4 {
                    let probe = |delta: f64| {
                        let mut p = positions.to_vec();
                        p[k] += delta;
                        self.objective(&p).ok().filter(|v| v.is_finite())
                    };
                    if let (Some(plus), Some(minus)) = (probe(h), probe(-h)) {
                        return Ok((plus - minus) / (2.0 * h));
                    }
                    h /= 10.0;
                }
                Err(Error::NonFiniteObjective)
            })
            .collect()
    }
}

pub fn objective(problem: &PlacementProblem<'_>, positions: &[f64]) -> Result<f64> {
    problem.objective(positions)
}

pub fn grad_lambda2(problem: &PlacementProblem<'_>, positions: &[f64], config: &AdamConfig) -> Result<Vec<f64>> {
    problem.gradient(positions, config.fd_step)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iter: usize,
    pub lambda2: f64,
    pub feasible: bool,
    pub positions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlacementOutcome {
    pub positions: Vec<Point>,
    pub lambda2: f64,
    pub initial_lambda2: f64,
    /// Whether the returned positions satisfy every QoS floor.
    pub feasible: bool,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// Runs `config.iterations` Adam steps and returns the best iterate.
///
/// The initial positions are always a candidate; later iterates only replace
/// them when feasible and strictly better, so the returned λ2 never falls
/// below the starting value. A failed gradient ends the run early.
pub fn optimize_positions(problem: &PlacementProblem<'_>, config: &AdamConfig) -> Result<PlacementOutcome> {
    config.validate()?;
    let start = flatten(&problem.scenario.ris_positions);
    let initial_lambda2 = problem.objective(&start)?;
    let initial_feasible = problem.feasible(&start)?;

    let mut trajectory =
        vec![TrajectoryPoint { iter: 0, lambda2: initial_lambda2, feasible: initial_feasible, positions: start.clone() }];
    let mut best = (start.clone(), initial_lambda2, initial_feasible);
    let mut state = AdamState::new(start);

    if !state.positions.is_empty() {
        for iter in 1..=config.iterations {
            let grad = match problem.gradient(&state.positions, config.fd_step) {
                Ok(g) => g,
                Err(e) => {
                    log::warn!("placement stopped at iteration {iter}: {e}");
                    break;
                }
            };
            state = adam_step(&state, &grad, config);
            let (value, feasible) = match (problem.objective(&state.positions), problem.feasible(&state.positions)) {
                (Ok(v), Ok(f)) if v.is_finite() => (v, f),
                _ => {
                    log::warn!("placement left the valid region at iteration {iter}");
                    break;
                }
            };
            trajectory.push(TrajectoryPoint { iter, lambda2: value, feasible, positions: state.positions.clone() });
            if feasible && value > best.1 {
                best = (state.positions.clone(), value, true);
            }
        }
    }

    if !best.2 {
        log::info!("no feasible RIS placement found; keeping the initial positions");
    }
    Ok(PlacementOutcome {
        positions: unflatten(&best.0),
        lambda2: best.1,
        initial_lambda2,
        feasible: best.2,
        trajectory,
    })
}

/// `iter, lambda2, feasible, pos_m0_x, pos_m0_y, …`
pub fn write_trajectory_csv<W: Write>(trajectory: &[TrajectoryPoint], ris_count: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string(), "lambda2".into(), "feasible".into()];
    for m in 0..ris_count {
        header.push(format!("pos_m{m}_x"));
        header.push(format!("pos_m{m}_y"));
    }
    w.write_record(&header)?;
    for t in trajectory {
        let mut row = vec![t.iter.to_string(), t.lambda2.to_string(), t.feasible.to_string()];
        row.extend(t.positions.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
