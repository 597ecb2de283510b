//! Greedy RIS-aided link selection guided by the Fiedler vector.
//!
//! RISs are processed one at a time. For each, every candidate
//! transmitter/receiver pair is scored by `ℛ_r·(v_u − v_r)²`, where `v` is
//! the Fiedler vector of the current augmented graph and `ℛ_r` the
//! reliability of the receiver in the original D2D graph. The best pair
//! fixes the RIS's transmitter; the next best receivers of that transmitter
//! fill the remaining beams. The GA then shapes the RIS phases for those
//! departure angles and each link that meets its QoS floor becomes an edge.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{run_ga, BeamTask, GaConfig, DEFAULT_MIN_TARGET_SEPARATION};
use crate::graph::{algebraic_connectivity, build_laplacian, lambda2, node_reliability, EdgeKind, NetworkGraph, ReliabilityMap};
use crate::radio::{db_to_linear, sinr_linear, PhaseProfile, Scenario, SinrModel};

/// One RIS serving one transmitter and a set of receivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RisBeam {
    pub ris: usize,
    pub tx: usize,
    pub receivers: Vec<usize>,
    /// Departure angles (radians) the phase profile was designed for.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<f64>,
}

impl RisBeam {
    pub fn new(ris: usize, tx: usize, receivers: Vec<usize>) -> Self {
        Self { ris, tx, receivers, targets: Vec::new() }
    }
}

/// Binary transmitter→RIS (`x`) and RIS→receiver (`z`) assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AssignmentFile", into = "AssignmentFile")]
pub struct Assignment {
    ris_count: usize,
    ue_count: usize,
    beams: Vec<RisBeam>,
}

impl Assignment {
    pub fn empty(ris_count: usize, ue_count: usize) -> Self {
        Self { ris_count, ue_count, beams: Vec::new() }
    }

    pub fn from_beams(ris_count: usize, ue_count: usize, beams: Vec<RisBeam>) -> Self {
        Self { ris_count, ue_count, beams }
    }

    pub fn ris_count(&self) -> usize {
        self.ris_count
    }

    pub fn ue_count(&self) -> usize {
        self.ue_count
    }

    pub fn beams(&self) -> &[RisBeam] {
        &self.beams
    }

    pub fn beam(&self, ris: usize) -> Option<&RisBeam> {
        self.beams.iter().find(|b| b.ris == ris)
    }

    pub fn push(&mut self, beam: RisBeam) {
        self.beams.push(beam);
    }

    /// All `(tx, ris, rx)` triples.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.beams.iter().flat_map(|b| b.receivers.iter().map(move |&r| (b.tx, b.ris, r)))
    }

    pub fn link_count(&self) -> usize {
        self.beams.iter().map(|b| b.receivers.len()).sum()
    }

    /// M×U matrix, `x[m][u] = 1` when UE u transmits through RIS m.
    pub fn x_matrix(&self) -> Vec<Vec<u8>> {
        let mut x = vec![vec![0; self.ue_count]; self.ris_count];
        for b in &self.beams {
            x[b.ris][b.tx] = 1;
        }
        x
    }

    /// M×U matrix, `z[m][r] = 1` when RIS m beams towards UE r.
    pub fn z_matrix(&self) -> Vec<Vec<u8>> {
        let mut z = vec![vec![0; self.ue_count]; self.ris_count];
        for b in &self.beams {
            for &r in &b.receivers {
                z[b.ris][r] = 1;
            }
        }
        z
    }

    /// Checks the structural constraints with at most `um` beams per RIS:
    /// one reflected link per receiver, at most one transmitter per RIS and
    /// at most M transmitters overall, at most `um` receivers per RIS.
    pub fn check_constraints(&self, um: usize) -> Result<()> {
        let x = self.x_matrix();
        let z = self.z_matrix();
        for r in 0..self.ue_count {
            let served: u32 = z.iter().map(|row| row[r] as u32).sum();
            if served > 1 {
                return Err(Error::InvalidInput(format!("receiver {r} is served by {served} RISs")));
            }
        }
        let transmitters: usize = x.iter().flatten().map(|&v| v as usize).sum();
        if transmitters > self.ris_count {
            return Err(Error::InvalidInput(format!("{transmitters} transmitter links exceed {} RISs", self.ris_count)));
        }
        for (m, row) in x.iter().enumerate() {
            let txs: usize = row.iter().map(|&v| v as usize).sum();
            let rxs: usize = z[m].iter().map(|&v| v as usize).sum();
            if txs > 1 {
                return Err(Error::InvalidInput(format!("RIS {m} serves {txs} transmitters")));
            }
            if txs * rxs > um {
                return Err(Error::InvalidInput(format!("RIS {m} serves {rxs} receivers, limit {um}")));
            }
        }
        let mut seen = BTreeSet::new();
        for b in &self.beams {
            if !seen.insert(b.ris) {
                return Err(Error::InvalidInput(format!("RIS {} appears twice", b.ris)));
            }
            if b.receivers.contains(&b.tx) {
                return Err(Error::InvalidInput(format!("RIS {} reflects UE {} back to itself", b.ris, b.tx)));
            }
        }
        if self.link_count() > um.saturating_mul(self.ris_count) {
            return Err(Error::InvalidInput("more RIS-aided links than U_m·M".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssignmentFile {
    pub x: Vec<Vec<u8>>,
    pub z: Vec<Vec<u8>>,
    pub beams: Vec<BeamRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BeamRecord {
    pub ris: usize,
    pub tx: usize,
    pub targets_deg: Vec<f64>,
}

impl From<Assignment> for AssignmentFile {
    fn from(a: Assignment) -> Self {
        let beams = a
            .beams
            .iter()
            .map(|b| BeamRecord { ris: b.ris, tx: b.tx, targets_deg: b.targets.iter().map(|t| t.to_degrees()).collect() })
            .collect();
        AssignmentFile { x: a.x_matrix(), z: a.z_matrix(), beams }
    }
}

impl TryFrom<AssignmentFile> for Assignment {
    type Error = Error;

    fn try_from(file: AssignmentFile) -> Result<Self> {
        let ris_count = file.x.len();
        let ue_count = file.x.first().map_or(0, Vec::len);
        if file.z.len() != ris_count || file.x.iter().chain(&file.z).any(|row| row.len() != ue_count) {
            return Err(Error::InvalidInput("x and z must both be M×U".into()));
        }
        let mut beams = Vec::new();
        for (m, row) in file.x.iter().enumerate() {
            let txs: Vec<usize> = (0..ue_count).filter(|&u| row[u] != 0).collect();
            let receivers: Vec<usize> = (0..ue_count).filter(|&r| file.z[m][r] != 0).collect();
            match txs.as_slice() {
                [] if receivers.is_empty() => continue,
                [tx] => {
                    let targets = file
                        .beams
                        .iter()
                        .find(|b| b.ris == m)
                        .map(|b| b.targets_deg.iter().map(|d| d.to_radians()).collect())
                        .unwrap_or_default();
                    beams.push(RisBeam { ris: m, tx: *tx, receivers, targets });
                }
                _ => return Err(Error::InvalidInput(format!("RIS {m} needs exactly one transmitter"))),
            }
        }
        Ok(Assignment { ris_count, ue_count, beams })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub u: usize,
    pub r: usize,
    pub score: f64,
}

/// Scores candidate pairs by `ℛ_r·(v_u − v_r)²` on the Fiedler vector of `g`.
///
/// Self-pairs and pairs already joined by an edge are skipped. The result is
/// sorted by descending score, ties by ascending `(u, r)`.
pub fn score_candidates(
    g: &NetworkGraph,
    reliability: &ReliabilityMap,
    eligible: &[(usize, usize)],
) -> Result<Vec<CandidateScore>> {
    if g.vertex_count() < 3 {
        return Err(Error::InvalidInput("candidate scoring needs at least 3 vertices".into()));
    }
    if reliability.len() != g.vertex_count() {
        return Err(Error::LengthMismatch { expected: g.vertex_count(), got: reliability.len() });
    }
    let fiedler = algebraic_connectivity(&build_laplacian(g)?)?;
    let v = &fiedler.vector;
    let mut scores: Vec<CandidateScore> = eligible
        .iter()
        .filter(|&&(u, r)| u != r && !g.has_edge(u, r))
        .map(|&(u, r)| {
            let d = v[u] - v[r];
            CandidateScore { u, r, score: reliability.get(r) * d * d }
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.u.cmp(&b.u)).then(a.r.cmp(&b.r)));
    Ok(scores)
}

/// Multiplier applied to `ℛ_r` before it scales the RIS SINR threshold.
fn reliability_scale(reliability: &ReliabilityMap, r: usize, normalize: bool) -> f64 {
    let value = reliability.get(r);
    if !normalize {
        return value;
    }
    let max = reliability.max();
    if max > 0.0 {
        value / max
    } else {
        0.0
    }
}

/// QoS floor: approximated SINR ≥ ℛ_r·γ0 (linear, inclusive).
pub fn qos_check(
    scn: &Scenario,
    assignment: &Assignment,
    profiles: &[Option<PhaseProfile>],
    link: (usize, usize, usize),
    reliability: &ReliabilityMap,
    normalize: bool,
) -> Result<bool> {
    let (u, m, r) = link;
    let threshold = reliability_scale(reliability, r, normalize) * db_to_linear(scn.constants.ris_sinr_threshold_db);
    let sinr = sinr_linear(scn, assignment, profiles, u, r, m, SinrModel::Approx)?;
    Ok(sinr >= threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Beams per RIS, U_m.
    pub um: usize,
    pub ga: GaConfig,
    /// Divide ℛ_r by its maximum before applying the QoS threshold.
    pub normalize_reliability: bool,
    /// SINR flavour used as the weight of RIS-aided edges.
    pub weight_model: SinrModel,
    /// Replacement receivers tried per beam slot after a QoS failure.
    pub qos_retries: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            um: 2,
            ga: GaConfig::default(),
            normalize_reliability: false,
            weight_model: SinrModel::Approx,
            qos_retries: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub assignment: Assignment,
    pub profiles: Vec<Option<PhaseProfile>>,
    /// D2D graph plus the selected RIS-aided edges, weighted under the
    /// final assignment.
    pub graph: NetworkGraph,
    pub reliability: ReliabilityMap,
    /// λ2 before any addition, then after each edge as it was added.
    pub lambda2_trace: Vec<f64>,
}

impl Selection {
    pub fn lambda2(&self) -> Result<f64> {
        lambda2(&self.graph)
    }
}

/// Weight of every RIS-aided link in the assignment.
pub fn ris_edge_weights(
    scn: &Scenario,
    assignment: &Assignment,
    profiles: &[Option<PhaseProfile>],
    model: SinrModel,
) -> Result<Vec<(usize, usize, f64)>> {
    assignment
        .links()
        .map(|(u, m, r)| Ok((u, r, sinr_linear(scn, assignment, profiles, u, r, m, model)?)))
        .collect()
}

/// `base` plus one RIS-aided edge per assigned link.
pub fn augment_graph(
    base: &NetworkGraph,
    scn: &Scenario,
    assignment: &Assignment,
    profiles: &[Option<PhaseProfile>],
    model: SinrModel,
) -> Result<NetworkGraph> {
    let mut g = base.without_kind(EdgeKind::RisAided);
    for (u, r, w) in ris_edge_weights(scn, assignment, profiles, model)? {
        g.add_edge(u, r, w, EdgeKind::RisAided)?;
    }
    Ok(g)
}

fn ga_seed(base: u64, ris: usize) -> u64 {
    base ^ (ris as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Greedy perturbation selection of X, Z and the RIS phase profiles.
pub fn perturbation_select(scn: &Scenario, base: &NetworkGraph, config: &SelectionConfig) -> Result<Selection> {
    let ue_count = scn.ue_count();
    let ris_count = scn.ris_count();
    if base.vertex_count() != ue_count {
        return Err(Error::LengthMismatch { expected: ue_count, got: base.vertex_count() });
    }
    if ue_count < 3 {
        return Err(Error::InvalidInput("link selection needs at least 3 UEs".into()));
    }
    if config.um == 0 {
        return Err(Error::InvalidInput("U_m must be at least 1".into()));
    }

    let reliability = node_reliability(base)?;
    let mut current = base.clone();
    let mut assignment = Assignment::empty(ris_count, ue_count);
    let mut profiles: Vec<Option<PhaseProfile>> = vec![None; ris_count];
    let mut used = BTreeSet::new();
    let mut trace = vec![lambda2(&current)?];

    for m in 0..ris_count {
        let eligible: Vec<(usize, usize)> = (0..ue_count)
            .filter(|u| !used.contains(u))
            .flat_map(|u| (0..ue_count).filter(|r| !used.contains(r)).map(move |r| (u, r)))
            .collect();
        let scores = score_candidates(&current, &reliability, &eligible)?;
        let Some(top) = scores.first() else {
            log::info!("RIS {m}: no eligible candidate links, leaving it unassigned");
            continue;
        };
        let tx = top.u;
        let aoa = scn.ris_angle(m, tx)?;
        let ranked: Vec<usize> = scores.iter().filter(|c| c.u == tx).map(|c| c.r).collect();

        let Some((receivers, targets, profile)) =
            design_beam(scn, &assignment, &profiles, m, tx, aoa, &ranked, &reliability, config)?
        else {
            log::info!("RIS {m}: every candidate receiver of UE {tx} failed QoS, leaving it unassigned");
            continue;
        };

        assignment.push(RisBeam { ris: m, tx, receivers: receivers.clone(), targets });
        profiles[m] = Some(profile);
        for &r in &receivers {
            let w = sinr_linear(scn, &assignment, &profiles, tx, r, m, config.weight_model)?;
            current.add_edge(tx, r, w, EdgeKind::RisAided)?;
            trace.push(lambda2(&current)?);
        }
        used.insert(tx);
        used.extend(receivers);
    }

    let graph = augment_graph(base, scn, &assignment, &profiles, config.weight_model)?;
    Ok(Selection { assignment, profiles, graph, reliability, lambda2_trace: trace })
}

/// Picks up to U_m receivers from `ranked`, runs the GA for them, and swaps
/// out receivers that miss their QoS floor until every kept link passes.
#[allow(clippy::too_many_arguments)]
fn design_beam(
    scn: &Scenario,
    assignment: &Assignment,
    profiles: &[Option<PhaseProfile>],
    m: usize,
    tx: usize,
    aoa: f64,
    ranked: &[usize],
    reliability: &ReliabilityMap,
    config: &SelectionConfig,
) -> Result<Option<(Vec<usize>, Vec<f64>, PhaseProfile)>> {
    let angles: Vec<f64> = (0..scn.ue_count()).map(|r| scn.ris_angle(m, r).unwrap_or(f64::NAN)).collect();
    let separated = |r: usize, taken: &[(usize, usize)]| {
        angles[r].is_finite()
            && taken.iter().all(|&(o, _)| (angles[o] - angles[r]).abs() >= DEFAULT_MIN_TARGET_SEPARATION)
    };

    // (receiver, retries used) per slot
    let mut slots: Vec<(usize, usize)> = Vec::new();
    let mut queue: Vec<usize> = Vec::new();
    for &r in ranked {
        if slots.len() < config.um && separated(r, &slots) {
            slots.push((r, 0));
        } else {
            queue.push(r);
        }
    }

    let ga = config.ga.with_seed(ga_seed(config.ga.seed, m));
    loop {
        if slots.is_empty() {
            return Ok(None);
        }
        let targets: Vec<f64> = slots.iter().map(|&(r, _)| angles[r]).collect();
        let task = BeamTask::new(scn.geometry, aoa, targets.clone())?;
        let profile = run_ga(&task, &ga)?.best_profile;

        let mut trial = assignment.clone();
        trial.push(RisBeam { ris: m, tx, receivers: slots.iter().map(|s| s.0).collect(), targets: targets.clone() });
        let mut trial_profiles = profiles.to_vec();
        trial_profiles[m] = Some(profile.clone());

        let mut failing = Vec::new();
        for (i, &(r, _)) in slots.iter().enumerate() {
            if !qos_check(scn, &trial, &trial_profiles, (tx, m, r), reliability, config.normalize_reliability)? {
                failing.push(i);
            }
        }
        if failing.is_empty() {
            let receivers = slots.iter().map(|s| s.0).collect();
            return Ok(Some((receivers, targets, profile)));
        }
        for &i in failing.iter().rev() {
            let (_, retries) = slots[i];
            slots.remove(i);
            if retries < config.qos_retries {
                if let Some(pos) = queue.iter().position(|&r| separated(r, &slots)) {
                    let next = queue.remove(pos);
                    slots.insert(i, (next, retries + 1));
                }
            }
        }
    }
}
