//! Scenario generation and the alternating link-selection / placement loop.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::graph::{lambda2, EdgeKind, NetworkGraph};
use crate::placement::{optimize_positions, AdamConfig, PlacementProblem};
use crate::radio::{
    d2d_snr_linear, db_to_linear, linear_to_db, sinr_linear, sum_rate, ArrayGeometry, ElementPattern, PhaseProfile,
    Point, RadioConstants, Scenario, SinrModel,
};
use crate::selection::{perturbation_select, Assignment, SelectionConfig};

/// Default side of the square deployment area, metres.
pub const DEFAULT_AREA: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Multi-beam RISs with U_m beams each.
    #[default]
    Proposed,
    /// One beam per RIS.
    SingleBeam,
    /// D2D links only.
    RisFree,
    /// Each RIS split into two half-size RISs with one beam each.
    DistributedSmall,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::SingleBeam, Scheme::RisFree, Scheme::DistributedSmall];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::SingleBeam => "single-beam",
            Scheme::RisFree => "ris-free",
            Scheme::DistributedSmall => "distributed-small",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Beams per RIS for the proposed scheme.
    pub um: usize,
    pub outer_iterations: usize,
    /// Stop once λ2 improves by less than this fraction between alternations.
    pub tolerance: f64,
    pub ga: GaConfig,
    pub adam: AdamConfig,
    pub scheme: Scheme,
    pub normalize_reliability: bool,
    pub weight_model: SinrModel,
    pub qos_retries: usize,
    pub optimizer_seed: u64,
    /// Replaces the scenario's radio constants when present.
    pub radio: Option<RadioConstants>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            um: 2,
            outer_iterations: 3,
            tolerance: 1e-3,
            ga: GaConfig::default(),
            adam: AdamConfig::default(),
            scheme: Scheme::Proposed,
            normalize_reliability: false,
            weight_model: SinrModel::Approx,
            qos_retries: 5,
            optimizer_seed: 0,
            radio: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.um == 0 {
            return Err(Error::InvalidInput("U_m must be at least 1".into()));
        }
        if self.outer_iterations == 0 {
            return Err(Error::InvalidInput("need at least one outer iteration".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        self.ga.validate()?;
        self.adam.validate()
    }

    fn selection(&self, um: usize, iteration: usize) -> SelectionConfig {
        SelectionConfig {
            um,
            ga: self.ga.with_seed(mix_seed(self.optimizer_seed ^ self.ga.seed, iteration as u64)),
            normalize_reliability: self.normalize_reliability,
            weight_model: self.weight_model,
            qos_retries: self.qos_retries,
        }
    }
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inputs for [`generate_scenario`] beyond the three counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub ues: usize,
    pub riss: usize,
    pub area: f64,
    pub elements: usize,
    /// Element spacing as a fraction of the wavelength.
    pub spacing_fraction: f64,
    pub constants: RadioConstants,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(ues: usize, riss: usize, area: f64, seed: u64) -> Self {
        Self { ues, riss, area, elements: 10, spacing_fraction: 0.5, constants: RadioConstants::default(), seed }
    }

    pub fn with_elements(self, elements: usize) -> Self {
        Self { elements, ..self }
    }
}

/// Uniform random drop of UEs and RISs in `[0, area]²` with CN(0, 1) D2D fading.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    if spec.ues < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 UEs, got {}", spec.ues)));
    }
    if !(spec.area > 0.0 && spec.area.is_finite()) {
        return Err(Error::InvalidInput("area must be positive".into()));
    }
    let geometry = ArrayGeometry::for_carrier(spec.elements, spec.spacing_fraction, spec.constants.carrier)?;
    spec.constants.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draw = |taken: &[Point], rng: &mut ChaCha8Rng| loop {
        let p = Point::new(rng.random_range(0.0..spec.area), rng.random_range(0.0..spec.area));
        if taken.iter().all(|q| q.distance(p) > 0.0) {
            return p;
        }
    };
    let mut ue_positions = Vec::with_capacity(spec.ues);
    for _ in 0..spec.ues {
        let p = draw(&ue_positions, &mut rng);
        ue_positions.push(p);
    }
    let ris_positions: Vec<Point> = (0..spec.riss).map(|_| draw(&ue_positions, &mut rng)).collect();

    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut fading = vec![vec![Complex64::new(0.0, 0.0); spec.ues]; spec.ues];
    for a in 0..spec.ues {
        for b in (a + 1)..spec.ues {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let h = Complex64::new(re * scale, im * scale);
            fading[a][b] = h;
            fading[b][a] = h;
        }
    }

    Ok(Scenario {
        ue_positions,
        ris_positions,
        ris_orientations: vec![0.0; spec.riss],
        geometry,
        constants: spec.constants,
        element_pattern: ElementPattern::default(),
        d2d_fading: fading,
        rng_seed: spec.seed,
    })
}

/// D2D links whose SNR clears the threshold, weighted by linear SNR.
pub fn build_d2d_graph(scn: &Scenario) -> Result<NetworkGraph> {
    let threshold = db_to_linear(scn.constants.d2d_snr_threshold_db);
    let mut g = NetworkGraph::new(scn.ue_count());
    for a in 0..scn.ue_count() {
        for b in (a + 1)..scn.ue_count() {
            let snr = d2d_snr_linear(scn, a, b)?;
            if snr >= threshold {
                g.add_edge(a, b, snr, EdgeKind::D2d)?;
            }
        }
    }
    Ok(g)
}

/// Replaces every RIS by its two halves, side by side along the array axis.
pub fn split_riss(scn: &Scenario) -> Result<Scenario> {
    let n = scn.geometry.elements;
    if n % 2 != 0 {
        return Err(Error::InvalidInput(format!("cannot split a {n}-element RIS into halves")));
    }
    let half = n / 2;
    let offset = half as f64 * scn.geometry.spacing / 2.0;
    let mut positions = Vec::with_capacity(2 * scn.ris_count());
    let mut orientations = Vec::with_capacity(2 * scn.ris_count());
    for (m, p) in scn.ris_positions.iter().enumerate() {
        let o = scn.orientation(m);
        let (dx, dy) = (o.cos() * offset, -o.sin() * offset);
        positions.push(Point::new(p.x - dx, p.y - dy));
        positions.push(Point::new(p.x + dx, p.y + dy));
        orientations.extend([o, o]);
    }
    Ok(Scenario {
        ris_positions: positions,
        ris_orientations: orientations,
        geometry: ArrayGeometry::new(half, scn.geometry.spacing, scn.geometry.wavelength)?,
        ..scn.clone()
    })
}

/// Rounds to `digits` significant digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub tx: usize,
    pub ris: usize,
    pub rx: usize,
    pub exact_sinr_db: f64,
    pub approx_sinr_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub scheme: Scheme,
    pub um: usize,
    pub elements: usize,
    pub scenario_seed: u64,
    pub optimizer_seed: u64,
    pub lambda2_initial: f64,
    pub lambda2_final: f64,
    /// λ2 after each completed alternation.
    pub lambda2_history: Vec<f64>,
    pub assignment: Assignment,
    pub profiles: Vec<Option<PhaseProfile>>,
    pub ris_positions: Vec<Point>,
    pub placement_feasible: bool,
    pub links: Vec<LinkReport>,
    /// bit/s.
    pub sum_rate_exact: f64,
    pub sum_rate_approx: f64,
    pub graph: NetworkGraph,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SolveResult {
    pub fn links_added(&self) -> usize {
        self.assignment.link_count()
    }
}

struct Iterate {
    lambda2: f64,
    assignment: Assignment,
    profiles: Vec<Option<PhaseProfile>>,
    positions: Vec<Point>,
    feasible: bool,
}

/// Alternates link selection and RIS placement under `config.scheme`.
pub fn solve(scn: &Scenario, config: &SolveConfig) -> Result<SolveResult> {
    let started = Instant::now();
    config.validate()?;
    let mut scn = scn.clone();
    if let Some(radio) = config.radio {
        scn.constants = radio;
    }
    scn.validate()?;

    let (scn, um) = match config.scheme {
        Scheme::Proposed => (scn, config.um),
        Scheme::SingleBeam => (scn, 1),
        Scheme::RisFree => {
            let ris_free = Scenario { ris_positions: vec![], ris_orientations: vec![], ..scn };
            (ris_free, 1)
        }
        Scheme::DistributedSmall => (split_riss(&scn)?, 1),
    };

    let base = build_d2d_graph(&scn)?;
    let lambda2_initial = lambda2(&base)?;
    let mut best = Iterate {
        lambda2: lambda2_initial,
        assignment: Assignment::empty(scn.ris_count(), scn.ue_count()),
        profiles: vec![None; scn.ris_count()],
        positions: scn.ris_positions.clone(),
        feasible: true,
    };
    let mut history = Vec::new();

    if scn.ris_count() > 0 {
        let mut positions = scn.ris_positions.clone();
        let mut previous: Option<f64> = None;
        let mut have_best = false;
        for iteration in 0..config.outer_iterations {
            let here = scn.with_ris_positions(&positions);
            let selection = perturbation_select(&here, &base, &config.selection(um, iteration))?;
            let problem = PlacementProblem {
                scenario: &here,
                base: &base,
                assignment: &selection.assignment,
                profiles: &selection.profiles,
                reliability: &selection.reliability,
                weight_model: config.weight_model,
                normalize_reliability: config.normalize_reliability,
            };
            let placed = optimize_positions(&problem, &config.adam)?;
            log::debug!(
                "alternation {iteration}: lambda2 {} after selection, {} after placement",
                placed.initial_lambda2,
                placed.lambda2
            );
            history.push(placed.lambda2);
            if !have_best || placed.lambda2 > best.lambda2 {
                best = Iterate {
                    lambda2: placed.lambda2,
                    assignment: selection.assignment.clone(),
                    profiles: selection.profiles.clone(),
                    positions: placed.positions.clone(),
                    feasible: placed.feasible,
                };
                have_best = true;
            }
            if let Some(prev) = previous {
                if placed.lambda2 - prev <= config.tolerance * prev.abs() {
                    break;
                }
            }
            previous = Some(placed.lambda2);
            positions = placed.positions;
        }
    }

    let final_scn = scn.with_ris_positions(&best.positions);
    let graph = crate::selection::augment_graph(&base, &final_scn, &best.assignment, &best.profiles, config.weight_model)?;
    let lambda2_final = lambda2(&graph)?;

    let mut links = Vec::new();
    let (mut exact_db, mut approx_db) = (Vec::new(), Vec::new());
    for (tx, ris, rx) in best.assignment.links() {
        let exact = sinr_linear(&final_scn, &best.assignment, &best.profiles, tx, rx, ris, SinrModel::Exact)?;
        let approx = sinr_linear(&final_scn, &best.assignment, &best.profiles, tx, rx, ris, SinrModel::Approx)?;
        exact_db.push(linear_to_db(exact));
        approx_db.push(linear_to_db(approx));
        links.push(LinkReport {
            tx,
            ris,
            rx,
            exact_sinr_db: round_significant(linear_to_db(exact), 6),
            approx_sinr_db: round_significant(linear_to_db(approx), 6),
        });
    }
    let bandwidth = final_scn.constants.bandwidth;

    Ok(SolveResult {
        scheme: config.scheme,
        um,
        elements: final_scn.geometry.elements,
        scenario_seed: scn.rng_seed,
        optimizer_seed: config.optimizer_seed,
        lambda2_initial,
        lambda2_final,
        lambda2_history: history,
        assignment: best.assignment,
        profiles: best.profiles,
        ris_positions: best.positions,
        placement_feasible: best.feasible,
        links,
        sum_rate_exact: sum_rate(&exact_db, bandwidth),
        sum_rate_approx: sum_rate(&approx_db, bandwidth),
        graph,
        wall_time: started.elapsed(),
    })
}

/// [`solve`] with the scheme overridden.
pub fn run_baseline(scn: &Scenario, scheme: Scheme, config: &SolveConfig) -> Result<SolveResult> {
    solve(scn, &SolveConfig { scheme, ..config.clone() })
}
