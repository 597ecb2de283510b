//! Parameter sweeps, the exact-versus-approximate rate study and beam-pattern dumps.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{run_ga, BeamTask, GaConfig, GaOutcome};
use crate::radio::{
    linear_to_db, pdaf, sinr_linear, sum_rate, ArrayGeometry, ElementPattern, PhaseProfile, Point, RadioConstants,
    Scenario, SinrModel,
};
use crate::selection::{Assignment, RisBeam};
use crate::solve::{generate_scenario, run_baseline, ScenarioSpec, Scheme, SolveConfig, DEFAULT_AREA};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Ues,
    Elements,
    Um,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Ues => "ues",
            SweepParam::Elements => "elements",
            SweepParam::Um => "um",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepParam::Ues, SweepParam::Elements, SweepParam::Um]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown sweep parameter '{s}'")))
    }
}

/// Fixed part of a sweep: everything except the swept parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepBase {
    pub ues: usize,
    pub riss: usize,
    pub elements: usize,
    pub area: f64,
    pub solve: SolveConfig,
}

impl Default for SweepBase {
    fn default() -> Self {
        Self { ues: 10, riss: 3, elements: 10, area: DEFAULT_AREA, solve: SolveConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<usize>,
    /// Seeds 0..seeds, used for both the scenario and the optimizer.
    pub seeds: u64,
    pub schemes: Vec<Scheme>,
    pub base: SweepBase,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: usize,
    pub scheme: Scheme,
    /// `None` marks a mean row.
    pub seed: Option<u64>,
    pub lambda2_initial: f64,
    pub lambda2_final: f64,
    pub links_added: f64,
    pub status: String,
}

fn run_point(spec: &SweepSpec, value: usize, scheme: Scheme, seed: u64) -> Result<(f64, f64, usize)> {
    let b = &spec.base;
    let (mut ues, mut elements, mut um) = (b.ues, b.elements, b.solve.um);
    match spec.param {
        SweepParam::Ues => ues = value,
        SweepParam::Elements => elements = value,
        SweepParam::Um => um = value,
    }
    let mut scenario_spec = ScenarioSpec::new(ues, b.riss, b.area, seed).with_elements(elements);
    if let Some(radio) = b.solve.radio {
        scenario_spec.constants = radio;
    }
    let scn = generate_scenario(&scenario_spec)?;
    let config = SolveConfig { um, optimizer_seed: seed, ..b.solve.clone() };
    let r = run_baseline(&scn, scheme, &config)?;
    Ok((r.lambda2_initial, r.lambda2_final, r.links_added()))
}

/// Runs every (value, scheme, seed) point and appends one mean row per
/// (value, scheme). Failed points are kept with their error as status and
/// left out of the means. Row order does not depend on scheduling.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.seeds == 0 {
        return Err(Error::InvalidInput("sweep needs at least one seed".into()));
    }
    if spec.values.is_empty() || spec.schemes.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value and one scheme".into()));
    }
    let mut values = spec.values.clone();
    values.sort_unstable();
    values.dedup();
    let mut schemes = spec.schemes.clone();
    schemes.sort_unstable();
    schemes.dedup();

    let grid: Vec<(usize, Scheme, u64)> = values
        .iter()
        .flat_map(|&v| schemes.iter().flat_map(move |&s| (0..spec.seeds).map(move |seed| (v, s, seed))))
        .collect();
    let runs: Vec<SweepRow> = grid
        .par_iter()
        .map(|&(value, scheme, seed)| {
            let (lambda2_initial, lambda2_final, links, status) = match run_point(spec, value, scheme, seed) {
                Ok((a, b, l)) => (a, b, l as f64, "ok".to_string()),
                Err(e) => {
                    log::warn!("sweep point {}={value} {scheme} seed {seed} failed: {e}", spec.param);
                    (f64::NAN, f64::NAN, f64::NAN, format!("error: {e}"))
                }
            };
            SweepRow {
                param: spec.param,
                value,
                scheme,
                seed: Some(seed),
                lambda2_initial,
                lambda2_final,
                links_added: links,
                status,
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(runs.len() + values.len() * schemes.len());
    for chunk in runs.chunk_by(|a, b| a.value == b.value && a.scheme == b.scheme) {
        rows.extend_from_slice(chunk);
        let ok: Vec<&SweepRow> = chunk.iter().filter(|r| r.status == "ok").collect();
        let mean = |f: fn(&SweepRow) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        rows.push(SweepRow {
            param: spec.param,
            value: chunk[0].value,
            scheme: chunk[0].scheme,
            seed: None,
            lambda2_initial: mean(|r| r.lambda2_initial),
            lambda2_final: mean(|r| r.lambda2_final),
            links_added: mean(|r| r.links_added),
            status: format!("ok={} failed={}", ok.len(), chunk.len() - ok.len()),
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["param", "value", "scheme", "seed", "lambda2_initial", "lambda2_final", "links_added", "status"])?;
    for r in rows {
        let seed = r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string());
        w.write_record([
            r.param.name().to_string(),
            r.value.to_string(),
            r.scheme.name().to_string(),
            seed,
            r.lambda2_initial.to_string(),
            r.lambda2_final.to_string(),
            r.links_added.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Two transmitters, each served by its own RIS, with up to two receivers per RIS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFixture {
    pub scenario: Scenario,
    /// Per RIS: the transmitter and its receivers in serving order.
    pub links: Vec<RisBeam>,
}

impl RateFixture {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.links.len() != self.scenario.ris_count() {
            return Err(Error::LengthMismatch { expected: self.scenario.ris_count(), got: self.links.len() });
        }
        for (m, beam) in self.links.iter().enumerate() {
            if beam.ris != m || beam.receivers.is_empty() {
                return Err(Error::InvalidInput(format!("fixture link {m} must name RIS {m} and a receiver")));
            }
        }
        Assignment::from_beams(self.scenario.ris_count(), self.scenario.ue_count(), self.links.clone())
            .check_constraints(usize::MAX)
    }

    /// The assignment that serves the first `um` receivers of every RIS.
    pub fn assignment(&self, um: usize) -> Assignment {
        let beams = self
            .links
            .iter()
            .map(|b| RisBeam::new(b.ris, b.tx, b.receivers.iter().copied().take(um).collect()))
            .collect();
        Assignment::from_beams(self.scenario.ris_count(), self.scenario.ue_count(), beams)
    }
}

/// Built-in two-RIS fixture: UE0 serves UE2 (then UE5) through RIS0 and UE1
/// serves UE3 (then UE4) through RIS1. All D2D paths are blocked, so every
/// rate comes from the surfaces and the exact/approximate gap isolates the
/// leakage of the other RIS's beams.
pub fn default_rate_fixture() -> RateFixture {
    let constants = RadioConstants::default();
    let z = Complex64::new(0.0, 0.0);
    let scenario = Scenario {
        ue_positions: vec![
            Point::new(-4.0, 6.0),
            Point::new(56.0, 6.0),
            Point::new(7.0, 10.0),
            Point::new(45.0, 12.0),
            Point::new(63.0, 11.0),
            Point::new(-9.0, 13.0),
        ],
        ris_positions: vec![Point::new(0.0, 0.0), Point::new(60.0, 0.0)],
        ris_orientations: vec![0.0, 0.0],
        geometry: ArrayGeometry::for_carrier(16, 0.5, constants.carrier).expect("valid default geometry"),
        constants,
        element_pattern: ElementPattern::default(),
        d2d_fading: vec![vec![z; 6]; 6],
        rng_seed: 0,
    };
    RateFixture {
        scenario,
        links: vec![RisBeam::new(0, 0, vec![2, 5]), RisBeam::new(1, 1, vec![3, 4])],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub elements: usize,
    pub um: usize,
    /// `None` marks the median row.
    pub seed: Option<u64>,
    pub sum_rate_exact: f64,
    pub sum_rate_approx: f64,
    pub relative_gap: f64,
}

fn ga_seed(base: u64, n: usize, ris: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((n as u64) << 32) ^ (ris as u64 + 1)
}

/// GA-designed profiles for every RIS of the fixture at `elements` elements.
pub fn design_fixture_beams(fixture: &RateFixture, asg: &Assignment, ga: &GaConfig) -> Result<Vec<Option<PhaseProfile>>> {
    let scn = &fixture.scenario;
    asg.beams()
        .iter()
        .map(|beam| {
            let aoa = scn.ris_angle(beam.ris, beam.tx)?;
            let targets = beam.receivers.iter().map(|&r| scn.ris_angle(beam.ris, r)).collect::<Result<Vec<_>>>()?;
            let task = BeamTask::new(scn.geometry, aoa, targets)?;
            Ok(Some(run_ga(&task, ga)?.best_profile))
        })
        .collect()
}

/// Exact and approximate sum rates of a fixed assignment, bit/s.
pub fn fixture_rates(scn: &Scenario, asg: &Assignment, profiles: &[Option<PhaseProfile>]) -> Result<(f64, f64)> {
    let (mut exact, mut approx) = (Vec::new(), Vec::new());
    for (tx, ris, rx) in asg.links() {
        exact.push(linear_to_db(sinr_linear(scn, asg, profiles, tx, rx, ris, SinrModel::Exact)?));
        approx.push(linear_to_db(sinr_linear(scn, asg, profiles, tx, rx, ris, SinrModel::Approx)?));
    }
    let b = scn.constants.bandwidth;
    Ok((sum_rate(&exact, b), sum_rate(&approx, b)))
}

fn relative_gap(exact: f64, approx: f64) -> f64 {
    if exact == approx {
        0.0
    } else {
        (exact - approx).abs() / exact.abs()
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let k = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[k]
    } else {
        (xs[k - 1] + xs[k]) / 2.0
    }
}

/// For each N, designs the beams with the GA over `seeds` GA seeds and
/// reports exact and approximate sum rates. Each N ends with a median row.
pub fn rate_experiment(fixture: &RateFixture, n_values: &[usize], um: usize, seeds: u64, ga: &GaConfig) -> Result<Vec<RateRow>> {
    fixture.validate()?;
    if um == 0 || seeds == 0 {
        return Err(Error::InvalidInput("rate experiment needs U_m ≥ 1 and at least one seed".into()));
    }
    let asg = fixture.assignment(um);
    let spacing_fraction = fixture.scenario.geometry.spacing / fixture.scenario.geometry.wavelength;
    let mut rows = Vec::new();
    for &n in n_values {
        let geometry = ArrayGeometry::for_carrier(n, spacing_fraction, fixture.scenario.constants.carrier)?;
        let sized = RateFixture { scenario: Scenario { geometry, ..fixture.scenario.clone() }, ..fixture.clone() };
        let per_seed: Vec<RateRow> = (0..seeds)
            .into_par_iter()
            .map(|seed| {
                let ga = ga.with_seed(ga_seed(seed ^ ga.seed, n, 0));
                let profiles = design_fixture_beams(&sized, &asg, &ga)?;
                let (exact, approx) = fixture_rates(&sized.scenario, &asg, &profiles)?;
                Ok(RateRow {
                    elements: n,
                    um,
                    seed: Some(seed),
                    sum_rate_exact: exact,
                    sum_rate_approx: approx,
                    relative_gap: relative_gap(exact, approx),
                })
            })
            .collect::<Result<_>>()?;
        let summary = RateRow {
            elements: n,
            um,
            seed: None,
            sum_rate_exact: median(per_seed.iter().map(|r| r.sum_rate_exact).collect()),
            sum_rate_approx: median(per_seed.iter().map(|r| r.sum_rate_approx).collect()),
            relative_gap: median(per_seed.iter().map(|r| r.relative_gap).collect()),
        };
        rows.extend(per_seed);
        rows.push(summary);
    }
    Ok(rows)
}

pub fn write_rates_csv<W: Write>(rows: &[RateRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["elements", "um", "seed", "sum_rate_exact", "sum_rate_approx", "relative_gap"])?;
    for r in rows {
        w.write_record([
            r.elements.to_string(),
            r.um.to_string(),
            r.seed.map_or_else(|| "median".to_string(), |s| s.to_string()),
            r.sum_rate_exact.to_string(),
            r.sum_rate_approx.to_string(),
            r.relative_gap.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Departure angles from −90° to 90° in 0.1° steps, as (degrees, radians).
pub fn azimuth_grid() -> impl Iterator<Item = (f64, f64)> {
    (0..=1800).map(|i| {
        let deg = -90.0 + i as f64 / 10.0;
        (deg, deg.to_radians())
    })
}

/// PDAF of `profile` over [`azimuth_grid`] for a fixed arrival angle.
pub fn beam_pattern(geometry: &ArrayGeometry, profile: &PhaseProfile, aoa: f64) -> Result<Vec<(f64, f64)>> {
    azimuth_grid().map(|(deg, rad)| Ok((deg, pdaf(geometry, profile, aoa, rad)?))).collect()
}

/// GA beam design from degrees, as used by the `beamplot` command.
pub fn design_beam(geometry: ArrayGeometry, aoa_deg: f64, targets_deg: &[f64], ga: &GaConfig) -> Result<GaOutcome> {
    let task = BeamTask::new(geometry, aoa_deg.to_radians(), targets_deg.iter().map(|t| t.to_radians()).collect())?;
    run_ga(&task, ga)
}

pub fn write_pattern_csv<W: Write>(pattern: &[(f64, f64)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["angle_deg", "pdaf"])?;
    for (deg, value) in pattern {
        w.write_record([format!("{deg:.1}"), value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean off-target PDAF relative to the weakest on-target PDAF. Off-target
/// means more than `exclusion` radians from every target.
pub fn sidelobe_ratio(geometry: &ArrayGeometry, profile: &PhaseProfile, aoa: f64, targets: &[f64], exclusion: f64) -> Result<f64> {
    let on = targets
        .iter()
        .map(|&t| pdaf(geometry, profile, aoa, t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mut off = Vec::new();
    for (_, rad) in azimuth_grid() {
        if targets.iter().all(|t| (rad - t).abs() > exclusion) {
            off.push(pdaf(geometry, profile, aoa, rad)?);
        }
    }
    if off.is_empty() {
        return Err(Error::InvalidInput("no off-target angles left".into()));
    }
    Ok(off.iter().sum::<f64>() / off.len() as f64 / on)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_base(area: f64) -> SweepBase {
        let mut solve = SolveConfig::default();
        solve.ga.generations = 20;
        solve.adam.iterations = 5;
        solve.outer_iterations = 1;
        SweepBase { ues: 6, riss: 1, elements: 6, area, solve }
    }

    #[test]
    fn single_point_sweep_has_one_row_and_one_mean() {
        let spec = SweepSpec {
            param: SweepParam::Ues,
            values: vec![6],
            seeds: 1,
            schemes: vec![Scheme::RisFree],
            base: quick_base(20.0),
        };
        let rows = sweep(&spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].seed, Some(0));
        assert_eq!(rows[1].seed, None);
        assert_eq!(rows[1].lambda2_final, rows[0].lambda2_final);
    }

    #[test]
    fn mean_rows_average_their_group() {
        let spec = SweepSpec {
            param: SweepParam::Um,
            values: vec![2, 1],
            seeds: 3,
            schemes: vec![Scheme::Proposed, Scheme::RisFree],
            base: quick_base(15.0),
        };
        let rows = sweep(&spec).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 4);
        for group in rows.chunks(4) {
            let mean = group[..3].iter().map(|r| r.lambda2_final).sum::<f64>() / 3.0;
            assert!((group[3].lambda2_final - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            assert_eq!(group[3].status, "ok=3 failed=0");
        }
        assert_eq!(rows[0].value, 1);
    }

    #[test]
    fn failed_points_are_recorded() {
        let spec = SweepSpec {
            param: SweepParam::Elements,
            values: vec![5],
            seeds: 2,
            schemes: vec![Scheme::DistributedSmall],
            base: quick_base(20.0),
        };
        let rows = sweep(&spec).unwrap();
        assert!(rows[0].status.starts_with("error"));
        assert!(rows[2].lambda2_final.is_nan());
        assert_eq!(rows[2].status, "ok=0 failed=2");
        let mut out = Vec::new();
        write_sweep_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("param,value,scheme,seed,lambda2_initial,lambda2_final,links_added,status\n"));
        assert!(text.lines().last().unwrap().starts_with("elements,5,distributed-small,mean,"));
    }

    #[test]
    fn zero_gain_fixture_has_no_gap() {
        let mut fixture = default_rate_fixture();
        fixture.scenario.element_pattern = ElementPattern::Off;
        let h = Complex64::new(0.8, 0.3);
        for a in 0..6 {
            for b in 0..6 {
                if a != b {
                    fixture.scenario.d2d_fading[a][b] = h;
                }
            }
        }
        let ga = GaConfig { generations: 5, ..GaConfig::default() };
        for um in [1, 2] {
            let rows = rate_experiment(&fixture, &[8], um, 2, &ga).unwrap();
            assert!(rows.iter().all(|r| r.relative_gap == 0.0));
        }
    }

    #[test]
    fn fixture_is_consistent() {
        let f = default_rate_fixture();
        f.validate().unwrap();
        assert_eq!(f.assignment(1).link_count(), 2);
        assert_eq!(f.assignment(2).link_count(), 4);
        let json = serde_json::to_string(&f).unwrap();
        let back: RateFixture = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn pattern_grid_and_csv() {
        let grid: Vec<_> = azimuth_grid().collect();
        assert_eq!(grid.len(), 1801);
        assert_eq!(grid[0].0, -90.0);
        assert_eq!(grid[900].0, 0.0);
        assert_eq!(grid[1800].0, 90.0);
        let g = ArrayGeometry::new(4, 0.05, 0.1).unwrap();
        let pattern = beam_pattern(&g, &PhaseProfile::zeros(4), 0.0).unwrap();
        assert_eq!(pattern[900].1, 16.0);
        let mut out = Vec::new();
        write_pattern_csv(&pattern[..2], &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("angle_deg,pdaf\n-90.0,"));
    }
}
