mod common;

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use riscon::ga::blend;
use riscon::graph::{lambda2, Edge, EdgeKind, NetworkGraph};
use riscon::radio::{d2d_snr, pdaf, sinr_linear, wrap_angle, wrap_phase, ArrayGeometry, PhaseProfile, Point, SinrModel};
use riscon::selection::{Assignment, RisBeam};
use riscon::solve::{generate_scenario, ScenarioSpec};

fn phases(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..TAU, n)
}

/// Scenario plus an assignment where each RIS serves a distinct transmitter
/// and up to two receivers drawn from the remaining UEs.
fn assigned(
    seed: u64,
    riss: usize,
    pick: &[usize],
    phi: &[Vec<f64>],
) -> (riscon::radio::Scenario, Assignment, Vec<Option<PhaseProfile>>) {
    let ues = 3 * riss + 2;
    let scn = generate_scenario(&ScenarioSpec::new(ues, riss, 20.0, seed).with_elements(8)).unwrap();
    let mut beams = Vec::new();
    let mut profiles = Vec::new();
    for m in 0..riss {
        let tx = 3 * m;
        let count = 1 + pick[m] % 2;
        let receivers = (1..=count).map(|k| 3 * m + k).collect();
        beams.push(RisBeam::new(m, tx, receivers));
        profiles.push(Some(PhaseProfile::new(phi[m].iter().copied())));
    }
    (scn, Assignment::from_beams(riss, ues, beams), profiles)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pdaf_is_bounded_and_matches_direct_sum(phi in phases(12), a in -1.5f64..1.5, b in -1.5f64..1.5) {
        let g = ArrayGeometry::new(12, 0.05, 0.1).unwrap();
        let p = PhaseProfile::new(phi.iter().copied());
        let v = pdaf(&g, &p, a, b).unwrap();
        prop_assert!((-1e-9..=144.0 + 1e-9).contains(&v));
        prop_assert!((v - common::pdaf(0.5, &phi, a, b)).abs() <= 1e-9 * 144.0);
    }

    #[test]
    fn pdaf_depends_on_the_sine_sum_only(phi in phases(10), a in -1.2f64..1.2, b in -1.2f64..1.2) {
        let g = ArrayGeometry::new(10, 0.05, 0.1).unwrap();
        let p = PhaseProfile::new(phi);
        let s = a.sin() + b.sin();
        // move weight between the two angles while keeping sin a + sin b fixed
        let a2 = (s / 2.0).asin();
        let v1 = pdaf(&g, &p, a, b).unwrap();
        let v2 = pdaf(&g, &p, a2, a2).unwrap();
        prop_assume!(s.abs() <= 2.0);
        prop_assert!((v1 - v2).abs() <= 1e-9 * 100.0);
    }

    #[test]
    fn sinr_matches_reference(seed in 0u64..1000, riss in 1usize..=3, pick in prop::collection::vec(0usize..4, 3),
                              phi in prop::collection::vec(phases(8), 3)) {
        let (scn, asg, profiles) = assigned(seed, riss, &pick, &phi);
        let tx: Vec<(usize, usize, Vec<f64>)> =
            asg.beams().iter().map(|b| (b.tx, b.ris, phi[b.ris].clone())).collect();
        for (u, m, r) in asg.links() {
            for (model, exact) in [(SinrModel::Exact, true), (SinrModel::Approx, false)] {
                let got = sinr_linear(&scn, &asg, &profiles, u, r, m, model).unwrap();
                let want = common::sinr(&scn, &tx, u, m, r, exact);
                prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-300), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn single_transmitter_models_agree(seed in 0u64..1000, pick in prop::collection::vec(0usize..4, 1),
                                       phi in prop::collection::vec(phases(8), 1)) {
        let (scn, asg, profiles) = assigned(seed, 1, &pick, &phi);
        for (u, m, r) in asg.links() {
            let e = sinr_linear(&scn, &asg, &profiles, u, r, m, SinrModel::Exact).unwrap();
            let a = sinr_linear(&scn, &asg, &profiles, u, r, m, SinrModel::Approx).unwrap();
            prop_assert_eq!(e, a);
        }
    }

    #[test]
    fn d2d_snr_falls_twenty_db_per_decade(seed in 0u64..1000, scale in 1.5f64..10.0) {
        let near = generate_scenario(&ScenarioSpec::new(3, 1, 10.0, seed)).unwrap();
        let mut far = near.clone();
        let origin = far.ue_positions[0];
        far.ue_positions = far
            .ue_positions
            .iter()
            .map(|p| Point { x: origin.x + scale * (p.x - origin.x), y: origin.y + scale * (p.y - origin.y) })
            .collect();
        let drop = d2d_snr(&near, 0, 1).unwrap() - d2d_snr(&far, 0, 1).unwrap();
        prop_assert!((drop - 20.0 * scale.log10()).abs() <= 1e-9);
    }

    #[test]
    fn adding_an_edge_never_lowers_lambda2(
        n in 3usize..9,
        raw in prop::collection::vec((0usize..9, 0usize..9, 0.1f64..1e8), 1..20),
        extra in (0usize..9, 0usize..9, 1e-3f64..1e8),
    ) {
        let pairs: BTreeMap<(usize, usize), f64> = raw
            .iter()
            .filter(|(u, v, _)| u % n != v % n)
            .map(|&(u, v, w)| (((u % n).min(v % n), (u % n).max(v % n)), w))
            .collect();
        let edges: Vec<Edge> = pairs.into_iter().map(|((u, v), w)| Edge { u, v, w, kind: EdgeKind::D2d }).collect();
        let (u, v) = (extra.0 % n, extra.1 % n);
        prop_assume!(u != v);
        let before = NetworkGraph::with_edges(n, edges.clone()).unwrap();
        let mut after = before.clone();
        after.add_edge(u, v, extra.2, EdgeKind::RisAided).unwrap();
        let (l0, l1) = (lambda2(&before).unwrap(), lambda2(&after).unwrap());
        prop_assert!(l1 >= l0 - 1e-9 * l0.max(1.0), "{l0} -> {l1}");
    }

    #[test]
    fn wraps_land_in_their_ranges(x in -1e4f64..1e4) {
        let p = wrap_phase(x);
        prop_assert!((0.0..TAU).contains(&p));
        prop_assert!(((p - x) / TAU - ((p - x) / TAU).round()).abs() < 1e-9);
        let a = wrap_angle(x);
        prop_assert!(a > -PI && a <= PI);
        prop_assert!((a - p).rem_euclid(TAU).min(TAU - (a - p).rem_euclid(TAU)) < 1e-9);
    }

    #[test]
    fn blend_stays_wrapped(a in phases(6), b in phases(6), w in 0.0f64..=1.0) {
        let (x, y) = blend(&PhaseProfile::new(a), &PhaseProfile::new(b), w);
        for v in x.phases().iter().chain(y.phases()) {
            prop_assert!((0.0..TAU).contains(v));
        }
    }
}
