//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riscon::radio::{ElementPattern, PhaseProfile, Scenario};

fn element_gain(pattern: ElementPattern, theta: f64) -> f64 {
    match pattern {
        ElementPattern::Cosine { peak } if theta.abs() < PI / 2.0 => peak * theta.cos(),
        ElementPattern::Cosine { .. } => 0.0,
        ElementPattern::Isotropic => 1.0,
        ElementPattern::Off => 0.0,
    }
}

/// Azimuth of `ue` seen from RIS `m`, measured from the RIS broadside.
fn angle(scn: &Scenario, m: usize, ue: usize) -> f64 {
    let (p, q) = (scn.ris_positions[m], scn.ue_positions[ue]);
    let mut a = (q.x - p.x).atan2(q.y - p.y) - scn.ris_orientations.get(m).copied().unwrap_or(0.0);
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn dist(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// Received complex amplitude at `r` from `u` reflected by RIS `m`, plus the direct path.
pub fn amplitude(scn: &Scenario, u: usize, m: usize, r: usize, phi: &[f64]) -> Complex64 {
    let c = &scn.constants;
    let (pu, pr, pm) = (scn.ue_positions[u], scn.ue_positions[r], scn.ris_positions[m]);
    let direct = (c.ref_pathloss / dist(pu.x, pu.y, pr.x, pr.y).powi(2)).sqrt() * scn.d2d_fading[u][r];
    let (tu, tr) = (angle(scn, m, u), angle(scn, m, r));
    let beta_u = c.ref_pathloss / dist(pu.x, pu.y, pm.x, pm.y).powi(2);
    let beta_r = c.ref_pathloss / dist(pm.x, pm.y, pr.x, pr.y).powi(2);
    let xc = (beta_u * beta_r * element_gain(scn.element_pattern, tu) * element_gain(scn.element_pattern, tr)).sqrt();
    let k = 2.0 * PI * scn.geometry.spacing / scn.geometry.wavelength;
    let mut sum = Complex64::new(0.0, 0.0);
    for (n, &p) in phi.iter().enumerate() {
        let a_u = Complex64::from_polar(1.0, -k * n as f64 * tu.sin());
        let a_r = Complex64::from_polar(1.0, -k * n as f64 * tr.sin());
        sum += Complex64::from_polar(1.0, p) * a_u * a_r;
    }
    direct + xc * sum
}

/// Linear SINR of link (u, m, r) given every transmitter's (tx, ris, phases).
/// Interferers keep only their direct path unless `exact`.
pub fn sinr(scn: &Scenario, transmitters: &[(usize, usize, Vec<f64>)], u: usize, m: usize, r: usize, exact: bool) -> f64 {
    let p = scn.constants.tx_power;
    let own = transmitters.iter().find(|t| t.0 == u && t.1 == m).expect("link must be assigned");
    let signal = p * amplitude(scn, u, m, r, &own.2).norm_sqr();
    let mut interference = 0.0;
    for (tx, ris, phi) in transmitters {
        if *tx == u || *tx == r {
            continue;
        }
        let amp = if exact {
            amplitude(scn, *tx, *ris, r, phi)
        } else {
            let (a, b) = (scn.ue_positions[*tx], scn.ue_positions[r]);
            (scn.constants.ref_pathloss / dist(a.x, a.y, b.x, b.y).powi(2)).sqrt() * scn.d2d_fading[*tx][r]
        };
        interference += p * amp.norm_sqr();
    }
    signal / (interference + scn.constants.noise_power)
}

pub fn shannon_sum(sinrs: &[f64], bandwidth: f64) -> f64 {
    sinrs.iter().map(|g| bandwidth * (1.0 + g).log2()).sum()
}

/// Direct-sum PDAF `|Σ e^{j(φ_n − kΔn(sin θu + sin θr))}|²`.
pub fn pdaf(spacing_over_wavelength: f64, phi: &[f64], theta_u: f64, theta_r: f64) -> f64 {
    let k = 2.0 * PI * spacing_over_wavelength;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, p) in phi.iter().enumerate() {
        let arg = p - k * n as f64 * (theta_u.sin() + theta_r.sin());
        re += arg.cos();
        im += arg.sin();
    }
    re * re + im * im
}

pub fn phases(p: &Option<PhaseProfile>) -> Vec<f64> {
    p.as_ref().expect("assigned RIS has a profile").phases().to_vec()
}

/// Lower percentile bound of the mean of `xs` over `resamples` bootstrap draws.
pub fn bootstrap_lower(xs: &[f64], resamples: usize, alpha: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = xs.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| xs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    means[((alpha * resamples as f64).floor() as usize).min(resamples - 1)]
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        (v[k - 1] + v[k]) / 2.0
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Laplacian from an edge list, accumulating parallel edges.
pub fn laplacian(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut l = vec![vec![0.0; n]; n];
    for &(u, v, w) in edges {
        l[u][u] += w;
        l[v][v] += w;
        l[u][v] -= w;
        l[v][u] -= w;
    }
    l
}

/// Connectivity by union-find.
pub fn connected(n: usize, edges: &[(usize, usize, f64)]) -> bool {
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut groups = n;
    for &(u, v, w) in edges {
        if w <= 0.0 {
            continue;
        }
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a] = b;
            groups -= 1;
        }
    }
    groups <= 1
}
