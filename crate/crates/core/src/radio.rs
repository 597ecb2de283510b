//! Physical layer for a 2D multi-RIS D2D deployment.
//!
//! Every RIS is a horizontal ULA whose broadside points along +y (rotated by
//! an optional per-RIS orientation). Angles seen by a RIS are azimuths
//! measured from that broadside, positive towards +x.
//!
//! Path loss is `β0/d²` for every hop. The cascaded UE→RIS→UE amplitude is
//! `X^(c) = √(β_um β_mr G0(θ_u) G0(θ_r))` times the phased array sum
//! `Ψ·(a(θ_u) ⊙ a(θ_r))`; the direct amplitude is `X^(d) = √β_ur · h_ur`.
//! Received powers are squared magnitudes of the complex sum of the two.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::Assignment;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Wraps an angle into [0, 2π).
pub fn wrap_phase(phase: f64) -> f64 {
    let wrapped = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let a = wrap_phase(angle + PI) - PI;
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Azimuth of `to` as seen from `from`, against the +y broadside:
/// `atan2(dx, dy)` in (−π, π].
pub fn azimuth(from: Point, to: Point) -> Result<f64> {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentPoints { x: from.x, y: from.y });
    }
    Ok(dx.atan2(dy))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub elements: usize,
    /// Inter-element spacing Δ in metres.
    pub spacing: f64,
    /// Carrier wavelength λ in metres.
    pub wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(elements: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        let g = Self { elements, spacing, wavelength };
        g.validate()?;
        Ok(g)
    }

    /// `elements` at spacing `spacing_fraction · λ` for the given carrier.
    pub fn for_carrier(elements: usize, spacing_fraction: f64, carrier_hz: f64) -> Result<Self> {
        let wavelength = SPEED_OF_LIGHT / carrier_hz;
        Self::new(elements, spacing_fraction * wavelength, wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements == 0 {
            return Err(Error::InvalidInput("array needs at least one element".into()));
        }
        if !(self.spacing > 0.0 && self.wavelength > 0.0) {
            return Err(Error::InvalidInput("array spacing and wavelength must be positive".into()));
        }
        Ok(())
    }

    /// Phase progression per element for a unit change in sin θ: 2πΔ/λ.
    pub fn wavenumber_spacing(&self) -> f64 {
        TAU * self.spacing / self.wavelength
    }
}

/// `[1, e^{−jkΔ sin θ}, …, e^{−jkΔ(N−1) sin θ}]`.
pub fn array_response(geometry: &ArrayGeometry, angle: f64) -> Vec<Complex64> {
    let step = geometry.wavenumber_spacing() * angle.sin();
    (0..geometry.elements).map(|n| Complex64::from_polar(1.0, -step * n as f64)).collect()
}

/// Per-element RIS phase shifts, each kept in [0, 2π).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct PhaseProfile(Vec<f64>);

impl PhaseProfile {
    pub fn new(phases: impl IntoIterator<Item = f64>) -> Self {
        Self(phases.into_iter().map(wrap_phase).collect())
    }

    pub fn zeros(elements: usize) -> Self {
        Self(vec![0.0; elements])
    }

    /// The profile that co-phases every element for one (AoA, AoD) pair.
    pub fn aligned(geometry: &ArrayGeometry, aoa: f64, aod: f64) -> Self {
        let step = geometry.wavenumber_spacing() * (aoa.sin() + aod.sin());
        Self::new((0..geometry.elements).map(|n| step * n as f64))
    }

    pub fn phases(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Ψ = e^{jφ}` per element.
    pub fn weights(&self) -> Vec<Complex64> {
        self.0.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }
}

impl From<Vec<f64>> for PhaseProfile {
    fn from(phases: Vec<f64>) -> Self {
        Self::new(phases)
    }
}

impl From<PhaseProfile> for Vec<f64> {
    fn from(p: PhaseProfile) -> Self {
        p.0
    }
}

/// Complex array sum `Ψ·(a(θ_u) ⊙ a(θ_r))`.
pub fn array_gain(geometry: &ArrayGeometry, profile: &PhaseProfile, aoa: f64, aod: f64) -> Result<Complex64> {
    if profile.len() != geometry.elements {
        return Err(Error::LengthMismatch { expected: geometry.elements, got: profile.len() });
    }
    let step = geometry.wavenumber_spacing() * (aoa.sin() + aod.sin());
    Ok(profile
        .phases()
        .iter()
        .enumerate()
        .map(|(n, &phi)| Complex64::from_polar(1.0, phi - step * n as f64))
        .sum())
}

/// Power-domain array factor `|Ψ·(a(θ_u) ⊙ a(θ_r))|²`, in [0, N²].
pub fn pdaf(geometry: &ArrayGeometry, profile: &PhaseProfile, aoa: f64, aod: f64) -> Result<f64> {
    Ok(array_gain(geometry, profile, aoa, aod)?.norm_sqr())
}

/// Power radiation pattern of a single RIS element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ElementPattern {
    /// `peak·cos θ` in front of the surface, zero behind it.
    Cosine { peak: f64 },
    Isotropic,
    /// No reflection at all; used to switch the cascaded path off.
    Off,
}

impl Default for ElementPattern {
    fn default() -> Self {
        ElementPattern::Cosine { peak: 2.0 }
    }
}

impl ElementPattern {
    pub fn gain(&self, angle: f64) -> f64 {
        match *self {
            ElementPattern::Cosine { peak } => {
                if angle.abs() < FRAC_PI_2 {
                    (peak * angle.cos()).max(0.0)
                } else {
                    0.0
                }
            }
            ElementPattern::Isotropic => 1.0,
            ElementPattern::Off => 0.0,
        }
    }
}

/// Default element pattern G0(θ) = 2cos θ for |θ| < π/2.
pub fn element_gain(angle: f64) -> f64 {
    ElementPattern::default().gain(angle)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConstants {
    /// Transmit power p in watts.
    pub tx_power: f64,
    /// Path loss β0 at the 1 m reference distance.
    pub ref_pathloss: f64,
    /// Noise power σ² = N0 in watts.
    pub noise_power: f64,
    pub carrier: f64,
    pub bandwidth: f64,
    pub d2d_snr_threshold_db: f64,
    pub ris_sinr_threshold_db: f64,
}

impl Default for RadioConstants {
    fn default() -> Self {
        Self {
            tx_power: 1.0,
            ref_pathloss: 1e-6,
            noise_power: dbm_to_watts(-130.0),
            carrier: 3e9,
            bandwidth: 250e3,
            d2d_snr_threshold_db: 83.0,
            ris_sinr_threshold_db: 30.0,
        }
    }
}

impl RadioConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tx_power, self.ref_pathloss, self.noise_power, self.carrier, self.bandwidth];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput("radio constants must be positive and finite".into()));
        }
        if !(self.d2d_snr_threshold_db.is_finite() && self.ris_sinr_threshold_db.is_finite()) {
            return Err(Error::InvalidInput("SNR/SINR thresholds must be finite".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier
    }

    /// β0/d².
    pub fn path_loss(&self, distance: f64) -> f64 {
        self.ref_pathloss / (distance * distance)
    }
}

/// The world state: where everything is and how the air behaves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub ue_positions: Vec<Point>,
    pub ris_positions: Vec<Point>,
    /// Rotation of each RIS broadside away from +y, radians.
    #[serde(default)]
    pub ris_orientations: Vec<f64>,
    pub geometry: ArrayGeometry,
    pub constants: RadioConstants,
    #[serde(default)]
    pub element_pattern: ElementPattern,
    /// U×U small-scale D2D coefficients, stored as `[re, im]` pairs.
    pub d2d_fading: Vec<Vec<Complex64>>,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn ue_count(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn ris_count(&self) -> usize {
        self.ris_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.constants.validate()?;
        let u = self.ue_count();
        if self.d2d_fading.len() != u || self.d2d_fading.iter().any(|row| row.len() != u) {
            return Err(Error::InvalidInput(format!("d2d_fading must be {u}x{u}")));
        }
        if !self.ris_orientations.is_empty() && self.ris_orientations.len() != self.ris_count() {
            return Err(Error::LengthMismatch { expected: self.ris_count(), got: self.ris_orientations.len() });
        }
        for a in 0..u {
            for b in (a + 1)..u {
                if self.ue_positions[a].distance(self.ue_positions[b]) <= 0.0 {
                    let p = self.ue_positions[a];
                    return Err(Error::CoincidentPoints { x: p.x, y: p.y });
                }
            }
        }
        Ok(())
    }

    pub fn orientation(&self, ris: usize) -> f64 {
        self.ris_orientations.get(ris).copied().unwrap_or(0.0)
    }

    /// Azimuth of a UE as seen by a RIS, relative to that RIS's broadside.
    pub fn ris_angle(&self, ris: usize, ue: usize) -> Result<f64> {
        Ok(wrap_angle(azimuth(self.ris_positions[ris], self.ue_positions[ue])? - self.orientation(ris)))
    }

    pub fn ue_distance(&self, a: usize, b: usize) -> f64 {
        self.ue_positions[a].distance(self.ue_positions[b])
    }

    pub fn ris_distance(&self, ris: usize, ue: usize) -> Result<f64> {
        let d = self.ris_positions[ris].distance(self.ue_positions[ue]);
        if d > 0.0 {
            Ok(d)
        } else {
            let p = self.ue_positions[ue];
            Err(Error::CoincidentPoints { x: p.x, y: p.y })
        }
    }

    /// Direct amplitude `X^(d) = √β_ur · h_ur`.
    pub fn direct_amplitude(&self, u: usize, r: usize) -> Complex64 {
        let beta = self.constants.path_loss(self.ue_distance(u, r));
        self.d2d_fading[u][r] * beta.sqrt()
    }

    /// Cascaded amplitude `X^(c) = √(β_um β_mr G0(θ_u) G0(θ_r))`.
    pub fn cascade_amplitude(&self, u: usize, ris: usize, r: usize) -> Result<f64> {
        let c = &self.constants;
        let beta_in = c.path_loss(self.ris_distance(ris, u)?);
        let beta_out = c.path_loss(self.ris_distance(ris, r)?);
        let g_in = self.element_pattern.gain(self.ris_angle(ris, u)?);
        let g_out = self.element_pattern.gain(self.ris_angle(ris, r)?);
        Ok((beta_in * beta_out * g_in * g_out).sqrt())
    }

    /// Complex amplitude from `u` at `r` when `u` is served by `ris` with
    /// `profile`: direct term plus the cascaded term.
    pub fn link_amplitude(&self, u: usize, ris: usize, r: usize, profile: &PhaseProfile) -> Result<Complex64> {
        let cascade = self.cascade_amplitude(u, ris, r)?;
        let array = array_gain(&self.geometry, profile, self.ris_angle(ris, u)?, self.ris_angle(ris, r)?)?;
        Ok(self.direct_amplitude(u, r) + array * cascade)
    }

    pub fn with_ris_positions(&self, positions: &[Point]) -> Self {
        Self { ris_positions: positions.to_vec(), ..self.clone() }
    }
}

/// Linear D2D SNR `p·(β0/d²)·|h|²/N0`.
pub fn d2d_snr_linear(scn: &Scenario, u: usize, r: usize) -> Result<f64> {
    if u == r {
        return Err(Error::InvalidInput(format!("D2D SNR needs two distinct UEs, got {u} twice")));
    }
    let c = &scn.constants;
    Ok(c.tx_power * scn.direct_amplitude(u, r).norm_sqr() / c.noise_power)
}

/// D2D SNR in dB; `-inf` marks an absent link.
pub fn d2d_snr(scn: &Scenario, u: usize, r: usize) -> Result<f64> {
    Ok(linear_to_db(d2d_snr_linear(scn, u, r)?))
}

/// Which interference model an SINR evaluation uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinrModel {
    /// Interferers contribute their direct and cascaded paths.
    Exact,
    /// Interferers contribute their direct paths only.
    #[default]
    Approx,
}

/// Linear SINR at receiver `r` for the link `u → RIS m → r`.
///
/// Every other transmitter in the assignment interferes through its own
/// RIS. A transmitter never interferes with itself.
pub fn sinr_linear(
    scn: &Scenario,
    assignment: &Assignment,
    profiles: &[Option<PhaseProfile>],
    u: usize,
    r: usize,
    m: usize,
    model: SinrModel,
) -> Result<f64> {
    let unassigned = || Error::Unassigned { tx: u, ris: m, rx: r };
    let beam = assignment.beam(m).ok_or_else(unassigned)?;
    if beam.tx != u || !beam.receivers.contains(&r) {
        return Err(unassigned());
    }
    let profile = profiles.get(m).and_then(Option::as_ref).ok_or_else(unassigned)?;
    let p = scn.constants.tx_power;

    let signal = p * scn.link_amplitude(u, m, r, profile)?.norm_sqr();

    let mut interference = 0.0;
    for other in assignment.beams() {
        if other.tx == u || other.tx == r {
            continue;
        }
        let amplitude = match model {
            SinrModel::Approx => scn.direct_amplitude(other.tx, r),
            SinrModel::Exact => {
                let other_profile = profiles
                    .get(other.ris)
                    .and_then(Option::as_ref)
                    .ok_or(Error::Unassigned { tx: other.tx, ris: other.ris, rx: r })?;
                scn.link_amplitude(other.tx, other.ris, r, other_profile)?
            }
        };
        interference += p * amplitude.norm_sqr();
    }
    Ok(signal / (interference + scn.constants.noise_power))
}

/// SINR with every interferer's direct and cascaded paths, in dB.
pub fn exact_sinr(
    scn: &Scenario,
    assignment: &Assignment,
    profiles: &[Option<PhaseProfile>],
    u: usize,
    r: usize,
    m: usize,
) -> Result<f64> {
    sinr_linear(scn, assignment, profiles, u, r, m, SinrModel::Exact).map(linear_to_db)
}

/// SINR keeping only the interferers' direct paths, in dB.
pub fn approx_sinr(
    scn: &Scenario,
    assignment: &Assignment,
    profiles: &[Option<PhaseProfile>],
    u: usize,
    r: usize,
    m: usize,
) -> Result<f64> {
    sinr_linear(scn, assignment, profiles, u, r, m, SinrModel::Approx).map(linear_to_db)
}

/// Shannon sum rate `Σ B·log2(1 + γ)` in bit/s over SINRs given in dB.
pub fn sum_rate(sinrs_db: &[f64], bandwidth: f64) -> f64 {
    sinrs_db.iter().map(|&g| bandwidth * (1.0 + db_to_linear(g)).log2()).sum()
}
