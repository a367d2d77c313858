//! Hamiltonian assembly at three fidelity tiers, local gauge
//! transformations, and the two-photon effective coupling.
//!
//! Convention: a coupling of Rabi amplitude Ω and phase φ on pair (k,l)
//! contributes (Ω/2)e^{iφ} to the (k,l) entry and its conjugate to (l,k).
//! The gauge-invariant loop phase is Φ = arg(H₀₁ H₁₂ H₂₀) = φ₀₁ + φ₁₂ + φ₂₀,
//! with φ₂₀ = −φ₀₂. Transitionless driving of the dark state requires
//! Φ = −π/2.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulses::{CdEnvelope, GaussianPulse, StirapPair};
use crate::su3::{pair_rotation, wrap_phase, Mat3, Pair, QutritParams, C64};

/// Ratio of the 1–2 to the 0–1 dipole matrix element in a weakly anharmonic
/// transmon.
pub const TRANSMON_MATRIX_ELEMENT_RATIO: f64 = SQRT_2;

/// A tone counts as resonant with a transition when it lies within this
/// fraction of Δ from it.
pub const RESONANCE_WINDOW_FRACTION: f64 = 0.5;

/// Allowed mismatch of 2ω̃ − (ω₀₁ + ω₁₂) for a two-photon tone (rad/ns).
pub const TWO_PHOTON_RESONANCE_TOL: f64 = 1e-9;

/// Time-dependent Hamiltonian in rad/ns.
pub trait Hamiltonian: Sync {
    fn at(&self, t: f64) -> Mat3;
}

impl<F> Hamiltonian for F
where
    F: Fn(f64) -> Mat3 + Sync,
{
    fn at(&self, t: f64) -> Mat3 {
        self(t)
    }
}

fn hermitian_fill(m: &mut Mat3) {
    m[(1, 0)] = m[(0, 1)].conj();
    m[(2, 1)] = m[(1, 2)].conj();
    m[(2, 0)] = m[(0, 2)].conj();
}

/// Phases of the three drive tones. φ₀₂ = 2φ̃ + π follows from the
/// two-photon process.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LoopPhases {
    pub phi01: f64,
    pub phi12: f64,
    pub phi_tilde: f64,
}

impl LoopPhases {
    pub fn new(phi01: f64, phi12: f64, phi_tilde: f64) -> Self {
        Self { phi01, phi12, phi_tilde }
    }

    /// Keep φ₀₁, φ₁₂ and choose φ̃ so that the loop phase equals `loop_phase`.
    pub fn with_loop_phase(phi01: f64, phi12: f64, loop_phase: f64) -> Self {
        Self { phi01, phi12, phi_tilde: 0.5 * (phi01 + phi12 - loop_phase - PI) }
    }

    /// Gauge with φ₀₁ = φ₁₂ = 0.
    pub fn gauge_fixed(loop_phase: f64) -> Self {
        Self::with_loop_phase(0.0, 0.0, loop_phase)
    }

    pub fn phi02(&self) -> f64 {
        wrap_phase(2.0 * self.phi_tilde + PI)
    }

    pub fn phi20(&self) -> f64 {
        -self.phi02()
    }

    /// Φ = φ₀₁ + φ₁₂ + φ₂₀ in (−π, π].
    pub fn loop_phase(&self) -> f64 {
        wrap_phase(self.phi01 + self.phi12 + self.phi20())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityTier {
    /// Loop Hamiltonian with the effective two-photon coupling.
    #[default]
    IdealRwa,
    /// Sum-frequency terms dropped; beat terms at ±Δ and ±(ω₀₁ − ω₁₂) kept.
    CrossCouplingRwa,
    /// Interaction picture with every oscillating term retained.
    FullInteractionPicture,
}

impl FidelityTier {
    /// Default fixed RK4 step (ns).
    pub fn default_dt(&self) -> f64 {
        match self {
            Self::IdealRwa => 0.02,
            Self::CrossCouplingRwa => 0.005,
            Self::FullInteractionPicture => 0.0002,
        }
    }
}

pub fn build_stirap_rwa(pair: &StirapPair, phases: &LoopPhases, t: f64) -> Mat3 {
    let mut h = Mat3::zeros();
    h[(0, 1)] = C64::from_polar(0.5 * pair.omega01(t), phases.phi01);
    h[(1, 2)] = C64::from_polar(0.5 * pair.omega12(t), phases.phi12);
    hermitian_fill(&mut h);
    h
}

pub fn build_loop_rwa(pair: &StirapPair, cd: &CdEnvelope, phases: &LoopPhases, t: f64) -> Mat3 {
    let mut h = build_stirap_rwa(pair, phases, t);
    let c = C64::from_polar(0.5 * cd.value(t), phases.phi02());
    h[(0, 2)] = c;
    h[(2, 0)] = c.conj();
    h
}

/// Ideal loop Hamiltonian H₀(t) + H_cd(t); the counterdiabatic term is
/// optional (plain STIRAP when absent).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopRwa {
    pub pair: StirapPair,
    pub cd: Option<CdEnvelope>,
    pub phases: LoopPhases,
}

impl Hamiltonian for LoopRwa {
    fn at(&self, t: f64) -> Mat3 {
        match &self.cd {
            Some(cd) => build_loop_rwa(&self.pair, cd, &self.phases, t),
            None => build_stirap_rwa(&self.pair, &self.phases, t),
        }
    }
}

/// U H U† with U = Σₖ e^{−iχₖ}|k⟩⟨k|.
pub fn gauge_transform(h: &Mat3, chi: [f64; 3]) -> Mat3 {
    Mat3::from_fn(|k, l| h[(k, l)] * C64::from_polar(1.0, chi[l] - chi[k]))
}

/// A Hamiltonian path seen through a static gauge transformation.
#[derive(Debug, Clone, Copy)]
pub struct Gauged<H> {
    pub inner: H,
    pub chi: [f64; 3],
}

impl<H: Hamiltonian> Hamiltonian for Gauged<H> {
    fn at(&self, t: f64) -> Mat3 {
        gauge_transform(&self.inner.at(t), self.chi)
    }
}

/// Φ = arg(H₀₁ H₁₂ H₂₀) in (−π, π].
pub fn extract_loop_phase(h: &Mat3) -> Result<f64> {
    for (k, l) in [(0, 1), (1, 2), (2, 0)] {
        if h[(k, l)].norm() == 0.0 {
            return Err(Error::UndefinedLoopPhase(k.min(l), k.max(l)));
        }
    }
    Ok(wrap_phase((h[(0, 1)] * h[(1, 2)] * h[(2, 0)]).arg()))
}

/// Effective 0–2 coupling from adiabatic elimination of level 1:
/// Ω₀₂ = Ω̃₀₁Ω̃₁₂/(2Δ), φ₀₂ = 2φ̃ + π.
pub fn two_photon_effective(omega_t01: f64, omega_t12: f64, delta: f64, phi_tilde: f64) -> Result<(f64, f64)> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::param("delta", "two-photon detuning must be nonzero"));
    }
    if delta < 0.0 {
        return Err(Error::param("delta", format!("must be > 0, got {delta}")));
    }
    if omega_t01.abs().max(omega_t12.abs()) > 0.5 * delta {
        log::warn!(
            "two-photon drive outside the perturbative regime: max(Ω̃) = {:.4} rad/ns > Δ/2 = {:.4} rad/ns",
            omega_t01.abs().max(omega_t12.abs()),
            0.5 * delta
        );
    }
    Ok((omega_t01 * omega_t12 / (2.0 * delta), wrap_phase(2.0 * phi_tilde + PI)))
}

/// Ω̃₀₁ required for a target Ω₀₂ when Ω̃₁₂ = ratio · Ω̃₀₁.
pub fn invert_two_photon(omega02: f64, delta: f64, ratio: f64) -> Result<f64> {
    if delta <= 0.0 || ratio <= 0.0 || omega02 < 0.0 {
        return Err(Error::param("omega02/delta/ratio", "require omega02 >= 0, delta > 0, ratio > 0"));
    }
    Ok((2.0 * delta * omega02 / ratio).sqrt())
}

/// Time-dependent amplitude of one tone (rad/ns, before coupling factors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    /// Gaussian clamped to zero outside `window`.
    Gaussian { pulse: GaussianPulse, window: (f64, f64) },
    /// Two-photon amplitude whose effective coupling tracks a CD envelope:
    /// E(t) = √(gain · Ω₀₂(t)), gain = 2Δ/(c₀₁c₁₂).
    TwoPhotonCd { cd: CdEnvelope, gain: f64 },
    /// Constant amplitude, optionally gated to a window.
    Constant { value: f64, window: Option<(f64, f64)> },
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Gaussian { pulse, window } => {
                if t >= window.0 && t <= window.1 {
                    pulse.value(t)
                } else {
                    0.0
                }
            }
            Self::TwoPhotonCd { cd, gain } => (gain * cd.value(t)).max(0.0).sqrt(),
            Self::Constant { value, window } => match window {
                Some((a, b)) if t < *a || t > *b => 0.0,
                _ => *value,
            },
        }
    }

    pub fn peak(&self) -> f64 {
        match self {
            Self::Gaussian { pulse, .. } => pulse.peak,
            Self::TwoPhotonCd { cd, gain } => (gain * cd.peak()).sqrt(),
            Self::Constant { value, .. } => value.abs(),
        }
    }
}

/// One microwave tone: E(t) cos(ωt + φ), coupling into 0–1 with factor
/// `coupling01` and into 1–2 with factor `coupling12`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveTone {
    pub carrier: f64,
    pub phase: f64,
    pub envelope: Envelope,
    pub coupling01: f64,
    pub coupling12: f64,
}

impl DriveTone {
    /// Pump tone at ω₀₁ + detuning driving Ω₀₁(t); its cross-coupling into
    /// 1–2 carries the factor √2.
    pub fn pump(pair: &StirapPair, params: &QutritParams, phase: f64, detuning: f64) -> Self {
        Self {
            carrier: params.omega01 + detuning,
            phase,
            envelope: Envelope::Gaussian { pulse: pair.pump(), window: pair.truncation_window() },
            coupling01: 1.0,
            coupling12: TRANSMON_MATRIX_ELEMENT_RATIO,
        }
    }

    /// Stokes tone at ω₁₂ + detuning driving Ω₁₂(t); leaks into 0–1 with
    /// factor 1/√2.
    pub fn stokes(pair: &StirapPair, params: &QutritParams, phase: f64, detuning: f64) -> Self {
        Self {
            carrier: params.omega12 + detuning,
            phase,
            envelope: Envelope::Gaussian { pulse: pair.stokes(), window: pair.truncation_window() },
            coupling01: 1.0 / TRANSMON_MATRIX_ELEMENT_RATIO,
            coupling12: 1.0,
        }
    }

    /// Two-photon tone at ω̃ = (ω₀₁ + ω₁₂)/2 whose effective 0–2 coupling
    /// reproduces `cd`. The envelope is Ω̃₀₁(t) with Ω̃₁₂ = √2 Ω̃₀₁.
    pub fn two_photon(cd: &CdEnvelope, params: &QutritParams, phi_tilde: f64) -> Result<Self> {
        if cd.total_area() < 0.0 {
            return Err(Error::Config(
                "a two-photon tone cannot realize a negative counterdiabatic envelope (t_s > 0)".into(),
            ));
        }
        let gain = 2.0 * params.delta() / TRANSMON_MATRIX_ELEMENT_RATIO;
        Ok(Self {
            carrier: params.two_photon_carrier(),
            phase: phi_tilde,
            envelope: Envelope::TwoPhotonCd { cd: *cd, gain },
            coupling01: 1.0,
            coupling12: TRANSMON_MATRIX_ELEMENT_RATIO,
        })
    }

    /// Constant-amplitude two-photon tone with Ω̃₀₁ = `omega_t01`.
    pub fn two_photon_constant(omega_t01: f64, params: &QutritParams, phi_tilde: f64) -> Self {
        Self {
            carrier: params.two_photon_carrier(),
            phase: phi_tilde,
            envelope: Envelope::Constant { value: omega_t01, window: None },
            coupling01: 1.0,
            coupling12: TRANSMON_MATRIX_ELEMENT_RATIO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToneClass {
    Resonant01,
    Resonant12,
    TwoPhoton,
}

pub fn classify_tone(tone: &DriveTone, params: &QutritParams) -> Result<ToneClass> {
    if !(tone.carrier > 0.0) {
        return Err(Error::Config(format!("tone carrier must be > 0, got {}", tone.carrier)));
    }
    let window = RESONANCE_WINDOW_FRACTION * params.delta();
    if (tone.carrier - params.omega01).abs() < window {
        return Ok(ToneClass::Resonant01);
    }
    if (tone.carrier - params.omega12).abs() < window {
        return Ok(ToneClass::Resonant12);
    }
    let mismatch = 2.0 * tone.carrier - params.omega02();
    if mismatch.abs() <= TWO_PHOTON_RESONANCE_TOL {
        return Ok(ToneClass::TwoPhoton);
    }
    Err(Error::Config(format!(
        "tone at {:.6} rad/ns is neither resonant with a transition nor satisfies 2ω̃ = ω01 + ω12 (mismatch {mismatch:e} rad/ns)",
        tone.carrier
    )))
}

/// Tone-level Hamiltonian evaluated at one of the three fidelity tiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneModel {
    tones: Vec<(DriveTone, ToneClass)>,
    params: QutritParams,
    tier: FidelityTier,
}

impl ToneModel {
    pub fn new(tones: &[DriveTone], params: QutritParams, tier: FidelityTier) -> Result<Self> {
        let tones = tones
            .iter()
            .map(|t| classify_tone(t, &params).map(|c| (*t, c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tones, params, tier })
    }

    pub fn tier(&self) -> FidelityTier {
        self.tier
    }

    pub fn tones(&self) -> impl Iterator<Item = &DriveTone> {
        self.tones.iter().map(|(t, _)| t)
    }
}

impl Hamiltonian for ToneModel {
    fn at(&self, t: f64) -> Mat3 {
        let p = &self.params;
        let mut h = Mat3::zeros();
        match self.tier {
            FidelityTier::FullInteractionPicture => {
                let rot01 = C64::from_polar(1.0, -p.omega01 * t);
                let rot12 = C64::from_polar(1.0, -p.omega12 * t);
                for (tone, _) in &self.tones {
                    let e = tone.envelope.value(t);
                    if e == 0.0 {
                        continue;
                    }
                    let drive = e * (tone.carrier * t + tone.phase).cos();
                    h[(0, 1)] += rot01 * (tone.coupling01 * drive);
                    h[(1, 2)] += rot12 * (tone.coupling12 * drive);
                }
            }
            FidelityTier::CrossCouplingRwa => {
                for (tone, _) in &self.tones {
                    let e = tone.envelope.value(t);
                    if e == 0.0 {
                        continue;
                    }
                    h[(0, 1)] += C64::from_polar(
                        0.5 * tone.coupling01 * e,
                        (tone.carrier - p.omega01) * t + tone.phase,
                    );
                    h[(1, 2)] += C64::from_polar(
                        0.5 * tone.coupling12 * e,
                        (tone.carrier - p.omega12) * t + tone.phase,
                    );
                }
            }
            FidelityTier::IdealRwa => {
                for (tone, class) in &self.tones {
                    let e = tone.envelope.value(t);
                    if e == 0.0 {
                        continue;
                    }
                    match class {
                        ToneClass::Resonant01 => {
                            h[(0, 1)] += C64::from_polar(
                                0.5 * tone.coupling01 * e,
                                (tone.carrier - p.omega01) * t + tone.phase,
                            );
                        }
                        ToneClass::Resonant12 => {
                            h[(1, 2)] += C64::from_polar(
                                0.5 * tone.coupling12 * e,
                                (tone.carrier - p.omega12) * t + tone.phase,
                            );
                        }
                        ToneClass::TwoPhoton => {
                            let detuning = p.omega01 - tone.carrier;
                            let omega02 = tone.coupling01 * e * tone.coupling12 * e / (2.0 * detuning);
                            h[(0, 2)] += C64::from_polar(
                                0.5 * omega02,
                                2.0 * tone.phase + PI + (2.0 * tone.carrier - p.omega02()) * t,
                            );
                        }
                    }
                }
            }
        }
        hermitian_fill(&mut h);
        h
    }
}

/// Evaluate the tone Hamiltonian at `t` for the requested tier.
pub fn build_full_interaction(tones: &[DriveTone], params: &QutritParams, t: f64, tier: FidelityTier) -> Result<Mat3> {
    Ok(ToneModel::new(tones, *params, tier)?.at(t))
}

/// Level shifts (rad/ns) from the rotating parts of every two-photon tone at
/// its peak amplitude, to second order.
pub fn stark_level_shifts(params: &QutritParams, tones: &[DriveTone]) -> Result<[f64; 3]> {
    let mut shifts = [0.0; 3];
    for tone in tones {
        if classify_tone(tone, params)? != ToneClass::TwoPhoton {
            continue;
        }
        let e = tone.envelope.peak();
        for (lower, coupling, transition) in [(0, tone.coupling01, params.omega01), (1, tone.coupling12, params.omega12)] {
            let g = 0.5 * coupling * e;
            let detuning = tone.carrier - transition;
            shifts[lower] += g * g / detuning;
            shifts[lower + 1] -= g * g / detuning;
        }
    }
    Ok(shifts)
}

/// Static carrier offsets (δ₀₁, δ₁₂) that put the STIRAP tones on resonance
/// with the ac-Stark-shifted levels.
pub fn stark_offset_correction(params: &QutritParams, tones: &[DriveTone]) -> Result<(f64, f64)> {
    let s = stark_level_shifts(params, tones)?;
    Ok((s[1] - s[0], s[2] - s[1]))
}

/// Convenience: the (k,l) coupling operator (Ω/2) n̂·𝚲 for a pair.
pub fn coupling_term(omega: f64, phase: f64, pair: Pair) -> Mat3 {
    pair_rotation(phase, pair) * C64::from(0.5 * omega)
}
