//! A complete saSTIRAP configuration and its evaluation.

use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_density, evolve_state, IntegratorConfig, LindbladSpec, Trajectory};
use crate::error::{Error, Result};
use crate::hamiltonians::{
    stark_offset_correction, DriveTone, FidelityTier, Hamiltonian, LoopPhases, LoopRwa, ToneModel,
};
use crate::metrics::{cd_area, qsl_for_thresholds, stirap_area, transfer_time, TransferReport, TransferThresholds};
use crate::pulses::{cd_envelope_analytic, CdEnvelope, StirapPair};
use crate::su3::{DensityMatrix, Mat3, QutritParams, StateVector, C64};

/// Time after the end of the pulses at which the state is read out (ns).
pub const DEFAULT_READOUT_MARGIN: f64 = 20.0;

/// How the counterdiabatic 0–2 coupling is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdMode {
    Off,
    /// Direct 0–2 coupling with the analytic envelope.
    #[default]
    AnalyticEffective,
    /// Off-resonant tone at (ω₀₁ + ω₁₂)/2 whose effective coupling tracks
    /// the analytic envelope.
    PhysicalTwoPhoton,
}

/// When the final populations are taken.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Readout {
    /// End of the simulation window plus the readout margin.
    #[default]
    WindowEnd,
    /// A fixed delay after the maximum of the 0–1 pulse.
    AfterPump { delay: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub params: QutritParams,
    /// Pulse shapes. The CD envelope depends only on their ratio and timing.
    pub pair: StirapPair,
    /// Common factor applied to the STIRAP drives; 0 leaves only the CD.
    pub stirap_scale: f64,
    pub phases: LoopPhases,
    pub cd: CdMode,
    /// Multiplier of the ideal CD envelope; 1 gives 𝒜₀₂ = π.
    pub cd_area_scale: f64,
    pub tier: FidelityTier,
    pub dissipation: bool,
    /// Shift the STIRAP carriers by the estimated ac-Stark offsets of the
    /// two-photon tone. Has no effect at the ideal tier, which carries no
    /// Stark shifts.
    pub stark_correction: bool,
    pub readout: Readout,
    pub readout_margin: f64,
    /// Overrides the tier's default integrator.
    pub integrator: Option<IntegratorConfig>,
    pub thresholds: TransferThresholds,
}

impl ProtocolSpec {
    /// Ideal, dissipationless saSTIRAP at Φ = −π/2.
    pub fn ideal(params: QutritParams, pair: StirapPair) -> Self {
        Self {
            params,
            pair,
            stirap_scale: 1.0,
            phases: LoopPhases::gauge_fixed(-std::f64::consts::FRAC_PI_2),
            cd: CdMode::AnalyticEffective,
            cd_area_scale: 1.0,
            tier: FidelityTier::IdealRwa,
            dissipation: false,
            stark_correction: false,
            readout: Readout::WindowEnd,
            readout_margin: DEFAULT_READOUT_MARGIN,
            integrator: None,
            thresholds: TransferThresholds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stirap_scale >= 0.0 && self.stirap_scale.is_finite()) {
            return Err(Error::param("stirap_scale", format!("must be finite and >= 0, got {}", self.stirap_scale)));
        }
        if !(self.cd_area_scale >= 0.0 && self.cd_area_scale.is_finite()) {
            return Err(Error::param("cd_area_scale", format!("must be finite and >= 0, got {}", self.cd_area_scale)));
        }
        if !(self.readout_margin >= 0.0 && self.readout_margin.is_finite()) {
            return Err(Error::param("readout_margin", "must be finite and >= 0"));
        }
        if self.cd != CdMode::Off {
            cd_envelope_analytic(&self.pair)?;
        }
        self.integrator().validate_for_tier(self.tier, &self.params)?;
        let (t0, t1) = self.time_span();
        if t1 <= t0 {
            return Err(Error::param("readout", format!("readout time {t1} ns precedes the window start {t0} ns")));
        }
        Ok(())
    }

    /// STIRAP pair as actually driven.
    pub fn driven_pair(&self) -> Result<StirapPair> {
        self.pair.scaled(self.stirap_scale)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        self.integrator.unwrap_or_else(|| IntegratorConfig::for_tier(self.tier))
    }

    /// Scaled and truncated CD envelope as played, `None` when CD is off.
    pub fn cd_envelope(&self) -> Result<Option<CdEnvelope>> {
        match self.cd {
            CdMode::Off => Ok(None),
            _ => Ok(Some(cd_envelope_analytic(&self.pair)?.with_area_scale(self.cd_area_scale).played())),
        }
    }

    /// Union of the STIRAP and CD truncation windows.
    pub fn pulse_window(&self) -> Result<(f64, f64)> {
        let (mut a, mut b) = self.pair.truncation_window();
        if let Some(cd) = self.cd_envelope()?.and_then(|cd| cd.window()) {
            let (c, d) = cd;
            a = a.min(c);
            b = b.max(d);
        }
        Ok((a, b))
    }

    /// Simulated interval, from the window start to the readout time.
    pub fn time_span(&self) -> (f64, f64) {
        let (a, b) = self.pulse_window().unwrap_or(self.pair.truncation_window());
        match self.readout {
            Readout::WindowEnd => (a, b + self.readout_margin),
            Readout::AfterPump { delay } => (a, delay),
        }
    }

    pub fn tones(&self) -> Result<Vec<DriveTone>> {
        let p = &self.params;
        let mut two_photon = Vec::new();
        if self.cd == CdMode::PhysicalTwoPhoton {
            if let Some(cd) = self.cd_envelope()? {
                two_photon.push(DriveTone::two_photon(&cd, p, self.phases.phi_tilde)?);
            }
        }
        let (d01, d12) = if self.stark_correction && self.tier != FidelityTier::IdealRwa {
            stark_offset_correction(p, &two_photon)?
        } else {
            (0.0, 0.0)
        };
        let driven = self.driven_pair()?;
        let mut tones = vec![
            DriveTone::pump(&driven, p, self.phases.phi01, d01),
            DriveTone::stokes(&driven, p, self.phases.phi12, d12),
        ];
        tones.extend(two_photon);
        Ok(tones)
    }

    pub fn hamiltonian(&self) -> Result<ProtocolHamiltonian> {
        let cd = self.cd_envelope()?;
        if self.tier == FidelityTier::IdealRwa && self.cd != CdMode::PhysicalTwoPhoton {
            return Ok(ProtocolHamiltonian::Loop(LoopRwa { pair: self.driven_pair()?, cd, phases: self.phases }));
        }
        let model = ToneModel::new(&self.tones()?, self.params, self.tier)?;
        let direct = match (self.cd, cd) {
            (CdMode::AnalyticEffective, Some(cd)) => Some((cd, self.phases.phi02())),
            _ => None,
        };
        Ok(ProtocolHamiltonian::Tones { model, direct })
    }
}

/// Hamiltonian assembled from a [`ProtocolSpec`].
#[derive(Debug, Clone)]
pub enum ProtocolHamiltonian {
    Loop(LoopRwa),
    /// Tone model plus an optional directly injected 0–2 coupling
    /// (envelope, φ₀₂).
    Tones { model: ToneModel, direct: Option<(CdEnvelope, f64)> },
}

impl Hamiltonian for ProtocolHamiltonian {
    fn at(&self, t: f64) -> Mat3 {
        match self {
            Self::Loop(h) => h.at(t),
            Self::Tones { model, direct } => {
                let mut h = model.at(t);
                if let Some((cd, phi02)) = direct {
                    let c = C64::from_polar(0.5 * cd.value(t), *phi02);
                    h[(0, 2)] += c;
                    h[(2, 0)] += c.conj();
                }
                h
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub trajectory: Trajectory<DensityMatrix>,
    pub report: TransferReport,
}

/// Evolve |0⟩ under the protocol and summarize the transfer.
pub fn run_protocol(spec: &ProtocolSpec) -> Result<ProtocolRun> {
    spec.validate()?;
    let h = spec.hamiltonian()?;
    let span = spec.time_span();
    let cfg = spec.integrator();
    let lindblad = if spec.dissipation { LindbladSpec::from_params(&spec.params) } else { LindbladSpec::none() };
    let trajectory = if lindblad.is_empty() {
        evolve_state(&StateVector::basis(0), &h, span, &cfg)?.to_density()
    } else {
        evolve_density(&DensityMatrix::basis(0), &h, &lindblad, span, &cfg)?
    };
    let report = summarize(spec, &trajectory)?;
    Ok(ProtocolRun { trajectory, report })
}

fn summarize(spec: &ProtocolSpec, traj: &Trajectory<DensityMatrix>) -> Result<TransferReport> {
    let pops = traj.populations();
    let p2_final = pops.last().map_or(0.0, |p| p[2]).clamp(0.0, 1.0);
    let p2_peak = pops.iter().map(|p| p[2]).fold(0.0, f64::max).clamp(0.0, 1.0);
    let cd = spec.cd_envelope()?;
    let (area_cd, qsl) = match &cd {
        Some(cd) => {
            let q = if cd.peak() > 0.0 { Some(qsl_for_thresholds(spec.thresholds, cd.peak())?) } else { None };
            (cd_area(cd, spec.pulse_window()?).abs(), q)
        }
        None => (0.0, None),
    };
    Ok(TransferReport {
        p2_final,
        p2_peak,
        t_tr: transfer_time(&traj.times, &pops, spec.thresholds),
        qsl,
        area_stirap: stirap_area(&spec.driven_pair()?),
        area_cd,
        phi_used: spec.phases.loop_phase(),
    })
}
