//! TOML run configuration in user units (MHz, ns, multiples of π) and its
//! conversion to simulator types.

use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use sastirap_core::dynamics::IntegratorConfig;
use sastirap_core::hamiltonians::{FidelityTier, LoopPhases};
use sastirap_core::metrics::{Observable, TransferThresholds};
use sastirap_core::protocol::{CdMode, ProtocolSpec, Readout, DEFAULT_READOUT_MARGIN};
use sastirap_core::pulses::StirapPair;
use sastirap_core::su3::{mhz_to_rad_per_ns, QutritParams, RateConvention};
use sastirap_core::sweeps::{Axis, AxisRange, SweepSpec};
use sastirap_core::tomography::{Constraint, EpsilonMatrix, TraceTemplate};
use serde::Deserialize;

pub const MAX_SIGMA_NS: f64 = 1000.0;
pub const MAX_AMPLITUDE_MHZ: f64 = 1000.0;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemConfig,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub integrator: Option<IntegratorSection>,
    #[serde(default)]
    pub sweep: Vec<SweepSection>,
    #[serde(default)]
    pub qsl: Option<QslSection>,
    #[serde(default)]
    pub tomo: Option<TomoSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub f01_mhz: f64,
    pub f12_mhz: f64,
    pub gamma10_mhz: f64,
    pub gamma21_mhz: f64,
    #[serde(default)]
    pub gamma_phi_mhz: f64,
    #[serde(default)]
    pub rate_convention: RateConvention,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            f01_mhz: 7381.0,
            f12_mhz: 7099.0,
            gamma10_mhz: 5.0,
            gamma21_mhz: 7.0,
            gamma_phi_mhz: 0.0,
            rate_convention: RateConvention::Plain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutKind {
    #[default]
    WindowEnd,
    AfterPump,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub omega01_mhz: f64,
    pub omega12_mhz: f64,
    pub sigma_ns: f64,
    /// Signed separation; negative is the counterintuitive order.
    pub t_s_ns: f64,
    /// STIRAP area in units of π; rescales both peaks at fixed ratio.
    #[serde(default)]
    pub area_pi: Option<f64>,
    #[serde(default)]
    pub phi01: f64,
    #[serde(default)]
    pub phi12: f64,
    /// Loop phase Φ in units of π; sets φ̃ from φ₀₁ and φ₁₂.
    #[serde(default)]
    pub loop_phase_pi: Option<f64>,
    /// Two-photon phase φ̃ (rad); mutually exclusive with `loop_phase_pi`.
    #[serde(default)]
    pub phi_tilde: Option<f64>,
    #[serde(default)]
    pub cd: CdMode,
    /// CD area in units of π.
    #[serde(default = "one")]
    pub cd_area_pi: f64,
    #[serde(default)]
    pub tier: FidelityTier,
    #[serde(default = "yes")]
    pub dissipation: bool,
    #[serde(default)]
    pub stark_correction: bool,
    #[serde(default)]
    pub readout: ReadoutKind,
    /// Readout delay after the pump maximum for `after-pump` (ns).
    #[serde(default)]
    pub readout_delay_ns: Option<f64>,
    #[serde(default = "default_margin")]
    pub readout_margin_ns: f64,
    #[serde(default = "default_p0")]
    pub p0_start: f64,
    #[serde(default = "default_p2")]
    pub p2_end: f64,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_margin() -> f64 {
    DEFAULT_READOUT_MARGIN
}
fn default_p0() -> f64 {
    TransferThresholds::default().p0_start
}
fn default_p2() -> f64 {
    TransferThresholds::default().p2_end
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Rk4,
    Adaptive,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub method: MethodKind,
    #[serde(default)]
    pub dt_ns: Option<f64>,
    #[serde(default)]
    pub rtol: Option<f64>,
    #[serde(default)]
    pub atol: Option<f64>,
    #[serde(default)]
    pub sample_interval_ns: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    TSNs,
    SigmaNs,
    TsOverSigma,
    Phi01,
    Phi12,
    PhiTildePi,
    AreaPi,
    AreaCdPi,
    AmplitudeScale,
}

impl AxisName {
    /// Simulator axis and the factor from user units.
    fn resolve(self) -> (Axis, f64) {
        match self {
            Self::TSNs => (Axis::TS, 1.0),
            Self::SigmaNs => (Axis::Sigma, 1.0),
            Self::TsOverSigma => (Axis::SeparationRatio, 1.0),
            Self::Phi01 => (Axis::Phi01, 1.0),
            Self::Phi12 => (Axis::Phi12, 1.0),
            Self::PhiTildePi => (Axis::PhiTilde, PI),
            Self::AreaPi => (Axis::Area, PI),
            Self::AreaCdPi => (Axis::AreaCd, PI),
            Self::AmplitudeScale => (Axis::AmplitudeScale, 1.0),
        }
    }

    /// Factor from simulator units back to user units.
    pub fn display_factor(axis: Axis) -> f64 {
        match axis {
            Axis::PhiTilde | Axis::Area | Axis::AreaCd => 1.0 / PI,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub name: AxisName,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Output file stem.
    pub name: String,
    pub axes: Vec<AxisSection>,
    #[serde(default)]
    pub optimize_phase: bool,
    #[serde(default)]
    pub observable: Observable,
    /// Overrides `protocol.cd` for this sweep.
    #[serde(default)]
    pub cd: Option<CdMode>,
    /// Transfer-time contour spacing in the heatmap (ns); 0 disables.
    #[serde(default)]
    pub contour_step_ns: f64,
    /// Draw the p₂ iso-line at this level in the heatmap.
    #[serde(default)]
    pub p2_contour: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QslSection {
    /// Peak 0–2 coupling; defaults to the protocol's CD peak.
    #[serde(default)]
    pub omega02_max_mhz: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoSection {
    /// Directory with cal0.csv, cal1.csv, cal2.csv and optional epsilon.txt.
    #[serde(default)]
    pub calibration_dir: Option<PathBuf>,
    /// Measured trace file; synthesized from `populations` when absent.
    #[serde(default)]
    pub measured: Option<PathBuf>,
    #[serde(default)]
    pub populations: Option<[f64; 3]>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub constraint: Constraint,
    /// Leakage fractions; override the calibration sidecar.
    #[serde(default)]
    pub epsilon: Option<EpsilonMatrix>,
    /// Templates of the synthetic calibration when no directory is given.
    #[serde(default)]
    pub templates: Option<[TraceTemplate; 3]>,
    #[serde(default = "default_cadence")]
    pub cadence_ns: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_cadence() -> f64 {
    2.0
}
fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, plots: true }
    }
}

fn check(key: &str, ok: bool, msg: impl std::fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        bail!("`{key}`: {msg}")
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    check(key, v.is_finite(), format!("must be finite, got {v}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        for (k, v) in [("system.f01_mhz", s.f01_mhz), ("system.f12_mhz", s.f12_mhz)] {
            check(k, v > 0.0 && v.is_finite(), format!("must be positive, got {v}"))?;
        }
        check("system.f12_mhz", s.f12_mhz < s.f01_mhz, "must be below system.f01_mhz")?;
        for (k, v) in [
            ("system.gamma10_mhz", s.gamma10_mhz),
            ("system.gamma21_mhz", s.gamma21_mhz),
            ("system.gamma_phi_mhz", s.gamma_phi_mhz),
        ] {
            check(k, v >= 0.0 && v.is_finite(), format!("rates must be >= 0, got {v}"))?;
        }
        let p = &self.protocol;
        for (k, v) in [("protocol.omega01_mhz", p.omega01_mhz), ("protocol.omega12_mhz", p.omega12_mhz)] {
            check(k, (0.0..=MAX_AMPLITUDE_MHZ).contains(&v), format!("must lie in [0, {MAX_AMPLITUDE_MHZ}], got {v}"))?;
        }
        check("protocol.sigma_ns", p.sigma_ns > 0.0 && p.sigma_ns <= MAX_SIGMA_NS, format!("must lie in (0, {MAX_SIGMA_NS}], got {}", p.sigma_ns))?;
        check("protocol.t_s_ns", p.t_s_ns.is_finite() && p.t_s_ns.abs() <= 10.0 * MAX_SIGMA_NS, format!("out of range: {}", p.t_s_ns))?;
        if let Some(a) = p.area_pi {
            check("protocol.area_pi", a >= 0.0 && a.is_finite(), format!("must be >= 0, got {a}"))?;
            check("protocol.area_pi", p.omega01_mhz > 0.0 || p.omega12_mhz > 0.0, "needs a nonzero base amplitude")?;
        }
        for (k, v) in [("protocol.phi01", p.phi01), ("protocol.phi12", p.phi12)] {
            finite(k, v)?;
        }
        check("protocol.loop_phase_pi", !(p.loop_phase_pi.is_some() && p.phi_tilde.is_some()), "conflicts with protocol.phi_tilde")?;
        if let Some(v) = p.loop_phase_pi {
            finite("protocol.loop_phase_pi", v)?;
        }
        if let Some(v) = p.phi_tilde {
            finite("protocol.phi_tilde", v)?;
        }
        check("protocol.cd_area_pi", p.cd_area_pi >= 0.0 && p.cd_area_pi.is_finite(), format!("must be >= 0, got {}", p.cd_area_pi))?;
        check("protocol.readout_margin_ns", p.readout_margin_ns >= 0.0 && p.readout_margin_ns.is_finite(), "must be >= 0")?;
        match p.readout {
            ReadoutKind::AfterPump => {
                let d = p.readout_delay_ns;
                check("protocol.readout_delay_ns", d.is_some_and(f64::is_finite), "required by readout = \"after-pump\"")?;
            }
            ReadoutKind::WindowEnd => {
                check("protocol.readout_delay_ns", p.readout_delay_ns.is_none(), "only valid with readout = \"after-pump\"")?;
            }
        }
        check("protocol.p0_start", p.p0_start > 0.0 && p.p0_start <= 1.0, format!("must lie in (0, 1], got {}", p.p0_start))?;
        check("protocol.p2_end", p.p2_end > 0.0 && p.p2_end <= 1.0, format!("must lie in (0, 1], got {}", p.p2_end))?;
        if let Some(i) = &self.integrator {
            match i.method {
                MethodKind::Rk4 => {
                    check("integrator.dt_ns", i.dt_ns.is_some_and(|v| v > 0.0 && v.is_finite()), "rk4 needs a positive dt_ns")?;
                    check("integrator.rtol", i.rtol.is_none() && i.atol.is_none(), "rtol/atol only apply to the adaptive method")?;
                }
                MethodKind::Adaptive => {
                    check("integrator.dt_ns", i.dt_ns.is_none(), "dt_ns only applies to rk4")?;
                }
            }
            if let Some(v) = i.sample_interval_ns {
                check("integrator.sample_interval_ns", v > 0.0 && v.is_finite(), "must be positive")?;
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for (k, sw) in self.sweep.iter().enumerate() {
            let key = format!("sweep[{k}]");
            check(&format!("{key}.name"), !sw.name.is_empty() && sw.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'), "must be a non-empty file stem of [A-Za-z0-9_-]")?;
            check(&format!("{key}.name"), names.insert(sw.name.clone()), format!("duplicate sweep name `{}`", sw.name))?;
            check(&format!("{key}.contour_step_ns"), sw.contour_step_ns >= 0.0 && sw.contour_step_ns.is_finite(), "must be >= 0")?;
            if let Some(v) = sw.p2_contour {
                check(&format!("{key}.p2_contour"), (0.0..=1.0).contains(&v), "must lie in [0, 1]")?;
            }
            for (j, a) in sw.axes.iter().enumerate() {
                let ak = format!("{key}.axes[{j}]");
                check(&format!("{ak}.count"), a.count >= 1, "must be at least 1")?;
                finite(&format!("{ak}.start"), a.start)?;
                finite(&format!("{ak}.stop"), a.stop)?;
                if a.name == AxisName::SigmaNs {
                    for v in [a.start, a.stop] {
                        check(&format!("{ak}.start/stop"), v > 0.0 && v <= MAX_SIGMA_NS, format!("sigma must lie in (0, {MAX_SIGMA_NS}]"))?;
                    }
                }
            }
            self.sweep_spec(k)?.validate().with_context(|| format!("`{key}`"))?;
        }
        if let Some(q) = &self.qsl {
            if let Some(v) = q.omega02_max_mhz {
                check("qsl.omega02_max_mhz", v > 0.0 && v.is_finite(), format!("coupling must be positive, got {v}"))?;
            }
        }
        if let Some(t) = &self.tomo {
            check("tomo.noise_sigma", t.noise_sigma >= 0.0 && t.noise_sigma.is_finite(), "must be >= 0")?;
            check("tomo.cadence_ns", t.cadence_ns > 0.0 && t.cadence_ns.is_finite(), "must be positive")?;
            check("tomo.samples", t.samples >= 3, "need at least 3 samples")?;
            check("tomo.measured", t.measured.is_some() || t.populations.is_some(), "either tomo.measured or tomo.populations is required")?;
            check("tomo.measured", !(t.measured.is_some() && t.populations.is_some()), "conflicts with tomo.populations")?;
            if let Some(e) = &t.epsilon {
                e.validate().context("`tomo.epsilon`")?;
            }
        }
        self.protocol_spec()?.validate().context("`protocol`")?;
        Ok(())
    }

    pub fn qutrit(&self) -> Result<QutritParams> {
        let s = &self.system;
        Ok(QutritParams::from_mhz(s.f01_mhz, s.f12_mhz, s.gamma10_mhz, s.gamma21_mhz, s.gamma_phi_mhz, s.rate_convention)?)
    }

    pub fn integrator_config(&self) -> Result<Option<IntegratorConfig>> {
        let Some(i) = &self.integrator else { return Ok(None) };
        let cfg = match i.method {
            MethodKind::Rk4 => IntegratorConfig::rk4(i.dt_ns.unwrap_or_default())?,
            MethodKind::Adaptive => IntegratorConfig::adaptive(i.rtol.unwrap_or(1e-8), i.atol.unwrap_or(1e-10))?,
        };
        Ok(Some(match i.sample_interval_ns {
            Some(v) => cfg.with_sample_interval(v)?,
            None => cfg,
        }))
    }

    pub fn protocol_spec(&self) -> Result<ProtocolSpec> {
        let p = &self.protocol;
        let pair = StirapPair::new(mhz_to_rad_per_ns(p.omega01_mhz), mhz_to_rad_per_ns(p.omega12_mhz), p.sigma_ns, p.t_s_ns)
            .context("`protocol`")?;
        let mut spec = ProtocolSpec::ideal(self.qutrit()?, pair);
        if let Some(a) = p.area_pi {
            spec.stirap_scale = a * PI / sastirap_core::metrics::stirap_area(&pair);
        }
        spec.phases = match (p.loop_phase_pi, p.phi_tilde) {
            (_, Some(t)) => LoopPhases::new(p.phi01, p.phi12, t),
            (l, None) => LoopPhases::with_loop_phase(p.phi01, p.phi12, l.unwrap_or(-0.5) * PI),
        };
        spec.cd = p.cd;
        spec.cd_area_scale = p.cd_area_pi;
        spec.tier = p.tier;
        spec.dissipation = p.dissipation;
        spec.stark_correction = p.stark_correction;
        spec.readout = match p.readout {
            ReadoutKind::WindowEnd => Readout::WindowEnd,
            ReadoutKind::AfterPump => Readout::AfterPump { delay: p.readout_delay_ns.unwrap_or_default() },
        };
        spec.readout_margin = p.readout_margin_ns;
        spec.integrator = self.integrator_config()?;
        spec.thresholds = TransferThresholds { p0_start: p.p0_start, p2_end: p.p2_end };
        Ok(spec)
    }

    pub fn sweep_spec(&self, k: usize) -> Result<SweepSpec> {
        let sw = &self.sweep[k];
        let mut base = self.protocol_spec()?;
        if let Some(cd) = sw.cd {
            base.cd = cd;
        }
        let axes = sw
            .axes
            .iter()
            .map(|a| {
                let (axis, f) = a.name.resolve();
                AxisRange::new(axis, a.start * f, a.stop * f, a.count)
            })
            .collect();
        Ok(SweepSpec { base, axes, optimize_phase: sw.optimize_phase, tier: base.tier, dissipation: base.dissipation, observable: sw.observable })
    }
}
