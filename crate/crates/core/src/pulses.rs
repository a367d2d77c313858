//! Drive envelopes: the Gaussian STIRAP pair, the closed-form
//! counterdiabatic envelope Ω₀₂(t) = 2Θ̇(t), and a numerical transitionless
//! driving oracle for arbitrary Hamiltonian paths.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::su3::{rad_per_ns_to_mhz, Mat3, Vec3, C64, I};

/// Half-width of the STIRAP truncation window in units of σ.
pub const TRUNCATION_SIGMAS: f64 = 5.0;

/// Relative level at which the counterdiabatic envelope is considered to
/// have no support.
pub const CD_SUPPORT_THRESHOLD: f64 = 1e-7;

/// Relative amplitude at which a played CD pulse is cut off. The mixing
/// angle left untransported at either end is below 1e-3 rad.
pub const CD_TRUNCATION_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPulse {
    pub peak: f64,
    pub center: f64,
    pub sigma: f64,
}

impl GaussianPulse {
    pub fn new(peak: f64, center: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be > 0, got {sigma}")));
        }
        if !(peak >= 0.0 && peak.is_finite()) {
            return Err(Error::param("peak", format!("must be >= 0, got {peak}")));
        }
        Ok(Self { peak, center, sigma })
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.sigma;
        self.peak * (-0.5 * x * x).exp()
    }
}

/// Two Gaussian pulses of common width: Ω₀₁ centered at 0 and Ω₁₂ centered
/// at `t_s`. Negative `t_s` is the counterintuitive ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StirapPair {
    pub omega01_peak: f64,
    pub omega12_peak: f64,
    pub sigma: f64,
    pub t_s: f64,
    window: (f64, f64),
}

impl StirapPair {
    pub fn new(omega01_peak: f64, omega12_peak: f64, sigma: f64, t_s: f64) -> Result<Self> {
        GaussianPulse::new(omega01_peak, 0.0, sigma)?;
        GaussianPulse::new(omega12_peak, t_s, sigma)?;
        if !t_s.is_finite() {
            return Err(Error::param("t_s", "must be finite"));
        }
        let half = TRUNCATION_SIGMAS * sigma;
        let window = (-half + t_s.min(0.0), half + t_s.max(0.0));
        Ok(Self { omega01_peak, omega12_peak, sigma, t_s, window })
    }

    pub fn pump(&self) -> GaussianPulse {
        GaussianPulse { peak: self.omega01_peak, center: 0.0, sigma: self.sigma }
    }

    pub fn stokes(&self) -> GaussianPulse {
        GaussianPulse { peak: self.omega12_peak, center: self.t_s, sigma: self.sigma }
    }

    pub fn truncation_window(&self) -> (f64, f64) {
        self.window
    }

    pub fn in_window(&self, t: f64) -> bool {
        t >= self.window.0 && t <= self.window.1
    }

    /// Ω₀₁(t), clamped to zero outside the truncation window.
    pub fn omega01(&self, t: f64) -> f64 {
        if self.in_window(t) {
            self.pump().value(t)
        } else {
            0.0
        }
    }

    /// Ω₁₂(t), clamped to zero outside the truncation window.
    pub fn omega12(&self, t: f64) -> f64 {
        if self.in_window(t) {
            self.stokes().value(t)
        } else {
            0.0
        }
    }

    /// Both peaks multiplied by a common factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.omega01_peak * factor, self.omega12_peak * factor, self.sigma, self.t_s)
    }

    /// Exchange the roles of the two pulses and reverse the separation.
    pub fn mirrored(&self) -> Result<Self> {
        Self::new(self.omega12_peak, self.omega01_peak, self.sigma, -self.t_s)
    }

    /// ln of the untruncated ratio Ω₀₁(t)/Ω₁₂(t).
    fn log_ratio(&self, t: f64) -> f64 {
        (self.omega01_peak / self.omega12_peak).ln() + (self.t_s * self.t_s - 2.0 * t * self.t_s) / (2.0 * self.sigma * self.sigma)
    }
}

/// Θ(t) = atan[Ω₀₁(t)/Ω₁₂(t)], continued analytically beyond the truncation
/// window.
pub fn mixing_angle(pair: &StirapPair, t: f64) -> Result<f64> {
    match (pair.omega01_peak > 0.0, pair.omega12_peak > 0.0) {
        (false, false) => Err(Error::UndefinedMixingAngle),
        (true, false) => Ok(std::f64::consts::FRAC_PI_2),
        (false, true) => Ok(0.0),
        (true, true) => Ok(pair.log_ratio(t).exp().atan()),
    }
}

/// Counterdiabatic amplitude 2Θ̇(t) for an equal-width Gaussian pair, scaled
/// by `area_scale`:
///
/// Ω₀₂(t) = area_scale · (−t_s/σ²) · sech(−t_s t/σ² + ln κ),
/// κ = (Ω₀₁/Ω₁₂) e^{t_s²/(2σ²)}.
///
/// The amplitude is signed: for t_s > 0 the mixing angle decreases and the
/// envelope is negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdEnvelope {
    rate: f64,
    ln_kappa: f64,
    pub area_scale: f64,
    #[serde(default)]
    window: Option<(f64, f64)>,
}

impl CdEnvelope {
    pub fn with_area_scale(mut self, area_scale: f64) -> Self {
        self.area_scale = area_scale;
        self
    }

    /// Clamp the envelope to zero outside `window`.
    pub fn truncated(mut self, window: (f64, f64)) -> Self {
        self.window = Some(window);
        self
    }

    /// The envelope clamped to its own truncation window.
    pub fn played(self) -> Self {
        let w = self.support(CD_TRUNCATION_THRESHOLD);
        self.truncated(w)
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        self.window
    }

    pub fn value(&self, t: f64) -> f64 {
        if let Some((a, b)) = self.window {
            if t < a || t > b {
                return 0.0;
            }
        }
        let u = self.rate * t + self.ln_kappa;
        self.area_scale * self.rate / u.cosh()
    }

    /// Peak magnitude, |t_s|/σ² × area_scale.
    pub fn peak(&self) -> f64 {
        (self.area_scale * self.rate).abs()
    }

    /// Time at which Ω₀₁(t) = Ω₁₂(t).
    pub fn peak_time(&self) -> f64 {
        -self.ln_kappa / self.rate
    }

    /// Signed area over the whole real line, π × area_scale for t_s < 0.
    pub fn total_area(&self) -> f64 {
        std::f64::consts::PI * self.area_scale * self.rate.signum()
    }

    /// Interval outside of which |Ω₀₂| < threshold × peak.
    pub fn support(&self, threshold: f64) -> (f64, f64) {
        let umax = (2.0 / threshold).ln();
        let a = (-umax - self.ln_kappa) / self.rate;
        let b = (umax - self.ln_kappa) / self.rate;
        (a.min(b), a.max(b))
    }
}

pub fn cd_envelope_analytic(pair: &StirapPair) -> Result<CdEnvelope> {
    if pair.t_s == 0.0 {
        return Err(Error::ZeroSeparation);
    }
    if !(pair.omega01_peak > 0.0 && pair.omega12_peak > 0.0) {
        return Err(Error::UndefinedMixingAngle);
    }
    let s2 = pair.sigma * pair.sigma;
    Ok(CdEnvelope {
        rate: -pair.t_s / s2,
        ln_kappa: (pair.omega01_peak / pair.omega12_peak).ln() + pair.t_s * pair.t_s / (2.0 * s2),
        area_scale: 1.0,
        window: None,
    })
}

/// Finite-difference settings for [`cd_general_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub h: f64,
    pub richardson: bool,
    /// Minimum eigenvalue gap (rad/ns) below which the spectrum counts as
    /// degenerate.
    pub min_gap: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { h: 1e-3, richardson: false, min_gap: 1e-9 }
    }
}

fn sorted_eigensystem(h: &Mat3, t: f64, min_gap: f64) -> Result<[Vec3; 3]> {
    let eig = h.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.map(|i| eig.eigenvalues[i]);
    let gap = (vals[1] - vals[0]).min(vals[2] - vals[1]);
    if gap < min_gap {
        return Err(Error::DegenerateSpectrum { t, gap });
    }
    Ok(idx.map(|i| eig.eigenvectors.column(i).into_owned()))
}

/// Rotate `v` by a global phase so that ⟨reference|v⟩ is real and positive.
fn align_phase(v: &Vec3, reference: &Vec3) -> Vec3 {
    let ov = reference.dotc(v);
    if ov.norm() == 0.0 {
        return *v;
    }
    v * (ov.conj() / ov.norm())
}

/// Numerical transitionless-driving term
/// H_cd(t) = i Σₙ (1 − |n⟩⟨n|) |∂ₜn⟩⟨n|
/// from instantaneous eigenvectors of `h0`, with central differences and
/// maximal-overlap phase alignment.
pub fn cd_general_oracle<F>(h0: F, t: f64, opts: OracleOptions) -> Result<Mat3>
where
    F: Fn(f64) -> Mat3,
{
    let center = h0(t);
    let (hm, hp) = (h0(t - opts.h), h0(t + opts.h));
    if hm == center && hp == center {
        return Ok(Mat3::zeros());
    }
    let n0 = sorted_eigensystem(&center, t, opts.min_gap)?;
    let derivative = |step: f64| -> Result<[Vec3; 3]> {
        let minus = sorted_eigensystem(&h0(t - step), t - step, opts.min_gap)?;
        let plus = sorted_eigensystem(&h0(t + step), t + step, opts.min_gap)?;
        let mut d = [Vec3::zeros(); 3];
        for k in 0..3 {
            let m = align_phase(&minus[k], &n0[k]);
            let p = align_phase(&plus[k], &n0[k]);
            d[k] = (p - m) / C64::from(2.0 * step);
        }
        Ok(d)
    };
    let mut dn = derivative(opts.h)?;
    if opts.richardson {
        let coarse = derivative(2.0 * opts.h)?;
        for k in 0..3 {
            dn[k] = (dn[k] * C64::from(4.0) - coarse[k]) / C64::from(3.0);
        }
    }
    let mut hcd = Mat3::zeros();
    for k in 0..3 {
        let n = &n0[k];
        let proj = n * n.adjoint();
        let transverse = (Mat3::identity() - proj) * dn[k];
        hcd += transverse * n.adjoint();
    }
    Ok(hcd * I)
}

/// Write sampled envelopes as CSV (MHz linear frequency):
/// `t_ns,omega01,omega12,omega02`.
pub fn write_envelope_csv<W: Write>(
    mut out: W,
    pair: &StirapPair,
    cd: Option<&CdEnvelope>,
    times: impl IntoIterator<Item = f64>,
) -> Result<()> {
    writeln!(out, "# sastirap-envelopes v1 (MHz linear frequency)")?;
    writeln!(out, "t_ns,omega01,omega12,omega02")?;
    for t in times {
        let o02 = cd.map(|c| c.value(t)).unwrap_or(0.0);
        writeln!(
            out,
            "{:.6},{:.9},{:.9},{:.9}",
            t,
            rad_per_ns_to_mhz(pair.omega01(t)),
            rad_per_ns_to_mhz(pair.omega12(t)),
            rad_per_ns_to_mhz(o02)
        )?;
    }
    Ok(())
}
