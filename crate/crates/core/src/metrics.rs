//! Protocol observables: dark/bright basis, pulse areas, transfer time and
//! the Bhattacharyya speed limit.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::LoopPhases;
use crate::pulses::{mixing_angle, CdEnvelope, StirapPair};
use crate::su3::{StateVector, Vec3, C64};

/// Relative tolerance of the area quadrature.
pub const AREA_REL_TOL: f64 = 1e-8;

/// Instantaneous eigenbasis of the STIRAP Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarkBright {
    pub dark: StateVector,
    pub bright: StateVector,
    /// Eigenvalue +Ω₀/2.
    pub n_plus: StateVector,
    /// Eigenvalue −Ω₀/2.
    pub n_minus: StateVector,
}

pub fn dark_bright_states(pair: &StirapPair, phases: &LoopPhases, t: f64) -> Result<DarkBright> {
    let th = mixing_angle(pair, t)?;
    let (s, c) = th.sin_cos();
    let (p01, p12) = (phases.phi01, phases.phi12);
    let dark = Vec3::new(C64::from_polar(c, p12), C64::from(0.0), C64::from_polar(-s, -p01));
    let bright = Vec3::new(C64::from_polar(s, p01), C64::from(0.0), C64::from_polar(c, -p12));
    let one = Vec3::new(C64::from(0.0), C64::from(1.0), C64::from(0.0));
    let h = C64::from(FRAC_1_SQRT_2);
    Ok(DarkBright {
        dark: StateVector::new(dark)?,
        bright: StateVector::new(bright)?,
        n_plus: StateVector::new((bright + one) * h)?,
        n_minus: StateVector::new((bright - one) * h)?,
    })
}

fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature; the interval is first split into `pieces`
/// panels so that narrow features are not stepped over.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, pieces: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = pieces.max(1);
    let w = (b - a) / n as f64;
    let coarse: f64 = (0..=2 * n).map(|i| f(a + 0.5 * w * i as f64).abs()).sum::<f64>() * 0.5 * w;
    let tol = rel_tol * coarse.max(f64::MIN_POSITIVE) / n as f64;
    (0..n)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * w, a + (i + 1) as f64 * w);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            simpson_rec(&f, x0, x1, f0, fm, f1, whole, tol, 40)
        })
        .sum()
}

/// 𝒜 = ∫√(Ω₀₁² + Ω₁₂²) dt over the truncation window.
pub fn stirap_area(pair: &StirapPair) -> f64 {
    let (a, b) = pair.truncation_window();
    integrate_adaptive(|t| pair.omega01(t).hypot(pair.omega12(t)), a, b, AREA_REL_TOL, 64)
}

/// 𝒜₀₂ = ∫Ω₀₂ dt over `window`.
pub fn cd_area(cd: &CdEnvelope, window: (f64, f64)) -> f64 {
    integrate_adaptive(|t| cd.value(t), window.0, window.1, AREA_REL_TOL, 64)
}

/// (𝒜, 𝒜₀₂): the STIRAP area over its truncation window and the CD area
/// over the CD window, or its numerical support when untruncated.
pub fn pulse_areas(pair: &StirapPair, cd: &CdEnvelope) -> (f64, f64) {
    let w = cd.window().unwrap_or_else(|| cd.support(crate::pulses::CD_SUPPORT_THRESHOLD));
    (stirap_area(pair), cd_area(cd, w))
}

/// Rescale both STIRAP peaks by a common factor so that 𝒜 equals `target`.
pub fn scale_to_area(pair: &StirapPair, target: f64) -> Result<StirapPair> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::param("area", format!("must be finite and >= 0, got {target}")));
    }
    let a = stirap_area(pair);
    if a == 0.0 {
        return Err(Error::param("area", "cannot rescale a pair with zero amplitude"));
    }
    pair.scaled(target / a)
}

/// Population thresholds marking the start and end of the transfer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferThresholds {
    pub p0_start: f64,
    pub p2_end: f64,
}

impl Default for TransferThresholds {
    fn default() -> Self {
        Self { p0_start: 0.99, p2_end: 0.8 }
    }
}

impl TransferThresholds {
    /// Populations cos²θᵢ and sin²θ_f of the dark state at the given angles.
    pub fn from_mixing_angles(theta_i: f64, theta_f: f64) -> Self {
        Self { p0_start: theta_i.cos().powi(2), p2_end: theta_f.sin().powi(2) }
    }

    /// Dark-state mixing angles (θᵢ, θ_f) reached at these populations.
    pub fn mixing_angles(&self) -> (f64, f64) {
        (self.p0_start.sqrt().acos(), self.p2_end.sqrt().asin())
    }
}

/// t_f − t_i, where t_i is the last crossing of p₀ down through
/// `p0_start` before the minimum of p₀ and t_f the first time p₂ reaches
/// `p2_end`; linear interpolation between samples. `None` when p₂ never
/// reaches the threshold or p₀ never starts above it.
pub fn transfer_time(times: &[f64], populations: &[[f64; 3]], thresholds: TransferThresholds) -> Option<f64> {
    let n = times.len().min(populations.len());
    if n == 0 {
        return None;
    }
    let p0 = |i: usize| populations[i][0];
    let p2 = |i: usize| populations[i][2];
    let k = (0..n).find(|&i| p2(i) >= thresholds.p2_end)?;
    let t_f = if k == 0 {
        times[0]
    } else {
        let (a, b) = (p2(k - 1), p2(k));
        times[k - 1] + (thresholds.p2_end - a) / (b - a) * (times[k] - times[k - 1])
    };
    let m = (0..n).min_by(|&a, &b| p0(a).total_cmp(&p0(b)))?;
    let j = (0..=m).rev().find(|&i| p0(i) >= thresholds.p0_start)?;
    let t_i = if j == m {
        times[j]
    } else {
        let (a, b) = (p0(j), p0(j + 1));
        times[j] + (a - thresholds.p0_start) / (a - b) * (times[j + 1] - times[j])
    };
    Some(t_f - t_i)
}

/// T = 2 arccos|cos(θ_f − θᵢ)| / Ω₀₂ᵐᵃˣ.
pub fn qsl_bhattacharyya(theta_i: f64, theta_f: f64, omega02_max: f64) -> Result<f64> {
    if !(omega02_max > 0.0 && omega02_max.is_finite()) {
        return Err(Error::param("omega02_max", format!("coupling must be > 0, got {omega02_max}")));
    }
    Ok(2.0 * (theta_f - theta_i).cos().abs().min(1.0).acos() / omega02_max)
}

/// Bhattacharyya bound for the states fixed by population thresholds.
pub fn qsl_for_thresholds(thresholds: TransferThresholds, omega02_max: f64) -> Result<f64> {
    let (ti, tf) = thresholds.mixing_angles();
    qsl_bhattacharyya(ti, tf, omega02_max)
}

/// Which p₂ a run is scored by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// p₂ at the readout time.
    #[default]
    Final,
    /// Largest p₂ reached during the run.
    Peak,
}

/// Summary of one protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    /// p₂ at the readout time.
    pub p2_final: f64,
    /// Largest sampled p₂.
    pub p2_peak: f64,
    pub t_tr: Option<f64>,
    /// Bhattacharyya bound at the run's peak Ω₀₂; `None` without CD.
    pub qsl: Option<f64>,
    pub area_stirap: f64,
    pub area_cd: f64,
    /// Gauge-invariant loop phase Φ used for the run.
    pub phi_used: f64,
}

pub const REPORT_CSV_HEADER: &str = "p2_final,p2_peak,t_tr_ns,qsl_ns,area_stirap,area_cd,phi";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

impl TransferReport {
    pub fn p2(&self, observable: Observable) -> f64 {
        match observable {
            Observable::Final => self.p2_final,
            Observable::Peak => self.p2_peak,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.9},{:.9},{},{},{:.9},{:.9},{:.9}",
            self.p2_final,
            self.p2_peak,
            opt(self.t_tr),
            opt(self.qsl),
            self.area_stirap,
            self.area_cd,
            self.phi_used
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# sastirap-report v1")?;
        writeln!(out, "{REPORT_CSV_HEADER}")?;
        writeln!(out, "{}", self.csv_row())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::build_stirap_rwa;
    use crate::pulses::cd_envelope_analytic;
    use crate::su3::mhz_to_rad_per_ns;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pair() -> StirapPair {
        StirapPair::new(mhz_to_rad_per_ns(25.0), mhz_to_rad_per_ns(16.0), 30.0, -45.0).unwrap()
    }

    #[test]
    fn dark_state_limits() {
        let phases = LoopPhases::new(0.4, -1.3, 0.0);
        let only12 = StirapPair::new(0.0, 0.2, 10.0, -15.0).unwrap();
        let d = dark_bright_states(&only12, &phases, 0.0).unwrap().dark;
        assert!((d.amplitudes()[0] - C64::from_polar(1.0, -1.3)).norm() < 1e-15);
        let only01 = StirapPair::new(0.2, 0.0, 10.0, -15.0).unwrap();
        let d = dark_bright_states(&only01, &phases, 0.0).unwrap().dark;
        assert!((d.amplitudes()[2] - C64::from_polar(-1.0, -0.4)).norm() < 1e-15);
        let none = StirapPair::new(0.0, 0.0, 10.0, -15.0).unwrap();
        assert!(dark_bright_states(&none, &phases, 0.0).is_err());
    }

    #[test]
    fn eigen_relations() {
        let p = pair();
        let phases = LoopPhases::new(0.9, 2.1, 0.0);
        for t in [-90.0, -30.0, 0.0, 20.0] {
            let b = dark_bright_states(&p, &phases, t).unwrap();
            let h = build_stirap_rwa(&p, &phases, t);
            let half = 0.5 * p.omega01(t).hypot(p.omega12(t));
            assert!((h * b.dark.amplitudes()).norm() < 1e-10);
            assert!((h * b.n_plus.amplitudes() - b.n_plus.amplitudes() * C64::from(half)).norm() < 1e-10);
            assert!((h * b.n_minus.amplitudes() + b.n_minus.amplitudes() * C64::from(half)).norm() < 1e-10);
            assert!(b.dark.overlap(&b.bright).norm() < 1e-12);
        }
    }

    #[test]
    fn single_gaussian_area() {
        let p = StirapPair::new(0.3, 0.0, 12.0, -10.0).unwrap();
        let expect = 0.3 * 12.0 * (2.0 * PI).sqrt();
        // truncation at ±5σ removes erfc(5/√2) of the area
        assert!((stirap_area(&p) / expect - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ideal_cd_area_is_pi() {
        let cd = cd_envelope_analytic(&pair()).unwrap();
        let (_, a02) = pulse_areas(&pair(), &cd);
        assert!((a02 - PI).abs() < 1e-6, "{a02}");
    }

    #[test]
    fn cd_area_matches_mixing_angle_change() {
        let p = pair();
        let cd = cd_envelope_analytic(&p).unwrap();
        let (a, b) = (-70.0, 15.0);
        let expect = 2.0 * (mixing_angle(&p, b).unwrap() - mixing_angle(&p, a).unwrap());
        assert!((cd_area(&cd, (a, b)) - expect).abs() < 1e-6);
    }

    #[test]
    fn area_rescaling_hits_target() {
        let p = StirapPair::new(0.2, 0.15, 25.0, -61.0).unwrap();
        let q = scale_to_area(&p, 5.5 * PI).unwrap();
        assert!((stirap_area(&q) - 5.5 * PI).abs() < 1e-6);
        assert!((q.omega01_peak / q.omega12_peak - 0.2 / 0.15).abs() < 1e-12);
    }

    #[test]
    fn threshold_angles() {
        assert!((0.03 * PI).cos().powi(2) >= 0.99);
        assert!(((0.35 * PI).sin().powi(2) - 0.7939).abs() < 1e-4);
        let th = TransferThresholds::from_mixing_angles(0.03 * PI, 0.35 * PI);
        let (a, b) = th.mixing_angles();
        assert!((a - 0.03 * PI).abs() < 1e-12 && (b - 0.35 * PI).abs() < 1e-12);
    }

    #[test]
    fn qsl_reference_values() {
        let q = qsl_bhattacharyya(0.03 * PI, 0.35 * PI, 1.0).unwrap();
        assert!((q - 2.0 * 0.32 * PI).abs() < 1e-12);
        assert!((q - 2.0).abs() < 0.02);
        let t = qsl_bhattacharyya(0.03 * PI, 0.35 * PI, mhz_to_rad_per_ns(48.0)).unwrap();
        assert!((6.6..=7.0).contains(&t), "{t}");
        assert_eq!(qsl_bhattacharyya(0.3, 0.3, 1.0).unwrap(), 0.0);
        assert!(qsl_bhattacharyya(0.0, 1.0, 0.0).is_err());
        let a = qsl_for_thresholds(TransferThresholds::default(), 0.2).unwrap();
        let b = qsl_for_thresholds(TransferThresholds::default(), 0.4).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transfer_time_absent_and_interpolated() {
        let times: Vec<f64> = (0..=20).map(|i| i as f64).collect();
        let flat: Vec<[f64; 3]> = times.iter().map(|_| [1.0, 0.0, 0.0]).collect();
        assert_eq!(transfer_time(&times, &flat, TransferThresholds::default()), None);
        // p2 ramps linearly from t=5 to t=15
        let ramp: Vec<[f64; 3]> = times
            .iter()
            .map(|&t| {
                let p2 = ((t - 5.0) / 10.0).clamp(0.0, 1.0);
                [1.0 - p2, 0.0, p2]
            })
            .collect();
        let t = transfer_time(&times, &ramp, TransferThresholds::default()).unwrap();
        // p0 crosses 0.99 at t = 5.1, p2 reaches 0.8 at t = 13
        assert!((t - 7.9).abs() < 1e-12, "{t}");
    }

    #[test]
    fn report_row_has_all_columns() {
        let r = TransferReport {
            p2_final: 0.9,
            p2_peak: 0.95,
            t_tr: None,
            qsl: Some(6.7),
            area_stirap: 3.0,
            area_cd: PI,
            phi_used: -FRAC_PI_2,
        };
        assert_eq!(r.csv_row().split(',').count(), REPORT_CSV_HEADER.split(',').count());
        assert!(r.csv_row().contains(",,"));
    }
}
