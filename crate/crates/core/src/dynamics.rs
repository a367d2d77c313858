//! Schrödinger and Lindblad propagation of the qutrit.
//!
//! Both equations are integrated by the same explicit Runge–Kutta core,
//! either classic RK4 with a fixed step or Dormand–Prince 5(4) with an
//! embedded error estimate. Samples are taken on a fixed cadence that is
//! independent of the integration step.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{FidelityTier, Hamiltonian};
use crate::su3::{ket_bra, DensityMatrix, Mat3, QutritParams, StateVector, Vec3, C64, I};

/// Default spacing of recorded samples (ns).
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 0.5;

/// Collapse operators Lⱼ = √rateⱼ · Aⱼ.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LindbladSpec {
    collapse: Vec<(f64, Mat3)>,
}

impl LindbladSpec {
    pub fn new(collapse: Vec<(f64, Mat3)>) -> Result<Self> {
        for (rate, _) in &collapse {
            if !(*rate >= 0.0 && rate.is_finite()) {
                return Err(Error::param("rate", format!("collapse rates must be finite and >= 0, got {rate}")));
            }
        }
        Ok(Self { collapse })
    }

    pub fn none() -> Self {
        Self::default()
    }

    /// Relaxation |1⟩→|0⟩ at Γ₁₀ and |2⟩→|1⟩ at Γ₂₁; pure dephasing
    /// operators √(2γ_φ)|k⟩⟨k| for k = 1, 2, which damp ρ₀₁ and ρ₀₂ at γ_φ.
    pub fn from_params(params: &QutritParams) -> Self {
        let mut collapse = Vec::new();
        if params.gamma10 > 0.0 {
            collapse.push((params.gamma10, ket_bra(0, 1)));
        }
        if params.gamma21 > 0.0 {
            collapse.push((params.gamma21, ket_bra(1, 2)));
        }
        if params.gamma_phi > 0.0 {
            collapse.push((2.0 * params.gamma_phi, ket_bra(1, 1)));
            collapse.push((2.0 * params.gamma_phi, ket_bra(2, 2)));
        }
        Self { collapse }
    }

    pub fn collapse_operators(&self) -> &[(f64, Mat3)] {
        &self.collapse
    }

    pub fn is_empty(&self) -> bool {
        self.collapse.iter().all(|(r, _)| *r == 0.0)
    }

    /// Σⱼ rateⱼ (AⱼρAⱼ† − ½{Aⱼ†Aⱼ, ρ}).
    pub fn dissipator(&self, rho: &Mat3) -> Mat3 {
        let mut out = Mat3::zeros();
        for (rate, a) in &self.collapse {
            if *rate == 0.0 {
                continue;
            }
            let ad = a.adjoint();
            let ada = ad * a;
            out += (a * rho * ad - (ada * rho + rho * ada) * C64::from(0.5)) * C64::from(*rate);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Rk4 { dt: f64 },
    /// Dormand–Prince 5(4).
    Adaptive { rtol: f64, atol: f64, h_init: f64, h_min: f64, h_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub sample_interval: f64,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Result<Self> {
        let cfg = Self { method: Method::Rk4 { dt }, sample_interval: DEFAULT_SAMPLE_INTERVAL };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn adaptive(rtol: f64, atol: f64) -> Result<Self> {
        let cfg = Self {
            method: Method::Adaptive { rtol, atol, h_init: 1e-3, h_min: 1e-9, h_max: 1.0 },
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// RK4 with the default step for the tier.
    pub fn for_tier(tier: FidelityTier) -> Self {
        Self { method: Method::Rk4 { dt: tier.default_dt() }, sample_interval: DEFAULT_SAMPLE_INTERVAL }
    }

    pub fn with_sample_interval(mut self, sample_interval: f64) -> Result<Self> {
        self.sample_interval = sample_interval;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(Error::param("sample_interval", "must be > 0"));
        }
        match self.method {
            Method::Rk4 { dt } if !(dt > 0.0 && dt.is_finite()) => Err(Error::param("dt", format!("must be > 0, got {dt}"))),
            Method::Adaptive { rtol, atol, h_init, h_min, h_max } => {
                if !(rtol > 0.0 && atol > 0.0) {
                    return Err(Error::param("rtol/atol", "tolerances must be > 0"));
                }
                if !(h_min > 0.0 && h_min <= h_init && h_init <= h_max) {
                    return Err(Error::param("h_init", "require 0 < h_min <= h_init <= h_max"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Enforce dt ≤ 1/(40 f_max) for the full interaction picture, where
    /// f_max is the fastest retained oscillation (GHz, i.e. 1/ns).
    pub fn validate_for_tier(&self, tier: FidelityTier, params: &QutritParams) -> Result<()> {
        self.validate()?;
        if tier != FidelityTier::FullInteractionPicture {
            return Ok(());
        }
        let f_max = (params.omega01 + params.omega12.max(params.omega01)) / (2.0 * std::f64::consts::PI);
        let limit = 1.0 / (40.0 * f_max);
        let step = match self.method {
            Method::Rk4 { dt } => dt,
            Method::Adaptive { h_max, .. } => h_max,
        };
        if step > limit {
            return Err(Error::param(
                "dt",
                format!("{step} ns exceeds {limit:.3e} ns required to resolve the retained carrier terms"),
            ));
        }
        Ok(())
    }
}

/// Sampled solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &S)> {
        Some((*self.times.last()?, self.states.last()?))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &S)> {
        self.times.iter().copied().zip(self.states.iter())
    }
}

impl Trajectory<StateVector> {
    pub fn populations(&self) -> Vec<[f64; 3]> {
        self.states.iter().map(StateVector::populations).collect()
    }

    pub fn to_density(&self) -> Trajectory<DensityMatrix> {
        Trajectory { times: self.times.clone(), states: self.states.iter().map(StateVector::to_density).collect() }
    }
}

impl Trajectory<DensityMatrix> {
    pub fn populations(&self) -> Vec<[f64; 3]> {
        self.states.iter().map(DensityMatrix::populations).collect()
    }
}

/// Linear-space operations needed by the Runge–Kutta core.
pub trait OdeState: Clone {
    /// self + h·k
    fn add_scaled(&self, h: f64, k: &Self) -> Self;
    /// Largest entry of |e| / (atol + rtol·max(|a|, |b|)).
    fn scaled_error(e: &Self, a: &Self, b: &Self, rtol: f64, atol: f64) -> f64;
}

impl OdeState for Vec3 {
    fn add_scaled(&self, h: f64, k: &Self) -> Self {
        self + k * C64::from(h)
    }

    fn scaled_error(e: &Self, a: &Self, b: &Self, rtol: f64, atol: f64) -> f64 {
        (0..3).map(|i| e[i].norm() / (atol + rtol * a[i].norm().max(b[i].norm()))).fold(0.0, f64::max)
    }
}

impl OdeState for Mat3 {
    fn add_scaled(&self, h: f64, k: &Self) -> Self {
        self + k * C64::from(h)
    }

    fn scaled_error(e: &Self, a: &Self, b: &Self, rtol: f64, atol: f64) -> f64 {
        e.iter()
            .zip(a.iter().zip(b.iter()))
            .map(|(e, (a, b))| e.norm() / (atol + rtol * a.norm().max(b.norm())))
            .fold(0.0, f64::max)
    }
}

fn lin<S: OdeState>(y: &S, h: f64, terms: &[(f64, &S)]) -> S {
    terms.iter().fold(y.clone(), |acc, (c, k)| acc.add_scaled(h * c, k))
}

fn rk4_step<S: OdeState, F: Fn(f64, &S) -> S>(f: &F, t: f64, y: &S, h: f64) -> S {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &y.add_scaled(0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &y.add_scaled(0.5 * h, &k2));
    let k4 = f(t + h, &y.add_scaled(h, &k3));
    lin(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)])
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One DP5(4) step; returns (y_next, k7 = f(t+h, y_next), error estimate).
fn dopri_step<S: OdeState, F: Fn(f64, &S) -> S>(f: &F, t: f64, y: &S, k1: &S, h: f64) -> (S, S, S) {
    let k2 = f(t + C2 * h, &lin(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &lin(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &lin(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + C5 * h, &lin(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + h, &lin(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y5 = lin(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y5);
    let zero = y.add_scaled(-1.0, y);
    let err = lin(&zero, h, &[(E1, k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
    (y5, k7, err)
}

fn sample_times(window: (f64, f64), interval: f64) -> Result<Vec<f64>> {
    let (t0, t1) = window;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::param("window", format!("require finite t0 <= t1, got ({t0}, {t1})")));
    }
    let n = ((t1 - t0) / interval).ceil() as usize;
    let mut ts: Vec<f64> = (0..n).map(|i| t0 + i as f64 * interval).collect();
    if ts.last().is_none_or(|&l| t1 - l > 1e-12 * interval) {
        ts.push(t1);
    } else if let Some(l) = ts.last_mut() {
        *l = t1;
    }
    if ts.len() == 1 && t1 > t0 {
        ts.insert(0, t0);
    }
    Ok(ts)
}

/// Integrate y' = f(t, y) over `window`, recording y at the sample times.
pub fn integrate<S, F>(y0: S, f: F, window: (f64, f64), cfg: &IntegratorConfig) -> Result<Trajectory<S>>
where
    S: OdeState,
    F: Fn(f64, &S) -> S,
{
    cfg.validate()?;
    let times = sample_times(window, cfg.sample_interval)?;
    let mut states = Vec::with_capacity(times.len());
    states.push(y0.clone());
    let mut y = y0;
    match cfg.method {
        Method::Rk4 { dt } => {
            for w in times.windows(2) {
                let (a, b) = (w[0], w[1]);
                let n = ((b - a) / dt).ceil().max(1.0) as usize;
                let h = (b - a) / n as f64;
                for i in 0..n {
                    y = rk4_step(&f, a + i as f64 * h, &y, h);
                }
                states.push(y.clone());
            }
        }
        Method::Adaptive { rtol, atol, h_init, h_min, h_max } => {
            let mut h = h_init;
            let mut t = times[0];
            let mut k1 = f(t, &y);
            for &target in &times[1..] {
                while target - t > 1e-12 * target.abs().max(1.0) {
                    let step = h.min(target - t);
                    let (y_new, k7, err) = dopri_step(&f, t, &y, &k1, step);
                    let e = S::scaled_error(&err, &y, &y_new, rtol, atol);
                    if !e.is_finite() {
                        return Err(Error::Integration { t, reason: "non-finite state".into() });
                    }
                    if e <= 1.0 {
                        t += step;
                        y = y_new;
                        k1 = k7;
                    }
                    let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                    h = (step * factor).min(h_max);
                    if h < h_min {
                        return Err(Error::Integration {
                            t,
                            reason: format!("step size {h:e} ns fell below the minimum {h_min:e} ns (scaled error {e:.3e})"),
                        });
                    }
                }
                t = target;
                states.push(y.clone());
            }
        }
    }
    Ok(Trajectory { times, states })
}

/// iψ̇ = Hψ.
pub fn evolve_state<H: Hamiltonian + ?Sized>(
    psi0: &StateVector,
    h: &H,
    window: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory<StateVector>> {
    let n = psi0.norm();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::param("psi0", format!("initial state norm {n} differs from 1")));
    }
    let traj = integrate(*psi0.amplitudes(), |t, psi: &Vec3| -(h.at(t) * psi) * I, window, cfg)?;
    Ok(Trajectory { times: traj.times, states: traj.states.into_iter().map(StateVector::from_raw).collect() })
}

/// ρ̇ = −i[H, ρ] + 𝒟[ρ].
pub fn evolve_density<H: Hamiltonian + ?Sized>(
    rho0: &DensityMatrix,
    h: &H,
    lindblad: &LindbladSpec,
    window: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory<DensityMatrix>> {
    let rhs = |t: f64, rho: &Mat3| {
        let ht = h.at(t);
        -(ht * rho - rho * ht) * I + lindblad.dissipator(rho)
    };
    let traj = integrate(*rho0.matrix(), rhs, window, cfg)?;
    Ok(Trajectory { times: traj.times, states: traj.states.into_iter().map(DensityMatrix::from_raw).collect() })
}

pub const TRAJECTORY_CSV_HEADER: &str = "# sastirap-trajectory v1";

/// Columns: t_ns, p0, p1, p2, then Re/Im of ρ₀₁, ρ₀₂, ρ₁₂.
pub fn write_trajectory_csv<W: Write>(mut out: W, traj: &Trajectory<DensityMatrix>) -> Result<()> {
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    writeln!(out, "t_ns,p0,p1,p2,re_rho01,im_rho01,re_rho02,im_rho02,re_rho12,im_rho12")?;
    for (t, rho) in traj.iter() {
        let m = rho.matrix();
        let p = rho.populations();
        writeln!(
            out,
            "{t:.6},{:.12},{:.12},{:.12},{:.12},{:.12},{:.12},{:.12},{:.12},{:.12}",
            p[0],
            p[1],
            p[2],
            m[(0, 1)].re,
            m[(0, 1)].im,
            m[(0, 2)].re,
            m[(0, 2)].im,
            m[(1, 2)].re,
            m[(1, 2)].im
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{coupling_term, LoopPhases, LoopRwa};
    use crate::pulses::{cd_envelope_analytic, mixing_angle, StirapPair};
    use crate::su3::{hermiticity_defect, max_abs_diff, Pair};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn zero_h(_: f64) -> Mat3 {
        Mat3::zeros()
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let psi = StateVector::new(Vec3::new(C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.0, 0.4))).unwrap();
        let traj = evolve_state(&psi, &zero_h, (0.0, 10.0), &IntegratorConfig::rk4(0.1).unwrap()).unwrap();
        assert_eq!(traj.len(), 21);
        assert!(traj.states.iter().all(|s| s == &psi));
    }

    #[test]
    fn pi_pulse_inverts() {
        let omega = 0.5;
        let h = move |_t: f64| coupling_term(omega, 0.0, Pair::P01);
        for cfg in [IntegratorConfig::rk4(0.01).unwrap(), IntegratorConfig::adaptive(1e-11, 1e-12).unwrap()] {
            let traj = evolve_state(&StateVector::basis(0), &h, (0.0, PI / omega), &cfg).unwrap();
            let p = traj.last().unwrap().1.populations();
            assert!(p[1] >= 1.0 - 1e-8, "{p:?}");
        }
    }

    #[test]
    fn sample_grid_ends_exactly() {
        let ts = sample_times((-3.0, 1.2), 0.5).unwrap();
        assert_eq!(ts[0], -3.0);
        assert_eq!(*ts.last().unwrap(), 1.2);
        assert_eq!(ts.len(), 10);
        assert_eq!(sample_times((0.0, 1.0), 0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(sample_times((0.0, 0.0), 0.5).unwrap(), vec![0.0]);
        assert!(sample_times((1.0, 0.0), 0.5).is_err());
    }

    #[test]
    fn ideal_sastirap_is_exact_across_widths() {
        for sigma in [5.0, 12.0, 25.0, 40.0] {
            let pair = StirapPair::new(2.0 / sigma, 2.0 / sigma, sigma, -1.5 * sigma).unwrap();
            let cd = cd_envelope_analytic(&pair).unwrap();
            let h = LoopRwa { pair, cd: Some(cd), phases: LoopPhases::gauge_fixed(-FRAC_PI_2) };
            let window = pair.truncation_window();
            let traj = evolve_state(&StateVector::basis(0), &h, window, &IntegratorConfig::rk4(0.02).unwrap()).unwrap();
            for (t, psi) in traj.iter() {
                let th = mixing_angle(&pair, t).unwrap();
                let dark = Vec3::new(C64::from(th.cos()), C64::from(0.0), C64::from(-th.sin()));
                let ov = psi.amplitudes().dotc(&dark).norm_sqr();
                assert!(ov >= 1.0 - 1e-6, "sigma={sigma} t={t} overlap={ov}");
            }
            let p = traj.last().unwrap().1.populations();
            assert!(p[2] >= 1.0 - 1e-6, "sigma={sigma} p={p:?}");
        }
    }

    #[test]
    fn single_exponential_decay() {
        let params = QutritParams::transmon_reference();
        let l = LindbladSpec::from_params(&params);
        let traj = evolve_density(&DensityMatrix::basis(1), &zero_h, &l, (0.0, 100.0), &IntegratorConfig::rk4(0.05).unwrap()).unwrap();
        let p = traj.last().unwrap().1.populations();
        let expect = (-params.gamma10 * 100.0).exp();
        assert!((p[1] - expect).abs() < 1e-6);
        assert!((p[0] - (1.0 - expect)).abs() < 1e-6);
    }

    #[test]
    fn cascade_decay_matches_rate_equations() {
        let params = QutritParams::transmon_reference();
        let (g10, g21) = (params.gamma10, params.gamma21);
        let l = LindbladSpec::from_params(&params);
        let traj = evolve_density(&DensityMatrix::basis(2), &zero_h, &l, (0.0, 200.0), &IntegratorConfig::rk4(0.05).unwrap()).unwrap();
        for (t, rho) in traj.iter() {
            let p = rho.populations();
            let p2 = (-g21 * t).exp();
            let p1 = g21 * ((-g10 * t).exp() - (-g21 * t).exp()) / (g21 - g10);
            assert!((p[2] - p2).abs() < 1e-9 && (p[1] - p1).abs() < 1e-9, "t={t}");
            assert!((p[0] - (1.0 - p1 - p2)).abs() < 1e-9);
        }
    }

    #[test]
    fn dissipator_diagonal_matches_population_flow() {
        let l = LindbladSpec::new(vec![(0.3, ket_bra(0, 1)), (0.7, ket_bra(1, 2))]).unwrap();
        for (a, b) in [(0.2, 0.5), (0.9, 0.05), (0.0, 1.0)] {
            let rho = Mat3::from_diagonal(&Vec3::new(C64::from(1.0 - a - b), C64::from(a), C64::from(b)));
            let d = l.dissipator(&rho);
            let expect = Mat3::from_diagonal(&Vec3::new(C64::from(0.3 * a), C64::from(-(0.3 * a - 0.7 * b)), C64::from(-0.7 * b)));
            assert!(max_abs_diff(&d, &expect) < 1e-14);
        }
        assert!(LindbladSpec::new(vec![(-1.0, ket_bra(0, 1))]).is_err());
    }

    #[test]
    fn dephasing_damps_coherence_at_gamma_phi() {
        let params = QutritParams::new(45.0, 44.0, 0.0, 0.0, 0.02).unwrap();
        let l = LindbladSpec::from_params(&params);
        let plus = StateVector::new(Vec3::new(C64::from(1.0), C64::from(1.0), C64::from(0.0))).unwrap().to_density();
        let traj = evolve_density(&plus, &zero_h, &l, (0.0, 50.0), &IntegratorConfig::rk4(0.05).unwrap()).unwrap();
        let rho = traj.last().unwrap().1.matrix();
        assert!((rho[(0, 1)].re - 0.5 * (-0.02f64 * 50.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn unitary_density_matches_projector() {
        let pair = StirapPair::new(0.25, 0.2, 10.0, -14.0).unwrap();
        let cd = cd_envelope_analytic(&pair).unwrap();
        let h = LoopRwa { pair, cd: Some(cd.with_area_scale(0.6)), phases: LoopPhases::new(0.3, -0.2, 0.9) };
        let cfg = IntegratorConfig::rk4(0.02).unwrap();
        let w = pair.truncation_window();
        let psi = evolve_state(&StateVector::basis(0), &h, w, &cfg).unwrap();
        let rho = evolve_density(&DensityMatrix::basis(0), &h, &LindbladSpec::none(), w, &cfg).unwrap();
        for (a, b) in psi.states.iter().zip(&rho.states) {
            assert!(max_abs_diff(a.to_density().matrix(), b.matrix()) < 1e-7);
        }
    }

    #[test]
    fn density_invariants_under_dissipative_sastirap() {
        let params = QutritParams::transmon_reference();
        let pair = StirapPair::new(0.25, 0.2, 10.0, -14.0).unwrap();
        let cd = cd_envelope_analytic(&pair).unwrap();
        let h = LoopRwa { pair, cd: Some(cd), phases: LoopPhases::gauge_fixed(-FRAC_PI_2) };
        let traj = evolve_density(
            &DensityMatrix::basis(0),
            &h,
            &LindbladSpec::from_params(&params),
            pair.truncation_window(),
            &IntegratorConfig::rk4(0.02).unwrap(),
        )
        .unwrap();
        for rho in &traj.states {
            assert!((rho.trace() - 1.0).norm() < 1e-8);
            assert!(hermiticity_defect(rho.matrix()) < 1e-10);
            assert!(rho.min_eigenvalue() >= -1e-7);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let omega = 0.8;
        let h = move |t: f64| coupling_term(omega * (0.1 * t).cos(), 0.0, Pair::P01) + coupling_term(0.5 * omega, 0.7, Pair::P12);
        let window = (0.0, 10.0);
        let reference = evolve_state(&StateVector::basis(0), &h, window, &IntegratorConfig::adaptive(1e-13, 1e-14).unwrap()).unwrap();
        let exact = *reference.last().unwrap().1.amplitudes();
        let err = |dt: f64| {
            let cfg = IntegratorConfig::rk4(dt).unwrap().with_sample_interval(10.0).unwrap();
            let t = evolve_state(&StateVector::basis(0), &h, window, &cfg).unwrap();
            (t.last().unwrap().1.amplitudes() - exact).norm()
        };
        let (e1, e2) = (err(0.2), err(0.1));
        assert!(e1 / e2 >= 8.0, "{e1} {e2}");
    }

    #[test]
    fn adaptive_underflow_reports_failure() {
        let h = |t: f64| coupling_term(1e6 * (1e6 * t).sin(), 0.0, Pair::P01);
        let cfg = IntegratorConfig {
            method: Method::Adaptive { rtol: 1e-12, atol: 1e-12, h_init: 1e-3, h_min: 1e-4, h_max: 1.0 },
            sample_interval: 0.5,
        };
        let err = evolve_state(&StateVector::basis(0), &h, (0.0, 1.0), &cfg).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }

    #[test]
    fn full_tier_step_limit() {
        let params = QutritParams::transmon_reference();
        let cfg = IntegratorConfig::for_tier(FidelityTier::FullInteractionPicture);
        assert!(cfg.validate_for_tier(FidelityTier::FullInteractionPicture, &params).is_ok());
        let coarse = IntegratorConfig::rk4(0.005).unwrap();
        assert!(coarse.validate_for_tier(FidelityTier::FullInteractionPicture, &params).is_err());
        assert!(coarse.validate_for_tier(FidelityTier::CrossCouplingRwa, &params).is_ok());
        assert!(IntegratorConfig::rk4(0.0).is_err());
    }

    #[test]
    fn trajectory_csv_layout() {
        let traj = evolve_density(&DensityMatrix::basis(0), &zero_h, &LindbladSpec::none(), (0.0, 1.0), &IntegratorConfig::rk4(0.1).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 10);
        assert_eq!(lines.len(), 2 + 3);
        assert!(lines[2].starts_with("0.000000,1.0"));
    }
}
