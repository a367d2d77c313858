//! Three-level state space: the Gell-Mann pair operators, physical
//! parameters of the ladder, and the state containers shared by every other
//! module.
//!
//! Units throughout the crate: time in ns, angular frequencies in rad/ns,
//! rates in 1/ns, and ħ = 1.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat3 = Matrix3<C64>;
pub type Vec3 = Vector3<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Convert a linear frequency in MHz to an angular frequency in rad/ns.
pub fn mhz_to_rad_per_ns(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz * 1e-3
}

/// Convert an angular frequency in rad/ns to a linear frequency in MHz.
pub fn rad_per_ns_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e3
}

/// Reduce an angle to (-π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut x = phi.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// `|k⟩⟨l|`
pub fn ket_bra(k: usize, l: usize) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(k, l)] = ONE;
    m
}

/// Hermitian-conjugate distance ‖M − M†‖ (max-abs norm).
pub fn hermiticity_defect(m: &Mat3) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-abs entrywise distance between two matrices.
pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Unordered pair of levels `k < l` in the three-level ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    k: usize,
    l: usize,
}

impl Pair {
    pub const P01: Pair = Pair { k: 0, l: 1 };
    pub const P12: Pair = Pair { k: 1, l: 2 };
    pub const P02: Pair = Pair { k: 0, l: 2 };
    pub const ALL: [Pair; 3] = [Pair::P01, Pair::P12, Pair::P02];

    pub fn new(k: usize, l: usize) -> Result<Self> {
        if k < l && l <= 2 {
            Ok(Self { k, l })
        } else {
            Err(Error::InvalidPair(k, l))
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    fn index(&self) -> usize {
        match (self.k, self.l) {
            (0, 1) => 0,
            (1, 2) => 1,
            _ => 2,
        }
    }
}

/// Relaxation-rate convention for values quoted in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateConvention {
    /// Γ[1/ns] = value[MHz] × 1e-3.
    #[default]
    Plain,
    /// Γ[1/ns] = 2π × value[MHz] × 1e-3.
    Angular,
}

impl RateConvention {
    pub fn to_per_ns(self, value_mhz: f64) -> f64 {
        match self {
            Self::Plain => value_mhz * 1e-3,
            Self::Angular => mhz_to_rad_per_ns(value_mhz),
        }
    }
}

/// Transition frequencies and decoherence rates of the three-level ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QutritParams {
    pub omega01: f64,
    pub omega12: f64,
    pub gamma10: f64,
    pub gamma21: f64,
    pub gamma_phi: f64,
}

impl QutritParams {
    pub fn new(omega01: f64, omega12: f64, gamma10: f64, gamma21: f64, gamma_phi: f64) -> Result<Self> {
        if !(omega12 > 0.0 && omega01 > omega12) {
            return Err(Error::param(
                "omega01/omega12",
                format!("require omega01 > omega12 > 0, got {omega01} and {omega12}"),
            ));
        }
        for (name, v) in [("gamma10", gamma10), ("gamma21", gamma21), ("gamma_phi", gamma_phi)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("rate must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { omega01, omega12, gamma10, gamma21, gamma_phi })
    }

    /// Build from linear frequencies in MHz and rates in MHz.
    pub fn from_mhz(
        f01_mhz: f64,
        f12_mhz: f64,
        gamma10_mhz: f64,
        gamma21_mhz: f64,
        gamma_phi_mhz: f64,
        convention: RateConvention,
    ) -> Result<Self> {
        Self::new(
            mhz_to_rad_per_ns(f01_mhz),
            mhz_to_rad_per_ns(f12_mhz),
            convention.to_per_ns(gamma10_mhz),
            convention.to_per_ns(gamma21_mhz),
            convention.to_per_ns(gamma_phi_mhz),
        )
    }

    /// The transmon operating point of the reference experiment:
    /// 7.381 GHz / 7.099 GHz, Γ₁₀ = 5 MHz, Γ₂₁ = 7 MHz (plain rates).
    pub fn transmon_reference() -> Self {
        Self::from_mhz(7381.0, 7099.0, 5.0, 7.0, 0.0, RateConvention::Plain)
            .expect("reference parameters are valid")
    }

    /// Same frequencies with all decoherence switched off.
    pub fn without_dissipation(mut self) -> Self {
        self.gamma10 = 0.0;
        self.gamma21 = 0.0;
        self.gamma_phi = 0.0;
        self
    }

    /// Two-photon detuning Δ = (ω₀₁ − ω₁₂)/2.
    pub fn delta(&self) -> f64 {
        0.5 * (self.omega01 - self.omega12)
    }

    pub fn omega02(&self) -> f64 {
        self.omega01 + self.omega12
    }

    /// Carrier of the two-photon tone, ω̃ = (ω₀₁ + ω₁₂)/2.
    pub fn two_photon_carrier(&self) -> f64 {
        0.5 * self.omega02()
    }

    pub fn transition(&self, pair: Pair) -> f64 {
        match pair.index() {
            0 => self.omega01,
            1 => self.omega12,
            _ => self.omega02(),
        }
    }

    pub fn is_dissipative(&self) -> bool {
        self.gamma10 > 0.0 || self.gamma21 > 0.0 || self.gamma_phi > 0.0
    }
}

/// Symmetric and antisymmetric Gell-Mann matrices for each level pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GellMann {
    lambda_s: [Mat3; 3],
    lambda_a: [Mat3; 3],
}

impl GellMann {
    /// Λˢ_kl = |k⟩⟨l| + |l⟩⟨k|.
    pub fn symmetric(&self, pair: Pair) -> &Mat3 {
        &self.lambda_s[pair.index()]
    }

    /// Λᵃ_kl = −i|k⟩⟨l| + i|l⟩⟨k|.
    pub fn antisymmetric(&self, pair: Pair) -> &Mat3 {
        &self.lambda_a[pair.index()]
    }

    /// Antisymmetric matrix with explicit (possibly reversed) ordering:
    /// Λᵃ_lk = −Λᵃ_kl.
    pub fn antisymmetric_ordered(&self, k: usize, l: usize) -> Result<Mat3> {
        if k < l {
            Ok(*self.antisymmetric(Pair::new(k, l)?))
        } else {
            Ok(-*self.antisymmetric(Pair::new(l, k)?))
        }
    }
}

pub fn build_gellmann() -> GellMann {
    let make = |p: Pair| {
        let (k, l) = (p.k, p.l);
        let s = ket_bra(k, l) + ket_bra(l, k);
        let a = ket_bra(k, l) * (-I) + ket_bra(l, k) * I;
        (s, a)
    };
    let (s01, a01) = make(Pair::P01);
    let (s12, a12) = make(Pair::P12);
    let (s02, a02) = make(Pair::P02);
    GellMann { lambda_s: [s01, s12, s02], lambda_a: [a01, a12, a02] }
}

/// n̂·𝚲 for the pair: cos φ Λˢ_kl − sin φ Λᵃ_kl. The (k,l) entry is e^{iφ}.
pub fn pair_rotation(phase: f64, pair: Pair) -> Mat3 {
    let w = C64::from_polar(1.0, phase);
    let mut m = Mat3::zeros();
    m[(pair.k, pair.l)] = w;
    m[(pair.l, pair.k)] = w.conj();
    m
}

/// Index-checked variant of [`pair_rotation`].
pub fn pair_rotation_checked(phase: f64, k: usize, l: usize) -> Result<Mat3> {
    Ok(pair_rotation(phase, Pair::new(k, l)?))
}

/// Normalized pure state of the qutrit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(Vec3);

impl StateVector {
    pub fn new(amplitudes: Vec3) -> Result<Self> {
        let n = amplitudes.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::param("amplitudes", "state vector must have nonzero finite norm"));
        }
        Ok(Self(amplitudes / C64::from(n)))
    }

    pub fn basis(k: usize) -> Self {
        let mut v = Vec3::zeros();
        v[k] = ONE;
        Self(v)
    }

    /// Wrap amplitudes produced by a norm-preserving integrator without
    /// renormalizing them.
    pub(crate) fn from_raw(v: Vec3) -> Self {
        Self(v)
    }

    pub fn amplitudes(&self) -> &Vec3 {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[0].norm_sqr(), self.0[1].norm_sqr(), self.0[2].norm_sqr()]
    }

    pub fn overlap(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix(self.0 * self.0.adjoint())
    }
}

/// 3×3 Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Mat3);

impl DensityMatrix {
    pub const HERMITICITY_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const POSITIVITY_TOL: f64 = 1e-9;

    pub fn new(rho: Mat3) -> Result<Self> {
        if hermiticity_defect(&rho) > Self::HERMITICITY_TOL {
            return Err(Error::param("rho", "density matrix is not Hermitian"));
        }
        let tr = rho.trace();
        if (tr - ONE).norm() > Self::TRACE_TOL {
            return Err(Error::param("rho", format!("trace {tr} differs from 1")));
        }
        let d = Self(rho);
        if d.min_eigenvalue() < -Self::POSITIVITY_TOL {
            return Err(Error::param("rho", "density matrix has a negative eigenvalue"));
        }
        Ok(d)
    }

    pub fn basis(k: usize) -> Self {
        Self(ket_bra(k, k))
    }

    pub(crate) fn from_raw(rho: Mat3) -> Self {
        Self(rho)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.0)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.0 + self.0.adjoint()) * C64::from(0.5);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }
}
