//! Dispersive-readout population analysis: calibration traces, linear
//! least-squares extraction and relaxation correction of calibrations.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted design-matrix condition number.
pub const MAX_CONDITION: f64 = 1e10;
/// Tolerance on Σp = 1 for input probability vectors.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;
/// Header comment of trace CSV files.
pub const TRACE_CSV_HEADER: &str = "# sastirap-trace v1";

/// Readout time series r(τ) as complex I + iQ samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Sample spacing (ns).
    pub cadence: f64,
    pub samples: Vec<Complex64>,
}

impl Trace {
    pub fn new(cadence: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(cadence > 0.0 && cadence.is_finite()) {
            return Err(Error::param("cadence", format!("must be positive, got {cadence}")));
        }
        if samples.is_empty() {
            return Err(Error::TraceMismatch("trace has no samples".into()));
        }
        Ok(Self { cadence, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| k as f64 * self.cadence)
    }

    /// max − min over I and Q together.
    pub fn span(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .flat_map(|z| [z.re, z.im])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        hi - lo
    }

    fn combine(&self, other: &Self, a: f64, b: f64) -> Self {
        let samples = self.samples.iter().zip(&other.samples).map(|(x, y)| a * x + b * y).collect();
        Self { cadence: self.cadence, samples }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        writeln!(out, "tau_ns,I,Q")?;
        for (t, z) in self.times().zip(&self.samples) {
            writeln!(out, "{t:.6},{:.15e},{:.15e}", z.re, z.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["tau_ns", "I", "Q"] {
            return Err(Error::Parse(format!("expected columns tau_ns,I,Q, got {}", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut taus = Vec::new();
        let mut samples = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse(format!("row {}: missing column {k}", row + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))
            };
            taus.push(field(0)?);
            samples.push(Complex64::new(field(1)?, field(2)?));
        }
        let cadence = match taus.len() {
            0 => return Err(Error::Parse("trace file has no samples".into())),
            1 => 1.0,
            n => (taus[n - 1] - taus[0]) / (n - 1) as f64,
        };
        for (k, t) in taus.iter().enumerate() {
            if (t - taus[0] - k as f64 * cadence).abs() > 1e-6 * cadence.max(1.0) {
                return Err(Error::Parse(format!("row {}: non-uniform sample time {t}", k + 1)));
            }
        }
        Self::new(cadence, samples)
    }
}

/// Calibration traces r₀, r₁, r₂ for the three basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    pub traces: [Trace; 3],
}

impl CalibrationSet {
    pub fn new(traces: [Trace; 3]) -> Result<Self> {
        let [a, b, c] = &traces;
        if a.len() != b.len() || a.len() != c.len() {
            return Err(Error::TraceMismatch(format!("lengths {}, {}, {}", a.len(), b.len(), c.len())));
        }
        if (a.cadence - b.cadence).abs() > 1e-12 * a.cadence || (a.cadence - c.cadence).abs() > 1e-12 * a.cadence {
            return Err(Error::TraceMismatch(format!("cadences {}, {}, {}", a.cadence, b.cadence, c.cadence)));
        }
        Ok(Self { traces })
    }

    pub fn len(&self) -> usize {
        self.traces[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces[0].is_empty()
    }

    pub fn cadence(&self) -> f64 {
        self.traces[0].cadence
    }

    /// Multiply every trace by a common complex factor.
    pub fn rescaled(&self, factor: Complex64) -> Self {
        let scale = |t: &Trace| Trace { cadence: t.cadence, samples: t.samples.iter().map(|z| z * factor).collect() };
        Self { traces: [scale(&self.traces[0]), scale(&self.traces[1]), scale(&self.traces[2])] }
    }

    /// Real design matrix with I rows stacked above Q rows.
    fn design(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(2 * n, 3, |r, c| {
            let z = self.traces[c].samples[r % n];
            if r < n {
                z.re
            } else {
                z.im
            }
        })
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.design().singular_values();
        let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &s| (l.min(s), h.max(s)));
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }
}

/// Parametric calibration template
/// r(τ) = offset + amplitude·e^{−τ/decay}·e^{i(2π·f·τ + phase)}, f in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceTemplate {
    pub offset_i: f64,
    pub offset_q: f64,
    pub amplitude: f64,
    pub frequency_mhz: f64,
    pub phase: f64,
    pub decay_ns: f64,
}

impl TraceTemplate {
    pub fn sample(&self, tau: f64) -> Complex64 {
        let w = 2.0 * PI * self.frequency_mhz * 1e-3;
        Complex64::new(self.offset_i, self.offset_q)
            + self.amplitude * (-tau / self.decay_ns).exp() * Complex64::from_polar(1.0, w * tau + self.phase)
    }

    pub fn render(&self, cadence: f64, len: usize) -> Result<Trace> {
        if !(self.decay_ns > 0.0) {
            return Err(Error::param("decay_ns", format!("must be positive, got {}", self.decay_ns)));
        }
        Trace::new(cadence, (0..len).map(|k| self.sample(k as f64 * cadence)).collect())
    }

    /// Three distinguishable cavity-response templates.
    pub fn reference_set() -> [Self; 3] {
        [
            Self { offset_i: 1.0, offset_q: 0.0, amplitude: 0.6, frequency_mhz: 2.0, phase: 0.0, decay_ns: 400.0 },
            Self { offset_i: 0.0, offset_q: 1.0, amplitude: 0.8, frequency_mhz: 3.5, phase: 1.0, decay_ns: 300.0 },
            Self { offset_i: -0.8, offset_q: -0.6, amplitude: 0.7, frequency_mhz: 5.0, phase: 2.2, decay_ns: 250.0 },
        ]
    }
}

pub fn synthetic_calibration(templates: &[TraceTemplate; 3], cadence: f64, len: usize) -> Result<CalibrationSet> {
    CalibrationSet::new([templates[0].render(cadence, len)?, templates[1].render(cadence, len)?, templates[2].render(cadence, len)?])
}

fn check_probabilities(p: &[f64; 3]) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidProbabilities(format!("entries must be finite and nonnegative: {p:?}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Σ pᵢ rᵢ(τ) plus seeded white Gaussian noise of std `noise_sigma` on I and Q.
pub fn synthesize_measured_trace(p: &[f64; 3], cal: &CalibrationSet, noise_sigma: f64, seed: u64) -> Result<Trace> {
    check_probabilities(p)?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::param("noise_sigma", format!("must be nonnegative, got {noise_sigma}")));
    }
    let mut samples: Vec<Complex64> =
        (0..cal.len()).map(|k| (0..3).map(|i| p[i] * cal.traces[i].samples[k]).sum()).collect();
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::param("noise_sigma", e.to_string()))?;
        for z in &mut samples {
            *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Trace::new(cal.cadence(), samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// Plain linear least squares.
    #[default]
    Unconstrained,
    /// Least squares restricted to Σp = 1, p ≥ 0.
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extraction {
    pub populations: [f64; 3],
    /// Root-mean-square residual per real sample.
    pub rms_residual: f64,
    pub condition: f64,
}

/// Least-squares fit of a measured trace by the calibration traces.
pub fn extract_populations(meas: &Trace, cal: &CalibrationSet, constraint: Constraint) -> Result<Extraction> {
    if meas.len() != cal.len() {
        return Err(Error::TraceMismatch(format!("measured {} samples, calibration {}", meas.len(), cal.len())));
    }
    if (meas.cadence - cal.cadence()).abs() > 1e-12 * cal.cadence() {
        return Err(Error::TraceMismatch(format!("measured cadence {}, calibration {}", meas.cadence, cal.cadence())));
    }
    let x = cal.design();
    let n = meas.len();
    let y = DVector::from_fn(2 * n, |r, _| if r < n { meas.samples[r].re } else { meas.samples[r - n].im });
    let svd = x.clone().svd(true, true);
    let (lo, hi) = svd.singular_values.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &s| (l.min(s), h.max(s)));
    let condition = if lo == 0.0 { f64::INFINITY } else { hi / lo };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let p = svd.solve(&y, 0.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut p = Vector3::new(p[0], p[1], p[2]);
    if constraint == Constraint::Simplex {
        let gram: Matrix3<f64> = (x.transpose() * &x).fixed_view::<3, 3>(0, 0).into();
        let rhs: DVector<f64> = x.transpose() * &y;
        p = simplex_least_squares(&gram, &Vector3::new(rhs[0], rhs[1], rhs[2]), &p);
    }
    let fit = &x * DVector::from_column_slice(p.as_slice());
    let rms_residual = ((&y - fit).norm_squared() / (2 * n) as f64).sqrt();
    Ok(Extraction { populations: [p[0], p[1], p[2]], rms_residual, condition })
}

/// Minimize ½pᵀGp − bᵀp over the probability simplex by enumerating the
/// seven faces; `unconstrained` is returned unchanged when already feasible.
fn simplex_least_squares(g: &Matrix3<f64>, b: &Vector3<f64>, unconstrained: &Vector3<f64>) -> Vector3<f64> {
    let feasible = |p: &Vector3<f64>| p.iter().all(|v| *v >= 0.0) && (p.sum() - 1.0).abs() <= 1e-12;
    if feasible(unconstrained) {
        return *unconstrained;
    }
    let objective = |p: &Vector3<f64>| 0.5 * p.dot(&(g * p)) - b.dot(p);
    let mut best: Option<(f64, Vector3<f64>)> = None;
    for mask in 1u8..8 {
        let support: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
        let m = support.len();
        // KKT system of the face: G_S p_S + λ1 = b_S, Σ p_S = 1
        let mut kkt = DMatrix::<f64>::zeros(m + 1, m + 1);
        let mut rhs = DVector::<f64>::zeros(m + 1);
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                kkt[(r, c)] = g[(i, j)];
            }
            kkt[(r, m)] = 1.0;
            kkt[(m, r)] = 1.0;
            rhs[r] = b[i];
        }
        rhs[m] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let mut p = Vector3::zeros();
        for (r, &i) in support.iter().enumerate() {
            p[i] = sol[r];
        }
        if p.iter().any(|v| *v < 0.0) {
            continue;
        }
        // exact renormalization removes round-off from the linear solve
        p /= p.sum();
        let f = objective(&p);
        if best.is_none_or(|(bf, _)| f < bf) {
            best = Some((f, p));
        }
    }
    best.map_or(Vector3::new(1.0, 0.0, 0.0), |(_, p)| p)
}

/// Leakage fractions of the calibration preparations: 0 ≤ εᵢⱼ < 1, ε₀₂ + ε₁₂ < 1.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonMatrix {
    pub eps01: f64,
    pub eps12: f64,
    pub eps02: f64,
}

impl EpsilonMatrix {
    pub fn new(eps01: f64, eps12: f64, eps02: f64) -> Result<Self> {
        let e = Self { eps01, eps12, eps02 };
        e.validate()?;
        Ok(e)
    }

    /// Values quoted for the transmon readout chain.
    pub fn transmon_reference() -> Self {
        Self { eps01: 0.043, eps12: 0.05, eps02: 0.066 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps01", self.eps01), ("eps12", self.eps12), ("eps02", self.eps02)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::param(name, format!("must lie in [0, 1), got {v}")));
            }
        }
        if self.eps02 + self.eps12 >= 1.0 {
            return Err(Error::param("eps02", format!("eps02 + eps12 = {} must be below 1", self.eps02 + self.eps12)));
        }
        Ok(())
    }

    /// Sidecar text: one `key = value` line per fraction.
    pub fn to_sidecar(&self) -> String {
        format!("eps01 = {}\neps12 = {}\neps02 = {}\n", self.eps01, self.eps12, self.eps02)
    }

    pub fn from_sidecar(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Parse(format!("line {}: expected key = value", k + 1)))?;
            let key = key.trim();
            if !matches!(key, "eps01" | "eps12" | "eps02") {
                return Err(Error::Parse(format!("line {}: unknown key `{key}`", k + 1)));
            }
            let v: f64 = value.trim().parse().map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?;
            if values.insert(key.to_string(), v).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key `{key}`", k + 1)));
            }
        }
        let get = |k: &str| values.get(k).copied().ok_or_else(|| Error::Parse(format!("missing key `{k}`")));
        Self::new(get("eps01")?, get("eps12")?, get("eps02")?)
    }
}

/// Undo leakage in the calibration preparations:
/// r̃₀ = r₀, r̃₁ = (r₁ − ε₀₁r̃₀)/(1 − ε₀₁), r̃₂ = (r₂ − ε₀₂r̃₀ − ε₁₂r̃₁)/(1 − ε₀₂ − ε₁₂).
pub fn correct_calibration(raw: &CalibrationSet, eps: &EpsilonMatrix) -> Result<CalibrationSet> {
    eps.validate()?;
    let d1 = 1.0 - eps.eps01;
    let d2 = 1.0 - eps.eps02 - eps.eps12;
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::param("eps", "correction denominator is not positive"));
    }
    let [r0, r1, r2] = &raw.traces;
    let t0 = r0.clone();
    let t1 = r1.combine(&t0, 1.0 / d1, -eps.eps01 / d1);
    let partial = r2.combine(&t0, 1.0 / d2, -eps.eps02 / d2);
    let t2 = partial.combine(&t1, 1.0, -eps.eps12 / d2);
    CalibrationSet::new([t0, t1, t2])
}

/// Forward leakage model, the exact inverse of [`correct_calibration`].
pub fn contaminate_calibration(ideal: &CalibrationSet, eps: &EpsilonMatrix) -> Result<CalibrationSet> {
    eps.validate()?;
    let [t0, t1, t2] = &ideal.traces;
    let r1 = t1.combine(t0, 1.0 - eps.eps01, eps.eps01);
    let partial = t2.combine(t0, 1.0 - eps.eps02 - eps.eps12, eps.eps02);
    let r2 = partial.combine(t1, 1.0, eps.eps12);
    CalibrationSet::new([t0.clone(), r1, r2])
}

/// File names of a calibration set inside a directory.
pub const CALIBRATION_FILES: [&str; 3] = ["cal0.csv", "cal1.csv", "cal2.csv"];
pub const EPSILON_FILE: &str = "epsilon.txt";

pub fn write_calibration_dir(dir: &Path, cal: &CalibrationSet, eps: Option<&EpsilonMatrix>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (trace, name) in cal.traces.iter().zip(CALIBRATION_FILES) {
        trace.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))?;
    }
    if let Some(e) = eps {
        std::fs::write(dir.join(EPSILON_FILE), e.to_sidecar())?;
    }
    Ok(())
}

/// Load the three calibration traces and, if present, the epsilon sidecar.
pub fn read_calibration_dir(dir: &Path) -> Result<(CalibrationSet, Option<EpsilonMatrix>)> {
    let read = |name: &str| -> Result<Trace> {
        let path = dir.join(name);
        let file = std::fs::File::open(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Trace::read_csv(file)
    };
    let cal = CalibrationSet::new([read(CALIBRATION_FILES[0])?, read(CALIBRATION_FILES[1])?, read(CALIBRATION_FILES[2])?])?;
    let eps_path = dir.join(EPSILON_FILE);
    let eps = if eps_path.exists() { Some(EpsilonMatrix::from_sidecar(&std::fs::read_to_string(eps_path)?)?) } else { None };
    Ok((cal, eps))
}
