//! Parameter sweeps over protocol settings, with per-point optimal-phase
//! search, CSV export and a resumable on-disk cache.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hamiltonians::{FidelityTier, LoopPhases};
use crate::metrics::{stirap_area, Observable, TransferReport};
use crate::protocol::{run_protocol, CdMode, ProtocolSpec};
use crate::su3::wrap_phase;

/// Coarse grid size of the phase search.
pub const PHASE_COARSE_POINTS: usize = 24;
/// Final bracket width of the golden-section refinement (rad).
pub const PHASE_TOLERANCE: f64 = 1e-3;
/// p₂ variation below which the phase landscape counts as flat.
pub const FLAT_LANDSCAPE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Signed pulse separation t_s (ns).
    TS,
    Sigma,
    /// |t_s|/σ; sets t_s = −ratio·σ.
    SeparationRatio,
    Phi01,
    Phi12,
    PhiTilde,
    /// STIRAP area 𝒜 (rad), reached by scaling both peaks.
    Area,
    /// CD area 𝒜₀₂ (rad) of the untruncated envelope.
    AreaCd,
    /// Common STIRAP amplitude factor.
    AmplitudeScale,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TS => "t_s",
            Self::Sigma => "sigma",
            Self::SeparationRatio => "ts_over_sigma",
            Self::Phi01 => "phi01",
            Self::Phi12 => "phi12",
            Self::PhiTilde => "phi_tilde",
            Self::Area => "area",
            Self::AreaCd => "area_cd",
            Self::AmplitudeScale => "amplitude_scale",
        }
    }

    /// Application order: geometry first, then amplitudes, then phases.
    fn rank(&self) -> u8 {
        match self {
            Self::Sigma => 0,
            Self::TS | Self::SeparationRatio => 1,
            Self::AmplitudeScale => 2,
            Self::Area => 3,
            Self::AreaCd => 4,
            Self::Phi01 | Self::Phi12 | Self::PhiTilde => 5,
        }
    }

    fn is_phase(&self) -> bool {
        matches!(self, Self::Phi01 | Self::Phi12 | Self::PhiTilde)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn new(axis: Axis, start: f64, stop: f64, count: usize) -> Self {
        Self { axis, start, stop, count }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ProtocolSpec,
    pub axes: Vec<AxisRange>,
    pub optimize_phase: bool,
    pub tier: FidelityTier,
    pub dissipation: bool,
    pub observable: Observable,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::Config(format!("a sweep needs 1 or 2 axes, got {}", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].axis == self.axes[1].axis {
            return Err(Error::Config(format!("axis `{}` appears twice", self.axes[0].axis.name())));
        }
        for a in &self.axes {
            if a.count == 0 {
                return Err(Error::Config(format!("axis `{}` has no points", a.axis.name())));
            }
            if !(a.start.is_finite() && a.stop.is_finite()) {
                return Err(Error::Config(format!("axis `{}` has a non-finite bound", a.axis.name())));
            }
            if self.optimize_phase && a.axis.is_phase() {
                return Err(Error::Config(format!(
                    "axis `{}` conflicts with phase optimization",
                    a.axis.name()
                )));
            }
        }
        if self.axes.iter().any(|a| a.axis == Axis::TS) && self.axes.iter().any(|a| a.axis == Axis::SeparationRatio) {
            return Err(Error::Config("t_s and ts_over_sigma cannot both be swept".into()));
        }
        if self.axes.iter().any(|a| a.axis == Axis::Area) && self.axes.iter().any(|a| a.axis == Axis::AmplitudeScale) {
            return Err(Error::Config("area and amplitude_scale cannot both be swept".into()));
        }
        if self.optimize_phase && self.base.cd == CdMode::Off {
            return Err(Error::Config("phase optimization requires the CD drive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid coordinates of point `index` (row-major, last axis fastest).
    pub fn coordinates(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        let mut idx = vec![0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            idx[k] = rem % a.count;
            rem /= a.count;
        }
        self.axes.iter().zip(idx).map(|(a, i)| a.values()[i]).collect()
    }

    /// Protocol evaluated at point `index`.
    pub fn point(&self, index: usize) -> Result<ProtocolSpec> {
        let mut spec = self.base;
        spec.tier = self.tier;
        spec.dissipation = self.dissipation;
        let coords = self.coordinates(index);
        let mut order: Vec<(Axis, f64)> = self.axes.iter().map(|a| a.axis).zip(coords).collect();
        order.sort_by_key(|(a, _)| a.rank());
        let p = spec.pair;
        let (mut o01, mut o12, mut sigma, mut t_s) = (p.omega01_peak, p.omega12_peak, p.sigma, p.t_s);
        for (axis, v) in order {
            match axis {
                Axis::Sigma => sigma = v,
                Axis::TS => t_s = v,
                Axis::SeparationRatio => t_s = -v * sigma,
                Axis::AmplitudeScale => spec.stirap_scale = v,
                Axis::Area => {
                    spec.pair = crate::pulses::StirapPair::new(o01, o12, sigma, t_s)?;
                    let unit = stirap_area(&spec.pair);
                    if unit == 0.0 {
                        return Err(Error::Config("area axis needs nonzero base STIRAP amplitudes".into()));
                    }
                    spec.stirap_scale = v / unit;
                }
                Axis::AreaCd => spec.cd_area_scale = v / PI,
                Axis::Phi01 => spec.phases.phi01 = v,
                Axis::Phi12 => spec.phases.phi12 = v,
                Axis::PhiTilde => spec.phases.phi_tilde = v,
            }
            if matches!(axis, Axis::Sigma | Axis::TS | Axis::SeparationRatio) {
                spec.pair = crate::pulses::StirapPair::new(o01, o12, sigma, t_s)?;
                (o01, o12) = (spec.pair.omega01_peak, spec.pair.omega12_peak);
            }
        }
        spec.pair = crate::pulses::StirapPair::new(o01, o12, sigma, t_s)?;
        Ok(spec)
    }

    /// SHA-256 over the canonical JSON form of the spec.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("sweep spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Result of a phase search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseOptimum {
    /// Optimal loop phase Φ in (−π, π].
    pub phi: f64,
    pub p2: f64,
    pub report: TransferReport,
    /// The landscape is flat; `phi` is the input phase.
    pub insensitive: bool,
}

fn with_loop_phase(spec: &ProtocolSpec, phi: f64) -> ProtocolSpec {
    let mut s = *spec;
    s.phases = LoopPhases::with_loop_phase(spec.phases.phi01, spec.phases.phi12, phi);
    s
}

/// Maximize p₂ over the loop phase Φ by varying φ̃: a coarse grid of 24
/// points followed by golden-section refinement to 1e-3 rad.
pub fn optimize_phase(point: &ProtocolSpec, observable: Observable) -> Result<PhaseOptimum> {
    if point.cd == CdMode::Off {
        return Err(Error::Config("phase optimization requires the CD drive".into()));
    }
    let eval = |phi: f64| -> Result<(f64, TransferReport)> {
        let r = run_protocol(&with_loop_phase(point, phi))?.report;
        Ok((r.p2(observable), r))
    };
    let step = 2.0 * PI / PHASE_COARSE_POINTS as f64;
    let grid: Vec<f64> = (0..PHASE_COARSE_POINTS).map(|i| -PI + step * (i + 1) as f64).collect();
    let mut coarse = Vec::with_capacity(grid.len());
    for &phi in &grid {
        coarse.push(eval(phi)?);
    }
    let (lo, hi) = coarse.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (p, _)| (l.min(*p), h.max(*p)));
    if hi - lo < FLAT_LANDSCAPE {
        let (p2, report) = eval(point.phases.loop_phase())?;
        return Ok(PhaseOptimum { phi: point.phases.loop_phase(), p2, report, insensitive: true });
    }
    let best = (0..grid.len()).max_by(|&a, &b| coarse[a].0.total_cmp(&coarse[b].0)).unwrap_or(0);
    let (mut a, mut b) = (grid[best] - step, grid[best] + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while b - a > PHASE_TOLERANCE {
        if f1.0 >= f2.0 {
            b = x2;
            (x2, f2) = (x1, f1);
            x1 = b - g * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            (x1, f1) = (x2, f2);
            x2 = a + g * (b - a);
            f2 = eval(x2)?;
        }
    }
    let mut candidates = vec![(grid[best], coarse[best]), (x1, f1), (x2, f2)];
    candidates.sort_by(|l, r| r.1 .0.total_cmp(&l.1 .0));
    let (phi, (p2, report)) = candidates[0];
    Ok(PhaseOptimum { phi: wrap_phase(phi), p2, report, insensitive: false })
}

/// Outcome at one grid point; failures are kept as messages.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub coords: Vec<f64>,
    pub outcome: std::result::Result<PointOutcome, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointOutcome {
    pub report: TransferReport,
    pub phi_opt: Option<f64>,
    pub insensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub tier: FidelityTier,
    pub observable: Observable,
    pub config_hash: String,
    pub software_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axes: Vec<AxisRange>,
    pub points: Vec<SweepPoint>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    /// p₂ by the sweep's observable; `None` for failed points.
    pub fn p2(&self, index: usize) -> Option<f64> {
        let obs = self.metadata.observable;
        self.points.get(index)?.outcome.as_ref().ok().map(|o| o.report.p2(obs))
    }

    /// Values as a row-major grid (single-axis sweeps have one row).
    pub fn grid<F: Fn(&PointOutcome) -> Option<f64>>(&self, f: F) -> Vec<Vec<Option<f64>>> {
        let cols = self.axes.last().map_or(1, |a| a.count);
        self.points
            .chunks(cols)
            .map(|row| row.iter().map(|p| p.outcome.as_ref().ok().and_then(&f)).collect())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let m = &self.metadata;
        writeln!(
            out,
            "# sastirap-sweep v1 tier={} observable={} config={} version={}",
            serde_json::to_string(&m.tier).unwrap_or_default().trim_matches('"'),
            serde_json::to_string(&m.observable).unwrap_or_default().trim_matches('"'),
            m.config_hash,
            m.software_version
        )?;
        let names: Vec<&str> = self.axes.iter().map(|a| a.axis.name()).collect();
        writeln!(out, "{},p2,p2_final,p2_peak,t_tr_ns,qsl_ns,area_stirap,area_cd,phi,phi_opt,flags", names.join(","))?;
        for p in &self.points {
            let coords: Vec<String> = p.coords.iter().map(|c| format!("{c:.9}")).collect();
            match &p.outcome {
                Ok(o) => {
                    let r = &o.report;
                    let mut flags = Vec::new();
                    if o.insensitive {
                        flags.push("insensitive".to_string());
                    }
                    writeln!(
                        out,
                        "{},{:.9},{:.9},{:.9},{},{},{:.9},{:.9},{:.9},{},{}",
                        coords.join(","),
                        r.p2(m.observable),
                        r.p2_final,
                        r.p2_peak,
                        r.t_tr.map_or(String::new(), |v| format!("{v:.6}")),
                        r.qsl.map_or(String::new(), |v| format!("{v:.6}")),
                        r.area_stirap,
                        r.area_cd,
                        r.phi_used,
                        o.phi_opt.map_or(String::new(), |v| format!("{v:.9}")),
                        flags.join(";")
                    )?;
                }
                Err(e) => {
                    let msg: String = e.chars().map(|c| if c == ',' || c == '\n' { ';' } else { c }).collect();
                    writeln!(out, "{},,,,,,,,,,error: {msg}", coords.join(","))?;
                }
            }
        }
        Ok(())
    }
}

/// Evaluate one grid point.
pub fn evaluate_point(spec: &SweepSpec, index: usize) -> SweepPoint {
    let coords = spec.coordinates(index);
    let outcome = spec.point(index).and_then(|p| {
        if spec.optimize_phase {
            let o = optimize_phase(&p, spec.observable)?;
            Ok(PointOutcome { report: o.report, phi_opt: Some(o.phi), insensitive: o.insensitive })
        } else {
            Ok(PointOutcome { report: run_protocol(&p)?.report, phi_opt: None, insensitive: false })
        }
    });
    SweepPoint { coords, outcome: outcome.map_err(|e| e.to_string()) }
}

/// Worker-pool settings and the optional resumable cache.
#[derive(Debug, Clone, Default)]
pub struct SweepRunner {
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    /// Directory holding `<config hash>.cache` files.
    pub cache_dir: Option<PathBuf>,
    /// Reuse points already present in the cache.
    pub resume: bool,
}

impl SweepRunner {
    pub fn run(&self, spec: &SweepSpec) -> Result<SweepResult> {
        spec.validate()?;
        let hash = spec.config_hash();
        let cache_path = self.cache_dir.as_ref().map(|d| d.join(format!("{hash}.cache")));
        let mut done = BTreeMap::new();
        if let (Some(path), true) = (&cache_path, self.resume) {
            if path.exists() {
                done = read_cache(path)?;
            }
        }
        let writer = match &cache_path {
            Some(path) => {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                let file = if self.resume {
                    OpenOptions::new().create(true).append(true).open(path)?
                } else {
                    File::create(path)?
                };
                Some(Mutex::new(BufWriter::new(file)))
            }
            None => None,
        };
        let todo: Vec<usize> = (0..spec.len()).filter(|i| !done.contains_key(i)).collect();
        let work = || -> Vec<(usize, SweepPoint)> {
            todo.par_iter()
                .map(|&i| {
                    let p = evaluate_point(spec, i);
                    if let (Some(w), Ok(o)) = (&writer, &p.outcome) {
                        if let Ok(mut w) = w.lock() {
                            let _ = write_record(&mut *w, i, o).and_then(|_| w.flush().map_err(Error::from));
                        }
                    }
                    (i, p)
                })
                .collect()
        };
        let fresh = match self.jobs {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
                .install(work),
            None => work(),
        };
        let mut points: Vec<Option<SweepPoint>> = vec![None; spec.len()];
        for (i, o) in done {
            if i < points.len() {
                points[i] = Some(SweepPoint { coords: spec.coordinates(i), outcome: Ok(o) });
            }
        }
        for (i, p) in fresh {
            points[i] = Some(p);
        }
        Ok(SweepResult {
            axes: spec.axes.clone(),
            points: points.into_iter().map(|p| p.expect("every grid point evaluated")).collect(),
            metadata: SweepMetadata {
                tier: spec.tier,
                observable: spec.observable,
                config_hash: hash,
                software_version: env!("CARGO_PKG_VERSION").to_string(),
            },
        })
    }
}

/// Run on the global pool without a cache.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    SweepRunner::default().run(spec)
}

const RECORD_MAGIC: u32 = 0x5341_5331;

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_opt(buf: &mut Vec<u8>, v: Option<f64>) {
    put_f64(buf, v.unwrap_or(f64::NAN));
}

/// Fixed-size little-endian record: magic, index, flags, nine f64 fields.
fn write_record<W: Write>(out: &mut W, index: usize, o: &PointOutcome) -> Result<()> {
    let r = &o.report;
    let mut buf = Vec::with_capacity(RECORD_LEN);
    buf.extend_from_slice(&RECORD_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(index as u64).to_le_bytes());
    let flags = u8::from(o.insensitive) | (u8::from(o.phi_opt.is_some()) << 1) | (u8::from(r.t_tr.is_some()) << 2) | (u8::from(r.qsl.is_some()) << 3);
    buf.push(flags);
    for v in [r.p2_final, r.p2_peak] {
        put_f64(&mut buf, v);
    }
    put_opt(&mut buf, r.t_tr);
    put_opt(&mut buf, r.qsl);
    for v in [r.area_stirap, r.area_cd, r.phi_used] {
        put_f64(&mut buf, v);
    }
    put_opt(&mut buf, o.phi_opt);
    out.write_all(&buf)?;
    Ok(())
}

const RECORD_LEN: usize = 4 + 8 + 1 + 8 * 8;

fn read_cache(path: &Path) -> Result<BTreeMap<usize, PointOutcome>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let mut out = BTreeMap::new();
    // a trailing partial record from an interrupted run is ignored
    for rec in bytes.chunks_exact(RECORD_LEN) {
        let u32_at = |o: usize| u32::from_le_bytes(rec[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(rec[o..o + 8].try_into().expect("8 bytes"));
        let f = |k: usize| f64::from_bits(u64_at(13 + 8 * k));
        if u32_at(0) != RECORD_MAGIC {
            return Err(Error::Parse(format!("corrupt sweep cache {}", path.display())));
        }
        let index = u64_at(4) as usize;
        let flags = rec[12];
        let some = |bit: u8, v: f64| if flags & (1 << bit) != 0 { Some(v) } else { None };
        let report = TransferReport {
            p2_final: f(0),
            p2_peak: f(1),
            t_tr: some(2, f(2)),
            qsl: some(3, f(3)),
            area_stirap: f(4),
            area_cd: f(5),
            phi_used: f(6),
        };
        out.insert(index, PointOutcome { report, phi_opt: some(1, f(7)), insensitive: flags & 1 != 0 });
    }
    Ok(out)
}
