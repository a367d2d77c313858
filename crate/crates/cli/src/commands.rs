use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use image::Rgb;
use sastirap_core::dynamics::write_trajectory_csv;
use sastirap_core::metrics::{qsl_for_thresholds, REPORT_CSV_HEADER};
use sastirap_core::protocol::{run_protocol, ProtocolSpec};
use sastirap_core::pulses::write_envelope_csv;
use sastirap_core::su3::{mhz_to_rad_per_ns, rad_per_ns_to_mhz};
use sastirap_core::sweeps::{SweepResult, SweepRunner};
use sastirap_core::tomography::{
    contaminate_calibration, correct_calibration, extract_populations, read_calibration_dir, synthesize_measured_trace,
    synthetic_calibration, write_calibration_dir, CalibrationSet, Trace, TraceTemplate,
};

use crate::config::{AxisName, RunConfig};
use crate::plot::{self, Heatmap};

pub struct RunContext {
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub resume: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn sample_times(spec: &ProtocolSpec) -> Vec<f64> {
    let (a, b) = spec.time_span();
    let dt = spec.integrator().sample_interval;
    let n = ((b - a) / dt).ceil() as usize;
    (0..=n).map(|k| (a + k as f64 * dt).min(b)).collect()
}

pub fn simulate(cfg: &RunConfig, spec: &ProtocolSpec, ctx: &RunContext) -> Result<()> {
    let run = run_protocol(spec)?;
    let traj_path = ctx.out.join("trajectory.csv");
    let mut w = create(&traj_path)?;
    write_trajectory_csv(&mut w, &run.trajectory)?;
    w.flush()?;
    let mut w = create(&ctx.out.join("report.csv"))?;
    run.report.write_csv(&mut w)?;
    w.flush()?;
    let r = &run.report;
    println!("{REPORT_CSV_HEADER}");
    println!("{}", r.csv_row());
    println!("p2 = {:.4} (peak {:.4}), loop phase = {:.4}π", r.p2_final, r.p2_peak, r.phi_used / std::f64::consts::PI);
    if let Some(t) = r.t_tr {
        println!("transfer time = {t:.2} ns");
    }
    if cfg.output.plots {
        let times = &run.trajectory.times;
        let pops = run.trajectory.populations();
        let col = |k: usize| pops.iter().map(|p| p[k]).collect::<Vec<_>>();
        let (p0, p1, p2) = (col(0), col(1), col(2));
        let top = plot::line_plot(
            times,
            &[(&p0, Rgb([31, 119, 180])), (&p1, Rgb([44, 160, 44])), (&p2, Rgb([214, 39, 40]))],
            (0.0, 1.0),
            640,
            240,
        );
        let pair = spec.driven_pair()?;
        let cd = spec.cd_envelope()?;
        let env = |f: &dyn Fn(f64) -> f64| times.iter().map(|&t| rad_per_ns_to_mhz(f(t))).collect::<Vec<_>>();
        let e01 = env(&|t| pair.omega01(t));
        let e12 = env(&|t| pair.omega12(t));
        let e02 = env(&|t| cd.as_ref().map_or(0.0, |c| c.value(t)));
        let ymax = e01.iter().chain(&e12).chain(&e02).fold(1e-9f64, |m, v| m.max(*v));
        let bottom = plot::line_plot(
            times,
            &[(&e01, Rgb([31, 119, 180])), (&e12, Rgb([44, 160, 44])), (&e02, Rgb([148, 103, 189]))],
            (0.0, 1.05 * ymax),
            640,
            160,
        );
        let mut img = image::RgbImage::from_pixel(top.width(), top.height() + bottom.height(), Rgb([255, 255, 255]));
        image::imageops::overlay(&mut img, &top, 0, 0);
        image::imageops::overlay(&mut img, &bottom, 0, top.height() as i64);
        plot::save(&img, &ctx.out.join("trajectory.png"))?;
    }
    println!("wrote {}", traj_path.display());
    Ok(())
}

fn user_units(result: &SweepResult) -> SweepResult {
    let mut r = result.clone();
    let factors: Vec<f64> = r.axes.iter().map(|a| AxisName::display_factor(a.axis)).collect();
    for p in &mut r.points {
        for (c, f) in p.coords.iter_mut().zip(&factors) {
            *c *= f;
        }
    }
    r
}

pub fn sweep(cfg: &RunConfig, ctx: &RunContext) -> Result<()> {
    if cfg.sweep.is_empty() {
        bail!("`sweep`: the configuration defines no sweeps");
    }
    for (k, section) in cfg.sweep.iter().enumerate() {
        let spec = cfg.sweep_spec(k)?;
        let runner = SweepRunner { jobs: ctx.jobs, cache_dir: Some(ctx.out.join("cache")), resume: ctx.resume };
        let result = runner.run(&spec).with_context(|| format!("sweep `{}`", section.name))?;
        let csv_path = ctx.out.join(format!("{}.csv", section.name));
        let mut w = create(&csv_path)?;
        user_units(&result).write_csv(&mut w)?;
        w.flush()?;
        let p2: Vec<f64> = (0..result.points.len()).filter_map(|i| result.p2(i)).collect();
        let failed = result.points.len() - p2.len();
        let (lo, hi) = p2.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        println!("{}: {} points, p2 in [{lo:.4}, {hi:.4}], {failed} failed -> {}", section.name, result.points.len(), csv_path.display());
        if cfg.output.plots {
            let obs = spec.observable;
            let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
            let values: Vec<Vec<f64>> =
                result.grid(|o| Some(o.report.p2(obs))).into_iter().map(|r| r.into_iter().map(nan).collect()).collect();
            let times: Vec<Vec<f64>> = result.grid(|o| o.report.t_tr).into_iter().map(|r| r.into_iter().map(nan).collect()).collect();
            let contours = (section.contour_step_ns > 0.0).then_some((times.as_slice(), section.contour_step_ns));
            let img = Heatmap { values: &values, range: (0.0, 1.0), contours, iso: section.p2_contour }.render();
            plot::save(&img, &ctx.out.join(format!("{}.png", section.name)))?;
        }
    }
    Ok(())
}

pub fn qsl(cfg: &RunConfig, spec: &ProtocolSpec) -> Result<()> {
    let omega = match cfg.qsl.as_ref().and_then(|q| q.omega02_max_mhz) {
        Some(v) => mhz_to_rad_per_ns(v),
        None => match spec.cd_envelope()? {
            Some(cd) => cd.peak(),
            None => bail!("`qsl.omega02_max_mhz`: required when the CD drive is off"),
        },
    };
    let t = qsl_for_thresholds(spec.thresholds, omega)?;
    let (ti, tf) = spec.thresholds.mixing_angles();
    println!("omega02_max = {:.3} MHz", rad_per_ns_to_mhz(omega));
    println!("mixing angles = {:.4}π -> {:.4}π", ti / std::f64::consts::PI, tf / std::f64::consts::PI);
    println!("T_QSL = {t:.1} ns");
    Ok(())
}

fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = create(path)?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn tomo(cfg: &RunConfig, ctx: &RunContext, base_dir: &Path) -> Result<()> {
    let Some(t) = &cfg.tomo else { bail!("`tomo`: section missing") };
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
    // `raw` holds the traces as recorded, `ideal` the leakage-corrected ones
    let (raw, ideal, eps): (CalibrationSet, CalibrationSet, _) = match &t.calibration_dir {
        Some(dir) => {
            let (raw, sidecar) = read_calibration_dir(&resolve(dir))?;
            let eps = t.epsilon.or(sidecar);
            let ideal = match &eps {
                Some(e) => correct_calibration(&raw, e)?,
                None => raw.clone(),
            };
            (raw, ideal, eps)
        }
        None => {
            let templates = t.templates.unwrap_or_else(TraceTemplate::reference_set);
            let ideal = synthetic_calibration(&templates, t.cadence_ns, t.samples)?;
            let raw = match &t.epsilon {
                Some(e) => contaminate_calibration(&ideal, e)?,
                None => ideal.clone(),
            };
            (raw, ideal, t.epsilon)
        }
    };
    let measured = match (&t.measured, &t.populations) {
        (Some(path), _) => {
            let path = resolve(path);
            Trace::read_csv(File::open(&path).with_context(|| format!("opening {}", path.display()))?)?
        }
        (None, Some(p)) => synthesize_measured_trace(p, &ideal, t.noise_sigma, t.seed)?,
        (None, None) => bail!("`tomo.populations`: either a measured trace or populations are required"),
    };
    let corrected = extract_populations(&measured, &ideal, t.constraint)?;
    let mut w = create(&ctx.out.join("populations.csv"))?;
    writeln!(w, "# sastirap-populations v1")?;
    writeln!(w, "calibration,p0,p1,p2,rms_residual,condition")?;
    let mut rows = vec![("corrected", corrected)];
    if eps.is_some() {
        rows.push(("uncorrected", extract_populations(&measured, &raw, t.constraint)?));
    }
    for (name, e) in &rows {
        let [p0, p1, p2] = e.populations;
        writeln!(w, "{name},{p0:.12},{p1:.12},{p2:.12},{:.6e},{:.6e}", e.rms_residual, e.condition)?;
        println!("{name}: p0 = {p0:.6}, p1 = {p1:.6}, p2 = {p2:.6} (residual {:.3e})", e.rms_residual);
    }
    w.flush()?;
    write_trace(&ctx.out.join("measured.csv"), &measured)?;
    write_calibration_dir(&ctx.out.join("calibration"), &raw, eps.as_ref())?;
    Ok(())
}

pub fn export_pulses(spec: &ProtocolSpec, ctx: &RunContext) -> Result<()> {
    let path = ctx.out.join("envelopes.csv");
    let mut w = create(&path)?;
    write_envelope_csv(&mut w, &spec.driven_pair()?, spec.cd_envelope()?.as_ref(), sample_times(spec))?;
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}
