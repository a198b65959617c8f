//! Experiment driver behind the `sgps` command line.

pub mod config;
pub mod pgm;
pub mod svg;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analysis::smooth_test_image;
use crate::config::PatchConfig;
use crate::error::{Result, SgpsError};
use crate::noise_est::estimate_sigma;
use crate::prior::PerturbedDenoiser;
use crate::report::{fmt_f64, fmt_opt, RunReport};
use crate::rng::RngStream;
use crate::sampler::sgps_run;
use crate::signal::Signal;
use crate::tasks::measure;

pub use config::{ExperimentConfig, Override, SweepPoint};

/// Overrides `experiment.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SGPS_OUTPUT_DIR";

const DATA_STREAM: u64 = 0xda7a;

pub const SUMMARY_CSV_HEADER: [&str; 13] = [
    "point",
    "repeat",
    "alpha",
    "langevin_eta",
    "sigma_hat_scale",
    "mc_probes",
    "ode_substeps",
    "sure_repeats",
    "status",
    "final_psnr",
    "final_mse",
    "total_nfe",
    "message",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// The base sampler configuration only.
    Single,
    /// Every point of the `[sweep]` section.
    Sweep,
}

#[derive(Debug)]
pub struct JobResult {
    pub point: usize,
    pub repeat: usize,
    pub outcome: Result<RunReport>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub jobs: Vec<JobResult>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> usize {
        self.jobs.iter().filter(|j| j.outcome.is_err()).count()
    }
}

/// First 12 hex digits of the SHA-256 of the config file.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))[..12].to_string()
}

pub fn steps_file_name(hash: &str, point: usize, repeat: usize) -> String {
    format!("steps_{hash}_p{point}_r{repeat}.csv")
}

pub fn summary_file_name(hash: &str) -> String {
    format!("summary_{hash}.csv")
}

pub fn plot_file_name(hash: &str) -> String {
    format!("influx_{hash}.svg")
}

pub fn resolve_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.experiment.output_dir.clone())
}

/// Loads, runs and writes all artifacts of an experiment file. Config problems are
/// `SgpsError::Config`; run failures are reported per job in the outcome.
pub fn run_experiment(path: &Path, mode: Mode) -> Result<ExperimentOutcome> {
    let (cfg, bytes) = ExperimentConfig::load(path)?;
    let out_dir = resolve_output_dir(&cfg);
    run_loaded(&cfg, &config_hash(&bytes), &out_dir, mode)
}

pub fn run_loaded(cfg: &ExperimentConfig, hash: &str, out_dir: &Path, mode: Mode) -> Result<ExperimentOutcome> {
    let points = match mode {
        Mode::Single => {
            if cfg.sweep.is_some() {
                log::info!("[sweep] section ignored by `run`; use `sweep` to expand it");
            }
            vec![cfg.base_point()]
        }
        Mode::Sweep => cfg.sweep_points()?,
    };
    let prior = cfg.build_prior()?;
    let op = cfg.build_operator()?;
    let den = PerturbedDenoiser::new(&prior, cfg.prior.perturbation, cfg.prior.perturbation_frequency)
        .map_err(|e| SgpsError::Config(format!("prior.perturbation: {e}")))?;
    let truth_image = match &cfg.prior.truth_pgm {
        Some(p) => {
            let img = pgm::read_pgm(p)?;
            if img.shape() != prior.shape() {
                return Err(SgpsError::Config(format!(
                    "prior.truth_pgm: image shape {:?} does not match prior.shape {:?}",
                    img.shape(),
                    prior.shape()
                )));
            }
            Some(img)
        }
        None => None,
    };

    let seed = cfg.experiment.seed;
    let data = (0..cfg.experiment.repeats)
        .map(|r| {
            let mut rng = RngStream::new(seed, r as u64).fork(DATA_STREAM);
            let truth = match &truth_image {
                Some(img) => img.clone(),
                None => prior.sample(&mut rng),
            };
            measure(&op, truth, cfg.experiment.noise_sigma, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.experiment.repeats).map(move |r| (p, r)))
        .collect();
    let results: Vec<JobResult> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let m = &data[r];
            let outcome = sgps_run(
                &den,
                &op,
                &m.y,
                &points[p].sampler,
                RngStream::new(seed, r as u64),
                Some(&m.truth),
            )
            .map(|(_, report)| report);
            if let Err(e) = &outcome {
                log::warn!("point {p} repeat {r} failed: {e}");
            }
            JobResult {
                point: p,
                repeat: r,
                outcome,
            }
        })
        .collect();

    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for job in &results {
        if let Ok(report) = &job.outcome {
            let path = out_dir.join(steps_file_name(hash, job.point, job.repeat));
            report.write_steps_csv(std::fs::File::create(&path)?)?;
            files.push(path);
        }
    }
    let summary = out_dir.join(summary_file_name(hash));
    write_summary(&points, &results, std::fs::File::create(&summary)?)?;
    files.push(summary);
    let plot = out_dir.join(plot_file_name(hash));
    std::fs::write(&plot, influx_plot(&points, &results))?;
    files.push(plot);
    Ok(ExperimentOutcome { jobs: results, files })
}

fn write_summary<W: std::io::Write>(points: &[SweepPoint], jobs: &[JobResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_CSV_HEADER)?;
    for job in jobs {
        let s = &points[job.point].sampler;
        let (status, psnr, mse, nfe, msg) = match &job.outcome {
            Ok(r) => (
                "ok",
                fmt_opt(r.final_record.psnr),
                fmt_opt(r.final_record.mse),
                r.total_nfe().to_string(),
                String::new(),
            ),
            Err(e) => ("failed", String::new(), String::new(), String::new(), e.to_string()),
        };
        w.write_record([
            job.point.to_string(),
            job.repeat.to_string(),
            fmt_f64(s.alpha),
            s.langevin_eta.map(fmt_f64).unwrap_or_else(|| "default".into()),
            fmt_f64(s.sigma_hat_scale),
            s.mc_probes.to_string(),
            s.ode_substeps.to_string(),
            s.sure_repeats.to_string(),
            status.to_string(),
            psnr,
            mse,
            nfe,
            msg,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn influx_plot(points: &[SweepPoint], jobs: &[JobResult]) -> String {
    let mut series = Vec::new();
    let mean_over = |point: usize, f: &dyn Fn(&crate::report::StepRecord) -> f64| -> Option<Vec<f64>> {
        let reports: Vec<&RunReport> = jobs
            .iter()
            .filter(|j| j.point == point)
            .filter_map(|j| j.outcome.as_ref().ok())
            .collect();
        let first = reports.first()?;
        Some(
            (0..first.steps.len())
                .map(|i| reports.iter().map(|r| f(&r.steps[i])).sum::<f64>() / reports.len() as f64)
                .collect(),
        )
    };
    if let Some(v) = mean_over(0, &|s| s.sigma_t) {
        series.push(svg::Series { label: "scheduled sigma_t".into(), values: v });
    }
    if let Some(v) = mean_over(0, &|s| s.sigma_hat_raw) {
        series.push(svg::Series { label: "estimate after guidance".into(), values: v });
    }
    for p in points {
        if let Some(v) = mean_over(p.index, &|s| s.sigma_hat_star) {
            let label = if points.len() == 1 { "estimate after SURE".to_string() } else { format!("after SURE, point {}", p.index) };
            series.push(svg::Series { label, values: v });
        }
    }
    svg::log_line_chart("Residual noise level per step", "step", &series)
}

/// Noise estimate of a PGM image.
pub fn estimate_image(path: &Path, patch: &PatchConfig) -> Result<f64> {
    let img = pgm::read_pgm(path)?;
    estimate_sigma(&img, patch)
}

/// `v` with six significant digits in fixed notation (zero prints as `0.000000`).
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.6}");
    }
    let decimals = (5 - v.abs().log10().floor() as i64).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Smooth test image plus white Gaussian noise, clamped to [0, 1].
pub fn synth_image(sigma: f64, height: usize, width: usize, seed: u64) -> Result<Signal> {
    if !(sigma >= 0.0 && sigma.is_finite()) || height == 0 || width == 0 {
        return Err(SgpsError::InvalidArgument(format!(
            "synth needs sigma >= 0 and a positive size, got sigma {sigma}, {height}x{width}"
        )));
    }
    let clean = smooth_test_image(height, width);
    let mut rng = RngStream::new(seed, 0);
    clean.add_scaled(&rng.normal_signal(clean.shape()), sigma)?.map(|v| v.clamp(0.0, 1.0))
}
