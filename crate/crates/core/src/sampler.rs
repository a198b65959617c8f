//! The SURE-guided posterior sampling loop.
//!
//! Per noise level `sigma_t` (largest first):
//! 1. `x0t = D(x_t, sigma_t)` (or a short probability-flow ODE solve),
//! 2. Langevin guidance towards the measurement, warm-started at `x0t`,
//! 3. patch-PCA estimate of the residual noise in the guided sample,
//! 4. a gradient step on SURE at that noise level,
//! 5. re-noise to the next level.
//!
//! With `sure_enabled = false` step 4 is skipped (decoupled denoise/guide/re-noise).

use std::time::Instant;

use crate::config::SamplerConfig;
use crate::error::{invalid, Result, SgpsError};
use crate::guidance::{langevin_guide, LangevinParams};
use crate::metrics::{psnr, DEFAULT_PEAK};
use crate::noise_est::estimate_sigma;
use crate::operators::ForwardOp;
use crate::prior::{CountingDenoiser, Denoiser};
use crate::report::{FinalRecord, RunReport, StepRecord};
use crate::rng::RngStream;
use crate::schedule::build_schedule;
use crate::signal::{mse, Signal};
use crate::sure::{perturbation_epsilon, sure_gradient, sure_update, sure_value_with_probes};

const STREAM_INIT: u64 = 1;
const STREAM_LANGEVIN: u64 = 2;
const STREAM_PROBES: u64 = 3;
const STREAM_RENOISE: u64 = 4;

/// Clean-signal estimate at level `sigma_t` using `substeps` denoiser calls.
///
/// One substep is a single denoiser call. More substeps run Euler on the
/// probability-flow ODE `dx/dsigma = (x - D(x; sigma)) / sigma` down a geometric
/// ladder from `sigma_t` to `t_min`, then denoise once at `t_min`.
pub fn denoise_step<D: Denoiser + ?Sized>(
    den: &D,
    x_t: &Signal,
    sigma_t: f64,
    substeps: usize,
    t_min: f64,
) -> Result<Signal> {
    if substeps == 0 {
        return invalid("denoise_step needs at least one substep");
    }
    if substeps == 1 {
        return den.denoise(x_t, sigma_t);
    }
    let floor = t_min.min(sigma_t);
    let last = (substeps - 1) as f64;
    let levels: Vec<f64> = (0..substeps)
        .map(|j| sigma_t * (floor / sigma_t).powf(j as f64 / last))
        .collect();
    let mut x = x_t.clone();
    for w in levels.windows(2) {
        let d = den.denoise(&x, w[0])?;
        let slope = x.sub(&d)?.scale(1.0 / w[0])?;
        x = x.add_scaled(&slope, w[1] - w[0])?;
    }
    den.denoise(&x, levels[substeps - 1])
}

/// Intermediate signals of one step, handed to observers.
#[derive(Debug)]
pub struct StepView<'a> {
    pub step: usize,
    pub sigma_t: f64,
    pub x_t: &'a Signal,
    pub x0t: &'a Signal,
    pub x0ty: &'a Signal,
    pub x_star: &'a Signal,
}

/// Runs the sampler and returns the final estimate with its per-step report.
/// `truth`, when given, fills the PSNR/MSE fields.
pub fn sgps_run<D: Denoiser + ?Sized>(
    den: &D,
    op: &ForwardOp,
    y: &Signal,
    cfg: &SamplerConfig,
    rng: RngStream,
    truth: Option<&Signal>,
) -> Result<(Signal, RunReport)> {
    sgps_run_observed(den, op, y, cfg, rng, truth, &mut |_| {})
}

pub fn sgps_run_observed<D: Denoiser + ?Sized>(
    den: &D,
    op: &ForwardOp,
    y: &Signal,
    cfg: &SamplerConfig,
    rng: RngStream,
    truth: Option<&Signal>,
    observer: &mut dyn FnMut(&StepView<'_>),
) -> Result<(Signal, RunReport)> {
    let started = Instant::now();
    cfg.validate()?;
    y.ensure_shape(op.output_shape())?;
    if let Some(t) = truth {
        t.ensure_shape(op.input_shape())?;
    }
    let schedule = build_schedule(cfg.steps, cfg.t_min, cfg.t_max(), cfg.rho)?;
    let counter = CountingDenoiser::new(den);
    let shape = op.input_shape().to_vec();

    let mut init_rng = rng.fork(STREAM_INIT);
    let mut langevin_rng = rng.fork(STREAM_LANGEVIN);
    let mut probe_rng = rng.fork(STREAM_PROBES);
    let mut renoise_rng = rng.fork(STREAM_RENOISE);

    let score = |s: &Signal| -> Result<Option<f64>> {
        truth.map(|t| psnr(s, t, DEFAULT_PEAK)).transpose()
    };

    let mut x = init_rng.normal_signal(&shape).scale(schedule.t_max())?;
    let mut records = Vec::with_capacity(cfg.steps);
    let mut x_star = x.clone();

    for step in 0..schedule.len() {
        let sigma_t = schedule.sigma(step);
        let before = counter.count();
        let ctx = |stage: &'static str| move |e: SgpsError| stage_error(e, step, stage);

        let x0t = denoise_step(&counter, &x, sigma_t, cfg.ode_substeps, cfg.t_min).map_err(ctx("denoise"))?;

        let params = LangevinParams::from_config(cfg, sigma_t);
        let x0ty = langevin_guide(&x0t, &x0t, sigma_t, op, y, &params, &mut langevin_rng)
            .map_err(ctx("guidance"))?;

        let sigma_hat_raw = estimate_sigma(&x0ty, &cfg.patch).map_err(ctx("noise-estimate"))?;
        let mut star = x0ty.clone();
        let mut sigma_hat_used = None;
        let mut sure_value = None;
        let mut sure_skipped = false;
        if cfg.sure_enabled {
            let mut probes: Option<Vec<Signal>> = None;
            for repeat in 0..cfg.sure_repeats {
                let estimate = if repeat == 0 {
                    sigma_hat_raw
                } else {
                    estimate_sigma(&star, &cfg.patch).map_err(ctx("noise-estimate"))?
                };
                if estimate < cfg.sigma_floor {
                    log::debug!(
                        "step {step}: noise estimate {estimate:e} below floor {:e}; SURE update skipped",
                        cfg.sigma_floor
                    );
                    sure_skipped = true;
                    break;
                }
                if estimate > sigma_t {
                    log::debug!("step {step}: noise estimate {estimate} clamped to sigma_t {sigma_t}");
                }
                let sigma_hat = estimate.min(sigma_t) * cfg.sigma_hat_scale;
                let epsilon = perturbation_epsilon(&star, cfg.epsilon_divisor);
                let b = match probes.take() {
                    Some(b) if !cfg.resample_probe => b,
                    _ => (0..cfg.mc_probes)
                        .map(|_| probe_rng.normal_signal(&shape))
                        .collect(),
                };
                let eval = sure_value_with_probes(&counter, &star, sigma_hat, epsilon, b)
                    .map_err(ctx("sure"))?;
                let grad = sure_gradient(&counter, &star, &eval).map_err(ctx("sure"))?;
                star = sure_update(&star, &grad, cfg.alpha).map_err(ctx("sure"))?;
                sigma_hat_used = Some(sigma_hat);
                sure_value = Some(eval.value);
                probes = Some(eval.probes);
            }
        }
        let sigma_hat_star = if cfg.sure_enabled && sigma_hat_used.is_some() {
            estimate_sigma(&star, &cfg.patch).map_err(ctx("noise-estimate"))?
        } else {
            sigma_hat_raw
        };

        observer(&StepView {
            step,
            sigma_t,
            x_t: &x,
            x0t: &x0t,
            x0ty: &x0ty,
            x_star: &star,
        });

        records.push(StepRecord {
            step,
            sigma_t,
            sigma_hat_raw,
            sigma_hat_used,
            sure_value,
            sigma_hat_star,
            psnr_x0t: score(&x0t)?,
            psnr_x0ty: score(&x0ty)?,
            psnr_star: score(&star)?,
            nfe: counter.count() - before,
            sure_skipped,
        });

        let next = schedule.next_sigma(step);
        x = if next > 0.0 {
            let z = renoise_rng.normal_signal(&shape);
            star.add_scaled(&z, next).map_err(ctx("renoise"))?
        } else {
            star.clone()
        };
        x_star = star;
    }

    let final_record = FinalRecord {
        psnr: score(&x_star)?,
        mse: truth.map(|t| mse(&x_star, t)).transpose()?,
        total_nfe: counter.count(),
        wall_time: started.elapsed(),
    };
    Ok((
        x_star,
        RunReport {
            steps: records,
            final_record,
        },
    ))
}

fn stage_error(e: SgpsError, step: usize, stage: &str) -> SgpsError {
    match e {
        SgpsError::Divergence { detail, step: inner, .. } => SgpsError::Divergence {
            step,
            stage: stage.into(),
            detail: format!("inner iteration {inner}: {detail}"),
        },
        SgpsError::NonFinite(what) => SgpsError::Divergence {
            step,
            stage: stage.into(),
            detail: format!("non-finite value in {what}"),
        },
        other => other,
    }
}

/// Paired runs with and without the SURE update under common random numbers.
#[derive(Debug, Clone)]
pub struct InfluxTrace {
    pub with_sure: RunReport,
    pub without_sure: RunReport,
}

pub fn noise_influx_trace<D: Denoiser + ?Sized>(
    den: &D,
    op: &ForwardOp,
    y: &Signal,
    cfg: &SamplerConfig,
    seed: u64,
    stream_id: u64,
    truth: Option<&Signal>,
) -> Result<InfluxTrace> {
    let with_cfg = SamplerConfig {
        sure_enabled: true,
        ..cfg.clone()
    };
    let without_cfg = SamplerConfig {
        sure_enabled: false,
        ..cfg.clone()
    };
    let (_, with_sure) = sgps_run(den, op, y, &with_cfg, RngStream::new(seed, stream_id), truth)?;
    let (_, without_sure) = sgps_run(den, op, y, &without_cfg, RngStream::new(seed, stream_id), truth)?;
    Ok(InfluxTrace {
        with_sure,
        without_sure,
    })
}

/// Column order of the noise-influx CSV.
pub const INFLUX_CSV_HEADER: [&str; 10] = [
    "step",
    "sigma_t",
    "sigma_hat_with",
    "sigma_hat_without",
    "psnr_x0t_with",
    "psnr_x0ty_with",
    "psnr_star_with",
    "psnr_x0t_without",
    "psnr_x0ty_without",
    "runs",
];

/// Per-step averages over paired traces: noise estimate of the sample handed to the
/// next level (after SURE when enabled) and the PSNR curves.
pub fn write_influx_csv<W: std::io::Write>(traces: &[InfluxTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INFLUX_CSV_HEADER)?;
    if traces.is_empty() {
        w.flush()?;
        return Ok(());
    }
    let steps = traces[0].with_sure.steps.len();
    let n = traces.len() as f64;
    let avg = |f: &dyn Fn(&InfluxTrace) -> Option<f64>| -> String {
        let vals: Vec<f64> = traces.iter().filter_map(f).collect();
        if vals.len() == traces.len() {
            crate::report::fmt_f64(vals.iter().sum::<f64>() / n)
        } else {
            String::new()
        }
    };
    for i in 0..steps {
        let row = [
            i.to_string(),
            crate::report::fmt_f64(traces[0].with_sure.steps[i].sigma_t),
            avg(&|t| Some(t.with_sure.steps[i].sigma_hat_star)),
            avg(&|t| Some(t.without_sure.steps[i].sigma_hat_star)),
            avg(&|t| t.with_sure.steps[i].psnr_x0t),
            avg(&|t| t.with_sure.steps[i].psnr_x0ty),
            avg(&|t| t.with_sure.steps[i].psnr_star),
            avg(&|t| t.without_sure.steps[i].psnr_x0t),
            avg(&|t| t.without_sure.steps[i].psnr_x0ty),
            traces.len().to_string(),
        ];
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
