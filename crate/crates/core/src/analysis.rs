//! Statistical diagnostics: residual normality, Gaussian W2/KL, estimator sweeps.

use std::io::Write;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::PatchConfig;
use crate::error::{invalid, Result, SgpsError};
use crate::noise_est::estimate_sigma;
use crate::report::fmt_f64;
use crate::rng::RngStream;
use crate::signal::Signal;

pub const MIN_NORMALITY_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityReport {
    /// Probability-plot correlation with Blom normal scores.
    pub qq_correlation: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub n: usize,
}

pub fn normality_report(residuals: &Signal) -> Result<NormalityReport> {
    normality_of(residuals.as_slice())
}

pub fn normality_of(values: &[f64]) -> Result<NormalityReport> {
    let n = values.len();
    if n < MIN_NORMALITY_SAMPLES {
        return invalid(format!("normality report needs at least {MIN_NORMALITY_SAMPLES} samples, got {n}"));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    if !(m2 > 0.0) || m2.sqrt() <= 1e-12 * (1.0 + mean.abs()) {
        return invalid("residuals have zero variance");
    }
    let sd = m2.sqrt();
    let mut z: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();
    let m3 = z.iter().map(|v| v.powi(3)).sum::<f64>() / nf;
    let m4 = z.iter().map(|v| v.powi(4)).sum::<f64>() / nf;
    z.sort_by(|a, b| a.total_cmp(b));

    let q = normal_scores(n);
    let qm = q.iter().sum::<f64>() / nf;
    let (mut sxy, mut sqq) = (0.0, 0.0);
    for (zi, qi) in z.iter().zip(&q) {
        sxy += zi * (qi - qm);
        sqq += (qi - qm).powi(2);
    }
    // z has mean 0 and sum of squares n
    let r = (sxy / (sqq * nf).sqrt()).clamp(0.0, 1.0);
    Ok(NormalityReport {
        qq_correlation: r,
        skewness: m3,
        excess_kurtosis: m4 - 3.0,
        n,
    })
}

fn normal_scores(n: usize) -> Vec<f64> {
    let std = Normal::standard();
    (1..=n)
        .map(|i| std.inverse_cdf((i as f64 - 0.375) / (n as f64 + 0.25)))
        .collect()
}

/// Lower `level` quantile of the qq-correlation under iid Gaussian data of size `n`.
pub fn qq_threshold(n: usize, level: f64, trials: usize, rng: &mut RngStream) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) || trials == 0 {
        return invalid("qq_threshold needs level in (0,1) and at least one trial");
    }
    let mut buf = vec![0.0; n];
    let mut stats = Vec::with_capacity(trials);
    for _ in 0..trials {
        rng.fill_normal(&mut buf);
        stats.push(normality_of(&buf)?.qq_correlation);
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let idx = ((level * trials as f64).floor() as usize).min(trials - 1);
    Ok(stats[idx])
}

fn check_means(a: &[f64], b: &[f64], n: usize) -> Result<()> {
    if a.len() != n || b.len() != n {
        return Err(SgpsError::ShapeMismatch {
            expected: vec![n],
            found: vec![a.len().max(b.len())],
        });
    }
    Ok(())
}

/// W2² between N(mean_a, sd_a² I) and N(mean_b, sd_b² I) in dimension `n`.
pub fn gaussian_w2(mean_a: &[f64], sd_a: f64, mean_b: &[f64], sd_b: f64, n: usize) -> Result<f64> {
    check_means(mean_a, mean_b, n)?;
    if !(sd_a >= 0.0 && sd_b >= 0.0) {
        return invalid("standard deviations must be nonnegative");
    }
    let offset: f64 = mean_a.iter().zip(mean_b).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(offset + n as f64 * (sd_a - sd_b).powi(2))
}

/// KL(Q || P) for isotropic Gaussians given by mean and scalar variance.
pub fn kl_gaussian(mean_q: &[f64], var_q: f64, mean_p: &[f64], var_p: f64, n: usize) -> Result<f64> {
    check_means(mean_q, mean_p, n)?;
    if !(var_q > 0.0 && var_p > 0.0) {
        return invalid("variances must be positive");
    }
    let ratio = var_q / var_p;
    let offset: f64 = mean_q.iter().zip(mean_p).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(0.5 * (n as f64 * (ratio - 1.0 - ratio.ln()) + offset / var_p))
}

/// Empirical mean and pooled per-coordinate variance of a population.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicFit {
    pub mean: Vec<f64>,
    pub variance: f64,
}

pub fn isotropic_fit(samples: &[Signal]) -> Result<IsotropicFit> {
    if samples.len() < 2 {
        return invalid("isotropic fit needs at least two samples");
    }
    let n = samples[0].len();
    for s in samples {
        s.ensure_same_shape(&samples[0])?;
    }
    let count = samples.len() as f64;
    let mut mean = vec![0.0; n];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.iter()) {
            *m += v / count;
        }
    }
    let ss: f64 = samples
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(v, m)| (v - m).powi(2)).sum::<f64>())
        .sum();
    Ok(IsotropicFit {
        mean,
        variance: ss / ((count - 1.0) * n as f64),
    })
}

/// Smooth noiseless test image with values in [0, 1].
pub fn smooth_test_image(h: usize, w: usize) -> Signal {
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let u = r as f64 / h.max(1) as f64;
            let v = c as f64 / w.max(1) as f64;
            let val = 0.5
                + 0.25 * (2.0 * std::f64::consts::PI * u).sin() * (std::f64::consts::PI * v).cos()
                + 0.15 * (v - 0.5);
            data.push(val.clamp(0.0, 1.0));
        }
    }
    Signal::new(data, vec![h, w]).expect("finite image")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSweepRow {
    pub sigma: f64,
    pub mean_estimate: f64,
    pub std_estimate: f64,
    pub samples: usize,
}

/// Noise-estimator accuracy: for each level, average the estimate over noisy copies
/// of `clean`.
pub fn estimator_sweep(
    clean: &Signal,
    levels: &[f64],
    samples: usize,
    patch: &PatchConfig,
    rng: &RngStream,
) -> Result<Vec<EstimatorSweepRow>> {
    if samples == 0 {
        return invalid("estimator sweep needs at least one sample per level");
    }
    levels
        .iter()
        .enumerate()
        .map(|(li, &sigma)| {
            let mut r = rng.fork(li as u64);
            let estimates = (0..samples)
                .map(|_| {
                    let noisy = clean.add_scaled(&r.normal_signal(clean.shape()), sigma)?;
                    estimate_sigma(&noisy, patch)
                })
                .collect::<Result<Vec<f64>>>()?;
            let k = samples as f64;
            let mean = estimates.iter().sum::<f64>() / k;
            let var = if samples > 1 {
                estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            Ok(EstimatorSweepRow {
                sigma,
                mean_estimate: mean,
                std_estimate: var.sqrt(),
                samples,
            })
        })
        .collect()
}

pub const ESTIMATOR_CSV_HEADER: [&str; 4] = ["sigma", "mean_estimate", "std_estimate", "samples"];

pub fn write_estimator_csv<W: Write>(rows: &[EstimatorSweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ESTIMATOR_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.sigma),
            fmt_f64(r.mean_estimate),
            fmt_f64(r.std_estimate),
            r.samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow {
    pub task: &'static str,
    pub step: usize,
    pub sigma_t: f64,
    /// "x0t" or "x0ty"
    pub kind: &'static str,
    pub report: NormalityReport,
    pub threshold: f64,
}

pub const RESIDUAL_CSV_HEADER: [&str; 9] = [
    "task",
    "step",
    "sigma_t",
    "kind",
    "n",
    "qq_correlation",
    "skewness",
    "excess_kurtosis",
    "threshold",
];

pub fn write_residual_csv<W: Write>(rows: &[ResidualRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESIDUAL_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.task.to_string(),
            r.step.to_string(),
            fmt_f64(r.sigma_t),
            r.kind.to_string(),
            r.report.n.to_string(),
            fmt_f64(r.report.qq_correlation),
            fmt_f64(r.report.skewness),
            fmt_f64(r.report.excess_kurtosis),
            fmt_f64(r.threshold),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of log(y) against log(x).
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("slope needs at least two paired points");
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return invalid("log-log slope needs positive values");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
