//! Noise level estimation from the eigen-spectrum of the patch covariance.
//!
//! Noise-only directions of the patch space share one eigenvalue (the noise
//! variance), while image structure occupies a few large ones. Dropping the
//! largest eigenvalues until the tail's mean meets its median isolates the flat
//! noise floor.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::config::PatchConfig;
use crate::error::{invalid, Result};
use crate::signal::Signal;

/// All windows of `cfg.size` (square for 2D signals) at `cfg.stride`, flattened row-major.
pub fn extract_patches(x: &Signal, cfg: &PatchConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let p = cfg.size;
    let (h, w) = x.dims2();
    let two_d = x.shape().len() == 2;
    let ph = if two_d { p } else { 1 };
    if h < ph || w < p {
        return invalid(format!("signal {:?} is smaller than patch size {p}", x.shape()));
    }
    let rows: Vec<usize> = if two_d {
        (0..=h - p).step_by(cfg.stride).collect()
    } else {
        vec![0]
    };
    let cols: Vec<usize> = (0..=w - p).step_by(cfg.stride).collect();
    let data = x.as_slice();
    let mut patches = Vec::with_capacity(rows.len() * cols.len());
    for &r in &rows {
        for &c in &cols {
            let mut patch = Vec::with_capacity(ph * p);
            for a in 0..ph {
                patch.extend_from_slice(&data[(r + a) * w + c..(r + a) * w + c + p]);
            }
            patches.push(patch);
        }
    }
    Ok(patches)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEstimate {
    pub sigma: f64,
    /// Patch-covariance eigenvalues, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Number of leading eigenvalues excluded when the stopping rule fired.
    pub excluded: usize,
    pub patch_count: usize,
}

/// Estimated standard deviation of additive white Gaussian noise in `x`.
pub fn estimate_sigma(x: &Signal, cfg: &PatchConfig) -> Result<f64> {
    Ok(estimate_sigma_detailed(x, cfg)?.sigma)
}

pub fn estimate_sigma_detailed(x: &Signal, cfg: &PatchConfig) -> Result<NoiseEstimate> {
    let patches = extract_patches(x, cfg)?;
    let s = patches.len();
    if s < 2 {
        return invalid(format!("noise estimation needs at least 2 patches, got {s}"));
    }
    let r = patches[0].len();
    if s <= r {
        log::warn!("only {s} patches for a {r}-dimensional covariance; estimate may be biased");
    }
    let eigenvalues = patch_spectrum(&patches);
    let (sigma, excluded) = tail_noise_level(&eigenvalues, cfg.tolerance);
    Ok(NoiseEstimate {
        sigma,
        eigenvalues,
        excluded,
        patch_count: s,
    })
}

/// Eigenvalues of `(1/s) sum (x_i - mu)(x_i - mu)^T`, sorted descending.
fn patch_spectrum(patches: &[Vec<f64>]) -> Vec<f64> {
    let s = patches.len();
    let r = patches[0].len();
    let mut mu = vec![0.0; r];
    for p in patches {
        for (m, v) in mu.iter_mut().zip(p) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= s as f64);
    let mut cov = DMatrix::<f64>::zeros(r, r);
    let mut centred = vec![0.0; r];
    for p in patches {
        for ((c, v), m) in centred.iter_mut().zip(p).zip(&mu) {
            *c = v - m;
        }
        for i in 0..r {
            let ci = centred[i];
            if ci == 0.0 {
                continue;
            }
            for j in i..r {
                cov[(i, j)] += ci * centred[j];
            }
        }
    }
    for i in 0..r {
        for j in i..r {
            let v = cov[(i, j)] / s as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0))
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

/// Scans tails `lambda[i..]` and returns `(sqrt(mean), i)` for the first tail whose
/// mean matches its median within `tolerance` (relative) or has dropped below it.
fn tail_noise_level(eigenvalues: &[f64], tolerance: f64) -> (f64, usize) {
    let r = eigenvalues.len();
    for i in 0..r {
        let tail = &eigenvalues[i..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let med = median_descending(tail);
        if (mean - med).abs() <= tolerance * med.abs() || mean < med {
            return (mean.sqrt(), i);
        }
    }
    (eigenvalues[r - 1].sqrt(), r - 1)
}

fn median_descending(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
