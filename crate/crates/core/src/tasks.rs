//! Toy inverse problems with analytic priors.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::operators::ForwardOp;
use crate::prior::GmmPrior;
use crate::rng::RngStream;
use crate::signal::Signal;

/// Mixture of `k` smooth 1D profiles in [0, 1].
pub fn toy_1d(n: usize, k: usize, variance: f64, seed: u64) -> Result<GmmPrior> {
    if n == 0 || k == 0 {
        return invalid("toy prior needs n > 0 and k > 0");
    }
    let mut rng = RngStream::new(seed, 0).fork(0x1d);
    let means = (0..k)
        .map(|_| {
            let coeffs: Vec<(f64, f64)> = (1..=3).map(|f| (rng.normal() / f as f64, rng.uniform() * 2.0 * PI)).collect();
            let raw: Vec<f64> = (0..n)
                .map(|i| {
                    let u = i as f64 / n as f64;
                    coeffs.iter().enumerate().map(|(f, (a, ph))| a * (2.0 * PI * (f + 1) as f64 * u + ph).sin()).sum()
                })
                .collect();
            Signal::from_vec(normalize(raw))
        })
        .collect::<Result<Vec<_>>>()?;
    GmmPrior::uniform(means, variance)
}

/// Mixture of `k` smooth images in [0, 1] built from low-frequency cosines.
pub fn toy_2d(h: usize, w: usize, k: usize, variance: f64, seed: u64) -> Result<GmmPrior> {
    if h == 0 || w == 0 || k == 0 {
        return invalid("toy prior needs positive size and k > 0");
    }
    let mut rng = RngStream::new(seed, 0).fork(0x2d);
    let means = (0..k)
        .map(|_| {
            let mut coeffs = Vec::new();
            for fy in 0..3 {
                for fx in 0..3 {
                    if fx + fy > 0 {
                        let amp = rng.normal() / (fx + fy) as f64;
                        coeffs.push((fy as f64, fx as f64, amp, rng.uniform() * 2.0 * PI));
                    }
                }
            }
            let mut raw = Vec::with_capacity(h * w);
            for r in 0..h {
                for c in 0..w {
                    let (u, v) = (r as f64 / h as f64, c as f64 / w as f64);
                    raw.push(
                        coeffs
                            .iter()
                            .map(|(fy, fx, a, ph)| a * (2.0 * PI * (fy * u + fx * v) + ph).cos())
                            .sum(),
                    );
                }
            }
            Signal::new(normalize(raw), vec![h, w])
        })
        .collect::<Result<Vec<_>>>()?;
    GmmPrior::uniform(means, variance)
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    v.into_iter().map(|x| 0.1 + 0.8 * (x - lo) / span).collect()
}

/// Normalized Gaussian blur kernel with odd `size` per side; 2D if `two_d`.
pub fn gaussian_kernel(size: usize, width: f64, two_d: bool) -> Result<Signal> {
    if size % 2 == 0 || !(width > 0.0) {
        return invalid("kernel size must be odd and width positive");
    }
    let c = (size / 2) as f64;
    let g: Vec<f64> = (0..size).map(|i| (-(i as f64 - c).powi(2) / (2.0 * width * width)).exp()).collect();
    let (data, shape) = if two_d {
        (g.iter().flat_map(|a| g.iter().map(move |b| a * b)).collect::<Vec<_>>(), vec![size, size])
    } else {
        (g.clone(), vec![size])
    };
    let total: f64 = data.iter().sum();
    Signal::new(data.into_iter().map(|v| v / total).collect(), shape)
}

/// Ground truth and noisy measurement.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub truth: Signal,
    pub y: Signal,
}

pub fn measure(op: &ForwardOp, truth: Signal, sigma_y: f64, rng: &mut RngStream) -> Result<Measurement> {
    let clean = op.apply(&truth)?;
    let y = clean.add_scaled(&rng.normal_signal(clean.shape()), sigma_y)?;
    Ok(Measurement { truth, y })
}
