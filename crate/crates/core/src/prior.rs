//! Analytic denoisers standing in for a trained diffusion network.
//!
//! The central type is [`GmmPrior`], an isotropic Gaussian mixture whose
//! noise-smoothed density is again a mixture (component variance
//! `s^2 + sigma^2`). Its posterior mean, score, Jacobian trace and
//! Jacobian-vector products are all closed form.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result, SgpsError};
use crate::rng::RngStream;
use crate::signal::Signal;

/// What a denoiser can provide beyond plain evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Capabilities {
    pub exact_jacobian_trace: bool,
    /// `jacobian_transpose_apply` is available, so SURE gradients can be analytic.
    pub analytic_input_gradient: bool,
}

/// `D(x; sigma)`, an estimate of the clean signal from an input corrupted at level `sigma`.
pub trait Denoiser: Sync {
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal>;

    fn capabilities(&self) -> Capabilities {
        Capabilities::default()
    }

    /// `tr(dD/dx)` at `x`.
    fn jacobian_trace(&self, _x: &Signal, _sigma: f64) -> Result<f64> {
        invalid("denoiser has no exact Jacobian trace")
    }

    /// `J(x; sigma)^T v`.
    fn jacobian_transpose_apply(&self, _x: &Signal, _sigma: f64, _v: &Signal) -> Result<Signal> {
        invalid("denoiser has no analytic input gradient")
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        (**self).denoise(x, sigma)
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn jacobian_trace(&self, x: &Signal, sigma: f64) -> Result<f64> {
        (**self).jacobian_trace(x, sigma)
    }
    fn jacobian_transpose_apply(&self, x: &Signal, sigma: f64, v: &Signal) -> Result<Signal> {
        (**self).jacobian_transpose_apply(x, sigma, v)
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("denoiser noise level must be positive, got {sigma}"));
    }
    Ok(())
}

/// Isotropic Gaussian mixture `sum_k w_k N(m_k, s^2 I)`.
#[derive(Debug, Clone)]
pub struct GmmPrior {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    means: Vec<Signal>,
    variance: f64,
}

/// Responsibilities and the derived quantities shared by the analytic paths.
struct Smoothed {
    gamma: Vec<f64>,
    /// `sum_k gamma_k m_k`
    mean_of_means: Vec<f64>,
    /// `s^2 + sigma^2`
    total_var: f64,
}

impl GmmPrior {
    pub fn new(weights: Vec<f64>, means: Vec<Signal>, variance: f64) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() {
            return invalid(format!(
                "need one weight per mean, got {} weights and {} means",
                weights.len(),
                means.len()
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return invalid("mixture weights must be positive");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("mixture weights sum to {total}, not 1"));
        }
        let shape = means[0].shape().to_vec();
        for m in &means {
            m.ensure_shape(&shape)?;
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return invalid(format!("component variance must be positive, got {variance}"));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            weights,
            log_weights,
            means,
            variance,
        })
    }

    /// Equal-weight mixture.
    pub fn uniform(means: Vec<Signal>, variance: f64) -> Result<Self> {
        let k = means.len().max(1);
        Self::new(vec![1.0 / k as f64; means.len()], means, variance)
    }

    /// Single Gaussian `N(mean, variance I)`.
    pub fn gaussian(mean: Signal, variance: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], variance)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Signal] {
        &self.means
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn shape(&self) -> &[usize] {
        self.means[0].shape()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Signal {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut k = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let s = self.variance.sqrt();
        let noise = rng.normal_signal(self.shape());
        let data = self.means[k]
            .iter()
            .zip(noise.iter())
            .map(|(m, z)| m + s * z)
            .collect();
        Signal::from_parts_unchecked(data, self.shape().to_vec())
    }

    fn smoothed(&self, x: &Signal, sigma: f64) -> Result<Smoothed> {
        check_sigma(sigma)?;
        x.ensure_shape(self.shape())?;
        let total_var = self.variance + sigma * sigma;
        let logits: Vec<f64> = self
            .means
            .iter()
            .zip(&self.log_weights)
            .map(|(m, lw)| lw - sq_dist(x.as_slice(), m.as_slice()) / (2.0 * total_var))
            .collect();
        let gamma = softmax(&logits);
        let mut mean_of_means = vec![0.0; x.len()];
        for (g, m) in gamma.iter().zip(&self.means) {
            if *g == 0.0 {
                continue;
            }
            for (acc, v) in mean_of_means.iter_mut().zip(m.iter()) {
                *acc += g * v;
            }
        }
        Ok(Smoothed {
            gamma,
            mean_of_means,
            total_var,
        })
    }

    /// Component responsibilities under the sigma-smoothed mixture.
    pub fn responsibilities(&self, x: &Signal, sigma: f64) -> Result<Vec<f64>> {
        Ok(self.smoothed(x, sigma)?.gamma)
    }

    /// `log p(x; sigma)` of the prior convolved with `N(0, sigma^2 I)`.
    pub fn log_density(&self, x: &Signal, sigma: f64) -> Result<f64> {
        check_sigma(sigma)?;
        x.ensure_shape(self.shape())?;
        let v = self.variance + sigma * sigma;
        let logits: Vec<f64> = self
            .means
            .iter()
            .zip(&self.log_weights)
            .map(|(m, lw)| lw - sq_dist(x.as_slice(), m.as_slice()) / (2.0 * v))
            .collect();
        let n = x.len() as f64;
        Ok(log_sum_exp(&logits) - 0.5 * n * (2.0 * std::f64::consts::PI * v).ln())
    }

    /// `grad_x log p(x; sigma) = sum_k gamma_k (m_k - x) / (s^2 + sigma^2)`.
    pub fn score(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        let sm = self.smoothed(x, sigma)?;
        let data = x
            .iter()
            .zip(&sm.mean_of_means)
            .map(|(xi, mi)| (mi - xi) / sm.total_var)
            .collect();
        x.with_data(data)
    }

    /// Exact `tr(dD/dx) = n s^2/v + (sigma^2/v^2) sum_k gamma_k |m_k - mbar|^2`, `v = s^2 + sigma^2`.
    pub fn jacobian_trace_exact(&self, x: &Signal, sigma: f64) -> Result<f64> {
        let sm = self.smoothed(x, sigma)?;
        let n = x.len() as f64;
        let spread: f64 = sm
            .gamma
            .iter()
            .zip(&self.means)
            .filter(|(g, _)| **g > 0.0)
            .map(|(g, m)| g * sq_dist(m.as_slice(), &sm.mean_of_means))
            .sum();
        let v = sm.total_var;
        Ok(n * self.variance / v + sigma * sigma / (v * v) * spread)
    }
}

impl Denoiser for GmmPrior {
    /// Posterior mean `sum_k gamma_k (x s^2 + m_k sigma^2) / (s^2 + sigma^2)`.
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        let sm = self.smoothed(x, sigma)?;
        let v = sm.total_var;
        let keep = self.variance / v;
        let pull = sigma * sigma / v;
        let data = x
            .iter()
            .zip(&sm.mean_of_means)
            .map(|(xi, mi)| keep * xi + pull * mi)
            .collect();
        x.with_data(data)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            exact_jacobian_trace: true,
            analytic_input_gradient: true,
        }
    }

    fn jacobian_trace(&self, x: &Signal, sigma: f64) -> Result<f64> {
        self.jacobian_trace_exact(x, sigma)
    }

    /// The Jacobian `s^2/v I + sigma^2/v^2 Cov_gamma(m)` is symmetric.
    fn jacobian_transpose_apply(&self, x: &Signal, sigma: f64, u: &Signal) -> Result<Signal> {
        x.ensure_same_shape(u)?;
        let sm = self.smoothed(x, sigma)?;
        let v = sm.total_var;
        let mut out: Vec<f64> = u.iter().map(|ui| self.variance / v * ui).collect();
        let coef = sigma * sigma / (v * v);
        for (g, m) in sm.gamma.iter().zip(&self.means) {
            if *g == 0.0 {
                continue;
            }
            let proj: f64 = m
                .iter()
                .zip(&sm.mean_of_means)
                .zip(u.iter())
                .map(|((mk, mb), ui)| (mk - mb) * ui)
                .sum();
            let c = coef * g * proj;
            for ((o, mk), mb) in out.iter_mut().zip(m.iter()).zip(&sm.mean_of_means) {
                *o += c * (mk - mb);
            }
        }
        x.with_data(out)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Adds a bounded deterministic error `amplitude * sigma * sin(frequency * x_i + phase_i)`
/// to an inner denoiser, emulating the residual error of a trained network.
/// With `amplitude == 0` it is exactly the inner denoiser.
#[derive(Debug, Clone)]
pub struct PerturbedDenoiser<D> {
    inner: D,
    amplitude: f64,
    frequency: f64,
}

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

impl<D: Denoiser> PerturbedDenoiser<D> {
    pub fn new(inner: D, amplitude: f64, frequency: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite() && frequency.is_finite()) {
            return invalid("perturbation amplitude must be finite and >= 0");
        }
        Ok(Self {
            inner,
            amplitude,
            frequency,
        })
    }

    pub fn inner(&self) -> &D {
        &self.inner
    }

    fn phase(i: usize) -> f64 {
        i as f64 * GOLDEN_ANGLE
    }
}

impl<D: Denoiser> Denoiser for PerturbedDenoiser<D> {
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        let base = self.inner.denoise(x, sigma)?;
        if self.amplitude == 0.0 {
            return Ok(base);
        }
        let a = self.amplitude * sigma;
        let data = base
            .iter()
            .zip(x.iter())
            .enumerate()
            .map(|(i, (d, xi))| d + a * (self.frequency * xi + Self::phase(i)).sin())
            .collect();
        x.with_data(data)
    }

    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn jacobian_trace(&self, x: &Signal, sigma: f64) -> Result<f64> {
        let base = self.inner.jacobian_trace(x, sigma)?;
        let a = self.amplitude * sigma * self.frequency;
        let extra: f64 = x
            .iter()
            .enumerate()
            .map(|(i, xi)| a * (self.frequency * xi + Self::phase(i)).cos())
            .sum();
        Ok(base + extra)
    }

    fn jacobian_transpose_apply(&self, x: &Signal, sigma: f64, v: &Signal) -> Result<Signal> {
        let base = self.inner.jacobian_transpose_apply(x, sigma, v)?;
        if self.amplitude == 0.0 {
            return Ok(base);
        }
        let a = self.amplitude * sigma * self.frequency;
        let data = base
            .iter()
            .zip(x.iter().zip(v.iter()))
            .enumerate()
            .map(|(i, (b, (xi, vi)))| b + a * (self.frequency * xi + Self::phase(i)).cos() * vi)
            .collect();
        x.with_data(data)
    }
}

/// Counts `denoise` calls (NFE). Jacobian queries are not counted.
#[derive(Debug)]
pub struct CountingDenoiser<D> {
    inner: D,
    calls: AtomicU64,
}

impl<D: Denoiser> CountingDenoiser<D> {
    pub fn new(inner: D) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &D {
        &self.inner
    }
}

impl<D: Denoiser> Denoiser for CountingDenoiser<D> {
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.denoise(x, sigma)
    }
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }
    fn jacobian_trace(&self, x: &Signal, sigma: f64) -> Result<f64> {
        self.inner.jacobian_trace(x, sigma)
    }
    fn jacobian_transpose_apply(&self, x: &Signal, sigma: f64, v: &Signal) -> Result<Signal> {
        self.inner.jacobian_transpose_apply(x, sigma, v)
    }
}

/// `D(x) = M x`, independent of sigma. `M = c I` covers the identity and zero denoisers.
#[derive(Debug, Clone)]
pub enum LinearDenoiser {
    Scaled(f64),
    Matrix(DMatrix<f64>),
}

impl LinearDenoiser {
    pub fn identity() -> Self {
        Self::Scaled(1.0)
    }

    pub fn zero() -> Self {
        Self::Scaled(0.0)
    }

    pub fn matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return invalid("linear denoiser matrix must be square");
        }
        Ok(Self::Matrix(m))
    }

    fn check_dim(&self, x: &Signal) -> Result<()> {
        if let Self::Matrix(m) = self {
            if m.nrows() != x.len() {
                return Err(SgpsError::ShapeMismatch {
                    expected: vec![m.nrows()],
                    found: x.shape().to_vec(),
                });
            }
        }
        Ok(())
    }
}

impl Denoiser for LinearDenoiser {
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        self.check_dim(x)?;
        match self {
            Self::Scaled(c) => x.scale(*c),
            Self::Matrix(m) => {
                let y = m * DVector::from_column_slice(x.as_slice());
                x.with_data(y.as_slice().to_vec())
            }
        }
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            exact_jacobian_trace: true,
            analytic_input_gradient: true,
        }
    }

    fn jacobian_trace(&self, x: &Signal, sigma: f64) -> Result<f64> {
        check_sigma(sigma)?;
        self.check_dim(x)?;
        Ok(match self {
            Self::Scaled(c) => c * x.len() as f64,
            Self::Matrix(m) => m.trace(),
        })
    }

    fn jacobian_transpose_apply(&self, x: &Signal, sigma: f64, v: &Signal) -> Result<Signal> {
        check_sigma(sigma)?;
        self.check_dim(x)?;
        x.ensure_same_shape(v)?;
        match self {
            Self::Scaled(c) => v.scale(*c),
            Self::Matrix(m) => {
                let y = m.tr_mul(&DVector::from_column_slice(v.as_slice()));
                v.with_data(y.as_slice().to_vec())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: &[f64]) -> Signal {
        Signal::from_vec(v.to_vec()).unwrap()
    }

    fn random_gmm(rng: &mut RngStream, k: usize, n: usize, var: f64) -> GmmPrior {
        let means = (0..k).map(|_| rng.normal_signal(&[n])).collect();
        let mut w: Vec<f64> = (0..k).map(|_| 0.2 + rng.uniform()).collect();
        let t: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= t);
        let t: f64 = w.iter().sum();
        w[0] += 1.0 - t;
        GmmPrior::new(w, means, var).unwrap()
    }

    #[test]
    fn single_gaussian_shrinkage() {
        let p = GmmPrior::gaussian(sig(&[0.0]), 1.0).unwrap();
        let d = p.denoise(&sig(&[2.0]), 1.0).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shrinkage_matches_quadrature_posterior_mean() {
        // E[x0 | x] for x0 ~ N(0,1), x = x0 + N(0,1), x = 2, by trapezoid quadrature
        let (mut num, mut den) = (0.0, 0.0);
        let h = 1e-3;
        let mut t: f64 = -12.0;
        while t <= 12.0 {
            let w = (-0.5 * t * t).exp() * (-0.5 * (2.0f64 - t).powi(2)).exp();
            num += t * w * h;
            den += w * h;
            t += h;
        }
        let p = GmmPrior::gaussian(sig(&[0.0]), 1.0).unwrap();
        let d = p.denoise(&sig(&[2.0]), 1.0).unwrap();
        assert!((d[0] - num / den).abs() < 1e-6);
    }

    #[test]
    fn vanishing_noise_is_identity() {
        let p = GmmPrior::uniform(vec![sig(&[-1.0, 0.0]), sig(&[1.0, 0.5])], 0.3).unwrap();
        let x = sig(&[0.2, -0.4]);
        let d = p.denoise(&x, 1e-6).unwrap();
        for (a, b) in d.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_nonpositive_sigma_and_bad_weights() {
        let p = GmmPrior::gaussian(sig(&[0.0]), 1.0).unwrap();
        assert!(p.denoise(&sig(&[1.0]), 0.0).is_err());
        assert!(p.score(&sig(&[1.0]), -1.0).is_err());
        assert!(p.jacobian_trace_exact(&sig(&[1.0]), 0.0).is_err());
        assert!(GmmPrior::new(vec![0.5, 0.6], vec![sig(&[0.0]), sig(&[1.0])], 1.0).is_err());
        assert!(GmmPrior::new(vec![1.0], vec![sig(&[0.0])], 0.0).is_err());
        assert!(GmmPrior::uniform(vec![sig(&[0.0]), sig(&[1.0, 2.0])], 1.0).is_err());
    }

    #[test]
    fn denoiser_score_identity() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..20 {
            let var = 0.2 + rng.uniform();
            let p = random_gmm(&mut rng, 3, 5, var);
            let sigma = 0.05 + 2.0 * rng.uniform();
            let x = rng.normal_signal(&[5]).scale(2.0).unwrap();
            let d = p.denoise(&x, sigma).unwrap();
            let s = p.score(&x, sigma).unwrap();
            for i in 0..5 {
                let via_score = x[i] + sigma * sigma * s[i];
                assert!((d[i] - via_score).abs() <= 1e-10 * (1.0 + d[i].abs()));
            }
        }
    }

    #[test]
    fn single_gaussian_score_and_trace() {
        let m = sig(&[0.5, -0.5, 1.0, 0.0]);
        let p = GmmPrior::gaussian(m.clone(), 1.0).unwrap();
        let x = sig(&[1.0, 1.0, 1.0, 1.0]);
        let s = p.score(&x, 1.0).unwrap();
        for i in 0..4 {
            assert!((s[i] - (m[i] - x[i]) / 2.0).abs() < 1e-15);
        }
        assert!((p.jacobian_trace_exact(&x, 1.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn score_matches_finite_differences_of_log_density() {
        let mut rng = RngStream::new(5, 0);
        let p = random_gmm(&mut rng, 4, 6, 0.3);
        let h = 1e-5;
        for _ in 0..10 {
            let x = rng.normal_signal(&[6]);
            let sigma = 0.2 + rng.uniform();
            let s = p.score(&x, sigma).unwrap();
            for i in 0..6 {
                let mut xp = x.clone().into_vec();
                let mut xm = xp.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (p.log_density(&sig(&xp), sigma).unwrap()
                    - p.log_density(&sig(&xm), sigma).unwrap())
                    / (2.0 * h);
                assert!((fd - s[i]).abs() <= 1e-5 * s[i].abs().max(1e-3), "{fd} vs {}", s[i]);
            }
        }
    }

    #[test]
    fn exact_trace_matches_finite_difference_jacobian() {
        let mut rng = RngStream::new(8, 0);
        for _ in 0..10 {
            let var = 0.1 + rng.uniform();
            let p = random_gmm(&mut rng, 2, 6, var);
            let sigma = 0.2 + rng.uniform();
            let x = rng.normal_signal(&[6]);
            let h = 1e-6;
            let mut fd = 0.0;
            for i in 0..6 {
                let mut xp = x.clone().into_vec();
                xp[i] += h;
                let dp = p.denoise(&sig(&xp), sigma).unwrap();
                let d0 = p.denoise(&x, sigma).unwrap();
                fd += (dp[i] - d0[i]) / h;
            }
            let exact = p.jacobian_trace_exact(&x, sigma).unwrap();
            assert!((fd - exact).abs() <= 1e-4 * exact.abs(), "{fd} vs {exact}");
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let mut rng = RngStream::new(9, 0);
        let p = random_gmm(&mut rng, 3, 5, 0.4);
        let x = rng.normal_signal(&[5]);
        let u = rng.normal_signal(&[5]);
        let sigma = 0.7;
        let got = p.jacobian_transpose_apply(&x, sigma, &u).unwrap();
        let h = 1e-6;
        for j in 0..5 {
            let mut xp = x.clone().into_vec();
            let mut xm = xp.clone();
            xp[j] += h;
            xm[j] -= h;
            let dp = p.denoise(&sig(&xp), sigma).unwrap();
            let dm = p.denoise(&sig(&xm), sigma).unwrap();
            let col: f64 = (0..5).map(|i| u[i] * (dp[i] - dm[i]) / (2.0 * h)).sum();
            assert!((col - got[j]).abs() < 1e-7, "{col} vs {}", got[j]);
        }
    }

    #[test]
    fn trace_collapses_at_large_sigma() {
        let mut rng = RngStream::new(10, 0);
        let p = random_gmm(&mut rng, 3, 8, 1.0);
        let x = rng.normal_signal(&[8]);
        let t = p.jacobian_trace_exact(&x, 1e3).unwrap();
        assert!(t < 0.01 * 8.0);
    }

    #[test]
    fn single_gaussian_output_on_segment() {
        let m = sig(&[1.0, -2.0, 0.5]);
        let p = GmmPrior::gaussian(m.clone(), 0.5).unwrap();
        let x = sig(&[3.0, 0.0, -1.0]);
        let d = p.denoise(&x, 0.8).unwrap();
        // d = m + lambda (x - m) with a shared lambda in [0, 1]
        let lam = (d[0] - m[0]) / (x[0] - m[0]);
        assert!((0.0..=1.0).contains(&lam));
        for i in 0..3 {
            assert!((d[i] - (m[i] + lam * (x[i] - m[i]))).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_is_bounded_and_differentiated() {
        let p = GmmPrior::gaussian(sig(&[0.0, 0.0, 0.0]), 1.0).unwrap();
        let q = PerturbedDenoiser::new(p.clone(), 0.1, 3.0).unwrap();
        let x = sig(&[0.3, -0.2, 0.9]);
        let a = p.denoise(&x, 0.5).unwrap();
        let b = q.denoise(&x, 0.5).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() <= 0.1 * 0.5 + 1e-15);
        }
        let h = 1e-6;
        let mut fd = 0.0;
        for i in 0..3 {
            let mut xp = x.clone().into_vec();
            let mut xm = xp.clone();
            xp[i] += h;
            xm[i] -= h;
            fd += (q.denoise(&sig(&xp), 0.5).unwrap()[i] - q.denoise(&sig(&xm), 0.5).unwrap()[i]) / (2.0 * h);
        }
        assert!((fd - q.jacobian_trace(&x, 0.5).unwrap()).abs() < 1e-6);
        let zero = PerturbedDenoiser::new(p.clone(), 0.0, 3.0).unwrap();
        assert_eq!(zero.denoise(&x, 0.5).unwrap(), a);
    }

    #[test]
    fn counting_wrapper_counts_only_evaluations() {
        let p = GmmPrior::gaussian(sig(&[0.0, 0.0]), 1.0).unwrap();
        let c = CountingDenoiser::new(&p);
        let x = sig(&[1.0, 2.0]);
        c.denoise(&x, 1.0).unwrap();
        c.denoise(&x, 0.5).unwrap();
        c.jacobian_transpose_apply(&x, 1.0, &x).unwrap();
        assert_eq!(c.count(), 2);
    }

    #[test]
    fn linear_denoiser_trace() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let d = LinearDenoiser::matrix(m).unwrap();
        let x = sig(&[1.0, 1.0]);
        assert_eq!(d.denoise(&x, 1.0).unwrap().as_slice(), &[3.0, 7.0]);
        assert_eq!(d.jacobian_trace(&x, 1.0).unwrap(), 5.0);
        assert_eq!(d.jacobian_transpose_apply(&x, 1.0, &x).unwrap().as_slice(), &[4.0, 6.0]);
    }
}
