//! Stein's unbiased risk estimate with a Monte-Carlo divergence, and its input gradient.
//!
//! For `x_noisy = x0 + N(0, sigma^2 I)` and a denoiser `D`,
//!
//! ```text
//! SURE = -n sigma^2 + |x_noisy - D(x_noisy)|^2 + 2 sigma^2 tr(J)
//! tr(J) ~ b^T (D(x_noisy + eps b, max(eps, sigma)) - D(x_noisy, sigma)) / eps,  b ~ N(0, I)
//! ```
//!
//! The gradient treats `sigma`, `eps` and the probes as constants of the
//! expression.

use crate::config::SamplerConfig;
use crate::error::{invalid, Result};
use crate::prior::{check_sigma, Denoiser};
use crate::rng::RngStream;
use crate::signal::Signal;

/// Finite-difference scale: `max(x_noisy) / divisor`, floored at `1e-6 (1 + max|x_noisy|)`.
pub fn perturbation_epsilon(x_noisy: &Signal, divisor: f64) -> f64 {
    let floor = 1e-6 * (1.0 + x_noisy.max_abs());
    (x_noisy.max() / divisor).max(floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEstimate {
    /// Average over probes.
    pub mean: f64,
    pub per_probe: Vec<f64>,
    /// Some perturbed output was bitwise equal to the base output.
    pub round_off: bool,
}

/// Hutchinson-style divergence estimate around a shared base output `base = D(x_noisy, sigma)`.
/// Costs one denoiser call per probe.
pub fn mc_trace_with_probes<D: Denoiser + ?Sized>(
    den: &D,
    x_noisy: &Signal,
    base: &Signal,
    sigma: f64,
    epsilon: f64,
    probes: &[Signal],
) -> Result<TraceEstimate> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    if probes.is_empty() {
        return invalid("at least one probe is required");
    }
    check_sigma(sigma)?;
    x_noisy.ensure_same_shape(base)?;
    let probe_sigma = epsilon.max(sigma);
    let mut per_probe = Vec::with_capacity(probes.len());
    let mut round_off = false;
    for b in probes {
        let shifted = x_noisy.add_scaled(b, epsilon)?;
        let out = den.denoise(&shifted, probe_sigma)?;
        if out == *base {
            round_off = true;
        }
        let proj: f64 = b
            .iter()
            .zip(out.iter().zip(base.iter()))
            .map(|(bi, (o, d))| bi * (o - d))
            .sum();
        per_probe.push(proj / epsilon);
    }
    if round_off {
        log::warn!("perturbation {epsilon:e} left the denoiser output unchanged; trace estimate is in the round-off regime");
    }
    let mean = per_probe.iter().sum::<f64>() / per_probe.len() as f64;
    Ok(TraceEstimate {
        mean,
        per_probe,
        round_off,
    })
}

/// Draws `probes` standard normal directions and estimates `tr(dD/dx)` at `x_noisy`.
pub fn mc_trace<D: Denoiser + ?Sized>(
    den: &D,
    x_noisy: &Signal,
    base: &Signal,
    sigma: f64,
    epsilon: f64,
    probes: usize,
    rng: &mut RngStream,
) -> Result<TraceEstimate> {
    if probes == 0 {
        return invalid("at least one probe is required");
    }
    let b: Vec<Signal> = (0..probes).map(|_| rng.normal_signal(x_noisy.shape())).collect();
    mc_trace_with_probes(den, x_noisy, base, sigma, epsilon, &b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SureEvaluation {
    pub value: f64,
    /// `|x_noisy - D(x_noisy, sigma_hat)|^2`
    pub data_term: f64,
    pub trace: TraceEstimate,
    pub sigma_hat: f64,
    pub epsilon: f64,
    pub probes: Vec<Signal>,
    /// `D(x_noisy, sigma_hat)`
    pub denoised: Signal,
}

impl SureEvaluation {
    /// Recomputes `-n s^2 + data + 2 s^2 tr` from the stored parts.
    pub fn reassemble(&self) -> f64 {
        sure_formula(self.denoised.len(), self.sigma_hat, self.data_term, self.trace.mean)
    }
}

fn sure_formula(n: usize, sigma: f64, data_term: f64, trace: f64) -> f64 {
    let s2 = sigma * sigma;
    -(n as f64) * s2 + data_term + 2.0 * s2 * trace
}

/// SURE at `x_noisy` with explicit perturbation scale and probes. Costs `1 + probes.len()` NFE.
pub fn sure_value_with_probes<D: Denoiser + ?Sized>(
    den: &D,
    x_noisy: &Signal,
    sigma_hat: f64,
    epsilon: f64,
    probes: Vec<Signal>,
) -> Result<SureEvaluation> {
    check_sigma(sigma_hat)?;
    let denoised = den.denoise(x_noisy, sigma_hat)?;
    let data_term = x_noisy.sub(&denoised)?.norm_sq();
    let trace = mc_trace_with_probes(den, x_noisy, &denoised, sigma_hat, epsilon, &probes)?;
    let value = sure_formula(x_noisy.len(), sigma_hat, data_term, trace.mean);
    Ok(SureEvaluation {
        value,
        data_term,
        trace,
        sigma_hat,
        epsilon,
        probes,
        denoised,
    })
}

/// SURE at `x_noisy` with `cfg.mc_probes` fresh probes and the configured epsilon rule.
pub fn sure_value<D: Denoiser + ?Sized>(
    den: &D,
    x_noisy: &Signal,
    sigma_hat: f64,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<SureEvaluation> {
    let epsilon = perturbation_epsilon(x_noisy, cfg.epsilon_divisor);
    let probes = (0..cfg.mc_probes.max(1))
        .map(|_| rng.normal_signal(x_noisy.shape()))
        .collect();
    sure_value_with_probes(den, x_noisy, sigma_hat, epsilon, probes)
}

/// The SURE expression as a function of `x` for the fixed `sigma_hat`, `epsilon` and
/// probes of `eval`. Used by the finite-difference gradient.
pub fn sure_expression<D: Denoiser + ?Sized>(den: &D, x: &Signal, eval: &SureEvaluation) -> Result<f64> {
    Ok(sure_value_with_probes(den, x, eval.sigma_hat, eval.epsilon, eval.probes.clone())?.value)
}

/// Gradient of SURE in `x_noisy`. Analytic when the denoiser exposes Jacobian-transpose
/// products (no extra NFE), otherwise central differences.
pub fn sure_gradient<D: Denoiser + ?Sized>(den: &D, x_noisy: &Signal, eval: &SureEvaluation) -> Result<Signal> {
    if den.capabilities().analytic_input_gradient {
        sure_gradient_analytic(den, x_noisy, eval)
    } else {
        let h = 1e-4 * (1.0 + x_noisy.max_abs());
        sure_gradient_fd(den, x_noisy, eval, h)
    }
}

/// `2r - J(x)^T (2r + c sum_p b_p) + c sum_p J(x + eps b_p)^T b_p` with
/// `r = x - D(x)` and `c = 2 s^2 / (eps P)`.
pub fn sure_gradient_analytic<D: Denoiser + ?Sized>(
    den: &D,
    x_noisy: &Signal,
    eval: &SureEvaluation,
) -> Result<Signal> {
    x_noisy.ensure_same_shape(&eval.denoised)?;
    let sigma = eval.sigma_hat;
    let eps = eval.epsilon;
    let probe_sigma = eps.max(sigma);
    let c = 2.0 * sigma * sigma / (eps * eval.probes.len() as f64);
    let r = x_noisy.sub(&eval.denoised)?;

    let mut probe_sum = Signal::zeros(x_noisy.shape());
    let mut shifted_terms = Signal::zeros(x_noisy.shape());
    for b in &eval.probes {
        probe_sum = probe_sum.add_scaled(b, 1.0)?;
        let shifted = x_noisy.add_scaled(b, eps)?;
        let jb = den.jacobian_transpose_apply(&shifted, probe_sigma, b)?;
        shifted_terms = shifted_terms.add_scaled(&jb, 1.0)?;
    }
    let v = r.scale(2.0)?.add_scaled(&probe_sum, c)?;
    let jv = den.jacobian_transpose_apply(x_noisy, sigma, &v)?;
    r.scale(2.0)?.add_scaled(&jv, -1.0)?.add_scaled(&shifted_terms, c)
}

/// Central differences of [`sure_expression`] with step `h`. Costs `2 n (1 + P)` NFE.
pub fn sure_gradient_fd<D: Denoiser + ?Sized>(
    den: &D,
    x_noisy: &Signal,
    eval: &SureEvaluation,
    h: f64,
) -> Result<Signal> {
    if !(h > 0.0) {
        return invalid("finite-difference step must be positive");
    }
    let mut grad = Vec::with_capacity(x_noisy.len());
    let mut buf = x_noisy.clone().into_vec();
    for i in 0..x_noisy.len() {
        let orig = buf[i];
        buf[i] = orig + h;
        let plus = sure_expression(den, &x_noisy.with_data(buf.clone())?, eval)?;
        buf[i] = orig - h;
        let minus = sure_expression(den, &x_noisy.with_data(buf.clone())?, eval)?;
        buf[i] = orig;
        grad.push((plus - minus) / (2.0 * h));
    }
    x_noisy.with_data(grad)
}

/// `x - alpha * grad`
pub fn sure_update(x: &Signal, grad: &Signal, alpha: f64) -> Result<Signal> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha must be >= 0, got {alpha}"));
    }
    x.add_scaled(grad, -alpha)
}
