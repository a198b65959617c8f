//! Langevin measurement guidance: unadjusted Langevin on
//! `|x - anchor|^2 / (2 sigma_t^2) + |A(x) - y|^2 / (2 sigma_y^2)`.

use crate::config::SamplerConfig;
use crate::error::{invalid, Result, SgpsError};
use crate::operators::{fidelity_gradient, ForwardOp};
use crate::rng::RngStream;
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinParams {
    pub steps: usize,
    pub eta: f64,
    pub sigma_y: f64,
    /// `false` turns the chain into plain gradient descent.
    pub inject_noise: bool,
}

/// `0.5 * min(sigma_t^2, sigma_y^2) / lipschitz_scale`
pub fn default_eta(sigma_t: f64, sigma_y: f64, lipschitz_scale: f64) -> f64 {
    0.5 * (sigma_t * sigma_t).min(sigma_y * sigma_y) / lipschitz_scale
}

impl LangevinParams {
    pub fn from_config(cfg: &SamplerConfig, sigma_t: f64) -> Self {
        Self {
            steps: cfg.langevin_steps,
            eta: cfg
                .langevin_eta
                .unwrap_or_else(|| default_eta(sigma_t, cfg.sigma_y, cfg.lipschitz_scale)),
            sigma_y: cfg.sigma_y,
            inject_noise: true,
        }
    }
}

/// Runs `params.steps` Langevin updates from `x_init` and returns the last iterate.
/// Never calls the denoiser.
pub fn langevin_guide(
    x_init: &Signal,
    anchor: &Signal,
    sigma_t: f64,
    op: &ForwardOp,
    y: &Signal,
    params: &LangevinParams,
    rng: &mut RngStream,
) -> Result<Signal> {
    x_init.ensure_same_shape(anchor)?;
    if !(sigma_t > 0.0) {
        return invalid(format!("sigma_t must be positive, got {sigma_t}"));
    }
    if !(params.eta > 0.0 && params.eta.is_finite()) || params.steps == 0 {
        return invalid("Langevin needs eta > 0 and at least one step");
    }
    let inv_prior = 1.0 / (sigma_t * sigma_t);
    let eta = params.eta;
    let noise_scale = if params.inject_noise { (2.0 * eta).sqrt() } else { 0.0 };
    let mut noise = vec![0.0; x_init.len()];
    let mut x = x_init.clone();
    for step in 0..params.steps {
        let g = fidelity_gradient(op, &x, y, params.sigma_y).map_err(|e| match e {
            SgpsError::NonFinite(_) => divergence(step, eta),
            other => other,
        })?;
        if params.inject_noise {
            rng.fill_normal(&mut noise);
        }
        let next: Vec<f64> = x
            .iter()
            .zip(anchor.iter())
            .zip(g.iter())
            .zip(&noise)
            .map(|(((xi, ai), gi), ni)| xi - eta * ((xi - ai) * inv_prior + gi) + noise_scale * ni)
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(divergence(step, eta));
        }
        x = x.with_data(next)?;
    }
    Ok(x)
}

fn divergence(step: usize, eta: f64) -> SgpsError {
    SgpsError::Divergence {
        step,
        stage: "langevin".into(),
        detail: format!("non-finite iterate; step size {eta} is likely too large"),
    }
}
