use serde::{Deserialize, Serialize};

use crate::error::{Result, SgpsError};

/// Patch geometry for the PCA noise estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchConfig {
    /// Side length of square patches (window length for 1D signals).
    pub size: usize,
    pub stride: usize,
    /// Relative tolerance for the mean == median stopping test.
    pub tolerance: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            size: 7,
            stride: 1,
            tolerance: 1e-3,
        }
    }
}

impl PatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.stride == 0 {
            return Err(cfg_err("patch size and stride must be >= 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(cfg_err("patch tolerance must be >= 0"));
        }
        Ok(())
    }
}

/// Knobs of one sampler run. Defaults reproduce the reference setup:
/// 16 steps, alpha 0.5, 100 Langevin steps, rho 7, t_min 0.02, one probe,
/// one SURE update per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub steps: usize,
    pub alpha: f64,
    pub epsilon_divisor: f64,
    pub langevin_steps: usize,
    /// Fixed Langevin step size. `None` selects `0.5 * min(sigma_t^2, sigma_y^2) / lipschitz_scale`.
    pub langevin_eta: Option<f64>,
    pub lipschitz_scale: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub t_min: f64,
    /// Top of the noise ladder. `None` means `steps as f64`.
    pub t_max: Option<f64>,
    pub sure_enabled: bool,
    pub sure_repeats: usize,
    pub mc_probes: usize,
    pub ode_substeps: usize,
    pub sigma_floor: f64,
    /// Multiplier applied to the clamped noise estimate before SURE (sensitivity ablation).
    pub sigma_hat_scale: f64,
    /// Draw a fresh probe for every SURE repeat instead of one per step.
    pub resample_probe: bool,
    pub patch: PatchConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: 16,
            alpha: 0.5,
            epsilon_divisor: 1000.0,
            langevin_steps: 100,
            langevin_eta: None,
            lipschitz_scale: 1.0,
            sigma_y: 0.05,
            rho: 7.0,
            t_min: 0.02,
            t_max: None,
            sure_enabled: true,
            sure_repeats: 1,
            mc_probes: 1,
            ode_substeps: 1,
            sigma_floor: 1e-3,
            sigma_hat_scale: 1.0,
            resample_probe: false,
            patch: PatchConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or(self.steps as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("steps", self.steps),
            ("langevin_steps", self.langevin_steps),
            ("sure_repeats", self.sure_repeats),
            ("mc_probes", self.mc_probes),
            ("ode_substeps", self.ode_substeps),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(cfg_err(format!("{name} must be >= 1")));
            }
        }
        if self.steps < 2 {
            return Err(cfg_err("steps must be >= 2 for the noise ladder"));
        }
        let positive = [
            ("epsilon_divisor", self.epsilon_divisor),
            ("lipschitz_scale", self.lipschitz_scale),
            ("sigma_y", self.sigma_y),
            ("rho", self.rho),
            ("t_min", self.t_min),
            ("sigma_hat_scale", self.sigma_hat_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(cfg_err(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(cfg_err(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.sigma_floor >= 0.0) {
            return Err(cfg_err("sigma_floor must be >= 0"));
        }
        if let Some(eta) = self.langevin_eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(cfg_err(format!("langevin_eta must be positive, got {eta}")));
            }
        }
        if !(self.t_min < self.t_max()) {
            return Err(cfg_err(format!(
                "t_min ({}) must be below t_max ({})",
                self.t_min,
                self.t_max()
            )));
        }
        self.patch.validate()
    }

    /// Denoiser evaluations per step when no SURE update is skipped.
    pub fn nfe_per_step(&self) -> usize {
        if self.sure_enabled {
            self.ode_substeps + self.sure_repeats * (1 + self.mc_probes)
        } else {
            self.ode_substeps
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> SgpsError {
    SgpsError::Config(msg.into())
}
