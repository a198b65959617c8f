//! Karras rho-warped noise ladder with sigma(t) = t.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSchedule {
    sigmas: Vec<f64>,
}

impl SigmaSchedule {
    /// Noise levels from `t_max` (first) down to `t_min` (last).
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigmas[i]
    }

    /// Level following step `i`; zero after the last entry.
    pub fn next_sigma(&self, i: usize) -> f64 {
        self.sigmas.get(i + 1).copied().unwrap_or(0.0)
    }

    pub fn t_max(&self) -> f64 {
        self.sigmas[0]
    }

    pub fn t_min(&self) -> f64 {
        *self.sigmas.last().expect("schedule is non-empty")
    }
}

/// `t_i = (t_max^(1/rho) + i/(N-1) * (t_min^(1/rho) - t_max^(1/rho)))^rho` for `i = 0..N`.
pub fn build_schedule(steps: usize, t_min: f64, t_max: f64, rho: f64) -> Result<SigmaSchedule> {
    if steps < 2 {
        return invalid(format!("schedule needs at least 2 steps, got {steps}"));
    }
    if !(t_min > 0.0 && t_min < t_max && t_max.is_finite()) {
        return invalid(format!("need 0 < t_min < t_max, got t_min={t_min}, t_max={t_max}"));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return invalid(format!("rho must be positive, got {rho}"));
    }
    let hi = t_max.powf(1.0 / rho);
    let lo = t_min.powf(1.0 / rho);
    let last = (steps - 1) as f64;
    let mut sigmas: Vec<f64> = (0..steps)
        .map(|i| (hi + i as f64 / last * (lo - hi)).powf(rho))
        .collect();
    // pin the endpoints against powf round-off
    sigmas[0] = t_max;
    sigmas[steps - 1] = t_min;
    Ok(SigmaSchedule { sigmas })
}
