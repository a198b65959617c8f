use crate::error::{invalid, Result};
use crate::signal::{mse, Signal};

/// Default peak for signals living in [0, 1].
pub const DEFAULT_PEAK: f64 = 1.0;

/// Peak signal-to-noise ratio in dB. Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &Signal, b: &Signal, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return invalid(format!("psnr peak must be positive, got {peak}"));
    }
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / err).log10())
}
