//! Per-run trace of the sampler and its CSV encoding.

use std::io::Write;
use std::time::Duration;

use crate::error::Result;

/// Column order of the per-step CSV (schema version [`STEP_CSV_VERSION`]).
pub const STEP_CSV_HEADER: [&str; 9] = [
    "step",
    "sigma_t",
    "sigma_hat_raw",
    "sigma_hat_used",
    "sure_value",
    "psnr_x0t",
    "psnr_x0ty",
    "psnr_star",
    "nfe_step",
];
pub const STEP_CSV_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub sigma_t: f64,
    /// PCA estimate on the guided sample, before clamping and scaling.
    pub sigma_hat_raw: f64,
    /// Noise level handed to SURE on the last repeat; `None` when SURE was off or skipped.
    pub sigma_hat_used: Option<f64>,
    pub sure_value: Option<f64>,
    /// PCA estimate on the corrected sample (equals `sigma_hat_raw` without SURE).
    pub sigma_hat_star: f64,
    pub psnr_x0t: Option<f64>,
    pub psnr_x0ty: Option<f64>,
    pub psnr_star: Option<f64>,
    pub nfe: u64,
    pub sure_skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalRecord {
    pub psnr: Option<f64>,
    pub mse: Option<f64>,
    pub total_nfe: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub steps: Vec<StepRecord>,
    pub final_record: FinalRecord,
}

impl RunReport {
    pub fn total_nfe(&self) -> u64 {
        self.final_record.total_nfe
    }

    /// Per-step NFE summed; always equal to `total_nfe` for reports built by the sampler.
    pub fn summed_step_nfe(&self) -> u64 {
        self.steps.iter().map(|s| s.nfe).sum()
    }

    pub fn write_steps_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(STEP_CSV_HEADER)?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                fmt_f64(s.sigma_t),
                fmt_f64(s.sigma_hat_raw),
                fmt_opt(s.sigma_hat_used),
                fmt_opt(s.sure_value),
                fmt_opt(s.psnr_x0t),
                fmt_opt(s.psnr_x0ty),
                fmt_opt(s.psnr_star),
                s.nfe.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
