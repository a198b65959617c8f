//! SURE-guided posterior sampling for inverse problems.
//!
//! A diffusion sampler alternates denoising, Langevin measurement guidance,
//! patch-PCA noise estimation and a gradient step on Stein's unbiased risk
//! estimate. Priors are analytic (Gaussian mixtures), so every statistical
//! property of the pipeline can be checked against closed forms.

pub mod analysis;
pub mod config;
pub mod error;
pub mod guidance;
pub mod harness;
pub mod metrics;
pub mod noise_est;
pub mod operators;
pub mod prior;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod signal;
pub mod sure;
pub mod tasks;

pub use config::{PatchConfig, SamplerConfig};
pub use error::{Result, SgpsError};
pub use metrics::psnr;
pub use operators::{fidelity_gradient, ForwardOp, OpKind};
pub use prior::{Capabilities, CountingDenoiser, Denoiser, GmmPrior, LinearDenoiser, PerturbedDenoiser};
pub use report::{FinalRecord, RunReport, StepRecord};
pub use rng::{gaussian_vector, RngStream};
pub use sampler::{sgps_run_observed, denoise_step, noise_influx_trace, sgps_run, InfluxTrace};
pub use schedule::{build_schedule, SigmaSchedule};
pub use signal::Signal;
