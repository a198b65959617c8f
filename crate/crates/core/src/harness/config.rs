//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::config::SamplerConfig;
use crate::error::{Result, SgpsError};
use crate::operators::ForwardOp;
use crate::prior::GmmPrior;
use crate::rng::RngStream;
use crate::signal::Signal;
use crate::tasks::{gaussian_kernel, toy_1d, toy_2d};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub prior: PriorSpec,
    #[serde(default)]
    pub operator: OperatorSpec,
    #[serde(default)]
    pub sampler: SamplerConfig,
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub repeats: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Standard deviation of the measurement noise added to `A x0`.
    pub noise_sigma: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            repeats: 1,
            seed: 0,
            output_dir: PathBuf::from("sgps_out"),
            noise_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Toy1d,
    Toy2d,
    Gmm,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub kind: PriorKind,
    /// `[n]` or `[height, width]`.
    pub shape: Vec<usize>,
    #[serde(default = "default_components")]
    pub components: usize,
    #[serde(default = "default_variance")]
    pub variance: f64,
    #[serde(default)]
    pub prior_seed: u64,
    /// Explicit component means for `kind = "gmm"`, each flattened row-major.
    pub means: Option<Vec<Vec<f64>>>,
    pub weights: Option<Vec<f64>>,
    /// Amplitude of the deterministic denoiser perturbation (0 = exact denoiser).
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default = "default_frequency")]
    pub perturbation_frequency: f64,
    /// Ground truth read from a PGM instead of sampled from the prior.
    /// Relative paths are resolved against the config file's directory.
    pub truth_pgm: Option<PathBuf>,
}

fn default_components() -> usize {
    4
}
fn default_variance() -> f64 {
    1e-3
}
fn default_frequency() -> f64 {
    5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    #[default]
    Identity,
    Mask,
    Blur,
    Downsample,
    PhaseRetrieval,
    Clip,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub keep_fraction: f64,
    pub mask_seed: u64,
    pub kernel_size: usize,
    pub kernel_width: f64,
    pub factor: usize,
    pub oversample: f64,
    pub threshold: f64,
    pub smooth: bool,
    /// Whitespace-separated blur taps, one kernel row per line. Replaces the Gaussian kernel.
    pub kernel_file: Option<PathBuf>,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        Self {
            kind: OperatorKind::Identity,
            keep_fraction: 0.5,
            mask_seed: 0,
            kernel_size: 5,
            kernel_width: 1.0,
            factor: 2,
            oversample: 2.0,
            threshold: 0.8,
            smooth: false,
            kernel_file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub alpha: Option<Vec<f64>>,
    pub langevin_eta: Option<Vec<f64>>,
    pub sigma_hat_scale: Option<Vec<f64>>,
    pub mc_probes: Option<Vec<usize>>,
    pub ode_substeps: Option<Vec<usize>>,
    pub sure_repeats: Option<Vec<usize>>,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_max_points() -> usize {
    256
}

/// One sweep coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Override {
    Alpha(f64),
    LangevinEta(f64),
    SigmaHatScale(f64),
    McProbes(usize),
    OdeSubsteps(usize),
    SureRepeats(usize),
}

impl Override {
    fn apply(&self, cfg: &mut SamplerConfig) {
        match *self {
            Override::Alpha(v) => cfg.alpha = v,
            Override::LangevinEta(v) => cfg.langevin_eta = Some(v),
            Override::SigmaHatScale(v) => cfg.sigma_hat_scale = v,
            Override::McProbes(v) => cfg.mc_probes = v,
            Override::OdeSubsteps(v) => cfg.ode_substeps = v,
            Override::SureRepeats(v) => cfg.sure_repeats = v,
        }
    }
}

/// A sampler configuration at one sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub overrides: Vec<Override>,
    pub sampler: SamplerConfig,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> SgpsError {
    SgpsError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| SgpsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| SgpsError::Config(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| SgpsError::Config(format!("{}: not valid UTF-8", path.display())))?;
        let mut cfg = Self::from_toml(text).map_err(|e| match e {
            SgpsError::Config(m) => SgpsError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.prior.truth_pgm, &mut cfg.operator.kernel_file].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok((cfg, bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.repeats == 0 {
            return Err(field_err("experiment.repeats", "must be >= 1"));
        }
        if !(e.noise_sigma >= 0.0 && e.noise_sigma.is_finite()) {
            return Err(field_err("experiment.noise_sigma", "must be finite and >= 0"));
        }
        let p = &self.prior;
        let rank_ok = match p.kind {
            PriorKind::Toy1d => p.shape.len() == 1,
            PriorKind::Toy2d => p.shape.len() == 2,
            PriorKind::Gmm => matches!(p.shape.len(), 1 | 2),
        };
        if !rank_ok || p.shape.iter().any(|&d| d == 0) {
            return Err(field_err("prior.shape", format!("invalid shape {:?} for {:?}", p.shape, p.kind)));
        }
        if p.components == 0 {
            return Err(field_err("prior.components", "must be >= 1"));
        }
        if !(p.variance > 0.0 && p.variance.is_finite()) {
            return Err(field_err("prior.variance", "must be positive"));
        }
        if !(p.perturbation >= 0.0 && p.perturbation.is_finite()) {
            return Err(field_err("prior.perturbation", "must be finite and >= 0"));
        }
        if p.kind == PriorKind::Gmm && p.means.is_none() {
            return Err(field_err("prior.means", "required for kind = \"gmm\""));
        }
        let o = &self.operator;
        if o.kind == OperatorKind::Mask && !(o.keep_fraction > 0.0 && o.keep_fraction <= 1.0) {
            return Err(field_err("operator.keep_fraction", "must be in (0, 1]"));
        }
        self.sampler
            .validate()
            .map_err(|e| SgpsError::Config(format!("sampler.{}", strip_config_prefix(&e))))?;
        if let Some(s) = &self.sweep {
            let axes = [
                ("sweep.alpha", s.alpha.as_ref().map(Vec::len)),
                ("sweep.langevin_eta", s.langevin_eta.as_ref().map(Vec::len)),
                ("sweep.sigma_hat_scale", s.sigma_hat_scale.as_ref().map(Vec::len)),
                ("sweep.mc_probes", s.mc_probes.as_ref().map(Vec::len)),
                ("sweep.ode_substeps", s.ode_substeps.as_ref().map(Vec::len)),
                ("sweep.sure_repeats", s.sure_repeats.as_ref().map(Vec::len)),
            ];
            let mut size = 1usize;
            let mut any = false;
            for (name, len) in axes {
                if let Some(len) = len {
                    if len == 0 {
                        return Err(field_err(name, "must not be empty"));
                    }
                    any = true;
                    size = size.saturating_mul(len);
                }
            }
            if !any {
                return Err(field_err("sweep", "no sweep axis given"));
            }
            if size > s.max_points {
                return Err(field_err(
                    "sweep",
                    format!("{size} points exceed max_points = {}", s.max_points),
                ));
            }
            for pt in self.sweep_points()? {
                pt.sampler
                    .validate()
                    .map_err(|e| SgpsError::Config(format!("sweep point {}: {}", pt.index, strip_config_prefix(&e))))?;
            }
        }
        Ok(())
    }

    /// Cartesian product of the sweep axes, in the fixed axis order
    /// alpha, langevin_eta, sigma_hat_scale, mc_probes, ode_substeps, sure_repeats.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let Some(s) = &self.sweep else {
            return Err(field_err("sweep", "section missing"));
        };
        let mut axes: Vec<Vec<Override>> = Vec::new();
        if let Some(v) = &s.alpha {
            axes.push(v.iter().map(|&x| Override::Alpha(x)).collect());
        }
        if let Some(v) = &s.langevin_eta {
            axes.push(v.iter().map(|&x| Override::LangevinEta(x)).collect());
        }
        if let Some(v) = &s.sigma_hat_scale {
            axes.push(v.iter().map(|&x| Override::SigmaHatScale(x)).collect());
        }
        if let Some(v) = &s.mc_probes {
            axes.push(v.iter().map(|&x| Override::McProbes(x)).collect());
        }
        if let Some(v) = &s.ode_substeps {
            axes.push(v.iter().map(|&x| Override::OdeSubsteps(x)).collect());
        }
        if let Some(v) = &s.sure_repeats {
            axes.push(v.iter().map(|&x| Override::SureRepeats(x)).collect());
        }
        let mut combos: Vec<Vec<Override>> = vec![Vec::new()];
        for axis in &axes {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    axis.iter().map(move |o| {
                        let mut c = c.clone();
                        c.push(*o);
                        c
                    })
                })
                .collect();
        }
        Ok(combos
            .into_iter()
            .enumerate()
            .map(|(index, overrides)| {
                let mut sampler = self.sampler.clone();
                for o in &overrides {
                    o.apply(&mut sampler);
                }
                SweepPoint {
                    index,
                    overrides,
                    sampler,
                }
            })
            .collect())
    }

    /// The single unswept point.
    pub fn base_point(&self) -> SweepPoint {
        SweepPoint {
            index: 0,
            overrides: Vec::new(),
            sampler: self.sampler.clone(),
        }
    }

    pub fn build_prior(&self) -> Result<GmmPrior> {
        let p = &self.prior;
        match p.kind {
            PriorKind::Toy1d => toy_1d(p.shape[0], p.components, p.variance, p.prior_seed),
            PriorKind::Toy2d => toy_2d(p.shape[0], p.shape[1], p.components, p.variance, p.prior_seed),
            PriorKind::Gmm => {
                let raw = p.means.clone().unwrap_or_default();
                let means = raw
                    .into_iter()
                    .map(|m| Signal::new(m, p.shape.clone()))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| field_err("prior.means", e))?;
                let weights = p.weights.clone().unwrap_or_else(|| vec![1.0 / means.len().max(1) as f64; means.len()]);
                GmmPrior::new(weights, means, p.variance).map_err(|e| field_err("prior", e))
            }
        }
    }

    pub fn build_operator(&self) -> Result<ForwardOp> {
        let o = &self.operator;
        let shape = &self.prior.shape;
        let built = match o.kind {
            OperatorKind::Identity => ForwardOp::identity(shape),
            OperatorKind::Mask => {
                let n: usize = shape.iter().product();
                let mut rng = RngStream::new(o.mask_seed, 0);
                let keep: Vec<usize> = (0..n).filter(|_| rng.uniform() < o.keep_fraction).collect();
                ForwardOp::mask(shape, keep)
            }
            OperatorKind::Blur => match &o.kernel_file {
                Some(p) => read_kernel(p, shape.len()).and_then(|k| ForwardOp::blur(shape, k)),
                None => gaussian_kernel(o.kernel_size, o.kernel_width, shape.len() == 2)
                    .and_then(|k| ForwardOp::blur(shape, k)),
            },
            OperatorKind::Downsample => ForwardOp::downsample(shape, o.factor),
            OperatorKind::PhaseRetrieval => ForwardOp::magnitude_dft(shape, o.oversample),
            OperatorKind::Clip => ForwardOp::range_clip(shape, o.threshold, o.smooth),
        };
        built.map_err(|e| field_err("operator", e))
    }
}

/// Reads blur taps: one row per line. A single row on a 2D signal is applied separably.
pub fn read_kernel(path: &Path, ndim: usize) -> Result<Signal> {
    let text = std::fs::read_to_string(path).map_err(|e| SgpsError::Config(format!("{}: {e}", path.display())))?;
    parse_kernel(&text, ndim).map_err(|e| SgpsError::Config(format!("{}: {}", path.display(), strip_config_prefix(&e))))
}

pub fn parse_kernel(text: &str, ndim: usize) -> Result<Signal> {
    let rows = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| SgpsError::Config(format!("bad kernel tap {t:?}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let width = rows.first().map(Vec::len).unwrap_or(0);
    if width == 0 || rows.iter().any(|r| r.len() != width) {
        return Err(SgpsError::Config("kernel rows must be non-empty and of equal length".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SgpsError::Config("kernel taps must be finite".into()));
    }
    match (ndim, rows.len()) {
        (1, 1) => Signal::from_vec(rows.into_iter().next().unwrap()),
        (1, _) => Err(SgpsError::Config("1D signals need a single-row kernel".into())),
        (_, 1) => {
            let r = &rows[0];
            Signal::new(r.iter().flat_map(|a| r.iter().map(move |b| a * b)).collect(), vec![width, width])
        }
        (_, h) => Signal::new(rows.into_iter().flatten().collect(), vec![h, width]),
    }
}

fn strip_config_prefix(e: &SgpsError) -> String {
    match e {
        SgpsError::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
