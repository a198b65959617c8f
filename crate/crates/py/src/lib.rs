//! Python bindings. Signals cross the boundary as flat lists plus a shape.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sgps_core::noise_est::estimate_sigma as core_estimate_sigma;
use sgps_core::sure::sure_value as core_sure_value;
use sgps_core::{
    build_schedule, psnr as core_psnr, sgps_run, Denoiser, ForwardOp, GmmPrior, PatchConfig, RngStream,
    SamplerConfig, SgpsError, Signal,
};

fn to_py(e: SgpsError) -> PyErr {
    match e {
        SgpsError::Config(_) | SgpsError::InvalidArgument(_) | SgpsError::ShapeMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn signal(data: Vec<f64>, shape: Option<Vec<usize>>) -> PyResult<Signal> {
    let shape = shape.unwrap_or_else(|| vec![data.len()]);
    Signal::new(data, shape).map_err(to_py)
}

#[pyclass(name = "GmmPrior", module = "sgps", frozen)]
struct PyGmmPrior {
    inner: GmmPrior,
}

#[pymethods]
impl PyGmmPrior {
    /// Isotropic mixture from flat component means sharing `shape`.
    #[new]
    #[pyo3(signature = (means, variance, weights=None, shape=None))]
    fn new(means: Vec<Vec<f64>>, variance: f64, weights: Option<Vec<f64>>, shape: Option<Vec<usize>>) -> PyResult<Self> {
        let means = means
            .into_iter()
            .map(|m| signal(m, shape.clone()))
            .collect::<PyResult<Vec<_>>>()?;
        let weights = weights.unwrap_or_else(|| vec![1.0 / means.len().max(1) as f64; means.len()]);
        let inner = GmmPrior::new(weights, means, variance).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn toy_1d(n: usize, k: usize, variance: f64, seed: u64) -> PyResult<Self> {
        let inner = sgps_core::tasks::toy_1d(n, k, variance, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn toy_2d(h: usize, w: usize, k: usize, variance: f64, seed: u64) -> PyResult<Self> {
        let inner = sgps_core::tasks::toy_2d(h, w, k, variance, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn denoise(&self, x: Vec<f64>, sigma: f64) -> PyResult<Vec<f64>> {
        let x = signal(x, Some(self.shape()))?;
        Ok(self.inner.denoise(&x, sigma).map_err(to_py)?.into_vec())
    }

    fn score(&self, x: Vec<f64>, sigma: f64) -> PyResult<Vec<f64>> {
        let x = signal(x, Some(self.shape()))?;
        Ok(self.inner.score(&x, sigma).map_err(to_py)?.into_vec())
    }

    fn jacobian_trace(&self, x: Vec<f64>, sigma: f64) -> PyResult<f64> {
        let x = signal(x, Some(self.shape()))?;
        self.inner.jacobian_trace(&x, sigma).map_err(to_py)
    }

    #[pyo3(signature = (seed, stream=0))]
    fn sample(&self, seed: u64, stream: u64) -> Vec<f64> {
        self.inner.sample(&mut RngStream::new(seed, stream)).into_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "GmmPrior(components={}, shape={:?}, variance={})",
            self.inner.means().len(),
            self.inner.shape(),
            self.inner.variance()
        )
    }
}

#[pyclass(name = "ForwardOp", module = "sgps", frozen)]
struct PyForwardOp {
    inner: ForwardOp,
}

#[pymethods]
impl PyForwardOp {
    #[staticmethod]
    fn identity(shape: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: ForwardOp::identity(&shape).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn mask(shape: Vec<usize>, keep: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: ForwardOp::mask(&shape, keep).map_err(to_py)?,
        })
    }

    /// Gaussian blur with an odd `kernel_size` and circular boundary.
    #[staticmethod]
    #[pyo3(signature = (shape, kernel_size=5, kernel_width=1.0))]
    fn blur(shape: Vec<usize>, kernel_size: usize, kernel_width: f64) -> PyResult<Self> {
        let k = sgps_core::tasks::gaussian_kernel(kernel_size, kernel_width, shape.len() == 2).map_err(to_py)?;
        Ok(Self {
            inner: ForwardOp::blur(&shape, k).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn downsample(shape: Vec<usize>, factor: usize) -> PyResult<Self> {
        Ok(Self {
            inner: ForwardOp::downsample(&shape, factor).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (shape, oversample=2.0))]
    fn phase_retrieval(shape: Vec<usize>, oversample: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ForwardOp::magnitude_dft(&shape, oversample).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (shape, threshold=0.8, smooth=false))]
    fn clip(shape: Vec<usize>, threshold: f64, smooth: bool) -> PyResult<Self> {
        Ok(Self {
            inner: ForwardOp::range_clip(&shape, threshold, smooth).map_err(to_py)?,
        })
    }

    #[getter]
    fn input_shape(&self) -> Vec<usize> {
        self.inner.input_shape().to_vec()
    }

    #[getter]
    fn output_shape(&self) -> Vec<usize> {
        self.inner.output_shape().to_vec()
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = signal(x, Some(self.input_shape()))?;
        Ok(self.inner.apply(&x).map_err(to_py)?.into_vec())
    }

    fn adjoint(&self, w: Vec<f64>) -> PyResult<Vec<f64>> {
        let w = signal(w, Some(self.output_shape()))?;
        Ok(self.inner.adjoint(&w).map_err(to_py)?.into_vec())
    }

    fn __repr__(&self) -> String {
        format!("ForwardOp({:?}, input_shape={:?})", self.inner.kind(), self.inner.input_shape())
    }
}

#[pyclass(name = "SamplerConfig", module = "sgps", from_py_object)]
#[derive(Clone)]
struct PySamplerConfig {
    #[pyo3(get, set)]
    steps: usize,
    #[pyo3(get, set)]
    alpha: f64,
    #[pyo3(get, set)]
    langevin_steps: usize,
    #[pyo3(get, set)]
    langevin_eta: Option<f64>,
    #[pyo3(get, set)]
    sigma_y: f64,
    #[pyo3(get, set)]
    rho: f64,
    #[pyo3(get, set)]
    t_min: f64,
    #[pyo3(get, set)]
    t_max: Option<f64>,
    #[pyo3(get, set)]
    sure_enabled: bool,
    #[pyo3(get, set)]
    sure_repeats: usize,
    #[pyo3(get, set)]
    mc_probes: usize,
    #[pyo3(get, set)]
    ode_substeps: usize,
    #[pyo3(get, set)]
    sigma_hat_scale: f64,
}

impl PySamplerConfig {
    fn to_core(&self) -> SamplerConfig {
        SamplerConfig {
            steps: self.steps,
            alpha: self.alpha,
            langevin_steps: self.langevin_steps,
            langevin_eta: self.langevin_eta,
            sigma_y: self.sigma_y,
            rho: self.rho,
            t_min: self.t_min,
            t_max: self.t_max,
            sure_enabled: self.sure_enabled,
            sure_repeats: self.sure_repeats,
            mc_probes: self.mc_probes,
            ode_substeps: self.ode_substeps,
            sigma_hat_scale: self.sigma_hat_scale,
            ..SamplerConfig::default()
        }
    }
}

#[pymethods]
impl PySamplerConfig {
    #[new]
    fn new() -> Self {
        let c = SamplerConfig::default();
        Self {
            steps: c.steps,
            alpha: c.alpha,
            langevin_steps: c.langevin_steps,
            langevin_eta: c.langevin_eta,
            sigma_y: c.sigma_y,
            rho: c.rho,
            t_min: c.t_min,
            t_max: c.t_max,
            sure_enabled: c.sure_enabled,
            sure_repeats: c.sure_repeats,
            mc_probes: c.mc_probes,
            ode_substeps: c.ode_substeps,
            sigma_hat_scale: c.sigma_hat_scale,
        }
    }

    fn nfe_per_step(&self) -> usize {
        self.to_core().nfe_per_step()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.to_core())
    }
}

#[pyfunction]
fn schedule(steps: usize, t_min: f64, t_max: f64, rho: f64) -> PyResult<Vec<f64>> {
    Ok(build_schedule(steps, t_min, t_max, rho).map_err(to_py)?.sigmas().to_vec())
}

#[pyfunction]
#[pyo3(signature = (a, b, peak=1.0))]
fn psnr(a: Vec<f64>, b: Vec<f64>, peak: f64) -> PyResult<f64> {
    core_psnr(&signal(a, None)?, &signal(b, None)?, peak).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, shape=None, patch=7, stride=1))]
fn estimate_sigma(x: Vec<f64>, shape: Option<Vec<usize>>, patch: usize, stride: usize) -> PyResult<f64> {
    let cfg = PatchConfig {
        size: patch,
        stride,
        ..PatchConfig::default()
    };
    core_estimate_sigma(&signal(x, shape)?, &cfg).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (prior, x, sigma_hat, probes=1, seed=0))]
fn sure_value(prior: &PyGmmPrior, x: Vec<f64>, sigma_hat: f64, probes: usize, seed: u64) -> PyResult<f64> {
    let x = signal(x, Some(prior.shape()))?;
    let cfg = SamplerConfig {
        mc_probes: probes,
        ..SamplerConfig::default()
    };
    let eval = core_sure_value(&prior.inner, &x, sigma_hat, &cfg, &mut RngStream::new(seed, 0)).map_err(to_py)?;
    Ok(eval.value)
}

/// Runs the sampler and returns `(sample, report)`; the report is a dict with
/// `psnr`, `mse`, `total_nfe` and a per-step list.
#[pyfunction]
#[pyo3(signature = (prior, op, y, config=None, seed=0, stream=0, truth=None))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    prior: &PyGmmPrior,
    op: &PyForwardOp,
    y: Vec<f64>,
    config: Option<PySamplerConfig>,
    seed: u64,
    stream: u64,
    truth: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Bound<'py, PyDict>)> {
    let cfg = config.unwrap_or_else(PySamplerConfig::new).to_core();
    let y = signal(y, Some(op.output_shape()))?;
    let truth = truth.map(|t| signal(t, Some(prior.shape()))).transpose()?;
    let (x, report) = py
        .detach(|| sgps_run(&prior.inner, &op.inner, &y, &cfg, RngStream::new(seed, stream), truth.as_ref()))
        .map_err(to_py)?;

    let out = PyDict::new(py);
    out.set_item("psnr", report.final_record.psnr)?;
    out.set_item("mse", report.final_record.mse)?;
    out.set_item("total_nfe", report.final_record.total_nfe)?;
    let steps = report
        .steps
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("step", s.step)?;
            d.set_item("sigma_t", s.sigma_t)?;
            d.set_item("sigma_hat_raw", s.sigma_hat_raw)?;
            d.set_item("sigma_hat_used", s.sigma_hat_used)?;
            d.set_item("sure_value", s.sure_value)?;
            d.set_item("psnr_x0t", s.psnr_x0t)?;
            d.set_item("psnr_x0ty", s.psnr_x0ty)?;
            d.set_item("psnr_star", s.psnr_star)?;
            d.set_item("nfe_step", s.nfe)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("steps", steps)?;
    Ok((x.into_vec(), out))
}

#[pymodule]
fn sgps(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGmmPrior>()?;
    m.add_class::<PyForwardOp>()?;
    m.add_class::<PySamplerConfig>()?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(sure_value, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        assert_eq!(PySamplerConfig::new().to_core(), SamplerConfig::default());
    }

    #[test]
    fn signal_defaults_to_flat_shape() {
        assert_eq!(signal(vec![1.0, 2.0, 3.0], None).unwrap().shape(), &[3]);
        assert!(signal(vec![1.0, 2.0], Some(vec![3])).is_err());
    }
}
