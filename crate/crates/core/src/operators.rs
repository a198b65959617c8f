//! Forward measurement operators `A(.)` and the gradient of the data-fidelity term.

use num_complex::Complex64;

use crate::error::{invalid, Result, SgpsError};
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// Keeps the listed flat indices, in order.
    Mask { keep: Vec<usize> },
    /// Circular convolution, kernel centred at `(len - 1) / 2` along each axis.
    Blur { kernel: Signal },
    /// Block average by `factor` along every axis.
    Downsample { factor: usize },
    /// `|F x|` on a grid zero-padded by `oversample` along every non-trivial axis.
    MagnitudeDft { oversample: f64 },
    /// `min(x, t) / t` (hard) or `tanh(x / t)` (smooth).
    RangeClip { threshold: f64, smooth: bool },
}

#[derive(Debug, Clone)]
pub struct ForwardOp {
    kind: OpKind,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    dft: Option<DftPlan>,
}

impl ForwardOp {
    pub fn mask(input_shape: &[usize], keep: Vec<usize>) -> Result<Self> {
        let n: usize = input_shape.iter().product();
        check_rank(input_shape)?;
        if let Some(bad) = keep.iter().find(|&&i| i >= n) {
            return invalid(format!("mask index {bad} out of range for {n} entries"));
        }
        if keep.is_empty() {
            return invalid("mask keeps no entries");
        }
        Ok(Self {
            output_shape: vec![keep.len()],
            kind: OpKind::Mask { keep },
            input_shape: input_shape.to_vec(),
            dft: None,
        })
    }

    pub fn blur(input_shape: &[usize], kernel: Signal) -> Result<Self> {
        check_rank(input_shape)?;
        if kernel.shape().len() != input_shape.len() {
            return invalid("blur kernel rank must match the input rank");
        }
        if kernel.shape().iter().zip(input_shape).any(|(k, n)| k > n) {
            return invalid("blur kernel larger than the input");
        }
        Ok(Self {
            kind: OpKind::Blur { kernel },
            input_shape: input_shape.to_vec(),
            output_shape: input_shape.to_vec(),
            dft: None,
        })
    }

    /// The identity map, realised as a one-tap blur.
    pub fn identity(shape: &[usize]) -> Result<Self> {
        let k = vec![1; shape.len()];
        Self::blur(shape, Signal::new(vec![1.0], k)?)
    }

    pub fn downsample(input_shape: &[usize], factor: usize) -> Result<Self> {
        check_rank(input_shape)?;
        if factor == 0 || input_shape.iter().any(|n| n % factor != 0) {
            return invalid(format!("input shape {input_shape:?} not divisible by factor {factor}"));
        }
        Ok(Self {
            kind: OpKind::Downsample { factor },
            input_shape: input_shape.to_vec(),
            output_shape: input_shape.iter().map(|n| n / factor).collect(),
            dft: None,
        })
    }

    pub fn magnitude_dft(input_shape: &[usize], oversample: f64) -> Result<Self> {
        check_rank(input_shape)?;
        if !(oversample >= 1.0 && oversample.is_finite()) {
            return invalid(format!("oversample ratio must be >= 1, got {oversample}"));
        }
        let padded = |n: usize| ((n as f64) * oversample).ceil() as usize;
        let output_shape: Vec<usize> = input_shape.iter().map(|&n| padded(n)).collect();
        let (n1, n2) = dims2(input_shape);
        let (m1, m2) = dims2(&output_shape);
        Ok(Self {
            kind: OpKind::MagnitudeDft { oversample },
            input_shape: input_shape.to_vec(),
            output_shape,
            dft: Some(DftPlan::new(n1, n2, m1, m2)),
        })
    }

    pub fn range_clip(input_shape: &[usize], threshold: f64, smooth: bool) -> Result<Self> {
        check_rank(input_shape)?;
        if !(threshold > 0.0 && threshold.is_finite()) {
            return invalid(format!("clip threshold must be positive, got {threshold}"));
        }
        Ok(Self {
            kind: OpKind::RangeClip { threshold, smooth },
            input_shape: input_shape.to_vec(),
            output_shape: input_shape.to_vec(),
            dft: None,
        })
    }

    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self.kind,
            OpKind::Mask { .. } | OpKind::Blur { .. } | OpKind::Downsample { .. }
        )
    }

    pub fn apply(&self, x: &Signal) -> Result<Signal> {
        x.ensure_shape(&self.input_shape)?;
        let data = match &self.kind {
            OpKind::Mask { keep } => keep.iter().map(|&i| x[i]).collect(),
            OpKind::Blur { kernel } => convolve(x, kernel, false),
            OpKind::Downsample { factor } => block_average(x, *factor),
            OpKind::MagnitudeDft { .. } => self
                .plan()
                .forward(x.as_slice())
                .iter()
                .map(|z| z.norm())
                .collect(),
            OpKind::RangeClip { threshold, smooth } => x
                .iter()
                .map(|&v| clip_value(v, *threshold, *smooth))
                .collect(),
        };
        Signal::new(data, self.output_shape.clone())
    }

    /// `A^T w` for linear operators.
    pub fn adjoint(&self, w: &Signal) -> Result<Signal> {
        w.ensure_shape(&self.output_shape)?;
        let n: usize = self.input_shape.iter().product();
        let data = match &self.kind {
            OpKind::Mask { keep } => {
                let mut out = vec![0.0; n];
                for (&i, v) in keep.iter().zip(w.iter()) {
                    out[i] += v;
                }
                out
            }
            OpKind::Blur { kernel } => convolve(w, kernel, true),
            OpKind::Downsample { factor } => {
                let up = upsample_replicate(w, *factor)?;
                let scale = 1.0 / (*factor as f64).powi(self.input_shape.len() as i32);
                up.iter().map(|v| v * scale).collect()
            }
            _ => return invalid("adjoint is only defined for linear operators"),
        };
        Signal::new(data, self.input_shape.clone())
    }

    /// `|A(x) - y|^2 / (2 sigma_y^2)`
    pub fn fidelity(&self, x: &Signal, y: &Signal, sigma_y: f64) -> Result<f64> {
        check_sigma_y(sigma_y)?;
        let ax = self.apply(x)?;
        Ok(ax.sub(y)?.norm_sq() / (2.0 * sigma_y * sigma_y))
    }

    fn plan(&self) -> &DftPlan {
        self.dft.as_ref().expect("magnitude-dft operator carries a plan")
    }
}

/// Gradient of `|A(x) - y|^2 / (2 sigma_y^2)` in `x`.
///
/// Magnitude bins with `|F x| = 0` contribute nothing; the hard clip uses
/// derivative 0 at and above the threshold.
pub fn fidelity_gradient(op: &ForwardOp, x: &Signal, y: &Signal, sigma_y: f64) -> Result<Signal> {
    check_sigma_y(sigma_y)?;
    x.ensure_shape(&op.input_shape)?;
    y.ensure_shape(&op.output_shape)?;
    let inv_var = 1.0 / (sigma_y * sigma_y);
    match &op.kind {
        OpKind::Mask { .. } | OpKind::Blur { .. } | OpKind::Downsample { .. } => {
            let r = op.apply(x)?.sub(y)?.scale(inv_var)?;
            op.adjoint(&r)
        }
        OpKind::MagnitudeDft { .. } => {
            let plan = op.plan();
            let z = plan.forward(x.as_slice());
            let weighted: Vec<Complex64> = z
                .iter()
                .zip(y.iter())
                .map(|(zk, yk)| {
                    let mag = zk.norm();
                    if mag == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        zk * ((mag - yk) * inv_var / mag)
                    }
                })
                .collect();
            x.with_data(plan.adjoint_real(&weighted))
        }
        OpKind::RangeClip { threshold, smooth } => {
            let data = x
                .iter()
                .zip(y.iter())
                .map(|(&v, yk)| {
                    let r = clip_value(v, *threshold, *smooth) - yk;
                    r * inv_var * clip_derivative(v, *threshold, *smooth)
                })
                .collect();
            x.with_data(data)
        }
    }
}

/// Nearest-neighbour upsampling: every entry becomes a `factor`-sized block.
pub fn upsample_replicate(v: &Signal, factor: usize) -> Result<Signal> {
    if factor == 0 {
        return invalid("replication factor must be >= 1");
    }
    let (h, w) = v.dims2();
    let two_d = v.shape().len() == 2;
    let (oh, ow) = if two_d { (h * factor, w * factor) } else { (1, w * factor) };
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        let sr = if two_d { r / factor } else { 0 };
        for c in 0..ow {
            out[r * ow + c] = v.as_slice()[sr * w + c / factor];
        }
    }
    let shape = if two_d { vec![oh, ow] } else { vec![ow] };
    Signal::new(out, shape)
}

fn check_rank(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > 2 || shape.contains(&0) {
        return Err(SgpsError::InvalidArgument(format!(
            "operator input shape must be 1D or 2D and non-empty, got {shape:?}"
        )));
    }
    Ok(())
}

fn check_sigma_y(sigma_y: f64) -> Result<()> {
    if !(sigma_y > 0.0 && sigma_y.is_finite()) {
        return invalid(format!("sigma_y must be positive, got {sigma_y}"));
    }
    Ok(())
}

fn dims2(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (1, *n),
        [h, w] => (*h, *w),
        _ => unreachable!(),
    }
}

fn clip_value(v: f64, t: f64, smooth: bool) -> f64 {
    if smooth {
        (v / t).tanh()
    } else {
        v.min(t) / t
    }
}

fn clip_derivative(v: f64, t: f64, smooth: bool) -> f64 {
    if smooth {
        let c = (v / t).cosh();
        1.0 / (t * c * c)
    } else if v < t {
        1.0 / t
    } else {
        0.0
    }
}

/// Circular convolution (or, with `adjoint`, correlation) of `x` with `kernel`.
fn convolve(x: &Signal, kernel: &Signal, adjoint: bool) -> Vec<f64> {
    let (h, w) = x.dims2();
    let (kh, kw) = kernel.dims2();
    let (ch, cw) = ((kh - 1) / 2, (kw - 1) / 2);
    let xs = x.as_slice();
    let ks = kernel.as_slice();
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for a in 0..kh {
                for b in 0..kw {
                    let tap = ks[a * kw + b];
                    if tap == 0.0 {
                        continue;
                    }
                    // forward: y[i] = sum_j h[j] x[i - (j - c)]; adjoint flips the offset
                    let (dr, dc) = if adjoint {
                        (a as isize - ch as isize, b as isize - cw as isize)
                    } else {
                        (ch as isize - a as isize, cw as isize - b as isize)
                    };
                    let rr = (r as isize + dr).rem_euclid(h as isize) as usize;
                    let cc = (c as isize + dc).rem_euclid(w as isize) as usize;
                    acc += tap * xs[rr * w + cc];
                }
            }
            out[r * w + c] = acc;
        }
    }
    out
}

fn block_average(x: &Signal, factor: usize) -> Vec<f64> {
    let (h, w) = x.dims2();
    let two_d = x.shape().len() == 2;
    let (oh, ow) = if two_d { (h / factor, w / factor) } else { (1, w / factor) };
    let fr = if two_d { factor } else { 1 };
    let norm = 1.0 / (fr * factor) as f64;
    let xs = x.as_slice();
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for a in 0..fr {
                for b in 0..factor {
                    acc += xs[(r * fr + a) * w + c * factor + b];
                }
            }
            out[r * ow + c] = acc * norm;
        }
    }
    out
}

/// Direct separable DFT from an `n1 x n2` grid onto a zero-padded `m1 x m2` grid.
#[derive(Debug, Clone)]
struct DftPlan {
    n1: usize,
    n2: usize,
    m1: usize,
    m2: usize,
    tw1: Vec<Complex64>,
    tw2: Vec<Complex64>,
}

impl DftPlan {
    fn new(n1: usize, n2: usize, m1: usize, m2: usize) -> Self {
        let twiddles = |m: usize| {
            (0..m)
                .map(|k| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / m as f64))
                .collect()
        };
        Self {
            n1,
            n2,
            m1,
            m2,
            tw1: twiddles(m1),
            tw2: twiddles(m2),
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let (n1, n2, m1, m2) = (self.n1, self.n2, self.m1, self.m2);
        let mut rows = vec![Complex64::new(0.0, 0.0); n1 * m2];
        for r in 0..n1 {
            for k in 0..m2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n2 {
                    acc += self.tw2[(k * j) % m2] * x[r * n2 + j];
                }
                rows[r * m2 + k] = acc;
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); m1 * m2];
        for k1 in 0..m1 {
            for j1 in 0..n1 {
                let t = self.tw1[(k1 * j1) % m1];
                for k2 in 0..m2 {
                    out[k1 * m2 + k2] += t * rows[j1 * m2 + k2];
                }
            }
        }
        out
    }

    /// `Re(F^H u)` restricted to the unpadded support.
    fn adjoint_real(&self, u: &[Complex64]) -> Vec<f64> {
        let (n1, n2, m1, m2) = (self.n1, self.n2, self.m1, self.m2);
        let mut cols = vec![Complex64::new(0.0, 0.0); n1 * m2];
        for j1 in 0..n1 {
            for k1 in 0..m1 {
                let t = self.tw1[(k1 * j1) % m1].conj();
                for k2 in 0..m2 {
                    cols[j1 * m2 + k2] += t * u[k1 * m2 + k2];
                }
            }
        }
        let mut out = vec![0.0; n1 * n2];
        for j1 in 0..n1 {
            for j2 in 0..n2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k2 in 0..m2 {
                    acc += self.tw2[(k2 * j2) % m2].conj() * cols[j1 * m2 + k2];
                }
                out[j1 * n2 + j2] = acc.re;
            }
        }
        out
    }
}
