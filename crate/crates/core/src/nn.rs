//! Dense feed-forward soft classifier with exact gradients.
//!
//! The network is a plain MLP: affine layers with ReLU on hidden layers and a
//! softmax output. Parameters live in one flat [`ParamVector`] with a fixed
//! canonical layout — layer-major, weights before biases, weight matrices
//! row-major with one row per output unit — so aggregation and checkpoint
//! serialization are unambiguous.
//!
//! All math is `f64`. Softmax and cross-entropy subtract the row max before
//! exponentiating, so confident logits do not overflow.

use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{tag, StreamFactory};
use crate::smoothing::SoftClassifier;

/// Hidden-layer activation. Only ReLU is supported; the output layer is
/// always softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

/// Architecture of the classifier: input dim, hidden widths, class count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    layer_sizes: Vec<usize>,
    activation: Activation,
}

impl NetworkSpec {
    /// `layer_sizes` runs input dim, hidden widths, class count. At least
    /// two entries; every width positive; at least two classes.
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "network needs at least 2 layer sizes, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let classes = *layer_sizes.last().unwrap();
        if classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        Ok(NetworkSpec {
            layer_sizes,
            activation: Activation::Relu,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of affine layers.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// (fan_in, fan_out) of affine layer `l`.
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        (self.layer_sizes[l], self.layer_sizes[l + 1])
    }

    /// Total parameter count: Σ (in·out + out) over layers.
    pub fn num_params(&self) -> usize {
        (0..self.num_layers())
            .map(|l| {
                let (i, o) = self.layer_dims(l);
                i * o + o
            })
            .sum()
    }

    /// Offset of layer `l`'s weight block in the canonical layout.
    fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|k| {
                let (i, o) = self.layer_dims(k);
                i * o + o
            })
            .sum()
    }
}

/// Flat parameter vector in the canonical layout, tied to its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    spec: NetworkSpec,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(spec: NetworkSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.num_params() {
            return Err(Error::Shape {
                context: "ParamVector::new",
                expected: spec.num_params(),
                actual: values.len(),
            });
        }
        Ok(ParamVector { spec, values })
    }

    pub fn zeros(spec: NetworkSpec) -> Self {
        let n = spec.num_params();
        ParamVector {
            spec,
            values: vec![0.0; n],
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Weight matrix and bias slices of layer `l`.
    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (i, o) = self.spec.layer_dims(l);
        let base = self.spec.layer_offset(l);
        (
            &self.values[base..base + i * o],
            &self.values[base + i * o..base + i * o + o],
        )
    }
}

/// A minibatch of feature rows with class labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::Shape {
                context: "Batch::new labels",
                expected: inputs.rows(),
                actual: labels.len(),
            });
        }
        if inputs.rows() == 0 {
            return Err(Error::InvalidArgument("batch must be nonempty".into()));
        }
        Ok(Batch { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Per-layer post-activation values of one forward pass. `acts[0]` is the
/// input; the last entry holds softmax probabilities.
struct Trace {
    acts: Vec<Vec<f64>>,
    log_probs: Vec<f64>,
}

fn check_input_dim(spec: &NetworkSpec, cols: usize) -> Result<()> {
    if cols != spec.input_dim() {
        return Err(Error::Shape {
            context: "forward input dim",
            expected: spec.input_dim(),
            actual: cols,
        });
    }
    Ok(())
}

/// One affine layer: z = W·x + b.
fn affine(weights: &[f64], biases: &[f64], input: &[f64], out: &mut [f64]) {
    let fan_in = input.len();
    for (o, z) in out.iter_mut().enumerate() {
        let row = &weights[o * fan_in..(o + 1) * fan_in];
        let mut acc = biases[o];
        for (w, x) in row.iter().zip(input) {
            acc += w * x;
        }
        *z = acc;
    }
}

/// Softmax with row-max subtraction; also returns log-probabilities.
fn softmax_stable(logits: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    let log_sum = sum.ln();
    let log_probs: Vec<f64> = logits.iter().map(|z| z - max - log_sum).collect();
    for p in &mut probs {
        *p /= sum;
    }
    (probs, log_probs)
}

fn forward_trace(params: &ParamVector, input: &[f64]) -> Result<Trace> {
    let spec = params.spec();
    check_input_dim(spec, input.len())?;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(spec.num_layers() + 1);
    acts.push(input.to_vec());
    let mut log_probs = Vec::new();
    for l in 0..spec.num_layers() {
        let (_, out_dim) = spec.layer_dims(l);
        let (w, b) = params.layer(l);
        let mut z = vec![0.0; out_dim];
        affine(w, b, acts.last().unwrap(), &mut z);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                layer: l,
                what: "pre-activation",
            });
        }
        if l + 1 < spec.num_layers() {
            for v in &mut z {
                *v = v.max(0.0);
            }
            acts.push(z);
        } else {
            let (probs, lp) = softmax_stable(&z);
            acts.push(probs);
            log_probs = lp;
        }
    }
    Ok(Trace { acts, log_probs })
}

/// Class-probability rows for a batch of inputs.
pub fn forward(params: &ParamVector, inputs: &Matrix) -> Result<Matrix> {
    check_input_dim(params.spec(), inputs.cols())?;
    let classes = params.spec().num_classes();
    let mut out = Matrix::zeros(inputs.rows(), classes);
    for i in 0..inputs.rows() {
        let trace = forward_trace(params, inputs.row(i))?;
        out.row_mut(i).copy_from_slice(trace.acts.last().unwrap());
    }
    Ok(out)
}

/// Probability of `class` on a single input.
pub fn prob_of(params: &ParamVector, input: &[f64], class: usize) -> Result<f64> {
    let trace = forward_trace(params, input)?;
    Ok(trace.acts.last().unwrap()[class])
}

/// Mean cross-entropy over the batch and its gradient with respect to the
/// parameters, in the same layout as `params`.
pub fn loss_and_param_grad(params: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)> {
    let spec = params.spec();
    let classes = spec.num_classes();
    for &y in &batch.labels {
        if y >= classes {
            return Err(Error::InvalidArgument(format!(
                "label {y} out of range for {classes} classes"
            )));
        }
    }
    let b = batch.len() as f64;
    let mut grad = vec![0.0; spec.num_params()];
    let mut loss = 0.0;
    for (i, &y) in batch.labels.iter().enumerate() {
        let trace = forward_trace(params, batch.inputs.row(i))?;
        loss -= trace.log_probs[y] / b;
        // delta at the output logits of −log p_y, scaled for the batch mean
        let probs = trace.acts.last().unwrap();
        let mut delta: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(c, &p)| (p - if c == y { 1.0 } else { 0.0 }) / b)
            .collect();
        backprop_accumulate(params, &trace, &mut delta, Some(&mut grad));
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            layer: spec.num_layers() - 1,
            what: "loss",
        });
    }
    Ok((loss, ParamVector::new(spec.clone(), grad)?))
}

/// Gradient of `[F(x)]_class` with respect to the input `x`.
pub fn input_grad(params: &ParamVector, input: &[f64], class: usize) -> Result<Vec<f64>> {
    let spec = params.spec();
    if class >= spec.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "class {class} out of range for {} classes",
            spec.num_classes()
        )));
    }
    let trace = forward_trace(params, input)?;
    let probs = trace.acts.last().unwrap();
    // ∂p_class/∂z_k = p_class·(δ_{class,k} − p_k)
    let pc = probs[class];
    let mut delta: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(k, &p)| pc * (if k == class { 1.0 } else { 0.0 } - p))
        .collect();
    Ok(backprop_accumulate(params, &trace, &mut delta, None))
}

/// Propagates `delta` (gradient at the output logits) back to the input,
/// optionally accumulating parameter gradients along the way. Returns the
/// input gradient.
fn backprop_accumulate(
    params: &ParamVector,
    trace: &Trace,
    delta: &mut Vec<f64>,
    mut param_grad: Option<&mut Vec<f64>>,
) -> Vec<f64> {
    let spec = params.spec();
    for l in (0..spec.num_layers()).rev() {
        let (fan_in, fan_out) = spec.layer_dims(l);
        let (w, _) = params.layer(l);
        let layer_input = &trace.acts[l];
        if let Some(grad) = param_grad.as_deref_mut() {
            let base = spec.layer_offset(l);
            for o in 0..fan_out {
                let d = delta[o];
                let wrow = base + o * fan_in;
                for i in 0..fan_in {
                    grad[wrow + i] += d * layer_input[i];
                }
                grad[base + fan_in * fan_out + o] += d;
            }
        }
        let mut prev = vec![0.0; fan_in];
        for o in 0..fan_out {
            let d = delta[o];
            let row = &w[o * fan_in..(o + 1) * fan_in];
            for (p, wv) in prev.iter_mut().zip(row) {
                *p += wv * d;
            }
        }
        if l > 0 {
            // ReLU derivative from the stored post-activation
            for (p, &a) in prev.iter_mut().zip(layer_input) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
        }
        *delta = prev;
    }
    delta.clone()
}

/// One plain SGD step: params − lr·grad.
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, lr: f64) -> ParamVector {
    assert_eq!(
        params.spec(),
        grad.spec(),
        "sgd_step: parameter and gradient specs differ"
    );
    let values = params
        .values
        .iter()
        .zip(&grad.values)
        .map(|(p, g)| p - lr * g)
        .collect();
    ParamVector {
        spec: params.spec.clone(),
        values,
    }
}

/// Seeded initialization: weights zero-mean Gaussian with std 1/√fan_in,
/// biases zero.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> ParamVector {
    let mut rng = StreamFactory::new(seed).stream(&[tag::INIT]);
    let mut values = Vec::with_capacity(spec.num_params());
    for l in 0..spec.num_layers() {
        let (fan_in, fan_out) = spec.layer_dims(l);
        let std = 1.0 / (fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            let z: f64 = rng.sample(StandardNormal);
            values.push(z * std);
        }
        values.extend(std::iter::repeat(0.0).take(fan_out));
    }
    ParamVector {
        spec: spec.clone(),
        values,
    }
}

/// View of a parameter vector as a smoothed-classifier callback.
#[derive(Debug, Clone, Copy)]
pub struct Classifier<'a> {
    params: &'a ParamVector,
}

impl<'a> Classifier<'a> {
    pub fn new(params: &'a ParamVector) -> Self {
        Classifier { params }
    }
}

impl SoftClassifier for Classifier<'_> {
    fn num_classes(&self) -> usize {
        self.params.spec().num_classes()
    }

    fn probabilities(&self, input: &[f64]) -> Result<Vec<f64>> {
        let trace = forward_trace(self.params, input)?;
        Ok(trace.acts.last().unwrap().clone())
    }
}

const CHECKPOINT_HEADER: &str = "fedsmooth-params v1";

/// Writes a checkpoint: header line, comma-separated layer sizes, then the
/// parameters as little-endian 64-bit floats in canonical layout.
pub fn save_params(path: &Path, params: &ParamVector) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::with_capacity(64 + params.len() * 8);
    writeln!(buf, "{CHECKPOINT_HEADER}").map_err(io_err)?;
    let sizes: Vec<String> = params
        .spec()
        .layer_sizes()
        .iter()
        .map(|s| s.to_string())
        .collect();
    writeln!(buf, "{}", sizes.join(",")).map_err(io_err)?;
    for v in params.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(io_err)
}

/// Reads a checkpoint written by [`save_params`].
pub fn load_params(path: &Path) -> Result<ParamVector> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fmt = |msg: String| Error::Checkpoint(format!("{}: {msg}", path.display()));
    let nl1 = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| fmt("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl1]).map_err(|_| fmt("header not UTF-8".into()))?;
    if header != CHECKPOINT_HEADER {
        return Err(fmt(format!(
            "bad header {header:?}, expected {CHECKPOINT_HEADER:?}"
        )));
    }
    let rest = &bytes[nl1 + 1..];
    let nl2 = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| fmt("missing layer-sizes line".into()))?;
    let sizes_line =
        std::str::from_utf8(&rest[..nl2]).map_err(|_| fmt("layer sizes not UTF-8".into()))?;
    let sizes: Vec<usize> = sizes_line
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| fmt(format!("bad layer size {s:?}")))
        })
        .collect::<Result<_>>()?;
    let spec = NetworkSpec::new(sizes)?;
    let payload = &rest[nl2 + 1..];
    let expected = spec.num_params() * 8;
    if payload.len() != expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: payload.len(),
        });
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(fmt("non-finite parameter value".into()));
    }
    ParamVector::new(spec, values)
}
