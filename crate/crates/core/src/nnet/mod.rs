//! Small fully connected networks with exact backpropagation.

mod adam;
pub mod loss;

pub use adam::{Adam, AdamConfig};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gemm, Mat};
use crate::rng::{rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "alpha", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    z
                } else {
                    a * z
                }
            }
            Activation::Tanh => libm::tanh(z),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and the activation `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(alpha) => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    /// Inverted-dropout rate applied to this layer's output during training.
    #[serde(default)]
    pub dropout: f64,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation) -> Self {
        LayerSpec { width, activation, dropout: 0.0 }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = rate;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNetSpec {
    pub input: usize,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs × outputs`.
    pub weights: Mat,
    pub bias: Vec<f64>,
    pub activation: Activation,
    #[serde(default)]
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    input: usize,
    layers: Vec<Dense>,
    /// Bumped on every parameter update; caches from older versions are stale.
    #[serde(default)]
    version: u64,
}

/// Activations recorded by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    inputs: Vec<Mat>,
    pre: Vec<Mat>,
    post: Vec<Mat>,
    dropout_scale: Vec<Option<Vec<f64>>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Mat {
        self.post.last().expect("network has at least one layer")
    }
}

/// Gradients for each layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Mat, Vec<f64>)>,
}

impl Gradients {
    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            w.as_mut_slice().iter_mut().for_each(|v| *v *= s);
            b.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.as_mut_slice().iter_mut().zip(ow.as_slice()).for_each(|(a, b)| *a += b);
            b.iter_mut().zip(ob).for_each(|(a, b)| *a += b);
        }
    }
}

impl DenseNet {
    /// Glorot-uniform weights and zero biases drawn from `spec.seed`.
    pub fn new(spec: &DenseNetSpec) -> Result<Self> {
        if spec.layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        if spec.input == 0 || spec.layers.iter().any(|l| l.width == 0) {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        let mut r = rng(spec.seed);
        let mut fan_in = spec.input;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            let a = libm::sqrt(6.0 / (fan_in + l.width) as f64);
            let w: Vec<f64> = (0..fan_in * l.width).map(|_| r.random_range(-a..a)).collect();
            layers.push(Dense {
                weights: Mat::from_vec(fan_in, l.width, w)?,
                bias: vec![0.0; l.width],
                activation: l.activation,
                dropout: l.dropout,
            });
            fan_in = l.width;
        }
        Ok(DenseNet { input: spec.input, layers, version: 0 })
    }

    /// Builds a network from explicit layers.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let input = layers.first().map(|l| l.weights.rows()).ok_or_else(|| Error::InvalidArgument("no layers".into()))?;
        let mut width = input;
        for l in &layers {
            if l.weights.rows() != width || l.bias.len() != l.weights.cols() {
                return Err(Error::DimensionMismatch { what: "layer shape", expected: width, found: l.weights.rows() });
            }
            width = l.weights.cols();
        }
        Ok(DenseNet { input, layers, version: 0 })
    }

    pub fn input_width(&self) -> usize {
        self.input
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.cols())
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version += 1;
        &mut self.layers
    }

    fn check_input(&self, x: &Mat) -> Result<()> {
        if x.cols() != self.input {
            return Err(Error::DimensionMismatch { what: "network input", expected: self.input, found: x.cols() });
        }
        Ok(())
    }

    fn affine(layer: &Dense, x: &Mat) -> Result<Mat> {
        let mut z = Mat::zeros(x.rows(), layer.weights.cols());
        for r in 0..x.rows() {
            z.row_mut(r).copy_from_slice(&layer.bias);
        }
        gemm(1.0, x, false, &layer.weights, false, 1.0, &mut z)?;
        Ok(z)
    }

    /// Inference pass without dropout.
    pub fn predict(&self, x: &Mat) -> Result<Mat> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            let mut z = Self::affine(layer, &h)?;
            z.as_mut_slice().iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            h = z;
        }
        Ok(h)
    }

    /// Forward pass that records what [`DenseNet::backward`] needs. Dropout
    /// is active only when an RNG is supplied.
    pub fn forward(&self, x: &Mat, mut dropout_rng: Option<&mut Rng>) -> Result<ForwardCache> {
        self.check_input(x)?;
        let n = self.layers.len();
        let mut cache = ForwardCache {
            version: self.version,
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
            dropout_scale: Vec::with_capacity(n),
        };
        let mut h = x.clone();
        for layer in &self.layers {
            let z = Self::affine(layer, &h)?;
            let mut a = z.clone();
            a.as_mut_slice().iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            let scale = match (&mut dropout_rng, layer.dropout > 0.0) {
                (Some(r), true) => {
                    let keep = 1.0 - layer.dropout;
                    let s: Vec<f64> =
                        (0..a.as_slice().len()).map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
                    a.as_mut_slice().iter_mut().zip(&s).for_each(|(v, s)| *v *= s);
                    Some(s)
                }
                _ => None,
            };
            cache.inputs.push(h);
            cache.pre.push(z);
            cache.post.push(a.clone());
            cache.dropout_scale.push(scale);
            h = a;
        }
        Ok(cache)
    }

    /// Backpropagates `grad_output` (∂loss/∂output) through a cached pass.
    /// Returns parameter gradients and ∂loss/∂input.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Mat) -> Result<(Gradients, Mat)> {
        if cache.version != self.version || cache.pre.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        let out = cache.output();
        if grad_output.rows() != out.rows() || grad_output.cols() != out.cols() {
            return Err(Error::DimensionMismatch {
                what: "output gradient",
                expected: out.rows() * out.cols(),
                found: grad_output.rows() * grad_output.cols(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre[i];
            let post = &cache.post[i];
            let d = delta.as_mut_slice();
            match &cache.dropout_scale[i] {
                Some(s) => {
                    for (k, v) in d.iter_mut().enumerate() {
                        let zk = z.as_slice()[k];
                        *v *= s[k] * layer.activation.derivative(zk, layer.activation.apply(zk));
                    }
                }
                None => {
                    for (k, v) in d.iter_mut().enumerate() {
                        *v *= layer.activation.derivative(z.as_slice()[k], post.as_slice()[k]);
                    }
                }
            }
            let x = &cache.inputs[i];
            let mut gw = Mat::zeros(layer.weights.rows(), layer.weights.cols());
            gemm(1.0, x, true, &delta, false, 0.0, &mut gw)?;
            let mut gb = vec![0.0; layer.bias.len()];
            for r in 0..delta.rows() {
                gb.iter_mut().zip(delta.row(r)).for_each(|(g, v)| *g += v);
            }
            let mut dx = Mat::zeros(x.rows(), x.cols());
            gemm(1.0, &delta, false, &layer.weights, true, 0.0, &mut dx)?;
            grads.push((gw, gb));
            delta = dx;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| (Mat::zeros(l.weights.rows(), l.weights.cols()), vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    pub(crate) fn check_gradients(&self, g: &Gradients) -> Result<()> {
        if g.layers.len() != self.layers.len() {
            return Err(Error::DimensionMismatch { what: "gradient blocks", expected: self.layers.len(), found: g.layers.len() });
        }
        for (i, ((gw, gb), l)) in g.layers.iter().zip(&self.layers).enumerate() {
            if gw.rows() != l.weights.rows() || gw.cols() != l.weights.cols() || gb.len() != l.bias.len() {
                return Err(Error::DimensionMismatch { what: "gradient block", expected: l.bias.len(), found: gb.len() });
            }
            if !gw.is_finite() {
                return Err(Error::NonFiniteGradient(format!("layer{i}.weight")));
            }
            if gb.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("layer{i}.bias")));
            }
        }
        Ok(())
    }
}
