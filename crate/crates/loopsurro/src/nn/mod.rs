//! Dense feedforward network with manual backpropagation.
//!
//! The backward pass takes the gradient of the loss with respect to the
//! network *output* as an input. This keeps the network independent of any
//! particular loss: residual-based losses inject their own output gradient,
//! computed from the loop's Jacobian, and supervised losses inject the usual
//! prediction-minus-target term. Any batch averaging factor is the caller's
//! responsibility; `backward` itself performs a plain sum over columns.

mod adam;
mod format;
mod schedule;

pub use adam::{adam_step, AdamState};
pub use format::{load_network, read_network, save_network, write_network};
pub use schedule::LrSchedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{matmul_into, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Identity,
}

impl Activation {
    pub fn tag(&self) -> &'static str {
        match self {
            Activation::ReLU => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "relu" => Ok(Activation::ReLU),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Parse(format!("unknown activation tag `{other}`"))),
        }
    }

    #[inline]
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::ReLU => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation, recovered from the
    /// activation output (possible for ReLU and Identity).
    #[inline]
    fn derivative_from_output(&self, a: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out_dim x in_dim` weight matrix.
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// A dense feedforward network. Immutable once built; training replaces
/// parameters through `adam_step`, which needs exclusive ownership.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
    seed: u64,
}

impl MlpNetwork {
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to the layers; dimensions must be preserved.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub(crate) fn from_layers(layers: Vec<Layer>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer dims do not chain: {} -> {}",
                    w[0].out_dim(),
                    w[1].in_dim()
                )));
            }
        }
        let input_dim = layers[0].in_dim();
        let output_dim = layers.last().unwrap().out_dim();
        Ok(MlpNetwork { layers, input_dim, output_dim, seed })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
            .sum()
    }
}

/// Builds a network with the given layer sizes. Hidden layers use
/// `hidden_activation`; the final layer is always `Identity` so outputs are
/// unconstrained reals. Weights are drawn from the scaled uniform range
/// `±sqrt(6 / (fan_in + fan_out))`, biases start at zero, and the draw is
/// deterministic for a fixed seed.
pub fn init_network(
    layer_sizes: &[usize],
    hidden_activation: Activation,
    seed: u64,
) -> Result<MlpNetwork> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 layer sizes, got {}",
            layer_sizes.len()
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::Config("layer sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
    for (idx, pair) in layer_sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut weight = Matrix::zeros(fan_out, fan_in);
        for v in weight.data_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let activation = if idx + 1 == layer_sizes.len() - 1 {
            Activation::Identity
        } else {
            hidden_activation
        };
        layers.push(Layer { weight, bias: vec![0.0; fan_out], activation });
    }
    MlpNetwork::from_layers(layers, seed)
}

/// Per-layer activations recorded by `forward_cached`, needed by the
/// backward pass. ReLU derivative masks are recovered from the activation
/// outputs, so pre-activations need not be stored.
pub struct ForwardCache {
    /// Post-activations per layer (the last one is the network output).
    post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("cache holds at least one layer")
    }
}

/// Runs the network on a batch of inputs (one column per sample).
pub fn forward(net: &MlpNetwork, x: &Matrix) -> Result<Matrix> {
    let mut cache = forward_cached(net, x)?;
    Ok(cache.post.pop().expect("cache holds at least one layer"))
}

/// Runs the network and keeps per-layer activations for `backward`.
pub fn forward_cached(net: &MlpNetwork, x: &Matrix) -> Result<ForwardCache> {
    if x.rows() != net.input_dim {
        return Err(Error::Shape(format!(
            "input has {} rows, network expects {}",
            x.rows(),
            net.input_dim
        )));
    }
    let n = x.cols();
    let mut post = Vec::with_capacity(net.layers.len());
    let mut current = x;
    for layer in &net.layers {
        let mut z = Matrix::zeros(layer.out_dim(), n);
        matmul_into(&layer.weight, current, &mut z);
        for j in 0..n {
            let col = z.column_mut(j);
            for (v, &b) in col.iter_mut().zip(layer.bias.iter()) {
                *v += b;
            }
        }
        if layer.activation != Activation::Identity {
            for v in z.data_mut() {
                *v = layer.activation.apply(*v);
            }
        }
        post.push(z);
        current = post.last().unwrap();
    }
    Ok(ForwardCache { post })
}

/// Per-parameter gradients, shaped like the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Gradients {
            weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Backpropagates an externally supplied output gradient through the network.
///
/// `out_grad` is dL/d(output), one column per sample; the result is the plain
/// column sum of per-sample parameter gradients. If the loss carries a `1/n`
/// batch factor, it must already be baked into `out_grad`.
pub fn backward_with_output_gradient(
    net: &MlpNetwork,
    x: &Matrix,
    cache: &ForwardCache,
    out_grad: &Matrix,
) -> Result<Gradients> {
    let n = x.cols();
    if out_grad.rows() != net.output_dim || out_grad.cols() != n {
        return Err(Error::Shape(format!(
            "output gradient is {}x{}, expected {}x{}",
            out_grad.rows(),
            out_grad.cols(),
            net.output_dim,
            n
        )));
    }
    if x.rows() != net.input_dim {
        return Err(Error::Shape(format!(
            "input has {} rows, network expects {}",
            x.rows(),
            net.input_dim
        )));
    }

    let mut grads = Gradients::zeros_like(net);
    // dL/dz for the layer currently being processed.
    let mut delta = out_grad.clone();
    for (idx, layer) in net.layers.iter().enumerate().rev() {
        // Fold the activation derivative into delta.
        let a = &cache.post[idx];
        if layer.activation != Activation::Identity {
            for (d, &av) in delta.data_mut().iter_mut().zip(a.data().iter()) {
                *d *= layer.activation.derivative_from_output(av);
            }
        }
        // Bias gradient: row sums of delta.
        let db = &mut grads.biases[idx];
        for j in 0..n {
            let col = delta.column(j);
            for (b, &d) in db.iter_mut().zip(col.iter()) {
                *b += d;
            }
        }
        // Weight gradient: delta * inputᵀ.
        let layer_input: &Matrix;
        let stored;
        if idx == 0 {
            layer_input = x;
        } else {
            stored = &cache.post[idx - 1];
            layer_input = stored;
        }
        grads.weights[idx] = delta.matmul_transpose(layer_input)?;
        // Gradient with respect to this layer's input.
        if idx > 0 {
            delta = layer.weight.transpose_matmul(&delta)?;
        }
    }
    Ok(grads)
}
