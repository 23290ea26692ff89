//! Fully connected layer with explicit forward/backward passes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{dot, matvec_transpose_add, outer_add, Activation};
use crate::{CoreError, Result, Tensor};

#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// Row-major [out × in].
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
    out_size: usize,
    in_size: usize,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 {
            return Err(CoreError::Dimension("dense weight must be 2-D".into()));
        }
        let (out_size, in_size) = (weight.shape()[0], weight.shape()[1]);
        if bias.len() != out_size {
            return Err(CoreError::Dimension(format!(
                "bias length {} does not match output size {}",
                bias.len(),
                out_size
            )));
        }
        Ok(Self { weight, bias, activation, out_size, in_size })
    }

    /// Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], zero bias.
    pub fn init(out_size: usize, in_size: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_size as f64).sqrt();
        let values: Vec<f64> = (0..out_size * in_size).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self {
            weight: Tensor::from_parts_unchecked(vec![out_size, in_size], values),
            bias: Tensor::zeros(vec![out_size]),
            activation,
            out_size,
            in_size,
        }
    }

    /// Square layer with W = I and zero bias.
    pub fn identity(size: usize, activation: Activation) -> Self {
        let mut values = vec![0.0; size * size];
        for i in 0..size {
            values[i * size + i] = 1.0;
        }
        Self {
            weight: Tensor::from_parts_unchecked(vec![size, size], values),
            bias: Tensor::zeros(vec![size]),
            activation,
            out_size: size,
            in_size: size,
        }
    }

    pub fn input_size(&self) -> usize {
        self.in_size
    }

    pub fn output_size(&self) -> usize {
        self.out_size
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn zero_grads(&self) -> DenseGrads {
        DenseGrads {
            d_weight: Tensor::zeros(vec![self.out_size, self.in_size]),
            d_bias: Tensor::zeros(vec![self.out_size]),
        }
    }
}

/// What the backward pass needs from a forward pass: the input and output.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Tensor,
    pub output: Tensor,
}

impl DenseCache {
    pub fn retained_bytes(&self) -> u64 {
        self.input.retained_bytes() + self.output.retained_bytes()
    }
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub d_weight: Tensor,
    pub d_bias: Tensor,
}

/// y = activation(W x + b).
pub fn dense_forward(layer: &DenseLayer, x: &Tensor) -> Result<(Tensor, DenseCache)> {
    if x.len() != layer.in_size {
        return Err(CoreError::Dimension(format!(
            "dense input length {} != layer input size {}",
            x.len(),
            layer.in_size
        )));
    }
    let w = layer.weight.values();
    let b = layer.bias.values();
    let mut y = vec![0.0; layer.out_size];
    for r in 0..layer.out_size {
        let z = dot(&w[r * layer.in_size..(r + 1) * layer.in_size], x.values()) + b[r];
        y[r] = layer.activation.apply(z);
    }
    let y = Tensor::from_parts_unchecked(vec![layer.out_size], y);
    let cache = DenseCache { input: x.clone(), output: y.clone() };
    Ok((y, cache))
}

/// Chain rule for the stored forward pass. Gradients are accumulated into
/// `grads` so one buffer can serve a whole minibatch.
pub fn dense_backward(
    layer: &DenseLayer,
    cache: &DenseCache,
    dy: &Tensor,
    grads: &mut DenseGrads,
) -> Result<Tensor> {
    if dy.len() != layer.out_size {
        return Err(CoreError::Dimension(format!(
            "dense cotangent length {} != output size {}",
            dy.len(),
            layer.out_size
        )));
    }
    if cache.input.len() != layer.in_size {
        return Err(CoreError::Dimension("cache does not match layer".into()));
    }
    let mut dz = vec![0.0; layer.out_size];
    for r in 0..layer.out_size {
        dz[r] = dy[r] * layer.activation.derivative_from_output(cache.output[r]);
    }
    outer_add(grads.d_weight.values_mut(), &dz, cache.input.values());
    for r in 0..layer.out_size {
        grads.d_bias[r] += dz[r];
    }
    let mut dx = vec![0.0; layer.in_size];
    matvec_transpose_add(layer.weight.values(), layer.out_size, layer.in_size, &dz, &mut dx);
    Ok(Tensor::from_parts_unchecked(vec![layer.in_size], dx))
}
