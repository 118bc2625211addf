use rand::Rng;

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Anything whose trainable state is a flat list of matrices.
pub trait Parameterized<T: Scalar> {
    fn parameters(&self) -> Vec<&Matrix<T>>;
    fn parameters_mut(&mut self) -> Vec<&mut Matrix<T>>;

    /// Records every parameter as a differentiable leaf, in `parameters()` order.
    fn bind(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.parameters()
            .into_iter()
            .map(|p| tape.param(p.clone()))
            .collect()
    }

    fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }
}

/// Hidden-layer widths for `hidden_layers` layers of `neurons` units each.
pub fn layer_spec(input: usize, hidden_layers: usize, neurons: usize, output: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden_layers + 2);
    sizes.push(input);
    sizes.extend(std::iter::repeat_n(neurons, hidden_layers));
    sizes.push(output);
    sizes
}

/// Fully connected network: tanh on hidden layers, identity on the output.
///
/// Weight `k` has shape `layer_sizes[k] × layer_sizes[k + 1]` so a batch
/// `X` (one sample per row) maps to `X·W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpNet<T> {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix<T>>,
    biases: Vec<Matrix<T>>,
}

impl<T: Scalar> MlpNet<T> {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let weights = layer_sizes
            .windows(2)
            .map(|w| Matrix::zeros(w[0], w[1]))
            .collect();
        let biases = layer_sizes[1..]
            .iter()
            .map(|&n| Matrix::zeros(1, n))
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        for w in &mut net.weights {
            let limit = (6.0 / (w.rows() + w.cols()) as f64).sqrt();
            for v in w.as_mut_slice() {
                *v = T::of(rng.random_range(-limit..limit));
            }
        }
        Ok(net)
    }

    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Matrix<T>>,
        biases: Vec<Matrix<T>>,
    ) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        if weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(Error::shape(
                "MlpNet::from_parts",
                format!("{} weight matrices", layer_sizes.len() - 1),
                weights.len(),
            ));
        }
        for (k, w) in layer_sizes.windows(2).enumerate() {
            if weights[k].shape() != (w[0], w[1]) || biases[k].shape() != (1, w[1]) {
                return Err(Error::shape(
                    "MlpNet::from_parts",
                    format!("layer {k} of {}x{}", w[0], w[1]),
                    format!("{:?}", weights[k].shape()),
                ));
            }
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Matrix<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Matrix<T>] {
        &self.biases
    }

    /// Zeroes the final affine layer so the network outputs exactly zero.
    pub fn zero_output_layer(&mut self) {
        if let Some(w) = self.weights.last_mut() {
            w.as_mut_slice().iter_mut().for_each(|v| *v = T::zero());
        }
        if let Some(b) = self.biases.last_mut() {
            b.as_mut_slice().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("MlpNet::forward", self.input_dim(), x.len()));
        }
        let mut act = x.to_vec();
        let last = self.weights.len() - 1;
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = b.as_slice().to_vec();
            for (i, &a) in act.iter().enumerate() {
                for (o, &wv) in next.iter_mut().zip(w.row(i)) {
                    *o += a * wv;
                }
            }
            if k < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            act = next;
        }
        Ok(act)
    }

    pub fn forward_batch(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "MlpNet::forward_batch",
                self.input_dim(),
                x.cols(),
            ));
        }
        let mut act = x.clone();
        let last = self.weights.len() - 1;
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = act.matmul(w);
            let bs = b.as_slice();
            for i in 0..next.rows() {
                for (o, &bv) in next.row_mut(i).iter_mut().zip(bs) {
                    *o += bv;
                    if k < last {
                        *o = o.tanh();
                    }
                }
            }
            act = next;
        }
        Ok(act)
    }

    /// Records the forward pass of a batch on `tape` using bound parameters
    /// (as returned by [`Parameterized::bind`]).
    pub fn tape_forward(&self, tape: &mut Tape<T>, params: &[Var], x: Var) -> Var {
        assert_eq!(
            params.len(),
            2 * self.weights.len(),
            "parameter binding mismatch"
        );
        assert_eq!(
            tape.value(x).cols(),
            self.input_dim(),
            "tape_forward input width"
        );
        let last = self.weights.len() - 1;
        let mut act = x;
        for k in 0..self.weights.len() {
            let z = tape.matmul(act, params[2 * k]);
            let z = tape.add_row(z, params[2 * k + 1]);
            act = if k < last { tape.tanh(z) } else { z };
        }
        act
    }
}

impl<T: Scalar> Parameterized<T> for MlpNet<T> {
    fn parameters(&self) -> Vec<&Matrix<T>> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix<T>> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least input and output sizes, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config(format!(
            "layer sizes must be positive: {layer_sizes:?}"
        )));
    }
    Ok(())
}

/// Reverse-mode gradient of a scalar loss built on top of the network output.
///
/// `loss_fn` receives the tape and the output node for `inputs` and must
/// return a `1 × 1` node; any batch averaging is part of the loss.
/// Gradients come back in [`Parameterized::parameters`] order.
pub fn gradient<T, F>(net: &MlpNet<T>, inputs: &Matrix<T>, loss_fn: F) -> Result<Vec<Matrix<T>>>
where
    T: Scalar,
    F: FnOnce(&mut Tape<T>, Var) -> Var,
{
    if inputs.cols() != net.input_dim() {
        return Err(Error::shape("gradient", net.input_dim(), inputs.cols()));
    }
    let mut tape = Tape::new();
    let vars = net.bind(&mut tape);
    let x = tape.constant(inputs.clone());
    let out = net.tape_forward(&mut tape, &vars, x);
    let loss = loss_fn(&mut tape, out);
    let grads = tape.backward(loss)?;
    Ok(vars
        .iter()
        .zip(net.parameters())
        .map(|(&v, p)| grads.wrt(v, p.shape()))
        .collect())
}
