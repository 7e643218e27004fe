use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::seed::Rng;

/// Fully connected network: tanh on hidden layers, identity on the output.
///
/// Parameters are stored flat as `[W0, b0, W1, b1, ...]` where `Wi` is
/// `in × out` and `bi` is `1 × out`, so a batch of inputs is one row each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<Array2<f64>>,
}

/// Tape nodes produced by [`Mlp::apply`].
pub struct MlpTrace {
    pub output: Var,
    /// Post-activation values of every hidden layer.
    pub hidden: Vec<Var>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases. The last layer's weights are
    /// additionally multiplied by `output_gain`.
    pub fn new(sizes: &[usize], output_gain: f64, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        let n_layers = sizes.len() - 1;
        let mut params = Vec::with_capacity(2 * n_layers);
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            if l + 1 == n_layers {
                bound *= output_gain;
            }
            let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || {
                rng.gen_range(-1.0..=1.0) * bound
            });
            params.push(weights);
            params.push(Array2::zeros((1, fan_out)));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    /// Network with every parameter set to zero.
    pub fn zeros(sizes: &[usize]) -> Self {
        let params = sizes
            .windows(2)
            .flat_map(|w| [Array2::zeros((w[0], w[1])), Array2::zeros((1, w[1]))])
            .collect();
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let row = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.forward_batch(row)?.into_raw_vec_and_offset().0)
    }

    /// Evaluates every row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::contract(format!(
                "input has {} features, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let n_layers = self.params.len() / 2;
        let mut h = x.dot(&self.params[0]) + &self.params[1];
        for l in 1..n_layers {
            h.mapv_inplace(f64::tanh);
            h = h.dot(&self.params[2 * l]) + &self.params[2 * l + 1];
        }
        Ok(h)
    }

    /// Places the parameters on `tape` as leaves, in storage order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.clone())).collect()
    }

    /// Records the forward pass of `x` using previously bound parameters.
    pub fn apply(tape: &mut Tape, params: &[Var], x: Var) -> MlpTrace {
        let n_layers = params.len() / 2;
        let mut hidden = Vec::with_capacity(n_layers - 1);
        let mut h = x;
        for l in 0..n_layers {
            let z = tape.matmul(h, params[2 * l]);
            let z = tape.add(z, params[2 * l + 1]);
            if l + 1 < n_layers {
                h = tape.tanh(z);
                hidden.push(h);
            } else {
                h = z;
            }
        }
        MlpTrace { output: h, hidden }
    }

    /// Records `∂output/∂x` for a scalar-output network, one row per input
    /// row. The result is itself differentiable with respect to the
    /// parameters, which is what a gradient penalty needs.
    pub fn input_gradient(tape: &mut Tape, params: &[Var], trace: &MlpTrace) -> Var {
        let n_layers = params.len() / 2;
        let rows = tape.value(trace.output).nrows();
        debug_assert_eq!(tape.value(trace.output).ncols(), 1);
        // Adjoint of the output layer's pre-activation.
        let mut g = tape.leaf(Array2::ones((rows, 1)));
        for l in (0..n_layers).rev() {
            g = tape.matmul_t(g, params[2 * l]);
            if l > 0 {
                let h = trace.hidden[l - 1];
                let h2 = tape.square(h);
                let neg = tape.neg(h2);
                let deriv = tape.add_const(neg, 1.0);
                g = tape.mul(g, deriv);
            }
        }
        g
    }
}
