use rand::Rng;

use super::tensor::{matmul_acc, matmul_nt, matmul_tn_acc, ParamGroup, Parameter, Tensor};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
}

/// Fully connected layer `y = act(x·W + b)` with `W` stored as `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    output: Tensor,
}

impl Dense {
    /// Uniform init in ±1/√fan_in, zero bias.
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        input_dim: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (input_dim as f64).sqrt();
        let w: Vec<f64> = (0..input_dim * output_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let weight = Tensor::from_vec(&[input_dim, output_dim], w).expect("positive dims");
        Self::from_parts(name, weight, Tensor::zeros(&[output_dim]), activation)
    }

    pub fn from_parts(name: &str, weight: Tensor, bias: Tensor, activation: Activation) -> Self {
        Self {
            weight: Parameter::new(format!("{name}.weight"), ParamGroup::Fresh, weight),
            bias: Parameter::new(format!("{name}.bias"), ParamGroup::Fresh, bias),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, DenseCache), NeuralError> {
        let (n_in, n_out) = (self.input_dim(), self.output_dim());
        input.expect_matrix("dense input", None, n_in)?;
        let batch = input.rows();
        let mut out = Tensor::zeros(&[batch, n_out]);
        for r in 0..batch {
            out.row_mut(r).copy_from_slice(self.bias.value.data());
        }
        matmul_acc(
            out.data_mut(),
            input.data(),
            self.weight.value.data(),
            batch,
            n_in,
            n_out,
        );
        if self.activation == Activation::Tanh {
            out.data_mut().iter_mut().for_each(|v| *v = v.tanh());
        }
        let cache = DenseCache {
            input: input.clone(),
            output: out.clone(),
        };
        Ok((out, cache))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(
        &mut self,
        cache: &DenseCache,
        upstream: &Tensor,
    ) -> Result<Tensor, NeuralError> {
        let (n_in, n_out) = (self.input_dim(), self.output_dim());
        let batch = cache.input.rows();
        upstream.expect_matrix("dense upstream grad", Some(batch), n_out)?;

        let mut dz = upstream.clone();
        if self.activation == Activation::Tanh {
            for (d, y) in dz.data_mut().iter_mut().zip(cache.output.data()) {
                *d *= 1.0 - y * y;
            }
        }
        matmul_tn_acc(
            self.weight.grad.data_mut(),
            cache.input.data(),
            dz.data(),
            batch,
            n_in,
            n_out,
        );
        let db = self.bias.grad.data_mut();
        for r in 0..batch {
            for (g, d) in db.iter_mut().zip(dz.row(r)) {
                *g += d;
            }
        }
        let mut dx = Tensor::zeros(&[batch, n_in]);
        matmul_nt(
            dx.data_mut(),
            dz.data(),
            self.weight.value.data(),
            batch,
            n_out,
            n_in,
        );
        Ok(dx)
    }

    pub fn params(&self) -> [&Parameter; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Parameter; 2] {
        [&mut self.weight, &mut self.bias]
    }
}
