use rand::Rng;

use super::tensor::Tensor;
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout: survivors are scaled by `1/(1-rate)` during training so
/// evaluation is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self, NeuralError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NeuralError::InvalidSpec(format!(
                "dropout rate {rate} not in [0, 1)"
            )));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Returns the output and, in training mode with a nonzero rate, the mask
    /// that was applied. No random numbers are drawn otherwise.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> (Tensor, Option<Tensor>) {
        if mode == Mode::Eval || self.rate == 0.0 {
            return (input.clone(), None);
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mut mask = Tensor::zeros(input.shape());
        for m in mask.data_mut() {
            if rng.random::<f64>() < keep {
                *m = scale;
            }
        }
        let mut out = input.clone();
        for (o, m) in out.data_mut().iter_mut().zip(mask.data()) {
            *o *= m;
        }
        (out, Some(mask))
    }

    pub fn backward(mask: Option<&Tensor>, upstream: &Tensor) -> Tensor {
        let mut grad = upstream.clone();
        if let Some(mask) = mask {
            for (g, m) in grad.data_mut().iter_mut().zip(mask.data()) {
                *g *= m;
            }
        }
        grad
    }
}
