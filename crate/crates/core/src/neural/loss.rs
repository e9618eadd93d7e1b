//! Loss heads. Each returns the per-sample loss and its gradient with respect
//! to the head output; batch reduction is [`batch_loss`]'s job.

use crate::codec::{encode, encode_bins, CodecConfig};

use super::model::{HeadKind, HeadSpec};
use super::tensor::Tensor;
use super::NeuralError;

/// Below this the waveform RMSE is treated as an exact fit.
pub const DEGENERATE_LOSS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Set when the loss sits at the non-differentiable point of a square
    /// root; the gradient is zero by convention.
    pub degenerate: bool,
}

/// RMSE between the head output and the encoded target wave.
pub fn loss_sine(
    output: &[f64],
    target: f64,
    codec: &CodecConfig,
) -> Result<LossEval, NeuralError> {
    let wave = encode(target, codec)?;
    check_width(output.len(), wave.len())?;
    let n = wave.len() as f64;
    let resid: Vec<f64> = output.iter().zip(wave.iter()).map(|(y, e)| y - e).collect();
    let loss = (resid.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    if loss < DEGENERATE_LOSS {
        return Ok(LossEval {
            loss,
            grad: vec![0.0; resid.len()],
            degenerate: true,
        });
    }
    let grad = resid.iter().map(|r| r / (n * loss)).collect();
    Ok(LossEval {
        loss,
        grad,
        degenerate: false,
    })
}

/// Squared error on `φ/φ_max`, the tanh-compatible normalised angle.
pub fn loss_regression(
    output: &[f64],
    target: f64,
    codec: &CodecConfig,
) -> Result<LossEval, NeuralError> {
    check_width(output.len(), 1)?;
    let t = codec.angle(target)?.degrees() / codec.phi_max();
    let r = output[0] - t;
    Ok(LossEval {
        loss: r * r,
        grad: vec![2.0 * r],
        degenerate: false,
    })
}

/// Cross-entropy between `softmax(logits)` and the (optionally smoothed) bin target.
pub fn loss_nll(
    logits: &[f64],
    target: f64,
    codec: &CodecConfig,
    smoothing: Option<f64>,
) -> Result<LossEval, NeuralError> {
    let q = encode_bins(target, codec, smoothing)?;
    check_width(logits.len(), q.len())?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (l, qi) in logits.iter().zip(q.iter()) {
        let log_p = l - log_z;
        if *qi > 0.0 {
            loss -= qi * log_p;
        }
        grad.push(log_p.exp() - qi);
    }
    Ok(LossEval {
        loss,
        grad,
        degenerate: false,
    })
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Per-sample loss for any head kind.
pub fn head_loss(head: &HeadSpec, output: &[f64], target: f64) -> Result<LossEval, NeuralError> {
    match head.kind {
        HeadKind::Regression => loss_regression(output, target, &head.codec),
        HeadKind::NllBins => loss_nll(output, target, &head.codec, head.smoothing_variance),
        HeadKind::SineWave => loss_sine(output, target, &head.codec),
    }
}

/// Mean loss over a batch and its gradient w.r.t. `outputs [B, width]`.
pub fn batch_loss(
    head: &HeadSpec,
    outputs: &Tensor,
    targets: &[f64],
) -> Result<(f64, Tensor), NeuralError> {
    outputs.expect_matrix("head output", Some(targets.len()), head.width())?;
    let batch = targets.len() as f64;
    let mut grad = Tensor::zeros(outputs.shape());
    let mut total = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let eval = head_loss(head, outputs.row(r), t)?;
        total += eval.loss;
        for (g, d) in grad.row_mut(r).iter_mut().zip(&eval.grad) {
            *g = d / batch;
        }
    }
    Ok((total / batch, grad))
}

fn check_width(got: usize, expected: usize) -> Result<(), NeuralError> {
    if got == expected {
        Ok(())
    } else {
        Err(NeuralError::ShapeMismatch {
            context: "loss input",
            expected: vec![expected],
            got: vec![got],
        })
    }
}
