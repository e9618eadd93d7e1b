//! Central-difference gradient checker.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dropout::Mode;
use super::model::Model;
use super::tensor::Tensor;
use super::NeuralError;

/// Above this many parameter scalars a seeded random subsample is checked.
pub const GRAD_CHECK_SUBSAMPLE: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Largest `|a−n|`. Central differences carry roundoff of order
    /// `ulp(loss)/ε`, which dominates the relative error of tiny gradients.
    pub max_abs_error: f64,
    pub checked: usize,
    /// `(parameter name, flat index)` of the worst entry.
    pub worst: Option<(String, usize)>,
}

/// Compares analytic gradients of `loss(model(inputs))` against central
/// differences. `loss` maps head outputs to `(loss, d loss / d output)`.
///
/// Relative error is `|a−n| / max(|a|, |n|, 1e-8)`. The model is evaluated in
/// eval mode, so dropout does not disturb the comparison.
pub fn grad_check<F>(
    model: &Model,
    loss: F,
    inputs: &[Tensor],
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport, NeuralError>
where
    F: Fn(&Tensor) -> Result<(f64, Tensor), NeuralError>,
{
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(NeuralError::InvalidEpsilon(epsilon));
    }
    let mut work = model.clone();
    work.zero_grad();
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let (out, cache) = work.forward(inputs, Mode::Eval, &mut unused)?;
    let (_, d_out) = loss(&out)?;
    work.backward(&cache, &d_out)?;

    let sizes: Vec<usize> = work.params().iter().map(|p| p.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut flat: Vec<usize> = if total > GRAD_CHECK_SUBSAMPLE {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample(&mut rng, total, GRAD_CHECK_SUBSAMPLE).into_vec()
    } else {
        (0..total).collect()
    };
    flat.sort_unstable();

    let analytic: Vec<f64> = work
        .params()
        .iter()
        .flat_map(|p| p.grad.data().iter().copied())
        .collect();

    let mut probe = model.clone();
    let eval = |m: &Model| -> Result<f64, NeuralError> { Ok(loss(&m.predict(inputs)?)?.0) };
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
        worst: None,
    };
    for idx in flat {
        let (p_idx, offset) = locate(&sizes, idx);
        let original = probe.params()[p_idx].value.data()[offset];
        set(&mut probe, p_idx, offset, original + epsilon);
        let plus = eval(&probe)?;
        set(&mut probe, p_idx, offset, original - epsilon);
        let minus = eval(&probe)?;
        set(&mut probe, p_idx, offset, original);

        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if !rel.is_finite() {
            return Err(NeuralError::NonFinite("gradient check".into()));
        }
        report.checked += 1;
        report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
        if report.worst.is_none() || rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst = Some((probe.params()[p_idx].name.clone(), offset));
        }
    }
    Ok(report)
}

fn locate(sizes: &[usize], mut idx: usize) -> (usize, usize) {
    for (k, &n) in sizes.iter().enumerate() {
        if idx < n {
            return (k, idx);
        }
        idx -= n;
    }
    unreachable!("index beyond parameter count")
}

fn set(model: &mut Model, p_idx: usize, offset: usize, v: f64) {
    model.params_mut()[p_idx].value.data_mut()[offset] = v;
}
