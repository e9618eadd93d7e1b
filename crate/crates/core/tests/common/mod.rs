#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sinesteer::codec::{encode, CodecConfig};
use sinesteer::harness::ExperimentConfig;
use sinesteer::neural::{HeadKind, HeadSpec, Model, ModelKind, ModelSpec, Tensor};

/// Precomputed encodings on a fine angle grid, searched exhaustively.
pub struct GridOracle {
    angles: Vec<f64>,
    waves: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl GridOracle {
    pub fn new(codec: &CodecConfig, step: f64) -> Self {
        let phi_max = codec.phi_max();
        let count = (2.0 * phi_max / step).round() as usize;
        let angles: Vec<f64> = (0..=count)
            .map(|k| (-phi_max + k as f64 * step).min(phi_max))
            .collect();
        let waves: Vec<Vec<f64>> = angles
            .iter()
            .map(|&a| encode(a, codec).unwrap().into_inner())
            .collect();
        let norms = waves
            .iter()
            .map(|w| w.iter().map(|v| v * v).sum())
            .collect();
        Self {
            angles,
            waves,
            norms,
        }
    }

    /// Grid angle whose encoding, at its best nonnegative gain, leaves the
    /// smallest squared residual against `wave`.
    pub fn best(&self, wave: &[f64]) -> f64 {
        let energy: f64 = wave.iter().map(|v| v * v).sum();
        let mut best = (f64::INFINITY, 0.0);
        for ((angle, e), norm) in self.angles.iter().zip(&self.waves).zip(&self.norms) {
            let dot: f64 = wave.iter().zip(e).map(|(a, b)| a * b).sum();
            let gain = (dot / norm).max(0.0);
            let residual = energy - 2.0 * gain * dot + gain * gain * norm;
            if residual < best.0 {
                best = (residual, *angle);
            }
        }
        best.1
    }
}

pub fn noisy_wave(angle: f64, codec: &CodecConfig, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    encode(angle, codec)
        .unwrap()
        .iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// A few seconds of training on a handful of short sessions.
pub fn tiny_config(kind: ModelKind, head: HeadKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default().with_model(kind, head);
    cfg.scenario.length = 60;
    cfg.scenario.feature_dim = 6;
    cfg.scenario.distractor_dim = 2;
    cfg.model.feature_dim = 6;
    cfg.model.hidden = vec![6];
    cfg.model.head.codec = CodecConfig::new(11, 190.0).unwrap();
    cfg.sessions = 4;
    cfg.eval_sessions = 1;
    cfg.w = 5;
    cfg.epochs = 2;
    cfg
}

/// Noise-free, distractor-free scenario on which a frame-wise fit is exact.
pub fn noiseless_config() -> ExperimentConfig {
    let mut cfg =
        ExperimentConfig::default().with_model(ModelKind::Feedforward, HeadKind::Regression);
    cfg.scenario.observation_noise_sigma = 0.0;
    cfg.scenario.distractor_dim = 0;
    cfg.scenario.feature_dim = 4;
    cfg.model.feature_dim = 4;
    cfg.model.hidden = vec![64];
    cfg.model.dropout = 0.0;
    cfg.sessions = 8;
    cfg.eval_sessions = 1;
    cfg.epochs = 200;
    cfg
}

/// Seeded c_lstm with one hidden layer of 16, a batch of windows of length
/// `w` and their target angles.
pub fn clstm_fixture(head: HeadKind, w: usize, seed: u64) -> (Model, Vec<Tensor>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codec = CodecConfig::new(15, 190.0).unwrap();
    let spec = ModelSpec {
        kind: ModelKind::CLstm,
        feature_dim: 5,
        hidden: vec![16],
        head: HeadSpec::new(head, codec),
        dropout: 0.0,
    };
    let model = Model::new(spec, &mut rng).unwrap();
    let batch = 3;
    let steps = (0..w)
        .map(|_| {
            Tensor::from_vec(
                &[batch, 5],
                (0..batch * 5)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    let targets = (0..batch)
        .map(|_| rng.random_range(-150.0..150.0))
        .collect();
    (model, steps, targets)
}
