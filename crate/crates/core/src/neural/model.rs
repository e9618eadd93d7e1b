//! Frame-by-frame (feedforward) and C-LSTM models ending in a shared-shape
//! classification layer.
//!
//! Both model kinds see a window of `w` feature frames. The C-LSTM runs the
//! whole window through stacked LSTM layers and classifies from the last
//! hidden state; the feedforward baseline only looks at the newest frame.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{decode, decode_expected, CodecConfig, CodecError, DEFAULT_SMOOTHING_VARIANCE};
use crate::dataset::FrameRecord;
use crate::kv::{self, KvError, KvMap};

use super::dense::{Activation, Dense, DenseCache};
use super::dropout::{Dropout, Mode};
use super::loss::softmax;
use super::lstm::{LstmCache, LstmLayer, LstmLayerSpec};
use super::tensor::{Parameter, Tensor};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeadKind {
    Regression,
    NllBins,
    SineWave,
}

impl HeadKind {
    pub const ALL: [HeadKind; 3] = [HeadKind::Regression, HeadKind::NllBins, HeadKind::SineWave];

    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Regression => "regression",
            HeadKind::NllBins => "nll_bins",
            HeadKind::SineWave => "sine_wave",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        HeadKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown head kind {s:?} (regression|nll_bins|sine_wave)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Feedforward,
    CLstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Feedforward, ModelKind::CLstm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Feedforward => "feedforward",
            ModelKind::CLstm => "c_lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown model kind {s:?} (feedforward|c_lstm)"))
    }
}

/// Output layer and the loss/decoder that go with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadSpec {
    pub kind: HeadKind,
    pub codec: CodecConfig,
    /// Label-smoothing variance (deg²) for the bin head; ignored otherwise.
    pub smoothing_variance: Option<f64>,
}

impl HeadSpec {
    pub fn new(kind: HeadKind, codec: CodecConfig) -> Self {
        Self {
            kind,
            codec,
            smoothing_variance: Some(DEFAULT_SMOOTHING_VARIANCE),
        }
    }

    pub fn width(&self) -> usize {
        match self.kind {
            HeadKind::Regression => 1,
            HeadKind::NllBins | HeadKind::SineWave => self.codec.n_neurons(),
        }
    }

    /// Regression and sine heads are tanh layers; the bin head emits raw
    /// logits for its softmax.
    pub fn activation(&self) -> Activation {
        match self.kind {
            HeadKind::Regression | HeadKind::SineWave => Activation::Tanh,
            HeadKind::NllBins => Activation::Identity,
        }
    }

    /// Angle in degrees decoded from one head output row. Not clamped: a sine
    /// head can report [`CodecError::PhaseOutOfRange`] carrying the raw angle.
    pub fn decode(&self, output: &[f64]) -> Result<f64, CodecError> {
        match self.kind {
            HeadKind::Regression => {
                if output.len() != 1 {
                    return Err(CodecError::LengthMismatch {
                        expected: 1,
                        got: output.len(),
                    });
                }
                Ok(output[0] * self.codec.phi_max())
            }
            HeadKind::NllBins => Ok(decode_expected(&softmax(output), &self.codec)?.degrees()),
            HeadKind::SineWave => Ok(decode(output, &self.codec)?.angle.degrees()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub feature_dim: usize,
    /// LSTM hidden sizes for `c_lstm`, dense tanh widths for `feedforward`.
    pub hidden: Vec<usize>,
    pub head: HeadSpec,
    pub dropout: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.feature_dim == 0 {
            return Err(NeuralError::InvalidSpec(
                "feature_dim must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(NeuralError::InvalidSpec(format!(
                "hidden sizes must be positive: {:?}",
                self.hidden
            )));
        }
        if self.kind == ModelKind::CLstm && self.hidden.is_empty() {
            return Err(NeuralError::InvalidSpec(
                "c_lstm needs at least one LSTM layer".into(),
            ));
        }
        Dropout::new(self.dropout)?;
        Ok(())
    }

    pub fn write_kv(&self, map: &mut KvMap) {
        map.insert("model".into(), self.kind.to_string());
        map.insert("feature_dim".into(), self.feature_dim.to_string());
        map.insert("hidden".into(), kv::join(&self.hidden));
        map.insert("dropout".into(), self.dropout.to_string());
        map.insert("head".into(), self.head.kind.to_string());
        map.insert("n_neurons".into(), self.head.codec.n_neurons().to_string());
        map.insert("phi_max".into(), self.head.codec.phi_max().to_string());
        map.insert(
            "smoothing_variance".into(),
            self.head
                .smoothing_variance
                .map_or_else(|| "none".to_string(), |v| v.to_string()),
        );
    }

    /// Reads (and removes) the keys written by [`ModelSpec::write_kv`].
    pub fn take_kv(map: &mut KvMap) -> Result<Self, KvError> {
        let kind: ModelKind = kv::require(map, "model")?;
        let feature_dim = kv::require(map, "feature_dim")?;
        let hidden_raw: String = kv::require(map, "hidden")?;
        let hidden = kv::split("hidden", &hidden_raw)?;
        let dropout = kv::require(map, "dropout")?;
        let head_kind: HeadKind = kv::require(map, "head")?;
        let n: usize = kv::require(map, "n_neurons")?;
        let phi_max: f64 = kv::require(map, "phi_max")?;
        let codec = CodecConfig::new(n, phi_max).map_err(|e| KvError::Invalid {
            key: "n_neurons/phi_max".into(),
            value: format!("{n}/{phi_max}"),
            reason: e.to_string(),
        })?;
        let smoothing_variance =
            parse_smoothing(&kv::require::<String>(map, "smoothing_variance")?)?;
        Ok(Self {
            kind,
            feature_dim,
            hidden,
            head: HeadSpec {
                kind: head_kind,
                codec,
                smoothing_variance,
            },
            dropout,
        })
    }
}

pub(crate) fn parse_smoothing(value: &str) -> Result<Option<f64>, KvError> {
    if value == "none" {
        return Ok(None);
    }
    value
        .parse::<f64>()
        .ok()
        .filter(|v| *v > 0.0 && v.is_finite())
        .map(Some)
        .ok_or_else(|| KvError::Invalid {
            key: "smoothing_variance".into(),
            value: value.to_string(),
            reason: "expected a positive number or `none`".into(),
        })
}

#[derive(Debug, Clone, PartialEq)]
enum Trunk {
    Feedforward(Vec<Dense>),
    CLstm(Vec<LstmLayer>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    trunk: Trunk,
    dropout: Dropout,
    head: Dense,
}

#[derive(Debug, Clone)]
enum TrunkCache {
    Feedforward(Vec<DenseCache>),
    CLstm(Vec<Vec<LstmCache>>),
}

/// Intermediate values of one batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    trunk: TrunkCache,
    mask: Option<Tensor>,
    head: DenseCache,
    steps: usize,
    batch: usize,
}

impl Model {
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self, NeuralError> {
        spec.validate()?;
        let mut width = spec.feature_dim;
        let trunk = match spec.kind {
            ModelKind::Feedforward => {
                let mut layers = Vec::new();
                for (k, &h) in spec.hidden.iter().enumerate() {
                    layers.push(Dense::new(
                        &format!("dense{k}"),
                        width,
                        h,
                        Activation::Tanh,
                        rng,
                    ));
                    width = h;
                }
                Trunk::Feedforward(layers)
            }
            ModelKind::CLstm => {
                let mut layers = Vec::new();
                for (k, &h) in spec.hidden.iter().enumerate() {
                    let layer_spec = LstmLayerSpec {
                        input_dim: width,
                        hidden_dim: h,
                    };
                    layers.push(LstmLayer::new(&format!("lstm{k}"), layer_spec, rng)?);
                    width = h;
                }
                Trunk::CLstm(layers)
            }
        };
        let head = Dense::new(
            "head",
            width,
            spec.head.width(),
            spec.head.activation(),
            rng,
        );
        let dropout = Dropout::new(spec.dropout)?;
        Ok(Self {
            spec,
            trunk,
            dropout,
            head,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn head_spec(&self) -> &HeadSpec {
        &self.spec.head
    }

    /// Parameters in a fixed order: trunk layers bottom-up, then the head.
    pub fn params(&self) -> Vec<&Parameter> {
        let mut out: Vec<&Parameter> = Vec::new();
        match &self.trunk {
            Trunk::Feedforward(layers) => layers.iter().for_each(|l| out.extend(l.params())),
            Trunk::CLstm(layers) => layers.iter().for_each(|l| out.extend(l.params())),
        }
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out: Vec<&mut Parameter> = Vec::new();
        match &mut self.trunk {
            Trunk::Feedforward(layers) => {
                layers.iter_mut().for_each(|l| out.extend(l.params_mut()))
            }
            Trunk::CLstm(layers) => layers.iter_mut().for_each(|l| out.extend(l.params_mut())),
        }
        out.extend(self.head.params_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Parameter::zero_grad);
    }

    /// Batched forward pass. `steps[t]` is `[batch, feature_dim]` for window
    /// position `t` (oldest first).
    pub fn forward(
        &self,
        steps: &[Tensor],
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<(Tensor, ForwardCache), NeuralError> {
        let Some(first) = steps.first() else {
            return Err(NeuralError::InvalidSpec("empty window".into()));
        };
        let batch = first.rows();
        for s in steps {
            s.expect_matrix("window frame", Some(batch), self.spec.feature_dim)?;
        }
        let (top, trunk_cache) = match &self.trunk {
            Trunk::Feedforward(layers) => {
                let mut x = steps[steps.len() - 1].clone();
                let mut caches = Vec::with_capacity(layers.len());
                for layer in layers {
                    let (y, cache) = layer.forward(&x)?;
                    caches.push(cache);
                    x = y;
                }
                (x, TrunkCache::Feedforward(caches))
            }
            Trunk::CLstm(layers) => {
                let mut seq: Vec<Tensor> = steps.to_vec();
                let mut caches = Vec::with_capacity(layers.len());
                for layer in layers {
                    let (hs, layer_caches) = layer.forward_sequence(&seq)?;
                    caches.push(layer_caches);
                    seq = hs;
                }
                (
                    seq.pop().expect("non-empty window"),
                    TrunkCache::CLstm(caches),
                )
            }
        };
        let (dropped, mask) = self.dropout.forward(&top, mode, rng);
        let (out, head_cache) = self.head.forward(&dropped)?;
        Ok((
            out,
            ForwardCache {
                trunk: trunk_cache,
                mask,
                head: head_cache,
                steps: steps.len(),
                batch,
            },
        ))
    }

    /// Accumulates parameter gradients for `d_out = dL/d(output)` and
    /// returns `dL/d(steps[t])` for every window position.
    pub fn backward(
        &mut self,
        cache: &ForwardCache,
        d_out: &Tensor,
    ) -> Result<Vec<Tensor>, NeuralError> {
        let d_top = self.head.backward(&cache.head, d_out)?;
        let d_top = Dropout::backward(cache.mask.as_ref(), &d_top);
        let zero_input = || Tensor::zeros(&[cache.batch, self.spec.feature_dim]);
        match (&mut self.trunk, &cache.trunk) {
            (Trunk::Feedforward(layers), TrunkCache::Feedforward(caches)) => {
                let mut d = d_top;
                for (layer, c) in layers.iter_mut().zip(caches).rev() {
                    d = layer.backward(c, &d)?;
                }
                let mut grads: Vec<Tensor> = (0..cache.steps - 1).map(|_| zero_input()).collect();
                grads.push(d);
                Ok(grads)
            }
            (Trunk::CLstm(layers), TrunkCache::CLstm(caches)) => {
                let mut dhs: Vec<Option<Tensor>> = vec![None; cache.steps];
                dhs[cache.steps - 1] = Some(d_top);
                let mut dxs = Vec::new();
                for (layer, c) in layers.iter_mut().zip(caches).rev() {
                    dxs = layer.backward_sequence(c, &dhs)?;
                    dhs = dxs.iter().cloned().map(Some).collect();
                }
                Ok(dxs)
            }
            _ => Err(NeuralError::InvalidSpec(
                "cache does not belong to this model".into(),
            )),
        }
    }

    /// Eval-mode head outputs `[batch, width]`.
    pub fn predict(&self, steps: &[Tensor]) -> Result<Tensor, NeuralError> {
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward(steps, Mode::Eval, &mut unused)?.0)
    }

    /// Eval-mode head output for a single `[w, feature_dim]` window.
    pub fn forward_window(&self, window: &Tensor) -> Result<Vec<f64>, NeuralError> {
        window.expect_matrix("window", None, self.spec.feature_dim)?;
        let steps: Vec<Tensor> = (0..window.rows())
            .map(|t| Tensor::from_vec(&[1, self.spec.feature_dim], window.row(t).to_vec()))
            .collect::<Result<_, _>>()?;
        Ok(self.predict(&steps)?.into_data())
    }

    /// Replaces parameter values (and Adam state) from `src`, matched by
    /// position. Shapes and names must agree.
    pub fn load_params(&mut self, src: Vec<Parameter>) -> Result<(), NeuralError> {
        let mut dst = self.params_mut();
        if dst.len() != src.len() {
            return Err(NeuralError::Checkpoint(format!(
                "expected {} parameters, found {}",
                dst.len(),
                src.len()
            )));
        }
        for (d, s) in dst.iter_mut().zip(src) {
            if d.name != s.name || d.value.shape() != s.value.shape() {
                return Err(NeuralError::Checkpoint(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    s.name,
                    s.value.shape(),
                    d.name,
                    d.value.shape()
                )));
            }
            **d = s;
        }
        Ok(())
    }
}

/// Stacks windows into per-step batch tensors: `out[t]` is `[B, D]`.
pub fn stack_windows(windows: &[&[FrameRecord]]) -> Result<Vec<Tensor>, NeuralError> {
    let Some(first) = windows.first() else {
        return Err(NeuralError::InvalidSpec("empty batch".into()));
    };
    let w = first.len();
    let dim = first.first().map_or(0, |f| f.features.len());
    if w == 0 || dim == 0 {
        return Err(NeuralError::InvalidSpec("empty window".into()));
    }
    let mut steps = Vec::with_capacity(w);
    for t in 0..w {
        let mut data = Vec::with_capacity(windows.len() * dim);
        for win in windows {
            if win.len() != w || win[t].features.len() != dim {
                return Err(NeuralError::ShapeMismatch {
                    context: "window batch",
                    expected: vec![w, dim],
                    got: vec![win.len(), win.get(t).map_or(0, |f| f.features.len())],
                });
            }
            data.extend_from_slice(&win[t].features);
        }
        steps.push(Tensor::from_vec(&[windows.len(), dim], data)?);
    }
    Ok(steps)
}
