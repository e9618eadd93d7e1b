use sha2::{Digest, Sha256};

use crate::codec::{CodecConfig, DEFAULT_SMOOTHING_VARIANCE};
use crate::dataset::ScenarioParams;
use crate::kv::{self, KvError, KvMap};
use crate::neural::{
    parse_smoothing, AdamConfig, HeadKind, HeadSpec, LrGroups, ModelKind, ModelSpec,
};
use crate::seed::derive_seed;

use super::HarnessError;

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `model.feature_dim` always equals `scenario.feature_dim`.
    pub model: ModelSpec,
    /// Per-session generator settings; session `i` uses a seed derived from
    /// `scenario.seed` and `i`.
    pub scenario: ScenarioParams,
    /// Total sessions generated.
    pub sessions: usize,
    /// Sessions held out for testing.
    pub eval_sessions: usize,
    pub w: usize,
    pub stride: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: LrGroups,
    pub adam: AdamConfig,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    /// Drives initialization, data order and dropout.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let scenario = ScenarioParams::default();
        Self {
            model: ModelSpec {
                kind: ModelKind::CLstm,
                feature_dim: scenario.feature_dim,
                hidden: vec![32, 32],
                head: HeadSpec {
                    kind: HeadKind::SineWave,
                    codec: CodecConfig::default(),
                    smoothing_variance: Some(DEFAULT_SMOOTHING_VARIANCE),
                },
                dropout: 0.1,
            },
            scenario: ScenarioParams {
                length: 2000,
                ..scenario
            },
            sessions: 8,
            eval_sessions: 2,
            w: 10,
            stride: 1,
            epochs: 12,
            batch_size: 32,
            lr: LrGroups::default(),
            adam: AdamConfig::default(),
            clip_norm: 5.0,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn with_model(mut self, kind: ModelKind, head: HeadKind) -> Self {
        self.model.kind = kind;
        self.model.head.kind = head;
        self
    }

    pub fn codec(&self) -> &CodecConfig {
        &self.model.head.codec
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        self.scenario.validate()?;
        self.model.validate()?;
        if self.model.feature_dim != self.scenario.feature_dim {
            return bad(format!(
                "model feature_dim {} differs from scenario feature_dim {}",
                self.model.feature_dim, self.scenario.feature_dim
            ));
        }
        if self.w == 0 || self.stride == 0 || self.epochs == 0 || self.batch_size == 0 {
            return bad("w, stride, epochs and batch_size must all be at least 1".into());
        }
        if self.scenario.length <= self.w {
            return bad(format!(
                "session length {} must exceed the window {}",
                self.scenario.length, self.w
            ));
        }
        if self.eval_sessions == 0 || self.sessions < self.eval_sessions + 2 {
            return bad(format!(
                "need at least one test, one training and one validation session \
                 (sessions={}, eval_sessions={})",
                self.sessions, self.eval_sessions
            ));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad(format!("clip_norm {} must be positive", self.clip_norm));
        }
        let rates = [self.lr.fresh, self.lr.pretrained];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad(format!(
                "learning rates must be finite and nonnegative: {rates:?}"
            ));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvMap {
        let mut map = KvMap::new();
        self.model.write_kv(&mut map);
        let s = &self.scenario;
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("length", s.length.to_string());
        put(
            "observation_noise_sigma",
            s.observation_noise_sigma.to_string(),
        );
        put("curvature_smoothness", s.curvature_smoothness.to_string());
        put("distractor_dim", s.distractor_dim.to_string());
        put("scenario_seed", s.seed.to_string());
        put("sessions", self.sessions.to_string());
        put("eval_sessions", self.eval_sessions.to_string());
        put("w", self.w.to_string());
        put("stride", self.stride.to_string());
        put("epochs", self.epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("lr_fresh", self.lr.fresh.to_string());
        put("lr_pretrained", self.lr.pretrained.to_string());
        put("adam_beta1", self.adam.beta1.to_string());
        put("adam_beta2", self.adam.beta2.to_string());
        put("adam_eps", self.adam.eps.to_string());
        put("clip_norm", self.clip_norm.to_string());
        put("seed", self.seed.to_string());
        map
    }

    /// Canonical `key=value` text (sorted keys).
    pub fn to_text(&self) -> String {
        kv::render(&self.to_kv())
    }

    /// Overrides fields of `self` with the keys present in `map`. Unknown
    /// keys are rejected.
    pub fn apply_kv(mut self, mut map: KvMap) -> Result<Self, HarnessError> {
        let m = &mut map;
        macro_rules! set {
            ($key:literal => $field:expr) => {
                if let Some(v) = kv::take(m, $key)? {
                    $field = v;
                }
            };
        }
        set!("model" => self.model.kind);
        set!("head" => self.model.head.kind);
        if let Some(h) = kv::take::<String>(m, "hidden")? {
            self.model.hidden = kv::split("hidden", &h)?;
        }
        set!("dropout" => self.model.dropout);
        set!("feature_dim" => self.scenario.feature_dim);
        self.model.feature_dim = self.scenario.feature_dim;
        let n = kv::take(m, "n_neurons")?.unwrap_or(self.codec().n_neurons());
        let phi_max = kv::take(m, "phi_max")?.unwrap_or(self.codec().phi_max());
        self.model.head.codec = CodecConfig::new(n, phi_max).map_err(|e| KvError::Invalid {
            key: "n_neurons/phi_max".into(),
            value: format!("{n}/{phi_max}"),
            reason: e.to_string(),
        })?;
        if let Some(v) = kv::take::<String>(m, "smoothing_variance")? {
            self.model.head.smoothing_variance = parse_smoothing(&v)?;
        }
        set!("length" => self.scenario.length);
        set!("observation_noise_sigma" => self.scenario.observation_noise_sigma);
        set!("curvature_smoothness" => self.scenario.curvature_smoothness);
        set!("distractor_dim" => self.scenario.distractor_dim);
        set!("scenario_seed" => self.scenario.seed);
        set!("sessions" => self.sessions);
        set!("eval_sessions" => self.eval_sessions);
        set!("w" => self.w);
        set!("stride" => self.stride);
        set!("epochs" => self.epochs);
        set!("batch_size" => self.batch_size);
        set!("lr_fresh" => self.lr.fresh);
        set!("lr_pretrained" => self.lr.pretrained);
        set!("adam_beta1" => self.adam.beta1);
        set!("adam_beta2" => self.adam.beta2);
        set!("adam_eps" => self.adam.eps);
        set!("clip_norm" => self.clip_norm);
        set!("seed" => self.seed);
        kv::reject_unknown(&map)?;
        Ok(self)
    }

    /// Parses a (possibly partial) config file on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let cfg = Self::default().apply_kv(kv::parse(text)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// First 16 hex digits of the SHA-256 of [`ExperimentConfig::to_text`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Scenario parameters of session `i`.
    pub fn session_scenario(&self, i: usize) -> ScenarioParams {
        ScenarioParams {
            seed: derive_seed(self.scenario.seed, i as u64),
            ..self.scenario.clone()
        }
    }

    /// The `k`-th replicate: both the run seed and the scenario seed are
    /// shifted by `k`.
    pub fn replicate(&self, k: u64) -> Self {
        let mut cfg = self.clone();
        cfg.seed = cfg.seed.wrapping_add(k);
        cfg.scenario.seed = cfg.scenario.seed.wrapping_add(k);
        cfg
    }
}
