//! Plain-text checkpoint container.
//!
//! ```text
//! sinesteer-checkpoint
//! format_version=1
//! [meta]
//! key=value
//! [model]
//! model=c_lstm
//! ...
//! [adam]
//! step=120
//! ...
//! [param lstm0.w_x]
//! group=fresh
//! shape=32,256
//! value=0.01,-0.2,...
//! adam_m=...
//! adam_v=...
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so save → load is
//! bit-exact.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kv::{self, KvMap};

use super::adam::{Adam, AdamConfig};
use super::model::{Model, ModelSpec};
use super::tensor::{ParamGroup, Parameter, Tensor};
use super::NeuralError;

pub const CHECKPOINT_MAGIC: &str = "sinesteer-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A model, its optimizer state and free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: KvMap,
    pub model: Model,
    pub adam: Adam,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC}\nformat_version={CHECKPOINT_VERSION}\n");
        out.push_str("[meta]\n");
        out.push_str(&kv::render(&self.meta));
        let mut spec = KvMap::new();
        self.model.spec().write_kv(&mut spec);
        out.push_str("[model]\n");
        out.push_str(&kv::render(&spec));
        let adam: KvMap = [
            ("step", self.adam.step.to_string()),
            ("beta1", self.adam.config.beta1.to_string()),
            ("beta2", self.adam.config.beta2.to_string()),
            ("eps", self.adam.config.eps.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        out.push_str("[adam]\n");
        out.push_str(&kv::render(&adam));
        for p in self.model.params() {
            out.push_str(&format!("[param {}]\n", p.name));
            out.push_str(&format!("group={}\n", p.group.as_str()));
            out.push_str(&format!("shape={}\n", kv::join(p.value.shape())));
            out.push_str(&format!("value={}\n", kv::join(p.value.data())));
            out.push_str(&format!("adam_m={}\n", kv::join(p.adam_m.data())));
            out.push_str(&format!("adam_v={}\n", kv::join(p.adam_v.data())));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NeuralError> {
        let bad = |m: String| NeuralError::Checkpoint(m);
        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("missing checkpoint header".into()));
        }
        match lines.next() {
            Some(l) if l == format!("format_version={CHECKPOINT_VERSION}") => {}
            other => return Err(bad(format!("unsupported format version line {other:?}"))),
        }

        let mut sections: Vec<(String, String)> = Vec::new();
        for line in lines {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                sections.push((name.to_string(), String::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                body.push_str(line);
                body.push('\n');
            } else if !line.trim().is_empty() {
                return Err(bad(format!("content before first section: {line:?}")));
            }
        }
        let mut sections = sections.into_iter();
        let mut next_section = |name: &str| -> Result<KvMap, NeuralError> {
            match sections.next() {
                Some((n, body)) if n == name => {
                    kv::parse(&body).map_err(|e| bad(format!("[{name}] {e}")))
                }
                other => Err(bad(format!(
                    "expected section [{name}], found {:?}",
                    other.map(|(n, _)| n)
                ))),
            }
        };

        let meta = next_section("meta")?;
        let mut spec_map = next_section("model")?;
        let spec = ModelSpec::take_kv(&mut spec_map).map_err(|e| bad(format!("[model] {e}")))?;
        kv::reject_unknown(&spec_map).map_err(|e| bad(format!("[model] {e}")))?;

        let mut adam_map = next_section("adam")?;
        let kv_err = |e: kv::KvError| bad(format!("[adam] {e}"));
        let adam = Adam {
            step: kv::require(&mut adam_map, "step").map_err(kv_err)?,
            config: AdamConfig {
                beta1: kv::require(&mut adam_map, "beta1").map_err(kv_err)?,
                beta2: kv::require(&mut adam_map, "beta2").map_err(kv_err)?,
                eps: kv::require(&mut adam_map, "eps").map_err(kv_err)?,
            },
        };
        kv::reject_unknown(&adam_map).map_err(kv_err)?;

        let mut params = Vec::new();
        for (header, body) in sections {
            let Some(name) = header.strip_prefix("param ") else {
                return Err(bad(format!("unexpected section [{header}]")));
            };
            params.push(parse_param(name, &body)?);
        }

        let mut model = Model::new(spec, &mut ChaCha8Rng::seed_from_u64(0))?;
        model.load_params(params)?;
        Ok(Self { meta, model, adam })
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

fn parse_param(name: &str, body: &str) -> Result<Parameter, NeuralError> {
    let err = |e: kv::KvError| NeuralError::Checkpoint(format!("[param {name}] {e}"));
    let mut map = kv::parse(body).map_err(err)?;
    let group_raw: String = kv::require(&mut map, "group").map_err(err)?;
    let group = ParamGroup::parse(&group_raw).ok_or_else(|| {
        NeuralError::Checkpoint(format!("[param {name}] unknown group {group_raw:?}"))
    })?;
    let shape_raw: String = kv::require(&mut map, "shape").map_err(err)?;
    let shape: Vec<usize> = kv::split("shape", &shape_raw).map_err(err)?;
    let mut tensor = |key: &str| -> Result<Tensor, NeuralError> {
        let raw: String = kv::require(&mut map, key).map_err(err)?;
        Tensor::from_vec(&shape, kv::split(key, &raw).map_err(err)?)
    };
    let value = tensor("value")?;
    let adam_m = tensor("adam_m")?;
    let adam_v = tensor("adam_v")?;
    kv::reject_unknown(&map).map_err(err)?;
    let mut p = Parameter::new(name, group, value);
    p.adam_m = adam_m;
    p.adam_v = adam_v;
    Ok(p)
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), NeuralError> {
    checkpoint.save(path)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, NeuralError> {
    Checkpoint::load(path)
}
