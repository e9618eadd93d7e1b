use std::io::Write;
use std::path::{Path, PathBuf};

use crate::neural::{Checkpoint, HeadKind, ModelKind};

use super::evaluate::{evaluate, EvalReport};
use super::train::{build_data, train_on};
use super::{ExperimentConfig, HarnessError};

/// Trains (or reloads from `cache_dir`) and evaluates one config on its
/// held-out test sessions.
pub fn run_experiment(
    config: &ExperimentConfig,
    cache_dir: Option<&Path>,
) -> Result<EvalReport, HarnessError> {
    let data = build_data(config)?;
    let hash = config.hash();
    let cached = cache_dir.map(|d| d.join(format!("{hash}.ckpt")));
    let checkpoint = match cached.as_deref().and_then(|p| Checkpoint::load(p).ok()) {
        Some(ck) if ck.meta.get("config_hash") == Some(&hash) => ck,
        _ => {
            let ck = train_on(config, &data)?.checkpoint;
            if let Some(path) = &cached {
                ck.save(path)?;
            }
            ck
        }
    };
    evaluate(&checkpoint, &data.test, config.codec(), config.w)
}

/// The 3 heads × 2 models grid around `base`, in table order.
pub fn default_grid(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for head in HeadKind::ALL {
        for model in ModelKind::ALL {
            out.push(base.clone().with_model(model, head));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    /// Medians over seeds.
    pub rmse_deg: f64,
    pub whiteness: f64,
    /// Summed over seeds.
    pub clamp_count: usize,
    /// `(rmse, whiteness)` of every seed, in seed order.
    pub runs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareCell {
    pub head: HeadKind,
    pub model: ModelKind,
    pub config_hash: String,
    pub result: Result<CellResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub cells: Vec<CompareCell>,
}

impl ComparisonTable {
    pub fn cell(&self, head: HeadKind, model: ModelKind) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.head == head && c.model == model)
            .and_then(|c| c.result.as_ref().ok())
    }
}

#[derive(Debug, Clone, Default)]
pub struct CompareOptions {
    /// Replicates per config; replicate `k` shifts both seeds by `k`.
    pub seeds: usize,
    pub cache_dir: Option<PathBuf>,
}

/// Runs every config over `options.seeds` replicates. A failing replicate
/// marks its cell failed; the remaining cells still run.
pub fn compare(configs: &[ExperimentConfig], options: &CompareOptions) -> ComparisonTable {
    let seeds = options.seeds.max(1);
    let cells = configs
        .iter()
        .map(|cfg| {
            let runs: Result<Vec<EvalReport>, HarnessError> = (0..seeds as u64)
                .map(|k| run_experiment(&cfg.replicate(k), options.cache_dir.as_deref()))
                .collect();
            let result = runs.map_err(|e| e.to_string()).map(|reports| CellResult {
                rmse_deg: median(reports.iter().map(|r| r.rmse_deg).collect()),
                whiteness: median(reports.iter().map(|r| r.whiteness).collect()),
                clamp_count: reports.iter().map(|r| r.clamp_count).sum(),
                runs: reports.iter().map(|r| (r.rmse_deg, r.whiteness)).collect(),
            });
            CompareCell {
                head: cfg.model.head.kind,
                model: cfg.model.kind,
                config_hash: cfg.hash(),
                result,
            }
        })
        .collect();
    ComparisonTable { cells }
}

/// Median; the mean of the two middle values for even counts.
pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// `head,model,rmse_deg,whiteness,clamp_count,config_hash`; failed cells
/// carry `failed` in their metric columns.
pub fn write_comparison_csv<W: Write>(
    writer: W,
    table: &ComparisonTable,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "head",
        "model",
        "rmse_deg",
        "whiteness",
        "clamp_count",
        "config_hash",
    ])?;
    for c in &table.cells {
        let (rmse, white, clamps) = match &c.result {
            Ok(r) => (
                r.rmse_deg.to_string(),
                r.whiteness.to_string(),
                r.clamp_count.to_string(),
            ),
            Err(_) => ("failed".into(), "failed".into(), "failed".into()),
        };
        w.write_record([
            c.head.as_str(),
            c.model.as_str(),
            &rmse,
            &white,
            &clamps,
            &c.config_hash,
        ])?;
    }
    w.flush()?;
    Ok(())
}
