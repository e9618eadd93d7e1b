//! Experiment orchestration: data generation, training with best-validation
//! selection, held-out evaluation and the head × model comparison table.

mod compare;
mod config;
mod evaluate;
mod train;

use thiserror::Error;

use crate::codec::{CodecConfig, CodecError};
use crate::dataset::DatasetError;
use crate::kv::KvError;
use crate::metrics::MetricsError;
use crate::neural::NeuralError;

pub use compare::{
    compare, default_grid, median, run_experiment, write_comparison_csv, CellResult, CompareCell,
    CompareOptions, ComparisonTable,
};
pub use config::ExperimentConfig;
pub use evaluate::{
    decode_output, evaluate, evaluate_model, evaluate_with, write_predictions_csv,
    write_report_csv, write_sessions_csv, AnglePredictor, EvalReport, SessionReport,
};
pub use train::{
    build_data, check_provenance, train, train_on, write_history_csv, DataSplit, EpochRecord,
    TrainOutcome,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss or gradient in epoch {epoch}")]
    NonfiniteLoss { epoch: usize },
    #[error("checkpoint head codec {checkpoint:?} does not match supplied codec {supplied:?}")]
    HeadCodecMismatch {
        checkpoint: CodecConfig,
        supplied: CodecConfig,
    },
    #[error("training window touches held-out frame {frame} of session {session}")]
    Leakage { session: usize, frame: usize },
    #[error(transparent)]
    Config(#[from] KvError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
