use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::dataset::{split_by_session, synth_scenario, Session, WindowedSample};
use crate::kv::KvMap;
use crate::neural::{batch_loss, clip_grad_norm, stack_windows, Adam, Checkpoint, Mode, Model};
use crate::seed::stream_rng;

use super::evaluate::evaluate_model;
use super::{ExperimentConfig, HarnessError};

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

/// Train/validation/test sessions of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Vec<Session>,
    pub validation: Session,
    pub test: Vec<Session>,
}

/// Generates `config.sessions` synthetic sessions and splits off
/// `eval_sessions` of them for testing; the last remaining session becomes
/// the validation set.
pub fn build_data(config: &ExperimentConfig) -> Result<DataSplit, HarnessError> {
    config.validate()?;
    let sessions = (0..config.sessions)
        .map(|i| {
            let params = config.session_scenario(i);
            Ok(Session::new(i, synth_scenario(&params, config.codec())?))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let fraction = config.eval_sessions as f64 / config.sessions as f64;
    let (mut train, test) = split_by_session(sessions, fraction)?;
    let validation = match train.pop() {
        Some(v) if !train.is_empty() => v,
        _ => {
            return Err(HarnessError::InvalidConfig(
                "split left no session for both training and validation".into(),
            ))
        }
    };
    Ok(DataSplit {
        train,
        validation,
        test,
    })
}

/// Errors if any training window touches a frame of a held-out session.
pub fn check_provenance(
    train: &[WindowedSample<'_>],
    held_out: &[&Session],
) -> Result<(), HarnessError> {
    let held: HashSet<(usize, usize)> = held_out
        .iter()
        .flat_map(|s| (0..s.len()).map(move |k| (s.id, k)))
        .collect();
    for sample in train {
        if let Some((session, frame)) = sample.frame_ids().find(|id| held.contains(id)) {
            return Err(HarnessError::Leakage { session, frame });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_rmse_deg: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation checkpoint.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub wall_clock_s: f64,
}

pub fn train(config: &ExperimentConfig) -> Result<TrainOutcome, HarnessError> {
    let data = build_data(config)?;
    train_on(config, &data)
}

/// Trains on `data.train`, selecting the epoch with the lowest validation
/// RMSE. Initialization, batch order and dropout masks each draw from their
/// own seeded stream.
pub fn train_on(config: &ExperimentConfig, data: &DataSplit) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let mut init_rng = stream_rng(config.seed, STREAM_INIT);
    let mut shuffle_rng = stream_rng(config.seed, STREAM_SHUFFLE);
    let mut dropout_rng = stream_rng(config.seed, STREAM_DROPOUT);

    let mut model = Model::new(config.model.clone(), &mut init_rng)?;
    let mut adam = Adam::new(config.adam);
    let head = *model.head_spec();

    let mut samples = Vec::new();
    for s in &data.train {
        samples.extend(s.windows(config.w, config.stride)?);
    }
    if samples.is_empty() {
        return Err(HarnessError::InvalidConfig("no training windows".into()));
    }
    let held_out: Vec<&Session> = data.test.iter().chain([&data.validation]).collect();
    check_provenance(&samples, &held_out)?;

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Model, Adam)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let windows: Vec<_> = batch.iter().map(|&i| samples[i].window).collect();
            let targets: Vec<f64> = batch.iter().map(|&i| samples[i].label.degrees()).collect();
            let steps = stack_windows(&windows)?;
            let (out, cache) = model.forward(&steps, Mode::Train, &mut dropout_rng)?;
            let (loss, d_out) = batch_loss(&head, &out, &targets)?;
            if !loss.is_finite() {
                return Err(HarnessError::NonfiniteLoss { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            model.zero_grad();
            model.backward(&cache, &d_out)?;
            let mut params = model.params_mut();
            if !clip_grad_norm(&mut params, config.clip_norm).is_finite() {
                return Err(HarnessError::NonfiniteLoss { epoch });
            }
            adam.step(&mut params, &config.lr);
        }
        let val = evaluate_model(&model, std::slice::from_ref(&data.validation), config.w)?;
        if !val.rmse_deg.is_finite() {
            return Err(HarnessError::NonfiniteLoss { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / samples.len() as f64,
            val_rmse_deg: val.rmse_deg,
        });
        if best.as_ref().is_none_or(|(b, ..)| val.rmse_deg < *b) {
            best = Some((val.rmse_deg, epoch, model.clone(), adam.clone()));
        }
    }

    let (_, best_epoch, mut model, adam) = best.expect("at least one epoch");
    model.zero_grad();
    let mut meta = KvMap::new();
    meta.insert("config_hash".into(), config.hash());
    meta.insert("best_epoch".into(), best_epoch.to_string());
    meta.insert("w".into(), config.w.to_string());
    Ok(TrainOutcome {
        checkpoint: Checkpoint { meta, model, adam },
        history,
        best_epoch,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

pub fn write_history_csv<W: Write>(writer: W, history: &[EpochRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_loss", "val_rmse_deg"])?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_rmse_deg.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
