//! Training data: a synthetic driving-scenario generator standing in for a
//! CNN feature extractor, ingestion of preprocessed real logs, many-to-one
//! sliding windows, and session-level train/test splitting.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::codec::{CodecConfig, CodecError, SteeringAngle};
use crate::seed::stream_rng;
use crate::signal::{LabeledFrameSeries, SignalError};

/// Frame rate of synthetic sessions (the training rate).
pub const SYNTH_FRAME_RATE: f64 = 2.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid scenario parameters: {0}")]
    InvalidParams(String),
    #[error("series has {len} frames, window needs {w}")]
    SeriesTooShort { len: usize, w: usize },
    #[error("window and stride must be positive (w={w}, stride={stride})")]
    InvalidWindow { w: usize, stride: usize },
    #[error("need at least 2 sessions to split, got {0}")]
    NotEnoughSessions(usize),
    #[error("test fraction {0} must lie in (0, 1)")]
    InvalidFraction(f64),
    #[error("features file has {features} rows but labels file has {labels}")]
    RowCountMismatch { features: usize, labels: usize },
    #[error("malformed file at row {row}: {reason}")]
    MalformedFile { row: usize, reason: String },
    #[error("row {row}: {source}")]
    Label { row: usize, source: CodecError },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One camera frame: its feature vector and ground-truth angle.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub features: Vec<f64>,
    pub angle: SteeringAngle,
    pub timestamp: f64,
}

/// A complete driving session. Sessions are the unit of train/test splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: usize,
    pub frames: Vec<FrameRecord>,
}

impl Session {
    pub fn new(id: usize, frames: Vec<FrameRecord>) -> Self {
        Self { id, frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn windows(
        &self,
        w: usize,
        stride: usize,
    ) -> Result<Vec<WindowedSample<'_>>, DatasetError> {
        let mut samples = make_windows(&self.frames, w, stride)?;
        samples.iter_mut().for_each(|s| s.session = self.id);
        Ok(samples)
    }

    pub fn angles(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.angle.degrees()).collect()
    }
}

/// `w` consecutive frames (oldest first) supervising the angle of the last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowedSample<'a> {
    pub window: &'a [FrameRecord],
    pub label: SteeringAngle,
    /// Session the frames came from.
    pub session: usize,
    /// Index of the window's first frame within its session.
    pub start: usize,
}

impl WindowedSample<'_> {
    /// `(session, frame index)` of every frame the window touches.
    pub fn frame_ids(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.start..self.start + self.window.len()).map(move |k| (self.session, k))
    }
}

/// Knobs of the synthetic driving scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    /// Frames per session.
    pub length: usize,
    pub feature_dim: usize,
    /// Std-dev of the per-frame noise on every informative feature.
    pub observation_noise_sigma: f64,
    /// AR(1) coefficient of the latent curvature, in (0, 1).
    pub curvature_smoothness: f64,
    /// Trailing features that carry pure noise.
    pub distractor_dim: usize,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            length: 2000,
            feature_dim: 32,
            observation_noise_sigma: 0.5,
            curvature_smoothness: 0.95,
            distractor_dim: 16,
            seed: 7,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fail = |m: String| Err(DatasetError::InvalidParams(m));
        if self.length < 2 {
            return fail(format!("length {} must be at least 2", self.length));
        }
        if self.feature_dim == 0 || self.feature_dim <= self.distractor_dim {
            return fail(format!(
                "feature_dim {} must exceed distractor_dim {}",
                self.feature_dim, self.distractor_dim
            ));
        }
        if !(self.observation_noise_sigma >= 0.0 && self.observation_noise_sigma.is_finite()) {
            return fail(format!(
                "observation_noise_sigma {} must be finite and nonnegative",
                self.observation_noise_sigma
            ));
        }
        if !(self.curvature_smoothness > 0.0 && self.curvature_smoothness < 1.0) {
            return fail(format!(
                "curvature_smoothness {} must lie in (0, 1)",
                self.curvature_smoothness
            ));
        }
        Ok(())
    }

    /// Stationary std-dev of the latent curvature before clipping.
    pub fn curvature_std(&self) -> f64 {
        let s = self.curvature_smoothness;
        (1.0 - s) / (1.0 - s * s).sqrt()
    }

    /// Curvature magnitude that maps to ±φ_max: four stationary std-devs.
    pub fn curvature_clip(&self) -> f64 {
        4.0 * self.curvature_std()
    }
}

/// Generates one synthetic session.
///
/// A latent curvature follows `c_t = s·c_{t-1} + (1-s)·η_t` (started from its
/// stationary law, clipped to ±c_clip) and the angle is `φ_max·c_t/c_clip`.
/// Informative features are noisy copies of `c_t`; distractors are unit
/// Gaussian noise. Frame noise dominates frame-to-frame change, so pooling a
/// window of frames beats any single-frame estimate.
pub fn synth_scenario(
    params: &ScenarioParams,
    codec: &CodecConfig,
) -> Result<Vec<FrameRecord>, DatasetError> {
    params.validate()?;
    let mut rng = stream_rng(params.seed, 0x5EED_5CE7);
    let s = params.curvature_smoothness;
    let clip = params.curvature_clip();
    let informative = params.feature_dim - params.distractor_dim;
    let sigma = params.observation_noise_sigma;

    let mut frames = Vec::with_capacity(params.length);
    let mut c = params.curvature_std() * rng.sample::<f64, _>(StandardNormal);
    for t in 0..params.length {
        if t > 0 {
            let eta: f64 = rng.sample(StandardNormal);
            c = s * c + (1.0 - s) * eta;
        }
        c = c.clamp(-clip, clip);
        let angle = (codec.phi_max() * c / clip).clamp(-codec.phi_max(), codec.phi_max());
        let mut features = Vec::with_capacity(params.feature_dim);
        for _ in 0..informative {
            features.push(c + sigma * rng.sample::<f64, _>(StandardNormal));
        }
        for _ in 0..params.distractor_dim {
            features.push(rng.sample::<f64, _>(StandardNormal));
        }
        frames.push(FrameRecord {
            features,
            angle: codec.angle(angle).expect("clamped into range"),
            timestamp: t as f64 / SYNTH_FRAME_RATE,
        });
    }
    Ok(frames)
}

/// Sliding windows at offsets `0, stride, 2·stride, …`, each labelled with
/// the angle of its last frame.
pub fn make_windows(
    series: &[FrameRecord],
    w: usize,
    stride: usize,
) -> Result<Vec<WindowedSample<'_>>, DatasetError> {
    if w == 0 || stride == 0 {
        return Err(DatasetError::InvalidWindow { w, stride });
    }
    if series.len() < w {
        return Err(DatasetError::SeriesTooShort {
            len: series.len(),
            w,
        });
    }
    Ok((0..=series.len() - w)
        .step_by(stride)
        .map(|start| {
            let window = &series[start..start + w];
            WindowedSample {
                window,
                label: window[w - 1].angle,
                session: 0,
                start,
            }
        })
        .collect())
}

/// Moves whole sessions, in order, into the test set while they fit under
/// `test_fraction` of the total frame count, stopping once the quota is met.
/// Both sides are guaranteed non-empty.
pub fn split_by_session(
    sessions: Vec<Session>,
    test_fraction: f64,
) -> Result<(Vec<Session>, Vec<Session>), DatasetError> {
    if sessions.len() < 2 {
        return Err(DatasetError::NotEnoughSessions(sessions.len()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    let total: usize = sessions.iter().map(Session::len).sum();
    let quota = test_fraction * total as f64;
    let slack = 1e-9 * total.max(1) as f64;

    let mut in_test = vec![false; sessions.len()];
    let mut taken = 0usize;
    for (k, session) in sessions.iter().enumerate() {
        if taken as f64 >= quota - slack {
            break;
        }
        if (taken + session.len()) as f64 <= quota + slack {
            in_test[k] = true;
            taken += session.len();
        }
    }
    if !in_test.contains(&true) {
        // Every session overshoots the quota: take the smallest (first on ties).
        let k = (0..sessions.len())
            .min_by_key(|&k| sessions[k].len())
            .expect("at least two sessions");
        in_test[k] = true;
    }
    if in_test.iter().all(|&t| t) {
        *in_test.last_mut().expect("non-empty") = false;
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (session, is_test) in sessions.into_iter().zip(in_test) {
        if is_test {
            test.push(session);
        } else {
            train.push(session);
        }
    }
    Ok((train, test))
}

/// Joins a features CSV (`f0,…,f{D-1}`) row by row with a labels CSV
/// (`timestamp_s,angle_deg`).
pub fn load_labeled_series(
    features_path: &Path,
    labels_path: &Path,
    codec: &CodecConfig,
) -> Result<Vec<FrameRecord>, DatasetError> {
    let features = read_features_csv(BufReader::new(File::open(features_path)?))?;
    let labels = LabeledFrameSeries::read_csv(BufReader::new(File::open(labels_path)?))?;
    join_labeled(features, &labels, codec)
}

pub fn join_labeled(
    features: Vec<Vec<f64>>,
    labels: &LabeledFrameSeries,
    codec: &CodecConfig,
) -> Result<Vec<FrameRecord>, DatasetError> {
    if features.len() != labels.len() {
        return Err(DatasetError::RowCountMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    features
        .into_iter()
        .zip(labels.frames())
        .enumerate()
        .map(|(i, (features, frame))| {
            let angle = codec
                .angle(frame.angle)
                .map_err(|source| DatasetError::Label { row: i + 1, source })?;
            Ok(FrameRecord {
                features,
                angle,
                timestamp: frame.timestamp,
            })
        })
        .collect()
}

pub fn read_features_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let expected: Vec<String> = (0..header.len()).map(|k| format!("f{k}")).collect();
    if header.is_empty() || header != expected {
        return Err(DatasetError::MalformedFile {
            row: 0,
            reason: format!("expected header f0,…,f{{D-1}}, got {}", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DatasetError::MalformedFile {
            row,
            reason: e.to_string(),
        })?;
        let values = record
            .iter()
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DatasetError::MalformedFile {
                        row,
                        reason: format!("non-numeric cell {cell:?}"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(values);
    }
    Ok(rows)
}

pub fn write_features_csv<W: Write>(writer: W, frames: &[FrameRecord]) -> Result<(), DatasetError> {
    let dim = frames.first().map_or(0, |f| f.features.len());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((0..dim).map(|k| format!("f{k}")))?;
    for frame in frames {
        w.write_record(frame.features.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Labels of `frames` in the `timestamp_s,angle_deg` format.
pub fn write_labels_csv<W: Write>(writer: W, frames: &[FrameRecord]) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp_s", "angle_deg"])?;
    for frame in frames {
        w.write_record([
            frame.timestamp.to_string(),
            frame.angle.degrees().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
