use std::io::Write;

use crate::codec::{clamp_angle, CodecConfig, CodecError};
use crate::dataset::{FrameRecord, Session};
use crate::metrics::{rmse, whiteness, write_metric_csv, AngleSeries, MetricRow};
use crate::neural::{stack_windows, Checkpoint, HeadSpec, Model, Tensor};

use super::HarnessError;

const EVAL_BATCH: usize = 256;

/// Anything that maps windows to head outputs. Implemented by [`Model`];
/// tests plug in oracle predictors.
pub trait AnglePredictor {
    fn head(&self) -> &HeadSpec;

    /// Head outputs `[windows.len(), head.width()]`.
    fn predict(&self, windows: &[&[FrameRecord]]) -> Result<Tensor, HarnessError>;
}

impl AnglePredictor for Model {
    fn head(&self) -> &HeadSpec {
        self.head_spec()
    }

    fn predict(&self, windows: &[&[FrameRecord]]) -> Result<Tensor, HarnessError> {
        Ok(Model::predict(self, &stack_windows(windows)?)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub session: usize,
    /// Timestamps of the evaluated frames (the last frame of each window).
    pub timestamps: Vec<f64>,
    pub truth: Vec<f64>,
    /// Decoded and clamped predictions.
    pub predicted: Vec<f64>,
    pub rmse_deg: f64,
    pub whiteness: f64,
}

impl SessionReport {
    pub fn frames(&self) -> usize {
        self.predicted.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Pooled over all evaluated frames.
    pub rmse_deg: f64,
    /// Frame-weighted mean of the per-session whiteness (deg²/s²).
    pub whiteness: f64,
    pub sessions: Vec<SessionReport>,
    /// Predictions that fell outside ±φ_max and were clamped.
    pub clamp_count: usize,
    /// Sine-head outputs with no recoverable phase; predicted as 0°.
    pub degenerate_count: usize,
    pub config_hash: String,
    pub wall_clock_s: f64,
}

impl EvalReport {
    pub fn frames(&self) -> usize {
        self.sessions.iter().map(SessionReport::frames).sum()
    }

    /// Everything except wall-clock time.
    pub fn same_results(&self, other: &Self) -> bool {
        Self {
            wall_clock_s: 0.0,
            ..self.clone()
        } == Self {
            wall_clock_s: 0.0,
            ..other.clone()
        }
    }
}

/// Decodes one head output row into an in-range angle. Returns the angle,
/// whether it was clamped, and whether the output was degenerate.
pub fn decode_output(head: &HeadSpec, output: &[f64]) -> Result<(f64, bool, bool), HarnessError> {
    let raw = match head.decode(output) {
        Ok(a) => a,
        Err(CodecError::PhaseOutOfRange { angle, .. }) => angle,
        Err(CodecError::DegenerateWave { .. }) => return Ok((0.0, false, true)),
        Err(e) => return Err(e.into()),
    };
    let phi_max = head.codec.phi_max();
    Ok((
        clamp_angle(raw, &head.codec).degrees(),
        raw.abs() > phi_max,
        false,
    ))
}

/// Runs stride-1 windows of every session through `predictor` and scores
/// the decoded angle series.
pub fn evaluate_with<P: AnglePredictor + ?Sized>(
    predictor: &P,
    sessions: &[Session],
    w: usize,
) -> Result<EvalReport, HarnessError> {
    let started = std::time::Instant::now();
    let head = *predictor.head();
    let mut clamp_count = 0;
    let mut degenerate_count = 0;
    let mut reports = Vec::with_capacity(sessions.len());
    for session in sessions {
        let windows = session.windows(w, 1)?;
        let mut predicted = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(EVAL_BATCH) {
            let slices: Vec<&[FrameRecord]> = chunk.iter().map(|s| s.window).collect();
            let out = predictor.predict(&slices)?;
            out.expect_matrix("predictor output", Some(chunk.len()), head.width())?;
            for r in 0..chunk.len() {
                let (angle, clamped, degenerate) = decode_output(&head, out.row(r))?;
                clamp_count += clamped as usize;
                degenerate_count += degenerate as usize;
                predicted.push(angle);
            }
        }
        let truth: Vec<f64> = windows.iter().map(|s| s.label.degrees()).collect();
        let timestamps: Vec<f64> = windows.iter().map(|s| s.window[w - 1].timestamp).collect();
        let dt = frame_interval(session)?;
        let truth_series = AngleSeries::new(truth.clone(), dt)?;
        let pred_series = AngleSeries::new(predicted.clone(), dt)?;
        reports.push(SessionReport {
            session: session.id,
            timestamps,
            rmse_deg: rmse(&truth_series, &pred_series)?,
            whiteness: whiteness(&pred_series)?,
            truth,
            predicted,
        });
    }
    let total: usize = reports.iter().map(SessionReport::frames).sum();
    if total == 0 {
        return Err(HarnessError::InvalidConfig(
            "no sessions to evaluate".into(),
        ));
    }
    let n = total as f64;
    let sq: f64 = reports
        .iter()
        .map(|r| r.rmse_deg.powi(2) * r.frames() as f64)
        .sum();
    let wh: f64 = reports
        .iter()
        .map(|r| r.whiteness * r.frames() as f64)
        .sum();
    Ok(EvalReport {
        rmse_deg: (sq / n).sqrt(),
        whiteness: wh / n,
        sessions: reports,
        clamp_count,
        degenerate_count,
        config_hash: String::new(),
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

pub fn evaluate_model(
    model: &Model,
    sessions: &[Session],
    w: usize,
) -> Result<EvalReport, HarnessError> {
    evaluate_with(model, sessions, w)
}

/// Evaluates a checkpoint, refusing one whose head was trained for a
/// different codec.
pub fn evaluate(
    checkpoint: &Checkpoint,
    sessions: &[Session],
    codec: &CodecConfig,
    w: usize,
) -> Result<EvalReport, HarnessError> {
    let head = checkpoint.model.head_spec();
    if head.codec != *codec {
        return Err(HarnessError::HeadCodecMismatch {
            checkpoint: head.codec,
            supplied: *codec,
        });
    }
    let mut report = evaluate_model(&checkpoint.model, sessions, w)?;
    report.config_hash = checkpoint
        .meta
        .get("config_hash")
        .cloned()
        .unwrap_or_default();
    Ok(report)
}

fn frame_interval(session: &Session) -> Result<f64, HarnessError> {
    let f = &session.frames;
    let dt = match (f.first(), f.last()) {
        (Some(a), Some(b)) if f.len() > 1 => (b.timestamp - a.timestamp) / (f.len() - 1) as f64,
        _ => 0.0,
    };
    if dt > 0.0 && dt.is_finite() {
        Ok(dt)
    } else {
        Err(HarnessError::InvalidConfig(format!(
            "session {} has no usable frame interval",
            session.id
        )))
    }
}

/// `metric,value,unit` summary. Wall-clock time is deliberately left out so
/// the file is reproducible.
pub fn write_report_csv<W: Write>(writer: W, report: &EvalReport) -> Result<(), HarnessError> {
    let rows = [
        MetricRow::new("rmse", report.rmse_deg, "deg"),
        MetricRow::new("whiteness", report.whiteness, "deg^2/s^2"),
        MetricRow::new("frames", report.frames() as f64, "count"),
        MetricRow::new("clamp_count", report.clamp_count as f64, "count"),
        MetricRow::new("degenerate_count", report.degenerate_count as f64, "count"),
    ];
    write_metric_csv(writer, &rows)?;
    Ok(())
}

/// One row per session: `session,frames,rmse_deg,whiteness`.
pub fn write_sessions_csv<W: Write>(writer: W, report: &EvalReport) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["session", "frames", "rmse_deg", "whiteness"])?;
    for s in &report.sessions {
        w.write_record([
            s.session.to_string(),
            s.frames().to_string(),
            s.rmse_deg.to_string(),
            s.whiteness.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Ground truth against prediction: `session,timestamp_s,truth_deg,predicted_deg`.
pub fn write_predictions_csv<W: Write>(writer: W, report: &EvalReport) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["session", "timestamp_s", "truth_deg", "predicted_deg"])?;
    for s in &report.sessions {
        for k in 0..s.frames() {
            w.write_record([
                s.session.to_string(),
                s.timestamps[k].to_string(),
                s.truth[k].to_string(),
                s.predicted[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
