//! Sensor-log preprocessing: low-pass filtering of the high-rate steering
//! signal, interpolation onto camera frame times, and integer-stride
//! downsampling to the training rate.

use std::f64::consts::PI;
use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")]
    InvalidCutoff { cutoff: f64, nyquist: f64 },
    #[error("frame {index} at t={timestamp}s lies outside the sensor log [{first}, {last}]")]
    FrameOutsideLog {
        index: usize,
        timestamp: f64,
        first: f64,
        last: f64,
    },
    #[error("target rate {target} Hz must lie in (0, {source_rate}] Hz")]
    InvalidRate { target: f64, source_rate: f64 },
    #[error("malformed file at row {row}: {reason}")]
    MalformedFile { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub timestamp: f64,
    pub angle: f64,
}

/// Raw steering-wheel readings at a nominal rate (CAN logs run around 100 Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLog {
    samples: Vec<Sample>,
    nominal_rate: f64,
}

impl SensorLog {
    pub fn new(samples: Vec<Sample>, nominal_rate: f64) -> Result<Self, SignalError> {
        if !(nominal_rate > 0.0 && nominal_rate.is_finite()) {
            return Err(SignalError::InvalidInput(format!(
                "nominal rate {nominal_rate} must be positive"
            )));
        }
        check_increasing(samples.iter().map(|s| s.timestamp))?;
        if samples.iter().any(|s| !s.angle.is_finite()) {
            return Err(SignalError::InvalidInput("non-finite angle".into()));
        }
        Ok(Self {
            samples,
            nominal_rate,
        })
    }

    /// Builds a log whose nominal rate is the mean sample rate.
    pub fn from_samples(samples: Vec<Sample>) -> Result<Self, SignalError> {
        let rate = mean_rate(samples.iter().map(|s| s.timestamp))?;
        Self::new(samples, rate)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn nominal_rate(&self) -> f64 {
        self.nominal_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Reads `timestamp_s,angle_deg` CSV.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SignalError> {
        let rows = read_rows(reader, &["timestamp_s", "angle_deg"])?;
        let samples = rows
            .into_iter()
            .map(|r| Sample {
                timestamp: r[0],
                angle: r[1],
            })
            .collect();
        Self::from_samples(samples)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SignalError> {
        write_pairs(
            writer,
            "timestamp_s",
            "angle_deg",
            self.samples.iter().map(|s| (s.timestamp, s.angle)),
        )
    }
}

/// Camera frame timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameClock {
    timestamps: Vec<f64>,
    rate: f64,
}

impl FrameClock {
    pub fn new(timestamps: Vec<f64>, rate: f64) -> Result<Self, SignalError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidInput(format!(
                "frame rate {rate} must be positive"
            )));
        }
        check_increasing(timestamps.iter().copied())?;
        Ok(Self { timestamps, rate })
    }

    /// Uniform clock of `count` frames starting at `start`.
    pub fn uniform(start: f64, rate: f64, count: usize) -> Result<Self, SignalError> {
        let timestamps = (0..count).map(|k| start + k as f64 / rate).collect();
        Self::new(timestamps, rate)
    }

    pub fn from_timestamps(timestamps: Vec<f64>) -> Result<Self, SignalError> {
        let rate = mean_rate(timestamps.iter().copied())?;
        Self::new(timestamps, rate)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Reads a single-column `timestamp_s` CSV.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SignalError> {
        let rows = read_rows(reader, &["timestamp_s"])?;
        Self::from_timestamps(rows.into_iter().map(|r| r[0]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledFrame {
    pub timestamp: f64,
    pub angle: f64,
}

/// One ground-truth angle per camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrameSeries {
    frames: Vec<LabeledFrame>,
    rate: f64,
}

impl LabeledFrameSeries {
    pub fn new(frames: Vec<LabeledFrame>, rate: f64) -> Result<Self, SignalError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidInput(format!(
                "frame rate {rate} must be positive"
            )));
        }
        check_increasing(frames.iter().map(|f| f.timestamp))?;
        Ok(Self { frames, rate })
    }

    pub fn frames(&self) -> &[LabeledFrame] {
        &self.frames
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.angle).collect()
    }

    /// Reads the `timestamp_s,angle_deg` labels format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SignalError> {
        let rows = read_rows(reader, &["timestamp_s", "angle_deg"])?;
        let rate = mean_rate(rows.iter().map(|r| r[0]))?;
        let frames = rows
            .into_iter()
            .map(|r| LabeledFrame {
                timestamp: r[0],
                angle: r[1],
            })
            .collect();
        Self::new(frames, rate)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SignalError> {
        write_pairs(
            writer,
            "timestamp_s",
            "angle_deg",
            self.frames.iter().map(|f| (f.timestamp, f.angle)),
        )
    }
}

/// Causal single-pole IIR smoother,
/// `y_t = α·x_t + (1-α)·y_{t-1}` with `α = dt / (dt + 1/(2π·cutoff))`.
///
/// `dt` is the actual interval to the previous sample, so irregular logs are
/// handled sample by sample.
pub fn lowpass(log: &SensorLog, cutoff: f64) -> Result<SensorLog, SignalError> {
    let nyquist = log.nominal_rate / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(SignalError::InvalidCutoff { cutoff, nyquist });
    }
    let Some(first) = log.samples.first() else {
        return Err(SignalError::InvalidInput("empty sensor log".into()));
    };
    let rc = 1.0 / (2.0 * PI * cutoff);
    let mut out = Vec::with_capacity(log.samples.len());
    out.push(*first);
    let mut y = first.angle;
    for pair in log.samples.windows(2) {
        let dt = pair[1].timestamp - pair[0].timestamp;
        let alpha = dt / (dt + rc);
        y += alpha * (pair[1].angle - y);
        out.push(Sample {
            timestamp: pair[1].timestamp,
            angle: y,
        });
    }
    Ok(SensorLog {
        samples: out,
        nominal_rate: log.nominal_rate,
    })
}

/// Linear interpolation of the log at every frame time.
pub fn resample_to_frames(
    log: &SensorLog,
    clock: &FrameClock,
) -> Result<LabeledFrameSeries, SignalError> {
    let samples = &log.samples;
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return Err(SignalError::InvalidInput("empty sensor log".into()));
    };
    let mut frames = Vec::with_capacity(clock.timestamps.len());
    for (index, &t) in clock.timestamps.iter().enumerate() {
        if !(t >= first.timestamp && t <= last.timestamp) {
            return Err(SignalError::FrameOutsideLog {
                index,
                timestamp: t,
                first: first.timestamp,
                last: last.timestamp,
            });
        }
        // First sample with timestamp >= t.
        let hi = samples.partition_point(|s| s.timestamp < t);
        let angle = if samples[hi].timestamp == t {
            samples[hi].angle
        } else {
            let (a, b) = (samples[hi - 1], samples[hi]);
            let frac = (t - a.timestamp) / (b.timestamp - a.timestamp);
            a.angle + frac * (b.angle - a.angle)
        };
        frames.push(LabeledFrame {
            timestamp: t,
            angle,
        });
    }
    LabeledFrameSeries::new(frames, clock.rate)
}

/// Keeps every `k`-th frame, `k = round(source_rate / target_rate)`,
/// starting with frame 0.
pub fn downsample(
    series: &LabeledFrameSeries,
    target_rate: f64,
) -> Result<LabeledFrameSeries, SignalError> {
    let source_rate = series.rate;
    // Relative slack so that e.g. 20.000000001 Hz → 20 Hz is accepted.
    if !(target_rate > 0.0 && target_rate <= source_rate * (1.0 + 1e-9)) {
        return Err(SignalError::InvalidRate {
            target: target_rate,
            source_rate,
        });
    }
    let stride = ((source_rate / target_rate).round() as usize).max(1);
    let frames = series.frames.iter().step_by(stride).copied().collect();
    Ok(LabeledFrameSeries {
        frames,
        rate: source_rate / stride as f64,
    })
}

fn check_increasing(ts: impl Iterator<Item = f64>) -> Result<(), SignalError> {
    let mut prev = f64::NEG_INFINITY;
    for (row, t) in ts.enumerate() {
        if !t.is_finite() || t <= prev {
            return Err(SignalError::InvalidInput(format!(
                "timestamps must be finite and strictly increasing (row {row})"
            )));
        }
        prev = t;
    }
    Ok(())
}

fn mean_rate(ts: impl Iterator<Item = f64>) -> Result<f64, SignalError> {
    let ts: Vec<f64> = ts.collect();
    match (ts.first(), ts.last()) {
        (Some(a), Some(b)) if ts.len() >= 2 && b > a => Ok((ts.len() - 1) as f64 / (b - a)),
        _ => Err(SignalError::InvalidInput(
            "need at least two increasing timestamps to infer a rate".into(),
        )),
    }
}

/// Parses a headed numeric CSV whose header must equal `header` exactly.
/// Row numbers in errors are 1-based data rows.
pub(crate) fn read_rows<R: Read>(reader: R, header: &[&str]) -> Result<Vec<Vec<f64>>, SignalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let got: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if got != header {
        return Err(SignalError::MalformedFile {
            row: 0,
            reason: format!(
                "expected header {}, got {}",
                header.join(","),
                got.join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| SignalError::MalformedFile {
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
                    .ok_or_else(|| SignalError::MalformedFile {
                        row,
                        reason: format!("non-numeric cell {cell:?}"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(values);
    }
    Ok(rows)
}

fn write_pairs<W: Write>(
    writer: W,
    a: &str,
    b: &str,
    rows: impl Iterator<Item = (f64, f64)>,
) -> Result<(), SignalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([a, b])?;
    for (x, y) in rows {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
