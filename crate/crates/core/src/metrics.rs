//! Steering evaluation metrics: RMSE against ground truth and the whiteness
//! (mean squared time derivative) of a predicted angle series.

use std::io::Write;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series has {len} values, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
}

/// Uniformly sampled angle series in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries {
    values: Vec<f64>,
    dt: f64,
}

impl AngleSeries {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::SeriesTooShort { len: 0, min: 1 });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(MetricsError::InvalidSeries(format!(
                "dt {dt} must be positive"
            )));
        }
        Ok(Self { values, dt })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Finite-difference scheme used by [`whiteness_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffScheme {
    /// Central differences inside, one-sided at the ends, averaged over all
    /// `|D|` points.
    #[default]
    Central,
    /// Forward differences averaged over the `|D|-1` intervals.
    Forward,
}

pub fn rmse(ground: &AngleSeries, predicted: &AngleSeries) -> Result<f64, MetricsError> {
    if ground.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch(ground.len(), predicted.len()));
    }
    let sq: f64 = ground
        .values
        .iter()
        .zip(&predicted.values)
        .map(|(g, p)| (g - p) * (g - p))
        .sum();
    Ok((sq / ground.len() as f64).sqrt())
}

/// Whiteness with the default central scheme, in deg²/s².
pub fn whiteness(predicted: &AngleSeries) -> Result<f64, MetricsError> {
    whiteness_with(predicted, DiffScheme::Central)
}

pub fn whiteness_with(predicted: &AngleSeries, scheme: DiffScheme) -> Result<f64, MetricsError> {
    let p = &predicted.values;
    let n = p.len();
    if n < 3 {
        return Err(MetricsError::SeriesTooShort { len: n, min: 3 });
    }
    let dt = predicted.dt;
    match scheme {
        DiffScheme::Central => {
            let first = (p[1] - p[0]) / dt;
            let last = (p[n - 1] - p[n - 2]) / dt;
            let interior: f64 = p
                .windows(3)
                .map(|w| {
                    let d = (w[2] - w[0]) / (2.0 * dt);
                    d * d
                })
                .sum();
            Ok((first * first + interior + last * last) / n as f64)
        }
        DiffScheme::Forward => {
            let sq: f64 = p
                .windows(2)
                .map(|w| {
                    let d = (w[1] - w[0]) / dt;
                    d * d
                })
                .sum();
            Ok(sq / (n - 1) as f64)
        }
    }
}

/// One row of a `metric,value,unit` report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
    pub unit: &'static str,
}

impl MetricRow {
    pub fn new(metric: impl Into<String>, value: f64, unit: &'static str) -> Self {
        Self {
            metric: metric.into(),
            value,
            unit,
        }
    }
}

pub fn write_metric_csv<W: Write>(writer: W, rows: &[MetricRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| std::io::Error::other(e);
    w.write_record(["metric", "value", "unit"]).map_err(to_io)?;
    for row in rows {
        w.write_record([row.metric.as_str(), &row.value.to_string(), row.unit])
            .map_err(to_io)?;
    }
    w.flush()
}
