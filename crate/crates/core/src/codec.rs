//! Steering-angle codecs for classification-style output layers.
//!
//! The sine codec represents an angle `φ ∈ [-φ_max, φ_max]` as the phase shift
//! of one full sine period sampled across `N` output neurons:
//!
//! ```text
//! Y_i = sin(2π(i-1)/(N-1) - φπ/(2φ_max)),   i = 1..N
//! ```
//!
//! Decoding fits `a·sin θ - b·cos θ` to an arbitrary activation vector by
//! linear least squares and reads the phase off `atan2(b, a)`.
//!
//! The bin codec is the plain classification baseline: `N` uniform bins, a
//! one-hot (or Gaussian-smoothed) target, and expected-value decoding.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Deref;

use thiserror::Error;

/// Waves with a fitted amplitude below this carry no usable phase.
pub const MIN_AMPLITUDE: f64 = 1e-6;

/// Slack allowed on |ψ| ≤ π/2 before a decoded phase counts as out of range.
pub const PHASE_TOLERANCE: f64 = 1e-9;

/// Slack allowed on a bin distribution's sum and sign.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

/// Default label-smoothing variance for the bin codec, in deg².
pub const DEFAULT_SMOOTHING_VARIANCE: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("codec needs at least 4 neurons, got {0}")]
    TooFewNeurons(usize),
    #[error("phi_max must be positive and finite, got {0}")]
    InvalidPhiMax(f64),
    #[error("angle {angle}° outside [-{phi_max}°, {phi_max}°]")]
    AngleOutOfRange { angle: f64, phi_max: f64 },
    #[error("wave has {got} values, codec expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("wave amplitude {amplitude:e} too small to carry a phase")]
    DegenerateWave { amplitude: f64 },
    /// The fitted phase maps outside `[-φ_max, φ_max]`. `angle` is the raw
    /// decoded value so callers can clamp explicitly.
    #[error("decoded angle {angle}° lies outside ±{phi_max}°")]
    PhaseOutOfRange { angle: f64, phi_max: f64 },
    #[error("invalid bin distribution: {0}")]
    InvalidDistribution(String),
    #[error("smoothing variance must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
}

/// Number of output neurons and the extreme steering angle they cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecConfig {
    n_neurons: usize,
    phi_max: f64,
}

impl CodecConfig {
    pub fn new(n_neurons: usize, phi_max: f64) -> Result<Self, CodecError> {
        if n_neurons < 4 {
            return Err(CodecError::TooFewNeurons(n_neurons));
        }
        if !(phi_max > 0.0 && phi_max.is_finite()) {
            return Err(CodecError::InvalidPhiMax(phi_max));
        }
        Ok(Self { n_neurons, phi_max })
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn phi_max(&self) -> f64 {
        self.phi_max
    }

    /// Width of one classification bin, `2·φ_max / N`.
    pub fn bin_width(&self) -> f64 {
        2.0 * self.phi_max / self.n_neurons as f64
    }

    /// Lower edge of 0-based bin `k`; `bin_edge(N)` is `+φ_max`.
    pub fn bin_edge(&self, k: usize) -> f64 {
        -self.phi_max + k as f64 * self.bin_width()
    }

    /// Midpoint of 0-based bin `k`.
    pub fn bin_center(&self, k: usize) -> f64 {
        -self.phi_max + (k as f64 + 0.5) * self.bin_width()
    }

    /// Sampling phase of 0-based neuron `k`: `2πk/(N-1)`.
    pub fn neuron_phase(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / (self.n_neurons - 1) as f64
    }

    /// Checks that `angle` is a valid steering angle under this codec.
    pub fn angle(&self, angle: f64) -> Result<SteeringAngle, CodecError> {
        if angle.is_finite() && angle.abs() <= self.phi_max {
            Ok(SteeringAngle(angle))
        } else {
            Err(CodecError::AngleOutOfRange {
                angle,
                phi_max: self.phi_max,
            })
        }
    }
}

impl Default for CodecConfig {
    /// 95 neurons over ±190°, i.e. 4° bins.
    fn default() -> Self {
        Self {
            n_neurons: 95,
            phi_max: 190.0,
        }
    }
}

/// Steering-wheel angle in degrees, known to lie within some codec's ±φ_max.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SteeringAngle(f64);

impl SteeringAngle {
    pub fn degrees(self) -> f64 {
        self.0
    }
}

impl From<SteeringAngle> for f64 {
    fn from(a: SteeringAngle) -> f64 {
        a.0
    }
}

/// Output-layer activations encoding an angle as a sine phase shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationWave(Vec<f64>);

impl ActivationWave {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ActivationWave {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeResult {
    pub angle: SteeringAngle,
    /// Amplitude of the fitted sinusoid.
    pub amplitude: f64,
    /// RMS misfit between the input and the fitted sinusoid.
    pub residual_rmse: f64,
}

/// Unchecked least-squares sinusoid fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFit {
    /// Phase shift ψ in radians, in (-π, π].
    pub phase: f64,
    pub amplitude: f64,
    pub residual_rmse: f64,
}

/// Probability mass over the `N` classification bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinDistribution(Vec<f64>);

impl BinDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for BinDistribution {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Encodes `angle` (degrees) as a sine wave sampled across the output neurons.
pub fn encode(angle: f64, config: &CodecConfig) -> Result<ActivationWave, CodecError> {
    let angle = config.angle(angle)?;
    let shift = angle.degrees() * PI / (2.0 * config.phi_max);
    let values = (0..config.n_neurons)
        .map(|k| (config.neuron_phase(k) - shift).sin())
        .collect();
    Ok(ActivationWave(values))
}

/// Least-squares fit of `a·sin θ_i - b·cos θ_i` to `wave`, with no range or
/// amplitude checks. Most callers want [`decode`].
pub fn fit_phase(wave: &[f64], config: &CodecConfig) -> Result<PhaseFit, CodecError> {
    let n = config.n_neurons;
    if wave.len() != n {
        return Err(CodecError::LengthMismatch {
            expected: n,
            got: wave.len(),
        });
    }

    // Normal equations for y ≈ a·s + u·c with u = -b.
    let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, &y) in wave.iter().enumerate() {
        let (s, c) = config.neuron_phase(k).sin_cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        ys += y * s;
        yc += y * c;
    }
    let det = ss * cc - sc * sc;
    let a = (ys * cc - yc * sc) / det;
    let u = (yc * ss - ys * sc) / det;
    let b = -u;

    let sq: f64 = wave
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let (s, c) = config.neuron_phase(k).sin_cos();
            let r = y - (a * s + u * c);
            r * r
        })
        .sum();

    Ok(PhaseFit {
        phase: b.atan2(a),
        amplitude: a.hypot(b),
        residual_rmse: (sq / n as f64).sqrt(),
    })
}

/// Recovers the steering angle whose encoding best matches `wave`.
pub fn decode(wave: &[f64], config: &CodecConfig) -> Result<DecodeResult, CodecError> {
    let fit = fit_phase(wave, config)?;
    if fit.amplitude.is_nan() || fit.amplitude < MIN_AMPLITUDE {
        return Err(CodecError::DegenerateWave {
            amplitude: fit.amplitude,
        });
    }
    let raw = 2.0 * config.phi_max * fit.phase / PI;
    if fit.phase.abs() > FRAC_PI_2 + PHASE_TOLERANCE {
        return Err(CodecError::PhaseOutOfRange {
            angle: raw,
            phi_max: config.phi_max,
        });
    }
    Ok(DecodeResult {
        // Only the tolerance band can exceed φ_max here.
        angle: SteeringAngle(raw.clamp(-config.phi_max, config.phi_max)),
        amplitude: fit.amplitude,
        residual_rmse: fit.residual_rmse,
    })
}

/// 0-based bin holding `angle`. Bins are half-open `[edge_k, edge_{k+1})`
/// except the last, which also takes `+φ_max`.
pub fn bin_index(angle: SteeringAngle, config: &CodecConfig) -> usize {
    let n = config.n_neurons;
    let phi = angle.degrees();
    let guess = ((phi + config.phi_max) / config.bin_width()).floor();
    let mut k = (guess.max(0.0) as usize).min(n - 1);
    // Correct floating-point slop against the edges as bin_edge computes them.
    while k + 1 < n && phi >= config.bin_edge(k + 1) {
        k += 1;
    }
    while k > 0 && phi < config.bin_edge(k) {
        k -= 1;
    }
    k
}

/// Classification target for `angle`: one-hot without smoothing, otherwise a
/// Gaussian of the given variance (deg²) sampled at bin centers and
/// renormalised.
pub fn encode_bins(
    angle: f64,
    config: &CodecConfig,
    smoothing_variance: Option<f64>,
) -> Result<BinDistribution, CodecError> {
    let angle = config.angle(angle)?;
    let n = config.n_neurons;
    match smoothing_variance {
        None => {
            let mut probs = vec![0.0; n];
            probs[bin_index(angle, config)] = 1.0;
            Ok(BinDistribution(probs))
        }
        Some(var) => {
            if !(var > 0.0 && var.is_finite()) {
                return Err(CodecError::InvalidSmoothing(var));
            }
            let phi = angle.degrees();
            let mut probs: Vec<f64> = (0..n)
                .map(|k| {
                    let d = config.bin_center(k) - phi;
                    (-0.5 * d * d / var).exp()
                })
                .collect();
            let total: f64 = probs.iter().sum();
            if total > 0.0 {
                probs.iter_mut().for_each(|p| *p /= total);
            } else {
                // Narrower than float range: collapse onto the containing bin.
                probs.iter_mut().for_each(|p| *p = 0.0);
                probs[bin_index(angle, config)] = 1.0;
            }
            Ok(BinDistribution(probs))
        }
    }
}

/// Probability-weighted mean of the bin centers.
pub fn decode_expected(probs: &[f64], config: &CodecConfig) -> Result<SteeringAngle, CodecError> {
    let n = config.n_neurons;
    if probs.len() != n {
        return Err(CodecError::LengthMismatch {
            expected: n,
            got: probs.len(),
        });
    }
    if let Some((k, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < -DISTRIBUTION_TOLERANCE)
    {
        return Err(CodecError::InvalidDistribution(format!(
            "bin {k} has probability {p}"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(CodecError::InvalidDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    let mean: f64 = probs
        .iter()
        .enumerate()
        .map(|(k, p)| p * config.bin_center(k))
        .sum();
    Ok(SteeringAngle(mean.clamp(-config.phi_max, config.phi_max)))
}

/// Saturates `angle` to `[-φ_max, φ_max]`.
pub fn clamp_angle(angle: f64, config: &CodecConfig) -> SteeringAngle {
    SteeringAngle(angle.clamp(-config.phi_max, config.phi_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn default_codec() -> CodecConfig {
        CodecConfig::default()
    }

    #[test]
    fn config_rejects_bad_values() {
        assert_eq!(CodecConfig::new(3, 90.0), Err(CodecError::TooFewNeurons(3)));
        assert!(matches!(
            CodecConfig::new(8, 0.0),
            Err(CodecError::InvalidPhiMax(_))
        ));
        assert!(CodecConfig::new(4, 1.0).is_ok());
    }

    #[test]
    fn encode_zero_starts_at_zero() {
        let wave = encode(0.0, &default_codec()).unwrap();
        assert_eq!(wave.len(), 95);
        assert_eq!(wave[0], 0.0);
    }

    #[test]
    fn encode_extreme_is_quarter_period() {
        for n in [4, 7, 95] {
            let codec = CodecConfig::new(n, 190.0).unwrap();
            let wave = encode(190.0, &codec).unwrap();
            assert_abs_diff_eq!(wave[0], -1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn encode_five_neurons() {
        let codec = CodecConfig::new(5, 90.0).unwrap();
        let wave = encode(90.0, &codec).unwrap();
        // sin(kπ/2 - π/2) for k = 0..4
        let oracle: Vec<f64> = (0..5)
            .map(|k| (k as f64 * PI / 2.0 - PI / 2.0).sin())
            .collect();
        for (got, want) in wave.iter().zip([-1.0, 0.0, 1.0, 0.0, -1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        for (got, want) in wave.iter().zip(oracle) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn encode_rejects_out_of_range() {
        assert!(matches!(
            encode(190.5, &default_codec()),
            Err(CodecError::AngleOutOfRange { .. })
        ));
        assert!(encode(f64::NAN, &default_codec()).is_err());
    }

    #[test]
    fn round_trip_one_degree_grid() {
        let codec = default_codec();
        for deg in -190..=190 {
            let phi = deg as f64;
            let out = decode(&encode(phi, &codec).unwrap(), &codec).unwrap();
            assert!((out.angle.degrees() - phi).abs() < 1e-9, "{phi}");
            assert!((out.amplitude - 1.0).abs() < 1e-9);
            assert!(out.residual_rmse < 1e-9);
        }
    }

    #[test]
    fn decode_zero_wave_is_degenerate() {
        let codec = default_codec();
        assert!(matches!(
            decode(&[0.0; 95], &codec),
            Err(CodecError::DegenerateWave { .. })
        ));
    }

    #[test]
    fn decode_wrong_length() {
        assert_eq!(
            decode(&[1.0; 10], &default_codec()),
            Err(CodecError::LengthMismatch {
                expected: 95,
                got: 10
            })
        );
    }

    #[test]
    fn decode_flags_out_of_range_phase() {
        // Phase shift of 3π/4 corresponds to 285°.
        let codec = default_codec();
        let wave: Vec<f64> = (0..95)
            .map(|k| (codec.neuron_phase(k) - 0.75 * PI).sin())
            .collect();
        match decode(&wave, &codec) {
            Err(CodecError::PhaseOutOfRange { angle, .. }) => {
                assert_abs_diff_eq!(angle, 285.0, epsilon = 1e-9);
                assert_eq!(clamp_angle(angle, &codec).degrees(), 190.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bins_center_and_edges() {
        let codec = default_codec();
        let d = encode_bins(0.0, &codec, None).unwrap();
        // 1-based bin 48
        assert_eq!(d.iter().position(|&p| p == 1.0), Some(47));
        let d = encode_bins(-190.0, &codec, None).unwrap();
        assert_eq!(d[0], 1.0);
        let d = encode_bins(190.0, &codec, None).unwrap();
        assert_eq!(d[94], 1.0);
        // A shared edge goes to the higher bin.
        let edge = codec.bin_edge(10);
        assert_eq!(bin_index(codec.angle(edge).unwrap(), &codec), 10);
    }

    #[test]
    fn smoothed_bins_symmetric_about_center() {
        let codec = default_codec();
        let d = encode_bins(0.0, &codec, Some(80.0)).unwrap();
        assert_abs_diff_eq!(d.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        for k in 1..=47 {
            assert_abs_diff_eq!(d[47 - k], d[47 + k], epsilon = 1e-12);
        }
        assert!(d[47] > d[46]);
    }

    #[test]
    fn expected_value_decoding() {
        let codec = default_codec();
        let mut probs = vec![0.0; 95];
        probs[10] = 1.0;
        assert_eq!(
            decode_expected(&probs, &codec).unwrap().degrees(),
            codec.bin_center(10)
        );
        let uniform = vec![1.0 / 95.0; 95];
        assert_abs_diff_eq!(
            decode_expected(&uniform, &codec).unwrap().degrees(),
            0.0,
            epsilon = 1e-12
        );
        let mut ends = vec![0.0; 95];
        ends[0] = 0.5;
        ends[94] = 0.5;
        assert_eq!(codec.bin_center(0), -188.0);
        assert_eq!(codec.bin_center(94), 188.0);
        assert_abs_diff_eq!(
            decode_expected(&ends, &codec).unwrap().degrees(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn expected_value_rejects_bad_distributions() {
        let codec = default_codec();
        assert!(matches!(
            decode_expected(&vec![0.5; 95], &codec),
            Err(CodecError::InvalidDistribution(_))
        ));
        let mut neg = vec![0.0; 95];
        neg[0] = 1.1;
        neg[1] = -0.1;
        assert!(matches!(
            decode_expected(&neg, &codec),
            Err(CodecError::InvalidDistribution(_))
        ));
    }

    #[test]
    fn clamping() {
        let codec = default_codec();
        assert_eq!(clamp_angle(200.0, &codec).degrees(), 190.0);
        assert_eq!(clamp_angle(-500.0, &codec).degrees(), -190.0);
        assert_eq!(clamp_angle(10.0, &codec).degrees(), 10.0);
    }
}
