mod common;

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sinesteer::codec::{decode, decode_expected, encode, encode_bins, CodecConfig, CodecError};

use common::{noisy_wave, GridOracle};

fn codec_strategy() -> impl Strategy<Value = CodecConfig> {
    (4usize..200, 1.0f64..720.0).prop_map(|(n, phi)| CodecConfig::new(n, phi).unwrap())
}

fn codec_and_angle() -> impl Strategy<Value = (CodecConfig, f64)> {
    codec_strategy().prop_flat_map(|c| (Just(c), -c.phi_max()..=c.phi_max()))
}

fn wave_distance(a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (sq / a.len() as f64).sqrt()
}

proptest! {
    #[test]
    fn round_trip_is_exact((codec, phi) in codec_and_angle()) {
        let wave = encode(phi, &codec).unwrap();
        prop_assert_eq!(wave.len(), codec.n_neurons());
        prop_assert!(wave.iter().all(|v| v.abs() <= 1.0));
        let out = decode(&wave, &codec).unwrap();
        prop_assert!((out.angle.degrees() - phi).abs() < 1e-9);
        prop_assert!((out.amplitude - 1.0).abs() < 1e-9);
        prop_assert!(out.residual_rmse < 1e-9);
    }

    #[test]
    fn decode_ignores_gain((codec, phi) in codec_and_angle(), gain in 1e-5f64..1e4) {
        let wave = encode(phi, &codec).unwrap();
        let scaled: Vec<f64> = wave.iter().map(|v| v * gain).collect();
        let a = decode(&wave, &codec).unwrap().angle.degrees();
        let b = decode(&scaled, &codec).unwrap().angle.degrees();
        prop_assert!((a - b).abs() < 1e-9 * codec.phi_max().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn waveform_distance_grows_with_angle_gap(
        (codec, phi) in codec_and_angle(),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        // Two partners on the same side of `phi`, at increasing gaps.
        let (near, far) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let room = codec.phi_max() - phi;
        let base = encode(phi, &codec).unwrap();
        let d_near = wave_distance(&base, &encode(phi + near * room, &codec).unwrap());
        let d_far = wave_distance(&base, &encode(phi + far * room, &codec).unwrap());
        prop_assert!(d_near <= d_far + 1e-12, "{} > {}", d_near, d_far);
    }

    #[test]
    fn bin_decoding_within_half_bin((codec, phi) in codec_and_angle()) {
        let probs = encode_bins(phi, &codec, None).unwrap();
        let back = decode_expected(&probs, &codec).unwrap().degrees();
        prop_assert!((back - phi).abs() <= codec.bin_width() / 2.0 + 1e-9);
    }

    #[test]
    fn bin_distributions_are_valid(
        (codec, phi) in codec_and_angle(),
        var in prop::option::of(0.01f64..1e4),
    ) {
        let probs = encode_bins(phi, &codec, var).unwrap();
        prop_assert!(probs.iter().all(|p| *p >= 0.0));
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noisy_decode_matches_grid_search(phi in -190.0f64..=190.0, sigma in 0.0f64..=0.3, seed in any::<u64>()) {
        let codec = CodecConfig::default();
        let oracle = GridOracle::new(&codec, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wave = noisy_wave(phi, &codec, sigma, &mut rng);
        match decode(&wave, &codec) {
            Ok(out) => prop_assert!((out.angle.degrees() - oracle.best(&wave)).abs() <= 0.01),
            // Noise can push an extreme angle just past the range.
            Err(CodecError::PhaseOutOfRange { angle, .. }) => prop_assert!(angle.abs() > 190.0),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}

#[test]
fn noisy_42_degrees_within_a_tenth_of_oracle() {
    let codec = CodecConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let wave = noisy_wave(42.0, &codec, 0.1, &mut rng);
    let got = decode(&wave, &codec).unwrap().angle.degrees();
    let want = GridOracle::new(&codec, 0.01).best(&wave);
    assert!((got - want).abs() < 0.1, "{got} vs {want}");
}

#[test]
fn first_sample_follows_the_shift() {
    // Neuron 0 samples sin(-φ·π/(2φ_max)).
    let codec = CodecConfig::new(16, 90.0).unwrap();
    for phi in [-90.0, -30.0, 0.0, 45.0, 90.0] {
        let wave = encode(phi, &codec).unwrap();
        assert_abs_diff_eq!(wave[0], (-phi * PI / 180.0).sin(), epsilon = 1e-15);
    }
}

#[test]
fn zero_wave_is_degenerate() {
    let codec = CodecConfig::new(16, 90.0).unwrap();
    assert!(matches!(
        decode(&[0.0; 16], &codec),
        Err(CodecError::DegenerateWave { .. })
    ));
}

#[test]
fn central_bin_is_48th() {
    let codec = CodecConfig::default();
    let probs = encode_bins(0.0, &codec, None).unwrap();
    // Bins are 4° wide starting at -190°, so 0° sits in [-2°, 2°).
    let edges: Vec<f64> = (0..=95).map(|k| -190.0 + 4.0 * k as f64).collect();
    let oracle = edges
        .windows(2)
        .position(|e| e[0] <= 0.0 && 0.0 < e[1])
        .unwrap();
    assert_eq!(oracle, 47);
    assert_eq!(probs[oracle], 1.0);
}

#[test]
fn extreme_bins_average_to_zero() {
    let codec = CodecConfig::default();
    let mut probs = vec![0.0; 95];
    probs[0] = 0.5;
    probs[94] = 0.5;
    assert_abs_diff_eq!(
        decode_expected(&probs, &codec).unwrap().degrees(),
        0.0,
        epsilon = 1e-12
    );
}
