use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sinesteer::codec::CodecConfig;
use sinesteer::dataset::{
    load_labeled_series, make_windows, split_by_session, synth_scenario, write_features_csv,
    write_labels_csv, DatasetError, FrameRecord, ScenarioParams, Session,
};

fn scenario(length: usize, seed: u64) -> Vec<FrameRecord> {
    let params = ScenarioParams {
        length,
        seed,
        ..ScenarioParams::default()
    };
    synth_scenario(&params, &CodecConfig::default()).unwrap()
}

/// In-sample RMSE of the least-squares affine fit of `y` on the rows of `x`.
fn ols_rmse(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let cols = x[0].len() + 1;
    let design = DMatrix::from_fn(x.len(), cols, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let target = DVector::from_column_slice(y);
    let beta = design
        .clone()
        .svd(true, true)
        .solve(&target, 1e-12)
        .unwrap();
    let residual = design * beta - target;
    (residual.norm_squared() / y.len() as f64).sqrt()
}

#[test]
fn window_average_beats_single_frame_estimator() {
    let frames = scenario(2000, 7);
    let w = 10;
    let labels: Vec<f64> = frames[w - 1..].iter().map(|f| f.angle.degrees()).collect();
    let single: Vec<Vec<f64>> = frames[w - 1..].iter().map(|f| f.features.clone()).collect();
    let averaged: Vec<Vec<f64>> = frames
        .windows(w)
        .map(|win| {
            let dim = win[0].features.len();
            (0..dim)
                .map(|k| win.iter().map(|f| f.features[k]).sum::<f64>() / w as f64)
                .collect()
        })
        .collect();
    let single_rmse = ols_rmse(&single, &labels);
    let averaged_rmse = ols_rmse(&averaged, &labels);
    assert!(
        averaged_rmse < single_rmse,
        "{averaged_rmse} vs {single_rmse}"
    );
}

#[test]
fn noiseless_scenario_is_affine_solvable() {
    let params = ScenarioParams {
        observation_noise_sigma: 0.0,
        distractor_dim: 0,
        feature_dim: 4,
        ..ScenarioParams::default()
    };
    let frames = synth_scenario(&params, &CodecConfig::default()).unwrap();
    let x: Vec<Vec<f64>> = frames.iter().map(|f| f.features.clone()).collect();
    let y: Vec<f64> = frames.iter().map(|f| f.angle.degrees()).collect();
    assert!(ols_rmse(&x, &y) < 1e-9);
}

#[test]
fn angles_have_zero_mean() {
    let angles: Vec<f64> = (0..10)
        .flat_map(|s| scenario(2000, 100 + s))
        .map(|f| f.angle.degrees())
        .collect();
    let mean = angles.iter().sum::<f64>() / angles.len() as f64;
    // Frames within a session are strongly correlated, so the standard error
    // is taken over per-session means.
    let session_means: Vec<f64> = angles
        .chunks(2000)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let k = session_means.len() as f64;
    let var = session_means
        .iter()
        .map(|m| (m - mean).powi(2))
        .sum::<f64>()
        / (k - 1.0);
    let se = (var / k).sqrt();
    assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn split_examples() {
    let sessions = |lengths: &[usize]| -> Vec<Session> {
        lengths
            .iter()
            .enumerate()
            .map(|(id, &len)| Session::new(id, scenario(len, id as u64)))
            .collect()
    };
    let (train, test) = split_by_session(sessions(&[100, 50, 50]), 0.25).unwrap();
    assert_eq!(test.len(), 1);
    assert_eq!(test[0].len(), 50);
    assert_eq!(train.len(), 2);

    let (train, test) = split_by_session(sessions(&[20; 10]), 0.2).unwrap();
    assert_eq!(test.iter().map(|s| s.id).collect::<Vec<_>>(), [0, 1]);
    assert_eq!(train.len(), 8);

    assert!(matches!(
        split_by_session(sessions(&[20]), 0.5),
        Err(DatasetError::NotEnoughSessions(1))
    ));
}

#[test]
fn stride_ten_labels() {
    let frames = scenario(100, 3);
    let samples = make_windows(&frames, 10, 10).unwrap();
    assert_eq!(samples.len(), 10);
    for (k, s) in samples.iter().enumerate() {
        assert_eq!(s.label, frames[10 * k + 9].angle);
    }
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let frames = scenario(30, 5);
    let (fp, lp) = (dir.path().join("f.csv"), dir.path().join("l.csv"));
    write_features_csv(std::fs::File::create(&fp).unwrap(), &frames).unwrap();
    write_labels_csv(std::fs::File::create(&lp).unwrap(), &frames).unwrap();
    assert_eq!(
        load_labeled_series(&fp, &lp, &CodecConfig::default()).unwrap(),
        frames
    );

    write_labels_csv(std::fs::File::create(&lp).unwrap(), &frames[..29]).unwrap();
    assert!(matches!(
        load_labeled_series(&fp, &lp, &CodecConfig::default()),
        Err(DatasetError::RowCountMismatch {
            features: 30,
            labels: 29
        })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stride_one_labels_replay_the_series(len in 1usize..120, w in 1usize..20, seed in any::<u64>()) {
        prop_assume!(len >= w);
        let frames = scenario(len.max(2), seed);
        let frames = &frames[..len];
        let samples = make_windows(frames, w, 1).unwrap();
        let labels: Vec<_> = samples.iter().map(|s| s.label).collect();
        let tail: Vec<_> = frames[w - 1..].iter().map(|f| f.angle).collect();
        prop_assert_eq!(labels, tail);
        prop_assert!(samples.iter().all(|s| s.window.len() == w));
    }

    #[test]
    fn split_never_shares_frames(
        lengths in prop::collection::vec(12usize..80, 2..8),
        fraction in 0.05f64..0.95,
        w in 1usize..12,
    ) {
        let sessions: Vec<Session> = lengths
            .iter()
            .enumerate()
            .map(|(id, &len)| Session::new(id, scenario(len, id as u64)))
            .collect();
        let (train, test) = split_by_session(sessions, fraction).unwrap();
        prop_assert!(!train.is_empty() && !test.is_empty());
        let ids = |side: &[Session]| -> HashSet<(usize, usize)> {
            side.iter()
                .flat_map(|s| s.windows(w, 1).unwrap())
                .flat_map(|sample| sample.frame_ids().collect::<Vec<_>>())
                .collect()
        };
        prop_assert!(ids(&train).is_disjoint(&ids(&test)));
    }

    #[test]
    fn synthetic_angles_stay_in_range(phi_max in 10.0f64..400.0, smooth in 0.05f64..0.999, seed in any::<u64>()) {
        let params = ScenarioParams {
            length: 300,
            curvature_smoothness: smooth,
            seed,
            ..ScenarioParams::default()
        };
        let codec = CodecConfig::new(16, phi_max).unwrap();
        let frames = synth_scenario(&params, &codec).unwrap();
        prop_assert!(frames.iter().all(|f| f.angle.degrees().abs() <= phi_max));
    }
}
