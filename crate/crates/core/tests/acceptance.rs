//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sinesteer::codec::{clamp_angle, decode, encode, CodecConfig, CodecError};
use sinesteer::harness::{
    build_data, check_provenance, compare, default_grid, evaluate, run_experiment, train, train_on,
    write_comparison_csv, write_history_csv, write_report_csv, CompareOptions, ComparisonTable,
    ExperimentConfig,
};
use sinesteer::metrics::{rmse, whiteness, AngleSeries};
use sinesteer::neural::{batch_loss, grad_check, Checkpoint, HeadKind, ModelKind};

use common::{clstm_fixture, noiseless_config, noisy_wave, tiny_config, GridOracle};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn codec_round_trip() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [5, 16, 95] {
        for phi_max in [90.0, 190.0] {
            let codec = CodecConfig::new(n, phi_max).unwrap();
            let steps = (2.0 * phi_max / 0.5) as usize;
            for k in 0..=steps {
                let phi = -phi_max + 0.5 * k as f64;
                let back = decode(&encode(phi, &codec).unwrap(), &codec).unwrap();
                worst = worst.max((back.angle.degrees() - phi).abs());
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst < 1e-9 && secs < 1.0,
        format!("max error {worst:.2e}, {secs:.3} s"),
    )
}

fn decoder_vs_grid_search() -> Outcome {
    let started = Instant::now();
    let codec = CodecConfig::default();
    let oracle = GridOracle::new(&codec, 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut clamped = 0;
    for _ in 0..1000 {
        let phi = rng.random_range(-190.0..=190.0);
        let wave = noisy_wave(phi, &codec, 0.1, &mut rng);
        let got = match decode(&wave, &codec) {
            Ok(out) => out.angle.degrees(),
            Err(CodecError::PhaseOutOfRange { angle, .. }) => {
                clamped += 1;
                clamp_angle(angle, &codec).degrees()
            }
            Err(e) => return outcome(false, e.to_string()),
        };
        worst = worst.max((got - oracle.best(&wave)).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst <= 0.02 && secs < 30.0,
        format!("max disagreement {worst:.4}°, {clamped} clamped, {secs:.1} s"),
    )
}

fn gradient_check() -> Outcome {
    let started = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for head in HeadKind::ALL {
        let (model, steps, targets) = clstm_fixture(head, 5, 6);
        let hs = *model.head_spec();
        let report = grad_check(&model, |o| batch_loss(&hs, o, &targets), &steps, 1e-5, 0).unwrap();
        pass &= report.max_relative_error < 1e-4;
        parts.push(format!("{head} {:.1e}", report.max_relative_error));
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        pass && secs < 120.0,
        format!("{}, {secs:.1} s", parts.join(", ")),
    )
}

fn metric_exactness() -> Outcome {
    let s = |v: Vec<f64>, dt| AngleSeries::new(v, dt).unwrap();
    let r = rmse(&s(vec![0.0, 0.0], 1.0), &s(vec![3.0, 4.0], 1.0)).unwrap();
    let flat = whiteness(&s(vec![12.0; 25], 0.5)).unwrap();
    let m = 7.25;
    let ramp = whiteness(&s((0..25).map(|i| m * i as f64 * 0.5).collect(), 0.5)).unwrap();
    let pass =
        (r - 3.535_533_905_932_737_6).abs() < 1e-12 && flat == 0.0 && (ramp - m * m).abs() < 1e-12;
    outcome(
        pass,
        format!("rmse {r:.10}, constant {flat}, ramp {ramp} vs {}", m * m),
    )
}

fn noiseless_learnability() -> Outcome {
    let started = Instant::now();
    let cfg = noiseless_config();
    let out = train(&cfg).unwrap();
    let best = out
        .history
        .iter()
        .map(|r| r.val_rmse_deg)
        .fold(f64::INFINITY, f64::min);
    let first = out
        .history
        .iter()
        .find(|r| r.val_rmse_deg < 1.0)
        .map(|r| r.epoch);
    let secs = started.elapsed().as_secs_f64();
    outcome(
        best < 1.0 && secs < 120.0,
        format!("best validation {best:.3}° (first below 1° at epoch {first:?}), {secs:.1} s"),
    )
}

fn whiteness_ordering(table: &ComparisonTable) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for head in HeadKind::ALL {
        match (
            table.cell(head, ModelKind::Feedforward),
            table.cell(head, ModelKind::CLstm),
        ) {
            (Some(ff), Some(lstm)) => {
                let ratio = lstm.whiteness / ff.whiteness;
                pass &= ratio < 0.6;
                parts.push(format!(
                    "{head} {:.1}/{:.1} = {ratio:.2}",
                    lstm.whiteness, ff.whiteness
                ));
            }
            _ => {
                pass = false;
                parts.push(format!("{head} failed"));
            }
        }
    }
    outcome(pass, parts.join(", "))
}

fn rmse_ordering(table: &ComparisonTable) -> Outcome {
    let get = |h| table.cell(h, ModelKind::CLstm).map(|c| c.rmse_deg);
    let (Some(sine), Some(reg), Some(nll)) = (
        get(HeadKind::SineWave),
        get(HeadKind::Regression),
        get(HeadKind::NllBins),
    ) else {
        return outcome(false, "a c_lstm cell failed");
    };
    let at_most = |a: f64, b: f64| a <= b * 1.02;
    outcome(
        at_most(sine, reg) && at_most(sine, nll),
        format!("c_lstm medians: sine {sine:.3}°, regression {reg:.3}°, nll {nll:.3}°"),
    )
}

fn determinism() -> Outcome {
    let artifacts = || {
        let cfg = tiny_config(ModelKind::CLstm, HeadKind::SineWave);
        let out = train(&cfg).unwrap();
        let mut history = Vec::new();
        write_history_csv(&mut history, &out.history).unwrap();
        let mut report = Vec::new();
        write_report_csv(&mut report, &run_experiment(&cfg, None).unwrap()).unwrap();
        let table = compare(
            &default_grid(&cfg),
            &CompareOptions {
                seeds: 2,
                cache_dir: None,
            },
        );
        let mut comparison = Vec::new();
        write_comparison_csv(&mut comparison, &table).unwrap();
        (
            out.checkpoint.to_text().into_bytes(),
            history,
            report,
            comparison,
        )
    };
    let (a, b) = (artifacts(), artifacts());
    outcome(a == b, "checkpoint, history, report and comparison bytes")
}

fn no_leakage() -> Outcome {
    let cfg = ExperimentConfig::default();
    let data = build_data(&cfg).unwrap();
    let ids = |sessions: &[&sinesteer::dataset::Session]| -> HashSet<(usize, usize)> {
        sessions
            .iter()
            .flat_map(|s| s.windows(cfg.w, 1).unwrap())
            .flat_map(|w| w.frame_ids().collect::<Vec<_>>())
            .collect()
    };
    let train_refs: Vec<_> = data.train.iter().collect();
    let test_refs: Vec<_> = data.test.iter().chain([&data.validation]).collect();
    let (train_ids, test_ids) = (ids(&train_refs), ids(&test_refs));
    let shared = train_ids.intersection(&test_ids).count();
    let samples: Vec<_> = data
        .train
        .iter()
        .flat_map(|s| s.windows(cfg.w, cfg.stride).unwrap())
        .collect();
    let audit = check_provenance(&samples, &test_refs);
    outcome(
        shared == 0 && audit.is_ok(),
        format!(
            "{} train frames, {} held-out frames, {shared} shared",
            train_ids.len(),
            test_ids.len()
        ),
    )
}

fn checkpoint_round_trip() -> Outcome {
    let mut cfg = tiny_config(ModelKind::CLstm, HeadKind::SineWave);
    cfg.scenario.length = 200;
    cfg.epochs = 3;
    let data = build_data(&cfg).unwrap();
    let ck = train_on(&cfg, &data).unwrap().checkpoint;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("round_trip.ckpt");
    ck.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    let before = evaluate(&ck, &data.test, cfg.codec(), cfg.w).unwrap();
    let after = evaluate(&loaded, &data.test, cfg.codec(), cfg.w).unwrap();
    let bits = |r: &sinesteer::harness::EvalReport| -> Vec<u64> {
        r.sessions
            .iter()
            .flat_map(|s| s.predicted.iter().map(|p| p.to_bits()))
            .collect()
    };
    outcome(
        before.same_results(&after) && bits(&before) == bits(&after),
        format!("{} predictions compared bitwise", before.frames()),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut run = |id, name, f: &dyn Fn() -> Outcome| {
        let o = f();
        println!(
            "{} {id:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o));
    };
    run(1, "codec round-trip", &codec_round_trip);
    run(2, "decoder vs grid search", &decoder_vs_grid_search);
    run(3, "gradient check", &gradient_check);
    run(4, "metric exactness", &metric_exactness);
    run(5, "noiseless learnability", &noiseless_learnability);

    let started = Instant::now();
    let table = compare(
        &default_grid(&ExperimentConfig::default()),
        &CompareOptions {
            seeds: 3,
            cache_dir: None,
        },
    );
    let secs = started.elapsed().as_secs_f64();
    run(6, "whiteness ordering", &|| {
        let o = whiteness_ordering(&table);
        outcome(
            o.pass && secs < 1800.0,
            format!("{}, {secs:.0} s", o.detail),
        )
    });
    run(7, "rmse ordering", &|| rmse_ordering(&table));
    run(8, "determinism", &determinism);
    run(9, "no leakage", &no_leakage);
    run(10, "checkpoint round-trip", &checkpoint_round_trip);

    let failed = results.iter().filter(|(.., o)| !o.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
