use std::fs::{self, File};
use std::io::{self, BufWriter, Read};
use std::path::{Path, PathBuf};

use clap::Args;

use sinesteer::codec::{clamp_angle, decode, encode, encode_bins, CodecConfig, CodecError};
use sinesteer::dataset::{
    load_labeled_series, synth_scenario, write_features_csv, write_labels_csv, Session,
};
use sinesteer::harness::{
    build_data, compare as run_compare, default_grid, evaluate, train_on, write_comparison_csv,
    write_history_csv, write_predictions_csv, write_report_csv, write_sessions_csv, CompareOptions,
    ExperimentConfig,
};
use sinesteer::kv;
use sinesteer::metrics::{write_metric_csv, MetricRow};
use sinesteer::neural::{Checkpoint, HeadKind, ModelKind};
use sinesteer::signal::{downsample, lowpass, resample_to_frames, FrameClock, SensorLog};

use crate::error::CliError;
use crate::Common;

fn experiment_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::from(e).context(path.display()))?;
            ExperimentConfig::from_text(&text)
                .map_err(|e| CliError::from(e).context(path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<PathBuf, CliError> {
    let dir = common
        .out
        .clone()
        .ok_or_else(|| CliError::usage("this subcommand writes files and needs --out <dir>"))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::from(e).context(dir.display()))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::from(e).context(path.display()))
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn codec_from(
    n: Option<usize>,
    phi_max: Option<f64>,
    common: &Common,
) -> Result<CodecConfig, CliError> {
    let base = experiment_config(common)?;
    let n = n.unwrap_or(base.codec().n_neurons());
    let phi_max = phi_max.unwrap_or(base.codec().phi_max());
    CodecConfig::new(n, phi_max).map_err(|e| CliError::usage(e.to_string()))
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Number of sessions to generate.
    #[arg(long, default_value_t = 1)]
    sessions: usize,
    /// Frames per session.
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    smoothness: Option<f64>,
    #[arg(long)]
    distractors: Option<usize>,
}

/// Writes `session{i}_features.csv` and `session{i}_labels.csv`. Session `i`
/// is the same session the harness would generate from the same config.
pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg = experiment_config(&a.common)?;
    if let Some(seed) = a.common.seed {
        cfg.scenario.seed = seed;
    }
    let s = &mut cfg.scenario;
    s.length = a.length.unwrap_or(s.length);
    s.feature_dim = a.feature_dim.unwrap_or(s.feature_dim);
    s.observation_noise_sigma = a.noise_sigma.unwrap_or(s.observation_noise_sigma);
    s.curvature_smoothness = a.smoothness.unwrap_or(s.curvature_smoothness);
    s.distractor_dim = a.distractors.unwrap_or(s.distractor_dim);
    if a.sessions == 0 {
        return Err(CliError::usage("--sessions must be at least 1"));
    }
    let dir = out_dir(&a.common)?;
    for i in 0..a.sessions {
        let frames = synth_scenario(&cfg.session_scenario(i), cfg.codec())?;
        write_features_csv(
            create(&dir.join(format!("session{i}_features.csv")))?,
            &frames,
        )?;
        write_labels_csv(
            create(&dir.join(format!("session{i}_labels.csv")))?,
            &frames,
        )?;
    }
    println!("wrote {} session(s) to {}", a.sessions, dir.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[command(flatten)]
    common: Common,
    /// Sensor log CSV (`timestamp_s,angle_deg`).
    #[arg(long)]
    log: PathBuf,
    /// Frame clock CSV (`timestamp_s`). Without it a uniform clock at
    /// `--frame-rate` spanning the log is used.
    #[arg(long)]
    clock: Option<PathBuf>,
    /// Uniform camera frame rate in Hz [default: 20].
    #[arg(long)]
    frame_rate: Option<f64>,
    /// Low-pass cutoff in Hz [default: 1].
    #[arg(long)]
    cutoff: Option<f64>,
    /// Output rate in Hz [default: 2].
    #[arg(long)]
    target_rate: Option<f64>,
}

/// Writes `labels.csv`. Config keys: `cutoff`, `frame_rate`, `target_rate`.
pub fn prep(a: PrepArgs) -> Result<(), CliError> {
    let mut file_cfg = match &a.common.config {
        Some(p) => kv::parse(&fs::read_to_string(p)?)?,
        None => kv::KvMap::new(),
    };
    let cutoff = a
        .cutoff
        .or(kv::take(&mut file_cfg, "cutoff")?)
        .unwrap_or(1.0);
    let frame_rate = a
        .frame_rate
        .or(kv::take(&mut file_cfg, "frame_rate")?)
        .unwrap_or(20.0);
    let target_rate = a
        .target_rate
        .or(kv::take(&mut file_cfg, "target_rate")?)
        .unwrap_or(2.0);
    kv::reject_unknown(&file_cfg)?;
    let dir = out_dir(&a.common)?;

    let log = SensorLog::read_csv(open(&a.log)?)
        .map_err(|e| CliError::from(e).context(a.log.display()))?;
    let clock = match &a.clock {
        Some(p) => {
            FrameClock::read_csv(open(p)?).map_err(|e| CliError::from(e).context(p.display()))?
        }
        None => {
            let (first, last) = match (log.samples().first(), log.samples().last()) {
                (Some(f), Some(l)) => (f.timestamp, l.timestamp),
                _ => return Err(CliError::data("empty sensor log")),
            };
            let count = ((last - first) * frame_rate + 1e-9).floor() as usize + 1;
            FrameClock::uniform(first, frame_rate, count)?
        }
    };
    let smoothed = lowpass(&log, cutoff)?;
    let frames = resample_to_frames(&smoothed, &clock)?;
    let labels = downsample(&frames, target_rate)?;
    labels.write_csv(create(&dir.join("labels.csv"))?)?;
    println!(
        "{} frames at {} Hz -> {}",
        labels.len(),
        labels.rate(),
        dir.join("labels.csv").display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    common: Common,
    /// Steering angle in degrees.
    #[arg(long, allow_negative_numbers = true)]
    angle: f64,
    /// Number of output neurons [default: 95].
    #[arg(long)]
    n: Option<usize>,
    /// Extreme steering angle in degrees [default: 190].
    #[arg(long)]
    phi_max: Option<f64>,
    /// Emit the bin distribution of the softmax baseline instead.
    #[arg(long)]
    bins: bool,
    /// Gaussian label-smoothing variance (deg²) for --bins, or `none`.
    #[arg(long, default_value = "none")]
    smoothing: String,
}

pub fn codec_encode(a: EncodeArgs) -> Result<(), CliError> {
    let codec = codec_from(a.n, a.phi_max, &a.common)?;
    let (values, header) = if a.bins {
        let smoothing = match a.smoothing.as_str() {
            "none" => None,
            s => Some(s.parse::<f64>().map_err(|_| {
                CliError::usage(format!("--smoothing expects a number or `none`, got {s:?}"))
            })?),
        };
        (
            encode_bins(a.angle, &codec, smoothing)?.into_inner(),
            ["bin", "probability"],
        )
    } else {
        (
            encode(a.angle, &codec)?.into_inner(),
            ["neuron", "activation"],
        )
    };
    println!("{}", join(&values));
    if a.common.out.is_some() {
        let dir = out_dir(&a.common)?;
        let mut w = csv::Writer::from_writer(create(&dir.join("wave.csv"))?);
        w.write_record(header)?;
        for (k, v) in values.iter().enumerate() {
            w.write_record([(k + 1).to_string(), v.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    common: Common,
    /// Comma- or whitespace-separated activations. Read from --input or
    /// standard input when absent.
    #[arg(long, allow_hyphen_values = true)]
    wave: Option<String>,
    /// File holding the activations.
    #[arg(long, conflicts_with = "wave")]
    input: Option<PathBuf>,
    /// Number of output neurons [default: length of the wave].
    #[arg(long)]
    n: Option<usize>,
    /// Extreme steering angle in degrees [default: 190].
    #[arg(long)]
    phi_max: Option<f64>,
    /// Clamp an out-of-range phase to ±phi_max instead of failing.
    #[arg(long)]
    clamp: bool,
}

pub fn codec_decode(a: DecodeArgs) -> Result<(), CliError> {
    let text = match (&a.wave, &a.input) {
        (Some(w), _) => w.clone(),
        (None, Some(p)) => {
            fs::read_to_string(p).map_err(|e| CliError::from(e).context(p.display()))?
        }
        (None, None) => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let wave = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::data(format!("not a number: {t:?}")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if wave.is_empty() {
        return Err(CliError::data("empty wave"));
    }
    let codec = codec_from(Some(a.n.unwrap_or(wave.len())), a.phi_max, &a.common)?;
    let (angle, amplitude, residual) = match decode(&wave, &codec) {
        Ok(r) => (r.angle.degrees(), r.amplitude, r.residual_rmse),
        Err(CodecError::PhaseOutOfRange { angle, .. }) if a.clamp => {
            let fit = sinesteer::codec::fit_phase(&wave, &codec)?;
            (
                clamp_angle(angle, &codec).degrees(),
                fit.amplitude,
                fit.residual_rmse,
            )
        }
        Err(e) => return Err(e.into()),
    };
    println!("{angle:.6}");
    if a.common.out.is_some() {
        let dir = out_dir(&a.common)?;
        let rows = [
            MetricRow::new("angle", angle, "deg"),
            MetricRow::new("amplitude", amplitude, "1"),
            MetricRow::new("residual_rmse", residual, "1"),
        ];
        write_metric_csv(create(&dir.join("decode.csv"))?, &rows)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides the config's model kind (feedforward|c_lstm).
    #[arg(long)]
    model: Option<ModelKind>,
    /// Overrides the config's head kind (regression|nll_bins|sine_wave).
    #[arg(long)]
    head: Option<HeadKind>,
    #[arg(long)]
    epochs: Option<usize>,
}

/// Writes `checkpoint.ckpt`, `history.csv` and the resolved `config.cfg`.
pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg = experiment_config(&a.common)?;
    cfg.model.kind = a.model.unwrap_or(cfg.model.kind);
    cfg.model.head.kind = a.head.unwrap_or(cfg.model.head.kind);
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.validate()?;
    let dir = out_dir(&a.common)?;
    let data = build_data(&cfg)?;
    let outcome = train_on(&cfg, &data)?;
    outcome.checkpoint.save(&dir.join("checkpoint.ckpt"))?;
    write_history_csv(create(&dir.join("history.csv"))?, &outcome.history)?;
    fs::write(dir.join("config.cfg"), cfg.to_text())?;
    let best = &outcome.history[outcome.best_epoch - 1];
    println!(
        "config_hash={} best_epoch={} val_rmse_deg={:.4}",
        cfg.hash(),
        outcome.best_epoch,
        best.val_rmse_deg
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Features CSV of a session to evaluate; pair each with --labels.
    /// Without these the config's synthetic test sessions are used.
    #[arg(long)]
    features: Vec<PathBuf>,
    #[arg(long)]
    labels: Vec<PathBuf>,
}

/// Writes `report.csv`, `sessions.csv` and `predictions.csv`.
pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let cfg = experiment_config(&a.common)?;
    if a.features.len() != a.labels.len() {
        return Err(CliError::usage(
            "--features and --labels must be given the same number of times",
        ));
    }
    let dir = out_dir(&a.common)?;
    let checkpoint = Checkpoint::load(&a.checkpoint)
        .map_err(|e| CliError::from(e).context(a.checkpoint.display()))?;
    let sessions = if a.features.is_empty() {
        build_data(&cfg)?.test
    } else {
        a.features
            .iter()
            .zip(&a.labels)
            .enumerate()
            .map(|(i, (f, l))| Ok(Session::new(i, load_labeled_series(f, l, cfg.codec())?)))
            .collect::<Result<Vec<_>, CliError>>()?
    };
    let report = evaluate(&checkpoint, &sessions, cfg.codec(), cfg.w)?;
    write_report_csv(create(&dir.join("report.csv"))?, &report)?;
    write_sessions_csv(create(&dir.join("sessions.csv"))?, &report)?;
    write_predictions_csv(create(&dir.join("predictions.csv"))?, &report)?;
    println!(
        "rmse_deg={:.4} whiteness={:.4} frames={} clamp_count={}",
        report.rmse_deg,
        report.whiteness,
        report.frames(),
        report.clamp_count
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Replicates per cell; the table reports medians.
    #[arg(long, default_value_t = 3)]
    seeds: usize,
}

/// Writes `comparison.csv`; checkpoints are cached under `checkpoints/` by
/// config hash and reused on later runs.
pub fn compare(a: CompareArgs) -> Result<(), CliError> {
    let cfg = experiment_config(&a.common)?;
    if a.seeds == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }
    let dir = out_dir(&a.common)?;
    let cache = dir.join("checkpoints");
    fs::create_dir_all(&cache)?;
    let options = CompareOptions {
        seeds: a.seeds,
        cache_dir: Some(cache),
    };
    let table = run_compare(&default_grid(&cfg), &options);
    write_comparison_csv(create(&dir.join("comparison.csv"))?, &table)?;
    let mut failed = 0;
    for c in &table.cells {
        match &c.result {
            Ok(r) => println!(
                "{:<10} {:<12} rmse_deg={:.4} whiteness={:.4}",
                c.head.as_str(),
                c.model.as_str(),
                r.rmse_deg,
                r.whiteness
            ),
            Err(e) => {
                failed += 1;
                eprintln!("{} {} failed: {e}", c.head, c.model);
            }
        }
    }
    if failed == table.cells.len() {
        return Err(CliError::data("every comparison cell failed"));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    common: Common,
    /// Angles (degrees) whose sine waves go into `waves.csv`.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "-190,-95,0,95,190"
    )]
    angles: Vec<f64>,
    /// Checkpoint whose test-session predictions go into `predictions.csv`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Comparison table to reshape into `bars.csv`.
    #[arg(long)]
    comparison: Option<PathBuf>,
}

pub fn plot_data(a: PlotArgs) -> Result<(), CliError> {
    let cfg = experiment_config(&a.common)?;
    let dir = out_dir(&a.common)?;
    let codec = *cfg.codec();

    let mut w = csv::Writer::from_writer(create(&dir.join("waves.csv"))?);
    w.write_record(["angle_deg", "neuron", "activation"])?;
    for &angle in &a.angles {
        for (k, v) in encode(angle, &codec)?.iter().enumerate() {
            w.write_record([angle.to_string(), (k + 1).to_string(), v.to_string()])?;
        }
    }
    w.flush()?;

    if let Some(path) = &a.checkpoint {
        let checkpoint =
            Checkpoint::load(path).map_err(|e| CliError::from(e).context(path.display()))?;
        let report = evaluate(&checkpoint, &build_data(&cfg)?.test, &codec, cfg.w)?;
        write_predictions_csv(create(&dir.join("predictions.csv"))?, &report)?;
    }

    if let Some(path) = &a.comparison {
        let mut rdr = csv::Reader::from_reader(open(path)?);
        let headers = rdr.headers()?.clone();
        let expected = [
            "head",
            "model",
            "rmse_deg",
            "whiteness",
            "clamp_count",
            "config_hash",
        ];
        if headers.iter().ne(expected) {
            return Err(CliError::data(format!(
                "{}: not a comparison table",
                path.display()
            )));
        }
        let mut w = csv::Writer::from_writer(create(&dir.join("bars.csv"))?);
        w.write_record(["head", "model", "metric", "value"])?;
        for row in rdr.records() {
            let row = row?;
            for (metric, col) in [("rmse_deg", 2), ("whiteness", 3)] {
                w.write_record([&row[0], &row[1], metric, &row[col]])?;
            }
        }
        w.flush()?;
    }
    println!("wrote plot data to {}", dir.display());
    Ok(())
}
