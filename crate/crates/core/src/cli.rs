//! Subcommand wiring: scenario generation, training, offline and online
//! matching, threshold sweeps, benchmarks and manual labeling.
//!
//! Configuration precedence is flags > config file > defaults. Stochastic
//! commands require an explicit seed (flag, config file or scenario spec);
//! there is no wall-clock fallback, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use rematch::clustering::{cluster_snapshot, ClusterConfig};
use rematch::embedding::{EmbeddingModel, TrainConfig};
use rematch::evaluation::{bench_embedding, default_gamma_grid, sweep, Method};
use rematch::io;
use rematch::matching::{detect_changes, greedy_detect_changes, MatchConfig};
use rematch::online::{self, OnlineConfig};
use rematch::scenegen::{self, make_training_set};

/// Command line errors that should surface as usage problems (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "rematch", version, about = "Object instance relocalization between mapping sessions")]
pub struct Cli {
    /// Log filter (error|warn|info|debug|trace); RUST_LOG is the fallback.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    /// TOML file supplying defaults for flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a scenario: session snapshots, frame streams and ground truth.
    Gen(GenArgs),
    /// Train the embedding model on a scenario's first session.
    Train(TrainArgs),
    /// Offline change detection between two snapshots.
    Match(MatchArgs),
    /// Incremental change detection over a frame stream.
    Online(OnlineArgs),
    /// Threshold sweep over both methods with CSV output.
    Sweep(SweepArgs),
    /// Embedding latency benchmark.
    Bench(BenchArgs),
    /// Convert a snapshot plus a manual label file into a training dataset.
    Label(LabelArgs),
}

/// Defaults loadable from a TOML config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    pub method: Option<String>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub views_per_label: Option<usize>,
    pub margin: Option<f64>,
    pub layer_dims: Option<Vec<usize>>,
    pub normalize: Option<bool>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Preset name; see `gen --preset help` equivalents in the README.
    #[arg(long, conflicts_with = "spec")]
    pub preset: Option<String>,
    /// Scenario spec JSON file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Scenario directory produced by `gen` (uses ref.json + gt.json).
    #[arg(long, required_unless_present = "dataset")]
    pub scenario: Option<PathBuf>,
    /// Pre-labeled dataset file (see `label`).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub views_per_label: Option<usize>,
    /// Margin separating anchor-positive from anchor-negative pairs.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Full layer widths, input first, e.g. 192,128,64.
    #[arg(long, value_delimiter = ',')]
    pub layer_dims: Option<Vec<usize>>,
    /// Keep raw (non-unit-norm) embeddings.
    #[arg(long)]
    pub no_normalize: bool,
    /// Validation fraction of the per-label split.
    #[arg(long, default_value_t = 0.15)]
    pub val_fraction: f64,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long = "cur")]
    pub current: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// react (clustered) or greedy (no clustering).
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OnlineArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Frame stream file (newline-delimited JSON), or `-` for stdin.
    #[arg(long)]
    pub frames: String,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write one interim report line per frame.
    #[arg(long)]
    pub interim_log: Option<PathBuf>,
    /// Write the aggregated (unclustered) current snapshot.
    #[arg(long)]
    pub save_current: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Scenario directory produced by `gen`.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["react".to_string(), "greedy".to_string()])]
    pub methods: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Mask counts to measure.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0usize, 1, 2, 4, 8, 13])]
    pub masks: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    /// JSON map of instance id to visual-category label.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn require_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64> {
    flag.or(file.seed).ok_or_else(|| {
        UsageError("a --seed is required (flag or config file); there is no wall-clock default".into())
            .into()
    })
}

fn parse_method(name: &str) -> Result<Method> {
    Method::parse(name).ok_or_else(|| {
        UsageError(format!("unknown method '{name}'; expected react or greedy")).into()
    })
}

fn resolve_gamma(flag: Option<f64>, file: &FileConfig) -> Result<f64> {
    let gamma = flag.or(file.gamma).ok_or_else(|| {
        anyhow::Error::from(UsageError("--gamma is required (flag or config file)".into()))
    })?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(UsageError(format!("gamma must be finite and >= 0, got {gamma}")).into());
    }
    Ok(gamma)
}

pub fn run(cli: Cli) -> Result<()> {
    let file = load_file_config(cli.config.as_deref())?;
    match cli.command {
        Command::Gen(args) => cmd_gen(args, &file),
        Command::Train(args) => cmd_train(args, &file),
        Command::Match(args) => cmd_match(args, &file),
        Command::Online(args) => cmd_online(args, &file),
        Command::Sweep(args) => cmd_sweep(args, &file),
        Command::Bench(args) => cmd_bench(args, &file),
        Command::Label(args) => cmd_label(args, &file),
    }
}

fn cmd_gen(args: GenArgs, file: &FileConfig) -> Result<()> {
    let mut spec = match (&args.preset, &args.spec) {
        (Some(name), None) => scenegen::preset(name).ok_or_else(|| {
            anyhow::Error::from(UsageError(format!(
                "unknown preset '{name}'; available presets: {}",
                scenegen::preset_names().join(", ")
            )))
        })?,
        (None, Some(path)) => io::load_spec(path)?,
        _ => {
            return Err(UsageError("exactly one of --preset or --spec is required".into()).into())
        }
    };
    if let Some(seed) = args.seed.or(file.seed) {
        spec.seed = seed;
    }
    log::info!("generating scenario '{}' with seed {}", spec.name, spec.seed);

    let scenario = scenegen::generate(&spec)?;
    let out = &args.out;
    io::save_spec(&out.join("scenario.json"), &spec)?;
    io::save_snapshot(&out.join("ref.json"), &scenario.snapshots[0])?;
    io::save_snapshot(&out.join("cur.json"), &scenario.snapshots[1])?;
    io::save_frames_jsonl(&out.join("frames_session1.jsonl"), &scenario.frames[0])?;
    io::save_frames_jsonl(&out.join("frames_session2.jsonl"), &scenario.frames[1])?;
    io::save_ground_truth(&out.join("gt.json"), &scenario.ground_truth)?;

    let manifest = io::RunManifest::new(
        "gen",
        serde_json::json!({
            "preset": args.preset,
            "spec": args.spec.as_ref().map(|p| p.display().to_string()),
            "seed": spec.seed,
            "out": out.display().to_string(),
        }),
    );
    manifest.write(&out.join("manifest.json"))?;
    Ok(())
}

fn cmd_train(args: TrainArgs, file: &FileConfig) -> Result<()> {
    let seed = require_seed(args.seed, file)?;
    let config = TrainConfig {
        epochs: args.epochs.or(file.epochs).unwrap_or(30),
        learning_rate: args.learning_rate.or(file.learning_rate).unwrap_or(0.001),
        batch_size: args.batch_size.or(file.batch_size).unwrap_or(64),
        seed,
        views_per_label: args.views_per_label.or(file.views_per_label).unwrap_or(4),
        ..TrainConfig::default()
    };
    let margin = args.margin.or(file.margin).unwrap_or(1.0);
    let normalize = if args.no_normalize {
        false
    } else {
        file.normalize.unwrap_or(true)
    };

    let mut inputs: Vec<PathBuf> = Vec::new();
    let (dataset, label_names) = if let Some(path) = &args.dataset {
        inputs.push(path.clone());
        io::load_dataset(path)?
    } else {
        let dir = args.scenario.as_ref().expect("clap enforces one source");
        let ref_path = dir.join("ref.json");
        let gt_path = dir.join("gt.json");
        let snapshot = io::load_snapshot(&ref_path)?;
        let gt = io::load_ground_truth(&gt_path)?;
        inputs.push(ref_path);
        inputs.push(gt_path);
        let split = make_training_set(&snapshot, &gt.session_labels[0], seed, args.val_fraction)?;
        (split.train, split.label_names)
    };

    let descriptor_dim = dataset.descriptor_dim();
    let layer_dims = args
        .layer_dims
        .clone()
        .or_else(|| file.layer_dims.clone())
        .unwrap_or_else(|| vec![descriptor_dim, 128, 64]);
    if layer_dims.first() != Some(&descriptor_dim) {
        return Err(UsageError(format!(
            "layer_dims must start at the descriptor dimension {descriptor_dim}, got {layer_dims:?}"
        ))
        .into());
    }

    let model = EmbeddingModel::seeded(&layer_dims, normalize, margin, seed)?;
    log::info!(
        "training on {} views across {} labels: epochs={} lr={} batch={} seed={}",
        dataset.len(),
        label_names.len(),
        config.epochs,
        config.learning_rate,
        config.batch_size,
        config.seed
    );
    let (trained, curve) = rematch::embedding::train(&model, &dataset, &config)?;
    let final_loss = curve.last().map(|s| s.mean_loss).unwrap_or(f64::NAN);
    log::info!("final mean loss {final_loss}");

    let out = &args.out;
    io::save_model(&out.join("model.json"), &trained)?;
    io::write_loss_csv(&out.join("loss.csv"), &curve)?;
    let mut manifest = io::RunManifest::new(
        "train",
        serde_json::json!({
            "seed": seed,
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "views_per_label": config.views_per_label,
            "margin": margin,
            "normalize": normalize,
            "layer_dims": layer_dims,
            "val_fraction": args.val_fraction,
            "labels": label_names,
        }),
    );
    for input in &inputs {
        manifest.record_input(input)?;
    }
    manifest.write(&out.join("manifest.json"))?;
    Ok(())
}

fn cmd_match(args: MatchArgs, file: &FileConfig) -> Result<()> {
    let gamma = resolve_gamma(args.gamma, file)?;
    let method = parse_method(
        args.method
            .as_deref()
            .or(file.method.as_deref())
            .unwrap_or("react"),
    )?;
    let reference = io::load_snapshot(&args.reference)?;
    let current = io::load_snapshot(&args.current)?;
    let model = io::load_model(&args.model)?;

    let report = match method {
        Method::React => {
            let cluster_config = ClusterConfig::new(gamma)?;
            let ref_clustered = cluster_snapshot(&reference, &model, &cluster_config)?;
            let cur_clustered = cluster_snapshot(&current, &model, &cluster_config)?;
            detect_changes(&ref_clustered, &cur_clustered, &MatchConfig::new(gamma)?)?
        }
        Method::Greedy => {
            greedy_detect_changes(&reference, &current, &model, &MatchConfig::new(gamma)?)?
        }
    };
    log::info!(
        "{method}: {} matched, {} absent, {} new, total distance {:.3} m",
        report.matched.len(),
        report.absent.len(),
        report.new.len(),
        report.total_distance
    );
    io::save_report(&args.out, &report)?;

    let mut manifest = io::RunManifest::new(
        "match",
        serde_json::json!({
            "gamma": gamma,
            "method": method.as_str(),
        }),
    );
    for input in [&args.reference, &args.current, &args.model] {
        manifest.record_input(input)?;
    }
    manifest.write(&manifest_path(&args.out))?;
    Ok(())
}

fn cmd_online(args: OnlineArgs, file: &FileConfig) -> Result<()> {
    let gamma = resolve_gamma(args.gamma, file)?;
    let reference_raw = io::load_snapshot(&args.reference)?;
    let model = io::load_model(&args.model)?;
    let cluster_config = ClusterConfig::new(gamma)?;
    let reference = cluster_snapshot(&reference_raw, &model, &cluster_config)?;

    let frames = if args.frames == "-" {
        io::read_frames(BufReader::new(std::io::stdin().lock()), "stdin")?
    } else {
        io::load_frames_jsonl(Path::new(&args.frames))?
    };

    let mut state = online::init(&reference, &model, OnlineConfig::new(gamma)?)?;
    let mut interim_lines = Vec::new();
    for frame in &frames {
        state.process_frame(frame)?;
        if args.interim_log.is_some() {
            let report = state.finalize()?;
            interim_lines.push(serde_json::to_string(&report)?);
        }
    }
    let report = state.finalize()?;
    log::info!(
        "processed {} frames -> {} matched, {} absent, {} new",
        state.frames_processed(),
        report.matched.len(),
        report.absent.len(),
        report.new.len()
    );
    io::save_report(&args.out, &report)?;
    if let Some(path) = &args.interim_log {
        io::write_text(path, &(interim_lines.join("\n") + "\n"))?;
    }
    if let Some(path) = &args.save_current {
        io::save_snapshot(path, &state.current_snapshot())?;
    }

    let mut manifest = io::RunManifest::new(
        "online",
        serde_json::json!({
            "gamma": gamma,
            "frames": args.frames,
        }),
    );
    manifest.record_input(&args.reference)?;
    manifest.record_input(&args.model)?;
    if args.frames != "-" {
        manifest.record_input(Path::new(&args.frames))?;
    }
    manifest.write(&manifest_path(&args.out))?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs, file: &FileConfig) -> Result<()> {
    let _ = file;
    let methods: Vec<Method> = args
        .methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<_>>()?;
    let dir = &args.scenario;
    let ref_path = dir.join("ref.json");
    let cur_path = dir.join("cur.json");
    let gt_path = dir.join("gt.json");
    let reference = io::load_snapshot(&ref_path)?;
    let current = io::load_snapshot(&cur_path)?;
    let gt = io::load_ground_truth(&gt_path)?;
    let model = io::load_model(&args.model)?;

    let grid = default_gamma_grid();
    let output = sweep(&reference, &current, &gt, &model, &methods, &grid)?;
    for summary in &output.summaries {
        log::info!(
            "{}: best gamma {} (aggregate F1 {:.3}, sum distance {:.3}, plateau {} points)",
            summary.method,
            summary.best_gamma,
            summary.best_aggregate_f1,
            summary.best_sum_distance,
            summary.plateau_width
        );
    }
    let out = &args.out;
    io::write_sweep_csv(&out.join("sweep.csv"), &output.rows)?;
    io::write_sweep_summary(&out.join("summary.json"), &output)?;
    let mut manifest = io::RunManifest::new(
        "sweep",
        serde_json::json!({
            "methods": args.methods,
            "grid_points": grid.len(),
        }),
    );
    for input in [&ref_path, &cur_path, &gt_path, &args.model] {
        manifest.record_input(input)?;
    }
    manifest.write(&out.join("manifest.json"))?;
    Ok(())
}

fn cmd_bench(args: BenchArgs, file: &FileConfig) -> Result<()> {
    let seed = require_seed(args.seed, file)?;
    if args.masks.is_empty() {
        return Err(UsageError("--masks needs at least one count".into()).into());
    }
    let model = io::load_model(&args.model)?;
    let rows = bench_embedding(&model, &args.masks, args.reps, seed);
    for row in &rows {
        log::info!("{} masks: median {:.3} ms, p95 {:.3} ms", row.masks, row.median_ms, row.p95_ms);
    }
    io::write_bench_csv(&args.out, &rows)?;
    let mut manifest = io::RunManifest::new(
        "bench",
        serde_json::json!({
            "masks": args.masks,
            "reps": args.reps,
            "seed": seed,
        }),
    );
    manifest.record_input(&args.model)?;
    manifest.write(&manifest_path(&args.out))?;
    Ok(())
}

fn cmd_label(args: LabelArgs, file: &FileConfig) -> Result<()> {
    let _ = file;
    let snapshot = io::load_snapshot(&args.snapshot)?;
    let text = std::fs::read_to_string(&args.labels)
        .with_context(|| format!("reading label file {}", args.labels.display()))?;
    let labels: BTreeMap<String, String> =
        serde_json::from_str(&text).context("label file must map instance ids to categories")?;

    let mut label_names: Vec<String> = labels.values().cloned().collect();
    label_names.sort();
    label_names.dedup();
    let index_of: BTreeMap<&str, u32> = label_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i as u32))
        .collect();

    let mut items = Vec::new();
    for inst in &snapshot.instances {
        let Some(category) = labels.get(&inst.instance_id) else {
            return Err(UsageError(format!(
                "label file does not cover instance {}",
                inst.instance_id
            ))
            .into());
        };
        for view in &inst.views {
            items.push(rematch::embedding::DatasetItem {
                descriptor: view.data.clone(),
                label: index_of[category.as_str()],
            });
        }
    }
    let descriptor_dim = items.first().map_or(0, |i| i.descriptor.len());
    let dataset = io::DatasetFile {
        schema_version: scenegen::SCHEMA_VERSION,
        descriptor_dim,
        label_names,
        items,
    };
    io::save_dataset(&args.out, &dataset)?;

    let mut manifest = io::RunManifest::new("label", serde_json::json!({}));
    manifest.record_input(&args.snapshot)?;
    manifest.record_input(&args.labels)?;
    manifest.write(&manifest_path(&args.out))?;
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
