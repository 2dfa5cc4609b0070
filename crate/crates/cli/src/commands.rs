//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use adaptq::artifact::ModelArtifact;
use adaptq::dataset::{load_csv, load_mnist, split, FeatureTable, SplitManifest, SplitSpec};
use adaptq::trace::render_trace;
use adaptq::trainer::{
    evaluate, run_episode, train, EpisodeSetup, Metric, Mode, TrainConfig, TrainOutcome,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(
    name = "adaptq",
    version,
    about = "Adaptive feature selection with a DDQN agent and a guesser network"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on a CSV table and write model.json, report.json and splits.json.
    Train(TrainArgs),
    /// Score a trained model on the test rows of a split manifest.
    Eval(EvalArgs),
    /// Train and test on an MNIST subsample with a small pixel budget.
    DemoMnist(DemoMnistArgs),
    /// Print step-by-step episode traces.
    Trace(TraceArgs),
    /// Run the HTTP questionnaire service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label_col: String,
    /// Features revealed at the start of every episode, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub forced: Vec<String>,
    /// Features per episode including the forced ones.
    #[arg(long)]
    pub k: Option<usize>,
    /// JSON training config; unspecified fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seeds both the split and training.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub episodes: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluates the manifest's test rows; without it every row is used.
    #[arg(long)]
    pub split_manifest: Option<PathBuf>,
    /// Reveal one extra random feature at the start of each episode.
    #[arg(long)]
    pub off_policy: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DemoMnistArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub max_steps: usize,
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, default_value_t = 50_000)]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for model.json, report.json and splits.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Number of episodes to print.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Trace the manifest's test rows instead of the first rows of the file.
    #[arg(long)]
    pub split_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Session lifetime in seconds.
    #[arg(long, default_value_t = 1800)]
    pub session_ttl: u64,
}

/// Runs a subcommand and returns what it prints on stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::DemoMnist(a) => demo_mnist_cmd(a),
        Command::Trace(a) => trace_cmd(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_outputs(dir: &Path, outcome: &TrainOutcome, manifest: &SplitManifest) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    outcome.artifact.save(dir.join("model.json"))?;
    write_json(&dir.join("report.json"), &outcome.report)?;
    write_json(&dir.join("splits.json"), manifest)
}

fn train_summary(outcome: &TrainOutcome) -> Value {
    let r = &outcome.report;
    json!({
        "metric": r.metric,
        "best_validation": r.best_metric,
        "best_episode": r.best_episode,
        "episodes_run": r.episodes_run,
        "stop_reason": r.stop_reason,
        "config_hash": r.config_hash,
    })
}

fn train_cmd(a: TrainArgs) -> Result<String> {
    let mut config: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(k) = a.k {
        config.k_features = k;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(e) = a.episodes {
        config.episodes_max = e;
    }
    let table = load_csv(&a.data, &a.label_col, &a.forced, None)?;
    config.metric = Metric::for_classes(table.n_classes());
    let spec = SplitSpec::with_seed(config.seed);
    let splits = split(table.n_rows(), &spec)?;
    let mut outcome = train(&table, &splits, &config)?;
    outcome.artifact.label_column = Some(a.label_col.clone());
    write_outputs(
        &a.out,
        &outcome,
        &SplitManifest::new(table.n_rows(), spec, &splits),
    )?;
    let mut summary = train_summary(&outcome);
    summary["model"] = json!(a.out.join("model.json"));
    Ok(serde_json::to_string(&summary)? + "\n")
}

/// Loads a CSV with the model's label column and forced features and scales
/// it with the model's statistics.
pub fn load_for_model(model: &ModelArtifact, data: &Path) -> Result<FeatureTable> {
    let Some(label) = &model.label_column else {
        bail!("model has no label column recorded; it was not trained from a CSV table");
    };
    let forced: Vec<String> = model.forced_names().iter().map(|s| s.to_string()).collect();
    let raw = load_csv(data, label, &forced, Some(model.n_classes))?;
    Ok(model.prepare_table(&raw)?)
}

fn manifest_rows(path: Option<&Path>, n_rows: usize) -> Result<Vec<usize>> {
    match path {
        None => Ok((0..n_rows).collect()),
        Some(p) => {
            let m: SplitManifest = read_json(p)?;
            if m.n_rows != n_rows {
                bail!("split manifest covers {} rows, data has {n_rows}", m.n_rows);
            }
            Ok(m.test)
        }
    }
}

fn eval_cmd(a: EvalArgs) -> Result<String> {
    let model = ModelArtifact::load(&a.model)?;
    let table = load_for_model(&model, &a.data)?;
    let rows = manifest_rows(a.split_manifest.as_deref(), table.n_rows())?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let r = evaluate(&model, &table, &rows, a.off_policy, &mut rng)?;
    let out = json!({
        "metric": r.metric,
        "value": r.value,
        "n_test": r.n,
        "off_policy": a.off_policy,
    });
    Ok(serde_json::to_string(&out)? + "\n")
}

fn demo_mnist_cmd(a: DemoMnistArgs) -> Result<String> {
    let table = load_mnist(&a.images, &a.labels, a.subsample, a.seed)?;
    let config = TrainConfig {
        k_features: a.max_steps,
        episodes_max: a.episodes,
        seed: a.seed,
        metric: Metric::Accuracy,
        fine_tune_intermediate: true,
        guess_buffer_capacity: 50_000,
        ..TrainConfig::default()
    };
    let spec = SplitSpec::with_seed(a.seed);
    let splits = split(table.n_rows(), &spec)?;
    let outcome = train(&table, &splits, &config)?;
    let prepared = outcome.artifact.prepare_table(&table)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let test = evaluate(&outcome.artifact, &prepared, &splits.test, false, &mut rng)?;
    if let Some(dir) = &a.out {
        write_outputs(
            dir,
            &outcome,
            &SplitManifest::new(table.n_rows(), spec, &splits),
        )?;
    }
    let mut summary = train_summary(&outcome);
    summary["test_accuracy"] = json!(test.value);
    summary["n_test"] = json!(test.n);
    Ok(serde_json::to_string(&summary)? + "\n")
}

fn trace_cmd(a: TraceArgs) -> Result<String> {
    let model = ModelArtifact::load(&a.model)?;
    let table = load_for_model(&model, &a.data)?;
    let rows = manifest_rows(a.split_manifest.as_deref(), table.n_rows())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = String::new();
    for (i, &row) in rows.iter().take(a.n).enumerate() {
        let setup = EpisodeSetup {
            table: &table,
            row,
            rules: model.rules(),
            extra_random_unmask: false,
        };
        let episode = run_episode(
            &model.q_network,
            &model.guesser,
            &setup,
            Mode::Greedy,
            &mut rng,
        )?;
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&render_trace(&episode.trace));
    }
    Ok(out)
}

fn serve_cmd(a: ServeArgs) -> Result<String> {
    let model = ModelArtifact::load(&a.model)?;
    let state = crate::service::AppState::new(model, std::time::Duration::from_secs(a.session_ttl));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        crate::service::serve(listener, state).await?;
        Ok(String::new())
    })
}
