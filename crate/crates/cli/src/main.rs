//! `adaptive-restore`: build corpora, train the degradation classifier,
//! and run the diagnose-route-restore pipeline over frame sources.
//!
//! Any configuration key can be given as a flag with its dotted name,
//! e.g. `--blend.mode sequential` or `--restorers.deblurring.amount=1.2`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_restore::classify::{
    featurize, lr_sweep, momentum_sweep, save_model, train, Hyperparams, OptimizerKind, OutputMode,
    SWEEP_LEARNING_RATES, SWEEP_MOMENTA,
};
use adaptive_restore::features::{extract_at_working_size, FeatureVector};
use adaptive_restore::imaging::{load_image, save_image};
use adaptive_restore::pipeline::{bench, evaluate, frames, run_pipeline, Engine, PipelineConfig, PipelineError};
use adaptive_restore::rng::mix;
use adaptive_restore::route::{decide, VerdictRecord};
use adaptive_restore::synth::{
    build_corpus, build_corpus_from_images, scene, stratified_split, Corpus, DegradationKind, Recipe,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "adaptive-restore", version, about)]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Classifier model file
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Degradation threshold
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Frame source: directory, glob, comma-separated files, or synth:<spec>
    #[arg(long, global = true)]
    source: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON-lines log path
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a labelled degraded corpus with a manifest
    Degrade(DegradeArgs),
    /// Stratified train/test split of a manifest
    Split(SplitArgs),
    /// Train the classifier
    Train(TrainArgs),
    /// Learning-rate or momentum sweep
    Sweep(SweepArgs),
    /// Print verdicts (or features) for every frame of a source
    Classify(ClassifyArgs),
    /// Apply one restorer to one image
    Restore(RestoreArgs),
    /// Run the full pipeline over a source
    Run,
    /// Classification and restoration metrics on a manifest
    Eval(EvalArgs),
    /// Per-stage latency report
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct DegradeArgs {
    /// Directory of clean .ppm/.png images; generated scenes are used when absent
    #[arg(long)]
    clean: Option<PathBuf>,
    /// Number of generated scenes when --clean is absent
    #[arg(long, default_value_t = 40)]
    scenes: usize,
    /// TOML recipe; overrides the count flags below
    #[arg(long)]
    recipe: Option<PathBuf>,
    /// Single-label samples per kind
    #[arg(long, default_value_t = 100)]
    per_kind: usize,
    /// Undegraded samples
    #[arg(long, default_value_t = 0)]
    clean_count: usize,
    #[arg(long, default_value_t = 0.5)]
    severity_min: f64,
    #[arg(long, default_value_t = 0.9)]
    severity_max: f64,
    /// Working size (square) images are resized to before degradation
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Super-resolution samples are upsampled back to working size
    #[arg(long)]
    sr_upsample: bool,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,
}

#[derive(Args, Debug, Clone)]
struct HyperArgs {
    #[arg(long, default_value_t = 35)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// adam or sgd
    #[arg(long, default_value = "adam")]
    optimizer: OptimizerKind,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 0.2)]
    validation_fraction: f64,
    /// sigmoid or softmax
    #[arg(long, default_value = "sigmoid")]
    mode: OutputMode,
}

impl HyperArgs {
    fn hyper(&self, seed: u64) -> Hyperparams {
        Hyperparams {
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            learning_rate: self.lr,
            momentum: self.momentum,
            hidden: self.hidden,
            validation_fraction: self.validation_fraction,
            seed,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Per-epoch CSV (default: <model>.history.csv)
    #[arg(long)]
    history: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// lr or momentum
    #[arg(long, default_value = "lr")]
    param: String,
    /// Comma-separated values (default: three standard values)
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// CSV report path (default: stdout)
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// Emit the 16 features as CSV instead of verdicts
    #[arg(long)]
    dump_features: bool,
}

#[derive(Args, Debug)]
struct RestoreArgs {
    #[arg(long)]
    kind: DegradationKind,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// CSV report path (default: stdout)
    #[arg(long)]
    report: Option<PathBuf>,
    /// Skip restoration and PSNR/SSIM
    #[arg(long)]
    no_quality: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    /// Print the stage table as CSV instead of JSON
    #[arg(long)]
    csv: bool,
}

enum Failure {
    Usage(String),
    Runtime(Box<dyn std::error::Error>),
}

impl<E: std::error::Error + 'static> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(Box::new(e))
    }
}

type Outcome = Result<(), Failure>;

/// Pulls `--a.b=v` / `--a.b v` flags out of argv; everything else goes to clap.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--").filter(|f| f.split('=').next().is_some_and(|k| k.contains('.'))) else {
            rest.push(arg);
            continue;
        };
        match flag.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| format!("--{flag} needs a value"))?;
                overrides.push((flag.to_string(), v));
            }
        }
    }
    Ok((rest, overrides))
}

fn pipeline_config(cli: &Cli, overrides: &[(String, String)]) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::load_with_overrides(cli.config.as_deref(), overrides).map_err(|e| match e {
        PipelineError::Config(msg) => Failure::Usage(msg),
        other => other.into(),
    })?;
    if let Some(m) = &cli.model {
        cfg.model = Some(m.clone());
    }
    if let Some(t) = cli.theta {
        cfg.theta = t;
    }
    if let Some(s) = &cli.source {
        cfg.source = Some(s.clone());
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(l) = &cli.log {
        cfg.log = Some(l.clone());
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn require<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    value.as_ref().ok_or_else(|| Failure::Usage(format!("--{name} is required")))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn print_json(value: &impl serde::Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_or_print(None, &text)
}

fn degrade(cli: &Cli, cfg: &PipelineConfig, a: &DegradeArgs) -> Outcome {
    let out = require(&cli.out, "out")?;
    let recipe = match &a.recipe {
        Some(p) => Recipe::load(p)?,
        None => Recipe {
            clean: a.clean_count,
            severity: [a.severity_min, a.severity_max],
            working_size: [a.size, a.size],
            sr_upsample: a.sr_upsample,
            ..Recipe::uniform(a.per_kind)
        },
    };
    let corpus = match &a.clean {
        Some(dir) => build_corpus(dir, &recipe, cfg.seed, out)?,
        None => {
            let [w, h] = recipe.working_size;
            let cleans: Vec<_> = (0..a.scenes.max(1))
                .map(|i| (format!("scene_{i:04}"), scene::generate(w, h, mix(cfg.seed, i as u64))))
                .collect();
            build_corpus_from_images(&cleans, &recipe, cfg.seed, out)?
        }
    };
    print_json(&serde_json::json!({
        "samples": corpus.len(),
        "manifest": corpus.manifest_path,
        "label_counts": corpus.label_counts().into_iter().map(|(k, n)| (k.to_string(), n)).collect::<BTreeMap<_, _>>(),
    }))
}

fn split(cli: &Cli, cfg: &PipelineConfig, a: &SplitArgs) -> Outcome {
    let corpus = Corpus::load(&a.manifest)?;
    let (mut train_set, mut test_set) = stratified_split(&corpus, a.fraction, cfg.seed)?;
    let dir = match &cli.out {
        Some(o) => o.clone(),
        None => a.manifest.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    std::fs::create_dir_all(&dir)?;
    train_set.write_manifest(dir.join("train.jsonl"))?;
    test_set.write_manifest(dir.join("test.jsonl"))?;
    print_json(&serde_json::json!({
        "train": train_set.len(),
        "test": test_set.len(),
        "train_manifest": dir.join("train.jsonl"),
        "test_manifest": dir.join("test.jsonl"),
    }))
}

fn train_cmd(cli: &Cli, cfg: &PipelineConfig, a: &TrainArgs) -> Outcome {
    let model_path = require(&cli.model, "model")?;
    let corpus = Corpus::load(&a.manifest)?;
    let (model, history) = train(&corpus, &a.hyper.hyper(cfg.seed), a.hyper.mode)?;
    save_model(&model, model_path)?;
    let history_path = a.history.clone().unwrap_or_else(|| model_path.with_extension("history.csv"));
    std::fs::write(&history_path, history.to_csv())?;
    print_json(&serde_json::json!({
        "model": model_path,
        "history": history_path,
        "final": history.last(),
    }))
}

fn sweep(cfg: &PipelineConfig, a: &SweepArgs) -> Outcome {
    let corpus = Corpus::load(&a.manifest)?;
    let examples = featurize(&corpus)?;
    let hyper = a.hyper.hyper(cfg.seed);
    let report = match a.param.as_str() {
        "lr" | "learning_rate" => {
            let values = if a.values.is_empty() { SWEEP_LEARNING_RATES.to_vec() } else { a.values.clone() };
            lr_sweep(&examples, &values, &hyper, a.hyper.mode)?
        }
        "momentum" => {
            let values = if a.values.is_empty() { SWEEP_MOMENTA.to_vec() } else { a.values.clone() };
            momentum_sweep(&examples, &values, &hyper, a.hyper.mode)?
        }
        other => return Err(Failure::Usage(format!("--param must be lr or momentum, got {other:?}"))),
    };
    write_or_print(a.report.as_deref(), &report.to_csv())?;
    eprintln!("best {} = {}", report.parameter, report.best);
    Ok(())
}

fn classify(cfg: &PipelineConfig, a: &ClassifyArgs) -> Outcome {
    let source = require(&cfg.source, "source")?;
    let list = frames(source)?;
    let working = (cfg.working_size[0], cfg.working_size[1]);
    let mut stdout = std::io::stdout().lock();
    if a.dump_features {
        writeln!(stdout, "frame,{}", FeatureVector::csv_header())?;
        for f in &list {
            let fv = extract_at_working_size(&f.load()?.image, working)?;
            writeln!(stdout, "{},{}", f.name(), fv.to_csv_row())?;
        }
        return Ok(());
    }
    let engine = Engine::from_config(cfg)?;
    for f in &list {
        let probs = engine.probabilities(&f.load()?.image)?;
        let verdict = decide(&probs, &engine.router)?;
        let record = VerdictRecord::new(&verdict, &probs, &engine.router);
        let line = serde_json::json!({
            "frame_id": f.index,
            "source": f.name(),
            "probabilities": probs.values(),
            "verdict": record,
        });
        writeln!(stdout, "{line}")?;
    }
    Ok(())
}

fn restore_cmd(cfg: &PipelineConfig, a: &RestoreArgs) -> Outcome {
    let image = load_image(&a.input)?;
    let (out, warning) = cfg.registry()?.restore_reporting(a.kind, &image)?;
    if let Some(w) = warning {
        eprintln!("warning: {w}");
    }
    save_image(&out, &a.output)?;
    Ok(())
}

fn eval(cfg: &PipelineConfig, a: &EvalArgs) -> Outcome {
    require(&cfg.model, "model")?;
    let engine = Engine::from_config(cfg)?;
    let corpus = Corpus::load(&a.manifest)?;
    let report = evaluate(&engine, &corpus, !a.no_quality)?;
    write_or_print(a.report.as_deref(), &report.to_csv())
}

fn bench_cmd(cfg: &PipelineConfig, a: &BenchArgs) -> Outcome {
    require(&cfg.model, "model")?;
    let source = require(&cfg.source, "source")?;
    let engine = Engine::from_config(cfg)?;
    let report = bench(&engine, &frames(source)?, a.repetitions)?;
    if a.csv {
        write_or_print(None, &report.to_csv())
    } else {
        print_json(&report)
    }
}

fn dispatch(cli: &Cli, overrides: &[(String, String)]) -> Outcome {
    let cfg = pipeline_config(cli, overrides)?;
    match &cli.command {
        Command::Degrade(a) => degrade(cli, &cfg, a),
        Command::Split(a) => split(cli, &cfg, a),
        Command::Train(a) => train_cmd(cli, &cfg, a),
        Command::Sweep(a) => sweep(&cfg, a),
        Command::Classify(a) => classify(&cfg, a),
        Command::Restore(a) => restore_cmd(&cfg, a),
        Command::Run => {
            require(&cfg.model, "model")?;
            require(&cfg.source, "source")?;
            require(&cfg.out, "out")?;
            print_json(&run_pipeline(&cfg)?)
        }
        Command::Eval(a) => eval(&cfg, a),
        Command::Bench(a) => bench_cmd(&cfg, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        // a closed pipe downstream (`| head`) is not a failure
        Err(Failure::Runtime(e)) if e.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
