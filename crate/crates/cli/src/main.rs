use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rase::estimator::EstimatorKind;
use rase::experiment::{self, RejectedTimestamp, RunReport, SweepParam, DEFAULT_TRIALS};
use rase::pipeline::RunConfig;
use rase::randomizer::DataRange;
use rase::trace::{self, Ingested};
use rase::Error;

#[derive(Parser)]
#[command(name = "rase", version, about = "Private aggregation of sensor traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic smart-meter trace.
    Synth(SynthArgs),
    /// Run the pipeline over a trace and write a JSON report.
    Run(RunArgs),
    /// Vary one parameter and write averaged metrics as CSV.
    Sweep(SweepArgs),
    /// Run the linkage attack against a report.
    Attack(AttackArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Take the device count and data range from this config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 100)]
    timestamps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window: Option<u64>,
    #[arg(long)]
    estimator: Option<EstimatorKind>,
    #[arg(long = "bootstrap-b")]
    bootstrap_b: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long)]
    values: String,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct AttackArgs {
    /// Trace the report was produced from.
    #[arg(long)]
    input: PathBuf,
    /// Report written by `rase run`.
    #[arg(long)]
    report: PathBuf,
    /// Where to write the outcome; stdout if absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Internal(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidConfig { .. } => Failure::Config(msg),
            Error::OutOfRange { .. }
            | Error::IncompleteBatch { .. }
            | Error::MissingTimestamp { .. }
            | Error::Data { .. }
            | Error::Empty(_)
            | Error::Mismatch(_)
            | Error::Io(_) => Failure::Data(msg),
            _ => Failure::Internal(msg),
        }
    }
}

fn with_path(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match Failure::from(e) {
        Failure::Config(m) => Failure::Config(format!("{}: {m}", path.display())),
        Failure::Data(m) => Failure::Data(format!("{}: {m}", path.display())),
        Failure::Internal(m) => Failure::Internal(format!("{}: {m}", path.display())),
    }
}

fn load_config(path: &Path, overrides: Option<&Overrides>) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut config = RunConfig::from_json(&text).map_err(with_path(path))?;
    if let Some(o) = overrides {
        if let Some(seed) = o.seed {
            config.seed = seed;
        }
        if let Some(w) = o.window {
            config.window_w = Some(w);
        }
        if let Some(kind) = o.estimator {
            config.estimator = kind;
        }
        if let Some(b) = o.bootstrap_b {
            config.bootstrap_b = b;
        }
        config.validate().map_err(with_path(path))?;
    }
    Ok(config)
}

fn load_trace(path: &Path, config: &RunConfig) -> Result<Ingested, Failure> {
    let ingested = trace::ingest(path, config.n, Some(&config.range)).map_err(with_path(path))?;
    for r in &ingested.rejected {
        eprintln!("warning: {}: timestamp {} skipped: {}", path.display(), r.timestamp, r.reason);
    }
    if ingested.batches.is_empty() {
        return Err(Failure::Data(format!("{}: no complete timestamps", path.display())));
    }
    Ok(ingested)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn synth(args: SynthArgs) -> Result<(), Failure> {
    let (n, range) = match &args.config {
        Some(path) => {
            let c = load_config(path, None)?;
            (args.n.unwrap_or(c.n), c.range)
        }
        None => (args.n.unwrap_or(64), DataRange::new(3.9, 178.3)?),
    };
    if n == 0 || args.timestamps == 0 {
        return Err(Failure::Config("--n and --timestamps must be positive".into()));
    }
    let rows = trace::synth(n, args.timestamps, &range, args.seed);
    trace::write_trace_file(&rows, &args.output).map_err(with_path(&args.output))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let config = load_config(&args.config, Some(&args.overrides))?;
    let ingested = load_trace(&args.input, &config)?;
    let mut report = experiment::run_trace(&ingested.batches, &config, config.seed)?.report;
    report.rejected = ingested.rejected.into_iter().map(RejectedTimestamp::from).collect();
    write(&args.output, report.to_json().as_bytes())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let config = load_config(&args.config, Some(&args.overrides))?;
    let param: SweepParam = args.param.parse()?;
    let values: Vec<f64> = args
        .values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Failure::Config(format!("values: {v:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let ingested = load_trace(&args.input, &config)?;
    let rows = experiment::sweep(&config, &ingested.batches, param, &values, args.trials, config.seed)?;
    let mut buf = Vec::new();
    experiment::write_sweep(&rows, &mut buf)?;
    write(&args.output, &buf)
}

fn attack(args: AttackArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.report).map_err(|e| Failure::Data(format!("{}: {e}", args.report.display())))?;
    let report = RunReport::from_json(&text).map_err(with_path(&args.report))?;
    let ingested = load_trace(&args.input, &report.config)?;
    let outcome = experiment::attack_report(&report, &ingested.batches)?;
    let json = serde_json::to_string_pretty(&serde_json::to_value(&outcome).expect("outcome serializes"))
        .expect("outcome serializes");
    match &args.output {
        Some(path) => write(path, json.as_bytes()),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Attack(a) => attack(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rase: {f}");
            ExitCode::from(f.code())
        }
    }
}
