use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gomkit::fetch::{cache_dir, fetch};
use gomkit::{run_stage, Error, Manifest, Overrides, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "gomkit", version, about = "Model, simulate and evaluate professional gestures from motion capture")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Dataset name, overriding the configuration.
    #[arg(long)]
    dataset: Option<String>,
    /// Gesture class to process; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    gesture: Vec<String>,
    /// Comma-separated sensor labels, e.g. `LA,SP1,RUL`.
    #[arg(long, value_delimiter = ',')]
    sensors: Vec<String>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Download and verify the benchmark archive into the cache.
    Fetch {
        /// Configuration whose manifest to use; the bundled manifest otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Cache directory; defaults to $GOMKIT_CACHE.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Unwrap, filter and segment the recordings.
    Preprocess(StageArgs),
    /// Fit one equation bank per gesture on its DTW reference repetition.
    Fit(StageArgs),
    /// Simulate every repetition and plot the reference one.
    Simulate(StageArgs),
    /// Score simulations with RMSE, MAE and Theil's U1.
    Evaluate(StageArgs),
    /// Report significant terms, speeds and sensor rankings.
    Dexterity(StageArgs),
    /// Cross-validate HMM gesture recognition.
    Recognize(StageArgs),
}

fn stage_config(args: StageArgs) -> Result<RunConfig, Error> {
    let mut config = RunConfig::load(&args.config)?;
    config.apply(Overrides {
        dataset: args.dataset,
        gestures: (!args.gesture.is_empty()).then_some(args.gesture),
        sensors: (!args.sensors.is_empty()).then_some(args.sensors),
        out_dir: args.out,
    });
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Error> {
    let (stage, args) = match cli.command {
        Command::Fetch { config, cache } => {
            let manifest = match config {
                Some(p) => RunConfig::load(&p)?.manifest()?,
                None => Manifest::builtin(),
            };
            let cache = cache.unwrap_or_else(cache_dir);
            let report = fetch(&manifest, &cache)?;
            for f in &report.cached {
                println!("cached      {f}");
            }
            for f in &report.downloaded {
                println!("downloaded  {f}");
            }
            println!("{}", report.root.display());
            return Ok(());
        }
        Command::Preprocess(a) => (Stage::Preprocess, a),
        Command::Fit(a) => (Stage::Fit, a),
        Command::Simulate(a) => (Stage::Simulate, a),
        Command::Evaluate(a) => (Stage::Evaluate, a),
        Command::Dexterity(a) => (Stage::Dexterity, a),
        Command::Recognize(a) => (Stage::Recognize, a),
    };
    let config = stage_config(args)?;
    let out = run_stage(&config, stage)?;
    println!("{stage}: {} files in {}", out.files.len(), out.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::FAILURE
        }
    }
}
