//! `snc`: train, apply, evaluate and compare rule sets.
//!
//! Exit status: 0 success, 1 usage error, 2 data or document error,
//! 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snc_core::data::{load_dataset, load_table, Dataset};
use snc_core::guided::Knowledge;
use snc_core::harness::{run_experiment, train, write_outputs, ExperimentConfig, VariantResult};
use snc_core::induction::InductionParams;
use snc_core::inference::{evaluate, predict_dataset, save_predictions, Performance};
use snc_core::model::{load_ruleset, save_ruleset, RuleSet};
use snc_core::quality::QualityMeasure;
use snc_core::stats::{ruleset_report, ruleset_similarity};
use snc_core::Error;

#[derive(Parser)]
#[command(name = "snc", version, about = "Guided separate-and-conquer rule induction")]
struct Cli {
    /// Maximum number of worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Induce a rule set and save it as JSON.
    Train(TrainArgs),
    /// Write one prediction per example as CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the problem metric (Gm, RRSE or IBS) of a model on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Positive class for SE/SP/Gm (default: the rarest training class).
        #[arg(long)]
        positive_class: Option<String>,
    },
    /// Run an experiment config and print its result row.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the agreement of two rule sets on a dataset.
    Similarity {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Print descriptive statistics and rule significance.
    Report {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Emit the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// CSV table.
    #[arg(long)]
    data: PathBuf,
    /// JSON metadata describing the table columns.
    #[arg(long)]
    meta: PathBuf,
    #[arg(long)]
    measure: QualityMeasure,
    #[arg(long)]
    mincov: usize,
    /// Knowledge document; induction is automatic without it.
    #[arg(long)]
    knowledge: Option<PathBuf>,
    #[arg(long)]
    no_pruning: bool,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = Result<T, Failure>;

/// Loads a table with the schema stored in the model.
fn load_for_model(model: &RuleSet, data: &Path) -> CliResult<Dataset> {
    Ok(load_table(data, model.schema.clone())?)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(args) => {
            let data = load_dataset(&args.data, &args.meta)?;
            let params = InductionParams {
                measure: args.measure,
                mincov: args.mincov,
                pruning: !args.no_pruning,
            };
            let knowledge = args
                .knowledge
                .as_deref()
                .map(|p| Knowledge::from_file(p, data.schema()))
                .transpose()?;
            let model = train(&data, &params, knowledge.as_ref())?;
            save_ruleset(&model, &args.out)?;
            print!("{}", model.to_text());
            log::info!("{} rules written to {}", model.len(), args.out.display());
        }
        Command::Predict { model, data, out } => {
            let model = load_ruleset(&model)?;
            let data = load_for_model(&model, &data)?;
            let predictions = predict_dataset(&model, &data)?;
            save_predictions(&model, &predictions, &out)?;
        }
        Command::Evaluate {
            model,
            data,
            positive_class,
        } => {
            let model = load_ruleset(&model)?;
            let data = load_for_model(&model, &data)?;
            let positive = match positive_class {
                Some(name) => Some(
                    model
                        .schema
                        .class_index(&name)
                        .ok_or_else(|| Failure::Usage(format!("unknown class `{name}`")))?,
                ),
                None => None,
            };
            match evaluate(&model, &data, positive)? {
                Performance::Classification { positive, metrics } => {
                    println!("positive class: {}", model.schema.classes()[positive]);
                    println!("SE = {:.4}", metrics.sensitivity);
                    println!("SP = {:.4}", metrics.specificity);
                    println!("Gm = {:.4}", metrics.g_mean);
                }
                p => println!("{} = {:.4}", p.name(), p.headline()),
            }
        }
        Command::Experiment { config, out } => {
            let config = ExperimentConfig::from_file(&config)?;
            let experiment = run_experiment(&config)?;
            if let Some(dir) = out.or(config.output.clone()) {
                write_outputs(&experiment, &dir)?;
            }
            print!("{}", VariantResult::table(&[&experiment.result]));
        }
        Command::Similarity { model_a, model_b, data } => {
            let a = load_ruleset(&model_a)?;
            let b = load_ruleset(&model_b)?;
            let data = load_for_model(&a, &data)?;
            println!("{:.6}", ruleset_similarity(&a, &b, &data)?);
        }
        Command::Report {
            model,
            data,
            alpha,
            json,
        } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Failure::Usage("--alpha must lie in (0, 1)".into()));
            }
            let model = load_ruleset(&model)?;
            let data = load_for_model(&model, &data)?;
            let report = ruleset_report(&model, &data, alpha)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            } else {
                print!("{}", report.to_table());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 3 } else { 2 })
        }
    }
}
