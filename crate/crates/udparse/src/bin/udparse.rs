use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use udparse::commands::{self, Overrides};
use udparse::config::Profile;
use udparse::CliError;

/// Joint tagger, lemmatizer and dependency parser for CoNLL-U treebanks.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Model file to write (train, selftrain) or read (predict, evaluate).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Seed for every random stream [default: 94].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Default dimensions and schedule [default: paper].
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// Highest matrix power in the cycle penalty.
    #[arg(long = "K", global = true)]
    k: Option<usize>,
    /// Train without the cycle penalty.
    #[arg(long, global = true)]
    no_cycle_loss: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Gold training treebank.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Development treebank used for model selection and the lr schedule.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Pre-trained word vectors in text format.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// JSON-lines log with one record per epoch.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Maximum number of epochs.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model.
    Train(TrainArgs),
    /// Annotate CoNLL-U or whitespace-tokenized text (one sentence per line).
    Predict {
        input: PathBuf,
        /// Output file [default: standard output].
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Score a prediction against gold annotation.
    Evaluate {
        gold: PathBuf,
        pred: PathBuf,
    },
    /// Train, annotate a raw corpus, retrain on it and fine-tune on gold.
    Selftrain {
        #[command(flatten)]
        train: TrainArgs,
        /// Raw corpus, one sentence per line.
        #[arg(long)]
        raw: Option<PathBuf>,
        /// Where to write the silver treebank [default: <model>.silver.conllu].
        #[arg(long)]
        silver: Option<PathBuf>,
    },
    /// Finite-difference gradient checks of every primitive and layer.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        /// Negate the backward rule of this operation (harness self-test).
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(udparse_core::autodiff::op_names()))]
        inject_fault: Option<String>,
    },
}

fn overrides(g: &Global, t: Option<&TrainArgs>) -> Overrides {
    let mut o = Overrides {
        profile: g.profile,
        seed: g.seed,
        cycle_k: g.k,
        no_cycle_loss: g.no_cycle_loss,
        model: g.model.clone(),
        ..Overrides::default()
    };
    if let Some(t) = t {
        o.train.clone_from(&t.train);
        o.dev.clone_from(&t.dev);
        o.embeddings.clone_from(&t.embeddings);
        o.log.clone_from(&t.log);
        o.epochs = t.epochs;
    }
    o
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let model_flag = || g.model.clone().ok_or_else(|| CliError::Config("--model is required".into()));
    match cli.command {
        Command::Train(t) => {
            let c = commands::resolve_config(g.config.as_deref(), &overrides(g, Some(&t)))?;
            commands::cmd_train(&c, &mut out)?;
        }
        Command::Predict { input, output } => {
            let c = commands::resolve_config(g.config.as_deref(), &overrides(g, None))?;
            let model = c.paths.model.clone().map_or_else(model_flag, Ok)?;
            commands::cmd_predict(&model, &input, output.as_deref(), &mut out)?;
        }
        Command::Evaluate { gold, pred } => {
            commands::cmd_evaluate(&gold, &pred, g.model.as_deref(), &mut out)?;
        }
        Command::Selftrain { train, raw, silver } => {
            let mut o = overrides(g, Some(&train));
            o.raw = raw;
            o.silver = silver;
            let c = commands::resolve_config(g.config.as_deref(), &o)?;
            commands::cmd_selftrain(&c, &mut out)?;
        }
        Command::Gradcheck { instances, inject_fault } => {
            let fault = inject_fault.and_then(|f| udparse_core::autodiff::op_names().iter().copied().find(|n| *n == f));
            commands::cmd_gradcheck(instances, fault, &mut out)?;
        }
    }
    let _ = out.flush();
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
