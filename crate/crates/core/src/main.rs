use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xlcoref::cli::{cmd_decode, cmd_project, cmd_score, cmd_train, format_report, CliError, RunConfig};
use xlcoref::features::{SENTENCE_DISTANCE_EDGES, WORD_DISTANCE_EDGES};

#[derive(Parser)]
#[command(name = "xlcoref", about = "Cross-lingual coreference resolution toolkit")]
struct Args {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the model seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for document-parallel decode.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the decoding threshold.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Print the distance-bin edges and exit.
    #[arg(long, global = true)]
    show_bin_edges: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the cross-lingual projection and write projected vectors.
    Project,
    /// Train a model and keep the dev-best parameters.
    Train,
    /// Decode documents into clusterings with a trained model.
    Decode,
    /// Score a system clustering file against gold.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        sys: PathBuf,
    },
}

fn run(args: Args) -> Result<(), CliError> {
    if args.show_bin_edges {
        eprintln!("word distance bin upper edges: {WORD_DISTANCE_EDGES:?} then unbounded");
        eprintln!("sentence distance bin upper edges: {SENTENCE_DISTANCE_EDGES:?} then unbounded");
        return Ok(());
    }
    let command = args
        .command
        .ok_or_else(|| CliError::User("no command given; see --help".into()))?;

    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.model.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    if let Some(threshold) = args.threshold {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(CliError::User("--threshold must be in (0,1)".into()));
        }
        config.decoder.threshold = threshold;
        config.model.decode_threshold = threshold;
    }

    match command {
        Command::Project => cmd_project(&config),
        Command::Train => cmd_train(&config),
        Command::Decode => cmd_decode(&config),
        Command::Score { gold, sys } => {
            let report = cmd_score(&gold, &sys)?;
            print!("{}", format_report(&report));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
