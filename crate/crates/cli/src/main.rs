//! `exted` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error,
//! 3 failed gradient verification.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use exted::model::{EvalEcMode, Mode};

use config::KbKind;

#[derive(Parser, Debug)]
#[command(name = "exted", version, about = "Knowledge-augmented encoder-decoder dialogue model")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// JSON run config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true, value_parser = clap::value_parser!(Mode))]
    pub mode: Option<Mode>,
    #[arg(long, global = true, value_enum)]
    pub kb: Option<KbKind>,
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a vocabulary file from a corpus.
    BuildVocab,
    /// Compute external context vectors for a corpus.
    BuildEc {
        /// Knowledge snapshot: JSON-lines summaries (wiki) or TSV triples (nell).
        #[arg(long)]
        kb_path: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Skip the N(4,1) rescaling.
        #[arg(long)]
        no_scale: bool,
    },
    /// Train a model; writes checkpoints, the vocabulary and metric CSVs.
    Train {
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Perplexity and BLEU-4 report for one or more checkpoints.
    Eval {
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        ec_file: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Greedy response for a context.
    Generate {
        checkpoint: PathBuf,
        context: Option<String>,
        #[arg(long, value_parser = clap::value_parser!(EvalEcMode))]
        ec_mode: Option<EvalEcMode>,
        #[arg(long)]
        max_len: Option<usize>,
        /// Read contexts from stdin, one per line.
        #[arg(long)]
        repl: bool,
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Spread statistics of an ec file, as JSON.
    KbStats { ec_file: PathBuf },
    /// Finite-difference check of the analytic gradients on random small models.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        configs: usize,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(exted::Error),
    Verify(String),
}

impl CliError {
    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(exted::Error::Input(msg.into()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Verify(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "{e}"),
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<exted::Error> for CliError {
    fn from(e: exted::Error) -> Self {
        CliError::Data(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EXTED_LOG", "warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("exted: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(p) => config::RunConfig::load(p)?,
        None => config::RunConfig::default(),
    };
    if g.seed.is_some() {
        cfg.seed = g.seed;
    }
    if g.epochs.is_some() {
        cfg.epochs = g.epochs;
    }
    if g.mode.is_some() {
        cfg.mode = g.mode;
    }
    if g.kb.is_some() {
        cfg.kb = g.kb;
    }
    if g.corpus.is_some() {
        cfg.corpus = g.corpus.clone();
    }
    let out = g.out.clone();
    match cli.command {
        Command::BuildVocab => commands::build_vocab(&cfg, out),
        Command::BuildEc { kb_path, embeddings, no_scale } => {
            if kb_path.is_some() {
                cfg.kb_path = kb_path;
            }
            if embeddings.is_some() {
                cfg.embeddings = embeddings;
            }
            if no_scale {
                cfg.scale_ec = Some(false);
            }
            commands::build_ec(&cfg, out)
        }
        Command::Train { resume } => commands::train(&cfg, out, resume),
        Command::Eval { checkpoints, ec_file, vocab, max_len } => {
            if ec_file.is_some() {
                cfg.ec_file = ec_file;
            }
            if vocab.is_some() {
                cfg.vocab = vocab;
            }
            if max_len.is_some() {
                cfg.max_len = max_len;
            }
            commands::eval(&cfg, &checkpoints, out)
        }
        Command::Generate { checkpoint, context, ec_mode, max_len, repl, vocab } => {
            if max_len.is_some() {
                cfg.max_len = max_len;
            }
            if vocab.is_some() {
                cfg.vocab = vocab;
            }
            commands::generate(&cfg, &checkpoint, context, ec_mode, repl)
        }
        Command::KbStats { ec_file } => commands::kb_stats(&ec_file),
        Command::Gradcheck { configs } => commands::gradcheck(cfg.seed(), configs),
    }
}
