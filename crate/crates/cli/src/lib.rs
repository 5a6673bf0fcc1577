//! Command-line pipeline: synthesize a corpus, train the classifier, compute
//! saliency, induce and evaluate decision-list explanations.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use unravel_core::{Pooling, Split};

pub use config::{Overrides, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "unravel", version, about = "Gradient-informed decision-list explanations for an LSTM text classifier")]
pub struct Cli {
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory holding all artifacts.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for per-document parallelism.
    #[arg(long, global = true, env = "UNRAVEL_THREADS")]
    pub threads: Option<usize>,
    /// Plain-text `key = value` configuration file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus.
    Synth {
        #[arg(long)]
        keyword_docs: Option<usize>,
        #[arg(long)]
        distractor_docs: Option<usize>,
    },
    /// Train the LSTM classifier and keep the best-validation checkpoint.
    Train {
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        embed: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Dump per-token saliency for every document.
    Saliency {
        #[arg(long)]
        pool: Option<Pooling>,
        /// Also report mean top-k gold accuracy on the test split.
        #[arg(long)]
        eval_gold: bool,
    },
    /// Induce a decision list over skipgram importance features.
    Explain {
        #[arg(long)]
        pool: Option<Pooling>,
        #[arg(long)]
        top_per_doc: Option<usize>,
        #[arg(long)]
        vocab_limit: Option<usize>,
    },
    /// Induce a decision list over frequent-skipgram presence features.
    Baseline {
        #[arg(long)]
        vocab_limit: Option<usize>,
    },
    /// Score a rule file against a feature table.
    Eval {
        #[arg(long, default_value = "test")]
        split: Split,
        /// Defaults to the explain rule file in the output directory.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Defaults to the explain feature table of the chosen split.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Render one document's saliency as an XHTML page.
    Heatmap {
        #[arg(long)]
        doc: String,
        #[arg(long)]
        pool: Option<Pooling>,
    },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            threads: self.threads,
            ..Overrides::default()
        };
        match &self.command {
            Command::Synth {
                keyword_docs,
                distractor_docs,
            } => {
                o.keyword_docs = *keyword_docs;
                o.distractor_docs = *distractor_docs;
            }
            Command::Train {
                hidden,
                embed,
                epochs,
            } => {
                o.hidden = *hidden;
                o.embed = *embed;
                o.epochs = *epochs;
            }
            Command::Saliency { pool, .. } | Command::Heatmap { pool, .. } => o.pool = *pool,
            Command::Explain {
                pool,
                top_per_doc,
                vocab_limit,
            } => {
                o.pool = *pool;
                o.top_per_doc = *top_per_doc;
                o.vocab_limit = *vocab_limit;
            }
            Command::Baseline { .. } | Command::Eval { .. } => {}
        }
        o
    }
}

/// Runs one parsed invocation and returns its summary line.
pub fn execute(cli: Cli) -> CliResult<String> {
    let config = RunConfig::resolve(cli.config.as_deref(), &cli.overrides())?;
    // The global pool can only be configured once per process; later calls
    // keep the first setting.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build_global();
    match cli.command {
        Command::Synth { .. } => commands::synth(&config),
        Command::Train { .. } => commands::train(&config),
        Command::Saliency { eval_gold, .. } => commands::saliency(&config, eval_gold),
        Command::Explain { .. } => commands::explain_cmd(&config),
        Command::Baseline { vocab_limit } => commands::baseline(&config, vocab_limit),
        Command::Eval {
            split,
            rules,
            features,
        } => commands::eval(&config, split, rules, features),
        Command::Heatmap { doc, .. } => commands::heatmap(&config, &doc),
    }
}

/// Parses `args` (program name first), runs the command, prints the summary
/// or a one-line error and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().to_owned();
            let err = CliError::Usage(first.trim_start_matches("error: ").to_owned());
            eprintln!("{err}");
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(err) => {
            eprintln!("{err}");
            err.exit_code()
        }
    }
}
