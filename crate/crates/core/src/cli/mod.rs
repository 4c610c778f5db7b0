//! Command-line interface: `train`, `evaluate`, `explain`, `synth`.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::interpret::{ImportanceMode, DEFAULT_ALPHA};
use crate::synth::{self, SynthConfig};

pub use commands::{
    evaluation_text, load_run, load_split, prepare, run_evaluate, run_explain, run_train, Evaluation,
    ExplainMode, LoadedRun, Prepared, Split, TrainSummary, CHECKPOINT_FILE, CONFIG_FILE, HISTORY_FILE,
    METRICS_FILE, VOCAB_FILE,
};
pub use config::{parse_pairs, read_pairs, set_synth, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "contextnet", version, about = "Train, evaluate, and explain ContextNet CTR models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a vocabulary, split 8:1:1, train, and write a run directory.
    Train(TrainArgs),
    /// Score a split with a trained run and print AUC / LogLoss.
    Evaluate(EvaluateArgs),
    /// Per-instance or corpus-level feature attribution.
    Explain(ExplainArgs),
    /// Generate a synthetic dataset with multiplicative pair interactions.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub embedding_size: Option<usize>,
    #[arg(long)]
    pub aggregation_width: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    /// pffn | sffn
    #[arg(long)]
    pub variant: Option<String>,
    /// share-nothing | share-a | share-ap
    #[arg(long)]
    pub sharing: Option<String>,
    /// Comma-separated subset of no_tce,no_ffn,no_ln,no_rc.
    #[arg(long)]
    pub ablations: Option<String>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

impl TrainArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        push("data", path(&self.data));
        push("schema", path(&self.schema));
        push("out", path(&self.out));
        push("min_count", self.min_count.map(|v| v.to_string()));
        push("embedding_size", self.embedding_size.map(|v| v.to_string()));
        push("aggregation_width", self.aggregation_width.map(|v| v.to_string()));
        push("blocks", self.blocks.map(|v| v.to_string()));
        push("variant", self.variant.clone());
        push("sharing", self.sharing.clone());
        push("ablations", self.ablations.clone());
        push("l2", self.l2.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("max_epochs", self.max_epochs.map(|v| v.to_string()));
        push("patience", self.patience.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("eval_every", self.eval_every.map(|v| v.to_string()));
        out
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config.apply(&read_pairs(path)?)?;
        }
        config.apply(&self.overrides())?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Data file to score (default: the run's own data file).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: Split,
    /// Base-model AUC; prints the relative improvement when given.
    #[arg(long)]
    pub base_auc: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Defaults to `test` for `--instance` and `train` for `--corpus`.
    #[arg(long, value_enum)]
    pub split: Option<Split>,
    /// Index of the instance within the split.
    #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
    pub instance: Option<usize>,
    /// Corpus importance: `sum` or `norm`.
    #[arg(long)]
    pub corpus: Option<String>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub fields: Option<usize>,
    #[arg(long)]
    pub cardinality: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Interacting pairs as `a-b,c-d`; default every pair.
    #[arg(long)]
    pub pairs: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SynthArgs {
    pub fn resolve(&self) -> Result<(SynthConfig, PathBuf)> {
        let mut config = SynthConfig::default();
        let mut out = commands::default_synth_out();
        let mut pairs = match &self.config {
            Some(path) => read_pairs(path)?,
            None => Vec::new(),
        };
        let flags = [
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("rows", self.rows.map(|v| v.to_string())),
            ("fields", self.fields.map(|v| v.to_string())),
            ("cardinality", self.cardinality.map(|v| v.to_string())),
            ("latent_dim", self.latent_dim.map(|v| v.to_string())),
            ("scale", self.scale.map(|v| v.to_string())),
            ("pairs", self.pairs.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
        ];
        pairs.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        for (k, v) in &pairs {
            set_synth(&mut config, &mut out, k, v)?;
        }
        Ok((config, out))
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io { .. } => EXIT_USAGE,
        Error::Data(_) | Error::Checkpoint(_) | Error::Shape { .. } => EXIT_DATA,
        Error::NonFiniteLoss { .. } => EXIT_NUMERIC,
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => {
            let config = args.resolve()?;
            let summary = run_train(&config, !args.quiet)?;
            println!("test_auc = {}", summary.test_auc);
            println!("test_logloss = {}", summary.test_logloss);
            println!("output = {}", config.out.display());
        }
        Command::Evaluate(args) => {
            let e = run_evaluate(&args.run, args.data.as_deref(), args.schema.as_deref(), args.split, args.base_auc)?;
            print!("{}", evaluation_text(&e));
        }
        Command::Explain(args) => {
            let (mode, default_split) = match (&args.corpus, args.instance) {
                (Some(m), _) => (
                    ExplainMode::Corpus {
                        mode: m.parse::<ImportanceMode>()?,
                        alpha: args.alpha,
                    },
                    Split::Train,
                ),
                (None, Some(n)) => (ExplainMode::Instance(n), Split::Test),
                (None, None) => return Err(Error::Config("pass --instance N or --corpus sum|norm".into())),
            };
            let split = args.split.unwrap_or(default_split);
            print!(
                "{}",
                run_explain(&args.run, args.data.as_deref(), args.schema.as_deref(), split, mode)?
            );
        }
        Command::Synth(args) => {
            let (config, out) = args.resolve()?;
            let data = synth::generate(&config)?;
            synth::write(&out, &config, &data)?;
            println!("bayes_auc = {}", data.bayes_auc);
            println!("output = {}", out.display());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
