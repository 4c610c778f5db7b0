use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{read_records, split_dataset, Dataset, RawRecord, Schema, Vocabulary};
use crate::error::{Error, Result};
use crate::interpret::{block_dot_products, corpus_feature_importance, instance_feature_weights, ImportanceMode};
use crate::model::{checkpoint, init_params, score_all, ModelConfig, Parameters};
use crate::train::{auc, logloss, rela_imp, train_with, TrainHistory};

use super::config::{read_pairs, RunConfig};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const HISTORY_FILE: &str = "history.tsv";
pub const METRICS_FILE: &str = "metrics.txt";
pub const CONFIG_FILE: &str = "config.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Val,
    Test,
    All,
}

/// Encoded 8:1:1 partition of a data file.
pub struct Prepared {
    pub schema: Schema,
    pub vocab: Vocabulary,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

fn split_records(config: &RunConfig) -> Result<(Schema, [Vec<RawRecord>; 3])> {
    let schema = Schema::load(config.schema_path()?)?;
    let records = read_records(config.data_path()?, &schema)?;
    let (train, val, test) = split_dataset(&records, config.train.seed)?;
    Ok((schema, [train, val, test]))
}

/// Reads, splits, builds the vocabulary on the training part, and encodes.
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let (schema, [train, val, test]) = split_records(config)?;
    let vocab = Vocabulary::build(&train, &schema, config.min_count)?;
    Ok(Prepared {
        train: Dataset::encode(&train, &vocab)?,
        val: Dataset::encode(&val, &vocab)?,
        test: Dataset::encode(&test, &vocab)?,
        schema,
        vocab,
    })
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub test_auc: f64,
    pub test_logloss: f64,
    pub best_val_auc: f64,
    pub best_epoch: usize,
    pub history: TrainHistory,
    pub model: ModelConfig,
    pub params: Parameters,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Full training run; writes the output directory described by `config.out`.
pub fn run_train(config: &RunConfig, verbose: bool) -> Result<TrainSummary> {
    let data = prepare(config)?;
    let mut model = config.model.clone();
    model.fields = data.schema.len();
    model.validate()?;

    let cards = data.vocab.cardinalities();
    let params = init_params(&model, &cards, config.train.seed, Some(data.train.positive_rate()))?;
    if verbose {
        eprintln!(
            "train {} / val {} / test {} rows, {} parameters",
            data.train.len(),
            data.val.len(),
            data.test.len(),
            params.count()
        );
    }
    let outcome = train_with(&model, params, &data.train, &data.val, &config.train, |r| {
        if verbose {
            eprintln!(
                "epoch {:>3}  loss {:.6}  val_auc {:.6}  val_logloss {:.6}  {:.1}s",
                r.epoch, r.train_loss, r.val_auc, r.val_logloss, r.seconds
            );
        }
    })?;

    let scores = score_all(&data.test, &outcome.params, &model)?;
    let test_auc = auc(&scores, data.test.labels())?;
    let test_logloss = logloss(&scores, data.test.labels());

    let out = &config.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    checkpoint::save(&out.join(CHECKPOINT_FILE), &model, &outcome.params)?;
    data.vocab.save(&out.join(VOCAB_FILE))?;
    write_file(&out.join(HISTORY_FILE), &outcome.history.to_tsv(true))?;
    write_file(&out.join(CONFIG_FILE), &config.to_text())?;
    let mut metrics = String::new();
    writeln!(metrics, "test_auc = {test_auc}").unwrap();
    writeln!(metrics, "test_logloss = {test_logloss}").unwrap();
    writeln!(metrics, "best_val_auc = {}", outcome.best_val_auc).unwrap();
    writeln!(metrics, "best_epoch = {}", outcome.best_epoch).unwrap();
    writeln!(metrics, "epochs_run = {}", outcome.history.epochs.len()).unwrap();
    writeln!(metrics, "parameters = {}", outcome.params.count()).unwrap();
    writeln!(metrics, "rows = {} {} {}", data.train.len(), data.val.len(), data.test.len()).unwrap();
    write_file(&out.join(METRICS_FILE), &metrics)?;

    Ok(TrainSummary {
        test_auc,
        test_logloss,
        best_val_auc: outcome.best_val_auc,
        best_epoch: outcome.best_epoch,
        history: outcome.history,
        model,
        params: outcome.params,
    })
}

/// A trained run directory, loaded back.
pub struct LoadedRun {
    pub config: RunConfig,
    pub model: ModelConfig,
    pub params: Parameters,
    pub vocab: Vocabulary,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let mut config = RunConfig::default();
    config.apply(&read_pairs(&dir.join(CONFIG_FILE))?)?;
    let (model, params) = checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
    let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
    let vocab_cards = vocab.cardinalities();
    if vocab_cards != params.cardinalities() {
        return Err(Error::Checkpoint(format!(
            "checkpoint cardinalities {:?} do not match vocabulary {:?}",
            params.cardinalities(),
            vocab_cards
        )));
    }
    Ok(LoadedRun {
        config,
        model,
        params,
        vocab,
    })
}

/// Encodes the requested part of `data` (default: the run's own data file)
/// with the run's vocabulary.
pub fn load_split(run: &LoadedRun, data: Option<&Path>, schema: Option<&Path>, split: Split) -> Result<Dataset> {
    let mut config = run.config.clone();
    if let Some(d) = data {
        config.data = Some(d.to_path_buf());
    }
    if let Some(s) = schema {
        config.schema = Some(s.to_path_buf());
    }
    let schema = Schema::load(config.schema_path()?)?;
    if schema.len() != run.model.fields {
        return Err(Error::Checkpoint(format!(
            "schema has {} fields, checkpoint was trained with {}",
            schema.len(),
            run.model.fields
        )));
    }
    run.vocab.check_schema(&schema)?;
    let records = read_records(config.data_path()?, &schema)?;
    let rows = match split {
        Split::All => records,
        _ => {
            let (train, val, test) = split_dataset(&records, config.train.seed)?;
            match split {
                Split::Train => train,
                Split::Val => val,
                _ => test,
            }
        }
    };
    Dataset::encode(&rows, &run.vocab)
}

pub struct Evaluation {
    pub auc: f64,
    pub logloss: f64,
    pub rela_imp: Option<f64>,
    pub rows: usize,
}

pub fn run_evaluate(
    run_dir: &Path,
    data: Option<&Path>,
    schema: Option<&Path>,
    split: Split,
    base_auc: Option<f64>,
) -> Result<Evaluation> {
    let run = load_run(run_dir)?;
    let ds = load_split(&run, data, schema, split)?;
    let scores = score_all(&ds, &run.params, &run.model)?;
    let value = auc(&scores, ds.labels())?;
    Ok(Evaluation {
        auc: value,
        logloss: logloss(&scores, ds.labels()),
        rela_imp: base_auc.map(|b| rela_imp(value, b)).transpose()?,
        rows: ds.len(),
    })
}

pub fn evaluation_text(e: &Evaluation) -> String {
    let mut out = format!("rows = {}\nauc = {}\nlogloss = {}\n", e.rows, e.auc, e.logloss);
    if let Some(r) = e.rela_imp {
        writeln!(out, "rela_imp = {:+.2}%", r * 100.0).unwrap();
    }
    out
}

pub enum ExplainMode {
    Instance(usize),
    Corpus { mode: ImportanceMode, alpha: f64 },
}

pub fn run_explain(
    run_dir: &Path,
    data: Option<&Path>,
    schema: Option<&Path>,
    split: Split,
    mode: ExplainMode,
) -> Result<String> {
    let run = load_run(run_dir)?;
    let ds = load_split(&run, data, schema, split)?;
    let names: Vec<&str> = (0..run.vocab.len()).map(|i| run.vocab.field_name(i)).collect();
    match mode {
        ExplainMode::Instance(n) => {
            if n >= ds.len() {
                return Err(Error::data(format!(
                    "instance {n} out of range: split has {} rows",
                    ds.len()
                )));
            }
            let inst = ds.get(n);
            let report = instance_feature_weights(&run.params, inst, &run.model)?;
            let corr = block_dot_products(&run.params, inst, &run.model)?;
            let mut out = format!("instance\t{n}\nlabel\t{}\n", inst.label);
            out.push_str("features\t");
            let feats: Vec<String> = inst
                .indices
                .iter()
                .enumerate()
                .map(|(f, &i)| run.vocab.describe(f, i))
                .collect();
            out.push_str(&feats.join(" "));
            out.push('\n');
            out.push_str(&report.to_text(&names));
            out.push_str(&corr.to_text(&names));
            Ok(out)
        }
        ExplainMode::Corpus { mode, alpha } => {
            let report = corpus_feature_importance(&run.params, &ds, &run.model, mode, alpha)?;
            Ok(report.to_text(&run.vocab))
        }
    }
}

pub(crate) fn default_synth_out() -> PathBuf {
    PathBuf::from("synth")
}
