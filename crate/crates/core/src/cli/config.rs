//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::synth::SynthConfig;
use crate::train::TrainConfig;

/// Everything `train` needs. Model fields other than `fields` are taken from here;
/// the field count comes from the schema.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub out: PathBuf,
    pub min_count: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            schema: None,
            out: PathBuf::from("run"),
            min_count: 1,
            model: ModelConfig::new(0),
            train: TrainConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("invalid value `{value}` for `{key}`: {e}")))
}

/// Splits a config file into `(key, value)` pairs. `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", n + 1)))?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub const KEYS: [&'static str; 17] = [
        "data",
        "schema",
        "out",
        "min_count",
        "embedding_size",
        "aggregation_width",
        "blocks",
        "variant",
        "sharing",
        "ablations",
        "l2",
        "batch_size",
        "lr",
        "max_epochs",
        "patience",
        "seed",
        "eval_every",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "schema" => self.schema = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "min_count" => self.min_count = parse(key, value)?,
            "embedding_size" => self.model.embedding_size = parse(key, value)?,
            "aggregation_width" => self.model.aggregation_width = parse(key, value)?,
            "blocks" => self.model.blocks = parse(key, value)?,
            "variant" => self.model.variant = value.parse()?,
            "sharing" => self.model.sharing = value.parse()?,
            "ablations" => self.model.ablations = value.parse()?,
            "l2" => self.model.l2 = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "lr" => self.train.lr = parse(key, value)?,
            "max_epochs" => self.train.max_epochs = parse(key, value)?,
            "patience" => self.train.patience = parse(key, value)?,
            "seed" => self.train.seed = parse(key, value)?,
            "eval_every" => self.train.eval_every = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data.as_deref().ok_or_else(|| Error::Config("no data file given (--data)".into()))
    }

    pub fn schema_path(&self) -> Result<&Path> {
        self.schema
            .as_deref()
            .ok_or_else(|| Error::Config("no schema file given (--schema)".into()))
    }

    /// Resolved configuration in the same `key = value` format it is read from.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let m = &self.model;
        let t = &self.train;
        let values: [String; 17] = [
            path(&self.data),
            path(&self.schema),
            self.out.display().to_string(),
            self.min_count.to_string(),
            m.embedding_size.to_string(),
            m.aggregation_width.to_string(),
            m.blocks.to_string(),
            m.variant.to_string(),
            m.sharing.to_string(),
            m.ablations.to_string(),
            m.l2.to_string(),
            t.batch_size.to_string(),
            t.lr.to_string(),
            t.max_epochs.to_string(),
            t.patience.to_string(),
            t.seed.to_string(),
            t.eval_every.to_string(),
        ];
        for (k, v) in Self::KEYS.iter().zip(values) {
            if !v.is_empty() {
                writeln!(out, "{k} = {v}").unwrap();
            }
        }
        out
    }
}

pub fn set_synth(config: &mut SynthConfig, out: &mut PathBuf, key: &str, value: &str) -> Result<()> {
    match key {
        "out" => *out = PathBuf::from(value),
        "rows" => config.rows = parse(key, value)?,
        "fields" => config.fields = parse(key, value)?,
        "cardinality" => config.cardinality = parse(key, value)?,
        "latent_dim" => config.latent_dim = parse(key, value)?,
        "scale" => config.scale = parse(key, value)?,
        "seed" => config.seed = parse(key, value)?,
        "pairs" => {
            let pairs = value
                .split(',')
                .map(|p| {
                    let (a, b) = p
                        .trim()
                        .split_once('-')
                        .ok_or_else(|| Error::Config(format!("pair `{p}` is not `a-b`")))?;
                    Ok((parse(key, a)?, parse(key, b)?))
                })
                .collect::<Result<Vec<_>>>()?;
            config.pairs = Some(pairs);
        }
        _ => return Err(Error::Config(format!("unknown synth configuration key `{key}`"))),
    }
    Ok(())
}
