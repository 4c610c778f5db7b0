//! Synthetic click data with a multiplicative pairwise ground truth.
//!
//! Every categorical token owns a latent vector `u`. The logit of an instance
//! is `scale · Σ_{(a,b) ∈ pairs} ⟨u_a, u_b⟩` over the tokens it carries, and
//! the label is drawn from `Bernoulli(σ(logit))`. Latent vectors are centered
//! within each field, so no single token shifts the click rate on average and
//! an additive model has nothing to learn.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{write_records, FieldKind, RawRecord, Schema};
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, Rng};

pub const DATA_FILE: &str = "data.tsv";
pub const SCHEMA_FILE: &str = "schema.tsv";
pub const INFO_FILE: &str = "synth.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub rows: usize,
    pub fields: usize,
    pub cardinality: usize,
    pub latent_dim: usize,
    pub scale: f64,
    /// Interacting field pairs; `None` means every unordered pair.
    pub pairs: Option<Vec<(usize, usize)>>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rows: 200_000,
            fields: 6,
            cardinality: 50,
            latent_dim: 2,
            scale: 0.35,
            pairs: None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn pair_set(&self) -> Vec<(usize, usize)> {
        match &self.pairs {
            Some(p) => p.clone(),
            None => (0..self.fields)
                .flat_map(|a| (a + 1..self.fields).map(move |b| (a, b)))
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.fields < 2 || self.cardinality == 0 || self.latent_dim == 0 {
            return Err(Error::Config(
                "synth needs fields >= 2, cardinality >= 1, latent_dim >= 1".into(),
            ));
        }
        if !self.scale.is_finite() {
            return Err(Error::Config(format!("scale must be finite, got {}", self.scale)));
        }
        for &(a, b) in &self.pair_set() {
            if a >= self.fields || b >= self.fields || a == b {
                return Err(Error::Config(format!("invalid interacting pair ({a}, {b})")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub schema: Schema,
    pub records: Vec<RawRecord>,
    /// Generating logit per row.
    pub logits: Vec<f64>,
    /// Expected AUC of scoring with the generating probabilities.
    pub bayes_auc: f64,
}

/// Population AUC of `scores` when row `i` is positive with probability `probs[i]`.
///
/// Each (i, j) pair counts with weight `p_i (1 - p_j)`; tied scores count one half.
pub fn expected_auc(scores: &[f64], probs: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut numerator = 0.0;
    // Σ (1 - p_j) over rows strictly below the current tie group
    let mut neg_below = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let group = &order[start..end];
        let pos: f64 = group.iter().map(|&i| probs[i]).sum();
        let neg: f64 = group.iter().map(|&i| 1.0 - probs[i]).sum();
        let self_pairs: f64 = group.iter().map(|&i| probs[i] * (1.0 - probs[i])).sum();
        numerator += pos * neg_below + 0.5 * (pos * neg - self_pairs);
        neg_below += neg;
        start = end;
    }
    let pos_total: f64 = probs.iter().sum();
    let neg_total: f64 = probs.iter().map(|p| 1.0 - p).sum();
    let self_total: f64 = probs.iter().map(|p| p * (1.0 - p)).sum();
    let denom = pos_total * neg_total - self_total;
    if denom <= 0.0 {
        return 0.5;
    }
    numerator / denom
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let pairs = config.pair_set();
    let d = config.latent_dim;

    let mut rng = Rng::derived(config.seed, 0);
    let latent: Vec<Vec<Vec<f64>>> = (0..config.fields)
        .map(|_| {
            let mut tokens: Vec<Vec<f64>> = (0..config.cardinality)
                .map(|_| (0..d).map(|_| rng.normal(0.0, 1.0)).collect())
                .collect();
            for j in 0..d {
                let mean = tokens.iter().map(|u| u[j]).sum::<f64>() / config.cardinality as f64;
                tokens.iter_mut().for_each(|u| u[j] -= mean);
            }
            tokens
        })
        .collect();

    let mut rng = Rng::derived(config.seed, 1);
    let mut records = Vec::with_capacity(config.rows);
    let mut logits = Vec::with_capacity(config.rows);
    let mut probs = Vec::with_capacity(config.rows);
    for _ in 0..config.rows {
        let tokens: Vec<usize> = (0..config.fields).map(|_| rng.below(config.cardinality)).collect();
        let interaction: f64 = pairs
            .iter()
            .map(|&(a, b)| {
                let (ua, ub) = (&latent[a][tokens[a]], &latent[b][tokens[b]]);
                ua.iter().zip(ub).map(|(x, y)| x * y).sum::<f64>()
            })
            .sum();
        let logit = config.scale * interaction;
        let p = sigmoid(logit);
        let label = if rng.bernoulli(p) { "1" } else { "0" };
        records.push(RawRecord::new(label, tokens.iter().map(|t| format!("t{t}"))));
        logits.push(logit);
        probs.push(p);
    }

    let schema = Schema::from_kinds((0..config.fields).map(|i| (format!("f{i}"), FieldKind::Categorical)))?;
    let bayes_auc = expected_auc(&logits, &probs);
    Ok(SynthData {
        schema,
        records,
        logits,
        bayes_auc,
    })
}

pub fn info_text(config: &SynthConfig, data: &SynthData) -> String {
    let mut out = String::new();
    writeln!(out, "rows = {}", config.rows).unwrap();
    writeln!(out, "fields = {}", config.fields).unwrap();
    writeln!(out, "cardinality = {}", config.cardinality).unwrap();
    writeln!(out, "latent_dim = {}", config.latent_dim).unwrap();
    writeln!(out, "scale = {}", config.scale).unwrap();
    writeln!(out, "seed = {}", config.seed).unwrap();
    let pairs: Vec<String> = config.pair_set().iter().map(|(a, b)| format!("{a}-{b}")).collect();
    writeln!(out, "pairs = {}", pairs.join(",")).unwrap();
    writeln!(out, "bayes_auc = {:.10}", data.bayes_auc).unwrap();
    out
}

/// Reads `bayes_auc` back from a written info file.
pub fn read_bayes_auc(dir: &Path) -> Result<f64> {
    let path = dir.join(INFO_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "bayes_auc")
        .and_then(|(_, v)| v.trim().parse().ok())
        .ok_or_else(|| Error::data(format!("{}: no bayes_auc entry", path.display())))
}

/// Writes `data.tsv`, `schema.tsv`, and `synth.txt` into `dir`.
pub fn write(dir: &Path, config: &SynthConfig, data: &SynthData) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_records(&dir.join(DATA_FILE), &data.records)?;
    let schema_path = dir.join(SCHEMA_FILE);
    fs::write(&schema_path, data.schema.to_text()).map_err(|e| Error::io(&schema_path, e))?;
    let info_path = dir.join(INFO_FILE);
    fs::write(&info_path, info_text(config, data)).map_err(|e| Error::io(&info_path, e))
}
