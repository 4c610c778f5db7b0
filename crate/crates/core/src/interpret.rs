//! Feature attribution through the linear prediction head and per-block
//! field-embedding correlations.

use std::fmt::Write as _;

use crate::data::{Dataset, InstanceRef, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{forward_instance, ModelConfig, Parameters};
use crate::numeric::Matrix;

/// Default smoothing constant for normalized corpus importance.
pub const DEFAULT_ALPHA: f64 = 10.0;

/// Signed per-field contributions to one instance's logit.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceReport {
    /// `FW_j = Σ_i w_{jk+i} E_{ji}` over the last block's output.
    pub weights: Vec<f64>,
    /// Head bias `w0`.
    pub bias: f64,
    pub logit: f64,
    pub score: f64,
}

impl InstanceReport {
    /// Field with the largest `|FW_j|`.
    pub fn top_field(&self) -> Option<usize> {
        (0..self.weights.len()).max_by(|&a, &b| self.weights[a].abs().total_cmp(&self.weights[b].abs()))
    }

    pub fn to_text(&self, field_names: &[&str]) -> String {
        let mut out = format!("score\t{:.10}\nlogit\t{:.10}\nbias\t{:.10}\n", self.score, self.logit, self.bias);
        out.push_str("field\tweight\n");
        for (name, w) in field_names.iter().zip(&self.weights) {
            writeln!(out, "{name}\t{w:.10}").unwrap();
        }
        out
    }
}

fn field_weights(final_embedding: &[f64], params: &Parameters, k: usize) -> Vec<f64> {
    final_embedding
        .chunks_exact(k)
        .zip(params.head_weight.as_slice().chunks_exact(k))
        .map(|(e, w)| e.iter().zip(w).map(|(e, w)| e * w).sum())
        .collect()
}

pub fn instance_feature_weights(
    params: &Parameters,
    inst: InstanceRef<'_>,
    config: &ModelConfig,
) -> Result<InstanceReport> {
    let trace = forward_instance(inst, params, config)?;
    Ok(InstanceReport {
        weights: field_weights(trace.final_embedding(), params, config.embedding_size),
        bias: params.head_bias.get(0, 0),
        logit: trace.logit,
        score: trace.score,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImportanceMode {
    /// `Σ |FW_j|`
    Sum,
    /// `Σ |FW_j| / (n + α)`
    Normalized,
}

impl std::str::FromStr for ImportanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "norm" | "normalized" => Ok(Self::Normalized),
            _ => Err(Error::Config(format!("unknown importance mode `{s}` (sum|norm)"))),
        }
    }
}

/// Importance of one feature value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureScore {
    pub field: usize,
    /// Vocabulary index; always 0 for numerical fields.
    pub index: usize,
    /// Number of instances containing the feature.
    pub count: usize,
    pub score: f64,
}

/// Running `Σ |FW|` and occurrence counts per (field, index).
#[derive(Clone, Debug)]
pub struct ImportanceAccumulator {
    sums: Vec<Vec<f64>>,
    counts: Vec<Vec<usize>>,
}

impl ImportanceAccumulator {
    pub fn new(cardinalities: &[usize]) -> Self {
        Self {
            sums: cardinalities.iter().map(|&c| vec![0.0; c]).collect(),
            counts: cardinalities.iter().map(|&c| vec![0; c]).collect(),
        }
    }

    pub fn add(&mut self, indices: &[usize], weights: &[f64]) {
        for (field, (&idx, w)) in indices.iter().zip(weights).enumerate() {
            self.sums[field][idx] += w.abs();
            self.counts[field][idx] += 1;
        }
    }

    /// Scores sorted descending; ties keep (field, index) order.
    pub fn finish(&self, mode: ImportanceMode, alpha: f64) -> Vec<FeatureScore> {
        let mut out = Vec::new();
        for (field, (sums, counts)) in self.sums.iter().zip(&self.counts).enumerate() {
            for (index, (&sum, &count)) in sums.iter().zip(counts).enumerate() {
                let score = match mode {
                    ImportanceMode::Sum => sum,
                    ImportanceMode::Normalized => {
                        let denom = count as f64 + alpha;
                        if denom == 0.0 {
                            0.0
                        } else {
                            sum / denom
                        }
                    }
                };
                out.push(FeatureScore {
                    field,
                    index,
                    count,
                    score,
                });
            }
        }
        out.sort_by(|a, b| b.score.total_cmp(&a.score));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusReport {
    pub mode: ImportanceMode,
    pub alpha: f64,
    pub instances: usize,
    pub features: Vec<FeatureScore>,
}

impl CorpusReport {
    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mode = match self.mode {
            ImportanceMode::Sum => "sum",
            ImportanceMode::Normalized => "norm",
        };
        let mut out = format!("mode\t{mode}\nalpha\t{}\ninstances\t{}\n", self.alpha, self.instances);
        out.push_str("feature\tcount\tscore\n");
        for s in &self.features {
            writeln!(out, "{}\t{}\t{:.10}", vocab.describe(s.field, s.index), s.count, s.score).unwrap();
        }
        out
    }
}

pub fn corpus_feature_importance(
    params: &Parameters,
    dataset: &Dataset,
    config: &ModelConfig,
    mode: ImportanceMode,
    alpha: f64,
) -> Result<CorpusReport> {
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
    }
    dataset.validate(&params.cardinalities())?;
    let mut acc = ImportanceAccumulator::new(&params.cardinalities());
    for inst in dataset.iter() {
        let report = instance_feature_weights(params, inst, config)?;
        acc.add(inst.indices, &report.weights);
    }
    Ok(CorpusReport {
        mode,
        alpha,
        instances: dataset.len(),
        features: acc.finish(mode, alpha),
    })
}

/// Pairwise dot products of field embeddings at every stage of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCorrelation {
    /// Index 0 is the embedding layer, then one `f × f` matrix per block.
    pub matrices: Vec<Matrix>,
}

impl BlockCorrelation {
    pub fn to_text(&self, field_names: &[&str]) -> String {
        let mut out = String::new();
        for (stage, m) in self.matrices.iter().enumerate() {
            writeln!(out, "# block {stage}").unwrap();
            writeln!(out, "\t{}", field_names.join("\t")).unwrap();
            for (r, name) in field_names.iter().enumerate() {
                let cells: Vec<String> = m.row(r).iter().map(|v| format!("{v:.6}")).collect();
                writeln!(out, "{name}\t{}", cells.join("\t")).unwrap();
            }
        }
        out
    }
}

pub fn block_dot_products(
    params: &Parameters,
    inst: InstanceRef<'_>,
    config: &ModelConfig,
) -> Result<BlockCorrelation> {
    let trace = forward_instance(inst, params, config)?;
    let k = config.embedding_size;
    let f = config.fields;
    let matrices = trace
        .stage_embeddings()
        .into_iter()
        .map(|stage| {
            let fields: Vec<&[f64]> = stage.chunks_exact(k).collect();
            let mut m = Matrix::zeros(f, f);
            for i in 0..f {
                for j in i..f {
                    let dot: f64 = fields[i].iter().zip(fields[j]).map(|(a, b)| a * b).sum();
                    m.set(i, j, dot);
                    m.set(j, i, dot);
                }
            }
            m
        })
        .collect();
    Ok(BlockCorrelation { matrices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, Variant};
    use crate::numeric::{sigmoid, Rng};

    const CARDS: [usize; 3] = [5, 1, 4];

    fn model(blocks: usize) -> (ModelConfig, Parameters) {
        let mut c = ModelConfig::new(3);
        c.embedding_size = 4;
        c.aggregation_width = 5;
        c.blocks = blocks;
        c.variant = Variant::Pffn;
        let mut p = init_params(&c, &CARDS, 1, None).unwrap();
        let mut rng = Rng::new(2);
        for t in p.tensors_mut() {
            for v in t.as_mut_slice() {
                *v += rng.normal(0.0, 0.5);
            }
        }
        (c, p)
    }

    fn data(n: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let mut ds = Dataset::with_fields(3);
        for _ in 0..n {
            let idx = [rng.below(5), 0, rng.below(4)];
            ds.push(rng.below(2) as f64, &idx, &[1.0, rng.normal(0.0, 1.0), 1.0]);
        }
        ds
    }

    #[test]
    fn weights_sum_to_logit() {
        let (c, p) = model(2);
        for inst in data(50, 3).iter() {
            let r = instance_feature_weights(&p, inst, &c).unwrap();
            let total: f64 = r.weights.iter().sum::<f64>() + r.bias;
            assert!((total - r.logit).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_head_gives_zero_weights() {
        let (c, mut p) = model(1);
        p.head_weight.fill(0.0);
        let ds = data(1, 4);
        let r = instance_feature_weights(&p, ds.get(0), &c).unwrap();
        assert_eq!(r.weights, vec![0.0; 3]);
        assert_eq!(r.score, sigmoid(p.head_bias.get(0, 0)));
    }

    #[test]
    fn hand_set_corpus_scores() {
        let mut acc = ImportanceAccumulator::new(&[3, 1]);
        acc.add(&[1, 0], &[0.5, -2.0]);
        acc.add(&[1, 0], &[-1.5, 1.0]);
        let norm = acc.finish(ImportanceMode::Normalized, 10.0);
        let get = |field, index| norm.iter().find(|s| s.field == field && s.index == index).unwrap();
        // (|0.5| + |-1.5|) / (2 + 10)
        assert_eq!(get(0, 1).score, 2.0 / 12.0);
        assert_eq!(get(1, 0).score, 3.0 / 12.0);
        assert_eq!(get(0, 2).score, 0.0);
        assert_eq!(get(0, 2).count, 0);
        assert!(norm.windows(2).all(|w| w[0].score >= w[1].score));

        let sum = acc.finish(ImportanceMode::Sum, 10.0);
        assert_eq!(sum[0].score, 3.0);
        assert_eq!(acc.finish(ImportanceMode::Normalized, 0.0).iter().find(|s| s.count == 0).unwrap().score, 0.0);
    }

    #[test]
    fn single_instance_corpus_equals_instance_weights() {
        let (c, p) = model(2);
        let ds = data(1, 5);
        let r = instance_feature_weights(&p, ds.get(0), &c).unwrap();
        let corpus = corpus_feature_importance(&p, &ds, &c, ImportanceMode::Sum, DEFAULT_ALPHA).unwrap();
        for (field, &idx) in ds.get(0).indices.iter().enumerate() {
            let s = corpus.features.iter().find(|s| s.field == field && s.index == idx).unwrap();
            assert_eq!(s.score, r.weights[field].abs());
            assert_eq!(s.count, 1);
        }
    }

    #[test]
    fn sum_mode_is_monotone_in_corpus_size() {
        let (c, p) = model(1);
        let ds = data(20, 6);
        let score_map = |n: usize| {
            let rows: Vec<usize> = (0..n).collect();
            let r = corpus_feature_importance(&p, &ds.select(&rows), &c, ImportanceMode::Sum, 0.0).unwrap();
            let mut v = r.features;
            v.sort_by_key(|s| (s.field, s.index));
            v.into_iter().map(|s| s.score).collect::<Vec<_>>()
        };
        let mut prev = score_map(0);
        for n in 1..=20 {
            let next = score_map(n);
            assert!(prev.iter().zip(&next).all(|(a, b)| b >= a));
            prev = next;
        }
    }

    #[test]
    fn correlations_are_symmetric_with_norm_diagonal() {
        let (c, p) = model(3);
        let ds = data(3, 7);
        for inst in ds.iter() {
            let corr = block_dot_products(&p, inst, &c).unwrap();
            assert_eq!(corr.matrices.len(), 4);
            let trace = forward_instance(inst, &p, &c).unwrap();
            for (m, stage) in corr.matrices.iter().zip(trace.stage_embeddings()) {
                assert_eq!(m, &m.transpose());
                for i in 0..3 {
                    let norm: f64 = stage[i * 4..i * 4 + 4].iter().map(|v| v * v).sum();
                    assert_eq!(m.get(i, i), norm);
                }
            }
        }
    }

    #[test]
    fn untrained_embeddings_are_nearly_orthogonal() {
        let mut c = ModelConfig::new(3);
        c.blocks = 1;
        let p = init_params(&c, &CARDS, 8, None).unwrap();
        let ds = data(1, 9);
        let corr = block_dot_products(&p, ds.get(0), &c).unwrap();
        let m = &corr.matrices[0];
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(m.get(i, j).abs() < 0.01);
                }
            }
        }
    }
}
