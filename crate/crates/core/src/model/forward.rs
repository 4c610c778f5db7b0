//! Forward pass: embedding layer, contextual embedding, refinement blocks, and
//! the logistic prediction head.
//!
//! Blocks operate on one instance at a time. `f` field embeddings of width `k`
//! are kept concatenated in a flat `f·k` vector; viewed as an `f × k` matrix,
//! row `i` is field `i`.

use crate::data::{Batch, InstanceRef};
use crate::error::{Error, Result};
use crate::model::{Dense, ModelConfig, Parameters, Variant};
use crate::numeric::{
    layer_norm_forward, mat_vec, matmul, relu, sigmoid, LayerNormCache, Matrix, LN_EPS,
};

/// Probabilities are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]` before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// Binary cross-entropy of one prediction.
#[inline]
pub fn log_loss_term(score: f64, label: f64) -> f64 {
    let p = score.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// Aggregation-layer activations for one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregationTrace {
    /// `A E + a`
    pub pre: Vec<f64>,
    /// `ReLU(A E + a)`
    pub act: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockTrace {
    /// Field embeddings entering the block.
    pub input: Vec<f64>,
    /// Contextual embedding per field, absent under `no_tce`.
    pub context: Option<Vec<f64>>,
    /// `input ⊙ context`
    pub merged: Vec<f64>,
    /// PFFN hidden pre-activation `M W1 + b1`.
    pub hidden_pre: Option<Vec<f64>>,
    /// FFN output before layer norm.
    pub pre_norm: Option<Vec<f64>>,
    /// One cache per field.
    pub norms: Vec<LayerNormCache>,
    pub output: Vec<f64>,
}

/// Everything the backward pass needs for one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceTrace {
    /// Embedding layer output `E`; the only input to every contextual embedding.
    pub embedding: Vec<f64>,
    /// One entry per aggregation slot (shared slots are computed once).
    pub aggregations: Vec<AggregationTrace>,
    pub blocks: Vec<BlockTrace>,
    pub logit: f64,
    pub score: f64,
}

impl InstanceTrace {
    /// Output of the last block (the embedding layer when there are no blocks).
    pub fn final_embedding(&self) -> &[f64] {
        self.blocks.last().map_or(&self.embedding, |b| &b.output)
    }

    /// Field embeddings after each stage: index 0 is the embedding layer.
    pub fn stage_embeddings(&self) -> Vec<&[f64]> {
        std::iter::once(self.embedding.as_slice())
            .chain(self.blocks.iter().map(|b| b.output.as_slice()))
            .collect()
    }
}

/// Per-batch forward intermediates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TapeCache {
    pub traces: Vec<InstanceTrace>,
}

/// Embedding layer for one instance: `[E_1 | ... | E_f]` with `E_i = table_i[idx] * value`.
pub fn embed_instance(inst: InstanceRef<'_>, params: &Parameters) -> Result<Vec<f64>> {
    let f = params.embeddings.len();
    if inst.indices.len() != f || inst.values.len() != f {
        return Err(Error::data(format!(
            "instance has {} fields, model expects {f}",
            inst.indices.len()
        )));
    }
    let k = params.embeddings.first().map_or(0, Matrix::cols);
    let mut e = Vec::with_capacity(f * k);
    for (field, ((&idx, &value), table)) in inst
        .indices
        .iter()
        .zip(inst.values)
        .zip(&params.embeddings)
        .enumerate()
    {
        if idx >= table.rows() {
            return Err(Error::data(format!(
                "field {field}: index {idx} out of range for table with {} rows",
                table.rows()
            )));
        }
        e.extend(table.row(idx).iter().map(|w| w * value));
    }
    Ok(e)
}

/// Embedding layer for a batch, `B × (f·k)`.
pub fn embed(batch: &Batch, params: &Parameters) -> Result<Matrix> {
    let m = params.head_weight.cols();
    let mut out = Matrix::zeros(batch.len(), m);
    for (r, inst) in batch.iter().enumerate() {
        out.row_mut(r).copy_from_slice(&embed_instance(inst, params)?);
    }
    Ok(out)
}

fn dense_forward(layer: &Dense, x: &[f64]) -> Vec<f64> {
    let mut y = mat_vec(&layer.weight, x);
    for (v, b) in y.iter_mut().zip(layer.bias.as_slice()) {
        *v += b;
    }
    y
}

pub(crate) fn aggregation_forward(layer: &Dense, embedding: &[f64]) -> AggregationTrace {
    let pre = dense_forward(layer, embedding);
    let act = pre.iter().map(|&v| relu(v)).collect();
    AggregationTrace { pre, act }
}

/// Contextual embedding of field `field` in block `block`:
/// `P · ReLU(A · E + a) + p`.
///
/// `embedding` must be the embedding-layer output, never a block output.
pub fn tce_forward(
    embedding: &[f64],
    block: usize,
    field: usize,
    params: &Parameters,
    config: &ModelConfig,
) -> Vec<f64> {
    assert!(config.uses_tce(), "model has no contextual embedding");
    let agg = aggregation_forward(&params.aggregation[config.aggregation_slot(block)], embedding);
    dense_forward(&params.projection[config.projection_slot(block)][field], &agg.act)
}

fn contexts(aggregation: &AggregationTrace, block: usize, params: &Parameters, config: &ModelConfig) -> Vec<f64> {
    params.projection[config.projection_slot(block)]
        .iter()
        .flat_map(|layer| dense_forward(layer, &aggregation.act))
        .collect()
}

fn add_row_bias(m: &mut Matrix, bias: &Matrix) {
    for r in 0..m.rows() {
        for (v, b) in m.row_mut(r).iter_mut().zip(bias.as_slice()) {
            *v += b;
        }
    }
}

/// One refinement block: Hadamard merge with the contextual embedding, then
/// the configured non-linear map, applied identically to every field.
pub fn block_forward(
    input: &[f64],
    context: Option<&[f64]>,
    block: usize,
    params: &Parameters,
    config: &ModelConfig,
) -> BlockTrace {
    let k = config.embedding_size;
    let f = config.fields;
    assert!(block < config.blocks);
    assert_eq!(input.len(), f * k);

    let merged: Vec<f64> = match context {
        Some(ce) => input.iter().zip(ce).map(|(e, c)| e * c).collect(),
        None => input.to_vec(),
    };
    if !config.uses_ffn() {
        return BlockTrace {
            input: input.to_vec(),
            context: context.map(<[f64]>::to_vec),
            output: merged.clone(),
            merged,
            hidden_pre: None,
            pre_norm: None,
            norms: Vec::new(),
        };
    }

    let ffn = &params.ffn[block];
    let fields = Matrix::from_vec(f, k, merged.clone()).expect("merged is f x k");
    let (hidden_pre, pre_norm) = match config.variant {
        Variant::Sffn => (None, matmul(&fields, &ffn.w1).expect("k x k")),
        Variant::Pffn => {
            let mut h = matmul(&fields, &ffn.w1).expect("k x k");
            add_row_bias(&mut h, ffn.b1.as_ref().expect("pffn b1"));
            let hidden_pre = h.as_slice().to_vec();
            h.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
            let mut z = matmul(&h, ffn.w2.as_ref().expect("pffn w2")).expect("k x k");
            add_row_bias(&mut z, ffn.b2.as_ref().expect("pffn b2"));
            if !config.ablations.no_rc {
                z.add_scaled(&fields, 1.0).expect("same shape");
            }
            (Some(hidden_pre), z)
        }
    };
    let pre_norm = pre_norm.into_vec();

    let (output, norms) = if config.uses_ln() {
        let norm = &params.norm[block];
        let mut out = Vec::with_capacity(f * k);
        let mut caches = Vec::with_capacity(f);
        for row in pre_norm.chunks_exact(k) {
            let (y, cache) = layer_norm_forward(row, norm.gain.as_slice(), norm.bias.as_slice(), LN_EPS);
            out.extend_from_slice(&y);
            caches.push(cache);
        }
        (out, caches)
    } else {
        (pre_norm.clone(), Vec::new())
    };

    BlockTrace {
        input: input.to_vec(),
        context: context.map(<[f64]>::to_vec),
        merged,
        hidden_pre,
        pre_norm: Some(pre_norm),
        norms,
        output,
    }
}

/// Full forward pass for one instance.
pub fn forward_instance(inst: InstanceRef<'_>, params: &Parameters, config: &ModelConfig) -> Result<InstanceTrace> {
    let embedding = embed_instance(inst, params)?;
    let aggregations: Vec<AggregationTrace> = params
        .aggregation
        .iter()
        .map(|layer| aggregation_forward(layer, &embedding))
        .collect();

    let mut blocks: Vec<BlockTrace> = Vec::with_capacity(config.blocks);
    for l in 0..config.blocks {
        let ce = config
            .uses_tce()
            .then(|| contexts(&aggregations[config.aggregation_slot(l)], l, params, config));
        let input = blocks.last().map_or(embedding.as_slice(), |b| b.output.as_slice());
        let trace = block_forward(input, ce.as_deref(), l, params, config);
        blocks.push(trace);
    }

    let last = blocks.last().map_or(embedding.as_slice(), |b| b.output.as_slice());
    let logit = head_logit(last, params);
    Ok(InstanceTrace {
        embedding,
        aggregations,
        blocks,
        logit,
        score: sigmoid(logit),
    })
}

/// `w0 + Σ w_i x_i` over the bits of the final field embeddings.
pub fn head_logit(final_embedding: &[f64], params: &Parameters) -> f64 {
    params.head_bias.get(0, 0)
        + params
            .head_weight
            .as_slice()
            .iter()
            .zip(final_embedding)
            .map(|(w, x)| w * x)
            .sum::<f64>()
}

/// Scores every instance of `batch` and keeps the traces for backward.
pub fn predict(batch: &Batch, params: &Parameters, config: &ModelConfig) -> Result<(Vec<f64>, TapeCache)> {
    let traces = batch
        .iter()
        .map(|inst| forward_instance(inst, params, config))
        .collect::<Result<Vec<_>>>()?;
    let scores = traces.iter().map(|t| t.score).collect();
    Ok((scores, TapeCache { traces }))
}

/// Scores without retaining traces.
pub fn score_all(data: &crate::data::Dataset, params: &Parameters, config: &ModelConfig) -> Result<Vec<f64>> {
    data.iter()
        .map(|inst| forward_instance(inst, params, config).map(|t| t.score))
        .collect()
}
