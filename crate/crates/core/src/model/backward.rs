//! Hand-written reverse pass and the training objective.

use crate::data::{Batch, InstanceRef};
use crate::error::Result;
use crate::model::forward::{forward_instance, log_loss_term, InstanceTrace};
use crate::model::{ModelConfig, Parameters, Variant};
use crate::numeric::{add_outer, layer_norm_backward, mat_t_vec_acc, matmul, relu_mask_in_place, Matrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    /// Mean log loss over the batch.
    pub data_loss: f64,
    /// `λ ‖Θ‖²`
    pub penalty: f64,
    pub objective: f64,
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += v;
    }
}

/// `acc += aᵀ · b` for row-major `a` (`n × p`) and `b` (`n × q`).
fn add_transpose_product(acc: &mut Matrix, a: &Matrix, b: &Matrix) {
    for r in 0..a.rows() {
        add_outer(acc, a.row(r), b.row(r));
    }
}

/// Accumulates `dlogit · ∂logit/∂Θ` for one instance into `grads`.
pub fn backward_instance(
    inst: InstanceRef<'_>,
    trace: &InstanceTrace,
    dlogit: f64,
    params: &Parameters,
    config: &ModelConfig,
    grads: &mut Parameters,
) {
    let k = config.embedding_size;
    let f = config.fields;

    // head
    let last = trace.final_embedding();
    for (g, x) in grads.head_weight.as_mut_slice().iter_mut().zip(last) {
        *g += dlogit * x;
    }
    grads.head_bias.as_mut_slice()[0] += dlogit;
    let mut d_out: Vec<f64> = params.head_weight.as_slice().iter().map(|w| dlogit * w).collect();

    let mut d_act: Vec<Vec<f64>> = trace
        .aggregations
        .iter()
        .map(|a| vec![0.0; a.act.len()])
        .collect();

    for l in (0..config.blocks).rev() {
        let bt = &trace.blocks[l];

        let d_pre_norm = if config.uses_ln() {
            let mut dz = Vec::with_capacity(f * k);
            let norm_grad = &mut grads.norm[l];
            for (cache, dy) in bt.norms.iter().zip(d_out.chunks_exact(k)) {
                let (dx, dgain, dbias) = layer_norm_backward(cache, dy);
                add_into(norm_grad.gain.as_mut_slice(), &dgain);
                add_into(norm_grad.bias.as_mut_slice(), &dbias);
                dz.extend_from_slice(&dx);
            }
            dz
        } else {
            d_out
        };

        let d_merged = if config.uses_ffn() {
            let ffn = &params.ffn[l];
            let ffn_grad = &mut grads.ffn[l];
            let merged = Matrix::from_vec(f, k, bt.merged.clone()).expect("f x k");
            let dz = Matrix::from_vec(f, k, d_pre_norm).expect("f x k");
            match config.variant {
                Variant::Sffn => {
                    add_transpose_product(&mut ffn_grad.w1, &merged, &dz);
                    matmul(&dz, &ffn.w1.transpose()).expect("k x k").into_vec()
                }
                Variant::Pffn => {
                    let hidden_pre = bt.hidden_pre.as_ref().expect("pffn trace");
                    let hidden: Vec<f64> = hidden_pre.iter().map(|&v| crate::numeric::relu(v)).collect();
                    let hidden = Matrix::from_vec(f, k, hidden).expect("f x k");
                    let w2 = ffn.w2.as_ref().expect("pffn w2");
                    add_transpose_product(ffn_grad.w2.as_mut().expect("pffn w2"), &hidden, &dz);
                    let b2 = ffn_grad.b2.as_mut().expect("pffn b2");
                    for r in 0..f {
                        add_into(b2.as_mut_slice(), dz.row(r));
                    }
                    let mut dh = matmul(&dz, &w2.transpose()).expect("k x k");
                    relu_mask_in_place(hidden_pre, dh.as_mut_slice());
                    add_transpose_product(&mut ffn_grad.w1, &merged, &dh);
                    let b1 = ffn_grad.b1.as_mut().expect("pffn b1");
                    for r in 0..f {
                        add_into(b1.as_mut_slice(), dh.row(r));
                    }
                    let mut dm = matmul(&dh, &ffn.w1.transpose()).expect("k x k").into_vec();
                    if !config.ablations.no_rc {
                        add_into(&mut dm, dz.as_slice());
                    }
                    dm
                }
            }
        } else {
            d_pre_norm
        };

        d_out = match &bt.context {
            Some(ce) => {
                let d_prev: Vec<f64> = d_merged.iter().zip(ce).map(|(d, c)| d * c).collect();
                let d_ce: Vec<f64> = d_merged.iter().zip(&bt.input).map(|(d, e)| d * e).collect();
                let a_slot = config.aggregation_slot(l);
                let p_slot = config.projection_slot(l);
                let act = &trace.aggregations[a_slot].act;
                for (d, dce) in d_ce.chunks_exact(k).enumerate() {
                    let g = &mut grads.projection[p_slot][d];
                    add_outer(&mut g.weight, dce, act);
                    add_into(g.bias.as_mut_slice(), dce);
                    mat_t_vec_acc(&params.projection[p_slot][d].weight, dce, &mut d_act[a_slot]);
                }
                d_prev
            }
            None => d_merged,
        };
    }

    // d_out is now the gradient w.r.t. the embedding layer through the block chain;
    // add the contextual-embedding paths.
    let mut d_embedding = d_out;
    for (slot, (agg, mut d)) in trace.aggregations.iter().zip(d_act).enumerate() {
        relu_mask_in_place(&agg.pre, &mut d);
        let g = &mut grads.aggregation[slot];
        add_outer(&mut g.weight, &d, &trace.embedding);
        add_into(g.bias.as_mut_slice(), &d);
        mat_t_vec_acc(&params.aggregation[slot].weight, &d, &mut d_embedding);
    }

    for (field, ((&idx, &value), de)) in inst
        .indices
        .iter()
        .zip(inst.values)
        .zip(d_embedding.chunks_exact(k))
        .enumerate()
    {
        if value == 0.0 {
            continue;
        }
        for (g, d) in grads.embeddings[field].row_mut(idx).iter_mut().zip(de) {
            *g += d * value;
        }
    }
}

/// Adds the gradient of `λ ‖Θ‖²` (`2 λ θ` on weight tensors).
pub fn add_l2_gradient(params: &Parameters, l2: f64, grads: &mut Parameters) {
    if l2 == 0.0 {
        return;
    }
    let regularized: Vec<bool> = params.tensors().iter().map(|t| t.regularized).collect();
    for ((g, t), reg) in grads.tensors_mut().into_iter().zip(params.tensors()).zip(regularized) {
        if reg {
            g.add_scaled(t.value, 2.0 * l2).expect("same shapes");
        }
    }
}

/// Mean log loss plus L2 penalty over `batch`, and its gradient.
pub fn loss_and_grads(
    batch: &Batch,
    params: &Parameters,
    config: &ModelConfig,
) -> Result<(LossBreakdown, Parameters)> {
    let mut grads = params.zeros_like();
    let n = batch.len().max(1) as f64;
    let mut loss = 0.0;
    for inst in batch.iter() {
        let trace = forward_instance(inst, params, config)?;
        if !trace.logit.is_finite() {
            // nothing meaningful to backpropagate; the caller sees the NaN objective
            let nan = LossBreakdown {
                data_loss: f64::NAN,
                penalty: f64::NAN,
                objective: f64::NAN,
            };
            return Ok((nan, grads));
        }
        loss += log_loss_term(trace.score, inst.label);
        let dlogit = (trace.score - inst.label) / n;
        backward_instance(inst, &trace, dlogit, params, config, &mut grads);
    }
    let data_loss = loss / n;
    let penalty = config.l2 * params.l2_norm();
    add_l2_gradient(params, config.l2, &mut grads);
    Ok((
        LossBreakdown {
            data_loss,
            penalty,
            objective: data_loss + penalty,
        },
        grads,
    ))
}

/// Objective only (no gradient); used by finite-difference checks.
pub fn objective(batch: &Batch, params: &Parameters, config: &ModelConfig) -> Result<f64> {
    let n = batch.len().max(1) as f64;
    let mut loss = 0.0;
    for inst in batch.iter() {
        let trace = forward_instance(inst, params, config)?;
        loss += log_loss_term(trace.score, inst.label);
    }
    Ok(loss / n + config.l2 * params.l2_norm())
}
