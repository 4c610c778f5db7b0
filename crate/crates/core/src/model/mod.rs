//! The ContextNet model: parameters, forward pass, and hand-written backward pass.

mod backward;
pub mod checkpoint;
mod config;
mod forward;
mod params;

pub use backward::{add_l2_gradient, backward_instance, loss_and_grads, objective, LossBreakdown};
pub use config::{Ablations, ModelConfig, Sharing, Variant};
pub use forward::{
    block_forward, embed, embed_instance, forward_instance, head_logit, log_loss_term, predict, score_all,
    tce_forward, AggregationTrace, BlockTrace, InstanceTrace, TapeCache, LOG_CLAMP,
};
pub use params::{glorot_bound, init_params, param_count, Dense, Ffn, Norm, Parameters, TensorRef};
