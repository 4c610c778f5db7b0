//! Dense math kernels with forward and backward forms.

mod activation;
mod layer_norm;
mod matrix;
mod rng;

pub use activation::{relu, relu_backward, relu_forward, relu_mask_in_place, sigmoid};
pub use layer_norm::{layer_norm_backward, layer_norm_forward, layer_norm_rows, LayerNormCache, LN_EPS};
pub use matrix::{add_outer, mat_t_vec_acc, mat_vec, matmul, Matrix};
pub use rng::Rng;
