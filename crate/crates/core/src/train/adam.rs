use crate::error::Result;
use crate::model::Parameters;

pub const DEFAULT_LR: f64 = 1e-4;

/// Moment buffers and hyper-parameters of the Adam optimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Parameters,
    pub v: Parameters,
    /// Number of updates applied so far.
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &Parameters, lr: f64) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every tensor.
pub fn adam_step(params: &mut Parameters, grads: &Parameters, state: &mut AdamState) -> Result<()> {
    params.check_same_shape(grads)?;
    params.check_same_shape(&state.m)?;
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let (lr, eps) = (state.lr, state.eps);

    let grads = grads.tensors();
    let moments = state.m.tensors_mut().into_iter().zip(state.v.tensors_mut());
    for ((p, g), (m, v)) in params.tensors_mut().into_iter().zip(grads).zip(moments) {
        let g = g.value.as_slice();
        for (((p, &g), m), v) in p
            .as_mut_slice()
            .iter_mut()
            .zip(g)
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    fn model() -> Parameters {
        let mut c = ModelConfig::new(2);
        c.embedding_size = 2;
        c.aggregation_width = 3;
        c.blocks = 1;
        init_params(&c, &[3, 1], 4, None).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = model();
        let before = p.clone();
        let mut s = AdamState::new(&p, 0.1);
        adam_step(&mut p, &before.zeros_like(), &mut s).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.m, before.zeros_like());
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = model();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.head_bias.set(0, 0, 1.0);
        let mut s = AdamState::new(&p, DEFAULT_LR);
        adam_step(&mut p, &g, &mut s).unwrap();
        // m_hat = 1, v_hat = 1  =>  delta = -lr / (1 + eps)
        let delta = p.head_bias.get(0, 0) - before.head_bias.get(0, 0);
        assert!((delta + DEFAULT_LR / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn zero_lr_advances_moments_only() {
        let mut p = model();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.head_weight.fill(0.5);
        let mut s = AdamState::new(&p, 0.0);
        adam_step(&mut p, &g, &mut s).unwrap();
        assert_eq!(p, before);
        assert!((s.m.head_weight.get(0, 0) - 0.05).abs() < 1e-15);
        assert!((s.v.head_weight.get(0, 0) - 0.00025).abs() < 1e-15);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p = model();
            let mut s = AdamState::new(&p, 0.01);
            for i in 0..5 {
                let mut g = p.clone();
                g.head_bias.set(0, 0, i as f64);
                adam_step(&mut p, &g, &mut s).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_mismatched_gradients() {
        let mut p = model();
        let mut g = p.zeros_like();
        g.head_weight = crate::numeric::Matrix::zeros(1, 7);
        let mut s = AdamState::new(&p, 0.01);
        assert!(adam_step(&mut p, &g, &mut s).is_err());
    }
}
