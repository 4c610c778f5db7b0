#![allow(dead_code)]

use contextnet::data::Dataset;
use contextnet::model::{loss_and_grads, objective, ModelConfig, Parameters};
use contextnet::numeric::Rng;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for the relative error. Central differences at this step carry
/// roundoff near eps·|L|/h ≈ 1e-11, so entries below ~1e-6 are compared on an absolute
/// scale instead (still < 1e-10 absolute error at the 1e-4 threshold).
pub const REL_FLOOR: f64 = 1e-6;

/// Small model with every tensor drawn at unit-ish scale so no gradient is vanishingly small.
pub fn random_model(config: &ModelConfig, cardinalities: &[usize], seed: u64) -> Parameters {
    let mut p = Parameters::zeros(config, cardinalities).unwrap();
    let mut rng = Rng::new(seed);
    let gains: Vec<bool> = p
        .named_tensors()
        .iter()
        .map(|(name, _)| name.ends_with("ln.gain"))
        .collect();
    for (t, gain) in p.tensors_mut().into_iter().zip(gains) {
        for v in t.as_mut_slice() {
            *v = if gain { 1.0 + rng.normal(0.0, 0.2) } else { rng.normal(0.0, 0.6) };
        }
    }
    p
}

/// Random batch; a field with cardinality 1 is treated as numerical.
pub fn random_batch(cardinalities: &[usize], n: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut ds = Dataset::with_fields(cardinalities.len());
    for _ in 0..n {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for &c in cardinalities {
            if c == 1 {
                idx.push(0);
                val.push(rng.normal(0.0, 1.0));
            } else {
                idx.push(rng.below(c));
                val.push(1.0);
            }
        }
        let label = if rng.bernoulli(0.5) { 1.0 } else { 0.0 };
        ds.push(label, &idx, &val);
    }
    ds
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

/// Compares every analytic gradient entry against a central finite difference of the objective.
pub fn check_gradients(batch: &Dataset, params: &Parameters, config: &ModelConfig) -> GradCheck {
    let (_, grads) = loss_and_grads(batch, params, config).unwrap();
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.value.as_slice().to_vec()).collect();
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    let mut probe = params.clone();
    for (ti, name) in names.iter().enumerate() {
        for j in 0..analytic[ti].len() {
            let orig = probe.tensors_mut()[ti].as_slice()[j];
            probe.tensors_mut()[ti].as_mut_slice()[j] = orig + FD_STEP;
            let plus = objective(batch, &probe, config).unwrap();
            probe.tensors_mut()[ti].as_mut_slice()[j] = orig - FD_STEP;
            let minus = objective(batch, &probe, config).unwrap();
            probe.tensors_mut()[ti].as_mut_slice()[j] = orig;
            let fd = (plus - minus) / (2.0 * FD_STEP);
            let an = analytic[ti][j];
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(REL_FLOOR);
            checked += 1;
            if rel > worst.0 {
                worst = (rel, format!("{name}[{j}]: analytic {an:e} vs fd {fd:e}"));
            }
        }
    }
    GradCheck {
        max_rel_error: worst.0,
        worst: worst.1,
        checked,
    }
}

pub const GRAD_CARDS: [usize; 3] = [5, 1, 4];

/// f = 3, k = 4, t = 5, L = 2 under both variants, every sharing strategy, and each
/// single ablation (invalid combinations skipped).
pub fn gradient_suite() -> Vec<ModelConfig> {
    use contextnet::model::{Ablations, Sharing, Variant};
    let mut out = Vec::new();
    for variant in [Variant::Pffn, Variant::Sffn] {
        for sharing in [Sharing::ShareNothing, Sharing::ShareA, Sharing::ShareAP] {
            for ablations in Ablations::singles() {
                let mut c = ModelConfig::new(3);
                c.embedding_size = 4;
                c.aggregation_width = 5;
                c.blocks = 2;
                c.variant = variant;
                c.sharing = sharing;
                c.ablations = ablations;
                if c.validate().is_ok() {
                    out.push(c);
                }
            }
        }
    }
    out
}
