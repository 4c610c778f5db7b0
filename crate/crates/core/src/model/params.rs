use crate::error::{Error, Result};
use crate::model::{ModelConfig, Variant};
use crate::numeric::{Matrix, Rng};

const EMBEDDING_INIT_STD: f64 = 0.01;

/// Fully connected layer `y = W x + b` (column convention).
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out × in`
    pub weight: Matrix,
    /// `1 × out`
    pub bias: Matrix,
}

/// Per-block point-wise map applied to each field's merged embedding
/// (row convention: `m · W1`).
#[derive(Clone, Debug, PartialEq)]
pub struct Ffn {
    pub w1: Matrix,
    /// PFFN only.
    pub b1: Option<Matrix>,
    pub w2: Option<Matrix>,
    pub b2: Option<Matrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Norm {
    pub gain: Matrix,
    pub bias: Matrix,
}

/// Every learnable tensor of a model.
///
/// Tensors an ablation switches off are not allocated.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    /// Per field, `cardinality × k`. Numerical fields have one row (`V_j`).
    pub embeddings: Vec<Matrix>,
    /// Per aggregation slot: `t × (f·k)` weight, `1 × t` bias.
    pub aggregation: Vec<Dense>,
    /// `[slot][field]`: `k × t` weight, `1 × k` bias.
    pub projection: Vec<Vec<Dense>>,
    /// Per block, empty under `no_ffn`.
    pub ffn: Vec<Ffn>,
    /// Per block, empty without layer norm.
    pub norm: Vec<Norm>,
    /// `1 × (f·k)`
    pub head_weight: Matrix,
    /// `1 × 1`
    pub head_bias: Matrix,
}

/// A named view of one tensor in declaration order.
#[derive(Clone, Copy, Debug)]
pub struct TensorRef<'a> {
    pub value: &'a Matrix,
    /// Whether the tensor is included in the L2 penalty.
    pub regularized: bool,
}

impl Parameters {
    /// Allocates zero tensors with the shapes `config` requires.
    pub fn zeros(config: &ModelConfig, cardinalities: &[usize]) -> Result<Self> {
        config.validate()?;
        if cardinalities.len() != config.fields {
            return Err(Error::config(format!(
                "{} cardinalities given for {} fields",
                cardinalities.len(),
                config.fields
            )));
        }
        if let Some(i) = cardinalities.iter().position(|&c| c == 0) {
            return Err(Error::config(format!("field {i} has cardinality 0")));
        }
        let k = config.embedding_size;
        let t = config.aggregation_width;
        let m = config.embedding_width();
        let f = config.fields;

        let embeddings = cardinalities.iter().map(|&c| Matrix::zeros(c, k)).collect();
        let aggregation = (0..config.aggregation_slots())
            .map(|_| Dense {
                weight: Matrix::zeros(t, m),
                bias: Matrix::zeros(1, t),
            })
            .collect();
        let projection = (0..config.projection_slots())
            .map(|_| {
                (0..f)
                    .map(|_| Dense {
                        weight: Matrix::zeros(k, t),
                        bias: Matrix::zeros(1, k),
                    })
                    .collect()
            })
            .collect();
        let ffn = if config.uses_ffn() {
            (0..config.blocks)
                .map(|_| match config.variant {
                    Variant::Sffn => Ffn {
                        w1: Matrix::zeros(k, k),
                        b1: None,
                        w2: None,
                        b2: None,
                    },
                    Variant::Pffn => Ffn {
                        w1: Matrix::zeros(k, k),
                        b1: Some(Matrix::zeros(1, k)),
                        w2: Some(Matrix::zeros(k, k)),
                        b2: Some(Matrix::zeros(1, k)),
                    },
                })
                .collect()
        } else {
            Vec::new()
        };
        let norm = if config.uses_ln() {
            (0..config.blocks)
                .map(|_| Norm {
                    gain: Matrix::zeros(1, k),
                    bias: Matrix::zeros(1, k),
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            embeddings,
            aggregation,
            projection,
            ffn,
            norm,
            head_weight: Matrix::zeros(1, m),
            head_bias: Matrix::zeros(1, 1),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.fill(0.0);
        }
        out
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.embeddings.iter().map(Matrix::rows).collect()
    }

    /// All tensors in declaration order.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    /// Tensor names paired with views, in declaration order.
    pub fn named_tensors(&self) -> Vec<(String, TensorRef<'_>)> {
        fn push<'a>(out: &mut Vec<(String, TensorRef<'a>)>, name: String, value: &'a Matrix, regularized: bool) {
            out.push((name, TensorRef { value, regularized }));
        }
        let mut out = Vec::new();
        for (i, e) in self.embeddings.iter().enumerate() {
            push(&mut out, format!("embedding.{i}"), e, true);
        }
        for (s, a) in self.aggregation.iter().enumerate() {
            push(&mut out, format!("aggregation.{s}.weight"), &a.weight, true);
            push(&mut out, format!("aggregation.{s}.bias"), &a.bias, false);
        }
        for (s, per_field) in self.projection.iter().enumerate() {
            for (d, p) in per_field.iter().enumerate() {
                push(&mut out, format!("projection.{s}.{d}.weight"), &p.weight, true);
                push(&mut out, format!("projection.{s}.{d}.bias"), &p.bias, false);
            }
        }
        for (l, ffn) in self.ffn.iter().enumerate() {
            push(&mut out, format!("block.{l}.ffn.w1"), &ffn.w1, true);
            if let Some(b) = &ffn.b1 {
                push(&mut out, format!("block.{l}.ffn.b1"), b, false);
            }
            if let Some(w) = &ffn.w2 {
                push(&mut out, format!("block.{l}.ffn.w2"), w, true);
            }
            if let Some(b) = &ffn.b2 {
                push(&mut out, format!("block.{l}.ffn.b2"), b, false);
            }
        }
        for (l, n) in self.norm.iter().enumerate() {
            push(&mut out, format!("block.{l}.ln.gain"), &n.gain, false);
            push(&mut out, format!("block.{l}.ln.bias"), &n.bias, false);
        }
        push(&mut out, "head.weight".to_string(), &self.head_weight, true);
        push(&mut out, "head.bias".to_string(), &self.head_bias, false);
        out
    }

    /// Mutable tensors in the same order as [`Parameters::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        out.extend(self.embeddings.iter_mut());
        for a in &mut self.aggregation {
            out.push(&mut a.weight);
            out.push(&mut a.bias);
        }
        for per_field in &mut self.projection {
            for p in per_field {
                out.push(&mut p.weight);
                out.push(&mut p.bias);
            }
        }
        for ffn in &mut self.ffn {
            out.push(&mut ffn.w1);
            if let Some(b) = &mut ffn.b1 {
                out.push(b);
            }
            if let Some(w) = &mut ffn.w2 {
                out.push(w);
            }
            if let Some(b) = &mut ffn.b2 {
                out.push(b);
            }
        }
        for n in &mut self.norm {
            out.push(&mut n.gain);
            out.push(&mut n.bias);
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    /// Number of scalars across all allocated tensors.
    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.value.len()).sum()
    }

    /// Squared L2 norm over regularized tensors (weights and embedding tables).
    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .filter(|t| t.regularized)
            .map(|t| t.value.sum_squares())
            .sum()
    }

    /// Errors unless `other` has exactly the same tensor list and shapes.
    pub fn check_same_shape(&self, other: &Parameters) -> Result<()> {
        let a = self.tensors();
        let b = other.tensors();
        if a.len() != b.len() {
            return Err(Error::Shape {
                op: "parameters",
                left: (a.len(), 0),
                right: (b.len(), 0),
            });
        }
        for (x, y) in a.iter().zip(&b) {
            if x.value.shape() != y.value.shape() {
                return Err(Error::Shape {
                    op: "parameters",
                    left: x.value.shape(),
                    right: y.value.shape(),
                });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.value.is_finite())
    }
}

/// Draws initial parameters.
///
/// Embeddings ~ N(0, 0.01²); FC weights ~ U(±sqrt(6 / (fan_in + fan_out)));
/// biases 0; LN gain 1 and bias 0; head weights 0 and head bias set to the
/// logit of `positive_rate` when given.
pub fn init_params(
    config: &ModelConfig,
    cardinalities: &[usize],
    seed: u64,
    positive_rate: Option<f64>,
) -> Result<Parameters> {
    let mut p = Parameters::zeros(config, cardinalities)?;
    let mut rng = Rng::new(seed);
    let glorot = |rng: &mut Rng, w: &mut Matrix, fan_in: usize, fan_out: usize| {
        let bound = glorot_bound(fan_in, fan_out);
        w.as_mut_slice().iter_mut().for_each(|v| *v = rng.uniform(-bound, bound));
    };
    let k = config.embedding_size;
    let t = config.aggregation_width;
    let m = config.embedding_width();

    for e in &mut p.embeddings {
        e.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = rng.normal(0.0, EMBEDDING_INIT_STD));
    }
    for a in &mut p.aggregation {
        glorot(&mut rng, &mut a.weight, m, t);
    }
    for per_field in &mut p.projection {
        for d in per_field {
            glorot(&mut rng, &mut d.weight, t, k);
        }
    }
    for ffn in &mut p.ffn {
        glorot(&mut rng, &mut ffn.w1, k, k);
        if let Some(w2) = &mut ffn.w2 {
            glorot(&mut rng, w2, k, k);
        }
    }
    for n in &mut p.norm {
        n.gain.fill(1.0);
    }
    if let Some(rate) = positive_rate {
        let rate = rate.clamp(1e-6, 1.0 - 1e-6);
        p.head_bias.set(0, 0, (rate / (1.0 - rate)).ln());
    }
    Ok(p)
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Closed-form parameter count for `config`.
pub fn param_count(config: &ModelConfig, cardinalities: &[usize]) -> usize {
    let k = config.embedding_size;
    let t = config.aggregation_width;
    let f = config.fields;
    let m = f * k;
    let embeddings: usize = cardinalities.iter().sum::<usize>() * k;
    let aggregation = config.aggregation_slots() * (t * m + t);
    let projection = config.projection_slots() * f * (k * t + k);
    let ffn_per_block = match (config.uses_ffn(), config.variant) {
        (false, _) => 0,
        (true, Variant::Sffn) => k * k,
        (true, Variant::Pffn) => 2 * k * k + 2 * k,
    };
    let ln_per_block = if config.uses_ln() { 2 * k } else { 0 };
    let head = m + 1;
    embeddings + aggregation + projection + config.blocks * (ffn_per_block + ln_per_block) + head
}
