//! Epoch loop with validation-AUC early stopping.

use std::fmt::Write as _;
use std::time::Instant;

use crate::data::{batch_iter, Dataset};
use crate::error::{Error, Result};
use crate::model::{loss_and_grads, score_all, ModelConfig, Parameters};
use crate::train::{adam_step, auc, logloss, AdamState};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub max_epochs: usize,
    /// Evaluated epochs without improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Validate every `eval_every` epochs (and always after the last one).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            lr: crate::train::DEFAULT_LR,
            max_epochs: 20,
            patience: 2,
            seed: 0,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every must be >= 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("lr must be finite and >= 0, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Size-weighted mean of the batch objectives seen during the epoch.
    pub train_loss: f64,
    /// NaN on epochs that were not evaluated.
    pub val_auc: f64,
    pub val_logloss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub const HEADER: &'static str = "epoch\ttrain_loss\tval_auc\tval_logloss\tseconds";

    /// Tab-separated rendering; `with_seconds = false` blanks out the timing column.
    pub fn to_tsv(&self, with_seconds: bool) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.epochs {
            let secs = if with_seconds { format!("{:.3}", r.seconds) } else { "-".into() };
            writeln!(
                out,
                "{}\t{:.10}\t{:.10}\t{:.10}\t{secs}",
                r.epoch, r.train_loss, r.val_auc, r.val_logloss
            )
            .unwrap();
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation AUC.
    pub params: Parameters,
    pub history: TrainHistory,
    pub best_epoch: usize,
    pub best_val_auc: f64,
}

/// Trains with Adam, keeping the parameters of the best validation epoch.
pub fn train(
    model: &ModelConfig,
    params: Parameters,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(model, params, train_set, val_set, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    model: &ModelConfig,
    mut params: Parameters,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    model.validate()?;
    if train_set.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    let cards = params.cardinalities();
    train_set.validate(&cards)?;
    val_set.validate(&cards)?;

    let mut adam = AdamState::new(&params, config.lr);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, Parameters)> = None;
    let mut stale = 0;

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        let mut total = 0.0;
        for (b, batch) in batch_iter(train_set, config.batch_size, config.seed, epoch as u64).enumerate() {
            let (loss, grads) = loss_and_grads(&batch, &params, model)?;
            if !loss.objective.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss: loss.objective,
                });
            }
            total += loss.objective * batch.len() as f64;
            adam_step(&mut params, &grads, &mut adam)?;
        }
        let train_loss = total / train_set.len() as f64;

        let evaluate = epoch % config.eval_every == 0 || epoch == config.max_epochs;
        let (val_auc, val_logloss) = if evaluate && !val_set.is_empty() {
            let scores = score_all(val_set, &params, model)?;
            (auc(&scores, val_set.labels())?, logloss(&scores, val_set.labels()))
        } else {
            (f64::NAN, f64::NAN)
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            val_auc,
            val_logloss,
            seconds: started.elapsed().as_secs_f64(),
        };
        history.epochs.push(record);
        on_epoch(&record);

        if !evaluate {
            continue;
        }
        if val_set.is_empty() {
            best = Some((f64::NAN, epoch, params.clone()));
            continue;
        }
        match &best {
            Some((best_auc, _, _)) if val_auc <= *best_auc => {
                stale += 1;
                if stale > config.patience {
                    break;
                }
            }
            _ => {
                best = Some((val_auc, epoch, params.clone()));
                stale = 0;
            }
        }
    }

    let (best_val_auc, best_epoch, params) = best.unwrap_or((f64::NAN, 0, params));
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        best_val_auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, objective};
    use crate::numeric::Rng;

    /// Two categorical fields; the label is 1 exactly when field 0's token is odd.
    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let mut ds = Dataset::with_fields(2);
        for _ in 0..n {
            let a = 1 + rng.below(6);
            let b = 1 + rng.below(4);
            ds.push((a % 2) as f64, &[a, b], &[1.0, 1.0]);
        }
        ds
    }

    fn small_model() -> ModelConfig {
        let mut c = ModelConfig::new(2);
        c.embedding_size = 4;
        c.aggregation_width = 6;
        c.blocks = 1;
        c
    }

    const CARDS: [usize; 2] = [7, 5];

    fn binary_entropy(p: f64) -> f64 {
        -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
    }

    #[test]
    fn prior_head_starts_at_label_entropy() {
        let mut ds = separable(400, 1);
        // skew the label rate away from one half
        for _ in 0..200 {
            ds.push(1.0, &[1, 1], &[1.0, 1.0]);
        }
        let c = small_model();
        let p = init_params(&c, &CARDS, 3, Some(ds.positive_rate())).unwrap();
        let loss = objective(&ds, &p, &c).unwrap();
        assert!((loss - binary_entropy(ds.positive_rate())).abs() < 0.01);
    }

    #[test]
    fn separable_set_loss_decreases() {
        let ds = separable(512, 2);
        let val = separable(128, 3);
        let c = small_model();
        let p = init_params(&c, &CARDS, 4, Some(ds.positive_rate())).unwrap();
        let cfg = TrainConfig {
            batch_size: 32,
            lr: 0.01,
            max_epochs: 5,
            patience: 10,
            ..TrainConfig::default()
        };
        let out = train(&c, p, &ds, &val, &cfg).unwrap();
        let losses: Vec<f64> = out.history.epochs.iter().map(|r| r.train_loss).collect();
        assert_eq!(losses.len(), 5);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        assert!(out.best_val_auc > 0.95);
    }

    #[test]
    fn zero_patience_stops_at_first_non_improving_epoch() {
        let ds = separable(256, 5);
        let val = separable(64, 6);
        let c = small_model();
        let p = init_params(&c, &CARDS, 7, None).unwrap();
        // lr = 0 keeps the validation AUC fixed, so epoch 2 cannot improve.
        let cfg = TrainConfig {
            lr: 0.0,
            max_epochs: 10,
            patience: 0,
            ..TrainConfig::default()
        };
        let out = train(&c, p.clone(), &ds, &val, &cfg).unwrap();
        assert_eq!(out.history.epochs.len(), 2);
        assert_eq!(out.best_epoch, 1);
        assert_eq!(out.params, p);

        let cfg = TrainConfig { patience: 2, ..cfg };
        let out = train(&c, p, &ds, &val, &cfg).unwrap();
        assert_eq!(out.history.epochs.len(), 4);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = separable(300, 8);
        let val = separable(60, 9);
        let c = small_model();
        let cfg = TrainConfig {
            batch_size: 64,
            lr: 0.003,
            max_epochs: 3,
            seed: 11,
            ..TrainConfig::default()
        };
        let run = || {
            let p = init_params(&c, &CARDS, 10, Some(0.5)).unwrap();
            train(&c, p, &ds, &val, &cfg).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.history.to_tsv(false), b.history.to_tsv(false));
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn non_finite_loss_aborts_with_location() {
        let ds = separable(64, 12);
        let c = small_model();
        let mut p = init_params(&c, &CARDS, 13, None).unwrap();
        p.head_bias.set(0, 0, f64::NAN);
        let err = train(&c, p, &ds, &ds, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 1, batch: 0, .. }), "{err}");
    }

    #[test]
    fn history_tsv_layout() {
        let h = TrainHistory {
            epochs: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                val_auc: 0.75,
                val_logloss: 0.25,
                seconds: 1.5,
            }],
        };
        let text = h.to_tsv(true);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TrainHistory::HEADER);
        assert_eq!(lines[1].split('\t').count(), 5);
        assert!(lines[1].ends_with("\t1.500"));
    }
}
