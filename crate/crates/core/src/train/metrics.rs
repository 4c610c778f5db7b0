use crate::error::{Error, Result};
use crate::model::log_loss_term;

/// Area under the ROC curve via the Mann–Whitney rank statistic.
///
/// Tied scores receive their average rank, so a tied positive/negative pair
/// counts one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::data(format!(
            "auc: {} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::data("auc: NaN score"));
    }
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::data("auc is undefined when only one class is present"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (0-based) share the average 1-based rank
        let rank = (start + end + 1) as f64 / 2.0;
        let tied_positives = order[start..end].iter().filter(|&&i| labels[i] == 1.0).count();
        positive_rank_sum += rank * tied_positives as f64;
        start = end;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean clamped cross-entropy.
pub fn logloss(scores: &[f64], labels: &[f64]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let total: f64 = scores.iter().zip(labels).map(|(&s, &y)| log_loss_term(s, y)).sum();
    total / scores.len() as f64
}

/// Relative AUC improvement over a base model with the 0.5 floor removed.
pub fn rela_imp(auc_model: f64, auc_base: f64) -> Result<f64> {
    if !(auc_base > 0.5) {
        return Err(Error::data(format!("rela_imp needs a base AUC above 0.5, got {auc_base}")));
    }
    Ok((auc_model - 0.5) / (auc_base - 0.5) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(scores: &[f64], labels: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1.0 && labels[j] == 0.0 {
                    pairs += 1.0;
                    if si > sj {
                        wins += 1.0;
                    } else if si == sj {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn worked_examples() {
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0.0, 0.0, 1.0, 1.0]).unwrap(), 0.75);
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(auc(&[0.1, 0.2], &[1.0, 1.0]).is_err());
        assert!(auc(&[0.1, 0.2], &[0.0, 0.0]).is_err());
        assert!(auc(&[0.1], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn logloss_examples() {
        assert!((logloss(&[0.5; 4], &[0.0, 1.0, 1.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(logloss(&[1.0], &[1.0]) < 1e-11);
        assert!(logloss(&[0.0], &[1.0]).is_finite());
    }

    #[test]
    fn rela_imp_examples() {
        assert!(((rela_imp(0.8107, 0.7895).unwrap() * 100.0) - 7.32).abs() < 0.01);
        assert!(((rela_imp(0.8681, 0.8446).unwrap() * 100.0) - 6.82).abs() < 0.01);
        assert_eq!(rela_imp(0.7, 0.7).unwrap(), 0.0);
        assert!(rela_imp(0.7, 0.5).is_err());
    }

    fn scored_set() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..20).prop_map(|v| v as f64 / 20.0), n),
                prop::collection::vec(prop::bool::ANY.prop_map(|b| b as u8 as f64), n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_pairwise_oracle((scores, mut labels) in scored_set()) {
            labels[0] = 0.0;
            labels[1] = 1.0;
            prop_assert!((auc(&scores, &labels).unwrap() - brute_force(&scores, &labels)).abs() < 1e-12);
        }

        #[test]
        fn flipped_labels_sum_to_one((scores, mut labels) in scored_set()) {
            labels[0] = 0.0;
            labels[1] = 1.0;
            let flipped: Vec<f64> = labels.iter().map(|y| 1.0 - y).collect();
            let total = auc(&scores, &labels).unwrap() + auc(&scores, &flipped).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_monotone_transform((scores, mut labels) in scored_set()) {
            labels[0] = 0.0;
            labels[1] = 1.0;
            let moved: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&moved, &labels).unwrap());
        }
    }
}
