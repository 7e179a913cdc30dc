//! Evaluation metrics.

use crate::error::{Error, Result};

/// Area under the ROC curve by the rank-sum (Mann-Whitney) formulation,
/// ties credited 0.5. Labels are 0/1; both classes must be present.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "roc_auc: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Invariant(
            "roc_auc: both classes must be present".into(),
        ));
    }
    // Average ranks over ties, then U = R_pos - n_pos (n_pos + 1) / 2.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&l, _)| l == 1)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn rmse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::Shape(format!(
            "rmse: {} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mse: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64;
    Ok(mse.sqrt())
}

/// Fraction of exact matches between predicted and true class ids.
pub fn accuracy(preds: &[usize], targets: &[usize]) -> Result<f64> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::Shape(format!(
            "accuracy: {} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let hits = preds.iter().zip(targets).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn auc_perfect_and_inverted() {
        let labels = [0, 0, 1, 1];
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 0.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let labels = [0, 1, 0, 1, 1];
        assert_eq!(roc_auc(&[0.5; 5], &labels).unwrap(), 0.5);
    }

    #[test]
    fn auc_single_class_is_error() {
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = Rng::from_seed(1);
        for _ in 0..20 {
            let n = 10 + rng.below(20);
            let scores: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
                continue;
            }
            let base = roc_auc(&scores, &labels).unwrap();
            let warped: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + 3.0).collect();
            let after = roc_auc(&warped, &labels).unwrap();
            assert!((base - after).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_matches_naive_pair_count() {
        let mut rng = Rng::from_seed(2);
        for _ in 0..20 {
            let n = 8 + rng.below(12);
            // Coarse scores force ties.
            let scores: Vec<f64> = (0..n).map(|_| rng.below(5) as f64).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            let n_pos = labels.iter().filter(|&&l| l == 1).count();
            if n_pos == 0 || n_pos == n {
                continue;
            }
            let mut credit = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if labels[i] == 1 && labels[j] == 0 {
                        credit += if scores[i] > scores[j] {
                            1.0
                        } else if scores[i] == scores[j] {
                            0.5
                        } else {
                            0.0
                        };
                    }
                }
            }
            let want = credit / (n_pos * (n - n_pos)) as f64;
            let got = roc_auc(&scores, &labels).unwrap();
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[2.0, 3.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());

        let mut rng = Rng::from_seed(3);
        let preds: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let targets: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let naive = (preds
            .iter()
            .zip(&targets)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / 50.0)
            .sqrt();
        assert!((rmse(&preds, &targets).unwrap() - naive).abs() < 1e-12);
    }
}
