//! Threshold-sweep ranking metrics over pooled pixels.
//!
//! ROC AUC uses tie-grouped trapezoidal integration, which equals the
//! Mann-Whitney statistic P(score+ > score-) + half the tie mass. PR AUC
//! uses step-wise interpolation over recall (no linear segments between
//! operating points). All arithmetic is f64 regardless of the tensor
//! precision that produced the scores.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor4};

/// The paper-visible evaluation triple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub score: f64,
}

impl MetricReport {
    pub fn new(roc_auc: f64, pr_auc: f64) -> Self {
        MetricReport {
            roc_auc,
            pr_auc,
            score: score(roc_auc, pr_auc),
        }
    }
}

/// Single-number summary: the arithmetic mean of the two AUCs.
pub fn score(roc: f64, pr: f64) -> f64 {
    (roc + pr) / 2.0
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "scores and labels differ in length: {} vs {}",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scores must be finite, found {bad}"
        )));
    }
    Ok(())
}

/// Indices sorted by descending score; equal scores keep input order, which
/// is irrelevant downstream because ties are processed as one group.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    idx
}

/// Area under the ROC curve via the tie-aware threshold sweep.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 {
        return Err(Error::SingleClassLabels("negative"));
    }
    if neg == 0 {
        return Err(Error::SingleClassLabels("positive"));
    }

    let order = descending_order(scores);
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    let mut area2 = 0.0; // twice the unnormalized area, summed exactly
    let mut i = 0;
    while i < order.len() {
        // Consume the whole tie group before adding one trapezoid.
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - prev_fp) as f64 * (tp + prev_tp) as f64;
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(area2 / 2.0 / (pos as f64 * neg as f64))
}

/// Area under the precision-recall curve, stepping over distinct thresholds
/// in descending score order and weighting each precision by its recall gain.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return Err(Error::NoPositiveLabels);
    }

    let order = descending_order(scores);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Flattens a probability map and its binary reference into pooled
/// score/label lists, appending to the given buffers so multiple images can
/// share one pool.
pub fn pool_pixels<T: Real>(
    pred: &Tensor4<T>,
    target: &Tensor4<T>,
    scores: &mut Vec<f64>,
    labels: &mut Vec<bool>,
) -> Result<()> {
    if pred.shape != target.shape {
        return Err(Error::ShapeMismatch {
            context: "pool_pixels",
            left: pred.shape.to_string(),
            right: target.shape.to_string(),
        });
    }
    for (&p, &t) in pred.data.iter().zip(&target.data) {
        if t != T::zero() && t != T::one() {
            return Err(Error::NonBinaryTarget(t.to_f64_lossy()));
        }
        scores.push(p.to_f64_lossy());
        labels.push(t == T::one());
    }
    Ok(())
}

/// Both AUCs plus their mean for one pooled score/label list.
pub fn evaluate_pool(scores: &[f64], labels: &[bool]) -> Result<MetricReport> {
    Ok(MetricReport::new(
        roc_auc(scores, labels)?,
        pr_auc(scores, labels)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Pair-counting oracle: P(s+ > s-) + 0.5 P(tie), all pairs enumerated.
    fn roc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut num, mut pairs) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / pairs
    }

    /// Threshold re-enumeration oracle for PR: every distinct score value is
    /// a threshold; predict positive at score >= t; step integration.
    fn pr_oracle(scores: &[f64], labels: &[bool]) -> f64 {
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let pos = labels.iter().filter(|&&l| l).count() as f64;
        let (mut area, mut prev_recall) = (0.0, 0.0);
        for &t in &thresholds {
            let tp = scores
                .iter()
                .zip(labels)
                .filter(|(&s, &l)| s >= t && l)
                .count() as f64;
            let fp = scores
                .iter()
                .zip(labels)
                .filter(|(&s, &l)| s >= t && !l)
                .count() as f64;
            let recall = tp / pos;
            let precision = tp / (tp + fp);
            area += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        area
    }

    #[test]
    fn roc_known_cases() {
        // Perfect separation.
        let s = [0.9, 0.8, 0.2, 0.1];
        let l = [true, true, false, false];
        assert_eq!(roc_auc(&s, &l).unwrap(), 1.0);
        // All tied: coin flip.
        let s = [0.5; 4];
        assert_eq!(roc_auc(&s, &l).unwrap(), 0.5);
        // 3 of 4 pos/neg pairs correctly ordered.
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [false, false, true, true];
        assert_eq!(roc_auc(&s, &l).unwrap(), 0.75);
        // Perfectly inverted.
        let s = [0.1, 0.2, 0.8, 0.9];
        let l = [true, true, false, false];
        assert_eq!(roc_auc(&s, &l).unwrap(), 0.0);
    }

    #[test]
    fn roc_rejects_single_class_and_bad_input() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[true, true]),
            Err(Error::SingleClassLabels("positive"))
        ));
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[false, false]),
            Err(Error::SingleClassLabels("negative"))
        ));
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
        assert!(roc_auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn pr_known_cases() {
        let s = [0.9, 0.8];
        let l = [true, false];
        assert_eq!(pr_auc(&s, &l).unwrap(), 1.0);
        // Positive ranked last among 3: thresholds 0.9 (P=0/1), 0.8 (0/2),
        // 0.1 (1/3): area = 1 * 1/3.
        let s = [0.9, 0.8, 0.1];
        let l = [false, false, true];
        assert!((pr_auc(&s, &l).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            pr_auc(&[0.5, 0.6], &[false, false]),
            Err(Error::NoPositiveLabels)
        ));
    }

    #[test]
    fn both_aucs_match_oracles_on_random_small_instances() {
        let mut r = rng::stream(99, &[1]);
        for case in 0..2000 {
            let n = r.random_range(2..=12);
            let quantize = case % 3 == 0; // force ties often
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    let v: f64 = r.random_range(0.0..1.0);
                    if quantize {
                        (v * 4.0).round() / 4.0
                    } else {
                        v
                    }
                })
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| r.random::<bool>()).collect();
            let pos = labels.iter().filter(|&&l| l).count();
            if pos > 0 && pos < n {
                let got = roc_auc(&scores, &labels).unwrap();
                let want = roc_oracle(&scores, &labels);
                assert!((got - want).abs() < 1e-12, "roc case {case}: {got} vs {want}");
            }
            if pos > 0 {
                let got = pr_auc(&scores, &labels).unwrap();
                let want = pr_oracle(&scores, &labels);
                assert!((got - want).abs() < 1e-12, "pr case {case}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn score_reference_values() {
        assert!((score(0.9391, 0.8051) - 0.8721).abs() < 1e-12);
        let s = score(0.9550, 0.8419);
        assert!((s - 0.89845).abs() < 1e-12);
        assert_eq!(score(0.7, 0.7), 0.7);
    }

    #[test]
    fn report_couples_score_to_aucs() {
        let r = MetricReport::new(0.9, 0.7);
        assert_eq!(r.score, 0.8);
    }

    #[test]
    fn pool_pixels_validates_and_flattens() {
        use crate::tensor::Shape4;
        let p = Tensor4::from_vec(Shape4::new(1, 1, 1, 3), vec![0.2f64, 0.8, 0.5]).unwrap();
        let t = Tensor4::from_vec(Shape4::new(1, 1, 1, 3), vec![0.0, 1.0, 1.0]).unwrap();
        let (mut s, mut l) = (Vec::new(), Vec::new());
        pool_pixels(&p, &t, &mut s, &mut l).unwrap();
        assert_eq!(s, vec![0.2, 0.8, 0.5]);
        assert_eq!(l, vec![false, true, true]);
        let bad = Tensor4::from_vec(Shape4::new(1, 1, 1, 3), vec![0.0, 0.5, 1.0]).unwrap();
        assert!(matches!(
            pool_pixels(&p, &bad, &mut s, &mut l),
            Err(Error::NonBinaryTarget(_))
        ));
    }

    proptest! {
        /// Strictly increasing transforms cannot change rank statistics.
        #[test]
        fn roc_invariant_under_monotone_transform(
            scores in proptest::collection::vec(-3.0f64..3.0, 2..24),
            labels in proptest::collection::vec(proptest::bool::ANY, 2..24),
        ) {
            let n = scores.len().min(labels.len());
            let (scores, labels) = (&scores[..n], &labels[..n]);
            let pos = labels.iter().filter(|&&l| l).count();
            prop_assume!(pos > 0 && pos < n);
            let warped: Vec<f64> = scores.iter().map(|&s| s.exp()).collect();
            let a = roc_auc(scores, labels).unwrap();
            let b = roc_auc(&warped, labels).unwrap();
            prop_assert_eq!(a, b);
        }

        /// Negating tie-free scores flips the curve: areas sum to 1.
        #[test]
        fn roc_negation_symmetry(
            seed in 0u64..5000,
            n in 2usize..20,
        ) {
            let mut r = rng::stream(seed, &[7]);
            let scores: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            let labels: Vec<bool> = (0..n).map(|_| r.random::<bool>()).collect();
            let pos = labels.iter().filter(|&&l| l).count();
            prop_assume!(pos > 0 && pos < n);
            let neg: Vec<f64> = scores.iter().map(|&s| -s).collect();
            let sum = roc_auc(&scores, &labels).unwrap() + roc_auc(&neg, &labels).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        /// The combined score always lies between its two inputs.
        #[test]
        fn score_between_components(r in 0.0f64..=1.0, p in 0.0f64..=1.0) {
            let s = score(r, p);
            prop_assert!(s >= r.min(p) - 1e-15 && s <= r.max(p) + 1e-15);
        }
    }
}
