//! Classification and regression evaluation.
//!
//! Ratios with a zero denominator are reported as null rather than zero;
//! a silent zero would corrupt comparisons across ablation runs.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

/// Confusion counts and the four derived scores for binary labels.
pub fn classification_metrics(predicted: &[u8], truth: &[u8]) -> Result<ClassificationReport> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predictions vs {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("no examples to evaluate"));
    }
    if predicted.iter().chain(truth).any(|&v| v > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            _ => fn_ += 1,
        }
    }
    let n = (tp + fp + tn + fn_) as f64;
    let ratio = |num: u64, den: u64| if den == 0 { None } else { Some(num as f64 / den as f64) };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(ClassificationReport {
        accuracy: (tp + tn) as f64 / n,
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    /// Mean absolute error, in the unit of the inputs.
    pub mae: f64,
    /// Coefficient of determination; null for constant truth or n < 2. May
    /// be negative for predictors worse than the truth mean.
    pub r2: Option<f64>,
    pub n: usize,
}

pub fn regression_metrics(predicted: &[f64], truth: &[f64]) -> Result<RegressionReport> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predictions vs {} targets",
            predicted.len(),
            truth.len()
        )));
    }
    let n = truth.len();
    if n == 0 {
        return Err(Error::invalid("no examples to evaluate"));
    }
    let mae = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n as f64;
    let r2 = if n < 2 {
        None
    } else {
        let mean = truth.iter().sum::<f64>() / n as f64;
        let ss_res: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
        let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
        if ss_tot == 0.0 {
            None
        } else {
            Some(1.0 - ss_res / ss_tot)
        }
    };
    Ok(RegressionReport { mae, r2, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let r = classification_metrics(&[1, 0, 1, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.precision, Some(1.0));
        assert_eq!(r.recall, Some(1.0));
        assert_eq!(r.f1, Some(1.0));
    }

    #[test]
    fn hand_counted_confusion_matrix() {
        // truth (1,1,0,0) vs pred (1,0,1,0): tp=1 fn=1 fp=1 tn=1
        let r = classification_metrics(&[1, 0, 1, 0], &[1, 1, 0, 0]).unwrap();
        assert_eq!(r.true_positives, 1);
        assert_eq!(r.false_negatives, 1);
        assert_eq!(r.false_positives, 1);
        assert_eq!(r.true_negatives, 1);
        assert!((r.accuracy - 0.5).abs() < 1e-12);
        assert!((r.precision.unwrap() - 0.5).abs() < 1e-12);
        assert!((r.recall.unwrap() - 0.5).abs() < 1e-12);
        assert!((r.f1.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn undefined_precision_reported_as_null() {
        let r = classification_metrics(&[0, 0, 0], &[1, 0, 0]).unwrap();
        assert_eq!(r.precision, None);
        assert_eq!(r.recall, Some(0.0));
        assert_eq!(r.f1, None);
    }

    #[test]
    fn zero_precision_and_recall_gives_null_f1() {
        // one false positive, one false negative: P = 0, R = 0, P+R = 0
        let r = classification_metrics(&[1, 0], &[0, 1]).unwrap();
        assert_eq!(r.precision, Some(0.0));
        assert_eq!(r.recall, Some(0.0));
        assert_eq!(r.f1, None);
    }

    #[test]
    fn classification_input_validation() {
        assert!(classification_metrics(&[1], &[1, 0]).is_err());
        assert!(classification_metrics(&[], &[]).is_err());
        assert!(classification_metrics(&[2], &[1]).is_err());
    }

    #[test]
    fn metrics_invariant_under_joint_permutation() {
        let pred = [1, 0, 1, 1, 0, 0, 1];
        let truth = [1, 1, 0, 1, 0, 1, 0];
        let base = classification_metrics(&pred, &truth).unwrap();
        // rotate both by 3
        let rot = |xs: &[u8]| -> Vec<u8> { xs.iter().cycle().skip(3).take(xs.len()).copied().collect() };
        let rotated = classification_metrics(&rot(&pred), &rot(&truth)).unwrap();
        assert_eq!(base, rotated);
    }

    #[test]
    fn regression_perfect_and_baseline() {
        let r = regression_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.r2, Some(1.0));
        // predicting the mean scores exactly zero
        let r = regression_metrics(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r.mae - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.r2.unwrap().abs() < 1e-12);
    }

    #[test]
    fn regression_constant_truth_gives_null_r2() {
        let r = regression_metrics(&[1.0, 2.0], &[5.0, 5.0]).unwrap();
        assert_eq!(r.r2, None);
        assert!((r.mae - 3.5).abs() < 1e-12);
    }

    #[test]
    fn regression_single_point_has_no_r2() {
        let r = regression_metrics(&[4.0], &[5.0]).unwrap();
        assert_eq!(r.r2, None);
        assert_eq!(r.mae, 1.0);
    }

    #[test]
    fn regression_worse_than_mean_is_negative() {
        let r = regression_metrics(&[10.0, -10.0, 10.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.r2.unwrap() < 0.0);
    }
}
