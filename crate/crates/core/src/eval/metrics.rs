use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::math::sqrt;
use crate::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a == 0 {
        return Err(invalid("metric of an empty input"));
    }
    if a != b {
        return Err(Error::Shape {
            op: "metric",
            lhs: (a, 1),
            rhs: (b, 1),
        });
    }
    Ok(())
}

/// Fraction of positions where `pred == truth`.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Per-class true positive, false positive and false negative counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
}

impl ConfusionCounts {
    pub fn new(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<Self> {
        check_lengths(pred.len(), truth.len())?;
        let mut c = ConfusionCounts {
            tp: vec![0; num_classes],
            fp: vec![0; num_classes],
            fn_: vec![0; num_classes],
        };
        for (&p, &t) in pred.iter().zip(truth) {
            if p >= num_classes || t >= num_classes {
                return Err(invalid(format!(
                    "class id {} out of range for {num_classes} classes",
                    p.max(t)
                )));
            }
            if p == t {
                c.tp[t] += 1;
            } else {
                c.fp[p] += 1;
                c.fn_[t] += 1;
            }
        }
        Ok(c)
    }

    pub fn num_classes(&self) -> usize {
        self.tp.len()
    }

    /// F1 of class `c`, or `None` when the class is absent from both prediction
    /// and truth.
    pub fn f1(&self, c: usize) -> Option<f64> {
        let denom = 2 * self.tp[c] + self.fp[c] + self.fn_[c];
        (denom > 0).then(|| 2.0 * self.tp[c] as f64 / denom as f64)
    }
}

/// Unweighted mean of per-class F1 over classes present in prediction or truth.
pub fn macro_f1(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<f64> {
    let counts = ConfusionCounts::new(pred, truth, num_classes)?;
    let scores: Vec<f64> = (0..num_classes).filter_map(|c| counts.f1(c)).collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Error of predicted probabilities against 0/1 labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkMetrics {
    pub rmse: f64,
    pub mae: f64,
}

pub fn link_metrics(scores: &[f64], labels: &[f64]) -> Result<LinkMetrics> {
    check_lengths(scores.len(), labels.len())?;
    let n = scores.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (s, y) in scores.iter().zip(labels) {
        se += (s - y) * (s - y);
        ae += crate::math::abs(s - y);
    }
    Ok(LinkMetrics {
        rmse: sqrt(se / n),
        mae: ae / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant_predictors() {
        let truth = [0, 1, 2, 0, 1, 2];
        assert_eq!(accuracy(&truth, &truth).unwrap(), 1.0);
        assert_eq!(macro_f1(&truth, &truth, 3).unwrap(), 1.0);
        assert!((accuracy(&[0; 6], &truth).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn binary_hand_example() {
        // Class 0: TP 1, FP 1, FN 0. Class 1: TP 1, FP 0, FN 1.
        let f1 = macro_f1(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
        let f1 = macro_f1(&[0, 1, 1, 0], &[0, 1, 0, 1], 2).unwrap();
        assert!((f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn absent_classes_are_excluded() {
        assert_eq!(macro_f1(&[0, 1], &[0, 1], 5).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
        assert!(macro_f1(&[3], &[0], 2).is_err());
        assert!(link_metrics(&[], &[]).is_err());
    }

    #[test]
    fn link_metric_examples() {
        let m = link_metrics(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!((m.rmse, m.mae), (0.0, 0.0));
        let m = link_metrics(&[0.5; 4], &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!((m.rmse, m.mae), (0.5, 0.5));
    }
}
