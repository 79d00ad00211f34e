use alloc::format;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::Result;

/// Optimization and sampling settings shared by both tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    /// Learning rate reached by the cosine schedule at the last epoch.
    pub lr_min: f64,
    pub epochs: usize,
    pub patience: usize,
    /// Seeds (or positive edges) per step; `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Per-layer neighbor caps, input layer first; `None` keeps every neighbor.
    pub fanouts: Option<Vec<usize>>,
    pub negatives_train: usize,
    pub negatives_eval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            lr_min: 0.0,
            epochs: 200,
            patience: 50,
            batch_size: None,
            fanouts: None,
            negatives_train: 5,
            negatives_eval: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, num_layers: usize) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(invalid(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.lr_min >= 0.0 && self.lr_min <= self.lr) {
            return Err(invalid(format!("lr_min {} not in [0, lr]", self.lr_min)));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if self.patience == 0 || self.patience > self.epochs {
            return Err(invalid(format!(
                "patience {} not in [1, epochs = {}]",
                self.patience, self.epochs
            )));
        }
        if self.batch_size == Some(0) {
            return Err(invalid("batch_size must be positive"));
        }
        if let Some(f) = &self.fanouts {
            if f.len() != num_layers || f.contains(&0) {
                return Err(invalid(format!(
                    "need {num_layers} positive fanouts, got {f:?}"
                )));
            }
        }
        if self.negatives_train == 0 || self.negatives_eval == 0 {
            return Err(invalid("negative counts must be positive"));
        }
        Ok(())
    }
}

/// One line of the training report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub val_loss: f64,
    pub lr: f64,
}

/// Outcome of a training run. The parameter store holds the best-on-validation
/// values when training returns.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_metric: f64,
    pub stopped_epoch: usize,
    /// Negatives kept after running out of redraws.
    pub negatives_exhausted: usize,
}

/// Patience-based stopping on a validation metric. An epoch improves when its
/// metric is strictly better, or equal with a strictly lower validation loss.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    higher_is_better: bool,
    patience: usize,
    best: Option<(f64, f64, usize)>,
    since: usize,
}

/// Verdict of [`EarlyStopping::observe`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize, higher_is_better: bool) -> Self {
        EarlyStopping {
            higher_is_better,
            patience,
            best: None,
            since: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, metric: f64, loss: f64) -> StopDecision {
        let improved = match self.best {
            None => true,
            Some((m, l, _)) => {
                let better = if self.higher_is_better { metric > m } else { metric < m };
                better || (metric == m && loss < l)
            }
        };
        if improved {
            self.best = Some((metric, loss, epoch));
            self.since = 0;
        } else {
            self.since += 1;
        }
        StopDecision {
            improved,
            stop: self.since >= self.patience,
        }
    }

    /// `(metric, epoch)` of the best observation so far.
    pub fn best(&self) -> Option<(f64, usize)> {
        self.best.map(|(m, _, e)| (m, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_patience_without_improvement() {
        let mut es = EarlyStopping::new(2, true);
        assert!(es.observe(1, 0.5, 1.0).improved);
        assert!(!es.observe(2, 0.4, 0.9).stop);
        assert!(es.observe(3, 0.5, 0.8).improved);
        assert!(!es.observe(4, 0.5, 0.8).improved);
        let d = es.observe(5, 0.1, 0.1);
        assert!(d.stop && !d.improved);
        assert_eq!(es.best(), Some((0.5, 3)));
    }

    #[test]
    fn lower_is_better_mode() {
        let mut es = EarlyStopping::new(1, false);
        es.observe(1, 0.3, 1.0);
        assert!(es.observe(2, 0.2, 5.0).improved);
        assert!(es.observe(3, 0.25, 0.0).stop);
    }

    #[test]
    fn config_validation() {
        TrainConfig::default().validate(2).unwrap();
        let bad = [
            TrainConfig { lr: 0.0, ..Default::default() },
            TrainConfig { patience: 300, ..Default::default() },
            TrainConfig { batch_size: Some(0), ..Default::default() },
            TrainConfig { fanouts: Some(alloc::vec![5]), ..Default::default() },
            TrainConfig { negatives_train: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate(2).is_err(), "{c:?}");
        }
    }
}
