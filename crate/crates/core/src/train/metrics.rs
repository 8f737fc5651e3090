use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LossBreakdown;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    pub total: f64,
}

impl StepRecord {
    pub fn new(step: u64, loss: &LossBreakdown) -> Self {
        Self {
            step,
            l1: loss.l1,
            l2: loss.l2,
            l3: loss.l3,
            total: loss.total,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    /// NaN when the validation split is empty.
    pub val_ppl: f64,
    pub val_bleu4: f64,
}

/// Per-step losses and per-epoch validation scores.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl MetricsLog {
    pub fn push_step(&mut self, rec: StepRecord) {
        debug_assert!(self.steps.last().map_or(true, |last| last.step < rec.step));
        self.steps.push(rec);
    }

    pub fn steps_csv(&self) -> String {
        let mut s = String::from("step,L1,L2,L3,total\n");
        for r in &self.steps {
            s.push_str(&format!("{},{},{},{},{}\n", r.step, r.l1, r.l2, r.l3, r.total));
        }
        s
    }

    pub fn epochs_csv(&self) -> String {
        let mut s = String::from("epoch,val_ppl,val_bleu4\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.val_ppl, r.val_bleu4));
        }
        s
    }

    /// Mean of `field` over the steps of each consecutive block of
    /// `steps_per_epoch` records.
    pub fn epoch_means(&self, steps_per_epoch: usize, field: impl Fn(&StepRecord) -> f64) -> Vec<f64> {
        self.steps
            .chunks(steps_per_epoch.max(1))
            .map(|c| c.iter().map(&field).sum::<f64>() / c.len() as f64)
            .collect()
    }

    pub fn write(&self, steps_path: &Path, epochs_path: &Path) -> Result<()> {
        fs::write(steps_path, self.steps_csv()).map_err(|e| Error::io(steps_path, e))?;
        fs::write(epochs_path, self.epochs_csv()).map_err(|e| Error::io(epochs_path, e))
    }
}
