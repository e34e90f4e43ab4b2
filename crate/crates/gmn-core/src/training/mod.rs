//! Losses, Adam with decoupled weight decay, and the train/eval loops for
//! desk-scale experiments. Everything is a pure function of (dataset,
//! configs, seed): two runs with the same inputs produce byte-identical
//! checkpoints.

mod adam;
mod dataset;
mod loss;
mod run;

pub use adam::{adam_step, AdamState};
pub use dataset::Dataset;
pub use loss::{loss_on_tape, LossKind, Target};
pub use run::{evaluate, majority_baseline, train, EvalReport};

use thiserror::Error;

use crate::model::Checkpoint;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("model: {0}")]
    Model(#[from] crate::model::ModelError),
    #[error("numerics: {0}")]
    Numerics(#[from] crate::numerics::NumericsError),
    #[error("graph: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error("spectral: {0}")]
    Spectral(#[from] crate::spectral::SpectralError),
    #[error("checkpoint/config does not match the dataset: {0}")]
    ConfigMismatch(String),
    #[error("loss diverged (NaN) at epoch {epoch}")]
    DivergenceDetected { epoch: usize, last_good: Box<Checkpoint<f64>> },
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
}

/// Optimizer and loop hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl TrainConfig {
    pub fn base() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 32,
            lr: 1e-3,
            weight_decay: 0.0,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(TrainError::InvalidConfig(format!("lr {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.weight_decay) {
            return Err(TrainError::InvalidConfig(format!("weight_decay {}", self.weight_decay)));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            ("epochs".into(), self.epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("lr".into(), self.lr.to_string()),
            ("weight_decay".into(), self.weight_decay.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("beta1".into(), self.beta1.to_string()),
            ("beta2".into(), self.beta2.to_string()),
            ("eps".into(), self.eps.to_string()),
        ]
    }

    pub fn set_key(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        let bad = || TrainError::InvalidConfig(format!("{key}={value}"));
        match key {
            "epochs" => self.epochs = value.parse().map_err(|_| bad())?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad())?,
            "lr" => self.lr = value.parse().map_err(|_| bad())?,
            "weight_decay" => self.weight_decay = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "beta1" => self.beta1 = value.parse().map_err(|_| bad())?,
            "beta2" => self.beta2 = value.parse().map_err(|_| bad())?,
            "eps" => self.eps = value.parse().map_err(|_| bad())?,
            _ => return Err(TrainError::InvalidConfig(format!("unknown key {key}"))),
        }
        Ok(())
    }
}

/// Final quality number for a split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestMetric {
    Accuracy(f64),
    Mae(f64),
}

impl TestMetric {
    pub fn value(self) -> f64 {
        match self {
            TestMetric::Accuracy(v) => v,
            TestMetric::Mae(v) => v,
        }
    }

    /// Is `self` at least as good as `other` (accuracy up, MAE down)?
    pub fn at_least(self, other: TestMetric) -> bool {
        match (self, other) {
            (TestMetric::Accuracy(a), TestMetric::Accuracy(b)) => a >= b,
            (TestMetric::Mae(a), TestMetric::Mae(b)) => a <= b,
            _ => false,
        }
    }
}

/// Per-run record. Wall time is informational and excluded from equality so
/// the determinism contract can be asserted on the whole report.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub seed: u64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_metric: Vec<f64>,
    pub best_epoch: usize,
    pub test_metric: TestMetric,
    pub wall_secs: f64,
}

impl PartialEq for MetricsReport {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.train_loss == other.train_loss
            && self.val_loss == other.val_loss
            && self.val_metric == other.val_metric
            && self.best_epoch == other.best_epoch
            && self.test_metric == other.test_metric
    }
}

impl MetricsReport {
    /// key=value block (the plain-text log form).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str(&format!("epochs={}\n", self.train_loss.len()));
        out.push_str(&format!("best_epoch={}\n", self.best_epoch));
        match self.test_metric {
            TestMetric::Accuracy(a) => out.push_str(&format!("test_accuracy={a:.6}\n")),
            TestMetric::Mae(m) => out.push_str(&format!("test_mae={m:.6}\n")),
        }
        out.push_str(&format!("wall_secs={:.3}\n", self.wall_secs));
        out
    }

    /// CSV of per-epoch losses: epoch,train_loss,val_loss,val_metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_metric\n");
        for e in 0..self.train_loss.len() {
            out.push_str(&format!(
                "{e},{:.9e},{:.9e},{:.9e}\n",
                self.train_loss[e], self.val_loss[e], self.val_metric[e]
            ));
        }
        out
    }
}
