//! Training with a prediction loss and a constraint loss.
//!
//! Vanilla mode minimizes the mean squared error only. Constrained mode
//! attacks every training sample with PGD, evaluates the constraint loss at
//! the counterexample, and balances the two losses with GradNorm.

mod gradnorm;
mod loss;
mod pgd;
mod trainer;

use std::collections::HashMap;
use std::io;
use std::path::Path;

use thiserror::Error;

pub use gradnorm::{GradNormConfig, GradNormState, MIN_WEIGHT};
pub use loss::{mse_grad, mse_loss, LossBreakdown};
pub use pgd::{ball_box, pgd_attack, pgd_in_box, Attack, PgdConfig, Target};
pub use trainer::{evaluate, train_epochs, train_network, Counters, EvalResult, TrainOutcome};

use crate::data::DataError;
use crate::logic::{Expr, Formula, LogicError};
use crate::netcore::{NetError, OptimizerConfig};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub constrained: bool,
    /// Attack used on training samples.
    pub pgd: PgdConfig,
    /// Attack used for Test-C-Acc.
    pub eval_pgd: PgdConfig,
    pub gradnorm: GradNormConfig,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

pub const DEFAULT_TRAIN_EPSILON: f64 = 4.0 / 255.0;
pub const DEFAULT_DELTA: f64 = 0.1;

impl Default for TrainConfig {
    fn default() -> Self {
        let pgd = PgdConfig {
            random_start: true,
            ..PgdConfig::new(DEFAULT_TRAIN_EPSILON)
        };
        Self {
            epochs: 100,
            batch_size: 16,
            constrained: false,
            pgd,
            eval_pgd: PgdConfig::new(DEFAULT_TRAIN_EPSILON),
            gradnorm: GradNormConfig::default(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        for p in [&self.pgd, &self.eval_pgd] {
            if !(p.epsilon >= 0.0 && p.epsilon.is_finite()) {
                return bad("PGD epsilon must be finite and non-negative");
            }
            if !(p.step() >= 0.0 && p.step().is_finite()) {
                return bad("PGD step size must be finite and non-negative");
            }
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.gradnorm.learning_rate >= 0.0 && self.gradnorm.alpha.is_finite()) {
            return bad("GradNorm settings must be finite and non-negative");
        }
        Ok(())
    }
}

/// The constraint trained against and measured: `body` with the perturbed
/// input `var` and the sample bound to `anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub body: Formula,
    pub var: String,
    pub anchor: String,
    pub params: HashMap<String, f64>,
    /// Fuzzy atom sharpness.
    pub sharpness: f64,
}

impl Constraint {
    /// `|N(x)[i] - N(x0)[i]| <= delta` for both outputs, sharpness `delta`.
    pub fn robustness(delta: f64) -> Self {
        Self {
            body: Formula::robustness("N", "x", "x0", Expr::Num(delta), 2),
            var: "x".into(),
            anchor: "x0".into(),
            params: HashMap::new(),
            sharpness: delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_p_loss: f64,
    pub train_c_loss: f64,
    pub test_p_loss: f64,
    pub test_c_acc: f64,
    /// `w1 / w0`; 0 in vanilla mode.
    pub lambda: f64,
}

pub const METRICS_HEADER: [&str; 6] = [
    "epoch",
    "Train-P-Loss",
    "Train-C-Loss",
    "Test-P-Loss",
    "Test-C-Acc",
    "lambda",
];

/// Fixed-point text of `v` with `digits` significant digits.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER).expect("in-memory write");
    for r in rows {
        let mut rec = vec![r.epoch.to_string()];
        rec.extend(
            [
                r.train_p_loss,
                r.train_c_loss,
                r.test_p_loss,
                r.test_c_acc,
                r.lambda,
            ]
            .iter()
            .map(|&v| format_significant(v, 9)),
        );
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

pub fn write_metrics(path: &Path, rows: &[EpochMetrics]) -> Result<(), TrainError> {
    std::fs::write(path, metrics_csv(rows)).map_err(|source| TrainError::Io {
        path: path.display().to_string(),
        source,
    })
}
