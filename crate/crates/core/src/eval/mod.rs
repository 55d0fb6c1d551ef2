//! Metrics, the synthetic data generator, the labeled-fraction protocol with
//! its one-step ablation and grid-max variant, and two distance-based
//! one-class baselines.
//!
//! The interest (fake) class is the positive class throughout. Precision or
//! recall with a zero denominator counts as 0, and macro-F1 is the harmonic
//! mean of the class-averaged precision and recall.

mod baselines;
mod grid;
mod report;
mod scenario;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baselines::{
    baseline_kmeans, baseline_knnd, kmeans_scores, knnd_scores, sweep_thresholds, threshold_grid,
    SweepResult,
};
pub use grid::{run_grid_max, ParamGrid};
pub use report::{
    write_ablation, write_csv, write_reports, AblationReport, Aggregate, EvalReport, MeanStd,
    RunRow,
};
pub use scenario::{
    execute_runs, reports_from, run_ablation, run_scenario, RunOutcome, ScenarioConfig,
};
pub use synthetic::{make_synthetic, SyntheticConfig, SyntheticData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true labels for {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (0, 1) => c.fp += 1,
            (1, 0) => c.fn_ += 1,
            _ => {
                return Err(Error::param(
                    "labels",
                    format!("({t}, {p}) is not a binary pair"),
                ))
            }
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

fn nonempty(c: &ConfusionCounts) -> Result<()> {
    if c.total() == 0 {
        Err(Error::Empty("evaluated set"))
    } else {
        Ok(())
    }
}

pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    nonempty(c)?;
    Ok(ratio(c.tp + c.tn, c.total()))
}

/// F1 of the interest class.
pub fn interest_f1(c: &ConfusionCounts) -> Result<f64> {
    nonempty(c)?;
    Ok(harmonic(
        ratio(c.tp, c.tp + c.fp),
        ratio(c.tp, c.tp + c.fn_),
    ))
}

/// `2·P·R / (P + R)` with `P`, `R` the unweighted means over both classes.
pub fn macro_f1(c: &ConfusionCounts) -> Result<f64> {
    nonempty(c)?;
    let precision = (ratio(c.tp, c.tp + c.fp) + ratio(c.tn, c.tn + c.fn_)) / 2.0;
    let recall = (ratio(c.tp, c.tp + c.fn_) + ratio(c.tn, c.tn + c.fp)) / 2.0;
    Ok(harmonic(precision, recall))
}

/// Accuracy, interest-F1 and macro-F1 in one call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub interest_f1: f64,
    pub macro_f1: f64,
}

impl Metrics {
    pub fn from_counts(c: &ConfusionCounts) -> Result<Self> {
        Ok(Self {
            accuracy: accuracy(c)?,
            interest_f1: interest_f1(c)?,
            macro_f1: macro_f1(c)?,
        })
    }

    pub fn score(y_true: &[u8], y_pred: &[u8]) -> Result<Self> {
        Self::from_counts(&confusion(y_true, y_pred)?)
    }
}
