use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Metrics;
use crate::error::{Error, Result};

/// One repetition of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub repetition: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub interest_f1: f64,
    pub macro_f1: f64,
}

impl RunRow {
    pub fn new(repetition: usize, seed: u64, m: Metrics) -> Self {
        Self {
            repetition,
            seed,
            accuracy: m.accuracy,
            interest_f1: m.interest_f1,
            macro_f1: m.macro_f1,
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            accuracy: self.accuracy,
            interest_f1: self.interest_f1,
            macro_f1: self.macro_f1,
        }
    }
}

/// Mean and sample standard deviation (0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: MeanStd,
    pub interest_f1: MeanStd,
    pub macro_f1: MeanStd,
}

impl Aggregate {
    pub fn of(rows: &[RunRow]) -> Self {
        let column = |f: fn(&RunRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        Self {
            accuracy: MeanStd::of(&column(|r| r.accuracy)),
            interest_f1: MeanStd::of(&column(|r| r.interest_f1)),
            macro_f1: MeanStd::of(&column(|r| r.macro_f1)),
        }
    }
}

/// Repetition rows and their aggregate for one labeled fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: f64,
    pub repetitions: Vec<RunRow>,
    pub aggregate: Aggregate,
}

impl EvalReport {
    pub fn new(scenario: f64, repetitions: Vec<RunRow>) -> Self {
        let aggregate = Aggregate::of(&repetitions);
        Self {
            scenario,
            repetitions,
            aggregate,
        }
    }
}

/// Paired one-step and two-step reports for one labeled fraction, with the
/// per-repetition difference `two_step − one_step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub scenario: f64,
    pub one_step: EvalReport,
    pub two_step: EvalReport,
    pub difference: EvalReport,
}

impl AblationReport {
    pub fn new(one_step: EvalReport, two_step: EvalReport) -> Result<Self> {
        if one_step.repetitions.len() != two_step.repetitions.len()
            || one_step.scenario != two_step.scenario
        {
            return Err(Error::DimensionMismatch(
                "ablation arms cover different runs".into(),
            ));
        }
        let rows = one_step
            .repetitions
            .iter()
            .zip(&two_step.repetitions)
            .map(|(a, b)| {
                if (a.repetition, a.seed) != (b.repetition, b.seed) {
                    return Err(Error::DimensionMismatch(format!(
                        "repetition {} is not paired across arms",
                        a.repetition
                    )));
                }
                Ok(RunRow {
                    repetition: a.repetition,
                    seed: a.seed,
                    accuracy: b.accuracy - a.accuracy,
                    interest_f1: b.interest_f1 - a.interest_f1,
                    macro_f1: b.macro_f1 - a.macro_f1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenario: one_step.scenario,
            difference: EvalReport::new(one_step.scenario, rows),
            one_step,
            two_step,
        })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display().to_string(), format!("{other:?}")),
    }
}

/// CSV with columns `scenario,repetition,seed,accuracy,interest_f1,macro_f1`;
/// each scenario's repetition rows are followed by a `mean` and a `std` row.
pub fn write_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut out = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut write = || -> std::result::Result<(), csv::Error> {
        out.write_record([
            "scenario",
            "repetition",
            "seed",
            "accuracy",
            "interest_f1",
            "macro_f1",
        ])?;
        for report in reports {
            let scenario = report.scenario.to_string();
            for row in &report.repetitions {
                out.write_record([
                    scenario.clone(),
                    row.repetition.to_string(),
                    row.seed.to_string(),
                    row.accuracy.to_string(),
                    row.interest_f1.to_string(),
                    row.macro_f1.to_string(),
                ])?;
            }
            let a = &report.aggregate;
            for (name, pick) in [
                ("mean", (|m: &MeanStd| m.mean) as fn(&MeanStd) -> f64),
                ("std", |m| m.std),
            ] {
                out.write_record([
                    scenario.clone(),
                    name.to_string(),
                    String::new(),
                    pick(&a.accuracy).to_string(),
                    pick(&a.interest_f1).to_string(),
                    pick(&a.macro_f1).to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_error(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ReportFile<'a, C> {
    config: &'a C,
    reports: &'a [EvalReport],
}

/// Writes `<stem>.csv` and `<stem>.json`; the JSON embeds `config`.
pub fn write_reports<C: Serialize>(
    dir: &Path,
    stem: &str,
    reports: &[EvalReport],
    config: &C,
) -> Result<()> {
    write_csv(&dir.join(format!("{stem}.csv")), reports)?;
    write_json(
        &dir.join(format!("{stem}.json")),
        &ReportFile { config, reports },
    )
}

#[derive(Serialize)]
struct AblationFile<'a, C> {
    config: &'a C,
    ablation: &'a [AblationReport],
}

/// Writes `one_step.csv`, `two_step.csv`, `difference.csv` and `ablation.json`.
pub fn write_ablation<C: Serialize>(
    dir: &Path,
    reports: &[AblationReport],
    config: &C,
) -> Result<()> {
    let arm =
        |f: fn(&AblationReport) -> &EvalReport| reports.iter().map(f).cloned().collect::<Vec<_>>();
    write_csv(&dir.join("one_step.csv"), &arm(|r| &r.one_step))?;
    write_csv(&dir.join("two_step.csv"), &arm(|r| &r.two_step))?;
    write_csv(&dir.join("difference.csv"), &arm(|r| &r.difference))?;
    write_json(
        &dir.join("ablation.json"),
        &AblationFile {
            config,
            ablation: reports,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(repetition: usize, v: f64) -> RunRow {
        RunRow {
            repetition,
            seed: repetition as u64,
            accuracy: v,
            interest_f1: v,
            macro_f1: v,
        }
    }

    #[test]
    fn aggregate_uses_sample_deviation() {
        let stats = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(stats.mean, 2.5);
        assert!((stats.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[0.7]).std, 0.0);
    }

    #[test]
    fn difference_is_two_step_minus_one_step() {
        let a = EvalReport::new(0.1, vec![row(0, 0.5), row(1, 0.75)]);
        let b = EvalReport::new(0.1, vec![row(0, 0.625), row(1, 0.75)]);
        let ab = AblationReport::new(a.clone(), b.clone()).unwrap();
        for ((d, x), y) in ab
            .difference
            .repetitions
            .iter()
            .zip(&a.repetitions)
            .zip(&b.repetitions)
        {
            assert_eq!(d.macro_f1, y.macro_f1 - x.macro_f1);
        }
        assert_eq!(ab.difference.aggregate.macro_f1.mean, 0.0625);
        let unpaired = EvalReport::new(0.1, vec![row(0, 0.5)]);
        assert!(AblationReport::new(unpaired, b).is_err());
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let reports = [
            EvalReport::new(0.1, vec![row(0, 0.5), row(1, 1.0)]),
            EvalReport::new(0.2, vec![row(0, 0.25)]),
        ];
        write_reports(dir.path(), "report", &reports, &"cfg").unwrap();
        let text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "scenario,repetition,seed,accuracy,interest_f1,macro_f1"
        );
        assert_eq!(lines.len(), 1 + 4 + 3);
        assert_eq!(lines[3], "0.1,mean,,0.75,0.75,0.75");
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(json["config"], "cfg");
        assert_eq!(json["reports"].as_array().unwrap().len(), 2);
    }
}
