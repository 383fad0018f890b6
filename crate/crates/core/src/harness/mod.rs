//! Experiments: synthetic generators, learners, the verification experiments and result files.

pub mod bounds;
pub mod config;
pub mod generators;
pub mod inequalities;
pub mod itv;
pub mod learn;
pub mod output;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bounds::{
    run_bound_check_multiclass, run_bound_check_structured, BoundRecord, BoundReport,
    StructuredBoundReport,
};
pub use config::ExperimentConfig;
pub use inequalities::{run_complexity_experiment, ComplexityReport};
pub use itv::{run_counterexample, run_itv_experiment, CounterexampleReport, SandwichReport};
pub use learn::{learn_erm_finite, learn_erm_linear, ErmOutcome, LossSpec};
pub use output::{emit_results, read_csv, CsvRow, CSV_COLUMNS};

pub const EXPERIMENTS: [&str; 5] = [
    "itv",
    "counterexample",
    "bound-multiclass",
    "bound-structured",
    "complexity",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "report", rename_all = "kebab-case")]
pub enum ExperimentOutcome {
    Itv(SandwichReport),
    Counterexample(CounterexampleReport),
    BoundMulticlass(BoundReport),
    BoundStructured(StructuredBoundReport),
    Complexity(ComplexityReport),
}

fn bound_rows(report: &BoundReport) -> Vec<CsvRow> {
    report
        .records
        .iter()
        .map(|r| CsvRow {
            draw_id: r.draw_id,
            m: r.m,
            rho: r.rho,
            delta: r.delta,
            lhs: r.lhs,
            empirical_loss: r.empirical_loss,
            complexity_mean: r.complexity_mean,
            complexity_stderr: r.complexity_stderr,
            rhs: r.rhs,
            holds: r.holds,
        })
        .collect()
}

impl ExperimentOutcome {
    /// Whether every asserted property held.
    pub fn passed(&self) -> bool {
        match self {
            Self::Itv(r) => r.holds,
            Self::Counterexample(r) => r.holds,
            Self::BoundMulticlass(r) => r.holds,
            Self::BoundStructured(r) => r.holds,
            Self::Complexity(r) => r.holds,
        }
    }

    /// CSV tables by file name. Non-bound experiments map their checks onto the
    /// shared columns: `lhs`/`rhs` are the two sides of the checked inequality.
    pub fn tables(&self, cfg: &ExperimentConfig) -> Vec<(&'static str, Vec<CsvRow>)> {
        let row = |draw_id, lhs, empirical_loss, mean, stderr, rhs, holds| CsvRow {
            draw_id,
            m: cfg.m,
            rho: cfg.rho,
            delta: cfg.delta,
            lhs,
            empirical_loss,
            complexity_mean: mean,
            complexity_stderr: stderr,
            rhs,
            holds,
        };
        match self {
            Self::Itv(r) => vec![(
                "results.csv",
                r.records
                    .iter()
                    .map(|s| {
                        let holds = s.lower_holds && s.upper_holds;
                        row(
                            s.instance,
                            s.risk_h_c,
                            s.empirical_risk_h_c,
                            0.0,
                            0.0,
                            s.risk_f_c + s.risk_h,
                            holds,
                        )
                    })
                    .collect(),
            )],
            Self::Counterexample(r) => vec![(
                "results.csv",
                vec![
                    row(0, r.itv_gap, 0.0, 0.0, 0.0, 0.5, r.itv_gap == 0.5),
                    row(1, r.ltv_gap, 0.0, 0.0, 0.0, 0.0, r.ltv_gap == 0.0),
                ],
            )],
            Self::BoundMulticlass(r) => vec![("results.csv", bound_rows(r))],
            Self::BoundStructured(r) => {
                vec![
                    ("results.csv", bound_rows(&r.additive)),
                    ("results_mult.csv", bound_rows(&r.multiplicative)),
                ]
            }
            Self::Complexity(r) => vec![(
                "results.csv",
                r.records
                    .iter()
                    .enumerate()
                    .map(|(i, c)| row(i, c.lhs, 0.0, c.rhs, c.std_error, c.rhs, c.holds))
                    .collect(),
            )],
        }
    }
}

/// Dispatches on `cfg.experiment`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    Ok(match cfg.experiment.as_str() {
        "itv" => ExperimentOutcome::Itv(run_itv_experiment(cfg)?),
        "counterexample" => ExperimentOutcome::Counterexample(run_counterexample(cfg)?),
        "bound-multiclass" => ExperimentOutcome::BoundMulticlass(run_bound_check_multiclass(cfg)?),
        "bound-structured" => ExperimentOutcome::BoundStructured(run_bound_check_structured(cfg)?),
        "complexity" => ExperimentOutcome::Complexity(run_complexity_experiment(cfg)?),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown experiment {other:?}; expected one of {EXPERIMENTS:?}"
            )))
        }
    })
}
