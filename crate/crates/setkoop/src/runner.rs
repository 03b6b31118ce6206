//! Runs the checks of a scenario and writes the reports.

use std::path::{Path, PathBuf};

use setkoop_core::Error;

use crate::checks::{run_check, CheckOutcome};
use crate::config::{ConfigError, Scenario};
use crate::formats::{num, Table};

/// Command-line overrides of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    /// The check could not complete.
    Error(String),
    /// A flow stopped being finite.
    Diverged(String),
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Error(_) => "error",
            Status::Diverged(_) => "diverged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub check: String,
    pub status: Status,
    /// NaN when the check did not complete.
    pub worst_defect: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.status == Status::Pass)
    }

    /// 3 when any flow diverged, else 1 when any check failed, else 0.
    pub fn exit_code(&self) -> i32 {
        if self
            .rows
            .iter()
            .any(|r| matches!(r.status, Status::Diverged(_)))
        {
            EXIT_DIVERGED
        } else if self.all_passed() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(["check", "status", "worst_defect", "tolerance"]);
        for r in &self.rows {
            t.push(vec![
                r.check.clone(),
                r.status.as_str().to_string(),
                num(r.worst_defect),
                num(r.tolerance),
            ]);
        }
        t
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        EXIT_INVALID
    }
}

pub fn run_path(path: &Path, options: &RunOptions) -> Result<RunReport, RunError> {
    run_scenario(Scenario::from_path(path)?, options)
}

pub fn run_scenario(mut scenario: Scenario, options: &RunOptions) -> Result<RunReport, RunError> {
    if let Some(seed) = options.seed {
        scenario.controls.seed = seed;
    }
    if let Some(step) = options.step {
        scenario.time.step = step;
    }
    if let Some(dir) = &options.output_dir {
        scenario.output_dir = dir.clone();
    }
    let setup = scenario.build()?;
    let output_dir = scenario.output_dir.clone();
    std::fs::create_dir_all(&output_dir).map_err(|e| RunError::Output {
        path: output_dir.clone(),
        message: e.to_string(),
    })?;

    let outcomes: Vec<setkoop_core::Result<CheckOutcome>> = if options.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = setup
                .checks
                .iter()
                .map(|(name, _)| {
                    let setup = &setup;
                    scope.spawn(move || run_check(name, setup))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("check thread panicked"))
                .collect()
        })
    } else {
        setup
            .checks
            .iter()
            .map(|(name, _)| run_check(name, &setup))
            .collect()
    };

    let mut rows = Vec::with_capacity(outcomes.len());
    for ((name, tolerance), outcome) in setup.checks.iter().zip(outcomes) {
        rows.push(record(&output_dir, name, *tolerance, outcome)?);
    }
    let report = RunReport { output_dir, rows };
    write_table(
        &report.output_dir.join("summary.csv"),
        &report.summary_table(),
    )?;
    Ok(report)
}

fn record(
    dir: &Path,
    name: &str,
    tolerance: f64,
    outcome: setkoop_core::Result<CheckOutcome>,
) -> Result<SummaryRow, RunError> {
    let (status, worst_defect) = match outcome {
        Ok(out) => {
            write_table(&dir.join(format!("{name}.csv")), &out.table)?;
            for (suffix, table) in &out.extras {
                write_table(&dir.join(format!("{name}_{suffix}.csv")), table)?;
            }
            let pass = out.worst_defect <= tolerance && out.side_conditions_ok;
            (
                if pass { Status::Pass } else { Status::Fail },
                out.worst_defect,
            )
        }
        Err(e @ (Error::Divergence { .. } | Error::DivergenceAtNode { .. })) => {
            (Status::Diverged(e.to_string()), f64::NAN)
        }
        Err(e) => (Status::Error(e.to_string()), f64::NAN),
    };
    Ok(SummaryRow {
        check: name.to_string(),
        status,
        worst_defect,
        tolerance,
    })
}

fn write_table(path: &Path, table: &Table) -> Result<(), RunError> {
    table.write(path).map_err(|e| RunError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
