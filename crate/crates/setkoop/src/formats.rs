//! CSV layouts of the reports and dumps.
//!
//! Floats are written in shortest round-trip exponent form, so identical runs
//! give identical bytes.

use std::path::Path;

use setkoop_core::controlled_flow::FlowResult;
use setkoop_core::liouville::GeneratorStudy;
use setkoop_core::set_ops::KuratowskiTable;
use setkoop_core::spectral::EigenPair;
use setkoop_core::{Complex64, Observable, ParticleMeasure, SpatialGrid};

/// In-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

pub fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

/// `time, state_0..state_{d−1}`; empty when no trajectory was recorded.
pub fn trajectory_table(result: &FlowResult, dim: usize) -> Table {
    let mut t = Table::new(std::iter::once("time".to_string()).chain(indexed("state", dim)));
    for (time, state) in result.trajectory.iter().flatten() {
        t.push(
            std::iter::once(num(*time))
                .chain(state.iter().map(|v| num(*v)))
                .collect(),
        );
    }
    t
}

/// `node_0..node_{d−1}, re, im`, one row per grid node.
pub fn observable_table(obs: &Observable, grid: &SpatialGrid) -> setkoop_core::Result<Table> {
    let header = indexed("node", grid.dim()).chain(["re".to_string(), "im".to_string()]);
    let mut t = Table::new(header);
    for (x, v) in grid.nodes().iter().zip(obs.sample(grid)?) {
        t.push(
            x.iter()
                .map(|c| num(*c))
                .chain([num(v.re), num(v.im)])
                .collect(),
        );
    }
    Ok(t)
}

/// `x_0..x_{d−1}, w_re, w_im`.
pub fn measure_table(mu: &ParticleMeasure) -> Table {
    let dim = mu.dim().unwrap_or(0);
    let header = indexed("x", dim).chain(["w_re".to_string(), "w_im".to_string()]);
    let mut t = Table::new(header);
    for (x, w) in mu.particles() {
        t.push(
            x.iter()
                .map(|c| num(*c))
                .chain([num(w.re), num(w.im)])
                .collect(),
        );
    }
    t
}

/// `h, forward_defect, backward_defect, fitted_rate`; the fitted rate of the
/// backward column is repeated on every row.
pub fn kuratowski_table(table: &KuratowskiTable) -> Table {
    let mut t = Table::new(["h", "forward_defect", "backward_defect", "fitted_rate"]);
    for row in &table.rows {
        t.push(vec![
            num(row.h),
            num(row.forward_defect),
            num(row.backward_defect),
            opt(table.backward_rate),
        ]);
    }
    t
}

/// `h, backward_defect, forward_defect, forward_defect_convexified, fitted_rate`
/// with the backward rate repeated on every row.
pub fn generator_table(study: &GeneratorStudy) -> Table {
    let mut t = Table::new([
        "h",
        "backward_defect",
        "forward_defect",
        "forward_defect_convexified",
        "fitted_rate",
    ]);
    for row in &study.rows {
        t.push(vec![
            num(row.h),
            num(row.backward_defect),
            num(row.forward_defect),
            num(row.forward_defect_convexified),
            opt(study.backward_rate),
        ]);
    }
    t
}

/// `feedback_id, lambda_re, lambda_im, residual_liouville, residual_mapping`.
pub fn eigen_table(rows: &[(EigenPair, f64, f64)]) -> Table {
    let mut t = Table::new([
        "feedback_id",
        "lambda_re",
        "lambda_im",
        "residual_liouville",
        "residual_mapping",
    ]);
    for (pair, liouville, mapping) in rows {
        t.push(vec![
            pair.feedback_id.to_string(),
            num(pair.lambda.re),
            num(pair.lambda.im),
            num(*liouville),
            num(*mapping),
        ]);
    }
    t
}

pub fn complex_cells(z: Option<Complex64>) -> [String; 2] {
    match z {
        Some(z) => [num(z.re), num(z.im)],
        None => [String::new(), String::new()],
    }
}
