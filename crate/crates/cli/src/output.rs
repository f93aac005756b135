use std::path::Path;

use kcut_core::stats::EmpiricalDistribution;
use serde::Serialize;

use crate::CliError;

/// Points per distribution in the ECDF plot data.
pub const ECDF_POINTS: usize = 1000;

/// A CSV table held as already formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_table(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(&table.header)
        .map_err(|e| csv_error(path, e))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// `distribution,x,ecdf` rows at up to [`ECDF_POINTS`] evenly spaced order
/// statistics of each distribution.
pub fn write_ecdf(path: &Path, dists: &[(String, EmpiricalDistribution)]) -> Result<(), CliError> {
    let mut table = Table::new(vec!["distribution".into(), "x".into(), "ecdf".into()]);
    for (name, dist) in dists {
        let xs = dist.sorted_samples();
        let n = xs.len();
        let points = n.min(ECDF_POINTS);
        let mut last = usize::MAX;
        for j in 0..points {
            let i = if points == 1 {
                n - 1
            } else {
                j * (n - 1) / (points - 1)
            };
            if i == last {
                continue;
            }
            last = i;
            table.push(vec![
                name.clone(),
                xs[i].to_string(),
                ((i + 1) as f64 / n as f64).to_string(),
            ]);
        }
    }
    write_table(path, &table)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Json(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
