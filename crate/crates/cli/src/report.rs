//! Plot-ready CSV tables.

use std::path::Path;

use sabr_fem::oracles::ConvergenceReport;
use sabr_fem::{MassAtZero, PriceSurface};

/// A header and rows of numeric cells; `None` is written as an empty field.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn convergence(report: &ConvergenceReport) -> Self {
        let rows = report
            .rows
            .iter()
            .map(|r| vec![Some(r.level_or_k), Some(r.error_h), Some(r.error_energy), report.slope_h])
            .collect();
        Self { header: vec!["level_or_k", "error_H", "error_energy", "fitted_slope"], rows }
    }

    /// Long format, x-major.
    pub fn surface(surface: &PriceSurface) -> sabr_fem::Result<Self> {
        let rows = surface.grid()?.into_iter().map(|(x, y, v)| vec![Some(x), Some(y), Some(v)]).collect();
        Ok(Self { header: vec!["x", "y", "value"], rows })
    }

    pub fn mass_at_zero(m: &MassAtZero) -> Self {
        let rows = m.eps.iter().zip(&m.values).map(|(e, v)| vec![Some(*e), Some(*v)]).collect();
        Self { header: vec!["eps", "value"], rows }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv_report(table: &CsvTable, path: &Path) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| cell(*v)))?;
    }
    w.flush()
}
