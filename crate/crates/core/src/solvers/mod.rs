//! Conformal-criticality solvers.
//!
//! - [`solve_conformal_critical_2d`]: on surfaces, `exp(2f) g` is critical in
//!   its conformal class iff `Delta_g f = div_g X_g`, a linear Poisson problem.
//! - [`conformal_descent`]: for `n >= 3`, steepest descent of the energy in
//!   the conformal direction with a backtracking line search.
//! - [`spectrum_lower_bound`]: bottom of the spectrum of the
//!   projective-conformal Laplacian by shifted inverse iteration.

pub mod cg;
mod descent;
pub(crate) mod operators;
mod poisson;
mod spectrum;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::TensorField;

pub use descent::{conformal_descent, conformal_descent_with, normalized_deviation, DescentOptions};
pub use poisson::{solve_conformal_critical_2d, solve_conformal_critical_2d_with, PoissonOptions};
pub use spectrum::{spectrum_estimate, spectrum_lower_bound, SpectrumEstimate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    /// The starting point is already stationary.
    Stationary,
    MaxIterations,
    LineSearchFailed,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Stationary => "stationary",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::LineSearchFailed => "line-search-failed",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of a solver history.
#[derive(Clone, Debug, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub energy: Option<f64>,
    pub residual: f64,
    pub tau: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    pub history: Vec<HistoryRow>,
    /// Conformal factor `f` of the final metric `exp(2f) g`.
    pub final_f: TensorField,
    pub status: SolveStatus,
    /// Post-conditions of the solver held.
    pub certified: bool,
}

impl SolveReport {
    pub fn residual_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.residual).collect()
    }

    pub fn energy_history(&self) -> Vec<f64> {
        self.history.iter().filter_map(|r| r.energy).collect()
    }

    pub fn final_residual(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.residual)
    }

    /// Writes `iteration,energy,residual,tau` rows; absent values are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.history {
            w.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;

    #[test]
    fn csv_has_header_and_blank_optionals() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let report = SolveReport {
            iterations: 1,
            history: vec![
                HistoryRow { iteration: 0, energy: Some(2.0), residual: 0.5, tau: None },
                HistoryRow { iteration: 1, energy: None, residual: 0.25, tau: Some(0.125) },
            ],
            final_f: TensorField::constant(&grid, 0.0),
            status: SolveStatus::Converged,
            certified: true,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "iteration,energy,residual,tau\n0,2.0,0.5,\n1,,0.25,0.125\n");
    }
}
