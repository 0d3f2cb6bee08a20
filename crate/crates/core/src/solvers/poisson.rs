use super::cg::pcg;
use super::operators::{flat_inverse, project_null, Stiffness};
use super::{HistoryRow, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::field::{valence, TensorField};
use crate::projective::{ProjectiveState, ProjectiveStructure};
use crate::riemannian::{self, Metric};

#[derive(Clone, Debug)]
pub struct PoissonOptions {
    /// Target for `|div X|` of the new metric.
    pub tol: f64,
    pub max_iter: usize,
    pub initial: Option<TensorField>,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        PoissonOptions { tol: 1e-8, max_iter: 2000, initial: None }
    }
}

/// Finds `f` with `int f dmu_g = 0` such that `exp(2f) g` is conformally
/// critical, i.e. `Delta_g f = div_g X_g`. Surfaces only.
pub fn solve_conformal_critical_2d(
    structure: &ProjectiveStructure,
    metric: &Metric,
    tol: f64,
) -> Result<SolveReport> {
    solve_conformal_critical_2d_with(structure, metric, &PoissonOptions { tol, ..Default::default() })
}

pub fn solve_conformal_critical_2d_with(
    structure: &ProjectiveStructure,
    metric: &Metric,
    opts: &PoissonOptions,
) -> Result<SolveReport> {
    let n = metric.dim();
    if n != 2 {
        return Err(Error::UnsupportedDimension { dim: n, reason: "the Poisson reduction is for surfaces" });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let grid = metric.grid();
    let state = ProjectiveState::new(structure, metric)?;
    let u = riemannian::div(metric, &state.x)?;
    let rho = metric.density();
    let rhs: Vec<f64> = u.values().iter().zip(rho).map(|(u, r)| u * r).collect();
    let rhs = project_null(grid, &rhs);

    let x0 = match &opts.initial {
        Some(f0) => {
            f0.ensure_valence(&valence::scalar())?;
            f0.ensure_same_grid(metric.g())?;
            project_null(grid, f0.values())
        }
        None => vec![0.0; grid.len()],
    };

    // Residual of `rho Delta f = rho u`, measured as `max |Delta f - u|`.
    let sup = |r: &[f64]| r.iter().zip(rho).fold(0.0f64, |m, (r, p)| m.max((r / p).abs()));
    let k = Stiffness::new(metric);
    let out = pcg(
        |v| k.apply(v),
        |r| flat_inverse(grid, r, 1.0, 0.0),
        &rhs,
        x0,
        sup,
        1e-2 * opts.tol,
        opts.max_iter,
    );
    if !out.converged {
        return Err(Error::NonConvergence {
            solver: "conformal Poisson",
            iterations: out.iterations,
            residual: *out.history.last().unwrap_or(&f64::NAN),
        });
    }

    let mean = metric.mean(&out.x);
    let f = TensorField::scalar(grid, out.x.iter().map(|v| v - mean).collect());

    let new_metric = metric.conformal_change(&f)?;
    let new_state = ProjectiveState::new(structure, &new_metric)?;
    let direct = riemannian::div(&new_metric, &new_state.x)?.max_abs();
    let min_f = f.values().iter().copied().fold(f64::INFINITY, f64::min);
    let certified = direct <= opts.tol * (-2.0 * min_f).exp();

    let mut history: Vec<HistoryRow> = out
        .history
        .iter()
        .enumerate()
        .map(|(i, &r)| HistoryRow { iteration: i, energy: None, residual: r, tau: None })
        .collect();
    if let Some(first) = history.first_mut() {
        first.energy = Some(state.energy);
    }
    if let Some(last) = history.last_mut() {
        last.energy = Some(new_state.energy);
    }
    Ok(SolveReport {
        iterations: out.iterations,
        history,
        final_f: f,
        status: if out.iterations == 0 { SolveStatus::Stationary } else { SolveStatus::Converged },
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::samples;

    #[test]
    fn rejects_higher_dimensions() {
        let grid = TorusGrid::new(3, 8).unwrap();
        let g = Metric::flat(&grid);
        let s = samples::flat_structure(&grid);
        assert!(matches!(
            solve_conformal_critical_2d(&s, &g, 1e-8),
            Err(Error::UnsupportedDimension { dim: 3, .. })
        ));
    }

    #[test]
    fn metrisable_structure_needs_no_change() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let g = samples::random_metric(&grid, 8, 0.2);
        let s = ProjectiveStructure::new(g.levi_civita().clone());
        let r = solve_conformal_critical_2d(&s, &g, 1e-8).unwrap();
        assert!(r.final_f.max_abs() < 1e-12);
        assert!(r.certified);
    }

    #[test]
    fn random_structure_on_random_metric() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let g = samples::random_metric(&grid, 5, 0.2);
        let s = samples::random_structure(&grid, 6, 0.4);
        let r = solve_conformal_critical_2d(&s, &g, 1e-8).unwrap();
        assert!(r.certified, "residuals {:?}", r.residual_history());
        assert!(metric_mean_is_zero(&g, &r.final_f));
    }

    fn metric_mean_is_zero(g: &Metric, f: &TensorField) -> bool {
        g.mean(f.values()).abs() < 1e-14
    }
}
