use super::{HistoryRow, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::projective::{ConformalFamily, ConformalSample, ProjectiveStructure};
use crate::riemannian::Metric;

#[derive(Clone, Debug)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Stop once the normalized deviation of `S_proj` drops to this value.
    pub tol: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { max_iter: 500, tol: 1e-6, armijo: 1e-4, backtrack: 0.5, max_backtracks: 60 }
    }
}

/// Below this sup-norm the conformal gradient is treated as zero.
const STATIONARY_FLOOR: f64 = 1e-13;

/// `||S - mean S||_{L2(dmu)} / (|mean S| Vol^(1/2))`, the root-mean-square
/// deviation of `S` relative to its mean; zero when `S` vanishes identically.
pub fn normalized_deviation(s: &TensorField, metric: &Metric) -> f64 {
    deviation(s.values(), |v| metric.mean(v))
}

fn deviation(s: &[f64], mean_of: impl Fn(&[f64]) -> f64) -> f64 {
    let mean = mean_of(s);
    let sq: Vec<f64> = s.iter().map(|v| (v - mean).powi(2)).collect();
    let rms = mean_of(&sq).sqrt();
    if rms == 0.0 {
        0.0
    } else {
        rms / mean.abs()
    }
}

/// `G = (n/2 - 1)|Phi|^2 - div tr Phi - k n` at the sampled metric.
fn gradient(sample: &ConformalSample, n: usize) -> Vec<f64> {
    let nf = n as f64;
    let kn = (nf - 2.0) / 2.0 * sample.energy_raw / sample.volume;
    sample
        .phi_norm_sq
        .values()
        .iter()
        .zip(sample.div_trace.values())
        .map(|(p, d)| (nf / 2.0 - 1.0) * p - d - kn)
        .collect()
}

struct Iterate {
    f: TensorField,
    sample: ConformalSample,
}

impl Iterate {
    fn new(family: &ConformalFamily, f: TensorField) -> Result<Self> {
        let sample = family.sample(&f)?;
        Ok(Iterate { f, sample })
    }

    fn deviation(&self) -> f64 {
        deviation(self.sample.projective_scalar.values(), |v| self.sample.mean(v))
    }
}

pub fn conformal_descent(
    structure: &ProjectiveStructure,
    metric: &Metric,
    max_iter: usize,
    tol: f64,
) -> Result<SolveReport> {
    conformal_descent_with(structure, metric, &DescentOptions { max_iter, tol, ..Default::default() })
}

/// Steepest descent of the energy over `exp(2f) g`:
/// `f <- f - tau G` with `G` the conformal gradient at the current metric and
/// `tau` from Armijo backtracking starting at `1 / (max|G| + eps)`.
/// Iterates are evaluated through [`ConformalFamily`]; the base metric is
/// never rebuilt.
pub fn conformal_descent_with(
    structure: &ProjectiveStructure,
    metric: &Metric,
    opts: &DescentOptions,
) -> Result<SolveReport> {
    let n = metric.dim();
    if n < 3 {
        return Err(Error::UnsupportedDimension { dim: n, reason: "conformal descent needs n >= 3; use the Poisson solve" });
    }
    if !(opts.backtrack > 0.0 && opts.backtrack < 1.0) || !(opts.armijo > 0.0 && opts.armijo < 1.0) {
        return Err(Error::InvalidArgument("line-search parameters must lie in (0, 1)".into()));
    }
    let grid = metric.grid();
    let vol_exp = (2.0 - n as f64) / n as f64;
    let family = ConformalFamily::new(structure, metric)?;
    let mut cur = Iterate::new(&family, TensorField::constant(grid, 0.0))?;
    let mut history =
        vec![HistoryRow { iteration: 0, energy: Some(cur.sample.energy), residual: cur.deviation(), tau: None }];
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    for it in 1..=opts.max_iter + 1 {
        let grad = TensorField::scalar(grid, gradient(&cur.sample, n));
        let gmax = grad.max_abs();
        if gmax <= STATIONARY_FLOOR {
            status = if it == 1 { SolveStatus::Stationary } else { SolveStatus::Converged };
            break;
        }
        if history.last().unwrap().residual <= opts.tol {
            status = SolveStatus::Converged;
            break;
        }
        if it > opts.max_iter {
            break;
        }
        let g2: Vec<f64> = grad.values().iter().map(|v| v * v).collect();
        // d/dtau E(exp(2(f - tau G)) g) at tau = 0.
        let slope = -2.0 * cur.sample.volume.powf(vol_exp) * cur.sample.integrate(&g2);
        let e0 = cur.sample.energy;
        let mut tau = 1.0 / (gmax + f64::EPSILON);
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial_f = cur.f.axpy(-tau, &grad)?;
            if let Ok(next) = Iterate::new(&family, trial_f) {
                let e = next.sample.energy;
                if e.is_finite() && e <= e0 + opts.armijo * tau * slope {
                    accepted = Some(next);
                    break;
                }
            }
            tau *= opts.backtrack;
        }
        let Some(next) = accepted else {
            status = SolveStatus::LineSearchFailed;
            break;
        };
        cur = next;
        iterations = it;
        history.push(HistoryRow {
            iteration: it,
            energy: Some(cur.sample.energy),
            residual: cur.deviation(),
            tau: Some(tau),
        });
    }

    let energies: Vec<f64> = history.iter().filter_map(|r| r.energy).collect();
    let monotone = energies.windows(2).all(|w| w[1] <= w[0]);
    Ok(SolveReport { iterations, history, final_f: cur.f, status, certified: monotone })
}
