use super::cg::pcg;
use super::operators::{drop_nyquist, flat_inverse, Stiffness};
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::projective::{self, yamabe_coefficient, ProjectiveStructure};
use crate::riemannian::Metric;
use crate::samples;

const MAX_OUTER: usize = 300;
const MAX_INNER: usize = 5000;

#[derive(Clone, Debug)]
pub struct SpectrumEstimate {
    /// Smallest Rayleigh quotient reached over all probes.
    pub lower_bound: f64,
    /// Ground state of the best probe, positive, normalized in `L2(dmu_g)`.
    pub eigenfunction: TensorField,
    /// Final Rayleigh quotient of each probe.
    pub probes: Vec<f64>,
    pub iterations: usize,
}

/// Lowest eigenvalue of `L_g = 4(n-1)/(n-2) Delta_g + S_proj` in `L2(dmu_g)`.
pub fn spectrum_lower_bound(structure: &ProjectiveStructure, metric: &Metric, n_probe: usize) -> Result<f64> {
    Ok(spectrum_estimate(structure, metric, n_probe)?.lower_bound)
}

/// Shifted inverse iteration on `(c K + rho (S + sigma)) w = rho u`, where
/// `K = rho Delta_g` and `sigma = max(0, -min S) + 1` makes the operator
/// positive definite. Each probe starts from a different positive function.
/// Modes with a Nyquist component are excluded: the spectral stiffness
/// annihilates them and they would otherwise form a spurious near-degenerate
/// cluster at the mean of `S`.
pub fn spectrum_estimate(
    structure: &ProjectiveStructure,
    metric: &Metric,
    n_probe: usize,
) -> Result<SpectrumEstimate> {
    let n = metric.dim();
    if n < 3 {
        return Err(Error::UnsupportedDimension { dim: n, reason: "the projective-conformal Laplacian needs n >= 3" });
    }
    if n_probe == 0 {
        return Err(Error::InvalidArgument("at least one probe is required".into()));
    }
    let grid = metric.grid();
    let s = projective::projective_scalar(structure, metric)?;
    let c = yamabe_coefficient(n);
    let rho = metric.density();
    let min_s = s.values().iter().copied().fold(f64::INFINITY, f64::min);
    let sigma = (-min_s).max(0.0) + 1.0;
    let k = Stiffness::new(metric);
    let rs: Vec<f64> = s.values().iter().zip(rho).map(|(s, r)| s * r).collect();

    let apply_l = |u: &[f64]| -> Vec<f64> {
        let mut out = k.apply(u);
        out.iter_mut().zip(&rs).zip(u).for_each(|((o, rs), u)| *o = c * *o + rs * u);
        out
    };
    // The iteration lives on fields without Nyquist content.
    let apply_shifted = |u: &[f64]| -> Vec<f64> {
        let mut out = apply_l(u);
        out.iter_mut().zip(rho).zip(u).for_each(|((o, r), u)| *o += sigma * r * u);
        drop_nyquist(grid, &out)
    };
    let rho_mean = rho.iter().sum::<f64>() / rho.len() as f64;
    let precond = |r: &[f64]| drop_nyquist(grid, &flat_inverse(grid, r, c * rho_mean, sigma * rho_mean));
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let weighted = |u: &[f64]| u.iter().zip(rho).map(|(u, r)| u * u * r).sum::<f64>();
    let rayleigh = |u: &[f64]| dot(u, &apply_l(u)) / weighted(u);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut probes = Vec::with_capacity(n_probe);
    let mut total = 0;
    for probe in 0..n_probe {
        let bump = samples::random_scalar(grid, samples::subseed(0x5bec, probe as u64), 2, 0.5);
        let mut u: Vec<f64> = bump.values().iter().map(|b| 1.0 + b).collect();
        let mut lambda = rayleigh(&u);
        let mut done = false;
        for _ in 0..MAX_OUTER {
            total += 1;
            let b: Vec<f64> = u.iter().zip(rho).map(|(u, r)| u * r).collect();
            let b = drop_nyquist(grid, &b);
            let bnorm = dot(&b, &b).sqrt();
            let euclid = |r: &[f64]| dot(r, r).sqrt();
            let inner = pcg(apply_shifted, precond, &b, u.clone(), euclid, 1e-14 * bnorm, MAX_INNER);
            let scale = weighted(&inner.x).sqrt();
            u = inner.x.iter().map(|v| v / scale).collect();
            let next = rayleigh(&u);
            let change = (next - lambda).abs();
            lambda = next;
            if change <= 1e-14 * (1.0 + lambda.abs()) {
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::NonConvergence { solver: "inverse iteration", iterations: MAX_OUTER, residual: lambda });
        }
        probes.push(lambda);
        if best.as_ref().is_none_or(|(l, _)| lambda < *l) {
            best = Some((lambda, u));
        }
    }
    let (lower_bound, mut u) = best.expect("at least one probe");
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
    let norm = (metric.integrate(&u.iter().map(|v| v * v).collect::<Vec<_>>())).sqrt();
    u.iter_mut().for_each(|v| *v /= norm);
    Ok(SpectrumEstimate { lower_bound, eigenfunction: TensorField::scalar(grid, u), probes, iterations: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;

    #[test]
    fn flat_metrisable_bottom_is_zero() {
        let grid = TorusGrid::new(3, 8).unwrap();
        let g = Metric::flat(&grid);
        let s = samples::flat_structure(&grid);
        let est = spectrum_estimate(&s, &g, 2).unwrap();
        assert!(est.lower_bound.abs() < 1e-12);
    }

    #[test]
    fn random_structure_bottom_is_positive() {
        let grid = TorusGrid::new(3, 8).unwrap();
        let g = samples::random_metric(&grid, 1, 0.2);
        let s = samples::random_structure(&grid, 2, 0.4);
        let est = spectrum_estimate(&s, &g, 2).unwrap();
        assert!(est.lower_bound > 0.0);
        assert!(est.eigenfunction.values().iter().all(|&v| v > 0.0));
    }
}
