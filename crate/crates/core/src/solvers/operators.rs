//! Spectral discretizations of `rho Delta_g` and its flat preconditioner.

use crate::grid::TorusGrid;
use crate::riemannian::Metric;

/// `K f = -sum_ij d_i(rho g^{ij} d_j f) = rho Delta_g f`, symmetric and
/// positive semi-definite in the Euclidean inner product.
pub(crate) struct Stiffness {
    grid: TorusGrid,
    coeff: Vec<Vec<f64>>,
}

impl Stiffness {
    pub fn new(metric: &Metric) -> Self {
        let n = metric.dim();
        let rho = metric.density();
        let coeff = (0..n * n)
            .map(|c| metric.inverse().component(c).iter().zip(rho).map(|(g, r)| g * r).collect())
            .collect();
        Stiffness { grid: metric.grid().clone(), coeff }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.grid.dim();
        let df: Vec<Vec<f64>> = (0..n).map(|a| self.grid.diff(f, a).expect("axis in range")).collect();
        let mut out = vec![0.0; f.len()];
        for i in 0..n {
            let mut flux = vec![0.0; f.len()];
            for (j, dj) in df.iter().enumerate() {
                let c = &self.coeff[i * n + j];
                flux.iter_mut().zip(c).zip(dj).for_each(|((s, c), d)| *s += c * d);
            }
            let d = self.grid.diff(&flux, i).expect("axis in range");
            out.iter_mut().zip(d).for_each(|(o, v)| *o -= v);
        }
        out
    }
}

/// True for wavevectors annihilated by every spectral derivative: each axis
/// is either 0 or the Nyquist frequency.
pub(crate) fn is_null_mode(grid: &TorusGrid, k: &[i64]) -> bool {
    k.iter().all(|&ka| ka == 0 || grid.is_nyquist(ka))
}

fn derivative_sq(grid: &TorusGrid, k: &[i64]) -> f64 {
    k.iter().filter(|&&ka| !grid.is_nyquist(ka)).map(|&ka| (ka * ka) as f64).sum()
}

/// Removes the kernel of [`Stiffness`] from `v`.
pub(crate) fn project_null(grid: &TorusGrid, v: &[f64]) -> Vec<f64> {
    grid.apply_symbol(v, |k| if is_null_mode(grid, k) { 0.0 } else { 1.0 })
}

/// Removes every Fourier mode with a Nyquist component on some axis; these
/// checkerboard modes are invisible to the spectral derivative.
pub(crate) fn drop_nyquist(grid: &TorusGrid, v: &[f64]) -> Vec<f64> {
    grid.apply_symbol(v, |k| if k.iter().any(|&ka| grid.is_nyquist(ka)) { 0.0 } else { 1.0 })
}

/// `(c |k|^2 + shift)^{-1}` on the spectrum; kernel modes are dropped when
/// `shift == 0`.
pub(crate) fn flat_inverse(grid: &TorusGrid, v: &[f64], c: f64, shift: f64) -> Vec<f64> {
    grid.apply_symbol(v, |k| {
        let d = c * derivative_sq(grid, k) + shift;
        if shift == 0.0 && is_null_mode(grid, k) {
            0.0
        } else {
            1.0 / d
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TensorField;
    use crate::riemannian;
    use crate::samples;

    #[test]
    fn stiffness_is_density_times_laplacian() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let g = samples::random_metric(&grid, 3, 0.2);
        let f = samples::random_scalar(&grid, 4, 3, 1.0);
        let k = Stiffness::new(&g).apply(f.values());
        let lap = riemannian::laplacian(&g, &f).unwrap();
        let rl = TensorField::scalar(&grid, lap.values().iter().zip(g.density()).map(|(a, b)| a * b).collect());
        assert!(TensorField::scalar(&grid, k).max_abs_diff(&rl).unwrap() < 1e-11);
    }

    #[test]
    fn stiffness_is_symmetric() {
        let grid = TorusGrid::new(3, 8).unwrap();
        let g = samples::random_metric(&grid, 1, 0.2);
        let k = Stiffness::new(&g);
        let u = samples::random_scalar(&grid, 5, 2, 1.0);
        let v = samples::random_scalar(&grid, 6, 2, 1.0);
        let a: f64 = u.values().iter().zip(k.apply(v.values())).map(|(x, y)| x * y).sum();
        let b: f64 = v.values().iter().zip(k.apply(u.values())).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-11 * a.abs().max(1.0));
    }
}
