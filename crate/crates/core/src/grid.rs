//! The periodic computational domain `[0, 2pi)^n` with `N` points per axis.
//!
//! Grid points are numbered row-major over the axes (axis 0 varies slowest),
//! so point `p` has lattice coordinates `k_a` with `p = sum_a k_a N^(n-1-a)`
//! and chart coordinates `x_a = 2 pi k_a / N`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{Symmetry, TensorField, Valence, Variance};

#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

impl Eq for TorusGrid {}

/// Centered 8th-order first-derivative stencil, offsets 1..=4.
const FD8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

impl TorusGrid {
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidGrid(format!("dimension must be at least 2, got {dim}")));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 8, got {points_per_axis}"
            )));
        }
        if points_per_axis.checked_pow(dim as u32).is_none_or(|t| t > 1 << 26) {
            return Err(Error::InvalidGrid("grid too large".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(TorusGrid {
            dim,
            n: points_per_axis,
            forward: planner.plan_fft_forward(points_per_axis),
            inverse: planner.plan_fft_inverse(points_per_axis),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Total number of points `N^n`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a single cell, `spacing^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `(2 pi)^n`.
    pub fn flat_volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    pub fn lattice(&self, point: usize, axis: usize) -> usize {
        (point / self.stride(axis)) % self.n
    }

    pub fn coordinate(&self, point: usize, axis: usize) -> f64 {
        self.lattice(point, axis) as f64 * self.spacing()
    }

    pub fn coords(&self, point: usize) -> Vec<f64> {
        (0..self.dim).map(|a| self.coordinate(point, a)).collect()
    }

    /// Signed wavenumber of FFT bin `j`; the Nyquist bin maps to `N/2`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Wavenumber used by the derivative: the Nyquist bin is differentiated to zero
    /// so that derivatives of real fields stay real.
    fn derivative_wavenumber(&self, j: usize) -> f64 {
        if j == self.n / 2 {
            0.0
        } else {
            self.wavenumber(j) as f64
        }
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange { axis, dim: self.dim });
        }
        Ok(())
    }

    /// Applies the 1-D transform along `axis` to every grid line of `buf`.
    fn transform_axis(&self, buf: &mut [Complex64], axis: usize, inverse: bool) {
        let n = self.n;
        let stride = self.stride(axis);
        let outer = self.len() / (n * stride);
        let mut lines = vec![Complex64::new(0.0, 0.0); buf.len()];
        let mut l = 0;
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for j in 0..n {
                    lines[l * n + j] = buf[base + j * stride];
                }
                l += 1;
            }
        }
        if inverse {
            self.inverse.process(&mut lines);
        } else {
            self.forward.process(&mut lines);
        }
        let mut l = 0;
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for j in 0..n {
                    buf[base + j * stride] = lines[l * n + j];
                }
                l += 1;
            }
        }
    }

    /// Unnormalized forward n-D DFT of a real scalar array.
    pub fn fft_nd(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for axis in 0..self.dim {
            self.transform_axis(&mut buf, axis, false);
        }
        buf
    }

    /// Inverse of [`fft_nd`](Self::fft_nd) including the `1/N^n` normalization; returns real parts.
    pub fn ifft_nd_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        for axis in 0..self.dim {
            self.transform_axis(&mut spectrum, axis, true);
        }
        let scale = 1.0 / self.len() as f64;
        spectrum.iter().map(|c| c.re * scale).collect()
    }

    /// Multiplies the spectrum of `values` by `symbol(wavenumbers)` and transforms back.
    pub fn apply_symbol(&self, values: &[f64], symbol: impl Fn(&[i64]) -> f64) -> Vec<f64> {
        let mut spec = self.fft_nd(values);
        let mut k = vec![0i64; self.dim];
        for (p, c) in spec.iter_mut().enumerate() {
            for (a, ka) in k.iter_mut().enumerate() {
                *ka = self.wavenumber(self.lattice(p, a));
            }
            *c *= symbol(&k);
        }
        self.ifft_nd_real(spec)
    }

    /// True if `k` is a Nyquist wavenumber on this grid.
    pub fn is_nyquist(&self, k: i64) -> bool {
        k.unsigned_abs() as usize == self.n / 2
    }

    /// Fourier-spectral derivative of a scalar array along `axis`.
    pub fn diff(&self, values: &[f64], axis: usize) -> Result<Vec<f64>> {
        self.check_axis(axis)?;
        if values.len() != self.len() {
            return Err(Error::GridMismatch);
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_axis(&mut buf, axis, false);
        let stride = self.stride(axis);
        let scale = 1.0 / self.n as f64;
        for (p, c) in buf.iter_mut().enumerate() {
            let k = self.derivative_wavenumber((p / stride) % self.n);
            *c = Complex64::new(-c.im, c.re) * (k * scale);
        }
        self.transform_axis(&mut buf, axis, true);
        Ok(buf.into_iter().map(|c| c.re).collect())
    }

    /// Centered 8th-order finite-difference derivative along `axis`.
    /// Kept as an independent check on [`diff`](Self::diff).
    pub fn diff_fd8(&self, values: &[f64], axis: usize) -> Result<Vec<f64>> {
        self.check_axis(axis)?;
        if values.len() != self.len() {
            return Err(Error::GridMismatch);
        }
        let n = self.n;
        let stride = self.stride(axis);
        let h = self.spacing();
        Ok((0..self.len())
            .map(|p| {
                let k = (p / stride) % n;
                let base = p - k * stride;
                FD8.iter().enumerate().fold(0.0, |acc, (m, w)| {
                    let m = m + 1;
                    let fwd = base + ((k + m) % n) * stride;
                    let bwd = base + ((k + n - m) % n) * stride;
                    acc + w * (values[fwd] - values[bwd])
                }) / h
            })
            .collect())
    }

    /// Chart partial derivative of every component of `field` along `axis`.
    pub fn partial_derivative(&self, field: &TensorField, axis: usize) -> Result<TensorField> {
        self.check_axis(axis)?;
        if field.grid() != self {
            return Err(Error::GridMismatch);
        }
        let npts = self.len();
        let parts: Vec<Vec<f64>> = (0..field.n_components())
            .into_par_iter()
            .map(|c| self.diff(field.component(c), axis))
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(npts * parts.len());
        parts.into_iter().for_each(|p| data.extend(p));
        TensorField::from_components(self, field.valence().to_vec(), field.symmetry(), data)
    }

    /// All chart partials at once: `(dT)_{k, I} = d_k T_I`, derivative slot first.
    pub fn partial_gradient(&self, field: &TensorField) -> Result<TensorField> {
        if field.grid() != self {
            return Err(Error::GridMismatch);
        }
        if field.rank() + 1 > crate::field::MAX_RANK {
            return Err(Error::ValenceOverflow(field.rank() + 1));
        }
        let ncomp = field.n_components();
        let jobs: Vec<(usize, usize)> =
            (0..self.dim).flat_map(|k| (0..ncomp).map(move |c| (k, c))).collect();
        let parts: Vec<Vec<f64>> = jobs
            .into_par_iter()
            .map(|(k, c)| self.diff(field.component(c), k))
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(self.len() * parts.len());
        parts.into_iter().for_each(|p| data.extend(p));
        let mut valence: Valence = vec![Variance::Down];
        valence.extend_from_slice(field.valence());
        TensorField::from_components(self, valence, Symmetry::None, data)
    }

    /// Periodic trapezoid rule `spacing^n * sum(s * rho)`.
    pub fn integrate(&self, scalar: &[f64], density: &[f64]) -> Result<f64> {
        if scalar.len() != self.len() || density.len() != self.len() {
            return Err(Error::GridMismatch);
        }
        let min = density.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::NonPositiveDensity { min });
        }
        Ok(self.integrate_unchecked(scalar, density))
    }

    pub(crate) fn integrate_unchecked(&self, scalar: &[f64], density: &[f64]) -> f64 {
        let s: f64 = scalar.iter().zip(density).map(|(a, b)| a * b).sum();
        s * self.cell_volume()
    }

    /// Flat-density quadrature.
    pub fn integrate_flat(&self, scalar: &[f64]) -> f64 {
        scalar.iter().sum::<f64>() * self.cell_volume()
    }

    /// Seeded band-limited random field.
    ///
    /// Every component is a real trigonometric polynomial with all
    /// per-axis frequencies `<= max_freq`. Mode coefficients are uniform in
    /// `[-1, 1]`, damped by `1 / (1 + |k|^2)` and normalized so that every
    /// component is bounded by `amplitude` in absolute value. The coefficients
    /// depend only on `seed`, the valence rank and `max_freq`, never on `N`,
    /// so the same seed samples the same function at every resolution.
    pub fn random_band_limited(
        &self,
        seed: u64,
        valence: Valence,
        symmetry: Symmetry,
        max_freq: usize,
        amplitude: f64,
    ) -> Result<TensorField> {
        let limit = self.n / 4;
        if max_freq > limit {
            return Err(Error::BandLimitTooLarge { max_freq, limit });
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidAmplitude(amplitude));
        }
        if valence.len() > crate::field::MAX_RANK {
            return Err(Error::ValenceOverflow(valence.len()));
        }
        let modes = half_lattice(self.dim, max_freq as i64);
        let weights: Vec<f64> = modes
            .iter()
            .map(|k| 1.0 / (1.0 + k.iter().map(|x| (x * x) as f64).sum::<f64>()))
            .collect();
        let total: f64 = modes
            .iter()
            .zip(&weights)
            .map(|(k, w)| if k.iter().all(|&x| x == 0) { *w } else { 2.0 * w })
            .sum();
        let ncomp = self.dim.pow(valence.len() as u32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let npts = self.len();
        let mut data = Vec::with_capacity(ncomp * npts);
        for _ in 0..ncomp {
            let mut spec = vec![Complex64::new(0.0, 0.0); npts];
            for (k, w) in modes.iter().zip(&weights) {
                let s = amplitude * w / total;
                let a = rng.random_range(-1.0..=1.0) * s;
                if k.iter().all(|&x| x == 0) {
                    spec[0] += Complex64::new(a, 0.0);
                    continue;
                }
                let b = rng.random_range(-1.0..=1.0) * s;
                spec[self.bin_index(k, 1)] += Complex64::new(a, -b) * 0.5;
                spec[self.bin_index(k, -1)] += Complex64::new(a, b) * 0.5;
            }
            // ifft_nd_real divides by N^n; the trigonometric sum needs no normalization.
            let values = self.ifft_nd_real(spec);
            data.extend(values.into_iter().map(|v| v * npts as f64));
        }
        TensorField::from_components(self, valence, symmetry, data)
    }

    fn bin_index(&self, k: &[i64], sign: i64) -> usize {
        let n = self.n as i64;
        k.iter().fold(0usize, |acc, &x| acc * self.n + (sign * x).rem_euclid(n) as usize)
    }

    /// Fraction of spectral energy of `values` at per-axis frequencies above `max_freq`.
    pub fn energy_above(&self, values: &[f64], max_freq: usize) -> f64 {
        let spec = self.fft_nd(values);
        let mut total = 0.0;
        let mut high = 0.0;
        for (p, c) in spec.iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            if (0..self.dim).any(|a| self.wavenumber(self.lattice(p, a)).unsigned_abs() as usize > max_freq) {
                high += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            high / total
        }
    }
}

/// Integer vectors in `[-k, k]^dim` that are zero or whose first nonzero entry is positive.
fn half_lattice(dim: usize, k: i64) -> Vec<Vec<i64>> {
    let side = (2 * k + 1) as usize;
    let mut out = Vec::new();
    for flat in 0..side.pow(dim as u32) {
        let mut v = vec![0i64; dim];
        let mut r = flat;
        for slot in v.iter_mut().rev() {
            *slot = (r % side) as i64 - k;
            r /= side;
        }
        match v.iter().find(|&&x| x != 0) {
            None => out.push(v),
            Some(&x) if x > 0 => out.push(v),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::valence;

    fn scalar_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..grid.len()).map(|p| f(&grid.coords(p))).collect()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(TorusGrid::new(1, 16).is_err());
        assert!(TorusGrid::new(2, 6).is_err());
        assert!(TorusGrid::new(2, 15).is_err());
    }

    #[test]
    fn point_count_and_coordinates() {
        let g = TorusGrid::new(3, 8).unwrap();
        assert_eq!(g.len(), 512);
        let p = 5 * 64 + 2 * 8 + 7;
        assert_eq!(g.lattice(p, 0), 5);
        assert_eq!(g.lattice(p, 1), 2);
        assert_eq!(g.lattice(p, 2), 7);
        assert!((g.coordinate(p, 2) - 2.0 * PI * 7.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = TorusGrid::new(2, 16).unwrap();
        let d = g.diff(&vec![3.7; g.len()], 1).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn derivative_of_sine() {
        let g = TorusGrid::new(2, 32).unwrap();
        let u = scalar_fn(&g, |x| x[1].sin());
        let d = g.diff(&u, 1).unwrap();
        let want = scalar_fn(&g, |x| x[1].cos());
        let err = d.iter().zip(&want).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-12, "err {err}");
        let d0 = g.diff(&u, 0).unwrap();
        assert!(d0.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn axis_out_of_range() {
        let g = TorusGrid::new(2, 8).unwrap();
        assert!(matches!(g.diff(&vec![0.0; 64], 2), Err(Error::AxisOutOfRange { axis: 2, dim: 2 })));
    }

    #[test]
    fn spectral_derivative_agrees_with_fd8() {
        // FD8 truncation error is O(h^8): ~256x smaller per doubling of N.
        let mut errs = Vec::new();
        for n in [32, 64] {
            let g = TorusGrid::new(2, n).unwrap();
            let u = g.random_band_limited(11, valence::scalar(), Symmetry::None, 2, 1.0).unwrap();
            let a = g.diff(u.values(), 0).unwrap();
            let b = g.diff_fd8(u.values(), 0).unwrap();
            errs.push(a.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())));
        }
        assert!(errs[0] < 1e-5, "{errs:?}");
        assert!(errs[0] / errs[1] > 150.0, "{errs:?}");
    }

    #[test]
    fn flat_volume_quadrature() {
        let g = TorusGrid::new(2, 16).unwrap();
        let one = vec![1.0; g.len()];
        let v = g.integrate(&one, &one).unwrap();
        assert!((v - (2.0 * PI).powi(2)).abs() < 1e-12);
        let s = scalar_fn(&g, |x| x[0].sin());
        assert!(g.integrate(&s, &one).unwrap().abs() < 1e-12);
    }

    #[test]
    fn integrate_rejects_nonpositive_density() {
        let g = TorusGrid::new(2, 8).unwrap();
        let mut rho = vec![1.0; g.len()];
        rho[3] = 0.0;
        assert!(matches!(g.integrate(&rho, &rho), Err(Error::NonPositiveDensity { .. })));
    }

    #[test]
    fn quadrature_is_resolution_independent_for_band_limited_integrands() {
        let eval = |n: usize| {
            let g = TorusGrid::new(2, n).unwrap();
            let u = g.random_band_limited(5, valence::scalar(), Symmetry::None, 3, 1.0).unwrap();
            let w = g.random_band_limited(6, valence::scalar(), Symmetry::None, 3, 0.5).unwrap();
            let rho: Vec<f64> = w.values().iter().map(|x| 1.0 + x).collect();
            g.integrate(u.values(), &rho).unwrap()
        };
        let (a, b) = (eval(16), eval(32));
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn random_fields_are_deterministic_and_band_limited() {
        let g = TorusGrid::new(3, 16).unwrap();
        let a = g.random_band_limited(42, valence::e_section(), Symmetry::SymmetricLowerPair, 3, 0.7).unwrap();
        let b = g.random_band_limited(42, valence::e_section(), Symmetry::SymmetricLowerPair, 3, 0.7).unwrap();
        assert_eq!(a.data(), b.data());
        assert!(a.max_abs() <= 0.7);
        assert!(a.symmetry_defect() == 0.0);
        for c in 0..a.n_components() {
            assert!(g.energy_above(a.component(c), 3) < 1e-13);
        }
        let z = g.random_band_limited(42, valence::vector(), Symmetry::None, 2, 0.0).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn band_limit_guard() {
        let g = TorusGrid::new(2, 16).unwrap();
        assert!(matches!(
            g.random_band_limited(1, valence::scalar(), Symmetry::None, 5, 1.0),
            Err(Error::BandLimitTooLarge { max_freq: 5, limit: 4 })
        ));
    }
}
