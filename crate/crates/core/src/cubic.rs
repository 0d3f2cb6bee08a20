//! Cubic differentials on a conformally flat 2-torus.
//!
//! In the chart `z = x + iy` a cubic differential is `C = c dz^3` with
//! `c = a + ib`. Its real part is the totally symmetric, trace-free tensor
//! `A = a dx^3 - 3b dx^2 dy - 3a dx dy^2 + b dy^3`, i.e.
//! `A_000 = a`, `A_001 = -b`, `A_011 = -a`, `A_111 = b` (indices from 0).
//! Raising the first index gives the section `alpha^i_{jk} = g^{il} A_{ljk}`
//! of `E_0`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{pointwise, valence, Symmetry, TensorField};
use crate::grid::TorusGrid;
use crate::algebra::local;
use crate::projective::ProjectiveStructure;
use crate::report::{Environment, Report};
use crate::riemannian::{self, Metric};
use crate::variation;

/// Allowed relative deviation of the metric from `exp(2 phi) delta`.
const CONFORMAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct CubicDifferential {
    re: TensorField,
    im: TensorField,
}

impl CubicDifferential {
    pub fn new(re: TensorField, im: TensorField) -> Result<Self> {
        re.ensure_valence(&valence::scalar())?;
        im.ensure_valence(&valence::scalar())?;
        re.ensure_same_grid(&im)?;
        if re.dim() != 2 {
            return Err(Error::UnsupportedDimension { dim: re.dim(), reason: "cubic differentials live on surfaces" });
        }
        Ok(CubicDifferential { re, im })
    }

    pub fn constant(grid: &TorusGrid, c: Complex64) -> Result<Self> {
        Self::new(TensorField::constant(grid, c.re), TensorField::constant(grid, c.im))
    }

    pub fn from_fn(grid: &TorusGrid, c: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        Self::new(TensorField::from_fn(grid, |x| c(x).re), TensorField::from_fn(grid, |x| c(x).im))
    }

    pub fn re(&self) -> &TensorField {
        &self.re
    }

    pub fn im(&self) -> &TensorField {
        &self.im
    }

    pub fn grid(&self) -> &TorusGrid {
        self.re.grid()
    }

    /// The real part `A` as a totally symmetric `(0,3)` field.
    pub fn real_part(&self) -> TensorField {
        let grid = self.grid();
        let mut a = TensorField::zeros(grid, valence::covariant3(), Symmetry::TotallySymmetric);
        let (re, im) = (self.re.values(), self.im.values());
        let set = |a: &mut TensorField, idx: [usize; 3], src: &[f64], sign: f64| {
            let c = a.component_index(&idx);
            a.component_mut(c).iter_mut().zip(src).for_each(|(d, s)| *d = sign * s);
        };
        set(&mut a, [0, 0, 0], re, 1.0);
        for perm in [[0, 0, 1], [0, 1, 0], [1, 0, 0]] {
            set(&mut a, perm, im, -1.0);
        }
        for perm in [[0, 1, 1], [1, 0, 1], [1, 1, 0]] {
            set(&mut a, perm, re, -1.0);
        }
        set(&mut a, [1, 1, 1], im, 1.0);
        a
    }
}

/// `phi` with `g = exp(2 phi) delta`, or an error if `g` is not of that form.
pub fn conformal_factor(metric: &Metric) -> Result<TensorField> {
    if metric.dim() != 2 {
        return Err(Error::UnsupportedDimension { dim: metric.dim(), reason: "cubic differentials live on surfaces" });
    }
    let g = metric.g();
    let (g00, g01, g11) = (g.component(0), g.component(1), g.component(3));
    let mut dev = 0.0f64;
    for p in 0..g00.len() {
        dev = dev.max((g01[p].abs() + (g00[p] - g11[p]).abs()) / g00[p]);
    }
    if dev > CONFORMAL_TOL {
        return Err(Error::NotConformallyFlat(dev));
    }
    Ok(TensorField::scalar(metric.grid(), g00.iter().map(|v| 0.5 * v.ln()).collect()))
}

/// `alpha^i_{jk} = g^{il} A_{ljk}`.
pub fn build_alpha(c: &CubicDifferential, metric: &Metric) -> Result<TensorField> {
    conformal_factor(metric)?;
    c.re.ensure_same_grid(metric.g())?;
    let a = c.real_part();
    Ok(pointwise(
        metric.grid(),
        &[&a, metric.inverse()],
        valence::e_section(),
        Symmetry::SymmetricLowerPair,
        |x, out| local::transform_slot(x[0], 2, 3, 0, x[1], out),
    ))
}

/// `(div_g alpha)_{ij} = D_k alpha^k_{ij}` for the Levi-Civita connection.
pub fn divergence(alpha: &TensorField, metric: &Metric) -> Result<TensorField> {
    let d = riemannian::covariant_derivative(metric.levi_civita(), alpha)?;
    let n = metric.dim();
    Ok(pointwise(metric.grid(), &[&d], valence::covariant2(), Symmetry::TotallySymmetric, |x, out| {
        for i in 0..n {
            for j in 0..n {
                out[local::i2(n, i, j)] = (0..n).map(|k| x[0][local::i4(n, k, k, i, j)]).sum();
            }
        }
    }))
}

#[derive(Clone, Copy, Debug)]
pub struct HolomorphyResiduals {
    /// `max exp(-2 phi) |d_x c + i d_y c|`.
    pub cauchy_riemann: f64,
    /// `max (1/2 sum_ij (div_g alpha)_ij^2)^(1/2)` in chart components.
    pub divergence: f64,
}

/// The Cauchy-Riemann residual of `c` (weighted by `exp(-2 phi)`) and the
/// divergence of `alpha`; the two agree pointwise.
pub fn check_holomorphy(c: &CubicDifferential, metric: &Metric) -> Result<HolomorphyResiduals> {
    let phi = conformal_factor(metric)?;
    let grid = metric.grid();
    let (ax, ay) = (grid.diff(c.re.values(), 0)?, grid.diff(c.re.values(), 1)?);
    let (bx, by) = (grid.diff(c.im.values(), 0)?, grid.diff(c.im.values(), 1)?);
    let mut cr = 0.0f64;
    for p in 0..grid.len() {
        let w = (-2.0 * phi.values()[p]).exp();
        let re = ax[p] - by[p];
        let im = bx[p] + ay[p];
        cr = cr.max(w * re.hypot(im));
    }
    let div = divergence(&build_alpha(c, metric)?, metric)?;
    let mut dv = 0.0f64;
    for p in 0..grid.len() {
        let s: f64 = (0..4).map(|q| div.component(q)[p].powi(2)).sum();
        dv = dv.max((0.5 * s).sqrt());
    }
    Ok(HolomorphyResiduals { cauchy_riemann: cr, divergence: dv })
}

/// Checks, in order: `T_g(alpha) = 0`, `2 l*_g(alpha) = -div_g alpha`, and
/// that `g` is critical for the structure `LC(g) + alpha` with `k = 0`.
pub fn verify_blaschke_mechanism(c: &CubicDifferential, metric: &Metric, tol: f64) -> Result<Report> {
    let hol = check_holomorphy(c, metric)?;
    if hol.divergence.max(hol.cauchy_riemann) > tol {
        return Err(Error::NotHolomorphic(hol.divergence.max(hol.cauchy_riemann)));
    }
    let grid = metric.grid();
    let mut report =
        Report::new("blaschke", Environment { seed: 0, n: grid.points_per_axis(), dim: grid.dim() });
    report.value("cauchy_riemann_residual", hol.cauchy_riemann);
    report.value("divergence_residual", hol.divergence);

    let alpha = build_alpha(c, metric)?;
    let t = variation::stress_energy(&alpha, metric)?;
    report.check("stress_energy_vanishes", "stress-energy of a cubic differential", t.max_abs(), tol);

    let lhs = variation::ell_star(&alpha, metric)?.scale(2.0).add(&divergence(&alpha, metric)?)?;
    report.check("adjoint_is_divergence", "2 l*(alpha) = -div alpha", lhs.max_abs(), tol);

    let structure = ProjectiveStructure::new(metric.levi_civita().perturbed(&alpha)?);
    let res = variation::el_residual(&structure, metric)?;
    report.check("el_residual", "Euler-Lagrange equation", res.max_norm, tol);
    report.check_true("k_vanishes", "k = 0 on surfaces", res.k == 0.0);
    report.value("energy", crate::projective::energy(&structure, metric)?);
    Ok(report)
}
