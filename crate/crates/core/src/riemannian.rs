//! Metric-dependent calculus on the torus chart.
//!
//! Curvature follows a single index convention,
//! `R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj} + G^i_{ku} G^u_{lj} - G^i_{lu} G^u_{kj}`,
//! with Ricci `R_{jk} = R^l_{jlk}`, so that for a perturbed connection
//! `D + Phi` the curvature picks up `D_k Phi^i_{lj} - D_l Phi^i_{kj}` plus the
//! two quadratic terms.
//!
//! The Laplacian is the geometer's one: `Delta_g = -div_g grad_g`, whose
//! spectrum is non-negative. `Delta sin(x) = +sin(x)` on the flat torus.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::algebra::{self, local};
use crate::error::{Error, Result};
use crate::field::{pointwise, valence, Symmetry, TensorField, Variance, MAX_RANK};
use crate::grid::TorusGrid;

/// Smallest admissible ratio of pointwise eigenvalues of a metric.
pub const SPD_CONDITION_FLOOR: f64 = 1e-8;

/// A torsion-free connection given by its Christoffel coefficients `G^i_{jk}`
/// in the global chart.
#[derive(Clone, Debug)]
pub struct Connection {
    coeffs: TensorField,
}

impl Connection {
    /// Takes ownership of the coefficients and symmetrizes the lower pair.
    pub fn new(coeffs: TensorField) -> Result<Self> {
        coeffs.ensure_valence(&valence::e_section())?;
        Ok(Connection { coeffs: coeffs.with_symmetry(Symmetry::SymmetricLowerPair) })
    }

    /// The flat connection of the chart.
    pub fn flat(grid: &TorusGrid) -> Self {
        Connection {
            coeffs: TensorField::zeros(grid, valence::e_section(), Symmetry::SymmetricLowerPair),
        }
    }

    pub fn coeffs(&self) -> &TensorField {
        &self.coeffs
    }

    pub fn grid(&self) -> &TorusGrid {
        self.coeffs.grid()
    }

    /// `self + phi` for a section `phi` of `E`.
    pub fn perturbed(&self, phi: &TensorField) -> Result<Connection> {
        phi.ensure_valence(&valence::e_section())?;
        Connection::new(self.coeffs.add(phi)?)
    }

    /// `self - other` as a section of `E`.
    pub fn difference(&self, other: &Connection) -> Result<TensorField> {
        Ok(self.coeffs.sub(&other.coeffs)?.with_symmetry(Symmetry::SymmetricLowerPair))
    }
}

/// A Riemannian metric with its inverse and volume density computed at
/// construction; the Levi-Civita connection and scalar curvature are cached
/// on first use.
#[derive(Debug)]
pub struct Metric {
    g: TensorField,
    inv: TensorField,
    density: Vec<f64>,
    levi_civita: OnceLock<Connection>,
    scalar_curvature: OnceLock<TensorField>,
}

impl Clone for Metric {
    fn clone(&self) -> Self {
        fn copy<T: Clone>(cell: &OnceLock<T>) -> OnceLock<T> {
            let out = OnceLock::new();
            if let Some(v) = cell.get() {
                let _ = out.set(v.clone());
            }
            out
        }
        Metric {
            g: self.g.clone(),
            inv: self.inv.clone(),
            density: self.density.clone(),
            levi_civita: copy(&self.levi_civita),
            scalar_curvature: copy(&self.scalar_curvature),
        }
    }
}

impl Metric {
    /// Validates positive-definiteness at every point (smallest eigenvalue at
    /// least `1e-8` times the largest) and builds the caches.
    pub fn new(g: TensorField) -> Result<Self> {
        g.ensure_valence(&valence::covariant2())?;
        let g = g.with_symmetry(Symmetry::TotallySymmetric);
        let grid = g.grid().clone();
        let n = grid.dim();
        let npts = grid.len();

        let local: Vec<(Vec<f64>, f64)> = (0..npts)
            .into_par_iter()
            .map(|p| {
                let m = DMatrix::from_fn(n, n, |a, b| g.get(p, &[a, b]));
                let eig = SymmetricEigen::new(m.clone());
                let min = eig.eigenvalues.min();
                let max = eig.eigenvalues.max();
                if !(min > 0.0 && min >= SPD_CONDITION_FLOOR * max) || !max.is_finite() {
                    return Err(Error::NotPositiveDefinite { point: p, min_eig: min, max_eig: max });
                }
                let chol = m.cholesky().ok_or(Error::NotPositiveDefinite {
                    point: p,
                    min_eig: min,
                    max_eig: max,
                })?;
                let det: f64 = chol.l().diagonal().iter().product::<f64>().powi(2);
                let inv = chol.inverse();
                let comps = (0..n * n).map(|c| inv[(c / n, c % n)]).collect();
                Ok((comps, det.sqrt()))
            })
            .collect::<Result<_>>()?;

        let mut inv_data = vec![0.0; n * n * npts];
        let mut density = vec![0.0; npts];
        for (p, (comps, rho)) in local.into_iter().enumerate() {
            for (c, v) in comps.into_iter().enumerate() {
                inv_data[c * npts + p] = v;
            }
            density[p] = rho;
        }
        let inv = TensorField::from_components(
            &grid,
            valence::contravariant2(),
            Symmetry::TotallySymmetric,
            inv_data,
        )?;
        Ok(Metric { g, inv, density, levi_civita: OnceLock::new(), scalar_curvature: OnceLock::new() })
    }

    /// The Euclidean metric `delta` of the chart.
    pub fn flat(grid: &TorusGrid) -> Self {
        let n = grid.dim();
        let mut g = TensorField::zeros(grid, valence::covariant2(), Symmetry::TotallySymmetric);
        for a in 0..n {
            g.component_mut(a * n + a).fill(1.0);
        }
        Metric::new(g).expect("flat metric is positive definite")
    }

    pub fn g(&self) -> &TensorField {
        &self.g
    }

    /// `g^sharp`, the dual metric `g^{ij}`.
    pub fn inverse(&self) -> &TensorField {
        &self.inv
    }

    /// `sqrt(det g)` in the chart.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn grid(&self) -> &TorusGrid {
        self.g.grid()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn levi_civita(&self) -> &Connection {
        self.levi_civita.get_or_init(|| christoffel(&self.g, &self.inv).expect("metric fields share a grid"))
    }

    /// `int_M s dmu_g`.
    pub fn integrate(&self, s: &[f64]) -> f64 {
        self.grid().integrate_unchecked(s, &self.density)
    }

    pub fn volume(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid().cell_volume()
    }

    /// `dmu_g`-weighted mean of a scalar.
    pub fn mean(&self, s: &[f64]) -> f64 {
        self.integrate(s) / self.volume()
    }

    /// `S_g = g^{jk} R_{jk}` of the Levi-Civita connection.
    pub fn scalar_curvature(&self) -> &TensorField {
        self.scalar_curvature.get_or_init(|| {
            let ric = ricci(self.levi_civita()).expect("Levi-Civita connection is well formed");
            metric_trace2(&ric, self)
        })
    }

    /// `c * g` for a constant `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Metric> {
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!("homothety factor must be positive, got {c}")));
        }
        Metric::new(self.g.scale(c))
    }

    /// `exp(2 f) g`.
    pub fn conformal_change(&self, f: &TensorField) -> Result<Metric> {
        f.ensure_valence(&valence::scalar())?;
        f.ensure_same_grid(&self.g)?;
        let w: Vec<f64> = f.values().iter().map(|x| (2.0 * x).exp()).collect();
        Metric::new(self.g.mul_scalar_field(&w))
    }

    /// `g + t h`; fails if the result is not positive definite.
    pub fn perturbed(&self, h: &TensorField, t: f64) -> Result<Metric> {
        h.ensure_valence(&valence::covariant2())?;
        Metric::new(self.g.axpy(t, h)?)
    }
}

/// `G^k_{ij} = 1/2 g^{kl} (d_i g_{jl} + d_j g_{il} - d_l g_{ij})`.
fn christoffel(g: &TensorField, inv: &TensorField) -> Result<Connection> {
    let grid = g.grid();
    let n = grid.dim();
    let dg = grid.partial_gradient(g)?;
    let coeffs = pointwise(grid, &[&dg, inv], valence::e_section(), Symmetry::SymmetricLowerPair, |x, out| {
        let (dg, gi) = (x[0], x[1]);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        let lower = dg[local::i3(n, i, j, l)] + dg[local::i3(n, j, i, l)]
                            - dg[local::i3(n, l, i, j)];
                        s += gi[local::i2(n, k, l)] * lower;
                    }
                    out[local::i3(n, k, i, j)] = 0.5 * s;
                }
            }
        }
    });
    Connection::new(coeffs)
}

/// Levi-Civita connection of `metric` (cached on the metric).
pub fn levi_civita(metric: &Metric) -> Connection {
    metric.levi_civita().clone()
}

/// Covariant derivative `(D T)_{k, I} = d_k T_I + connection terms`; the
/// derivative index is the first slot of the result.
pub fn covariant_derivative(conn: &Connection, field: &TensorField) -> Result<TensorField> {
    let r = field.rank();
    if r + 1 > MAX_RANK {
        return Err(Error::ValenceOverflow(r + 1));
    }
    field.ensure_same_grid(conn.coeffs())?;
    let grid = field.grid();
    let n = grid.dim();
    let dt = grid.partial_gradient(field)?;
    let ncomp = field.n_components();
    let up: Vec<bool> = field.valence().iter().map(|v| *v == Variance::Up).collect();
    let strides: Vec<usize> = (0..r).map(|s| n.pow((r - 1 - s) as u32)).collect();
    let out_valence = dt.valence().to_vec();
    Ok(pointwise(grid, &[&dt, conn.coeffs(), field], out_valence, Symmetry::None, |x, out| {
        let (dt, gam, t) = (x[0], x[1], x[2]);
        for k in 0..n {
            for c in 0..ncomp {
                let mut v = dt[k * ncomp + c];
                for s in 0..r {
                    let st = strides[s];
                    let is = (c / st) % n;
                    let base = c - is * st;
                    if up[s] {
                        for u in 0..n {
                            v += gam[local::i3(n, is, k, u)] * t[base + u * st];
                        }
                    } else {
                        for u in 0..n {
                            v -= gam[local::i3(n, u, k, is)] * t[base + u * st];
                        }
                    }
                }
                out[k * ncomp + c] = v;
            }
        }
    }))
}

/// `R^i_{jkl}` of a torsion-free connection.
pub fn curvature(conn: &Connection) -> Result<TensorField> {
    let grid = conn.grid();
    let n = grid.dim();
    let dgam = grid.partial_gradient(conn.coeffs())?;
    Ok(pointwise(grid, &[&dgam, conn.coeffs()], valence::curvature(), Symmetry::None, |x, out| {
        let (dg, g) = (x[0], x[1]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut v = dg[local::i4(n, k, i, l, j)] - dg[local::i4(n, l, i, k, j)];
                        for u in 0..n {
                            v += g[local::i3(n, i, k, u)] * g[local::i3(n, u, l, j)]
                                - g[local::i3(n, i, l, u)] * g[local::i3(n, u, k, j)];
                        }
                        out[local::i4(n, i, j, k, l)] = v;
                    }
                }
            }
        }
    }))
}

/// Ricci contraction `R_{jk} = R^l_{jlk}` of a curvature tensor.
pub fn ricci_of(riemann: &TensorField) -> Result<TensorField> {
    riemann.ensure_valence(&valence::curvature())?;
    let n = riemann.dim();
    Ok(pointwise(riemann.grid(), &[riemann], valence::covariant2(), Symmetry::None, |x, out| {
        for j in 0..n {
            for k in 0..n {
                out[local::i2(n, j, k)] = (0..n).map(|l| x[0][local::i4(n, l, j, l, k)]).sum();
            }
        }
    }))
}

/// Ricci curvature of a torsion-free connection. Not symmetric in general.
pub fn ricci(conn: &Connection) -> Result<TensorField> {
    ricci_of(&curvature(conn)?)
}

/// `g^{jk} T_{jk}`.
pub(crate) fn metric_trace2(t: &TensorField, metric: &Metric) -> TensorField {
    debug_assert_eq!(t.rank(), 2);
    pointwise(t.grid(), &[t, metric.inverse()], valence::scalar(), Symmetry::None, |x, out| {
        out[0] = x[0].iter().zip(x[1]).map(|(a, b)| a * b).sum();
    })
}

/// Trace with respect to `g` of a `(0,2)` field.
pub fn trace_g(t: &TensorField, metric: &Metric) -> Result<TensorField> {
    t.ensure_valence(&valence::covariant2())?;
    t.ensure_same_grid(metric.g())?;
    Ok(metric_trace2(t, metric))
}

/// Curvature of `conn + phi` assembled from the curvature of `conn`, the
/// covariant derivative of `phi` and the quadratic terms.
pub fn perturbed_curvature(conn: &Connection, phi: &TensorField) -> Result<TensorField> {
    phi.ensure_valence(&valence::e_section())?;
    let phi = phi.clone().with_symmetry(Symmetry::SymmetricLowerPair);
    let r = curvature(conn)?;
    let dphi = covariant_derivative(conn, &phi)?;
    let n = phi.dim();
    Ok(pointwise(phi.grid(), &[&r, &dphi, &phi], valence::curvature(), Symmetry::None, |x, out| {
        let (r, d, p) = (x[0], x[1], x[2]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut v = r[local::i4(n, i, j, k, l)] + d[local::i4(n, k, i, l, j)]
                            - d[local::i4(n, l, i, k, j)];
                        for u in 0..n {
                            v += p[local::i3(n, u, l, j)] * p[local::i3(n, i, k, u)]
                                - p[local::i3(n, u, k, j)] * p[local::i3(n, i, l, u)];
                        }
                        out[local::i4(n, i, j, k, l)] = v;
                    }
                }
            }
        }
    }))
}

/// Differential `df` of a scalar field.
pub fn differential(f: &TensorField) -> Result<TensorField> {
    f.ensure_valence(&valence::scalar())?;
    f.grid().partial_gradient(f)
}

/// `grad_g f = g^{ij} d_j f`.
pub fn grad(metric: &Metric, f: &TensorField) -> Result<TensorField> {
    f.ensure_same_grid(metric.g())?;
    algebra::sharp(metric, &differential(f)?)
}

/// `div_g Y = (1 / sqrt det g) d_i (sqrt det g Y^i)`.
pub fn div(metric: &Metric, y: &TensorField) -> Result<TensorField> {
    y.ensure_valence(&valence::vector())?;
    y.ensure_same_grid(metric.g())?;
    let grid = metric.grid();
    let rho = metric.density();
    let mut acc = vec![0.0; grid.len()];
    for a in 0..grid.dim() {
        let flux: Vec<f64> = y.component(a).iter().zip(rho).map(|(v, r)| v * r).collect();
        let d = grid.diff(&flux, a)?;
        acc.iter_mut().zip(d).for_each(|(s, v)| *s += v);
    }
    acc.iter_mut().zip(rho).for_each(|(s, r)| *s /= r);
    Ok(TensorField::scalar(grid, acc))
}

/// `Delta_g f = -div_g grad_g f` (non-negative spectrum).
pub fn laplacian(metric: &Metric, f: &TensorField) -> Result<TensorField> {
    Ok(div(metric, &grad(metric, f)?)?.scale(-1.0))
}

/// The change of Levi-Civita connection under `g -> exp(2f) g`:
/// `-g (x) grad_g f + Sym(df)`.
pub fn conformal_lc_shift(metric: &Metric, f: &TensorField) -> Result<TensorField> {
    let df = differential(f)?;
    let gf = algebra::sharp(metric, &df)?;
    algebra::sym(&df)?.sub(&algebra::g_tensor(metric, &gf)?)
}

/// `exp(2f) g`.
pub fn conformal_change(metric: &Metric, f: &TensorField) -> Result<Metric> {
    metric.conformal_change(f)
}
