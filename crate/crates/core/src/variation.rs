//! First variation of the energy under metric changes.
//!
//! For `E(g) = Vol^((2-n)/n) ||Phi_g||^2`, the derivative along a symmetric
//! `h` is `Vol^((2-n)/n) int <T_g(Phi) - 2 l*_g(Phi) - k g, h>_g dmu_g` with
//! `k = (n-2)/(2n) ||Phi||^2 / Vol`.

use rayon::prelude::*;

use crate::algebra::{self, local};
use crate::error::{Error, Result};
use crate::field::{pointwise, valence, Symmetry, TensorField};
use crate::projective::{self, ProjectiveState, ProjectiveStructure};
use crate::riemannian::{self, Metric};

/// `T_g(Psi) = 1/2 |Psi|^2 g + Psi (*) Psi`.
pub fn stress_energy(psi: &TensorField, metric: &Metric) -> Result<TensorField> {
    psi.ensure_valence(&valence::e_section())?;
    psi.ensure_same_grid(metric.g())?;
    let n = metric.dim();
    Ok(pointwise(
        metric.grid(),
        &[psi, metric.g(), metric.inverse()],
        valence::covariant2(),
        Symmetry::TotallySymmetric,
        |x, out| {
            let (p, g, gi) = (x[0], x[1], x[2]);
            // l[a,j,k] = g_{ai} Psi^i_{jk}
            let mut l = vec![0.0; n * n * n];
            local::transform_slot(p, n, 3, 0, g, &mut l);
            // r[a,b,c] = l[a,u,v] g^{ub} g^{vc}
            let mut tmp = vec![0.0; n * n * n];
            let mut r = vec![0.0; n * n * n];
            local::transform_slot(&l, n, 3, 1, gi, &mut tmp);
            local::transform_slot(&tmp, n, 3, 2, gi, &mut r);
            let norm: f64 = p.iter().zip(&r).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    let mut first = 0.0;
                    let mut second = 0.0;
                    for b in 0..n {
                        for c in 0..n {
                            first += l[local::i3(n, i, b, c)] * r[local::i3(n, j, b, c)];
                            for a in 0..n {
                                second += l[local::i3(n, a, j, c)]
                                    * p[local::i3(n, a, i, b)]
                                    * gi[local::i2(n, b, c)];
                            }
                        }
                    }
                    out[local::i2(n, i, j)] = 0.5 * norm * g[local::i2(n, i, j)] + first - 2.0 * second;
                }
            }
        },
    ))
}

/// `l_g(h) = (H)_0` with `H^k_{ij} = 1/2 g^{kl}(D_i h_{jl} + D_j h_{il} - D_l h_{ij})`.
pub fn ell(h: &TensorField, metric: &Metric) -> Result<TensorField> {
    h.ensure_valence(&valence::covariant2())?;
    let dh = riemannian::covariant_derivative(metric.levi_civita(), h)?;
    let n = metric.dim();
    let big_h = pointwise(
        metric.grid(),
        &[&dh, metric.inverse()],
        valence::e_section(),
        Symmetry::SymmetricLowerPair,
        |x, out| {
            let (d, gi) = (x[0], x[1]);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            s += gi[local::i2(n, k, l)]
                                * (d[local::i3(n, i, j, l)] + d[local::i3(n, j, i, l)] - d[local::i3(n, l, i, j)]);
                        }
                        out[local::i3(n, k, i, j)] = 0.5 * s;
                    }
                }
            }
        },
    );
    algebra::trace_free_part(&big_h)
}

/// Formal adjoint of `l_g`:
/// `1/2 (D_k Psi^k_{ij} - g^{uv} g_{ik} D_u Psi^k_{jv} - g^{uv} g_{jk} D_u Psi^k_{iv})`.
pub fn ell_star(psi: &TensorField, metric: &Metric) -> Result<TensorField> {
    psi.ensure_valence(&valence::e_section())?;
    let dpsi = riemannian::covariant_derivative(metric.levi_civita(), psi)?;
    let n = metric.dim();
    Ok(pointwise(
        metric.grid(),
        &[&dpsi, metric.g(), metric.inverse()],
        valence::covariant2(),
        Symmetry::TotallySymmetric,
        |x, out| {
            let (d, g, gi) = (x[0], x[1], x[2]);
            // w[k,j] = g^{uv} D_u Psi^k_{jv}
            let mut w = vec![0.0; n * n];
            for k in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for u in 0..n {
                        for v in 0..n {
                            s += gi[local::i2(n, u, v)] * d[local::i4(n, u, k, j, v)];
                        }
                    }
                    w[local::i2(n, k, j)] = s;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += d[local::i4(n, k, k, i, j)]
                            - g[local::i2(n, i, k)] * w[local::i2(n, k, j)]
                            - g[local::i2(n, j, k)] * w[local::i2(n, k, i)];
                    }
                    out[local::i2(n, i, j)] = 0.5 * s;
                }
            }
        },
    ))
}

/// `T_g(Phi_g) - 2 l*_g(Phi_g) - k g` with its norms.
#[derive(Clone, Debug)]
pub struct ElResidual {
    pub tensor: TensorField,
    pub k: f64,
    /// `max_p |R|_g`.
    pub max_norm: f64,
    /// `(int |R|^2_g dmu)^(1/2)`.
    pub l2_norm: f64,
}

/// `k = (n-2)/(2n) ||Phi||^2 / Vol`; exactly zero when `n = 2`.
pub fn k_constant(state: &ProjectiveState, n: usize) -> f64 {
    let nf = n as f64;
    (nf - 2.0) / (2.0 * nf) * state.energy_raw / state.volume
}

pub fn el_residual(structure: &ProjectiveStructure, metric: &Metric) -> Result<ElResidual> {
    let state = ProjectiveState::new(structure, metric)?;
    el_residual_from_state(&state, metric)
}

pub fn el_residual_from_state(state: &ProjectiveState, metric: &Metric) -> Result<ElResidual> {
    let k = k_constant(state, metric.dim());
    let t = stress_energy(&state.phi, metric)?;
    let l = ell_star(&state.phi, metric)?;
    let tensor = t.axpy(-2.0, &l)?.axpy(-k, metric.g())?;
    let sq = algebra::norm_sq(&tensor, metric)?;
    let max_norm = sq.values().iter().fold(0.0f64, |m, v| m.max(v.max(0.0).sqrt()));
    let l2_norm = metric.integrate(sq.values()).max(0.0).sqrt();
    Ok(ElResidual { tensor, k, max_norm, l2_norm })
}

/// Closed-form `E'_g(h)`.
pub fn first_variation(structure: &ProjectiveStructure, metric: &Metric, h: &TensorField) -> Result<f64> {
    let r = el_residual(structure, metric)?;
    first_variation_from_residual(&r, metric, h)
}

pub fn first_variation_from_residual(r: &ElResidual, metric: &Metric, h: &TensorField) -> Result<f64> {
    h.ensure_valence(&valence::covariant2())?;
    let n = metric.dim() as f64;
    let pairing = algebra::l2_pairing(&r.tensor, h, metric)?;
    Ok(metric.volume().powf((2.0 - n) / n) * pairing)
}

/// `G = (n/2 - 1)|Phi|^2 - div_g tr_g Phi - k n`, the trace of the
/// Euler-Lagrange tensor; `E'_g(f g) = Vol^((2-n)/n) int f G dmu`.
pub fn conformal_gradient(state: &ProjectiveState, metric: &Metric) -> TensorField {
    let n = metric.dim();
    let nf = n as f64;
    let kn = k_constant(state, n) * nf;
    let vals = state
        .phi_norm_sq
        .values()
        .iter()
        .zip(state.div_trace.values())
        .map(|(p, d)| (nf / 2.0 - 1.0) * p - d - kn)
        .collect();
    TensorField::scalar(metric.grid(), vals)
}

/// `E'_g(f g)` through the conformal gradient.
pub fn conformal_first_variation(structure: &ProjectiveStructure, metric: &Metric, f: &TensorField) -> Result<f64> {
    f.ensure_valence(&valence::scalar())?;
    let state = ProjectiveState::new(structure, metric)?;
    let g = conformal_gradient(&state, metric);
    let n = metric.dim() as f64;
    let fg: Vec<f64> = f.values().iter().zip(g.values()).map(|(a, b)| a * b).collect();
    Ok(metric.volume().powf((2.0 - n) / n) * metric.integrate(&fg))
}

/// Step sizes used when none are given.
pub const DEFAULT_STEPS: [f64; 3] = [4e-3, 2e-3, 1e-3];

/// Central differences `(E(g + t h) - E(g - t h)) / 2t` for each step,
/// extrapolated to `t = 0` as a polynomial in `t^2`.
pub fn directional_derivative_oracle(
    structure: &ProjectiveStructure,
    metric: &Metric,
    h: &TensorField,
    steps: &[f64],
) -> Result<f64> {
    if steps.is_empty() || steps.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("step sizes must be positive and non-empty".into()));
    }
    h.ensure_valence(&valence::covariant2())?;
    let diffs: Vec<f64> = steps
        .par_iter()
        .map(|&t| {
            let plus = projective::energy(structure, &metric.perturbed(h, t)?)?;
            let minus = projective::energy(structure, &metric.perturbed(h, -t)?)?;
            Ok((plus - minus) / (2.0 * t))
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = steps.iter().map(|t| t * t).collect();
    Ok(neville_at_zero(&xs, &diffs))
}

/// Value at 0 of the interpolating polynomial through `(xs, ys)`.
fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let m = xs.len();
    for level in 1..m {
        for i in 0..m - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::samples;

    #[test]
    fn neville_recovers_polynomial_constant() {
        let xs = [4.0, 1.0, 0.25];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 2.0 * x - 0.5 * x * x).collect();
        assert!((neville_at_zero(&xs, &ys) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn stress_energy_trace() {
        let grid = TorusGrid::new(3, 8).unwrap();
        let g = samples::random_metric(&grid, 4, 0.2);
        let psi = samples::random_e0_section(&grid, 5, 1.0);
        let t = stress_energy(&psi, &g).unwrap();
        let tr = riemannian::trace_g(&t, &g).unwrap();
        let nsq = algebra::norm_sq(&psi, &g).unwrap();
        assert!(tr.max_abs_diff(&nsq.scale(0.5)).unwrap() < 1e-11);
        assert!(t.symmetry_defect() < 1e-13);
    }

    #[test]
    fn ell_kills_multiples_of_g() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let g = samples::random_metric(&grid, 4, 0.2);
        assert!(ell(&g.g().scale(3.0), &g).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn ell_star_flat_constant_vanishes() {
        let grid = TorusGrid::new(3, 8).unwrap();
        let g = Metric::flat(&grid);
        let mut psi = TensorField::zeros(&grid, valence::e_section(), Symmetry::SymmetricLowerPair);
        psi.component_mut(5).iter_mut().for_each(|v| *v = 0.7);
        let psi = algebra::trace_free_part(&psi.with_symmetry(Symmetry::SymmetricLowerPair)).unwrap();
        assert_eq!(ell_star(&psi, &g).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn metrisable_residual_is_zero() {
        let grid = TorusGrid::new(3, 8).unwrap();
        let g = samples::random_metric(&grid, 4, 0.2);
        let s = ProjectiveStructure::new(g.levi_civita().clone());
        let r = el_residual(&s, &g).unwrap();
        assert_eq!(r.k, 0.0);
        assert_eq!(r.max_norm, 0.0);
    }

    #[test]
    fn oracle_rejects_bad_steps() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let g = Metric::flat(&grid);
        let s = samples::flat_structure(&grid);
        let h = g.g().clone();
        assert!(directional_derivative_oracle(&s, &g, &h, &[]).is_err());
        assert!(directional_derivative_oracle(&s, &g, &h, &[0.0]).is_err());
    }
}
