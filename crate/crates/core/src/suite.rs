//! The property suite run by `projlab verify`.
//!
//! Every check evaluates one identity on seeded random instances and records
//! the largest observed error against a fixed tolerance. Checks are
//! independent and run in parallel; the report keeps their declaration order.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{self, m_factor, m_hat};
use crate::cubic::{self, CubicDifferential};
use crate::error::{Error, Result};
use crate::field::{pointwise, valence, Symmetry, TensorField, Variance};
use crate::grid::TorusGrid;
use crate::projective::{self, ProjectiveState, ProjectiveStructure};
use crate::report::{Environment, Report};
use crate::riemannian::{self, Metric};
use crate::samples::{self, subseed};
use crate::solvers;
use crate::variation;

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    /// Replacement tolerances keyed by check id.
    pub overrides: BTreeMap<String, f64>,
}

impl SuiteConfig {
    pub fn new(dim: usize, n: usize, seed: u64) -> Self {
        SuiteConfig { dim, n, seed, overrides: BTreeMap::new() }
    }
}

type CheckFn<'a> = Box<dyn Fn() -> Result<f64> + Send + Sync + 'a>;

struct Check<'a> {
    id: &'static str,
    anchor: &'static str,
    tol: f64,
    run: CheckFn<'a>,
}

fn check<'a>(
    id: &'static str,
    anchor: &'static str,
    tol: f64,
    run: impl Fn() -> Result<f64> + Send + Sync + 'a,
) -> Check<'a> {
    Check { id, anchor, tol, run: Box::new(run) }
}

/// Random instances shared by the checks.
struct Instances {
    grid: TorusGrid,
    g: Metric,
    structure: ProjectiveStructure,
    f: TensorField,
    beta: TensorField,
    h: TensorField,
    psi: TensorField,
    alpha: TensorField,
    y: TensorField,
    u: TensorField,
    e_section: TensorField,
}

impl Instances {
    fn new(cfg: &SuiteConfig) -> Result<Self> {
        let grid = TorusGrid::new(cfg.dim, cfg.n)?;
        let s = |k| subseed(cfg.seed, k);
        let amp = (0.8 / cfg.dim as f64).min(0.2);
        Ok(Instances {
            g: samples::random_metric(&grid, s(0), amp),
            structure: samples::random_structure(&grid, s(1), 0.3),
            f: samples::random_scalar(&grid, s(2), 1, 0.3),
            beta: samples::random_one_form(&grid, s(3), 0.3),
            h: samples::random_symmetric2(&grid, s(4), 0.3),
            psi: samples::random_e0_section(&grid, s(5), 1.0),
            alpha: samples::random_one_form(&grid, s(6), 1.0),
            y: samples::random_vector(&grid, s(7), 1.0),
            u: samples::random_scalar(&grid, s(8), 2, 1.0),
            e_section: samples::random_e_section(&grid, s(9), 0.3),
            grid,
        })
    }

    fn g_tilde(&self) -> Result<Metric> {
        self.g.conformal_change(&self.f)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn exp_field(f: &TensorField, c: f64) -> Vec<f64> {
    f.values().iter().map(|v| (c * v).exp()).collect()
}

/// `Y(f) = Y^i d_i f`.
fn derivative_along(y: &TensorField, f: &TensorField) -> Result<TensorField> {
    let df = riemannian::differential(f)?;
    Ok(pointwise(f.grid(), &[y, &df], valence::scalar(), Symmetry::None, |x, out| {
        out[0] = x[0].iter().zip(x[1]).map(|(a, b)| a * b).sum();
    }))
}

fn combine(grid: &TorusGrid, parts: &[(f64, &[f64])]) -> TensorField {
    let vals = (0..grid.len()).map(|p| parts.iter().map(|(c, v)| c * v[p]).sum()).collect();
    TensorField::scalar(grid, vals)
}

/// `max_p |R^i_{j(kl)}|` style antisymmetry defect of the last two slots.
fn last_pair_symmetric_part(r: &TensorField) -> f64 {
    let n = r.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let a = r.component(r.component_index(&[i, j, k, l]));
                    let b = r.component(r.component_index(&[i, j, l, k]));
                    worst = a.iter().zip(b).fold(worst, |m, (x, y)| m.max((x + y).abs()));
                }
            }
        }
    }
    worst
}

fn common_checks<'a>(x: &'a Instances) -> Vec<Check<'a>> {
    let n = x.grid.dim();
    let nf = n as f64;
    let m = m_factor(n);
    vec![
        check("grid.derivative_of_constant", "spectral derivative of a constant", 1e-12, move || {
            let c = TensorField::constant(&x.grid, 2.5);
            let mut worst = 0.0f64;
            for a in 0..n {
                worst = worst.max(x.grid.partial_derivative(&c, a)?.max_abs());
            }
            Ok(worst)
        }),
        check("grid.flat_volume", "quadrature of 1 over the flat torus", 1e-12, move || {
            let one = vec![1.0; x.grid.len()];
            Ok(rel(x.grid.integrate(&one, &one)?, (2.0 * std::f64::consts::PI).powi(n as i32)))
        }),
        check("grid.periodicity", "integral of a partial derivative vanishes", 1e-11, move || {
            let mut worst = 0.0f64;
            for a in 0..n {
                worst = worst.max(x.grid.integrate_flat(&x.grid.diff(x.u.values(), a)?).abs());
            }
            Ok(worst)
        }),
        check("grid.commuting_partials", "partial derivatives commute", 1e-10, move || {
            let d01 = x.grid.diff(&x.grid.diff(x.u.values(), 0)?, 1)?;
            let d10 = x.grid.diff(&x.grid.diff(x.u.values(), 1)?, 0)?;
            Ok(d01.iter().zip(&d10).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
        }),
        check("algebra.con_sym", "con(Sym(a)) = (n+1) a", 1e-12, move || {
            algebra::con(&algebra::sym(&x.alpha)?)?.max_abs_diff(&x.alpha.scale(nf + 1.0))
        }),
        check("algebra.sym_trace_free", "(Sym(a))_0 = 0", 1e-12, move || {
            Ok(algebra::trace_free_part(&algebra::sym(&x.alpha)?)?.max_abs())
        }),
        check("algebra.trace_free_idempotent", "trace-free projection is idempotent", 1e-12, move || {
            let once = algebra::trace_free_part(&x.e_section)?;
            algebra::trace_free_part(&once)?.max_abs_diff(&once)
        }),
        check("algebra.trace_iota", "tr_g o iota_g = m Id", 1e-11, move || {
            algebra::metric_trace(&algebra::iota(&x.g, &x.y)?, &x.g)?.max_abs_diff(&x.y.scale(m))
        }),
        check("algebra.norm_split", "|Phi|^2 = |A|^2 + m |X|^2", 1e-11, move || {
            let (xx, a) = algebra::decompose_xa(&x.psi, &x.g)?;
            let lhs = algebra::norm_sq(&x.psi, &x.g)?;
            let rhs = algebra::norm_sq(&a, &x.g)?.axpy(m, &algebra::norm_sq(&xx, &x.g)?)?;
            lhs.max_abs_diff(&rhs)
        }),
        check("algebra.reconstruction", "Phi = (g (x) X)_0 + A", 1e-11, move || {
            let (xx, a) = algebra::decompose_xa(&x.psi, &x.g)?;
            algebra::iota(&x.g, &xx)?.add(&a)?.max_abs_diff(&x.psi)
        }),
        check("algebra.a_trace_free", "tr_g A = 0", 1e-11, move || {
            let (_, a) = algebra::decompose_xa(&x.psi, &x.g)?;
            Ok(algebra::metric_trace(&a, &x.g)?.max_abs())
        }),
        check("algebra.sym_orthogonal", "<Psi, Sym(a)>_g = 0 on E_0", 1e-11, move || {
            Ok(algebra::pairing(&x.psi, &algebra::sym(&x.alpha)?, &x.g)?.max_abs())
        }),
        check("algebra.g_tensor_norm", "|g (x) Y|^2 = n |Y|^2", 1e-11, move || {
            let lhs = algebra::norm_sq(&algebra::g_tensor(&x.g, &x.y)?, &x.g)?;
            lhs.max_abs_diff(&algebra::norm_sq(&x.y, &x.g)?.scale(nf))
        }),
        check("algebra.pairing_conformal_weight", "|Phi|^2 under exp(2f) g", 1e-11, move || {
            let gt = x.g_tilde()?;
            let lhs = algebra::norm_sq(&x.psi, &gt)?;
            lhs.max_abs_diff(&algebra::norm_sq(&x.psi, &x.g)?.mul_scalar_field(&exp_field(&x.f, -2.0)))
        }),
        check("riemannian.metric_compatibility", "Levi-Civita connection preserves g", 1e-10, move || {
            Ok(riemannian::covariant_derivative(x.g.levi_civita(), x.g.g())?.max_abs())
        }),
        check("riemannian.stokes", "integral of a divergence vanishes", 1e-10, move || {
            Ok(x.g.integrate(riemannian::div(&x.g, &x.y)?.values()).abs())
        }),
        check("riemannian.div_conformal", "div under exp(2f) g", 1e-9, move || {
            let gt = x.g_tilde()?;
            let rhs = riemannian::div(&x.g, &x.y)?.axpy(nf, &derivative_along(&x.y, &x.f)?)?;
            riemannian::div(&gt, &x.y)?.max_abs_diff(&rhs)
        }),
        check("riemannian.volume_density_weight", "dmu scales by exp(nf)", 1e-12, move || {
            let gt = x.g_tilde()?;
            let e = exp_field(&x.f, nf);
            Ok((0..x.grid.len()).map(|p| rel(gt.density()[p], e[p] * x.g.density()[p])).fold(0.0, f64::max))
        }),
        check("riemannian.conformal_lc_shift", "Levi-Civita change under exp(2f) g", 1e-9, move || {
            let gt = x.g_tilde()?;
            let diff = gt.levi_civita().difference(x.g.levi_civita())?;
            diff.max_abs_diff(&riemannian::conformal_lc_shift(&x.g, &x.f)?)
        }),
        check("riemannian.scalar_curvature_law", "scalar curvature under exp(2f) g", 1e-8, move || {
            let gt = x.g_tilde()?;
            let lap = riemannian::laplacian(&x.g, &x.f)?;
            let df2 = algebra::norm_sq(&riemannian::differential(&x.f)?, &x.g)?;
            let inner = combine(
                &x.grid,
                &[(1.0, x.g.scalar_curvature().values()), (2.0 * (nf - 1.0), lap.values()), (-(nf - 1.0) * (nf - 2.0), df2.values())],
            );
            gt.scalar_curvature().max_abs_diff(&inner.mul_scalar_field(&exp_field(&x.f, -2.0)))
        }),
        check("riemannian.perturbed_curvature", "curvature of a perturbed connection", 1e-9, move || {
            let lc = x.g.levi_civita();
            let direct = riemannian::curvature(&lc.perturbed(&x.e_section)?)?;
            riemannian::perturbed_curvature(lc, &x.e_section)?.max_abs_diff(&direct)
        }),
        check("riemannian.curvature_antisymmetry", "R^i_{jkl} = -R^i_{jlk}", 1e-10, move || {
            Ok(last_pair_symmetric_part(&riemannian::curvature(x.structure.representative())?))
        }),
        check("riemannian.riemann_pair_antisymmetry", "lowered Riemann tensor is antisymmetric in the first pair", 1e-9, move || {
            let r = riemannian::curvature(x.g.levi_civita())?;
            let low = pointwise(&x.grid, &[&r, x.g.g()], vec![Variance::Down; 4], Symmetry::None, |v, out| {
                algebra::local::transform_slot(v[0], n, 4, 0, v[1], out)
            });
            let mut worst = 0.0f64;
            for c in 0..low.n_components() {
                let (i, j, rest) = (c / (n * n * n), (c / (n * n)) % n, c % (n * n));
                let c2 = (j * n + i) * n * n + rest;
                worst = low.component(c).iter().zip(low.component(c2)).fold(worst, |m, (a, b)| m.max((a + b).abs()));
            }
            Ok(worst)
        }),
        check("riemannian.ricci_symmetric", "Ricci tensor of a metric is symmetric", 1e-10, move || {
            Ok(ricci_asymmetry(&riemannian::ricci(x.g.levi_civita())?))
        }),
        check("projective.representative_invariance", "Phi_g unchanged by D -> D + Sym(beta)", 1e-10, move || {
            let shifted = x.structure.shifted(&x.beta)?;
            projective::phi(&shifted, &x.g)?.max_abs_diff(&projective::phi(&x.structure, &x.g)?)
        }),
        check("projective.scalar_representative_invariance", "S_proj unchanged by D -> D + Sym(beta)", 1e-10, move || {
            let shifted = x.structure.shifted(&x.beta)?;
            projective::projective_scalar(&shifted, &x.g)?.max_abs_diff(&projective::projective_scalar(&x.structure, &x.g)?)
        }),
        check("projective.energy_homothety", "E(c g) = E(g)", 1e-12, move || {
            let e = projective::energy(&x.structure, &x.g)?;
            Ok(rel(projective::energy(&x.structure, &x.g.scaled(2.7)?)?, e))
        }),
        check("projective.a_conformal_invariance", "A depends only on the conformal class", 1e-10, move || {
            let (_, a) = projective::xa(&x.structure, &x.g)?;
            let (_, at) = projective::xa(&x.structure, &x.g_tilde()?)?;
            at.max_abs_diff(&a)
        }),
        check("projective.x_conformal_law", "X under exp(2f) g", 1e-8, move || {
            let (xx, _) = projective::xa(&x.structure, &x.g)?;
            let (xt, _) = projective::xa(&x.structure, &x.g_tilde()?)?;
            let rhs = xx.add(&riemannian::grad(&x.g, &x.f)?)?.mul_scalar_field(&exp_field(&x.f, -2.0));
            xt.max_abs_diff(&rhs)
        }),
        check("projective.div_x_conformal_law", "div X under exp(2f) g", 1e-9, move || {
            let gt = x.g_tilde()?;
            let (xx, _) = projective::xa(&x.structure, &x.g)?;
            let (xt, _) = projective::xa(&x.structure, &gt)?;
            let lhs = riemannian::div(&gt, &xt)?;
            let df2 = algebra::norm_sq(&riemannian::differential(&x.f)?, &x.g)?;
            let rhs = combine(
                &x.grid,
                &[
                    (1.0, riemannian::div(&x.g, &xx)?.values()),
                    (nf - 2.0, derivative_along(&xx, &x.f)?.values()),
                    (-1.0, riemannian::laplacian(&x.g, &x.f)?.values()),
                    (nf - 2.0, df2.values()),
                ],
            );
            lhs.max_abs_diff(&rhs.mul_scalar_field(&exp_field(&x.f, -2.0)))
        }),
        check("projective.phi_norm_conformal_law", "|Phi|^2 under exp(2f) g", 1e-9, move || {
            let st = ProjectiveState::new(&x.structure, &x.g)?;
            let stt = ProjectiveState::new(&x.structure, &x.g_tilde()?)?;
            let df2 = algebra::norm_sq(&riemannian::differential(&x.f)?, &x.g)?;
            let rhs = combine(
                &x.grid,
                &[(1.0, st.phi_norm_sq.values()), (2.0 * m, derivative_along(&st.x, &x.f)?.values()), (m, df2.values())],
            );
            stt.phi_norm_sq.max_abs_diff(&rhs.mul_scalar_field(&exp_field(&x.f, -2.0)))
        }),
        check("projective.scalar_conformal_law", "S_proj transforms like scalar curvature", 1e-8, move || {
            let s = projective::projective_scalar(&x.structure, &x.g)?;
            let st = projective::projective_scalar(&x.structure, &x.g_tilde()?)?;
            let lap = riemannian::laplacian(&x.g, &x.f)?;
            let df2 = algebra::norm_sq(&riemannian::differential(&x.f)?, &x.g)?;
            let inner = combine(
                &x.grid,
                &[(1.0, s.values()), (2.0 * (nf - 1.0), lap.values()), (-(nf - 1.0) * (nf - 2.0), df2.values())],
            );
            st.max_abs_diff(&inner.mul_scalar_field(&exp_field(&x.f, -2.0)))
        }),
        check("projective.defect_conformal_law", "V has conformal weight -2", 1e-9, move || {
            let v = projective::conformal_defect(&x.structure, &x.g)?;
            let vt = projective::conformal_defect(&x.structure, &x.g_tilde()?)?;
            vt.mul_scalar_field(&exp_field(&x.f, 2.0)).max_abs_diff(&v)
        }),
        check("projective.defect_forms_agree", "two expressions for the conformal defect", 1e-9, move || {
            projective::conformal_defect(&x.structure, &x.g)?
                .max_abs_diff(&projective::conformal_defect_weyl_form(&x.structure, &x.g)?)
        }),
        check("projective.scalar_xa_form", "S_proj from (X, A)", 1e-9, move || {
            let (xx, a) = projective::xa(&x.structure, &x.g)?;
            projective::projective_scalar(&x.structure, &x.g)?
                .max_abs_diff(&projective::projective_scalar_from_xa(&x.g, &xx, &a)?)
        }),
        check("projective.scalar_weyl_form", "S_proj = S_g - S_(g,X) + m_hat |A|^2", 1e-9, move || {
            let (xx, a) = projective::xa(&x.structure, &x.g)?;
            projective::projective_scalar(&x.structure, &x.g)?
                .max_abs_diff(&projective::projective_scalar_weyl_form(&x.g, &xx, &a)?)
        }),
        check("projective.weyl_scalar", "closed form of the Weyl scalar", 1e-8, move || {
            projective::weyl_scalar(&x.g, &x.y)?.max_abs_diff(&projective::weyl_scalar_from_curvature(&x.g, &x.y)?)
        }),
        check("projective.weyl_ricci_antisymmetric", "antisymmetric Weyl Ricci = -(n/2) d xi", 1e-9, move || {
            let ric = riemannian::ricci(&projective::weyl_connection(&x.g, &x.y)?)?;
            let xi = algebra::flat(&x.g, &x.y)?;
            let dxi = x.grid.partial_gradient(&xi)?;
            let mut worst = 0.0f64;
            for j in 0..n {
                for k in 0..n {
                    let (a, b) = (ric.component(j * n + k), ric.component(k * n + j));
                    let (d1, d2) = (dxi.component(j * n + k), dxi.component(k * n + j));
                    for p in 0..x.grid.len() {
                        let anti = 0.5 * (a[p] - b[p]);
                        let dx = d1[p] - d2[p];
                        worst = worst.max((anti + 0.5 * nf * dx).abs());
                    }
                }
            }
            Ok(worst)
        }),
        check("variation.stress_energy_trace", "tr_g T(Psi) = (n/2 - 1)|Psi|^2", 1e-11, move || {
            let t = variation::stress_energy(&x.psi, &x.g)?;
            let tr = riemannian::trace_g(&t, &x.g)?;
            tr.max_abs_diff(&algebra::norm_sq(&x.psi, &x.g)?.scale(nf / 2.0 - 1.0))
        }),
        check("variation.adjointness", "<<Psi, l(h)>> = <<l*(Psi), h>>", 1e-8, move || {
            let a = algebra::l2_pairing(&x.psi, &variation::ell(&x.h, &x.g)?, &x.g)?;
            let b = algebra::l2_pairing(&variation::ell_star(&x.psi, &x.g)?, &x.h, &x.g)?;
            Ok(rel(a, b))
        }),
        check("variation.ell_conformal", "l(2 f g) = -(g (x) grad f)_0", 1e-9, move || {
            let h = x.g.g().mul_scalar_field(&x.f.values().iter().map(|v| 2.0 * v).collect::<Vec<_>>());
            let rhs = algebra::iota(&x.g, &riemannian::grad(&x.g, &x.f)?)?.scale(-1.0);
            variation::ell(&h, &x.g)?.max_abs_diff(&rhs)
        }),
        check("variation.trace_ell_star", "tr_g l*(Phi) = 1/2 div tr_g Phi", 1e-9, move || {
            let st = ProjectiveState::new(&x.structure, &x.g)?;
            let tr = riemannian::trace_g(&variation::ell_star(&st.phi, &x.g)?, &x.g)?;
            tr.max_abs_diff(&st.div_trace.scale(0.5))
        }),
        check("variation.residual_trace", "trace of the Euler-Lagrange tensor", 1e-9, move || {
            let st = ProjectiveState::new(&x.structure, &x.g)?;
            let r = variation::el_residual_from_state(&st, &x.g)?;
            riemannian::trace_g(&r.tensor, &x.g)?.max_abs_diff(&variation::conformal_gradient(&st, &x.g))
        }),
        check("variation.homothety_direction", "E'(g) = 0", 1e-10, move || {
            Ok(variation::first_variation(&x.structure, &x.g, x.g.g())?.abs())
        }),
        check("variation.first_variation", "first variation against central differences", 1e-5, move || {
            let closed = variation::first_variation(&x.structure, &x.g, &x.h)?;
            let oracle = variation::directional_derivative_oracle(&x.structure, &x.g, &x.h, &variation::DEFAULT_STEPS)?;
            Ok(rel(closed, oracle))
        }),
        check("variation.conformal_first_variation", "conformal first variation against central differences", 1e-5, move || {
            let closed = variation::conformal_first_variation(&x.structure, &x.g, &x.f)?;
            let h = x.g.g().mul_scalar_field(x.f.values());
            let oracle = variation::directional_derivative_oracle(&x.structure, &x.g, &h, &variation::DEFAULT_STEPS)?;
            Ok(rel(closed, oracle))
        }),
    ]
}

fn ricci_asymmetry(ric: &TensorField) -> f64 {
    let n = ric.dim();
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in 0..j {
            let (a, b) = (ric.component(j * n + k), ric.component(k * n + j));
            worst = a.iter().zip(b).fold(worst, |m, (x, y)| m.max((x - y).abs()));
        }
    }
    worst
}

fn surface_checks<'a>(x: &'a Instances) -> Vec<Check<'a>> {
    vec![
        check("cubic.stress_energy_vanishes", "T_g(alpha) = 0 for cubic differentials", 1e-10, move || {
            let c = CubicDifferential::from_fn(&x.grid, |p| Complex64::new(p[0].cos(), (p[1] + p[0]).sin()))?;
            let phi = samples::random_scalar(&x.grid, 17, 1, 0.3);
            let g = Metric::flat(&x.grid).conformal_change(&phi)?;
            Ok(variation::stress_energy(&cubic::build_alpha(&c, &g)?, &g)?.max_abs())
        }),
        check("cubic.adjoint_is_divergence", "2 l*(alpha) = -div alpha", 1e-9, move || {
            let c = CubicDifferential::from_fn(&x.grid, |p| Complex64::new(p[0].cos(), (p[1] + p[0]).sin()))?;
            let phi = samples::random_scalar(&x.grid, 17, 1, 0.3);
            let g = Metric::flat(&x.grid).conformal_change(&phi)?;
            let alpha = cubic::build_alpha(&c, &g)?;
            Ok(variation::ell_star(&alpha, &g)?.scale(2.0).add(&cubic::divergence(&alpha, &g)?)?.max_abs())
        }),
        check("cubic.holomorphy_residuals_agree", "Cauchy-Riemann residual equals the divergence", 1e-10, move || {
            let c = CubicDifferential::from_fn(&x.grid, |p| Complex64::new(p[0].cos(), (p[1] + p[0]).sin()))?;
            let phi = samples::random_scalar(&x.grid, 17, 1, 0.3);
            let g = Metric::flat(&x.grid).conformal_change(&phi)?;
            let r = cubic::check_holomorphy(&c, &g)?;
            Ok(rel(r.cauchy_riemann, r.divergence))
        }),
        check("cubic.constant_is_critical", "flat metric is critical for a constant cubic differential", 1e-9, move || {
            let c = CubicDifferential::constant(&x.grid, Complex64::new(1.0, 0.5))?;
            let report = cubic::verify_blaschke_mechanism(&c, &Metric::flat(&x.grid), 1e-9)?;
            Ok(report.checks.iter().map(|c| c.max_error).fold(0.0, f64::max))
        }),
        check("solvers.poisson_certified", "conformally critical metric on a surface", 1e-8, move || {
            let r = solvers::solve_conformal_critical_2d(&x.structure, &x.g, 1e-8)?;
            let gt = x.g.conformal_change(&r.final_f)?;
            let (xt, _) = projective::xa(&x.structure, &gt)?;
            Ok(riemannian::div(&gt, &xt)?.max_abs())
        }),
        check("solvers.poisson_conformal_variation", "E' vanishes in conformal directions after the solve", 1e-7, move || {
            let r = solvers::solve_conformal_critical_2d(&x.structure, &x.g, 1e-8)?;
            let gt = x.g.conformal_change(&r.final_f)?;
            let mut worst = 0.0f64;
            for k in 0..3 {
                let u = samples::random_scalar(&x.grid, subseed(31, k), 2, 1.0);
                worst = worst.max(variation::conformal_first_variation(&x.structure, &gt, &u)?.abs());
            }
            Ok(worst)
        }),
    ]
}

fn higher_checks<'a>(x: &'a Instances) -> Vec<Check<'a>> {
    let n = x.grid.dim();
    let nf = n as f64;
    vec![
        check("projective.integral_formula", "int S_proj dmu = m_hat ||Phi||^2", 1e-8, move || {
            let st = ProjectiveState::new(&x.structure, &x.g)?;
            let lhs = x.g.integrate(st.projective_scalar.values());
            Ok((lhs - m_hat(n) * st.energy_raw).abs() / (1.0 + st.energy_raw))
        }),
        check("projective.laplacian_self_adjoint", "L_g is symmetric in L2(dmu)", 1e-9, move || {
            let v = samples::random_scalar(&x.grid, 41, 2, 1.0);
            let lu = projective::projective_conformal_laplacian_apply(&x.structure, &x.g, &x.u)?;
            let lv = projective::projective_conformal_laplacian_apply(&x.structure, &x.g, &v)?;
            let a = x.g.integrate(&lu.values().iter().zip(v.values()).map(|(a, b)| a * b).collect::<Vec<_>>());
            let b = x.g.integrate(&lv.values().iter().zip(x.u.values()).map(|(a, b)| a * b).collect::<Vec<_>>());
            Ok(rel(a, b))
        }),
        check("projective.laplacian_conformal_covariance", "u^(-(n+2)/(n-2)) L_g u = S_proj of u^(4/(n-2)) g", 1e-8, move || {
            let w = samples::random_scalar(&x.grid, 43, 1, 0.2);
            let u = TensorField::scalar(&x.grid, exp_field(&w, 1.0));
            let lu = projective::projective_conformal_laplacian_apply(&x.structure, &x.g, &u)?;
            let p = -(nf + 2.0) / (nf - 2.0);
            let lhs = TensorField::scalar(
                &x.grid,
                lu.values().iter().zip(u.values()).map(|(l, u)| l * u.powf(p)).collect(),
            );
            // u^(4/(n-2)) = exp(2 f) with f = 2w/(n-2)
            let gt = x.g.conformal_change(&w.scale(2.0 / (nf - 2.0)))?;
            lhs.max_abs_diff(&projective::projective_scalar(&x.structure, &gt)?)
        }),
        check("projective.laplacian_energy_identity", "int u L_g u = m_hat ||Phi||^2 at u^(4/(n-2)) g", 1e-8, move || {
            let w = samples::random_scalar(&x.grid, 47, 1, 0.2);
            let u = TensorField::scalar(&x.grid, exp_field(&w, 1.0));
            let lu = projective::projective_conformal_laplacian_apply(&x.structure, &x.g, &u)?;
            let lhs = x.g.integrate(&lu.values().iter().zip(u.values()).map(|(a, b)| a * b).collect::<Vec<_>>());
            let gt = x.g.conformal_change(&w.scale(2.0 / (nf - 2.0)))?;
            let rhs = m_hat(n) * ProjectiveState::new(&x.structure, &gt)?.energy_raw;
            Ok((lhs - rhs).abs() / (1.0 + rhs.abs()))
        }),
        check("solvers.spectrum_nonnegative", "bottom of the spectrum of L_g is non-negative", 1e-8, move || {
            let bound = solvers::spectrum_lower_bound(&x.structure, &x.g, 2)?;
            Ok((-bound).max(0.0))
        }),
        check("solvers.spectrum_metrisable_zero", "0 is in the spectrum for a metrisable structure", 1e-8, move || {
            let s = samples::metrisable_structure(&x.g, &x.beta);
            Ok(solvers::spectrum_lower_bound(&s, &x.g, 2)?.abs())
        }),
        check("solvers.descent_monotone", "conformal descent never increases E", 0.0, move || {
            let r = solvers::conformal_descent(&x.structure, &x.g, 10, 0.0)?;
            let e = r.energy_history();
            Ok(e.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max))
        }),
    ]
}

/// Runs the suite for `cfg.dim` on an `N = cfg.n` grid.
pub fn run_verify(cfg: &SuiteConfig) -> Result<Report> {
    if cfg.dim < 2 {
        return Err(Error::InvalidGrid(format!("dimension must be at least 2, got {}", cfg.dim)));
    }
    let x = Instances::new(cfg)?;
    let mut checks = common_checks(&x);
    if cfg.dim == 2 {
        checks.extend(surface_checks(&x));
    } else {
        checks.extend(higher_checks(&x));
    }
    let results: Vec<f64> = checks.par_iter().map(|c| (c.run)().unwrap_or(f64::NAN)).collect();
    let mut report = Report::new("verify", Environment { seed: cfg.seed, n: cfg.n, dim: cfg.dim });
    for (c, err) in checks.iter().zip(results) {
        let tol = cfg.overrides.get(c.id).copied().unwrap_or(c.tol);
        report.check(c.id, c.anchor, err, tol);
    }
    report.value("energy", projective::energy(&x.structure, &x.g)?);
    Ok(report)
}
