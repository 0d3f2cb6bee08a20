//! Acceptance criteria. Runs as a plain binary so that the per-criterion
//! lines are always printed; exits non-zero if any criterion fails.

use std::time::Instant;

use num_complex::Complex64;
use projlab_core::algebra::{self, m_factor, m_hat};
use projlab_core::cubic::{self, CubicDifferential};
use projlab_core::projective::{self, ProjectiveState};
use projlab_core::riemannian;
use projlab_core::samples::{self, subseed};
use projlab_core::solvers::{self, PoissonOptions};
use projlab_core::variation;
use projlab_core::{Metric, ProjectiveStructure, TensorField, TorusGrid};

/// Largest error seen for one named quantity against its tolerance.
struct Tally {
    name: &'static str,
    tol: f64,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str, tol: f64) -> Self {
        Tally { name, tol, worst: 0.0 }
    }

    fn record(&mut self, err: f64) {
        // NaN must poison the tally.
        if err.is_nan() || err > self.worst {
            self.worst = if err.is_nan() { f64::NAN } else { err };
        }
    }

    fn pass(&self) -> bool {
        self.worst <= self.tol
    }

    fn describe(&self) -> String {
        format!("{} {:.2e}/{:.0e}", self.name, self.worst, self.tol)
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn summarize(tallies: &[Tally], extra: &[(String, bool)]) -> Outcome {
    let mut parts: Vec<String> = tallies.iter().map(Tally::describe).collect();
    parts.extend(extra.iter().map(|(s, _)| s.clone()));
    Outcome {
        pass: tallies.iter().all(Tally::pass) && extra.iter().all(|(_, ok)| *ok),
        detail: parts.join("; "),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn grid(dim: usize, n: usize) -> TorusGrid {
    TorusGrid::new(dim, n).unwrap()
}

fn metric_amp(dim: usize) -> f64 {
    (0.8 / dim as f64).min(0.2)
}

fn exp_scaled(f: &TensorField, c: f64) -> Vec<f64> {
    f.values().iter().map(|v| (c * v).exp()).collect()
}

fn along(y: &TensorField, f: &TensorField) -> Vec<f64> {
    let df = riemannian::differential(f).unwrap();
    let n = y.dim();
    (0..f.grid().len()).map(|p| (0..n).map(|i| y.component(i)[p] * df.component(i)[p]).sum()).collect()
}

fn lin(parts: &[(f64, &[f64])]) -> Vec<f64> {
    (0..parts[0].1.len()).map(|p| parts.iter().map(|(c, v)| c * v[p]).sum()).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn energy(s: &ProjectiveStructure, g: &Metric) -> f64 {
    projective::energy(s, g).unwrap()
}

/// Central difference at steps `2t` and `t`, one Richardson step in `t^2`.
fn oracle_derivative(s: &ProjectiveStructure, g: &Metric, h: &TensorField, t: f64) -> f64 {
    let d = |t: f64| {
        (energy(s, &g.perturbed(h, t).unwrap()) - energy(s, &g.perturbed(h, -t).unwrap())) / (2.0 * t)
    };
    let (d1, d2) = (d(2.0 * t), d(t));
    (4.0 * d2 - d1) / 3.0
}

fn c1_algebra() -> Outcome {
    let mut t = [
        Tally::new("con.Sym", 1e-11),
        Tally::new("(Sym)_0", 1e-11),
        Tally::new("tr.iota", 1e-11),
        Tally::new("normsplit", 1e-11),
        Tally::new("sondecomp", 1e-11),
    ];
    for dim in 2..=4 {
        let gr = grid(dim, 16);
        let m = m_factor(dim);
        for seed in 0..20u64 {
            let s = |k| subseed(1000 * dim as u64 + seed, k);
            let g = samples::random_metric(&gr, s(0), metric_amp(dim));
            let alpha = samples::random_one_form(&gr, s(1), 1.0);
            let y = samples::random_vector(&gr, s(2), 1.0);
            let psi = samples::random_e0_section(&gr, s(3), 1.0);
            let sa = algebra::sym(&alpha).unwrap();
            t[0].record(algebra::con(&sa).unwrap().max_abs_diff(&alpha.scale(dim as f64 + 1.0)).unwrap());
            t[1].record(algebra::trace_free_part(&sa).unwrap().max_abs());
            let tr = algebra::metric_trace(&algebra::iota(&g, &y).unwrap(), &g).unwrap();
            t[2].record(tr.max_abs_diff(&y.scale(m)).unwrap());
            let (x, a) = algebra::decompose_xa(&psi, &g).unwrap();
            let split = lin(&[
                (1.0, algebra::norm_sq(&a, &g).unwrap().values()),
                (m, algebra::norm_sq(&x, &g).unwrap().values()),
            ]);
            t[3].record(max_diff(algebra::norm_sq(&psi, &g).unwrap().values(), &split));
            t[4].record(algebra::pairing(&psi, &sa, &g).unwrap().max_abs());
        }
    }
    summarize(&t, &[])
}

fn c2_stress_energy() -> Outcome {
    let mut trace = Tally::new("tr T", 1e-11);
    for dim in 2..=4 {
        let gr = grid(dim, 16);
        for seed in 0..5u64 {
            let g = samples::random_metric(&gr, subseed(seed, 0), metric_amp(dim));
            let psi = samples::random_e0_section(&gr, subseed(seed, 1), 1.0);
            let tr = riemannian::trace_g(&variation::stress_energy(&psi, &g).unwrap(), &g).unwrap();
            let want = algebra::norm_sq(&psi, &g).unwrap().scale(dim as f64 / 2.0 - 1.0);
            trace.record(tr.max_abs_diff(&want).unwrap());
        }
    }
    let mut cubic_t = Tally::new("T(alpha)", 1e-10);
    let gr = grid(2, 32);
    for seed in 0..5u64 {
        let phi = samples::random_scalar(&gr, subseed(seed, 2), 1, 0.3);
        let g = Metric::flat(&gr).conformal_change(&phi).unwrap();
        let (a, b) = (seed as f64 + 1.0, 0.5 * seed as f64);
        let c = CubicDifferential::from_fn(&gr, |x| Complex64::new(a * x[0].sin() + 1.0, b * (x[0] - x[1]).cos()))
            .unwrap();
        let alpha = cubic::build_alpha(&c, &g).unwrap();
        cubic_t.record(variation::stress_energy(&alpha, &g).unwrap().max_abs());
    }
    summarize(&[trace, cubic_t], &[])
}

fn c3_adjointness() -> Outcome {
    let mut t = Tally::new("rel", 1e-8);
    for dim in 2..=3 {
        let gr = grid(dim, 32);
        for seed in 0..20u64 {
            let s = |k| subseed(7000 + seed, k);
            let g = samples::random_metric(&gr, s(0), metric_amp(dim));
            let psi = samples::random_e0_section(&gr, s(1), 1.0);
            let h = samples::random_symmetric2(&gr, s(2), 1.0);
            let lhs = algebra::l2_pairing(&psi, &variation::ell(&h, &g).unwrap(), &g).unwrap();
            let rhs = algebra::l2_pairing(&variation::ell_star(&psi, &g).unwrap(), &h, &g).unwrap();
            t.record(rel(lhs, rhs));
        }
    }
    summarize(&[t], &[])
}

fn c4_first_variation() -> Outcome {
    let mut random = Tally::new("random h", 1e-5);
    let mut conformal = Tally::new("h = f g", 1e-5);
    for dim in 2..=3 {
        let gr = grid(dim, 24);
        let g = samples::random_metric(&gr, subseed(dim as u64, 0), metric_amp(dim));
        let s = samples::random_structure(&gr, subseed(dim as u64, 1), 0.3);
        for k in 0..5u64 {
            let h = samples::random_symmetric2(&gr, subseed(dim as u64, 10 + k), 0.3);
            let closed = variation::first_variation(&s, &g, &h).unwrap();
            random.record(rel(closed, oracle_derivative(&s, &g, &h, 1e-3)));

            let f = samples::random_scalar(&gr, subseed(dim as u64, 20 + k), 2, 0.5);
            let h = g.g().mul_scalar_field(f.values());
            let closed = variation::conformal_first_variation(&s, &g, &f).unwrap();
            conformal.record(rel(closed, oracle_derivative(&s, &g, &h, 1e-3)));
        }
    }
    summarize(&[random, conformal], &[])
}

fn c5_conformal_laws() -> Outcome {
    let mut t = [
        Tally::new("A", 1e-10),
        Tally::new("X", 1e-8),
        Tally::new("div X", 1e-8),
        Tally::new("|Phi|^2", 1e-8),
        Tally::new("S_proj", 1e-8),
        Tally::new("V", 1e-8),
    ];
    for dim in 2..=3 {
        let nf = dim as f64;
        let m = m_factor(dim);
        let gr = grid(dim, 32);
        for seed in 0..2u64 {
            let s = |k| subseed(500 + 10 * dim as u64 + seed, k);
            let g = samples::random_metric(&gr, s(0), metric_amp(dim));
            let st = samples::random_structure(&gr, s(1), 0.3);
            let f = samples::random_scalar(&gr, s(2), 1, 0.3);
            let gt = g.conformal_change(&f).unwrap();
            let (e2, em2) = (exp_scaled(&f, 2.0), exp_scaled(&f, -2.0));
            let a = ProjectiveState::new(&st, &g).unwrap();
            let b = ProjectiveState::new(&st, &gt).unwrap();

            t[0].record(b.a.max_abs_diff(&a.a).unwrap());

            let want_x = a.x.add(&riemannian::grad(&g, &f).unwrap()).unwrap().mul_scalar_field(&em2);
            t[1].record(b.x.max_abs_diff(&want_x).unwrap());

            let df2 = algebra::norm_sq(&riemannian::differential(&f).unwrap(), &g).unwrap();
            let lap = riemannian::laplacian(&g, &f).unwrap();
            let x_f = along(&a.x, &f);
            let div_xt = riemannian::div(&gt, &b.x).unwrap();
            let div_x = riemannian::div(&g, &a.x).unwrap();
            let want =
                lin(&[(1.0, div_x.values()), (nf - 2.0, &x_f), (-1.0, lap.values()), (nf - 2.0, df2.values())]);
            let want: Vec<f64> = want.iter().zip(&em2).map(|(w, e)| w * e).collect();
            t[2].record(max_diff(div_xt.values(), &want));

            let want = lin(&[(1.0, a.phi_norm_sq.values()), (2.0 * m, &x_f), (m, df2.values())]);
            let want: Vec<f64> = want.iter().zip(&em2).map(|(w, e)| w * e).collect();
            t[3].record(max_diff(b.phi_norm_sq.values(), &want));

            let want = lin(&[
                (1.0, a.projective_scalar.values()),
                (2.0 * (nf - 1.0), lap.values()),
                (-(nf - 1.0) * (nf - 2.0), df2.values()),
            ]);
            let want: Vec<f64> = want.iter().zip(&em2).map(|(w, e)| w * e).collect();
            t[4].record(max_diff(b.projective_scalar.values(), &want));

            let v = a.conformal_defect(&g);
            let vt = b.conformal_defect(&gt);
            let scaled: Vec<f64> = vt.values().iter().zip(&e2).map(|(v, e)| v * e).collect();
            t[5].record(max_diff(&scaled, v.values()));
        }
    }
    summarize(&t, &[])
}

fn c6_integral_formula() -> Outcome {
    let mut integral = Tally::new("integral", 1e-8);
    let mut forms = Tally::new("alternative forms", 1e-9);
    let gr = grid(3, 16);
    for seed in 0..10u64 {
        let g = samples::random_metric(&gr, subseed(600 + seed, 0), metric_amp(3));
        let s = samples::random_structure(&gr, subseed(600 + seed, 1), 0.3);
        let st = ProjectiveState::new(&s, &g).unwrap();
        let lhs = g.integrate(st.projective_scalar.values());
        integral.record((lhs - m_hat(3) * st.energy_raw).abs() / (1.0 + st.energy_raw));
        let xa = projective::projective_scalar_from_xa(&g, &st.x, &st.a).unwrap();
        let weyl = projective::projective_scalar_weyl_form(&g, &st.x, &st.a).unwrap();
        forms.record(xa.max_abs_diff(&st.projective_scalar).unwrap());
        forms.record(weyl.max_abs_diff(&st.projective_scalar).unwrap());
    }
    summarize(&[integral, forms], &[])
}

fn c7_appendix() -> Outcome {
    let mut pert = Tally::new("perturbed curvature", 1e-9);
    let mut scal = Tally::new("Weyl scalar", 1e-8);
    let mut anti = Tally::new("Weyl Ricci", 1e-9);
    for (dim, n) in [(2, 32), (3, 16)] {
        let gr = grid(dim, n);
        for seed in 0..3u64 {
            let s = |k| subseed(700 + 10 * dim as u64 + seed, k);
            let g = samples::random_metric(&gr, s(0), metric_amp(dim));
            let phi = samples::random_e_section(&gr, s(1), 0.3);
            let lc = g.levi_civita();
            let brute = riemannian::curvature(&lc.perturbed(&phi).unwrap()).unwrap();
            pert.record(riemannian::perturbed_curvature(lc, &phi).unwrap().max_abs_diff(&brute).unwrap());

            let x = samples::random_vector(&gr, s(2), 0.5);
            let closed = projective::weyl_scalar(&g, &x).unwrap();
            scal.record(closed.max_abs_diff(&projective::weyl_scalar_from_curvature(&g, &x).unwrap()).unwrap());

            let ric = riemannian::ricci(&projective::weyl_connection(&g, &x).unwrap()).unwrap();
            let xi = algebra::flat(&g, &x).unwrap();
            for j in 0..dim {
                for k in 0..dim {
                    let dj_xik = gr.diff(xi.component(k), j).unwrap();
                    let dk_xij = gr.diff(xi.component(j), k).unwrap();
                    let (rjk, rkj) = (ric.component(j * dim + k), ric.component(k * dim + j));
                    for p in 0..gr.len() {
                        let lhs = 0.5 * (rjk[p] - rkj[p]);
                        let rhs = -(dim as f64) / 2.0 * (dj_xik[p] - dk_xij[p]);
                        anti.record((lhs - rhs).abs());
                    }
                }
            }
        }
    }
    summarize(&[pert, scal, anti], &[])
}

fn c8_surface_solve() -> Outcome {
    let gr = grid(2, 64);
    let g = samples::random_metric(&gr, 81, 0.2);
    let s = samples::random_structure(&gr, 82, 0.3);
    let r1 = solvers::solve_conformal_critical_2d(&s, &g, 1e-8).unwrap();
    let gt = g.conformal_change(&r1.final_f).unwrap();
    let xt = ProjectiveState::new(&s, &gt).unwrap().x;
    let mut div = Tally::new("div X", 1e-8);
    div.record(riemannian::div(&gt, &xt).unwrap().max_abs());
    let mut var = Tally::new("E'(f g)", 1e-7);
    for k in 0..10u64 {
        let f = samples::random_scalar(&gr, subseed(83, k), 4, 1.0);
        var.record(variation::conformal_first_variation(&s, &gt, &f).unwrap().abs());
    }
    let start = samples::random_scalar(&gr, 84, 4, 1.0);
    let opts = PoissonOptions { tol: 1e-8, initial: Some(start), ..Default::default() };
    let r2 = solvers::solve_conformal_critical_2d_with(&s, &g, &opts).unwrap();
    let d = r1.final_f.sub(&r2.final_f).unwrap();
    let shift = d.values().iter().sum::<f64>() / d.values().len() as f64;
    let mut agree = Tally::new("two solves", 1e-9);
    agree.record(d.values().iter().fold(0.0, |m, v| m.max((v - shift).abs())));
    let certified = (format!("certified {} {}", r1.certified, r2.certified), r1.certified && r2.certified);
    summarize(&[div, var, agree], &[certified])
}

fn c9_blaschke() -> Outcome {
    let gr = grid(2, 32);
    let g = Metric::flat(&gr);
    let c = CubicDifferential::constant(&gr, Complex64::new(1.0, 0.5)).unwrap();
    let alpha = cubic::build_alpha(&c, &g).unwrap();
    let s = ProjectiveStructure::new(g.levi_civita().perturbed(&alpha).unwrap());
    let r = variation::el_residual(&s, &g).unwrap();
    let mut t = Tally::new("el_residual", 1e-9);
    t.record(r.max_norm);
    summarize(&[t], &[(format!("k = {}", r.k), r.k == 0.0)])
}

fn c10_spectrum() -> Outcome {
    let gr = grid(3, 12);
    let mut random = Tally::new("-lambda (random)", 1e-8);
    let mut lowest = f64::INFINITY;
    for seed in 0..10u64 {
        let g = samples::random_metric(&gr, subseed(1100 + seed, 0), 0.2);
        let s = samples::random_structure(&gr, subseed(1100 + seed, 1), 0.3);
        let lambda = solvers::spectrum_lower_bound(&s, &g, 2).unwrap();
        lowest = lowest.min(lambda);
        random.record(-lambda);
    }
    let mut metrisable = Tally::new("|lambda| (metrisable)", 1e-8);
    for seed in 0..3u64 {
        let g = samples::random_metric(&gr, subseed(1200 + seed, 0), 0.2);
        let beta = samples::random_one_form(&gr, subseed(1200 + seed, 1), 0.3);
        let s = samples::metrisable_structure(&g, &beta);
        metrisable.record(solvers::spectrum_lower_bound(&s, &g, 2).unwrap().abs());
    }
    let g = samples::random_metric(&gr, 1301, 0.2);
    let s = samples::random_structure(&gr, 1302, 0.3);
    let lambda = solvers::spectrum_lower_bound(&s, &g, 2).unwrap();
    let spread = (format!("min lambda (random) {lowest:.3e}"), true);
    summarize(&[random, metrisable], &[spread, (format!("lambda (fixed) {lambda:.3e} > 1e-4"), lambda > 1e-4)])
}

fn c11_descent() -> Outcome {
    let gr = grid(3, 16);
    let g = samples::random_metric(&gr, 1, 0.2);
    let s = samples::near_metrisable_structure(&g, 7, 0.05);
    let r = solvers::conformal_descent(&s, &g, 500, 1e-12).unwrap();
    let dev = r.residual_history();
    let reduction = dev[0] / dev.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut monotone = r.energy_history().windows(2).all(|w| w[1] <= w[0]);
    for seed in 0..2u64 {
        let g = samples::random_metric(&gr, subseed(1400 + seed, 0), 0.2);
        let s = samples::random_structure(&gr, subseed(1400 + seed, 1), 0.3);
        let r = solvers::conformal_descent(&s, &g, 40, 1e-12).unwrap();
        monotone &= r.energy_history().windows(2).all(|w| w[1] <= w[0]);
    }
    summarize(
        &[],
        &[
            (format!("monotone {monotone}"), monotone),
            (format!("deviation reduced {reduction:.3e}x in {} iterations (need >= 100x)", r.iterations), reduction >= 100.0),
        ],
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("algebraic identities", c1_algebra),
        ("stress-energy", c2_stress_energy),
        ("adjointness", c3_adjointness),
        ("first variation", c4_first_variation),
        ("conformal laws", c5_conformal_laws),
        ("integral formula", c6_integral_formula),
        ("appendix curvature formulas", c7_appendix),
        ("surface criticality solve", c8_surface_solve),
        ("cubic differential mechanism", c9_blaschke),
        ("projective-conformal spectrum", c10_spectrum),
        ("conformal descent", c11_descent),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let out = run();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {:2} {verdict} {name}: {} ({:.1?})", i + 1, out.detail, t0.elapsed());
        failed += usize::from(!out.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
