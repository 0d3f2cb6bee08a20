//! Quantities attached to a projective structure and a metric.
//!
//! A projective structure is stored through one representative connection;
//! every quantity here depends only on `Phi_g = (D - LC(g))_0` and is
//! therefore unchanged when `D` is replaced by `D + Sym(beta)`.
//!
//! Notation: `X_g = tr_g(Phi_g) / m`, `A = Phi_g - iota_g(X_g)`,
//! `S_proj = 2(n+1)/(n+2) [ (n/2 - 1)|Phi_g|^2 - div_g tr_g Phi_g ]` and the
//! conformal defect `V_g = S_proj - S_g`.

use crate::algebra::{self, m_factor, m_hat};
use crate::error::{Error, Result};
use crate::field::{valence, TensorField};
use crate::riemannian::{self, Connection, Metric};

#[derive(Clone, Debug)]
pub struct ProjectiveStructure {
    representative: Connection,
}

impl ProjectiveStructure {
    pub fn new(representative: Connection) -> Self {
        ProjectiveStructure { representative }
    }

    pub fn representative(&self) -> &Connection {
        &self.representative
    }

    /// Another representative of the same class: `D + Sym(beta)`.
    pub fn shifted(&self, beta: &TensorField) -> Result<ProjectiveStructure> {
        let shift = algebra::sym(beta)?;
        Ok(ProjectiveStructure::new(self.representative.perturbed(&shift)?))
    }
}

/// `Phi_g = (D - LC(g))_0`.
pub fn phi(structure: &ProjectiveStructure, metric: &Metric) -> Result<TensorField> {
    let diff = structure.representative.difference(metric.levi_civita())?;
    algebra::trace_free_part(&diff)
}

/// Everything derived from one `(structure, metric)` pair, computed once.
#[derive(Clone, Debug)]
pub struct ProjectiveState {
    pub phi: TensorField,
    pub x: TensorField,
    pub a: TensorField,
    /// `|Phi_g|^2_g` pointwise.
    pub phi_norm_sq: TensorField,
    /// `tr_g Phi_g`.
    pub trace: TensorField,
    /// `div_g tr_g Phi_g`.
    pub div_trace: TensorField,
    /// `||Phi_g||^2_g`.
    pub energy_raw: f64,
    pub volume: f64,
    pub energy: f64,
    pub projective_scalar: TensorField,
}

impl ProjectiveState {
    pub fn new(structure: &ProjectiveStructure, metric: &Metric) -> Result<Self> {
        let n = metric.dim();
        let phi = phi(structure, metric)?;
        let (x, a) = algebra::decompose_xa(&phi, metric)?;
        let phi_norm_sq = algebra::norm_sq(&phi, metric)?;
        let trace = x.scale(m_factor(n));
        let div_trace = riemannian::div(metric, &trace)?;
        let energy_raw = metric.integrate(phi_norm_sq.values());
        let volume = metric.volume();
        let energy = volume.powf((2.0 - n as f64) / n as f64) * energy_raw;
        let nf = n as f64;
        let c = 2.0 * (nf + 1.0) / (nf + 2.0);
        let s: Vec<f64> = phi_norm_sq
            .values()
            .iter()
            .zip(div_trace.values())
            .map(|(p, d)| c * ((nf / 2.0 - 1.0) * p - d))
            .collect();
        let projective_scalar = TensorField::scalar(metric.grid(), s);
        Ok(ProjectiveState { phi, x, a, phi_norm_sq, trace, div_trace, energy_raw, volume, energy, projective_scalar })
    }

    /// `V_g = S_proj - S_g`.
    pub fn conformal_defect(&self, metric: &Metric) -> TensorField {
        self.projective_scalar.sub(metric.scalar_curvature()).expect("same grid")
    }
}

/// `E(g) = Vol(g)^((2-n)/n) int |Phi_g|^2_g dmu_g`.
pub fn energy(structure: &ProjectiveStructure, metric: &Metric) -> Result<f64> {
    let phi = phi(structure, metric)?;
    let n = metric.dim() as f64;
    let raw = metric.integrate(algebra::norm_sq(&phi, metric)?.values());
    Ok(metric.volume().powf((2.0 - n) / n) * raw)
}

/// `(X_g, A_[g])`.
pub fn xa(structure: &ProjectiveStructure, metric: &Metric) -> Result<(TensorField, TensorField)> {
    algebra::decompose_xa(&phi(structure, metric)?, metric)
}

/// The Weyl connection `LC(g) + g (x) X - Sym(X^flat)`.
pub fn weyl_connection(metric: &Metric, x: &TensorField) -> Result<Connection> {
    let shift = algebra::g_tensor(metric, x)?.sub(&algebra::sym(&algebra::flat(metric, x)?)?)?;
    metric.levi_civita().perturbed(&shift)
}

/// `S_{g,X} = S_g + 2(n-1) div_g X - (n-2)(n-1)|X|^2_g`.
pub fn weyl_scalar(metric: &Metric, x: &TensorField) -> Result<TensorField> {
    let n = metric.dim() as f64;
    let d = riemannian::div(metric, x)?;
    let x2 = algebra::norm_sq(x, metric)?;
    let s = metric.scalar_curvature();
    let vals = (0..metric.grid().len())
        .map(|p| s.values()[p] + 2.0 * (n - 1.0) * d.values()[p] - (n - 2.0) * (n - 1.0) * x2.values()[p])
        .collect();
    Ok(TensorField::scalar(metric.grid(), vals))
}

/// `tr_g Ric` of the Weyl connection, computed from its curvature.
pub fn weyl_scalar_from_curvature(metric: &Metric, x: &TensorField) -> Result<TensorField> {
    let ric = riemannian::ricci(&weyl_connection(metric, x)?)?;
    riemannian::trace_g(&ric, metric)
}

/// Projective scalar curvature from its defining formula.
pub fn projective_scalar(structure: &ProjectiveStructure, metric: &Metric) -> Result<TensorField> {
    Ok(ProjectiveState::new(structure, metric)?.projective_scalar)
}

/// `m_hat |A|^2 + (n-2)(n-1)|X|^2 - 2(n-1) div X`.
pub fn projective_scalar_from_xa(metric: &Metric, x: &TensorField, a: &TensorField) -> Result<TensorField> {
    let n = metric.dim() as f64;
    let a2 = algebra::norm_sq(a, metric)?;
    let x2 = algebra::norm_sq(x, metric)?;
    let d = riemannian::div(metric, x)?;
    let mh = m_hat(metric.dim());
    let vals = (0..metric.grid().len())
        .map(|p| mh * a2.values()[p] + (n - 2.0) * (n - 1.0) * x2.values()[p] - 2.0 * (n - 1.0) * d.values()[p])
        .collect();
    Ok(TensorField::scalar(metric.grid(), vals))
}

/// `S_g - S_{g,X_g} + m_hat |A|^2`, with `S_{g,X_g}` taken from the Weyl
/// connection's curvature.
pub fn projective_scalar_weyl_form(metric: &Metric, x: &TensorField, a: &TensorField) -> Result<TensorField> {
    let sw = weyl_scalar_from_curvature(metric, x)?;
    let a2 = algebra::norm_sq(a, metric)?;
    let mh = m_hat(metric.dim());
    let s = metric.scalar_curvature();
    let vals = (0..metric.grid().len())
        .map(|p| s.values()[p] - sw.values()[p] + mh * a2.values()[p])
        .collect();
    Ok(TensorField::scalar(metric.grid(), vals))
}

/// `V_g = S_proj - S_g`.
pub fn conformal_defect(structure: &ProjectiveStructure, metric: &Metric) -> Result<TensorField> {
    Ok(ProjectiveState::new(structure, metric)?.conformal_defect(metric))
}

/// `V_g = m_hat |A|^2 - tr_g Ric(Weyl connection of X_g)`, evaluated
/// independently of the defining formula.
pub fn conformal_defect_weyl_form(structure: &ProjectiveStructure, metric: &Metric) -> Result<TensorField> {
    let (x, a) = xa(structure, metric)?;
    let sw = weyl_scalar_from_curvature(metric, &x)?;
    let a2 = algebra::norm_sq(&a, metric)?;
    let mh = m_hat(metric.dim());
    let vals = a2.values().iter().zip(sw.values()).map(|(a, s)| mh * a - s).collect();
    Ok(TensorField::scalar(metric.grid(), vals))
}

/// Absolute floor added to the locus threshold so that an identically
/// vanishing defect is detected despite round-off.
pub const LOCUS_ABSOLUTE_FLOOR: f64 = 1e-12;

/// Points where `|V_g| <= tol * median(|S_proj| + |S_g|) + 1e-12`.
pub fn conformal_locus(structure: &ProjectiveStructure, metric: &Metric, tol: f64) -> Result<Vec<bool>> {
    let state = ProjectiveState::new(structure, metric)?;
    let v = state.conformal_defect(metric);
    let s = metric.scalar_curvature();
    let mut scale: Vec<f64> = state
        .projective_scalar
        .values()
        .iter()
        .zip(s.values())
        .map(|(a, b)| a.abs() + b.abs())
        .collect();
    scale.sort_by(f64::total_cmp);
    let median = scale[scale.len() / 2];
    let threshold = tol * median + LOCUS_ABSOLUTE_FLOOR;
    Ok(v.values().iter().map(|x| x.abs() <= threshold).collect())
}

/// Projective quantities on the conformal class of a fixed metric, evaluated
/// through the transformation laws instead of rebuilding the metric. For
/// `h = exp(2f) g` and `Y = grad_g f`:
/// `|Phi_h|^2_h = exp(-2f)(|Phi_g|^2_g + 2m X_g(f) + m |df|^2_g)`,
/// `tr_h Phi_h = m exp(-2f)(X_g + Y)`, `dmu_h = exp(nf) dmu_g` and
/// `div_h V = exp(-nf) div_g(exp(nf) V)`.
pub struct ConformalFamily<'a> {
    metric: &'a Metric,
    phi_norm_sq: Vec<f64>,
    x: TensorField,
}

/// The quantities of [`ProjectiveState`] at `exp(2f) g`.
#[derive(Clone, Debug)]
pub struct ConformalSample {
    /// Volume density of `exp(2f) g` relative to the chart.
    pub density: Vec<f64>,
    pub volume: f64,
    pub phi_norm_sq: TensorField,
    pub div_trace: TensorField,
    pub energy_raw: f64,
    pub energy: f64,
    pub projective_scalar: TensorField,
    cell_volume: f64,
}

impl ConformalSample {
    pub fn integrate(&self, s: &[f64]) -> f64 {
        s.iter().zip(&self.density).map(|(a, r)| a * r).sum::<f64>() * self.cell_volume
    }

    pub fn mean(&self, s: &[f64]) -> f64 {
        self.integrate(s) / self.volume
    }
}

impl<'a> ConformalFamily<'a> {
    pub fn new(structure: &ProjectiveStructure, metric: &'a Metric) -> Result<Self> {
        let state = ProjectiveState::new(structure, metric)?;
        Ok(ConformalFamily { metric, phi_norm_sq: state.phi_norm_sq.into_data(), x: state.x })
    }

    pub fn metric(&self) -> &Metric {
        self.metric
    }

    pub fn sample(&self, f: &TensorField) -> Result<ConformalSample> {
        let g = self.metric;
        let grid = g.grid();
        let n = g.dim();
        let nf = n as f64;
        let m = m_factor(n);
        let npts = grid.len();
        let df = riemannian::differential(f)?;
        let y = algebra::sharp(g, &df)?;
        let mut xf = vec![0.0; npts];
        let mut df2 = vec![0.0; npts];
        for a in 0..n {
            let (d, xa, ya) = (df.component(a), self.x.component(a), y.component(a));
            for p in 0..npts {
                xf[p] += xa[p] * d[p];
                df2[p] += ya[p] * d[p];
            }
        }
        let e2: Vec<f64> = f.values().iter().map(|v| (-2.0 * v).exp()).collect();
        let en: Vec<f64> = f.values().iter().map(|v| (nf * v).exp()).collect();
        let phi_norm_sq: Vec<f64> =
            (0..npts).map(|p| e2[p] * (self.phi_norm_sq[p] + 2.0 * m * xf[p] + m * df2[p])).collect();
        // exp(nf) tr_h Phi_h
        let weighted = self.x.add(&y)?.mul_scalar_field(&(0..npts).map(|p| m * e2[p] * en[p]).collect::<Vec<_>>());
        let div_trace: Vec<f64> =
            riemannian::div(g, &weighted)?.values().iter().zip(&en).map(|(d, e)| d / e).collect();
        let density: Vec<f64> = g.density().iter().zip(&en).map(|(r, e)| r * e).collect();
        let cell_volume = grid.cell_volume();
        let volume = density.iter().sum::<f64>() * cell_volume;
        let energy_raw = grid.integrate_unchecked(&phi_norm_sq, &density);
        let energy = volume.powf((2.0 - nf) / nf) * energy_raw;
        let c = 2.0 * (nf + 1.0) / (nf + 2.0);
        let s = phi_norm_sq.iter().zip(&div_trace).map(|(p, d)| c * ((nf / 2.0 - 1.0) * p - d)).collect();
        Ok(ConformalSample {
            density,
            volume,
            phi_norm_sq: TensorField::scalar(grid, phi_norm_sq),
            div_trace: TensorField::scalar(grid, div_trace),
            energy_raw,
            energy,
            projective_scalar: TensorField::scalar(grid, s),
            cell_volume,
        })
    }
}

/// `4 (n-1)/(n-2)`.
pub fn yamabe_coefficient(n: usize) -> f64 {
    let n = n as f64;
    4.0 * (n - 1.0) / (n - 2.0)
}

/// `L_g u = 4 (n-1)/(n-2) Delta_g u + S_proj u`, `n >= 3`.
pub fn projective_conformal_laplacian_apply(
    structure: &ProjectiveStructure,
    metric: &Metric,
    u: &TensorField,
) -> Result<TensorField> {
    let s = projective_scalar(structure, metric)?;
    apply_with_scalar(metric, &s, u)
}

pub(crate) fn apply_with_scalar(metric: &Metric, s: &TensorField, u: &TensorField) -> Result<TensorField> {
    let n = metric.dim();
    if n < 3 {
        return Err(Error::UnsupportedDimension { dim: n, reason: "the projective-conformal Laplacian needs n >= 3" });
    }
    u.ensure_valence(&valence::scalar())?;
    let c = yamabe_coefficient(n);
    let lap = riemannian::laplacian(metric, u)?;
    let vals = (0..metric.grid().len())
        .map(|p| c * lap.values()[p] + s.values()[p] * u.values()[p])
        .collect();
    Ok(TensorField::scalar(metric.grid(), vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::samples;

    #[test]
    fn levi_civita_structure_has_zero_phi() {
        let grid = TorusGrid::new(3, 8).unwrap();
        let g = samples::random_metric(&grid, 2, 0.2);
        let s = ProjectiveStructure::new(g.levi_civita().clone());
        assert!(phi(&s, &g).unwrap().max_abs() < 1e-14);
        assert_eq!(energy(&s, &g).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_shift_is_invisible() {
        let grid = TorusGrid::new(3, 16).unwrap();
        let g = samples::random_metric(&grid, 2, 0.2);
        let beta = samples::random_one_form(&grid, 3, 0.5);
        let s = samples::metrisable_structure(&g, &beta);
        assert!(phi(&s, &g).unwrap().max_abs() < 1e-11);
        assert!(energy(&s, &g).unwrap() < 1e-20);
    }

    #[test]
    fn flat_metrisable_has_zero_defect_and_full_locus() {
        let grid = TorusGrid::new(3, 8).unwrap();
        let g = Metric::flat(&grid);
        let beta = samples::random_one_form(&grid, 1, 0.4);
        let s = samples::metrisable_structure(&g, &beta);
        let v = conformal_defect(&s, &g).unwrap();
        assert!(v.max_abs() < 1e-12);
        assert!(conformal_locus(&s, &g, 1e-6).unwrap().iter().all(|&b| b));
        assert!(projective_scalar(&s, &g).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn weyl_scalar_with_zero_x() {
        let grid = TorusGrid::new(3, 16).unwrap();
        let g = samples::random_metric(&grid, 9, 0.2);
        let zero = TensorField::zeros(&grid, valence::vector(), Default::default());
        let sw = weyl_scalar(&g, &zero).unwrap();
        assert_eq!(sw.max_abs_diff(g.scalar_curvature()).unwrap(), 0.0);
    }

    #[test]
    fn conformal_family_matches_direct_evaluation() {
        let grid = TorusGrid::new(3, 16).unwrap();
        let g = samples::random_metric(&grid, 1, 0.2);
        let s = samples::random_structure(&grid, 2, 0.3);
        let f = samples::random_scalar(&grid, 3, 1, 0.3);
        let sample = ConformalFamily::new(&s, &g).unwrap().sample(&f).unwrap();
        let direct = ProjectiveState::new(&s, &g.conformal_change(&f).unwrap()).unwrap();
        assert!((sample.energy - direct.energy).abs() < 1e-10 * direct.energy);
        assert!((sample.volume - direct.volume).abs() < 1e-10 * direct.volume);
        assert!(sample.projective_scalar.max_abs_diff(&direct.projective_scalar).unwrap() < 1e-9);
    }

    #[test]
    fn laplacian_rejects_surfaces() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let g = Metric::flat(&grid);
        let s = samples::flat_structure(&grid);
        let u = TensorField::constant(&grid, 1.0);
        assert!(matches!(
            projective_conformal_laplacian_apply(&s, &g, &u),
            Err(Error::UnsupportedDimension { dim: 2, .. })
        ));
    }

    #[test]
    fn laplacian_on_constant_is_projective_scalar() {
        let grid = TorusGrid::new(3, 12).unwrap();
        let g = samples::random_metric(&grid, 1, 0.2);
        let s = samples::random_structure(&grid, 2, 0.3);
        let u = TensorField::constant(&grid, 1.0);
        let lu = projective_conformal_laplacian_apply(&s, &g, &u).unwrap();
        let sp = projective_scalar(&s, &g).unwrap();
        assert!(lu.max_abs_diff(&sp).unwrap() < 1e-12);
    }
}
