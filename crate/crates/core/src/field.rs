//! Tensor fields over a [`TorusGrid`].
//!
//! Components of a rank-`r` field are stored component-major: the scalar
//! field for multi-index `(i_0, .., i_{r-1})` occupies
//! `data[c * npts .. (c + 1) * npts]` with `c = sum_s i_s * n^(r-1-s)`
//! (row-major over the slots in valence order). By convention the upper
//! indices of the named tensors come first: `Phi^i_{jk}` lives at slots
//! `[i, j, k]` with valence `[Up, Down, Down]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

pub const MAX_RANK: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    #[default]
    None,
    /// Symmetric in the last two slots, e.g. `Phi^i_{jk} = Phi^i_{kj}`.
    SymmetricLowerPair,
    /// Symmetric under every permutation of the slots.
    TotallySymmetric,
}

/// Ordered list of index variances.
pub type Valence = Vec<Variance>;

pub mod valence {
    use super::{Valence, Variance::*};

    pub fn scalar() -> Valence {
        vec![]
    }
    pub fn vector() -> Valence {
        vec![Up]
    }
    pub fn one_form() -> Valence {
        vec![Down]
    }
    pub fn covariant2() -> Valence {
        vec![Down, Down]
    }
    pub fn contravariant2() -> Valence {
        vec![Up, Up]
    }
    pub fn endomorphism() -> Valence {
        vec![Up, Down]
    }
    /// Sections of `S^2(T*M) (x) TM`: `Phi^i_{jk}`.
    pub fn e_section() -> Valence {
        vec![Up, Down, Down]
    }
    pub fn covariant3() -> Valence {
        vec![Down, Down, Down]
    }
    /// `R^i_{jkl}`.
    pub fn curvature() -> Valence {
        vec![Up, Down, Down, Down]
    }
}

pub(crate) fn valence_string(v: &[Variance]) -> String {
    let s: Vec<&str> = v
        .iter()
        .map(|x| match x {
            Variance::Up => "up",
            Variance::Down => "down",
        })
        .collect();
    format!("[{}]", s.join(","))
}

#[derive(Clone, Debug)]
pub struct TensorField {
    grid: TorusGrid,
    valence: Valence,
    symmetry: Symmetry,
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: &TorusGrid, valence: Valence, symmetry: Symmetry) -> Self {
        let len = grid.len() * grid.dim().pow(valence.len() as u32);
        TensorField { grid: grid.clone(), valence, symmetry, data: vec![0.0; len] }
    }

    /// Builds a field from component-major data and enforces the declared symmetry.
    pub fn from_components(
        grid: &TorusGrid,
        valence: Valence,
        symmetry: Symmetry,
        data: Vec<f64>,
    ) -> Result<Self> {
        if valence.len() > MAX_RANK {
            return Err(Error::ValenceOverflow(valence.len()));
        }
        let expected = grid.len() * grid.dim().pow(valence.len() as u32);
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "component data has length {}, expected {expected}",
                data.len()
            )));
        }
        let mut f = TensorField { grid: grid.clone(), valence, symmetry, data };
        f.symmetrize();
        Ok(f)
    }

    pub fn scalar(grid: &TorusGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "scalar field length mismatch");
        TensorField { grid: grid.clone(), valence: vec![], symmetry: Symmetry::None, data: values }
    }

    pub fn constant(grid: &TorusGrid, value: f64) -> Self {
        Self::scalar(grid, vec![value; grid.len()])
    }

    /// Scalar field from a function of the chart coordinates.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|p| f(&grid.coords(p))).collect();
        Self::scalar(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }
    pub fn valence(&self) -> &[Variance] {
        &self.valence
    }
    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }
    pub fn rank(&self) -> usize {
        self.valence.len()
    }
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }
    pub fn n_components(&self) -> usize {
        self.grid.dim().pow(self.rank() as u32)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Values of a scalar field.
    pub fn values(&self) -> &[f64] {
        debug_assert!(self.valence.is_empty());
        &self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn component_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let n = self.dim();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    pub fn get(&self, point: usize, idx: &[usize]) -> f64 {
        self.data[self.component_index(idx) * self.grid.len() + point]
    }

    pub fn set(&mut self, point: usize, idx: &[usize], value: f64) {
        let c = self.component_index(idx);
        let n = self.grid.len();
        self.data[c * n + point] = value;
    }

    /// Re-tags the field; the new symmetry is enforced.
    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self.symmetrize();
        self
    }

    pub fn ensure_valence(&self, expected: &[Variance]) -> Result<()> {
        if self.valence != expected {
            return Err(Error::ValenceMismatch {
                expected: valence_string(expected),
                got: valence_string(&self.valence),
            });
        }
        Ok(())
    }

    pub fn ensure_same_grid(&self, other: &TensorField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn ensure_compatible(&self, other: &TensorField) -> Result<()> {
        self.ensure_same_grid(other)?;
        other.ensure_valence(&self.valence)
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &TensorField) -> Result<TensorField> {
        self.ensure_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + a * y).collect();
        let symmetry = if self.symmetry == other.symmetry { self.symmetry } else { Symmetry::None };
        Ok(TensorField { grid: self.grid.clone(), valence: self.valence.clone(), symmetry, data })
    }

    pub fn scale(&self, a: f64) -> TensorField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= a);
        out
    }

    /// Multiplies every component pointwise by a scalar field.
    pub fn mul_scalar_field(&self, s: &[f64]) -> TensorField {
        let npts = self.grid.len();
        assert_eq!(s.len(), npts);
        let mut out = self.clone();
        out.data.chunks_mut(npts).for_each(|c| c.iter_mut().zip(s).for_each(|(x, y)| *x *= y));
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Max over points and components of `|self - other|`.
    pub fn max_abs_diff(&self, other: &TensorField) -> Result<f64> {
        self.ensure_compatible(other)?;
        Ok(self.data.iter().zip(&other.data).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
    }

    /// Pointwise component-max norm as a scalar field.
    pub fn pointwise_max_abs(&self) -> Vec<f64> {
        let npts = self.grid.len();
        let mut out = vec![0.0_f64; npts];
        for c in self.data.chunks(npts) {
            out.iter_mut().zip(c).for_each(|(o, x)| *o = o.max(x.abs()));
        }
        out
    }

    /// Largest deviation from the declared symmetry over all components.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        self.for_each_permutation_pair(|a, b| {
            let npts = self.grid.len();
            let (x, y) = (&self.data[a * npts..(a + 1) * npts], &self.data[b * npts..(b + 1) * npts]);
            for (u, v) in x.iter().zip(y) {
                worst = worst.max((u - v).abs());
            }
        });
        worst
    }

    fn for_each_permutation_pair(&self, mut f: impl FnMut(usize, usize)) {
        let r = self.rank();
        let n = self.dim();
        let ncomp = self.n_components();
        let swaps: Vec<(usize, usize)> = match self.symmetry {
            Symmetry::None => vec![],
            Symmetry::SymmetricLowerPair if r >= 2 => vec![(r - 2, r - 1)],
            Symmetry::SymmetricLowerPair => vec![],
            Symmetry::TotallySymmetric => (0..r.saturating_sub(1)).map(|s| (s, s + 1)).collect(),
        };
        let mut idx = vec![0usize; r];
        for c in 0..ncomp {
            unflatten(c, n, &mut idx);
            for &(s, t) in &swaps {
                let mut j = idx.clone();
                j.swap(s, t);
                let c2 = j.iter().fold(0, |acc, &i| acc * n + i);
                if c2 > c {
                    f(c, c2);
                }
            }
        }
    }

    /// Projects the components onto the declared symmetry by averaging over
    /// the slot permutations it generates.
    pub fn symmetrize(&mut self) {
        let r = self.rank();
        let n = self.dim();
        let npts = self.grid.len();
        let perms: Vec<Vec<usize>> = match self.symmetry {
            Symmetry::None => return,
            Symmetry::SymmetricLowerPair if r < 2 => return,
            Symmetry::SymmetricLowerPair => {
                let id: Vec<usize> = (0..r).collect();
                let mut sw = id.clone();
                sw.swap(r - 2, r - 1);
                vec![id, sw]
            }
            Symmetry::TotallySymmetric => permutations(r),
        };
        let ncomp = self.n_components();
        let mut out = vec![0.0; self.data.len()];
        let mut idx = vec![0usize; r];
        let w = 1.0 / perms.len() as f64;
        for c in 0..ncomp {
            unflatten(c, n, &mut idx);
            let dst = &mut out[c * npts..(c + 1) * npts];
            for p in &perms {
                let c2 = p.iter().fold(0, |acc, &s| acc * n + idx[s]);
                let src = &self.data[c2 * npts..(c2 + 1) * npts];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += w * s);
            }
        }
        self.data = out;
    }
}

pub(crate) fn unflatten(mut c: usize, n: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = c % n;
        c /= n;
    }
}

fn permutations(r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(r - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, r - 1);
            out.push(q);
        }
    }
    out
}

const POINT_CHUNK: usize = 256;

/// Evaluates `kernel` at every grid point. The kernel receives, for each
/// input, that input's components at the point (row-major multi-index
/// order) and writes the output components.
pub(crate) fn pointwise<F>(
    grid: &TorusGrid,
    inputs: &[&TensorField],
    valence: Valence,
    symmetry: Symmetry,
    kernel: F,
) -> TensorField
where
    F: Fn(&[&[f64]], &mut [f64]) + Sync,
{
    for f in inputs {
        assert!(f.grid() == grid, "pointwise: input on a different grid");
    }
    let npts = grid.len();
    let ncomp_out = grid.dim().pow(valence.len() as u32);
    let ncomp_in: Vec<usize> = inputs.iter().map(|f| f.n_components()).collect();
    let n_chunks = npts.div_ceil(POINT_CHUNK);
    // Each chunk is gathered to point-major order, evaluated, and returned
    // point-major; the scatter back to component-major is sequential.
    let blocks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let first = chunk * POINT_CHUNK;
            let len = POINT_CHUNK.min(npts - first);
            let bufs: Vec<Vec<f64>> = inputs
                .iter()
                .zip(&ncomp_in)
                .map(|(f, &nc)| {
                    let mut b = vec![0.0; len * nc];
                    for c in 0..nc {
                        let src = &f.data[c * npts + first..c * npts + first + len];
                        for (off, v) in src.iter().enumerate() {
                            b[off * nc + c] = *v;
                        }
                    }
                    b
                })
                .collect();
            let mut out = vec![0.0; len * ncomp_out];
            let mut views: Vec<&[f64]> = Vec::with_capacity(bufs.len());
            for (off, out_p) in out.chunks_mut(ncomp_out).enumerate() {
                views.clear();
                views.extend(bufs.iter().zip(&ncomp_in).map(|(b, &nc)| &b[off * nc..(off + 1) * nc]));
                kernel(&views, out_p);
            }
            out
        })
        .collect();
    let mut data = vec![0.0; npts * ncomp_out];
    for (chunk, block) in blocks.iter().enumerate() {
        let first = chunk * POINT_CHUNK;
        let len = block.len() / ncomp_out.max(1);
        for c in 0..ncomp_out {
            let dst = &mut data[c * npts + first..c * npts + first + len];
            for (off, d) in dst.iter_mut().enumerate() {
                *d = block[off * ncomp_out + c];
            }
        }
    }
    let mut f = TensorField { grid: grid.clone(), valence, symmetry, data };
    f.symmetrize();
    f
}
