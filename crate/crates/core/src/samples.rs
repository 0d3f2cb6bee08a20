//! Seeded test instances: metrics, sections and projective structures.
//!
//! Everything here is deterministic in the seed. Metrics are kept at band
//! limit 1 so that their inverses and volume densities have rapidly decaying
//! spectra and nonlinear identities hold near machine precision.

use crate::algebra;
use crate::field::{valence, Symmetry, TensorField};
use crate::grid::TorusGrid;
use crate::projective::ProjectiveStructure;
use crate::riemannian::{Connection, Metric};

/// SplitMix64 step, used to derive independent sub-seeds.
pub fn subseed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `exp(2w) (delta + S)` with `S` symmetric and `w` scalar, both band-limited
/// at frequency 1 and bounded by `amplitude`; positive definite for
/// `amplitude < 1 / n`.
pub fn random_metric(grid: &TorusGrid, seed: u64, amplitude: f64) -> Metric {
    let n = grid.dim();
    assert!(amplitude * n as f64 <= 0.95, "amplitude too large for a guaranteed SPD metric");
    let s = grid
        .random_band_limited(subseed(seed, 0), valence::covariant2(), Symmetry::TotallySymmetric, 1, amplitude)
        .expect("valid band limit");
    let w = grid
        .random_band_limited(subseed(seed, 1), valence::scalar(), Symmetry::None, 1, amplitude)
        .expect("valid band limit");
    let mut g = s;
    for a in 0..n {
        g.component_mut(a * n + a).iter_mut().for_each(|x| *x += 1.0);
    }
    let e: Vec<f64> = w.values().iter().map(|x| (2.0 * x).exp()).collect();
    Metric::new(g.mul_scalar_field(&e)).expect("random metric is positive definite")
}

/// Band-limited scalar field (frequency <= `max_freq`).
pub fn random_scalar(grid: &TorusGrid, seed: u64, max_freq: usize, amplitude: f64) -> TensorField {
    grid.random_band_limited(seed, valence::scalar(), Symmetry::None, max_freq, amplitude)
        .expect("valid band limit")
}

pub fn random_one_form(grid: &TorusGrid, seed: u64, amplitude: f64) -> TensorField {
    grid.random_band_limited(seed, valence::one_form(), Symmetry::None, 2, amplitude)
        .expect("valid band limit")
}

pub fn random_vector(grid: &TorusGrid, seed: u64, amplitude: f64) -> TensorField {
    grid.random_band_limited(seed, valence::vector(), Symmetry::None, 2, amplitude)
        .expect("valid band limit")
}

/// Symmetric `(0,2)` field.
pub fn random_symmetric2(grid: &TorusGrid, seed: u64, amplitude: f64) -> TensorField {
    grid.random_band_limited(seed, valence::covariant2(), Symmetry::TotallySymmetric, 2, amplitude)
        .expect("valid band limit")
}

/// Section of `E` (symmetric lower pair), band limit 2.
pub fn random_e_section(grid: &TorusGrid, seed: u64, amplitude: f64) -> TensorField {
    grid.random_band_limited(seed, valence::e_section(), Symmetry::SymmetricLowerPair, 2, amplitude)
        .expect("valid band limit")
}

/// Section of `E_0`.
pub fn random_e0_section(grid: &TorusGrid, seed: u64, amplitude: f64) -> TensorField {
    algebra::trace_free_part(&random_e_section(grid, seed, amplitude)).expect("E-section")
}

/// `D + Phi` with `D` the Levi-Civita connection of a random background
/// metric and `Phi` a random section of `E`.
pub fn random_structure(grid: &TorusGrid, seed: u64, amplitude: f64) -> ProjectiveStructure {
    let background = random_metric(grid, subseed(seed, 10), 0.1);
    let phi = random_e_section(grid, subseed(seed, 11), amplitude);
    ProjectiveStructure::new(background.levi_civita().perturbed(&phi).expect("E-section"))
}

/// The structure of `metric` shifted by `Sym(beta)`; metrisable by `metric`.
pub fn metrisable_structure(metric: &Metric, beta: &TensorField) -> ProjectiveStructure {
    let shift = algebra::sym(beta).expect("one-form");
    ProjectiveStructure::new(metric.levi_civita().perturbed(&shift).expect("E-section"))
}

/// `LC(metric) + eps * Phi` for a random `Phi`.
pub fn near_metrisable_structure(metric: &Metric, seed: u64, eps: f64) -> ProjectiveStructure {
    let phi = random_e_section(metric.grid(), seed, eps);
    ProjectiveStructure::new(metric.levi_civita().perturbed(&phi).expect("E-section"))
}

/// The flat structure of the chart.
pub fn flat_structure(grid: &TorusGrid) -> ProjectiveStructure {
    ProjectiveStructure::new(Connection::flat(grid))
}
