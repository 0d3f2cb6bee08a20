//! Numerical laboratory for the projectively invariant energy of Riemannian
//! metrics on flat tori `[0, 2 pi)^n`.
//!
//! Fields are sampled on a uniform periodic grid and differentiated
//! spectrally. On top of that sit the tensor algebra of the bundle
//! `E = S^2 T* (x) T`, Levi-Civita geometry, the projective quantities
//! (`Phi_g`, the energy, the projective scalar curvature, the conformal
//! defect), the first variation and its Euler-Lagrange tensor, and solvers for
//! conformal criticality.
//!
//! Conventions used throughout:
//! - `R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj} + G^i_{ku} G^u_{lj} - G^i_{lu} G^u_{kj}`,
//!   `Ric_{jk} = R^l_{jlk}`;
//! - `Delta_g = -div_g grad_g` (non-negative);
//! - in a covariant derivative the new index is slot 0;
//! - components are stored component-major, point index with axis 0 slowest.

pub mod algebra;
pub mod cubic;
pub mod error;
pub mod field;
pub mod grid;
pub mod projective;
pub mod report;
pub mod riemannian;
pub mod samples;
pub mod solvers;
pub mod suite;
pub mod tfld;
pub mod variation;

pub use cubic::CubicDifferential;
pub use error::{Error, Result};
pub use field::{valence, Symmetry, TensorField, Valence, Variance};
pub use grid::TorusGrid;
pub use projective::{ProjectiveState, ProjectiveStructure};
pub use report::{Check, Environment, Report};
pub use riemannian::{Connection, Metric};
pub use solvers::{SolveReport, SolveStatus};
pub use suite::{run_verify, SuiteConfig};
