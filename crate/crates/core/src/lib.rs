//! Finite-dimensional approximation of the Seiberg-Witten gradient flow over
//! the Picard torus of flat model 3-manifolds.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: flat model geometries, Picard coordinates, lattice action.
//! * [`dirac`]: closed-form spectra of the Dirac family and of curl, gaps,
//!   projection derivatives.
//! * [`sections`]: spectral cut sections, the perturbed operator `D'`, the
//!   bundles `F_n`, `W_n` and the dimension ledger.
//! * [`flow`]: the approximate flow on `F_n x W_n`, norms and integration.
//! * [`conley`]: isolating neighbourhoods, index pairs and integer homology.
//! * [`invariants`]: exact invariant arithmetic (`h`, `n`, `kappa`, bounds).
//! * [`cli`]: configuration-driven pipeline and reports.
//!
//! Clifford convention: `rho(dx^j) = i sigma_j`.

pub mod cli;
pub mod conley;
pub mod dirac;
pub mod flow;
pub mod geometry;
pub mod invariants;
pub mod linalg;
pub mod sections;
