//! Numerical laboratory for quantitative unique continuation of divergence-form
//! elliptic equations `div(A(x)∇w) = 0`.
//!
//! The crate samples solutions on uniform grids and measures the objects that
//! quantitative unique continuation is built from: frequency functions and
//! doubling indices, modified Harnack chains and corkscrew points inside nodal
//! domains, boundary Harnack and Carleson constants for ratios of solutions that
//! share a nodal set, and harmonic measure on a single nodal domain.
//!
//! Modules, bottom-up:
//!
//! - [`field`]: grids, scalar and coefficient fields, interpolation, ball suprema, `.nfield` files.
//! - [`solver`]: divergence-form discretization, residual certificates, Dirichlet solves.
//! - [`nodal`]: zero sets, nodal domains, distance to the zero set, geometric certificates.
//! - [`frequency`]: frequency function, doubling index and the certificate suite.
//! - [`harnack`]: enlarge step and modified Harnack chains.
//! - [`boundary`]: ratio fields, boundary Harnack, Carleson, Hölder and Liouville probes.
//! - [`measure`]: harmonic measure and its comparison with `|∇u₀| dH^{n-1}`.
//! - [`scenario`]: scenario registry, configuration, suite runner and report bundle.

pub mod boundary;
pub mod error;
pub mod field;
pub mod frequency;
pub mod harnack;
pub mod measure;
pub mod nodal;
pub mod scenario;
pub mod solver;
pub mod util;

pub use error::{Error, Result};
pub use field::{Ball, CoefficientField, GridSpec, Point, ScalarField};
pub use nodal::{DistanceField, NodalDomain, ZeroSet};
pub use solver::{DirichletProblem, Region, SolveReport};
