//! Numerical toolkit for transversal Jacobi fields, the vanishing/parallel
//! decomposition of self-adjoint Jacobi families and dual foliations.
//!
//! The crate is organised bottom-up:
//!
//! * [`manifold`] evaluates metrics, connections and curvature on a small
//!   catalog of explicit Riemannian manifolds (coordinate charts and
//!   left-invariant frames on Lie groups).
//! * [`geodesic`] integrates geodesics and parallel transport.
//! * [`jacobi`] integrates Jacobi fields in a parallel orthonormal frame of
//!   the normal bundle and assembles self-adjoint families.
//! * [`transversal`] splits a family along a subfamily and checks the
//!   transversal Jacobi equation together with its O'Neill-type term.
//! * [`decomposition`] extracts the vanishing and parallel subfamilies.
//! * [`foliation`] represents singular Riemannian foliations by generating
//!   vector fields, traces dual leaves and checks flats.
//! * [`cli`] and [`suite`] wire everything into reports.

pub mod cli;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod foliation;
pub mod geodesic;
pub mod jacobi;
pub mod linalg;
pub mod manifold;
pub mod ode;
pub mod report;
pub mod sampling;
pub mod suite;
pub mod transversal;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use foliation::FoliationSpec;
pub use geodesic::GeodesicPath;
pub use jacobi::{JacobiFamily, JacobiField, NormalFrame};
pub use manifold::Manifold;

/// Version string embedded in every report.
pub const TOOL_VERSION: &str = concat!("dualfol ", env!("CARGO_PKG_VERSION"));
