//! Penalty-free shifted boundary method (SBM) on unfitted triangular grids.
//!
//! The true domain is immersed in a structured background triangulation; the
//! triangles lying inside it form the surrogate domain, and Dirichlet and
//! Neumann data are transferred from the true boundary onto the surrogate
//! boundary by a truncated Taylor expansion along the closest-point distance
//! vector. Boundary conditions are imposed weakly with the antisymmetric,
//! penalty-free Nitsche formulation.
//!
//! Geometry, meshing, quadrature, bases and the shift operator are generic
//! over the scalar type (see [`scalar`]); assembly and the linear solvers work
//! in `f64`. The aliases below name the `f64` instantiations.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod basis;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod manufactured;
pub mod mesh;
pub mod poly;
pub mod quadrature;
pub mod scalar;
pub mod selftest;
pub mod shift;
pub mod solve;
pub mod sparse;

pub use error::{Result, SbmError};
pub use geometry::{BcKind, Face};

pub type ReferenceBasis = basis::ReferenceBasis<f64>;
pub type ElementMap = basis::ElementMap<f64>;
pub type TrueDomain = geometry::TrueDomain<f64>;
pub type BoundarySample = geometry::BoundarySample<f64>;
pub type BackgroundMesh = mesh::BackgroundMesh<f64>;
pub type SurrogateMesh = mesh::SurrogateMesh<f64>;
pub type TriangleRule = quadrature::TriangleRule<f64>;
pub type SegmentRule = quadrature::SegmentRule<f64>;
pub type DerivTable = poly::DerivTable<f64>;
pub type Poly2 = poly::Poly2<f64>;
