//! Isogeometric Galerkin boundary elements for time-harmonic acoustic
//! scattering by closed multi-patch NURBS surfaces.

pub mod geometry;
pub mod quadrature;
pub mod spline;
pub mod dofmap;
pub mod kernels;
pub mod mesh;
pub mod assembly;
pub mod operator;
pub mod oracle;
pub mod gmres;
mod chebyshev;
pub mod h2;
pub mod potential;
pub mod scattering;
