//! Geometric quantum potentials for submanifolds of Euclidean space.
//!
//! A free particle squeezed onto an `m`-dimensional surface in `R^n` picks up
//! a curvature-dependent potential `V_q` on top of the Laplace–Beltrami
//! kinetic term. This crate computes that potential along several independent
//! routes and reproduces it spectrally:
//!
//! * [`geometry`]: charts, normal frames, curvature forms and principal
//!   curvatures, plus the numerical divergence of the normal field.
//! * [`potentials`]: closed forms of `V_q` (hypersurfaces, curves, general
//!   codimension) and the stereographic operator identity on the sphere.
//! * [`adapted`]: offset surfaces, area ratios, the normal-momentum
//!   constraint replay and the determinant machinery behind the general
//!   formula.
//! * [`solver`]: finite-difference eigensolvers for the surface Hamiltonian
//!   and for the Dirichlet layer of half-width `delta` around the surface.
//!
//! Units are `hbar = 1`, mass `= 1` unless a caller rescales by `hbar^2`.
//!
//! ```
//! use geomq::geometry::{registry, curvature_forms};
//! use geomq::potentials::vq_codim1;
//!
//! let chart = registry::build("cylinder:R=1").unwrap();
//! let data = curvature_forms(&chart, &[0.0, 0.0]).unwrap();
//! let k = data.principal.as_ref().unwrap();
//! assert!((k[0] - 1.0).abs() < 1e-12 && k[1].abs() < 1e-12);
//! assert!((vq_codim1(k) + 0.125).abs() < 1e-12);
//! ```

pub mod adapted;
mod error;
pub mod geometry;
pub mod numeric;
pub mod potentials;
pub mod random;
pub mod solver;

pub use error::{Error, Result};
