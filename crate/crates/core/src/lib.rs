//! Potential theory for the degenerate parabolic operator `u_t - a(t) Δu`.

pub mod bie;
pub mod coeff;
pub mod density;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod nystrom;
pub mod potentials;
pub mod quadrature;
pub mod special;
pub mod trace;

pub use coeff::{Assumption, CoefficientKind, TimeCoefficient};
pub use error::{Error, Result};
pub use geometry::{BoundaryGeometry, BoundaryNode, Location, Point, Shape};
pub use kernel::{eval_kernel, eval_kernel_gradient, eval_normal_derivative, KernelPoint};
