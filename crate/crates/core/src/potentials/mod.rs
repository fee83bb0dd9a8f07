//! Volume, Poisson, single-layer and double-layer potentials.
//!
//! Every kernel reduces to the heat kernel in the transformed time `z = b(t, τ)`, where
//! `a(τ) dτ = -dz`. Volume and Poisson integrals use tensor rules on the support of the
//! density; layer potentials on plane curves use nested adaptive quadrature, with the
//! time integral written in `ρ = r²/(4z)` so that the kernel becomes `e^{-ρ}`.

mod indicator;
mod layer;
mod limits;
mod smooth;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{Assumption, TimeCoefficient};
use crate::density::{BoundaryDensity, SpaceTimeDensity, SpatialProfile, VolumeDensity};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryGeometry, Point};

pub use indicator::poisson_of_indicator;
pub use layer::{
    eval_adjoint_double_layer_direct, eval_double_layer_direct, eval_single_layer_direct,
    eval_single_layer_normal_derivative,
};
pub use limits::{
    double_layer_boundary_limit, richardson_limit, single_layer_gradient_limit, LimitEstimate, Side,
};
pub use smooth::{heat_semigroup, heat_semigroup_derivative};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PotentialKind {
    V,
    P,
    S,
    D,
}

impl PotentialKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "V" => Some(PotentialKind::V),
            "P" => Some(PotentialKind::P),
            "S" => Some(PotentialKind::S),
            "D" => Some(PotentialKind::D),
            _ => None,
        }
    }
}

/// Discretization parameters shared with the boundary integral solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub m_space: usize,
    pub m_time: usize,
    /// Grading exponent of the time mesh.
    pub q: f64,
    /// Relative tolerance of the adaptive quadratures.
    pub tolerance: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            m_space: 64,
            m_time: 32,
            q: 3.0,
            tolerance: 1e-10,
        }
    }
}

/// A potential bound to its coefficient, geometry and density.
#[derive(Debug, Clone)]
pub struct PotentialField {
    kind: PotentialKind,
    coefficient: TimeCoefficient,
    geometry: BoundaryGeometry,
    density: SpaceTimeDensity,
    resolution: Resolution,
}

impl PotentialField {
    pub fn new(
        kind: PotentialKind,
        coefficient: TimeCoefficient,
        geometry: BoundaryGeometry,
        density: SpaceTimeDensity,
        resolution: Resolution,
    ) -> Result<Self> {
        let expected = match kind {
            PotentialKind::V => "volume",
            PotentialKind::P => "initial",
            PotentialKind::S | PotentialKind::D => "boundary",
        };
        if density.kind_name() != expected {
            return Err(Error::KindMismatch {
                expected,
                got: density.kind_name(),
            });
        }
        density.validate(&geometry)?;
        match kind {
            PotentialKind::V | PotentialKind::S | PotentialKind::D => {
                if coefficient.assumption() != Assumption::A {
                    return Err(Error::Assumption(format!(
                        "the {kind:?} potential needs assumption (a) on the coefficient"
                    )));
                }
            }
            PotentialKind::P => {
                if coefficient.assumption() == Assumption::Neither {
                    return Err(Error::Assumption(
                        "the Poisson potential needs a1(t) > 0 for t > 0".into(),
                    ));
                }
            }
        }
        if matches!(kind, PotentialKind::S | PotentialKind::D) && !geometry.is_curve() {
            return Err(Error::UnsupportedKind(format!(
                "{kind:?} layer potentials are implemented for plane curves only"
            )));
        }
        Ok(PotentialField {
            kind,
            coefficient,
            geometry,
            density,
            resolution,
        })
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn coefficient(&self) -> &TimeCoefficient {
        &self.coefficient
    }

    pub fn geometry(&self) -> &BoundaryGeometry {
        &self.geometry
    }

    pub fn density(&self) -> &SpaceTimeDensity {
        &self.density
    }

    pub fn resolution(&self) -> &Resolution {
        &self.resolution
    }

    pub fn dimension(&self) -> usize {
        self.geometry.dimension()
    }

    pub(crate) fn volume_density(&self) -> Result<&VolumeDensity> {
        match &self.density {
            SpaceTimeDensity::Volume(v) => Ok(v),
            other => Err(Error::KindMismatch {
                expected: "volume",
                got: other.kind_name(),
            }),
        }
    }

    pub(crate) fn initial_density(&self) -> Result<&SpatialProfile> {
        match &self.density {
            SpaceTimeDensity::Initial(p) => Ok(p),
            other => Err(Error::KindMismatch {
                expected: "initial",
                got: other.kind_name(),
            }),
        }
    }

    pub(crate) fn boundary_density(&self) -> Result<&BoundaryDensity> {
        match &self.density {
            SpaceTimeDensity::Boundary(b) => Ok(b),
            other => Err(Error::KindMismatch {
                expected: "boundary",
                got: other.kind_name(),
            }),
        }
    }

    /// Evaluates the potential at `(x, t)`.
    pub fn eval(&self, x: &Point, t: f64) -> Result<f64> {
        match self.kind {
            PotentialKind::V => eval_volume(self, x, t),
            PotentialKind::P => eval_poisson(self, x, t),
            PotentialKind::S => eval_single_layer(self, x, t),
            PotentialKind::D => eval_double_layer(self, x, t),
        }
    }

    /// Evaluates at many points in parallel.
    pub fn eval_many(&self, points: &[(Point, f64)]) -> Result<Vec<f64>> {
        points.par_iter().map(|(x, t)| self.eval(x, t.to_owned())).collect()
    }
}

/// Derivative of a volume or Poisson potential in `x` along `v` (not necessarily unit).
pub fn eval_directional_derivative(field: &PotentialField, x: &Point, t: f64, v: &Point) -> Result<f64> {
    match field.kind() {
        PotentialKind::V => smooth::volume_derivative(field, x, t, v),
        PotentialKind::P => smooth::poisson_derivative(field, x, t, v),
        kind => Err(Error::UnsupportedKind(format!(
            "spatial derivatives are available for V and P, not {kind:?}"
        ))),
    }
}

/// `∫₀ᵗ ∫_Ω ε(x - ξ, b(t, τ)) f(ξ, τ) dξ dτ`.
pub fn eval_volume(field: &PotentialField, x: &Point, t: f64) -> Result<f64> {
    smooth::volume(field, x, t)
}

/// `∫_Ω ε(x - ξ, a1(t)) φ(ξ) dξ`, equal to `φ(x)` at `t = 0`.
pub fn eval_poisson(field: &PotentialField, x: &Point, t: f64) -> Result<f64> {
    smooth::poisson(field, x, t)
}

/// Single-layer potential at any point off or on the boundary.
pub fn eval_single_layer(field: &PotentialField, x: &Point, t: f64) -> Result<f64> {
    layer::single_layer(field, x, t)
}

/// Double-layer potential at a point off the boundary; on the boundary it returns the
/// direct (principal) value.
pub fn eval_double_layer(field: &PotentialField, x: &Point, t: f64) -> Result<f64> {
    layer::double_layer(field, x, t)
}
