//! Poisson integral of the indicator of a convex plane domain.

use std::f64::consts::PI;

use crate::coeff::TimeCoefficient;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryGeometry, Location, Point};
use crate::quadrature::Adaptive;

/// `P(1_Ω)(x, t) = ∫_Ω ε(x - ξ, a1(t)) dξ` for `x` in the closure of a convex plane domain,
/// written in polar coordinates about `x`: `(1/2π) ∫ (1 - exp(-R(θ)²/(4 a1(t)))) dθ`
/// with `R(θ)` the distance to the boundary along direction `θ`.
pub fn poisson_of_indicator(geometry: &BoundaryGeometry, c: &TimeCoefficient, x: &Point, t: f64) -> Result<f64> {
    if !geometry.is_curve() {
        return Err(Error::UnsupportedKind("indicator potential needs a plane domain".into()));
    }
    let a1t = c.eval_a1(t)?;
    let location = geometry.contains(x);
    if t == 0.0 || a1t <= 0.0 {
        return Ok(match location {
            Location::Inside => 1.0,
            Location::OnBoundary => 0.5,
            Location::Outside => 0.0,
        });
    }
    if location == Location::Outside {
        return Err(Error::Geometry("indicator potential evaluated outside the domain".into()));
    }
    let mut failure = None;
    let integrand = |theta: f64| {
        let dir = [theta.cos(), theta.sin(), 0.0];
        match geometry.ray_exit_distance(x, &dir) {
            Ok(r) => -(-(r * r) / (4.0 * a1t)).exp_m1(),
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };
    let breaks: Vec<f64> = (0..=16).map(|k| 2.0 * PI * k as f64 / 16.0).collect();
    let value = Adaptive::new(1e-15, 1e-13)
        .with_max_intervals(4000)
        .integrate_with_breaks(integrand, &breaks)?
        .value;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(value / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_of_circle_matches_radial_closed_form() {
        let g = BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap();
        let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
        let v = poisson_of_indicator(&g, &c, &[0.0; 3], 0.3).unwrap();
        assert!((v - (1.0 - (-1.0f64 / 1.2).exp())).abs() < 1e-14);
    }

    #[test]
    fn boundary_value_tends_to_half() {
        let g = BoundaryGeometry::ellipse([0.0, 0.0], [1.5, 1.0]).unwrap();
        let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
        let v = poisson_of_indicator(&g, &c, &[1.5, 0.0, 0.0], 1e-6).unwrap();
        assert!((v - 0.5).abs() < 1e-3);
    }
}
