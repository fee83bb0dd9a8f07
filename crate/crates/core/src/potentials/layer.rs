//! Layer potentials on plane curves.
//!
//! With `z = r²/(4ρ)` the time integral of the heat kernel becomes
//! `ε(r, z) dz = e^{-ρ}/(4πρ) dρ` and `⟨d, v⟩/(2z) ε(r, z) dz = ⟨d, v⟩/r² · e^{-ρ}/(2π) dρ`,
//! `ρ` running from `r²/(4 a1(t))` to infinity. The density is evaluated at
//! `σ = a1(τ) = a1(t) - z`.

use std::f64::consts::PI;

use crate::density::BoundaryDensity;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm2, sub, BoundaryGeometry, Point};
use crate::quadrature::Adaptive;
use crate::special::exp_integral_e1;

use super::PotentialField;

/// Beyond this `ρ` the factor `e^{-ρ}` is negligible.
const RHO_SPAN: f64 = 40.0;
const RHO_CUTOFF: f64 = 700.0;
/// Below this distance (relative to the diameter) the curvature limit replaces
/// `⟨x - ξ, ν⟩/|x - ξ|²`.
const DIAGONAL_RADIUS: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
enum Kernel {
    Single,
    /// `⟨x - ξ, ν(ξ)⟩/(2z) ε`.
    Double,
    /// `-⟨x - ξ, v⟩/(2z) ε`, the derivative of the single layer in the direction `v`.
    Gradient(Point),
}

struct Layer<'a> {
    geometry: &'a BoundaryGeometry,
    density: &'a BoundaryDensity,
    field: &'a PotentialField,
    a1t: f64,
    t: f64,
    tol: f64,
}

impl<'a> Layer<'a> {
    fn new(field: &'a PotentialField, t: f64) -> Result<Option<Self>> {
        let a1t = field.coefficient().eval_a1(t)?;
        let density = field.boundary_density()?;
        if t == 0.0 || density.is_zero() {
            return Ok(None);
        }
        if !(a1t > 0.0) {
            return Err(Error::Assumption(format!("a1({t}) = {a1t} is not positive")));
        }
        Ok(Some(Layer {
            geometry: field.geometry(),
            density,
            field,
            a1t,
            t,
            tol: field.resolution().tolerance,
        }))
    }

    /// `∫_{ρ0}^∞ w(ρ) e^{-ρ} φ(s, τ(ρ)) dρ` with `w = 1/(4πρ)` (single) or `1/(2π)`.
    fn time_integral(&self, s: f64, rho0: f64, single: bool) -> Result<f64> {
        if rho0 > RHO_CUTOFF {
            return Ok(0.0);
        }
        if let BoundaryDensity::Constant(c) = self.density {
            return Ok(if single {
                c * exp_integral_e1(rho0.max(1e-300)) / (4.0 * PI)
            } else {
                c * (-rho0).exp() / (2.0 * PI)
            });
        }
        let c = self.field.coefficient();
        let phi = |rho: f64| {
            let sigma = (self.a1t * (1.0 - rho0 / rho)).max(0.0);
            let tau = c.tau_of_sigma(sigma, self.t);
            self.density.eval(s, tau, sigma)
        };
        let quad = Adaptive::new(1e-16, 0.1 * self.tol).with_max_intervals(400);
        let mut total = 0.0;
        let rho0 = rho0.max(1e-280);
        let split = rho0.max(1.0);
        if rho0 < 1.0 {
            // ρ = e^v absorbs the 1/ρ weight of the single layer near ρ0 → 0
            let g = |v: f64| {
                let rho = v.exp();
                let w = if single { 1.0 / (4.0 * PI) } else { rho / (2.0 * PI) };
                w * (-rho).exp() * phi(rho)
            };
            total += quad.integrate(g, rho0.ln(), 0.0)?.value;
        }
        let h = |rho: f64| {
            let w = if single { 1.0 / (4.0 * PI * rho) } else { 1.0 / (2.0 * PI) };
            w * (-rho).exp() * phi(rho)
        };
        total += quad.integrate(h, split, split + RHO_SPAN)?.value;
        Ok(total)
    }

    /// Boundary integral over one period starting at `s0`, where `x` is closest to the curve.
    fn integrate(&self, x: &Point, s0: f64, kernel: Kernel, on_boundary: bool) -> Result<f64> {
        let diag = DIAGONAL_RADIUS * self.geometry.diameter();
        let integrand = |s: f64| -> f64 {
            let node = self.geometry.boundary_point(s);
            let d = sub(x, &node.point);
            let r2 = norm2(&d);
            let rho0 = r2 / (4.0 * self.a1t);
            let value = match kernel {
                Kernel::Single => self.time_integral(s, rho0, true),
                Kernel::Double | Kernel::Gradient(_) => {
                    let geometric = if on_boundary && r2 < diag * diag {
                        // both ⟨x - ξ, ν(ξ)⟩/r² and -⟨x - ξ, ν(x)⟩/r² tend to -κ/2
                        -0.5 * self.geometry.curvature(s0)
                    } else {
                        match kernel {
                            Kernel::Double => dot(&d, &node.normal) / r2,
                            Kernel::Gradient(v) => -dot(&d, &v) / r2,
                            Kernel::Single => unreachable!(),
                        }
                    };
                    self.time_integral(s, rho0, false).map(|v| geometric * v)
                }
            };
            // errors inside the closure are surfaced as NaN and reported below
            value.unwrap_or(f64::NAN) * node.weight
        };
        let period = 2.0 * PI;
        let breaks: Vec<f64> = (0..=8).map(|k| s0 + period * k as f64 / 8.0).collect();
        let quad = Adaptive::new(1e-2 * self.tol, self.tol).with_max_intervals(6000);
        let result = quad.integrate_with_breaks(integrand, &breaks)?;
        if !result.value.is_finite() {
            return Err(Error::Numerical("layer-potential time integral failed".into()));
        }
        Ok(result.value)
    }
}

/// Parameter of the boundary point nearest to `x` and the distance to it.
pub(crate) fn closest_parameter(geometry: &BoundaryGeometry, x: &Point) -> (f64, f64) {
    let samples = 720;
    let step = 2.0 * PI / samples as f64;
    let dist2 = |s: f64| norm2(&sub(x, &geometry.boundary_point(s).point));
    let mut best = (0.0, f64::INFINITY);
    for i in 0..samples {
        let s = step * i as f64;
        let d = dist2(s);
        if d < best.1 {
            best = (s, d);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c1 = b - g * (b - a);
        let c2 = a + g * (b - a);
        if dist2(c1) < dist2(c2) {
            b = c2;
        } else {
            a = c1;
        }
    }
    let s = (0.5 * (a + b)).rem_euclid(2.0 * PI);
    (s, dist2(s).sqrt())
}

fn boundary_parameter(field: &PotentialField, x: &Point) -> Option<f64> {
    let g = field.geometry();
    let (s, d) = closest_parameter(g, x);
    if d <= 1e-10 * g.diameter() {
        Some(s)
    } else {
        None
    }
}

pub(super) fn single_layer(field: &PotentialField, x: &Point, t: f64) -> Result<f64> {
    let Some(layer) = Layer::new(field, t)? else {
        return Ok(0.0);
    };
    let (s0, _) = closest_parameter(field.geometry(), x);
    layer.integrate(x, s0, Kernel::Single, false)
}

pub(super) fn double_layer(field: &PotentialField, x: &Point, t: f64) -> Result<f64> {
    if let Some(s0) = boundary_parameter(field, x) {
        return eval_double_layer_direct(field, s0, t);
    }
    let Some(layer) = Layer::new(field, t)? else {
        return Ok(0.0);
    };
    let (s0, _) = closest_parameter(field.geometry(), x);
    layer.integrate(x, s0, Kernel::Double, false)
}

/// Single layer at the boundary point with parameter `s0`.
pub fn eval_single_layer_direct(field: &PotentialField, s0: f64, t: f64) -> Result<f64> {
    let Some(layer) = Layer::new(field, t)? else {
        return Ok(0.0);
    };
    let x = field.geometry().boundary_point(s0).point;
    layer.integrate(&x, s0, Kernel::Single, true)
}

/// Direct value of the double layer at the boundary point with parameter `s0`.
pub fn eval_double_layer_direct(field: &PotentialField, s0: f64, t: f64) -> Result<f64> {
    let Some(layer) = Layer::new(field, t)? else {
        return Ok(0.0);
    };
    let x = field.geometry().boundary_point(s0).point;
    layer.integrate(&x, s0, Kernel::Double, true)
}

/// `D*φ(ξ0, t)`: the boundary integral of `∂ε(ξ0 - ξ, b)/∂ν(ξ0) φ a dτ dS`.
pub fn eval_adjoint_double_layer_direct(field: &PotentialField, s0: f64, t: f64) -> Result<f64> {
    let Some(layer) = Layer::new(field, t)? else {
        return Ok(0.0);
    };
    let node = field.geometry().boundary_point(s0);
    layer.integrate(&node.point, s0, Kernel::Gradient(node.normal), true)
}

/// `⟨∇ₓ Sφ(x, t), v⟩` at a point off the boundary.
pub fn eval_single_layer_normal_derivative(field: &PotentialField, x: &Point, v: &Point, t: f64) -> Result<f64> {
    let Some(layer) = Layer::new(field, t)? else {
        return Ok(0.0);
    };
    let (s0, _) = closest_parameter(field.geometry(), x);
    layer.integrate(x, s0, Kernel::Gradient(*v), false)
}
