//! Smooth bounded domains: parametric closed curves in the plane and the sphere.
//!
//! Points are stored as `[f64; 3]`; planar shapes keep the third coordinate at zero.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, GaussRule};

pub type Point = [f64; 3];

/// Distance within which a point counts as lying on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Circle { center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
    /// `r(θ) = r0 + Σ_k (cos_k[k-1] cos kθ + sin_k[k-1] sin kθ)` about `center`.
    StarCurve {
        center: [f64; 2],
        r0: f64,
        cos_k: Vec<f64>,
        sin_k: Vec<f64>,
    },
    Sphere { center: [f64; 3], radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    Inside,
    Outside,
    OnBoundary,
}

/// A boundary quadrature node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNode {
    /// Curve parameter in [0, 2π) (for the sphere: polar angle).
    pub s: f64,
    pub point: Point,
    pub normal: Point,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGeometry {
    shape: Shape,
    /// Hölder exponent of the boundary regularity class; recorded, never branched on.
    pub holder_exponent: f64,
}

/// Position, first and second derivatives of a planar parametrization.
#[derive(Debug, Clone, Copy)]
pub struct CurveJet {
    pub point: [f64; 2],
    pub d1: [f64; 2],
    pub d2: [f64; 2],
}

impl CurveJet {
    pub fn speed(&self) -> f64 {
        self.d1[0].hypot(self.d1[1])
    }

    /// Outward unit normal for a counter-clockwise parametrization.
    pub fn normal(&self) -> [f64; 2] {
        let sp = self.speed();
        [self.d1[1] / sp, -self.d1[0] / sp]
    }

    /// Signed curvature (positive for convex counter-clockwise curves).
    pub fn curvature(&self) -> f64 {
        (self.d1[0] * self.d2[1] - self.d1[1] * self.d2[0]) / self.speed().powi(3)
    }
}

impl BoundaryGeometry {
    pub fn new(shape: Shape) -> Result<Self> {
        let g = Self {
            shape,
            holder_exponent: 0.5,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn circle(center: [f64; 2], radius: f64) -> Result<Self> {
        Self::new(Shape::Circle { center, radius })
    }

    pub fn ellipse(center: [f64; 2], semi_axes: [f64; 2]) -> Result<Self> {
        Self::new(Shape::Ellipse { center, semi_axes })
    }

    pub fn sphere(center: [f64; 3], radius: f64) -> Result<Self> {
        Self::new(Shape::Sphere { center, radius })
    }

    pub fn with_holder_exponent(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Geometry(format!("Hölder exponent {lambda} not in (0, 1)")));
        }
        self.holder_exponent = lambda;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        match &self.shape {
            Shape::Circle { radius, .. } | Shape::Sphere { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::Geometry(format!("radius must be positive, got {radius}")));
                }
            }
            Shape::Ellipse { semi_axes, .. } => {
                if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
                    return Err(Error::Geometry("semi-axes must be positive".into()));
                }
            }
            Shape::StarCurve { r0, cos_k, sin_k, .. } => {
                if cos_k.len() != sin_k.len() {
                    return Err(Error::Geometry("star curve needs as many sine as cosine terms".into()));
                }
                if !(*r0 > 0.0) {
                    return Err(Error::Geometry("star curve mean radius must be positive".into()));
                }
                // r(θ) > 0 and a non-degenerate Jacobian on a dense sample.
                for j in 0..4096 {
                    let s = 2.0 * PI * j as f64 / 4096.0;
                    let (r, _, _) = self.star_radius(s);
                    if r <= 1e-8 * r0 || self.jet(s).speed() <= 1e-8 * r0 {
                        return Err(Error::Geometry(format!(
                            "star curve degenerates near θ = {s:.4}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dimension(&self) -> usize {
        match self.shape {
            Shape::Sphere { .. } => 3,
            _ => 2,
        }
    }

    pub fn is_curve(&self) -> bool {
        self.dimension() == 2
    }

    pub fn center(&self) -> Point {
        match &self.shape {
            Shape::Circle { center, .. }
            | Shape::Ellipse { center, .. }
            | Shape::StarCurve { center, .. } => [center[0], center[1], 0.0],
            Shape::Sphere { center, .. } => *center,
        }
    }

    fn star_radius(&self, theta: f64) -> (f64, f64, f64) {
        let Shape::StarCurve { r0, cos_k, sin_k, .. } = &self.shape else {
            unreachable!("star_radius on a non-star shape")
        };
        let mut r = *r0;
        let mut dr = 0.0;
        let mut ddr = 0.0;
        for (k, (c, s)) in cos_k.iter().zip(sin_k).enumerate() {
            let kf = (k + 1) as f64;
            let (sn, cs) = (kf * theta).sin_cos();
            r += c * cs + s * sn;
            dr += kf * (-c * sn + s * cs);
            ddr -= kf * kf * (c * cs + s * sn);
        }
        (r, dr, ddr)
    }

    /// Parametrization jet at `s` for planar shapes.
    pub fn jet(&self, s: f64) -> CurveJet {
        let (sn, cs) = s.sin_cos();
        match &self.shape {
            Shape::Circle { center, radius } => CurveJet {
                point: [center[0] + radius * cs, center[1] + radius * sn],
                d1: [-radius * sn, radius * cs],
                d2: [-radius * cs, -radius * sn],
            },
            Shape::Ellipse { center, semi_axes } => {
                let [a, b] = *semi_axes;
                CurveJet {
                    point: [center[0] + a * cs, center[1] + b * sn],
                    d1: [-a * sn, b * cs],
                    d2: [-a * cs, -b * sn],
                }
            }
            Shape::StarCurve { center, .. } => {
                let (r, dr, ddr) = self.star_radius(s);
                CurveJet {
                    point: [center[0] + r * cs, center[1] + r * sn],
                    d1: [dr * cs - r * sn, dr * sn + r * cs],
                    d2: [
                        ddr * cs - 2.0 * dr * sn - r * cs,
                        ddr * sn + 2.0 * dr * cs - r * sn,
                    ],
                }
            }
            Shape::Sphere { .. } => panic!("jet() is only defined for planar curves"),
        }
    }

    /// The boundary point with parameter `s` (polar angle for the sphere, azimuth 0).
    /// The returned weight is the parametric speed `|γ'(s)|`.
    pub fn boundary_point(&self, s: f64) -> BoundaryNode {
        match &self.shape {
            Shape::Sphere { center, radius } => {
                let (st, ct) = s.sin_cos();
                let n = [st, 0.0, ct];
                BoundaryNode {
                    s,
                    point: [center[0] + radius * n[0], center[1], center[2] + radius * n[2]],
                    normal: n,
                    weight: *radius,
                }
            }
            _ => {
                let j = self.jet(s);
                let nu = j.normal();
                BoundaryNode {
                    s,
                    point: [j.point[0], j.point[1], 0.0],
                    normal: [nu[0], nu[1], 0.0],
                    weight: j.speed(),
                }
            }
        }
    }

    /// Curvature at parameter `s` (planar shapes).
    pub fn curvature(&self, s: f64) -> f64 {
        self.jet(s).curvature()
    }

    /// Quadrature nodes on the boundary: `m` uniform parameter nodes on curves
    /// (trapezoid rule), `m` Gauss–Legendre polar nodes × `2m` azimuthal nodes on the sphere.
    pub fn boundary_nodes(&self, m: usize) -> Result<Vec<BoundaryNode>> {
        if m < 8 {
            return Err(Error::Resolution(format!("boundary_nodes needs m >= 8, got {m}")));
        }
        match &self.shape {
            Shape::Sphere { center, radius } => {
                let rule = GaussRule::legendre(m);
                let n_phi = 2 * m;
                let dphi = 2.0 * PI / n_phi as f64;
                let mut out = Vec::with_capacity(m * n_phi);
                for (&c, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let sth = (1.0 - c * c).sqrt();
                    let theta = c.acos();
                    for k in 0..n_phi {
                        let (sp, cp) = (k as f64 * dphi).sin_cos();
                        let n = [sth * cp, sth * sp, c];
                        out.push(BoundaryNode {
                            s: theta,
                            point: [
                                center[0] + radius * n[0],
                                center[1] + radius * n[1],
                                center[2] + radius * n[2],
                            ],
                            normal: n,
                            weight: radius * radius * w * dphi,
                        });
                    }
                }
                Ok(out)
            }
            _ => {
                let ds = 2.0 * PI / m as f64;
                Ok((0..m)
                    .map(|j| {
                        let mut node = self.boundary_point(ds * j as f64);
                        node.weight *= ds;
                        node
                    })
                    .collect())
            }
        }
    }

    /// Total boundary measure (exact for circle and sphere, adaptive quadrature otherwise).
    pub fn boundary_measure(&self) -> Result<f64> {
        match &self.shape {
            Shape::Circle { radius, .. } => Ok(2.0 * PI * radius),
            Shape::Sphere { radius, .. } => Ok(4.0 * PI * radius * radius),
            _ => adaptive(|s| self.jet(s).speed(), 0.0, 2.0 * PI, 1e-15, 1e-14),
        }
    }

    /// Signed distance estimate to the boundary (negative inside), exact for
    /// circle and sphere and first-order accurate near the boundary otherwise.
    pub fn signed_distance(&self, x: &Point) -> f64 {
        match &self.shape {
            Shape::Circle { center, radius } => {
                (x[0] - center[0]).hypot(x[1] - center[1]) - radius
            }
            Shape::Sphere { center, radius } => norm(&sub(x, center)) - radius,
            Shape::Ellipse { center, semi_axes } => {
                let [a, b] = *semi_axes;
                let (u, v) = (x[0] - center[0], x[1] - center[1]);
                let f = (u / a).powi(2) + (v / b).powi(2) - 1.0;
                let g = (2.0 * u / (a * a)).hypot(2.0 * v / (b * b));
                if g == 0.0 {
                    -a.min(b)
                } else {
                    f / g
                }
            }
            Shape::StarCurve { center, .. } => {
                let (u, v) = (x[0] - center[0], x[1] - center[1]);
                let theta = v.atan2(u);
                let (r, dr, _) = self.star_radius(theta);
                (u.hypot(v) - r) * r / r.hypot(dr)
            }
        }
    }

    pub fn contains(&self, x: &Point) -> Location {
        let d = self.signed_distance(x);
        if d.abs() <= BOUNDARY_TOL {
            Location::OnBoundary
        } else if d < 0.0 {
            Location::Inside
        } else {
            Location::Outside
        }
    }

    /// Lower bound of the normal reach (inverse maximal curvature).
    pub fn reach(&self) -> f64 {
        match &self.shape {
            Shape::Circle { radius, .. } | Shape::Sphere { radius, .. } => *radius,
            Shape::Ellipse { semi_axes, .. } => {
                let [a, b] = *semi_axes;
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                lo * lo / hi
            }
            Shape::StarCurve { r0, .. } => {
                let kmax = (0..4096)
                    .map(|j| self.curvature(2.0 * PI * j as f64 / 4096.0).abs())
                    .fold(0.0, f64::max);
                if kmax > 0.0 {
                    (1.0 / kmax).min(*r0)
                } else {
                    *r0
                }
            }
        }
    }

    /// `ξ0 + h ν(ξ0)`; negative `h` moves into the domain.
    pub fn offset_along_normal(&self, node: &BoundaryNode, h: f64) -> Result<Point> {
        let reach = self.reach();
        if h.abs() >= reach {
            return Err(Error::Geometry(format!(
                "normal offset |h| = {} not below the reach {reach}",
                h.abs()
            )));
        }
        Ok([
            node.point[0] + h * node.normal[0],
            node.point[1] + h * node.normal[1],
            node.point[2] + h * node.normal[2],
        ])
    }

    /// Diameter of the domain.
    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Circle { radius, .. } | Shape::Sphere { radius, .. } => 2.0 * radius,
            Shape::Ellipse { semi_axes, .. } => 2.0 * semi_axes[0].max(semi_axes[1]),
            Shape::StarCurve { .. } => {
                let pts: Vec<[f64; 2]> = (0..512)
                    .map(|j| self.jet(2.0 * PI * j as f64 / 512.0).point)
                    .collect();
                let mut d: f64 = 0.0;
                for p in &pts {
                    for q in &pts {
                        d = d.max((p[0] - q[0]).hypot(p[1] - q[1]));
                    }
                }
                d
            }
        }
    }

    /// Distance from an interior point `x` to the boundary along the unit direction `dir`.
    /// Only available for convex shapes, where the ray leaves the domain exactly once.
    pub fn ray_exit_distance(&self, x: &Point, dir: &Point) -> Result<f64> {
        let quadratic = |a: f64, b: f64, c: f64| -> f64 {
            // larger root of a t^2 + b t + c = 0 with c <= 0
            let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
            let t = if b >= 0.0 {
                (2.0 * -c) / (b + disc)
            } else {
                (-b + disc) / (2.0 * a)
            };
            t.max(0.0)
        };
        match &self.shape {
            Shape::Circle { .. } | Shape::Sphere { .. } => {
                let c0 = self.center();
                let r = match self.shape {
                    Shape::Circle { radius, .. } | Shape::Sphere { radius, .. } => radius,
                    _ => unreachable!(),
                };
                let p = sub(x, &c0);
                Ok(quadratic(dot(dir, dir), 2.0 * dot(&p, dir), (dot(&p, &p) - r * r).min(0.0)))
            }
            Shape::Ellipse { center, semi_axes } => {
                let [a, b] = *semi_axes;
                let (u, v) = (x[0] - center[0], x[1] - center[1]);
                let qa = (dir[0] / a).powi(2) + (dir[1] / b).powi(2);
                let qb = 2.0 * (u * dir[0] / (a * a) + v * dir[1] / (b * b));
                let qc = ((u / a).powi(2) + (v / b).powi(2) - 1.0).min(0.0);
                Ok(quadratic(qa, qb, qc))
            }
            Shape::StarCurve { .. } => Err(Error::Geometry(
                "ray exit distance is only available for convex shapes".into(),
            )),
        }
    }
}

/// Surface area of the unit sphere in R^n, `2 π^{n/2} / Γ(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / statrs::function::gamma::gamma(h)
}

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm2(a: &Point) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}
