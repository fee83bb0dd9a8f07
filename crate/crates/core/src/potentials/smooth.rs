//! Volume and Poisson potentials of smooth, compactly supported profiles.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::density::SpatialProfile;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm2, Point};
use crate::kernel::eval_kernel;
use crate::quadrature::{Adaptive, GaussRule};
use crate::special::bessel_i01_scaled;

use super::PotentialField;

/// Half-width of the kernel footprint in units of `2 sqrt(s)`.
const FOOTPRINT: f64 = 6.1;
const PANEL_ORDER: usize = 8;
const HERMITE_ORDER: usize = 24;

fn panel_rule() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::legendre(PANEL_ORDER))
}

fn hermite_rule() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::hermite(HERMITE_ORDER))
}

/// `(∫ ε(x - ξ, s) β(ξ) dξ, ∫ ε(x - ξ, s) Δβ(ξ) dξ)`; the second entry is computed only
/// when requested. At `s = 0` the values of `β` and `Δβ` at `x` are returned.
pub fn heat_semigroup(n: usize, profile: &SpatialProfile, x: &Point, s: f64, laplacian: bool) -> (f64, f64) {
    semigroup(n, profile, x, s, laplacian, None)
}

/// Derivative of [`heat_semigroup`] in `x` along `v`, for `s > 0`.
pub fn heat_semigroup_derivative(
    n: usize,
    profile: &SpatialProfile,
    x: &Point,
    s: f64,
    v: &Point,
    laplacian: bool,
) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    semigroup(n, profile, x, s, laplacian, Some(v))
}

fn semigroup(n: usize, profile: &SpatialProfile, x: &Point, s: f64, laplacian: bool, v: Option<&Point>) -> (f64, f64) {
    let lap = |y: &Point| if laplacian { profile.laplacian(n, y) } else { 0.0 };
    if s <= 0.0 {
        return (profile.eval(x), lap(x));
    }
    let width = 2.0 * s.sqrt();
    if n == 2 && width * FOOTPRINT > profile.feature_scale() {
        return radial(profile, x, s, laplacian, v);
    }
    cartesian(n, profile, x, s, laplacian, v)
}

fn cartesian(n: usize, profile: &SpatialProfile, x: &Point, s: f64, laplacian: bool, v: Option<&Point>) -> (f64, f64) {
    let lap = |y: &Point| if laplacian { profile.laplacian(n, y) } else { 0.0 };
    let width = 2.0 * s.sqrt();
    if width * FOOTPRINT <= profile.feature_scale() {
        // ξ = x + 2 sqrt(s) y turns the kernel into the Hermite weight
        let rule = hermite_rule();
        let norm = PI.powf(-0.5 * n as f64);
        let (mut v0, mut v1) = (0.0, 0.0);
        tensor(n, &[&rule.nodes, &rule.nodes, &rule.nodes], &[&rule.weights, &rule.weights, &rule.weights], |y, w| {
            // the x-derivative of the kernel is y/sqrt(s) times the kernel
            let w = match v {
                Some(v) => w * dot(&y, v) / s.sqrt(),
                None => w,
            };
            let xi = [x[0] + width * y[0], x[1] + width * y[1], x[2] + width * y[2]];
            v0 += w * profile.eval(&xi);
            v1 += w * lap(&xi);
        });
        return (norm * v0, norm * v1);
    }
    let c = profile.center();
    let r = profile.support_radius();
    let half = width * FOOTPRINT;
    let hmax = (0.8 * width).min(profile.feature_scale());
    let rule = panel_rule();
    let mut nodes: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let lo = (c[k] - r).max(x[k] - half);
        let hi = (c[k] + r).min(x[k] + half);
        if hi <= lo {
            return (0.0, 0.0);
        }
        let panels = ((hi - lo) / hmax).ceil().max(1.0) as usize;
        let step = (hi - lo) / panels as f64;
        let (mut nk, mut wk) = (Vec::new(), Vec::new());
        for p in 0..panels {
            let a = lo + step * p as f64;
            for (node, w) in rule.mapped(a, a + step) {
                nk.push(node);
                wk.push(w);
            }
        }
        nodes.push(nk);
        weights.push(wk);
    }
    let empty = Vec::new();
    let nref: Vec<&Vec<f64>> = (0..3).map(|k| nodes.get(k).unwrap_or(&empty)).collect();
    let wref: Vec<&Vec<f64>> = (0..3).map(|k| weights.get(k).unwrap_or(&empty)).collect();
    let (mut v0, mut v1) = (0.0, 0.0);
    let nf = n as f64;
    tensor(n, &[nref[0], nref[1], nref[2]], &[wref[0], wref[1], wref[2]], |xi, w| {
        let d = [x[0] - xi[0], x[1] - xi[1], x[2] - xi[2]];
        let k = eval_kernel(n, &d, s);
        if k != 0.0 {
            let b = w * k * profile.eval(&xi);
            let d2 = norm2(&d);
            // ∫ ε Δβ = ∫ (Δε) β; the kernel is smoother than Δβ near the support edge
            match v {
                None => {
                    v0 += b;
                    if laplacian {
                        v1 += b * (d2 / (4.0 * s * s) - nf / (2.0 * s));
                    }
                }
                Some(v) => {
                    let dv = dot(&d, v);
                    v0 -= b * dv / (2.0 * s);
                    if laplacian {
                        v1 += b * dv * ((nf + 2.0) / (4.0 * s * s) - d2 / (8.0 * s * s * s));
                    }
                }
            }
        }
    });
    (v0, v1)
}

/// Plane case: both profiles are radial about their center, and the angular average of the
/// kernel over the circle of radius `ρ` is
/// `(1/(2s)) e^{-(d-ρ)²/4s} Ĩ0(dρ/2s)` per unit `ρ dρ`, `Ĩ` the scaled Bessel function and
/// `d = |x - c|`. The Laplacian and the `d`-derivatives of the average are in closed form.
fn radial(profile: &SpatialProfile, x: &Point, s: f64, laplacian: bool, v: Option<&Point>) -> (f64, f64) {
    let c = profile.center();
    let dx = [x[0] - c[0], x[1] - c[1]];
    let d = dx[0].hypot(dx[1]);
    let width = 2.0 * s.sqrt();
    let lo = (d - FOOTPRINT * width).max(0.0);
    let hi = (d + FOOTPRINT * width).min(profile.support_radius());
    if hi <= lo {
        return (0.0, 0.0);
    }
    let direction = match v {
        Some(v) if d > 0.0 => (dx[0] * v[0] + dx[1] * v[1]) / d,
        Some(_) => return (0.0, 0.0),
        None => 1.0,
    };
    // one-dimensional, so the outer quarter of the support (where a bump steepens) is
    // resolved more finely than in the tensor rule
    let r = profile.support_radius();
    let feature = profile.feature_scale();
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    let rule = panel_rule();
    for (a, b, cap) in [(0.0, 0.75 * r, feature), (0.75 * r, r, 0.25 * feature)] {
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            continue;
        }
        let hmax = (0.8 * width).min(cap);
        let panels = ((b - a) / hmax).ceil().max(1.0) as usize;
        let step = (b - a) / panels as f64;
        for p in 0..panels {
            let x0 = a + step * p as f64;
            nodes.extend(rule.mapped(x0, x0 + step));
        }
    }
    let (s2, s3) = (s * s, s * s * s);
    let (mut v0, mut v1) = (0.0, 0.0);
    for &(rho, w) in &nodes {
        let beta = profile.eval(&[c[0] + rho, c[1], c[2]]);
        if beta == 0.0 {
            continue;
        }
        let g = w * beta * rho * (-(d - rho).powi(2) / (4.0 * s)).exp();
        let kappa = d * rho / (2.0 * s);
        // kernels written with i0 - i1 to keep the leading terms from cancelling
        let (i0, _, diff) = bessel_i01_scaled(kappa);
        let e = d - rho;
        match v {
            None => {
                v0 += g * i0;
                if laplacian {
                    v1 += g * ((e * e / (4.0 * s2) - 1.0 / s) * i0 + d * rho / (2.0 * s2) * diff);
                }
            }
            Some(_) => {
                v0 -= g * (e * i0 + rho * diff) / (2.0 * s);
                if laplacian {
                    let c1 = rho * (3.0 * d * d + rho * rho) / (8.0 * s3) - rho / (2.0 * s2);
                    let c01 = (2.0 * d - rho) / (2.0 * s2) - e * e * e / (8.0 * s3);
                    v1 += g * (c01 * i0 - c1 * diff);
                }
            }
        }
    }
    let scale = direction / (2.0 * s);
    (scale * v0, scale * v1)
}

fn tensor<F: FnMut(Point, f64)>(n: usize, nodes: &[&Vec<f64>; 3], weights: &[&Vec<f64>; 3], mut f: F) {
    match n {
        2 => {
            for (i, a) in nodes[0].iter().enumerate() {
                for (j, b) in nodes[1].iter().enumerate() {
                    f([*a, *b, 0.0], weights[0][i] * weights[1][j]);
                }
            }
        }
        3 => {
            for (i, a) in nodes[0].iter().enumerate() {
                for (j, b) in nodes[1].iter().enumerate() {
                    let wij = weights[0][i] * weights[1][j];
                    for (l, c) in nodes[2].iter().enumerate() {
                        f([*a, *b, *c], wij * weights[2][l]);
                    }
                }
            }
        }
        _ => panic!("dimension {n} not supported"),
    }
}

pub(super) fn poisson(field: &PotentialField, x: &Point, t: f64) -> Result<f64> {
    let profile = field.initial_density()?;
    let s = field.coefficient().eval_a1(t)?;
    if t == 0.0 {
        return Ok(profile.eval(x));
    }
    if !(s > 0.0) {
        return Err(Error::Assumption(format!("a1({t}) = {s} is not positive")));
    }
    Ok(heat_semigroup(field.dimension(), profile, x, s, false).0)
}

pub(super) fn volume(field: &PotentialField, x: &Point, t: f64) -> Result<f64> {
    let f = field.volume_density()?;
    let c = field.coefficient();
    let a1t = c.eval_a1(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let n = field.dimension();
    let profile = f.profile();
    let scale = profile.sup_abs().max(f64::MIN_POSITIVE);
    let integrand = |tau: f64| {
        let (w0, w1) = f.time_weights(tau);
        let z = (a1t - c.a1_unchecked(tau)).max(0.0);
        let (i0, i1) = heat_semigroup(n, profile, x, z, w1 != 0.0);
        w0 * i0 + w1 * i1
    };
    let rel = field.resolution().tolerance;
    let integral = Adaptive::new(1e-3 * rel * scale * t, rel)
        .with_max_intervals(4000)
        .integrate(integrand, 0.0, t)?;
    Ok(integral.value)
}

pub(super) fn poisson_derivative(field: &PotentialField, x: &Point, t: f64, v: &Point) -> Result<f64> {
    let profile = field.initial_density()?;
    let s = field.coefficient().eval_a1(t)?;
    if t == 0.0 {
        return Err(Error::Support("the derivative at t = 0 is that of the density itself".into()));
    }
    if !(s > 0.0) {
        return Err(Error::Assumption(format!("a1({t}) = {s} is not positive")));
    }
    Ok(heat_semigroup_derivative(field.dimension(), profile, x, s, v, false).0)
}

pub(super) fn volume_derivative(field: &PotentialField, x: &Point, t: f64, v: &Point) -> Result<f64> {
    let f = field.volume_density()?;
    let c = field.coefficient();
    let a1t = c.eval_a1(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let n = field.dimension();
    let profile = f.profile();
    let scale = profile.sup_abs().max(f64::MIN_POSITIVE) / profile.feature_scale();
    let integrand = |tau: f64| {
        let (w0, w1) = f.time_weights(tau);
        let z = (a1t - c.a1_unchecked(tau)).max(0.0);
        let (i0, i1) = heat_semigroup_derivative(n, profile, x, z, v, w1 != 0.0);
        w0 * i0 + w1 * i1
    };
    let rel = field.resolution().tolerance;
    let integral = Adaptive::new(1e-3 * rel * scale * t, rel)
        .with_max_intervals(4000)
        .integrate(integrand, 0.0, t)?;
    Ok(integral.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semigroup_of_gaussian_is_gaussian() {
        let p = SpatialProfile::gaussian(0.02, [0.1, -0.1, 0.0]);
        for s in [1e-7, 1e-4, 0.01, 0.3] {
            for x in [[0.1, -0.1, 0.0], [0.3, 0.2, 0.0], [-0.5, 0.0, 0.0]] {
                let v = heat_semigroup(2, &p, &x, s, true);
                let d2 = (x[0] - 0.1f64).powi(2) + (x[1] + 0.1f64).powi(2);
                let sig = 0.02 + s;
                let exact = 0.02 / sig * (-d2 / (4.0 * sig)).exp();
                assert!((v.0 - exact).abs() <= 1e-10 * exact.max(1e-3), "s={s} x={x:?}: {} vs {exact}", v.0);
                // Δ commutes with the heat semigroup
                let lap = exact * (d2 / (4.0 * sig * sig) - 1.0 / sig);
                assert!((v.1 - lap).abs() <= 1e-8 * lap.abs().max(1.0), "lap s={s}: {} vs {lap}", v.1);
            }
        }
    }

    #[test]
    fn derivative_of_gaussian_semigroup() {
        let p = SpatialProfile::gaussian(0.02, [0.1, -0.1, 0.0]);
        let v = [0.6, 0.8, 0.0];
        for s in [1e-5, 0.01, 0.3] {
            for x in [[0.12, -0.1, 0.0], [0.3, 0.2, 0.0], [-0.5, 0.0, 0.0]] {
                let (g0, g1) = heat_semigroup_derivative(2, &p, &x, s, &v, true);
                let sig = 0.02 + s;
                let d = [x[0] - 0.1, x[1] + 0.1];
                let d2 = d[0] * d[0] + d[1] * d[1];
                let dv = d[0] * v[0] + d[1] * v[1];
                let u = 0.02 / sig * (-d2 / (4.0 * sig)).exp();
                let du = -u * dv / (2.0 * sig);
                // Δu = u (d²/4σ² - 1/σ), differentiated along v
                let dlap = du * (d2 / (4.0 * sig * sig) - 1.0 / sig) + u * dv / (2.0 * sig * sig);
                assert!((g0 - du).abs() <= 1e-9 * du.abs().max(1.0), "s={s} x={x:?}: {g0} vs {du}");
                assert!((g1 - dlap).abs() <= 1e-7 * dlap.abs().max(1.0), "lap s={s}: {g1} vs {dlap}");
            }
        }
    }

    /// Nested adaptive quadrature in polar coordinates about the profile center.
    fn polar_referee(p: &SpatialProfile, x: &Point, s: f64) -> f64 {
        let c = p.center();
        let outer = |rho: f64| {
            let inner = |th: f64| {
                let xi = [c[0] + rho * th.cos(), c[1] + rho * th.sin(), 0.0];
                eval_kernel(2, &[x[0] - xi[0], x[1] - xi[1], 0.0], s) * p.eval(&xi) * rho
            };
            let breaks: Vec<f64> = (0..=64).map(|k| k as f64 * PI / 32.0).collect();
            Adaptive::new(1e-16, 1e-13)
                .with_max_intervals(20000)
                .integrate_with_breaks(inner, &breaks)
                .unwrap()
                .value
        };
        let r = p.support_radius();
        let breaks: Vec<f64> = (0..=24).map(|k| r * k as f64 / 24.0).collect();
        Adaptive::new(1e-15, 1e-12)
            .with_max_intervals(20000)
            .integrate_with_breaks(outer, &breaks)
            .unwrap()
            .value
    }

    #[test]
    fn radial_route_for_bump() {
        let p = SpatialProfile::bump(0.6, [0.1, -0.05, 0.0]);
        let v = [0.0, 1.0, 0.0];
        for s in [0.003, 0.05, 0.7] {
            for x in [[0.1, -0.05, 0.0], [0.5, 0.3, 0.0], [1.0, 0.0, 0.0]] {
                let a = radial(&p, &x, s, true, None);
                let referee = polar_referee(&p, &x, s);
                assert!((a.0 - referee).abs() <= 1e-13, "s={s} {x:?}: {} vs {referee}", a.0);
                // the tensor rule is a second, coarser route
                let b = cartesian(2, &p, &x, s, true, None);
                assert!((a.0 - b.0).abs() <= 5e-10 && (a.1 - b.1).abs() <= 1e-8, "s={s} {x:?}: {a:?} {b:?}");
                let a = radial(&p, &x, s, true, Some(&v));
                let b = cartesian(2, &p, &x, s, true, Some(&v));
                assert!((a.0 - b.0).abs() <= 1e-9 && (a.1 - b.1).abs() <= 1e-7, "d s={s} {x:?}: {a:?} {b:?}");
            }
        }
    }

    #[test]
    fn semigroup_of_gaussian_in_three_dimensions() {
        let p = SpatialProfile::gaussian(0.05, [0.0; 3]);
        let s = 0.02;
        let x = [0.1, 0.05, -0.1];
        let d2: f64 = 0.01 + 0.0025 + 0.01;
        let exact = (0.05f64 / 0.07).powf(1.5) * (-d2 / (4.0f64 * 0.07)).exp();
        let v = heat_semigroup(3, &p, &x, s, false).0;
        assert!((v - exact).abs() < 1e-10);
    }
}
