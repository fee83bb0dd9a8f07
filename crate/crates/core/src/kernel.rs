//! The fundamental solution `ε(x, s) = θ(s) exp(-|x|²/(4s)) / (4πs)^{n/2}`, where the
//! diffusion value `s` is `a1(t)` or `b(t, τ)`, together with numerical checks of its
//! defining properties.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coeff::TimeCoefficient;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm2, sub, unit_sphere_area, Point};
use crate::quadrature::{Adaptive, GaussRule};

/// Exponents beyond this underflow `exp` to zero.
pub const UNDERFLOW_EXPONENT: f64 = 745.0;

/// A space point paired with a diffusion value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub x: Point,
    pub s: f64,
}

impl KernelPoint {
    pub fn value(&self, n: usize) -> f64 {
        eval_kernel(n, &self.x, self.s)
    }
}

/// `ε_n(x, s)`; zero for `s <= 0` and when the Gaussian underflows.
#[inline]
pub fn eval_kernel(n: usize, x: &Point, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let e = norm2(x) / (4.0 * s);
    if e > UNDERFLOW_EXPONENT {
        return 0.0;
    }
    (-e).exp() / (4.0 * PI * s).powf(0.5 * n as f64)
}

/// `∇_x ε_n(x, s) = -x/(2s) ε_n(x, s)`.
pub fn eval_kernel_gradient(n: usize, x: &Point, s: f64) -> Result<Point> {
    if s <= 0.0 {
        return Err(Error::Support(format!(
            "kernel gradient requested on the zero branch (s = {s})"
        )));
    }
    let f = -eval_kernel(n, x, s) / (2.0 * s);
    Ok([f * x[0], f * x[1], f * x[2]])
}

/// `∂ε_n(x - ξ, s)/∂ν(ξ) = <x - ξ, ν>/(2s) ε_n(x - ξ, s)` (derivative in the source point).
pub fn eval_normal_derivative(n: usize, x: &Point, xi: &Point, nu: &Point, s: f64) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::Support(format!(
            "normal derivative requested on the zero branch (s = {s})"
        )));
    }
    let d = sub(x, xi);
    Ok(dot(&d, nu) / (2.0 * s) * eval_kernel(n, &d, s))
}

fn positive_a1(c: &TimeCoefficient, t: f64) -> Result<f64> {
    let s = c.eval_a1(t)?;
    if !(s > 0.0) {
        return Err(Error::Assumption(format!("a1({t}) = {s} is not positive")));
    }
    Ok(s)
}

/// `|∫ ε_{n,b}(x, t) dx - 1|` by tensor Gauss–Hermite quadrature after the
/// scaling `x = 2 sqrt(a1(t)) y`; the kernel itself is evaluated at every node.
pub fn check_normalization(n: usize, c: &TimeCoefficient, t: f64, order: usize) -> Result<f64> {
    let s = positive_a1(c, t)?;
    let rule = GaussRule::hermite(order.max(20));
    let scale = 2.0 * s.sqrt();
    let jac = scale.powi(n as i32);
    let mut total = 0.0;
    for_each_tensor_node(n, &rule, |y, w| {
        let x = [scale * y[0], scale * y[1], scale * y[2]];
        // divide out the Hermite weight exp(-|y|^2)
        total += w * (norm2(&y)).exp() * eval_kernel(n, &x, s) * jac;
    });
    Ok((total - 1.0).abs())
}

fn for_each_tensor_node<F: FnMut(Point, f64)>(n: usize, rule: &GaussRule, mut f: F) {
    let k = rule.len();
    match n {
        1 => {
            for i in 0..k {
                f([rule.nodes[i], 0.0, 0.0], rule.weights[i]);
            }
        }
        2 => {
            for i in 0..k {
                for j in 0..k {
                    f([rule.nodes[i], rule.nodes[j], 0.0], rule.weights[i] * rule.weights[j]);
                }
            }
        }
        3 => {
            for i in 0..k {
                for j in 0..k {
                    for l in 0..k {
                        f(
                            [rule.nodes[i], rule.nodes[j], rule.nodes[l]],
                            rule.weights[i] * rule.weights[j] * rule.weights[l],
                        );
                    }
                }
            }
        }
        _ => panic!("dimension {n} not supported"),
    }
}

/// `|∫ ε(x, t) e^{i<ξ,x>} dx - exp(-|ξ|² a1(t))|`, integrating the cosine and sine
/// parts on the box of half-width `10 sqrt(a1(t))` with composite Gauss–Legendre.
pub fn check_fourier(n: usize, c: &TimeCoefficient, t: f64, freq: &Point) -> Result<f64> {
    let s = positive_a1(c, t)?;
    let half = 10.0 * s.sqrt();
    let panels = 8 + (half * dot(freq, freq).sqrt()).ceil() as usize;
    let rule = GaussRule::legendre(16);
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| {
            let a = -half + 2.0 * half * p as f64 / panels as f64;
            let b = -half + 2.0 * half * (p + 1) as f64 / panels as f64;
            rule.mapped(a, b).collect::<Vec<_>>()
        })
        .collect();
    let flat = GaussRule {
        nodes: nodes.iter().map(|p| p.0).collect(),
        weights: nodes.iter().map(|p| p.1).collect(),
    };
    let (mut re, mut im) = (0.0, 0.0);
    for_each_tensor_node(n, &flat, |x, w| {
        let k = w * eval_kernel(n, &x, s);
        let (sn, cs) = dot(freq, &x).sin_cos();
        re += k * cs;
        im += k * sn;
    });
    let target = (-dot(freq, freq) * s).exp();
    Ok((re - target).hypot(im))
}

/// Radial test functions for the approximate-identity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// `amplitude · exp(-1/(1 - (r/radius)^2))` inside the ball.
    Bump { radius: f64, amplitude: f64 },
    /// Equal to 1 on the ball of `radius`, decaying smoothly to 0 at `2 radius`.
    Plateau { radius: f64 },
}

impl TestFunction {
    pub fn standard_bump() -> Self {
        TestFunction::Bump {
            radius: 1.0,
            amplitude: 1.0,
        }
    }

    pub fn eval_radial(&self, r: f64) -> f64 {
        match *self {
            TestFunction::Bump { radius, amplitude } => {
                let q = r / radius;
                if q >= 1.0 {
                    0.0
                } else {
                    amplitude * (-1.0 / (1.0 - q * q)).exp()
                }
            }
            TestFunction::Plateau { radius } => {
                if r <= radius {
                    1.0
                } else if r >= 2.0 * radius {
                    0.0
                } else {
                    // smooth step built from the standard C^∞ transition function
                    let u = (r - radius) / radius;
                    let f = |v: f64| if v <= 0.0 { 0.0 } else { (-1.0 / v).exp() };
                    f(1.0 - u) / (f(1.0 - u) + f(u))
                }
            }
        }
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            TestFunction::Bump { radius, .. } => radius,
            TestFunction::Plateau { radius } => 2.0 * radius,
        }
    }

    /// Lipschitz constant `max |ψ'(r)|`, located by golden-section search on the
    /// analytic radial derivative.
    pub fn lipschitz(&self) -> f64 {
        let h = 1e-6 * self.support_radius();
        let dpsi = |r: f64| ((self.eval_radial(r + h) - self.eval_radial(r - h)) / (2.0 * h)).abs();
        let deriv = |r: f64| match *self {
            TestFunction::Bump { radius, amplitude } => {
                let q = r / radius;
                if q >= 1.0 {
                    0.0
                } else {
                    let d = 1.0 - q * q;
                    amplitude * 2.0 * q / (radius * d * d) * (-1.0 / d).exp()
                }
            }
            TestFunction::Plateau { .. } => dpsi(r),
        };
        let (lo, hi) = match *self {
            TestFunction::Bump { radius, .. } => (0.0, radius),
            TestFunction::Plateau { radius } => (radius, 2.0 * radius),
        };
        // coarse scan then golden refinement
        let samples = 2000;
        let (mut best_r, mut best) = (lo, 0.0);
        for i in 0..=samples {
            let r = lo + (hi - lo) * i as f64 / samples as f64;
            let v = deriv(r);
            if v > best {
                best = v;
                best_r = r;
            }
        }
        let step = (hi - lo) / samples as f64;
        let (mut a, mut b) = ((best_r - step).max(lo), (best_r + step).min(hi));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let c1 = b - g * (b - a);
            let c2 = a + g * (b - a);
            if deriv(c1) > deriv(c2) {
                b = c2;
            } else {
                a = c1;
            }
        }
        deriv(0.5 * (a + b)).max(best)
    }
}

/// `|∫ ε_{n,b}(x, t) ψ(x) dx - ψ(0)|` for a radial test function, integrated in
/// polar form `ω_n ∫ ε(r) ψ(r) r^{n-1} dr` with adaptive quadrature.
pub fn check_delta_limit(n: usize, c: &TimeCoefficient, psi: &TestFunction, t: f64) -> Result<f64> {
    let s = positive_a1(c, t)?;
    let omega = unit_sphere_area(n);
    let rmax = psi.support_radius();
    // split at a few kernel widths so the narrow peak is resolved
    let w = 2.0 * s.sqrt();
    let mut breaks = vec![0.0];
    for k in [1.0, 4.0, 12.0] {
        if k * w < rmax {
            breaks.push(k * w);
        }
    }
    breaks.push(rmax);
    let integral = Adaptive::new(1e-16, 1e-13).integrate_with_breaks(
        |r| eval_kernel(n, &[r, 0.0, 0.0], s) * psi.eval_radial(r) * r.powi(n as i32 - 1),
        &breaks,
    )?;
    Ok((omega * integral.value - psi.eval_radial(0.0)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn kernel_examples() {
        assert_abs_diff_eq!(eval_kernel(2, &[0.0; 3], 1.0 / (4.0 * PI)), 1.0, epsilon = 1e-15);
        assert_eq!(eval_kernel(2, &[1.0, 0.0, 0.0], -0.5), 0.0);
        // (π)^{-3/2} e^{-3}, independently evaluated
        let oracle = PI.powf(-1.5) * (-3.0f64).exp();
        assert_abs_diff_eq!(oracle, 0.008_941_116_327_233_6, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_kernel(3, &[1.0, 1.0, 1.0], 0.25), oracle, epsilon = 1e-17);
        assert_eq!(eval_kernel(2, &[100.0, 0.0, 0.0], 1e-3), 0.0);
    }

    fn fd_gradient(n: usize, x: &Point, s: f64, h: f64) -> Point {
        let mut g = [0.0; 3];
        for k in 0..n {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            g[k] = (eval_kernel(n, &xp, s) - eval_kernel(n, &xm, s)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(eval_kernel_gradient(2, &[0.0; 3], 0.7).unwrap(), [0.0; 3]);
        let g = eval_kernel_gradient(2, &[1.0, 0.0, 0.0], 0.5).unwrap();
        let fd = fd_gradient(2, &[1.0, 0.0, 0.0], 0.5, 1e-6);
        let eps = (-0.5f64).exp() / (2.0 * PI);
        assert_abs_diff_eq!(g[0], -eps, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0], fd[0], epsilon = 1e-9);
        assert_abs_diff_eq!(g[0], -0.096_532_352_630_053_9, epsilon = 1e-15);
        assert_eq!(g[1], 0.0);
        assert!(eval_kernel_gradient(2, &[1.0, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn normal_derivative_examples() {
        let v = eval_normal_derivative(2, &[0.0; 3], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 0.5).unwrap();
        // oracle: finite difference in the source point along ν
        let h = 1e-6;
        let fd = (eval_kernel(2, &[-(1.0 + h), 0.0, 0.0], 0.5) - eval_kernel(2, &[-(1.0 - h), 0.0, 0.0], 0.5))
            / (2.0 * h);
        assert_abs_diff_eq!(v, fd, epsilon = 1e-9);
        assert_abs_diff_eq!(v, -0.096_532_352_630_053_9, epsilon = 1e-15);
        let t = eval_normal_derivative(2, &[0.0, 1.0, 0.0], &[0.0; 3], &[1.0, 0.0, 0.0], 0.3).unwrap();
        assert_eq!(t, 0.0);
        let flipped = eval_normal_derivative(2, &[0.0; 3], &[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(flipped, -v);
        assert!(eval_normal_derivative(2, &[0.0; 3], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn normalization_examples() {
        let c1 = TimeCoefficient::constant(1.0, 1.0).unwrap();
        assert!(check_normalization(2, &c1, 0.7, 20).unwrap() <= 1e-10);
        let p2 = TimeCoefficient::power(2.0, 1.0).unwrap();
        assert!(check_normalization(3, &p2, 0.5, 20).unwrap() <= 1e-10);
        let aff = TimeCoefficient::affine(1.0, -2.0, 0.9).unwrap();
        assert!(check_normalization(2, &aff, 0.6, 24).unwrap() <= 1e-10);
        let neg = TimeCoefficient::affine(-1.0, 0.0, 1.0).unwrap();
        assert!(matches!(check_normalization(2, &neg, 0.5, 20), Err(Error::Assumption(_))));
    }

    #[test]
    fn fourier_examples() {
        let c1 = TimeCoefficient::constant(1.0, 1.0).unwrap();
        assert!(check_fourier(2, &c1, 0.4, &[0.0; 3]).unwrap() <= 1e-10);
        assert!(check_fourier(2, &c1, 1.0, &[1.0, 0.0, 0.0]).unwrap() <= 1e-8);
        let p1 = TimeCoefficient::power(1.0, 1.0).unwrap();
        assert!(check_fourier(2, &p1, 1.0, &[0.0, 2.0, 0.0]).unwrap() <= 1e-8);
    }

    #[test]
    fn delta_limit_examples() {
        let c1 = TimeCoefficient::constant(1.0, 1.0).unwrap();
        // plateau of radius 1 contains the effective support for a1 = 1e-4
        let plateau = TestFunction::Plateau { radius: 1.0 };
        assert!(check_delta_limit(2, &c1, &plateau, 1e-4).unwrap() <= 1e-13);
        let bump = TestFunction::standard_bump();
        let a = bump.lipschitz();
        assert!(a > 0.5 && a < 1.0, "A = {a}");
        assert!(check_delta_limit(2, &c1, &bump, 1e-4).unwrap() <= 2.0 * a * 1e-2);
        let mut t = 1e-2;
        let mut prev = f64::INFINITY;
        for _ in 0..8 {
            let e = check_delta_limit(2, &c1, &bump, t).unwrap();
            assert!(e < prev);
            assert!(e <= 2.0 * a * t.sqrt());
            prev = e;
            t *= 0.5;
        }
    }

    #[test]
    fn semigroup_property() {
        // ∫ ε(x - y, s1) ε(y, s2) dy = ε(x, s1 + s2) by tensor Gauss–Legendre on a box
        let (s1, s2) = (0.03, 0.05);
        let x = [0.2, -0.1, 0.0];
        let rule = GaussRule::legendre(24);
        let panels = 12;
        let half = 2.0;
        let mut nodes = Vec::new();
        for p in 0..panels {
            let a = -half + 2.0 * half * p as f64 / panels as f64;
            let b = a + 2.0 * half / panels as f64;
            nodes.extend(rule.mapped(a, b));
        }
        let mut total = 0.0;
        for &(y0, w0) in &nodes {
            for &(y1, w1) in &nodes {
                let y = [y0, y1, 0.0];
                total += w0 * w1 * eval_kernel(2, &sub(&x, &y), s1) * eval_kernel(2, &y, s2);
            }
        }
        assert_abs_diff_eq!(total, eval_kernel(2, &x, s1 + s2), epsilon = 1e-8);
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            x0 in -1.0f64..1.0, x1 in -1.0f64..1.0, s in 0.05f64..2.0
        ) {
            let x = [x0, x1, 0.0];
            let g = eval_kernel_gradient(2, &x, s).unwrap();
            let fd = fd_gradient(2, &x, s, 1e-6);
            let scale = eval_kernel(2, &x, s) / s.sqrt();
            for k in 0..2 {
                prop_assert!((g[k] - fd[k]).abs() <= 1e-6 * scale.max(g[k].abs()));
            }
        }

        #[test]
        fn kernel_positive_and_radially_decreasing(r1 in 0.0f64..3.0, dr in 0.0f64..1.0, s in 0.01f64..2.0) {
            let a = eval_kernel(2, &[r1, 0.0, 0.0], s);
            let b = eval_kernel(2, &[0.0, r1 + dr, 0.0], s);
            prop_assert!(a > 0.0);
            prop_assert!(b <= a);
        }

        #[test]
        fn zero_branch(x0 in -2.0f64..2.0, s in -5.0f64..=0.0) {
            prop_assert_eq!(eval_kernel(3, &[x0, 0.1, 0.2], s), 0.0);
        }
    }
}
