//! Densities fed into the potentials: volume sources `f(x, t)`, initial data `φ(x)`,
//! and boundary densities `φ(ξ, t)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coeff::TimeCoefficient;
use crate::error::{Error, Result};
use crate::geometry::{norm, norm2, sub, BoundaryGeometry, Location, Point};

/// Below this relative size a Gaussian profile is treated as zero.
const GAUSSIAN_CUTOFF_EXPONENT: f64 = 37.0;

/// Smooth spatial profiles with closed-form Laplacians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpatialProfile {
    /// `amplitude · exp(-|x - c|²/(4σ))`.
    Gaussian { sigma: f64, center: Point, amplitude: f64 },
    /// `amplitude · exp(-1/(1 - q²))`, `q = |x - c|/radius < 1`.
    Bump { radius: f64, center: Point, amplitude: f64 },
}

impl SpatialProfile {
    pub fn gaussian(sigma: f64, center: Point) -> Self {
        SpatialProfile::Gaussian {
            sigma,
            center,
            amplitude: 1.0,
        }
    }

    pub fn bump(radius: f64, center: Point) -> Self {
        SpatialProfile::Bump {
            radius,
            center,
            amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (scale, amp) = match self {
            SpatialProfile::Gaussian { sigma, amplitude, .. } => (*sigma, *amplitude),
            SpatialProfile::Bump { radius, amplitude, .. } => (*radius, *amplitude),
        };
        if !(scale > 0.0 && scale.is_finite() && amp.is_finite()) {
            return Err(Error::Support(format!("invalid profile parameters {self:?}")));
        }
        Ok(())
    }

    pub fn center(&self) -> Point {
        match self {
            SpatialProfile::Gaussian { center, .. } | SpatialProfile::Bump { center, .. } => *center,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            SpatialProfile::Gaussian { amplitude, .. } | SpatialProfile::Bump { amplitude, .. } => *amplitude,
        }
    }

    /// Radius of the (effective) support around the center.
    pub fn support_radius(&self) -> f64 {
        match *self {
            SpatialProfile::Gaussian { sigma, .. } => (4.0 * sigma * GAUSSIAN_CUTOFF_EXPONENT).sqrt(),
            SpatialProfile::Bump { radius, .. } => radius,
        }
    }

    /// Length over which the profile changes appreciably.
    pub fn feature_scale(&self) -> f64 {
        match *self {
            SpatialProfile::Gaussian { sigma, .. } => sigma.sqrt(),
            SpatialProfile::Bump { radius, .. } => 0.125 * radius,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match *self {
            SpatialProfile::Gaussian { amplitude, .. } => amplitude.abs(),
            SpatialProfile::Bump { amplitude, .. } => amplitude.abs() * (-1.0f64).exp(),
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match *self {
            SpatialProfile::Gaussian {
                sigma,
                center,
                amplitude,
            } => {
                let e = norm2(&sub(x, &center)) / (4.0 * sigma);
                if e > 745.0 {
                    0.0
                } else {
                    amplitude * (-e).exp()
                }
            }
            SpatialProfile::Bump {
                radius,
                center,
                amplitude,
            } => {
                let q2 = norm2(&sub(x, &center)) / (radius * radius);
                if q2 >= 1.0 {
                    0.0
                } else {
                    amplitude * (-1.0 / (1.0 - q2)).exp()
                }
            }
        }
    }

    /// Closed-form Laplacian in dimension `n`.
    pub fn laplacian(&self, n: usize, x: &Point) -> f64 {
        let nf = n as f64;
        match *self {
            SpatialProfile::Gaussian { sigma, center, .. } => {
                let r2 = norm2(&sub(x, &center));
                self.eval(x) * (r2 / (4.0 * sigma * sigma) - nf / (2.0 * sigma))
            }
            SpatialProfile::Bump { radius, center, .. } => {
                let q2 = norm2(&sub(x, &center)) / (radius * radius);
                if q2 >= 1.0 {
                    return 0.0;
                }
                let d = 1.0 - q2;
                // g'' + (n-1) g'/q with g(q) = exp(-1/(1-q²)), scaled by 1/radius²
                let g2 = 4.0 * q2 / d.powi(4) - 2.0 / (d * d) - 8.0 * q2 / d.powi(3);
                let g1_over_q = -2.0 / (d * d);
                self.eval(x) * (g2 + (nf - 1.0) * g1_over_q) / (radius * radius)
            }
        }
    }

    /// `dist(supp, ∂Ω)`, negative when the support leaves the domain.
    pub fn support_margin(&self, geometry: &BoundaryGeometry) -> Result<f64> {
        let c = self.center();
        if geometry.contains(&c) != Location::Inside {
            return Ok(-1.0);
        }
        let m = if geometry.is_curve() { 2048 } else { 256 };
        let d = geometry
            .boundary_nodes(m)?
            .iter()
            .map(|node| norm(&sub(&node.point, &c)))
            .fold(f64::INFINITY, f64::min);
        Ok(d - self.support_radius())
    }
}

/// Scalar time factors `g(τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeFactor {
    One,
    /// `Σ c_k τ^k`.
    Polynomial(Vec<f64>),
    /// `sin(ω τ)`.
    Sine(f64),
}

impl TimeFactor {
    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            TimeFactor::One => 1.0,
            TimeFactor::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * tau + ck),
            TimeFactor::Sine(w) => (w * tau).sin(),
        }
    }

    pub fn derivative(&self, tau: f64) -> f64 {
        match self {
            TimeFactor::One => 0.0,
            TimeFactor::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * tau + k as f64 * ck),
            TimeFactor::Sine(w) => w * (w * tau).cos(),
        }
    }

    /// `sup |g|` on `[0, t]` (sampled for polynomials).
    pub fn sup_abs(&self, t: f64) -> f64 {
        match self {
            TimeFactor::One => 1.0,
            TimeFactor::Sine(w) => {
                if (w * t).abs() >= 0.5 * PI {
                    1.0
                } else {
                    (w * t).sin().abs()
                }
            }
            TimeFactor::Polynomial(_) => (0..=4096)
                .map(|i| self.eval(t * i as f64 / 4096.0).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Integral over `[0, t]`.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            TimeFactor::One => t,
            TimeFactor::Polynomial(c) => c
                .iter()
                .enumerate()
                .map(|(k, ck)| ck * t.powi(k as i32 + 1) / (k as f64 + 1.0))
                .sum(),
            TimeFactor::Sine(w) => (1.0 - (w * t).cos()) / w,
        }
    }
}

/// Volume sources `f(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum VolumeDensity {
    /// `g(t) β(x)`.
    Separable { profile: SpatialProfile, time: TimeFactor },
    /// `f = a(t)[β(x) - a1(t) Δβ(x)]`, the source whose volume potential is `a1(t) β(x)`.
    Manufactured { profile: SpatialProfile, coefficient: TimeCoefficient },
}

impl VolumeDensity {
    pub fn profile(&self) -> &SpatialProfile {
        match self {
            VolumeDensity::Separable { profile, .. } | VolumeDensity::Manufactured { profile, .. } => profile,
        }
    }

    /// Weights `(w0, w1)` with `f(x, τ) = w0 β(x) + w1 Δβ(x)`.
    pub fn time_weights(&self, tau: f64) -> (f64, f64) {
        match self {
            VolumeDensity::Separable { time, .. } => (time.eval(tau), 0.0),
            VolumeDensity::Manufactured { coefficient, .. } => {
                let a = coefficient.a_unchecked(tau);
                (a, -a * coefficient.a1_unchecked(tau))
            }
        }
    }

    pub fn eval(&self, n: usize, x: &Point, tau: f64) -> f64 {
        let (w0, w1) = self.time_weights(tau);
        let p = self.profile();
        let lap = if w1 != 0.0 { w1 * p.laplacian(n, x) } else { 0.0 };
        w0 * p.eval(x) + lap
    }

    /// The exact volume potential for the manufactured source.
    pub fn manufactured_solution(&self, x: &Point, t: f64) -> Option<f64> {
        match self {
            VolumeDensity::Manufactured { profile, coefficient } => {
                Some(coefficient.a1_unchecked(t) * profile.eval(x))
            }
            VolumeDensity::Separable { .. } => None,
        }
    }
}

/// Angular factor `a0 + Σ_k (a_k cos ks + b_k sin ks)` in the boundary parameter `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierProfile {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierProfile {
    pub fn constant(c: f64) -> Self {
        FourierProfile {
            cos: vec![c],
            sin: vec![],
        }
    }

    pub fn cosine(k: usize) -> Self {
        let mut cos = vec![0.0; k + 1];
        cos[k] = 1.0;
        FourierProfile { cos, sin: vec![] }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let mut v = 0.0;
        for (k, c) in self.cos.iter().enumerate() {
            v += c * (k as f64 * s).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            v += b * (k as f64 * s).sin();
        }
        v
    }
}

/// Boundary values on a uniform parameter grid at a sequence of time levels; trigonometric
/// interpolation in the parameter, linear in `σ = a1(τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySamples {
    /// `σ` values of the levels, increasing, starting at 0.
    pub sigmas: Vec<f64>,
    /// `values[k][i]` at parameter `2πi/m` and level `k`.
    pub values: Vec<Vec<f64>>,
    modes: Vec<(Vec<f64>, Vec<f64>)>,
}

impl BoundarySamples {
    pub fn new(sigmas: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if sigmas.is_empty() || sigmas.len() != values.len() {
            return Err(Error::Resolution("sample levels and values disagree".into()));
        }
        if sigmas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Resolution("sample levels must increase".into()));
        }
        let m = values[0].len();
        if m == 0 || values.iter().any(|v| v.len() != m) {
            return Err(Error::Resolution("ragged sample rows".into()));
        }
        let modes = values.iter().map(|v| real_dft(v)).collect();
        Ok(BoundarySamples { sigmas, values, modes })
    }

    pub fn nodes_per_level(&self) -> usize {
        self.values[0].len()
    }

    fn eval_level(&self, k: usize, s: f64) -> f64 {
        let m = self.nodes_per_level();
        let step = 2.0 * PI / m as f64;
        let x = s / step;
        let i = x.round();
        if (x - i).abs() < 1e-13 {
            return self.values[k][(i as i64).rem_euclid(m as i64) as usize];
        }
        let (a, b) = &self.modes[k];
        let mut v = a[0];
        for j in 1..a.len() {
            let (sn, cs) = (j as f64 * s).sin_cos();
            v += a[j] * cs + b[j] * sn;
        }
        v
    }

    pub fn eval(&self, s: f64, sigma: f64) -> f64 {
        let n = self.sigmas.len();
        if sigma <= self.sigmas[0] {
            return self.eval_level(0, s);
        }
        if sigma >= self.sigmas[n - 1] {
            return self.eval_level(n - 1, s);
        }
        let k = self.sigmas.partition_point(|&x| x <= sigma);
        let (lo, hi) = (self.sigmas[k - 1], self.sigmas[k]);
        let w = (sigma - lo) / (hi - lo);
        (1.0 - w) * self.eval_level(k - 1, s) + w * self.eval_level(k, s)
    }
}

/// Cosine/sine coefficients of the trigonometric interpolant through equispaced samples.
/// The Nyquist mode (even `m`) is split evenly between `cos` and the sampled alias.
fn real_dft(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = v.len();
    let kmax = m / 2;
    let mut a = vec![0.0; kmax + 1];
    let mut b = vec![0.0; kmax + 1];
    for k in 0..=kmax {
        let (mut ca, mut cb) = (0.0, 0.0);
        for (i, vi) in v.iter().enumerate() {
            let (sn, cs) = (2.0 * PI * (k * i) as f64 / m as f64).sin_cos();
            ca += vi * cs;
            cb += vi * sn;
        }
        let scale = if k == 0 || (m % 2 == 0 && k == kmax) {
            1.0 / m as f64
        } else {
            2.0 / m as f64
        };
        a[k] = ca * scale;
        b[k] = cb * scale;
    }
    if m % 2 == 0 {
        b[kmax] = 0.0;
    }
    (a, b)
}

/// Boundary densities `φ(ξ, τ)` in terms of the boundary parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryDensity {
    Zero,
    Constant(f64),
    /// `g(τ) · F(s)`.
    Separable { time: TimeFactor, angular: FourierProfile },
    Samples(BoundarySamples),
}

impl BoundaryDensity {
    /// `τ cos(s)`, the standard smooth density vanishing at `τ = 0`.
    pub fn tau_cos() -> Self {
        BoundaryDensity::Separable {
            time: TimeFactor::Polynomial(vec![0.0, 1.0]),
            angular: FourierProfile::cosine(1),
        }
    }

    /// Value at parameter `s`, time `tau` with `sigma = a1(tau)`.
    pub fn eval(&self, s: f64, tau: f64, sigma: f64) -> f64 {
        match self {
            BoundaryDensity::Zero => 0.0,
            BoundaryDensity::Constant(c) => *c,
            BoundaryDensity::Separable { time, angular } => time.eval(tau) * angular.eval(s),
            BoundaryDensity::Samples(samples) => samples.eval(s, sigma),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BoundaryDensity::Zero)
    }
}

/// Any density accepted by a potential.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceTimeDensity {
    Volume(VolumeDensity),
    Initial(SpatialProfile),
    Boundary(BoundaryDensity),
}

impl SpaceTimeDensity {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SpaceTimeDensity::Volume(_) => "volume",
            SpaceTimeDensity::Initial(_) => "initial",
            SpaceTimeDensity::Boundary(_) => "boundary",
        }
    }

    /// Distance from the support to the boundary for volume and initial densities.
    pub fn support_margin(&self, geometry: &BoundaryGeometry) -> Result<Option<f64>> {
        match self {
            SpaceTimeDensity::Volume(v) => v.profile().support_margin(geometry).map(Some),
            SpaceTimeDensity::Initial(p) => p.support_margin(geometry).map(Some),
            SpaceTimeDensity::Boundary(_) => Ok(None),
        }
    }

    /// Checks the support condition `supp ⊂ Ω` for volume and initial densities.
    pub fn validate(&self, geometry: &BoundaryGeometry) -> Result<()> {
        match self {
            SpaceTimeDensity::Volume(v) => v.profile().validate()?,
            SpaceTimeDensity::Initial(p) => p.validate()?,
            SpaceTimeDensity::Boundary(_) => {}
        }
        if let Some(margin) = self.support_margin(geometry)? {
            if margin <= 0.0 {
                return Err(Error::Support(format!(
                    "{} density support reaches the boundary (margin {margin:.3e})",
                    self.kind_name()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn second_difference(p: &SpatialProfile, n: usize, x: &Point, h: f64) -> f64 {
        let mut lap = 0.0;
        for k in 0..n {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            lap += (p.eval(&xp) - 2.0 * p.eval(x) + p.eval(&xm)) / (h * h);
        }
        lap
    }

    // Richardson-extrapolated central second differences
    fn fd_laplacian(p: &SpatialProfile, n: usize, x: &Point) -> f64 {
        let h = 1e-3;
        (4.0 * second_difference(p, n, x, 0.5 * h) - second_difference(p, n, x, h)) / 3.0
    }

    proptest! {
        #[test]
        fn bump_laplacian_matches_finite_differences(x0 in -0.45f64..0.45, x1 in -0.45f64..0.45, n in 2usize..=3) {
            let p = SpatialProfile::bump(0.5, [0.05, -0.02, 0.0]);
            let x = [x0, x1, if n == 3 { 0.1 } else { 0.0 }];
            let exact = p.laplacian(n, &x);
            let fd = fd_laplacian(&p, n, &x);
            prop_assert!((exact - fd).abs() <= 1e-5 * (1.0 + exact.abs()), "{} vs {}", exact, fd);
        }

        #[test]
        fn gaussian_laplacian_matches_finite_differences(x0 in -0.5f64..0.5, x1 in -0.5f64..0.5, n in 2usize..=3) {
            let p = SpatialProfile::gaussian(0.05, [0.1, 0.0, 0.0]);
            let x = [x0, x1, if n == 3 { -0.1 } else { 0.0 }];
            let exact = p.laplacian(n, &x);
            let fd = fd_laplacian(&p, n, &x);
            prop_assert!((exact - fd).abs() <= 1e-5 * (1.0 + exact.abs()), "{} vs {}", exact, fd);
        }
    }

    #[test]
    fn bump_at_center_and_edge() {
        let p = SpatialProfile::bump(0.5, [0.0; 3]);
        assert_abs_diff_eq!(p.eval(&[0.0; 3]), (-1.0f64).exp(), epsilon = 1e-16);
        assert_eq!(p.eval(&[0.5, 0.0, 0.0]), 0.0);
        // radial second derivative at the center is -2/R² per direction times e^{-1}
        assert_abs_diff_eq!(p.laplacian(2, &[0.0; 3]), -2.0 * 2.0 / 0.25 * (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn support_margin_on_circle() {
        let g = BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap();
        let p = SpatialProfile::bump(0.5, [0.1, 0.0, 0.0]);
        assert_abs_diff_eq!(p.support_margin(&g).unwrap(), 0.4, epsilon = 1e-6);
        let bad = SpaceTimeDensity::Initial(SpatialProfile::bump(0.95, [0.1, 0.0, 0.0]));
        assert!(matches!(bad.validate(&g), Err(Error::Support(_))));
        let ok = SpaceTimeDensity::Initial(p);
        assert!(ok.validate(&g).is_ok());
    }

    #[test]
    fn time_factor_calculus() {
        let g = TimeFactor::Polynomial(vec![1.0, -2.0, 3.0]);
        assert_abs_diff_eq!(g.eval(0.5), 1.0 - 1.0 + 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(g.derivative(0.5), -2.0 + 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.integral(1.0), 1.0 - 1.0 + 1.0, epsilon = 1e-15);
        let s = TimeFactor::Sine(2.0);
        assert_abs_diff_eq!(s.integral(PI / 2.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn manufactured_source_weights() {
        let c = TimeCoefficient::power(2.0, 1.0).unwrap();
        let p = SpatialProfile::bump(0.5, [0.0; 3]);
        let f = VolumeDensity::Manufactured {
            profile: p.clone(),
            coefficient: c,
        };
        let x = [0.1, 0.2, 0.0];
        let t: f64 = 0.6;
        let expected = t * t * (p.eval(&x) - t.powi(3) / 3.0 * p.laplacian(2, &x));
        assert_abs_diff_eq!(f.eval(2, &x, t), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(f.manufactured_solution(&x, t).unwrap(), t.powi(3) / 3.0 * p.eval(&x), epsilon = 1e-15);
    }

    #[test]
    fn samples_interpolate_trig_polynomials() {
        let m = 16;
        let f = |s: f64| 0.3 + (s).cos() - 0.5 * (3.0 * s).sin() + 0.2 * (8.0 * s).cos();
        let row: Vec<f64> = (0..m).map(|i| f(2.0 * PI * i as f64 / m as f64)).collect();
        let twice: Vec<f64> = row.iter().map(|v| 2.0 * v).collect();
        let samples = BoundarySamples::new(vec![0.0, 1.0], vec![row, twice]).unwrap();
        // the Nyquist mode is represented by its cosine alias, exact at the nodes only
        let g = |s: f64| f(s) - 0.2 * (8.0 * s).cos();
        for s in [0.1, 1.3, 4.0] {
            let interp = samples.eval(s, 0.5) - 1.5 * 0.2 * (8.0 * s).cos();
            assert_abs_diff_eq!(interp, 1.5 * g(s), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(samples.eval(2.0 * PI * 3.0 / 16.0, 1.0), 2.0 * f(2.0 * PI * 3.0 / 16.0), epsilon = 1e-14);
        assert!(BoundarySamples::new(vec![0.0, 0.0], vec![vec![1.0], vec![1.0]]).is_err());
    }
}
