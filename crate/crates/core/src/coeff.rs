//! The time coefficient `a(t)`, its antiderivative `a1(t)` and the transformed
//! time difference `b(t, tau) = a1(t) - a1(tau)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive;

/// Relative slack allowed when a time argument sits on the ends of [0, T].
const TIME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoefficientKind {
    /// `a(t) = c`.
    Constant(f64),
    /// `a(t) = t^p`, `p >= 0`.
    Power(f64),
    /// `a(t) = alpha + beta t`.
    Affine { alpha: f64, beta: f64 },
    /// On `[breakpoints[i], breakpoints[i+1]]`, `a(t) = sum_k rows[i][k] (t - breakpoints[i])^k`.
    PiecewisePolynomial {
        breakpoints: Vec<f64>,
        rows: Vec<Vec<f64>>,
    },
    /// Samples `(grid[i], values[i])`, linearly interpolated.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

/// Which structural hypothesis on `a` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    /// `a >= 0`, vanishing only at isolated points.
    A,
    /// `a1(t) > 0` for all `t > 0`.
    B,
    Neither,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeCoefficient {
    kind: CoefficientKind,
    horizon: f64,
    /// Cumulative integral of `a` at each breakpoint / grid point.
    cumulative: Vec<f64>,
    assumption: Assumption,
}

impl TimeCoefficient {
    pub fn new(kind: CoefficientKind, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidCoefficient(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        let cumulative = match &kind {
            CoefficientKind::Constant(c) if !c.is_finite() => {
                return Err(Error::InvalidCoefficient("non-finite constant".into()))
            }
            CoefficientKind::Power(p) if !(*p >= 0.0 && p.is_finite()) => {
                return Err(Error::InvalidCoefficient(format!(
                    "power exponent must be >= 0, got {p}"
                )))
            }
            CoefficientKind::PiecewisePolynomial { breakpoints, rows } => {
                validate_grid(breakpoints, horizon)?;
                if rows.len() + 1 != breakpoints.len() {
                    return Err(Error::InvalidCoefficient(format!(
                        "{} breakpoints need {} coefficient rows, got {}",
                        breakpoints.len(),
                        breakpoints.len() - 1,
                        rows.len()
                    )));
                }
                let mut cum = vec![0.0];
                for (i, row) in rows.iter().enumerate() {
                    let h = breakpoints[i + 1] - breakpoints[i];
                    let last = *cum.last().unwrap();
                    cum.push(last + poly_antiderivative(row, h));
                }
                cum
            }
            CoefficientKind::Tabulated { grid, values } => {
                validate_grid(grid, horizon)?;
                if grid.len() != values.len() {
                    return Err(Error::InvalidCoefficient(
                        "tabulated grid and values differ in length".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidCoefficient("non-finite tabulated value".into()));
                }
                let mut cum = vec![0.0];
                for i in 1..grid.len() {
                    let h = grid[i] - grid[i - 1];
                    let last = *cum.last().unwrap();
                    cum.push(last + 0.5 * h * (values[i] + values[i - 1]));
                }
                cum
            }
            _ => Vec::new(),
        };
        let mut coeff = Self {
            kind,
            horizon,
            cumulative,
            assumption: Assumption::Neither,
        };
        coeff.assumption = coeff.classify_assumption(256);
        Ok(coeff)
    }

    pub fn constant(c: f64, horizon: f64) -> Result<Self> {
        Self::new(CoefficientKind::Constant(c), horizon)
    }

    pub fn power(p: f64, horizon: f64) -> Result<Self> {
        Self::new(CoefficientKind::Power(p), horizon)
    }

    pub fn affine(alpha: f64, beta: f64, horizon: f64) -> Result<Self> {
        Self::new(CoefficientKind::Affine { alpha, beta }, horizon)
    }

    pub fn kind(&self) -> &CoefficientKind {
        &self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Classification computed at construction on a 256-point grid.
    pub fn assumption(&self) -> Assumption {
        self.assumption
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let slack = TIME_SLACK * self.horizon;
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(Error::Domain {
                t,
                horizon: self.horizon,
            });
        }
        Ok(t.clamp(0.0, self.horizon))
    }

    /// `a(t)`.
    pub fn eval_a(&self, t: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        Ok(self.a_unchecked(t))
    }

    pub(crate) fn a_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            CoefficientKind::Constant(c) => *c,
            CoefficientKind::Power(p) => {
                if *p == 0.0 {
                    1.0
                } else {
                    t.powf(*p)
                }
            }
            CoefficientKind::Affine { alpha, beta } => alpha + beta * t,
            CoefficientKind::PiecewisePolynomial { breakpoints, rows } => {
                let i = locate(breakpoints, t);
                horner(&rows[i], t - breakpoints[i])
            }
            CoefficientKind::Tabulated { grid, values } => {
                let i = locate(grid, t);
                let h = grid[i + 1] - grid[i];
                let w = (t - grid[i]) / h;
                values[i] * (1.0 - w) + values[i + 1] * w
            }
        }
    }

    /// `a1(t) = int_0^t a(z) dz`.
    pub fn eval_a1(&self, t: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        Ok(self.a1_unchecked(t))
    }

    pub(crate) fn a1_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            CoefficientKind::Constant(c) => c * t,
            CoefficientKind::Power(p) => t.powf(p + 1.0) / (p + 1.0),
            CoefficientKind::Affine { alpha, beta } => alpha * t + 0.5 * beta * t * t,
            CoefficientKind::PiecewisePolynomial { breakpoints, rows } => {
                let i = locate(breakpoints, t);
                self.cumulative[i] + poly_antiderivative(&rows[i], t - breakpoints[i])
            }
            CoefficientKind::Tabulated { grid, values } => {
                let i = locate(grid, t);
                let h = t - grid[i];
                let a_t = self.a_unchecked(t);
                self.cumulative[i] + 0.5 * h * (values[i] + a_t)
            }
        }
    }

    /// `b(t, tau) = a1(t) - a1(tau)` for `tau <= t`.
    pub fn eval_b(&self, t: f64, tau: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        let tau = self.check_time(tau)?;
        if tau > t {
            return Err(Error::Order { t, tau });
        }
        if tau == t {
            return Ok(0.0);
        }
        Ok(self.a1_unchecked(t) - self.a1_unchecked(tau))
    }

    /// Classify on a uniform grid of `grid_size + 1` points.
    pub fn classify_assumption(&self, grid_size: usize) -> Assumption {
        let n = grid_size.max(64);
        let ts: Vec<f64> = (0..=n).map(|i| self.horizon * i as f64 / n as f64).collect();
        let zero_tol = 1e-12;
        let values: Vec<f64> = ts.iter().map(|&t| self.a_unchecked(t)).collect();
        let nonneg = values.iter().all(|&v| v >= -zero_tol);
        let isolated = values
            .windows(2)
            .all(|w| !(w[0].abs() <= zero_tol && w[1].abs() <= zero_tol));
        if nonneg && isolated {
            return Assumption::A;
        }
        if ts[1..].iter().all(|&t| self.a1_unchecked(t) > 0.0) {
            Assumption::B
        } else {
            Assumption::Neither
        }
    }

    /// The time `tau` with `b(t, tau) = z`; requires assumption (a).
    pub fn invert_b(&self, t: f64, z: f64) -> Result<f64> {
        if self.assumption != Assumption::A {
            return Err(Error::Assumption(
                "inverting b(t, .) needs a nondecreasing a1 (assumption (a))".into(),
            ));
        }
        let t = self.check_time(t)?;
        let a1t = self.a1_unchecked(t);
        let slack = 1e-13 * a1t.abs().max(1e-300);
        if !(z >= -slack && z <= a1t + slack) {
            return Err(Error::Range {
                value: z,
                lo: 0.0,
                hi: a1t,
            });
        }
        if z <= 0.0 {
            return Ok(t);
        }
        Ok(self.tau_of_sigma((a1t - z).max(0.0), t))
    }

    /// Inverse of `a1` on `[0, upper]` for a nondecreasing `a1`: smallest `tau` with `a1(tau) = sigma`.
    pub(crate) fn tau_of_sigma(&self, sigma: f64, upper: f64) -> f64 {
        match &self.kind {
            CoefficientKind::Constant(c) => (sigma / c).min(upper),
            CoefficientKind::Power(p) => ((p + 1.0) * sigma).powf(1.0 / (p + 1.0)).min(upper),
            _ => {
                // Safeguarded Newton on a1(tau) - sigma over [0, upper].
                let mut lo = 0.0;
                let mut hi = upper;
                let mut tau = 0.5 * (lo + hi);
                for _ in 0..200 {
                    let f = self.a1_unchecked(tau) - sigma;
                    if f.abs() <= 1e-15 * sigma.abs().max(1e-300) {
                        break;
                    }
                    if f > 0.0 {
                        hi = tau;
                    } else {
                        lo = tau;
                    }
                    let d = self.a_unchecked(tau);
                    let newton = tau - f / d;
                    tau = if d > 0.0 && newton > lo && newton < hi {
                        newton
                    } else {
                        0.5 * (lo + hi)
                    };
                    if hi - lo <= 4.0 * f64::EPSILON * upper {
                        break;
                    }
                }
                tau
            }
        }
    }

    /// Independent check of `int_0^T |a|`, finite for every admissible kind.
    pub fn l1_norm(&self) -> Result<f64> {
        let breaks: Vec<f64> = match &self.kind {
            CoefficientKind::PiecewisePolynomial { breakpoints, .. } => breakpoints.clone(),
            CoefficientKind::Tabulated { grid, .. } => grid.clone(),
            _ => vec![0.0, self.horizon],
        };
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (a, b) = (w[0].min(self.horizon), w[1].min(self.horizon));
            if b > a {
                total += adaptive(|t| self.a_unchecked(t).abs(), a, b, 1e-14, 1e-10)?;
            }
        }
        Ok(total)
    }
}

fn validate_grid(grid: &[f64], horizon: f64) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidCoefficient("need at least two grid points".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::InvalidCoefficient("grid must start at t = 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidCoefficient("grid must be strictly increasing".into()));
    }
    if *grid.last().unwrap() < horizon * (1.0 - TIME_SLACK) {
        return Err(Error::InvalidCoefficient(format!(
            "grid ends at {} before the horizon {horizon}",
            grid.last().unwrap()
        )));
    }
    Ok(())
}

/// Index `i` of the cell `[grid[i], grid[i+1]]` containing `t` (clamped to the ends).
fn locate(grid: &[f64], t: f64) -> usize {
    let last = grid.len() - 2;
    match grid.binary_search_by(|g| g.total_cmp(&t)) {
        Ok(i) => i.min(last),
        Err(i) => i.saturating_sub(1).min(last),
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_antiderivative(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (k, c)| acc * x + c / (k as f64 + 1.0))
        * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn quad_a1(c: &TimeCoefficient, t: f64) -> f64 {
        adaptive(|s| c.eval_a(s).unwrap(), 0.0, t, 1e-15, 1e-13).unwrap()
    }

    #[test]
    fn eval_a_examples() {
        assert_eq!(TimeCoefficient::constant(1.0, 1.0).unwrap().eval_a(0.5).unwrap(), 1.0);
        assert_eq!(TimeCoefficient::power(2.0, 3.0).unwrap().eval_a(2.0).unwrap(), 4.0);
        let aff = TimeCoefficient::affine(1.0, -2.0, 1.0).unwrap();
        assert_abs_diff_eq!(aff.eval_a(0.75).unwrap(), -0.5, epsilon = 1e-15);
        assert!(matches!(aff.eval_a(1.5), Err(Error::Domain { .. })));
        assert!(matches!(aff.eval_a(-0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn eval_a1_examples() {
        let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(c.eval_a1(0.3).unwrap(), 0.3, epsilon = 1e-15);
        let p = TimeCoefficient::power(1.0, 2.0).unwrap();
        assert_abs_diff_eq!(p.eval_a1(2.0).unwrap(), 2.0, epsilon = 1e-15);
        let aff = TimeCoefficient::affine(1.0, -2.0, 0.9).unwrap();
        // oracle: adaptive quadrature of a
        let oracle = quad_a1(&aff, 0.5);
        assert_abs_diff_eq!(oracle, 0.25, epsilon = 1e-13);
        assert_abs_diff_eq!(aff.eval_a1(0.5).unwrap(), oracle, epsilon = 1e-13);
        assert_eq!(aff.eval_a1(0.0).unwrap(), 0.0);
    }

    #[test]
    fn eval_b_examples() {
        let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(c.eval_b(0.8, 0.3).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(c.eval_b(0.4, 0.4).unwrap(), 0.0);
        let p = TimeCoefficient::power(1.0, 1.0).unwrap();
        let oracle = adaptive(|s| s, 0.5, 1.0, 1e-15, 1e-14).unwrap();
        assert_abs_diff_eq!(oracle, 0.375, epsilon = 1e-14);
        assert_abs_diff_eq!(p.eval_b(1.0, 0.5).unwrap(), 0.375, epsilon = 1e-15);
        assert!(matches!(p.eval_b(0.3, 0.5), Err(Error::Order { .. })));
    }

    #[test]
    fn classification_examples() {
        assert_eq!(TimeCoefficient::constant(1.0, 1.0).unwrap().assumption(), Assumption::A);
        assert_eq!(
            TimeCoefficient::affine(1.0, -2.0, 0.9).unwrap().classify_assumption(64),
            Assumption::B
        );
        assert_eq!(
            TimeCoefficient::affine(-1.0, 0.0, 1.0).unwrap().classify_assumption(64),
            Assumption::Neither
        );
        // t^2 vanishes only at t = 0
        assert_eq!(TimeCoefficient::power(2.0, 1.0).unwrap().assumption(), Assumption::A);
        // a = (t - 1/2)^2 has an isolated interior zero
        let pp = TimeCoefficient::new(
            CoefficientKind::PiecewisePolynomial {
                breakpoints: vec![0.0, 1.0],
                rows: vec![vec![0.25, -1.0, 1.0]],
            },
            1.0,
        )
        .unwrap();
        assert_eq!(pp.assumption(), Assumption::A);
        // vanishing on a whole interval: a1 stays positive, so only (b)
        let flat = TimeCoefficient::new(
            CoefficientKind::Tabulated {
                grid: vec![0.0, 0.5, 1.0],
                values: vec![1.0, 0.0, 0.0],
            },
            1.0,
        )
        .unwrap();
        assert_eq!(flat.classify_assumption(64), Assumption::B);
    }

    #[test]
    fn invert_b_examples() {
        let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(c.invert_b(1.0, 0.25).unwrap(), 0.75, epsilon = 1e-15);
        let p = TimeCoefficient::power(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.invert_b(1.0, 0.375).unwrap(), 0.5, epsilon = 1e-14);
        assert_eq!(p.invert_b(0.7, 0.0).unwrap(), 0.7);
        assert!(matches!(p.invert_b(1.0, 0.6), Err(Error::Range { .. })));
        let aff = TimeCoefficient::affine(1.0, -2.0, 0.9).unwrap();
        assert!(matches!(aff.invert_b(0.5, 0.1), Err(Error::Assumption(_))));
    }

    #[test]
    fn piecewise_and_tabulated_antiderivatives() {
        let pp = TimeCoefficient::new(
            CoefficientKind::PiecewisePolynomial {
                breakpoints: vec![0.0, 0.5, 1.0],
                rows: vec![vec![1.0, 2.0], vec![2.0, 0.0, -3.0]],
            },
            1.0,
        )
        .unwrap();
        for t in [0.1, 0.5, 0.77, 1.0] {
            assert_abs_diff_eq!(pp.eval_a1(t).unwrap(), quad_a1(&pp, t), epsilon = 1e-12);
        }
        let tab = TimeCoefficient::new(
            CoefficientKind::Tabulated {
                grid: vec![0.0, 0.3, 0.6, 1.0],
                values: vec![0.5, 1.0, 2.0, 1.5],
            },
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(tab.eval_a(0.45).unwrap(), 1.5, epsilon = 1e-14);
        for t in [0.2, 0.6, 0.9] {
            let breaks: Vec<f64> = [0.0, 0.3, 0.6, 1.0].into_iter().filter(|&g| g < t).chain([t]).collect();
            let oracle: f64 = breaks
                .windows(2)
                .map(|w| adaptive(|s| tab.eval_a(s).unwrap(), w[0], w[1], 1e-15, 1e-13).unwrap())
                .sum();
            assert_abs_diff_eq!(tab.eval_a1(t).unwrap(), oracle, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(tab.l1_norm().unwrap(), tab.eval_a1(1.0).unwrap(), epsilon = 1e-10);
        let back = tab.invert_b(0.9, tab.eval_b(0.9, 0.4).unwrap()).unwrap();
        assert_abs_diff_eq!(back, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn a1_nondecreasing_for_presets() {
        for c in [
            TimeCoefficient::constant(1.0, 1.0).unwrap(),
            TimeCoefficient::power(2.0, 1.0).unwrap(),
            TimeCoefficient::affine(0.0, 1.0, 2.0).unwrap(),
        ] {
            assert_eq!(c.assumption(), Assumption::A);
            let a1: Vec<f64> = (0..=1000)
                .map(|i| c.eval_a1(c.horizon() * i as f64 / 1000.0).unwrap())
                .collect();
            assert!(a1.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for c in [
            TimeCoefficient::constant(2.5, 1.0).unwrap(),
            TimeCoefficient::power(2.0, 1.5).unwrap(),
            TimeCoefficient::power(0.5, 1.5).unwrap(),
            TimeCoefficient::affine(1.0, -2.0, 0.9).unwrap(),
        ] {
            for k in 1..=8 {
                let t = c.horizon() * k as f64 / 8.0;
                let exact = c.eval_a1(t).unwrap();
                let q = quad_a1(&c, t);
                assert!((exact - q).abs() <= 1e-9 * exact.abs().max(1e-300), "{c:?} t={t}");
            }
        }
    }

    fn preset() -> impl Strategy<Value = TimeCoefficient> {
        prop_oneof![
            (0.1f64..3.0).prop_map(|c| TimeCoefficient::constant(c, 1.0).unwrap()),
            (0.0f64..3.0).prop_map(|p| TimeCoefficient::power(p, 1.0).unwrap()),
            (0.0f64..2.0, 0.0f64..2.0)
                .prop_map(|(a, b)| TimeCoefficient::affine(a + 0.01, b, 1.0).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn b_is_additive(c in preset(), x in 0.0f64..1.0, y in 0.0f64..1.0, w in 0.0f64..1.0) {
            let mut v = [x, y, w];
            v.sort_by(f64::total_cmp);
            let (tau, s, t) = (v[0], v[1], v[2]);
            let lhs = c.eval_b(t, s).unwrap() + c.eval_b(s, tau).unwrap();
            prop_assert!((lhs - c.eval_b(t, tau).unwrap()).abs() <= 1e-12);
            prop_assert_eq!(c.eval_b(t, t).unwrap(), 0.0);
            prop_assert_eq!(c.eval_b(t, 0.0).unwrap(), c.eval_a1(t).unwrap());
        }

        #[test]
        fn invert_b_round_trip(c in preset(), t in 0.01f64..1.0, frac in 0.0f64..1.0) {
            let z = frac * c.eval_a1(t).unwrap();
            let tau = c.invert_b(t, z).unwrap();
            prop_assert!((0.0..=t).contains(&tau));
            prop_assert!((c.eval_b(t, tau).unwrap() - z).abs() <= 1e-10);
        }
    }
}
