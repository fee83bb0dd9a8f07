//! Nontangential boundary limits by extrapolation along the normal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::layer::{double_layer, eval_single_layer_normal_derivative};
use super::PotentialField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Interior,
    Exterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub value: f64,
    /// Difference between the last two extrapolation levels.
    pub error_estimate: f64,
    pub offsets: Vec<f64>,
    pub samples: Vec<f64>,
}

/// Differences below this are treated as converged noise in the contraction check.
const NOISE_FLOOR: f64 = 1e-9;

/// Extrapolates samples taken at `h, h/2, h/4, ...` to `h = 0`, eliminating the
/// `h, h², ...` terms in turn. Fails when successive samples do not contract.
pub fn richardson_limit(offsets: &[f64], samples: &[f64]) -> Result<LimitEstimate> {
    let m = samples.len();
    if m < 2 || offsets.len() != m {
        return Err(Error::Numerical("extrapolation needs at least two samples".into()));
    }
    let diffs: Vec<f64> = samples.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for w in diffs.windows(2) {
        if w[1] > NOISE_FLOOR && w[1] > 0.95 * w[0] {
            return Err(Error::Numerical(format!(
                "normal-offset samples do not contract: {samples:?}"
            )));
        }
    }
    let mut table = vec![samples.to_vec()];
    for k in 1..m {
        let prev = &table[k - 1];
        let factor = 2f64.powi(k as i32);
        let row: Vec<f64> = (1..prev.len())
            .map(|i| (factor * prev[i] - prev[i - 1]) / (factor - 1.0))
            .collect();
        table.push(row);
    }
    let value = table[m - 1][0];
    let error_estimate = (value - table[m - 2][table[m - 2].len() - 1]).abs();
    Ok(LimitEstimate {
        value,
        error_estimate,
        offsets: offsets.to_vec(),
        samples: samples.to_vec(),
    })
}

fn offsets(field: &PotentialField) -> Vec<f64> {
    let h0 = 0.05 * field.geometry().diameter();
    (0..4).map(|k| h0 / 2f64.powi(k)).collect()
}

/// Limit of `⟨∇ₓ Sφ(x, t), ν(ξ0)⟩` as `x → ξ0` along the normal from `side`; `ξ0` is
/// the boundary point with parameter `s0`.
pub fn single_layer_gradient_limit(field: &PotentialField, s0: f64, t: f64, side: Side) -> Result<LimitEstimate> {
    let node = field.geometry().boundary_point(s0);
    let hs = offsets(field);
    let sign = match side {
        Side::Interior => -1.0,
        Side::Exterior => 1.0,
    };
    let samples = hs
        .par_iter()
        .map(|h| {
            let x = field.geometry().offset_along_normal(&node, sign * h)?;
            eval_single_layer_normal_derivative(field, &x, &node.normal, t)
        })
        .collect::<Result<Vec<f64>>>()?;
    richardson_limit(&hs, &samples)
}

/// Interior limit of `Dφ(x, t)` as `x → ξ0` along the normal.
pub fn double_layer_boundary_limit(field: &PotentialField, s0: f64, t: f64) -> Result<LimitEstimate> {
    let node = field.geometry().boundary_point(s0);
    let hs = offsets(field);
    let samples = hs
        .par_iter()
        .map(|h| {
            let x = field.geometry().offset_along_normal(&node, -h)?;
            double_layer(field, &x, t)
        })
        .collect::<Result<Vec<f64>>>()?;
    richardson_limit(&hs, &samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_removes_polynomial_terms() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let f = |h: f64| 2.0 + 0.7 * h - 3.0 * h * h + 5.0 * h * h * h;
        let samples: Vec<f64> = hs.iter().map(|&h| f(h)).collect();
        let est = richardson_limit(&hs, &samples).unwrap();
        assert!((est.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn non_contracting_samples_are_rejected() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let samples = [1.0, 2.0, 0.0, 3.0];
        assert!(matches!(richardson_limit(&hs, &samples), Err(Error::Numerical(_))));
    }
}
