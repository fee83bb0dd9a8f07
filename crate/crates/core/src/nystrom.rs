//! Nyström matrices for the single- and double-layer operators on a plane curve with
//! densities sampled at the boundary nodes on a grid of `σ = a1(τ)` levels and linear in
//! `σ` between levels.
//!
//! For a target value `σ_t`, the slab `[σ_{j-1}, σ_j] ∩ [0, σ_t]` maps to
//! `z = σ_t - σ ∈ [z_lo, z_hi]`, where the kernels have the closed-form moments
//!
//! ```text
//! single:  ∫ ε dz   = (E1(w_hi) - E1(w_lo))/(4π),
//!          ∫ z ε dz = [z e^{-w} - (r²/4) E1(w)]/(4π)  between the ends,
//! double:  ∫ K dz   = ⟨d, ν⟩/(2πr²) (e^{-w_hi} - e^{-w_lo}),
//!          ∫ z K dz = ⟨d, ν⟩/(8π) (E1(w_hi) - E1(w_lo)),
//! ```
//!
//! with `w = r²/(4z)`. The single layer on the slab touching `z = 0` has a logarithmic
//! singularity at the target, integrated with Kress's product rule.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{dot, norm2, sub, BoundaryGeometry, BoundaryNode};
use crate::special::{exp_integral_e1, EULER_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Single,
    Double,
}

/// Boundary nodes, the upsampled grid, and the quadrature tables shared by all targets.
#[derive(Debug, Clone)]
pub struct Discretization {
    m: usize,
    upsampling: usize,
    nodes: Vec<BoundaryNode>,
    fine: Vec<BoundaryNode>,
    curvature: Vec<f64>,
    interp: Option<DMatrix<f64>>,
    /// `2π R_d`, Kress weights for `ln(4 sin²((s - s_i)/2))` by index distance `d`.
    kress: Vec<f64>,
}

impl Discretization {
    /// `m` even nodes; the grid is refined until the arc-length spacing is below
    /// `0.9 sqrt(2 ζ)`, `ζ` the smallest `z`-extent of a slab touching the target.
    pub fn new(geometry: &BoundaryGeometry, m: usize, min_zeta: f64) -> Result<Self> {
        if !geometry.is_curve() {
            return Err(Error::UnsupportedKind("Nyström layer operators need a plane curve".into()));
        }
        if m < 8 || m % 2 != 0 {
            return Err(Error::Resolution(format!("m_space must be even and >= 8, got {m}")));
        }
        if !(min_zeta > 0.0) {
            return Err(Error::Resolution("time step must be positive".into()));
        }
        let max_speed = (0..512)
            .map(|i| geometry.boundary_point(2.0 * PI * i as f64 / 512.0).weight)
            .fold(0.0, f64::max);
        let coarse_arc = max_speed * 2.0 * PI / m as f64;
        let upsampling = ((coarse_arc / (0.9 * (2.0 * min_zeta).sqrt())).ceil() as usize).max(1);
        let fine_m = upsampling * m;
        let fine = geometry.boundary_nodes(fine_m)?;
        let curvature = fine.iter().map(|n| geometry.curvature(n.s)).collect();
        let interp = (upsampling > 1).then(|| trig_interpolation(m, upsampling));
        let n = fine_m / 2;
        let kress = (0..fine_m)
            .map(|d| {
                let x = 2.0 * PI * d as f64 / fine_m as f64;
                let mut r = 0.0;
                for k in 1..n {
                    r += (k as f64 * x).cos() / k as f64;
                }
                let nyquist = if d % 2 == 0 { 1.0 } else { -1.0 };
                let rd = -r / n as f64 - nyquist / (2.0 * (n * n) as f64);
                2.0 * PI * rd
            })
            .collect();
        Ok(Discretization {
            m,
            upsampling,
            nodes: geometry.boundary_nodes(m)?,
            fine,
            curvature,
            interp,
            kress,
        })
    }

    pub fn nodes(&self) -> &[BoundaryNode] {
        &self.nodes
    }

    pub fn upsampling(&self) -> usize {
        self.upsampling
    }

    /// Matrices `W_j` with `(Lφ)(ξ_i, σ_t) = Σ_j (W_j φ_j)_i`, one per level of `sigmas`
    /// (zero for levels that do not reach below `σ_t`).
    pub fn level_matrices(&self, kind: LayerKind, sigmas: &[f64], sigma_t: f64) -> Vec<DMatrix<f64>> {
        self.blocks(kind, sigmas, sigma_t, sigmas.len(), |j, side| j - 1 + side)
    }

    /// Per-slab blocks `[to level j-1, to level j]` for the slabs `j = 1..` below `σ_t`. On a
    /// uniform grid they depend only on the lag `σ_t - σ_j`, so one target time serves all.
    pub fn slab_matrices(&self, kind: LayerKind, sigmas: &[f64], sigma_t: f64) -> Vec<[DMatrix<f64>; 2]> {
        let slabs = (1..sigmas.len()).take_while(|&j| sigmas[j - 1] < sigma_t).count();
        let mut flat = self.blocks(kind, sigmas, sigma_t, 2 * slabs, |j, side| 2 * (j - 1) + side).into_iter();
        (0..slabs)
            .map(|_| [flat.next().unwrap(), flat.next().unwrap()])
            .collect()
    }

    fn blocks<I: Fn(usize, usize) -> usize + Sync>(
        &self,
        kind: LayerKind,
        sigmas: &[f64],
        sigma_t: f64,
        count: usize,
        index: I,
    ) -> Vec<DMatrix<f64>> {
        let fine_m = self.fine.len();
        let rows: Vec<Vec<Vec<f64>>> = (0..self.m)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![vec![0.0; fine_m]; count];
                self.visit_row(kind, sigmas, sigma_t, i, |j, side, l, w| row[index(j, side)][l] += w);
                row
            })
            .collect();
        (0..count)
            .map(|j| {
                let fine_block = DMatrix::from_fn(self.m, fine_m, |i, l| rows[i][j][l]);
                match &self.interp {
                    Some(t) => fine_block * t,
                    None => fine_block,
                }
            })
            .collect()
    }

    pub fn apply_levels(&self, kind: LayerKind, sigmas: &[f64], sigma_t: f64, values: &[DVector<f64>]) -> DVector<f64> {
        let fine: Vec<DVector<f64>> = values
            .iter()
            .map(|v| match &self.interp {
                Some(t) => t * v,
                None => v.clone(),
            })
            .collect();
        let out: Vec<f64> = (0..self.m)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                self.visit_row(kind, sigmas, sigma_t, i, |j, side, l, w| {
                    if let Some(f) = fine.get(j - 1 + side) {
                        acc += w * f[l];
                    }
                });
                acc
            })
            .collect();
        DVector::from_vec(out)
    }

    /// Calls `add(slab, side, fine_index, weight)` for every quadrature weight of target `i`;
    /// side 0 feeds level `slab - 1`, side 1 level `slab`.
    fn visit_row<F: FnMut(usize, usize, usize, f64)>(&self, kind: LayerKind, sigmas: &[f64], sigma_t: f64, i: usize, mut add: F) {
        let fine_m = self.fine.len();
        let h = 2.0 * PI / fine_m as f64;
        let self_index = i * self.upsampling;
        let target = &self.nodes[i];
        // slab j covers [σ_{j-1}, min(σ_j, σ_t)]; boundary b sits at z = max(σ_t - σ_b, 0)
        let slabs = (1..sigmas.len()).take_while(|&j| sigmas[j - 1] < sigma_t).count();
        if slabs == 0 {
            return;
        }
        let z_at: Vec<f64> = (0..=slabs).map(|b| (sigma_t - sigmas[b]).max(0.0)).collect();
        // level weights a M0 + b M1 for levels j-1 and j
        let coef: Vec<[(f64, f64); 2]> = (1..=slabs)
            .map(|j| {
                let (s_lo, s_hi) = (sigmas[j - 1], sigmas[j]);
                let delta = s_hi - s_lo;
                [((s_hi - sigma_t) / delta, 1.0 / delta), ((sigma_t - s_lo) / delta, -1.0 / delta)]
            })
            .collect();
        let mut e1 = vec![0.0; slabs + 1];
        let mut ex = vec![0.0; slabs + 1];
        for (l, src) in self.fine.iter().enumerate() {
            let jac = src.weight / h; // speed
            let d = sub(&target.point, &src.point);
            let r2 = norm2(&d);
            let nd = dot(&d, &src.normal);
            if l != self_index {
                for b in 0..=slabs {
                    let z = z_at[b];
                    let w = if z > 0.0 { r2 / (4.0 * z) } else { f64::INFINITY };
                    (e1[b], ex[b]) = if w > 700.0 { (0.0, 0.0) } else { (exp_integral_e1(w), (-w).exp()) };
                }
            }
            for j in 1..=slabs {
                let (z_lo, z_hi) = (z_at[j], z_at[j - 1]);
                let (lo, hi) = (j, j - 1);
                match kind {
                    LayerKind::Double => {
                        let (m0, m1) = if l == self_index {
                            if z_lo == 0.0 {
                                (-self.curvature[l] / (4.0 * PI), 0.0)
                            } else {
                                (0.0, 0.0)
                            }
                        } else {
                            (nd / (2.0 * PI * r2) * (ex[hi] - ex[lo]), nd / (8.0 * PI) * (e1[hi] - e1[lo]))
                        };
                        for (k, &(a, b)) in coef[j - 1].iter().enumerate() {
                            add(j, k, l, (a * m0 + b * m1) * jac * h);
                        }
                    }
                    LayerKind::Single if z_lo > 0.0 => {
                        let (m0, m1) = if l == self_index {
                            ((z_hi / z_lo).ln() / (4.0 * PI), (z_hi - z_lo) / (4.0 * PI))
                        } else {
                            let diff = e1[hi] - e1[lo];
                            (diff / (4.0 * PI), (z_hi * ex[hi] - z_lo * ex[lo] - 0.25 * r2 * diff) / (4.0 * PI))
                        };
                        for (k, &(a, b)) in coef[j - 1].iter().enumerate() {
                            add(j, k, l, (a * m0 + b * m1) * jac * h);
                        }
                    }
                    LayerKind::Single => {
                        // K = α(w) E1(w) + β(w) with α = (a - b ζ w)/(4π), β = b ζ e^{-w}/(4π)
                        let zeta = z_hi;
                        let w = r2 / (4.0 * zeta);
                        let dist = (l + fine_m - self_index) % fine_m;
                        let log_sin = if l == self_index {
                            0.0
                        } else {
                            let half = 0.5 * (src.s - target.s);
                            (4.0 * half.sin().powi(2)).ln()
                        };
                        for (k, &(a, b)) in coef[j - 1].iter().enumerate() {
                            let alpha = (a - b * zeta * w) / (4.0 * PI);
                            let remainder = if l == self_index {
                                let alpha0 = a / (4.0 * PI);
                                let beta0 = b * zeta / (4.0 * PI);
                                alpha0 * (-EULER_GAMMA + (4.0 * zeta).ln() - (jac * jac).ln()) + beta0
                            } else {
                                alpha * e1[hi] + b * zeta * ex[hi] / (4.0 * PI) + alpha * log_sin
                            };
                            add(j, k, l, (self.kress[dist] * -alpha + h * remainder) * jac);
                        }
                    }
                }
            }
        }
    }
}

/// `(p m) × m` matrix evaluating the trigonometric interpolant of `m` equispaced samples
/// (even `m`, Nyquist mode as a cosine) on a grid refined by `p`.
pub(crate) fn trig_interpolation(m: usize, p: usize) -> DMatrix<f64> {
    let fine = m * p;
    let half = m / 2;
    DMatrix::from_fn(fine, m, |l, j| {
        let x = 2.0 * PI * (l as f64 / fine as f64 - j as f64 / m as f64);
        let mut v = 1.0;
        for k in 1..half {
            v += 2.0 * (k as f64 * x).cos();
        }
        v += (half as f64 * x).cos();
        v / m as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_interpolation_reproduces_modes() {
        let m = 8;
        let t = trig_interpolation(m, 3);
        let coarse = DVector::from_fn(m, |j, _| (2.0 * PI * j as f64 / m as f64 * 3.0).sin() + 0.5);
        let fine = &t * &coarse;
        for l in 0..(3 * m) {
            let s = 2.0 * PI * l as f64 / (3 * m) as f64;
            assert!((fine[l] - ((3.0 * s).sin() + 0.5)).abs() < 1e-13);
        }
    }

    #[test]
    fn kress_weights_integrate_log_cosine() {
        // ∫ ln(4 sin²(s/2)) cos(k s) ds = -2π/k
        let g = BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap();
        let d = Discretization::new(&g, 16, 1.0).unwrap();
        let mf = d.fine.len();
        for k in 0..4 {
            let v: f64 = (0..mf)
                .map(|l| d.kress[l] * (k as f64 * 2.0 * PI * l as f64 / mf as f64).cos())
                .sum();
            let exact = if k == 0 { 0.0 } else { -2.0 * PI / k as f64 };
            assert!((v - exact).abs() < 1e-12, "k={k}: {v}");
        }
    }
}
