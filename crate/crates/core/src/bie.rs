//! Boundary integral equation `(-½I + D)φ = g` on a plane curve, discretized by Nyström
//! collocation.
//!
//! Time levels are uniform in `σ = a1(t)` and the density is piecewise linear in `σ`.
//! Over each time slab the double-layer kernel is integrated exactly in `z = b(t, τ)`:
//! with `w = r²/(4z)`,
//! `∫ K dz = ⟨d, ν⟩/(2πr²) · e^{-w}` and `∫ z K dz = ⟨d, ν⟩/(8π) · E1(w)` between the
//! slab ends. Because the levels are uniform in `σ`, the block coupling levels `k` and `j`
//! depends only on `k - j`. In space the trapezoid rule is used, on an upsampled grid
//! (trigonometric interpolation of the density) when the kernel is narrower than the node
//! spacing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coeff::{Assumption, TimeCoefficient};
use crate::density::{BoundaryDensity, BoundarySamples, SpaceTimeDensity};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryGeometry, BoundaryNode};
use crate::nystrom::{Discretization, LayerKind};
use crate::potentials::{PotentialField, PotentialKind, Resolution};

/// Largest `|g(·, 0)|` accepted by the compatibility check.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// Discretized operator `-½I + D`.
#[derive(Debug, Clone)]
pub struct BieSystem {
    geometry: BoundaryGeometry,
    coefficient: TimeCoefficient,
    m_space: usize,
    m_time: usize,
    q: f64,
    gamma_eff: f64,
    sigmas: Vec<f64>,
    times: Vec<f64>,
    nodes: Vec<BoundaryNode>,
    /// `lag_blocks[l]` couples level `k` to level `k - l` (the double layer only).
    lag_blocks: Vec<DMatrix<f64>>,
    upsampling: usize,
}

/// Outcome of the fixed-point iteration `φ ← -2g + 2Dφ`.
#[derive(Debug, Clone)]
pub struct PicardResult {
    pub phi: Vec<DVector<f64>>,
    /// `‖φ^{(m+1)} - φ^{(m)}‖_∞` per iteration.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagonalReport {
    pub condition_number: f64,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
}

impl BieSystem {
    /// Builds the discrete operator on `m_space` uniform parameter nodes and `m_time`
    /// levels over `(0, T]`, `T` the coefficient horizon.
    pub fn assemble(
        geometry: &BoundaryGeometry,
        coefficient: &TimeCoefficient,
        m_space: usize,
        m_time: usize,
        q: f64,
        gamma_eff: f64,
    ) -> Result<Self> {
        if !geometry.is_curve() {
            return Err(Error::UnsupportedKind(
                "the boundary integral solver is implemented for plane curves".into(),
            ));
        }
        if coefficient.assumption() != Assumption::A {
            return Err(Error::Assumption(
                "the boundary integral equation needs assumption (a) on the coefficient".into(),
            ));
        }
        if m_space < 8 || m_space % 2 != 0 {
            return Err(Error::Resolution(format!("m_space must be even and >= 8, got {m_space}")));
        }
        if m_time < 1 {
            return Err(Error::Resolution("m_time must be positive".into()));
        }
        if !(gamma_eff > 0.5 && gamma_eff < 1.0) {
            return Err(Error::Resolution(format!("gamma_eff = {gamma_eff} outside (1/2, 1)")));
        }
        if !(q >= 1.0) {
            return Err(Error::Resolution(format!("grading exponent q = {q} below 1")));
        }
        let horizon = coefficient.horizon();
        let a1_end = coefficient.eval_a1(horizon)?;
        if !(a1_end > 0.0) {
            return Err(Error::Assumption("a1(T) must be positive".into()));
        }
        let sigmas: Vec<f64> = (0..=m_time).map(|k| a1_end * k as f64 / m_time as f64).collect();
        let times: Vec<f64> = sigmas
            .iter()
            .enumerate()
            .map(|(k, &s)| if k == m_time { horizon } else { coefficient.tau_of_sigma(s, horizon) })
            .collect();
        let delta = a1_end / m_time as f64;
        let disc = Discretization::new(geometry, m_space, delta)?;
        let upsampling = disc.upsampling();
        let nodes = disc.nodes().to_vec();
        // rows at the final level hold every lag
        let levels = disc.level_matrices(LayerKind::Double, &sigmas, a1_end);
        let lag_blocks: Vec<DMatrix<f64>> = (0..m_time).map(|lag| levels[m_time - lag].clone()).collect();

        Ok(BieSystem {
            geometry: geometry.clone(),
            coefficient: coefficient.clone(),
            m_space,
            m_time,
            q,
            gamma_eff,
            sigmas,
            times,
            nodes,
            lag_blocks,
            upsampling,
        })
    }

    pub fn m_space(&self) -> usize {
        self.m_space
    }

    pub fn m_time(&self) -> usize {
        self.m_time
    }

    pub fn grading(&self) -> f64 {
        self.q
    }

    pub fn gamma_eff(&self) -> f64 {
        self.gamma_eff
    }

    pub fn upsampling(&self) -> usize {
        self.upsampling
    }

    pub fn geometry(&self) -> &BoundaryGeometry {
        &self.geometry
    }

    pub fn coefficient(&self) -> &TimeCoefficient {
        &self.coefficient
    }

    /// Collocation nodes.
    pub fn nodes(&self) -> &[BoundaryNode] {
        &self.nodes
    }

    /// Level times `t_0 = 0 < t_1 < ... < t_m = T`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Level values of `a1`, uniform from 0 to `a1(T)`.
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// The double-layer block coupling level `k` to level `j` (both in `1..=m_time`);
    /// zero when `j > k`.
    pub fn block(&self, k: usize, j: usize) -> DMatrix<f64> {
        if j > k || j == 0 || k > self.m_time {
            DMatrix::zeros(self.m_space, self.m_space)
        } else {
            self.lag_blocks[k - j].clone()
        }
    }

    /// `-½I + D_{k,k}`, the same for every level.
    pub fn diagonal_matrix(&self) -> DMatrix<f64> {
        &self.lag_blocks[0] - DMatrix::<f64>::identity(self.m_space, self.m_space) * 0.5
    }

    pub fn diagonal_report(&self) -> DiagonalReport {
        let sv = self.diagonal_matrix().singular_values();
        let max = sv.max();
        let min = sv.min();
        DiagonalReport {
            condition_number: max / min,
            smallest_singular_value: min,
            largest_singular_value: max,
        }
    }

    /// Smallest singular value of the full space-time matrix (dense; small systems only).
    pub fn full_smallest_singular_value(&self) -> f64 {
        let n = self.m_space * self.m_time;
        let mut full = DMatrix::<f64>::zeros(n, n);
        for k in 1..=self.m_time {
            for j in 1..=k {
                let mut b = self.block(k, j);
                if j == k {
                    b -= DMatrix::<f64>::identity(self.m_space, self.m_space) * 0.5;
                }
                full.view_mut(((k - 1) * self.m_space, (j - 1) * self.m_space), (self.m_space, self.m_space))
                    .copy_from(&b);
            }
        }
        full.singular_values().min()
    }

    /// Samples a boundary density at the nodes and levels `0..=m_time`, enforcing the
    /// compatibility condition at `t = 0`.
    pub fn sample(&self, g: &BoundaryDensity) -> Result<Vec<DVector<f64>>> {
        let out: Vec<DVector<f64>> = self
            .times
            .iter()
            .zip(&self.sigmas)
            .map(|(&t, &s)| DVector::from_iterator(self.m_space, self.nodes.iter().map(|n| g.eval(n.s, t, s))))
            .collect();
        let g0 = out[0].amax();
        if g0 > COMPATIBILITY_TOL {
            return Err(Error::Compatibility(g0));
        }
        Ok(out)
    }

    fn check_levels(&self, v: &[DVector<f64>]) -> Result<()> {
        if v.len() != self.m_time + 1 || v.iter().any(|x| x.len() != self.m_space) {
            return Err(Error::Resolution(format!(
                "expected {} levels of {} values",
                self.m_time + 1,
                self.m_space
            )));
        }
        Ok(())
    }

    /// `Dφ` at levels `0..=m_time` (zero at level 0).
    pub fn apply_double_layer(&self, phi: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        self.check_levels(phi)?;
        let mut out = vec![DVector::zeros(self.m_space)];
        for k in 1..=self.m_time {
            let mut acc = DVector::zeros(self.m_space);
            for j in 1..=k {
                acc += &self.lag_blocks[k - j] * &phi[j];
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// `(-½I + D)φ` at levels `0..=m_time`.
    pub fn apply(&self, phi: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let d = self.apply_double_layer(phi)?;
        Ok(d.into_iter().zip(phi).map(|(dk, pk)| dk - pk * 0.5).collect())
    }

    /// Forward substitution over the levels with one LU factorization of the diagonal block.
    pub fn solve_march(&self, g: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        self.check_levels(g)?;
        if g[0].amax() > COMPATIBILITY_TOL {
            return Err(Error::Compatibility(g[0].amax()));
        }
        let lu = self.diagonal_matrix().lu();
        if !lu.is_invertible() {
            return Err(Error::Solver("singular diagonal block; refine the discretization".into()));
        }
        let mut phi = vec![DVector::zeros(self.m_space)];
        for k in 1..=self.m_time {
            let mut rhs = g[k].clone();
            for j in 1..k {
                rhs -= &self.lag_blocks[k - j] * &phi[j];
            }
            let x = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Solver(format!("LU solve failed at level {k}")))?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Solver(format!("non-finite solution at level {k}")));
            }
            phi.push(x);
        }
        Ok(phi)
    }

    /// Iterates `φ ← -2g + 2Dφ` from `φ = 0` until the sup-norm increment is below `tol`.
    pub fn solve_picard(&self, g: &[DVector<f64>], max_iters: usize, tol: f64) -> Result<PicardResult> {
        self.check_levels(g)?;
        if g[0].amax() > COMPATIBILITY_TOL {
            return Err(Error::Compatibility(g[0].amax()));
        }
        let mut phi: Vec<DVector<f64>> = vec![DVector::zeros(self.m_space); self.m_time + 1];
        let mut history = Vec::new();
        for _ in 0..max_iters {
            let d = self.apply_double_layer(&phi)?;
            let next: Vec<DVector<f64>> = d.iter().zip(g).map(|(dk, gk)| dk * 2.0 - gk * 2.0).collect();
            let inc = next
                .iter()
                .zip(&phi)
                .map(|(a, b)| (a - b).amax())
                .fold(0.0, f64::max);
            phi = next;
            history.push(inc);
            if !inc.is_finite() {
                break;
            }
            if inc <= tol {
                return Ok(PicardResult { phi, history });
            }
        }
        Err(Error::NonConvergence {
            iterations: history.len(),
            last_increment: history.last().copied().unwrap_or(f64::NAN),
        })
    }

    /// Wraps level values as a boundary density (trigonometric in the parameter, linear in `σ`).
    pub fn to_samples(&self, values: &[DVector<f64>]) -> Result<BoundarySamples> {
        self.check_levels(values)?;
        BoundarySamples::new(
            self.sigmas.clone(),
            values.iter().map(|v| v.iter().copied().collect()).collect(),
        )
    }
}

/// Solution of the initial-boundary value problem with Dirichlet data `g`.
#[derive(Debug, Clone)]
pub struct IbvpSolution {
    pub system: BieSystem,
    /// Density at the nodes, levels `0..=m_time`.
    pub phi: Vec<DVector<f64>>,
    /// `u = Dφ` with the interpolated density.
    pub field: PotentialField,
}

/// Solves `u_t = a(t)Δu` in the domain with `u(·, 0) = 0` and `u = g` on the boundary,
/// representing `u` as a double-layer potential.
pub fn solve_ibvp(
    geometry: &BoundaryGeometry,
    coefficient: &TimeCoefficient,
    g: &BoundaryDensity,
    resolution: &Resolution,
    gamma_eff: f64,
) -> Result<IbvpSolution> {
    let system = BieSystem::assemble(
        geometry,
        coefficient,
        resolution.m_space,
        resolution.m_time,
        resolution.q,
        gamma_eff,
    )?;
    let samples = system.sample(g)?;
    let phi = system.solve_march(&samples)?;
    let density = BoundaryDensity::Samples(system.to_samples(&phi)?);
    let field = PotentialField::new(
        PotentialKind::D,
        coefficient.clone(),
        geometry.clone(),
        SpaceTimeDensity::Boundary(density),
        *resolution,
    )?;
    Ok(IbvpSolution { system, phi, field })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn causality_and_shapes() {
        let g = BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap();
        let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
        let sys = BieSystem::assemble(&g, &c, 16, 4, 3.0, 0.75).unwrap();
        assert_eq!(sys.block(1, 3).amax(), 0.0);
        assert!(sys.block(3, 1).amax() > 0.0);
        assert_eq!(sys.times().len(), 5);
        let one = BieSystem::assemble(&g, &c, 16, 1, 3.0, 0.75).unwrap();
        assert_eq!(one.diagonal_matrix().nrows(), 16);
        assert!(BieSystem::assemble(&g, &c, 15, 4, 3.0, 0.75).is_err());
        assert!(BieSystem::assemble(&g, &c, 16, 4, 3.0, 0.4).is_err());
    }
}
