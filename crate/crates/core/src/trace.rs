//! Lateral boundary functional satisfied by volume and Poisson potentials:
//!
//! ```text
//! B[u](ξ0, t) = -u(ξ0, t)/2 + D[u|∂Ω](ξ0, t) - S[∂u/∂ν](ξ0, t),
//! ```
//!
//! with `D` and `S` the direct boundary values of the layer potentials. `B[u] = 0` for
//! `u = Vf` and `u = Pφ` when the densities are supported inside the domain.
//!
//! The residual is evaluated with the Nyström layer matrices: `u` and `∂u/∂ν` are sampled at
//! the boundary nodes on levels uniform in `σ = a1(t)`, and `B[u]` is formed at every node
//! and every slab midpoint.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bie::{solve_ibvp, DiagonalReport};
use crate::coeff::TimeCoefficient;
use crate::density::{BoundaryDensity, BoundarySamples, SpaceTimeDensity};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryGeometry, BoundaryNode, Point};
use crate::nystrom::{Discretization, LayerKind};
use crate::potentials::{eval_directional_derivative, heat_semigroup, PotentialField, PotentialKind, Resolution};
use crate::quadrature::GaussRule;

/// `⟨∇u(ξ0, t), ν(ξ0)⟩` for `u = Vf` or `Pφ`, differentiating under the integral sign.
pub fn boundary_normal_derivative(field: &PotentialField, s0: f64, t: f64) -> Result<f64> {
    check_trace_kind(field)?;
    let node = field.geometry().boundary_point(s0);
    eval_directional_derivative(field, &node.point, t, &node.normal)
}

fn check_trace_kind(field: &PotentialField) -> Result<()> {
    match field.kind() {
        PotentialKind::V | PotentialKind::P => {}
        kind => {
            return Err(Error::UnsupportedKind(format!(
                "the boundary functional is defined for V and P, not {kind:?}"
            )))
        }
    }
    let margin = field.density().support_margin(field.geometry())?.unwrap_or(0.0);
    if !(margin > 0.0) {
        return Err(Error::Support(format!(
            "density must be supported inside the domain (margin {margin})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub s: f64,
    pub t: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceResidualReport {
    pub kind: String,
    pub m_space: usize,
    pub m_time: usize,
    /// Every node at every slab midpoint, ordered by time then node.
    pub points: Vec<TracePoint>,
    pub sup_residual: f64,
    /// Discrete `L²(∂Ω × (0, T))` norm.
    pub l2_residual: f64,
    /// Largest `|u|` over the boundary samples and the profile center on each level.
    pub scale: f64,
}

/// The discrete functional: Nyström matrices on `m_space` nodes and `m_time` levels uniform in
/// `σ`, evaluated at the slab midpoints.
#[derive(Debug, Clone)]
pub struct TraceFunctional {
    disc: Discretization,
    /// Slab blocks at the last midpoint; midpoint `k` uses the same blocks shifted by the lag.
    double: Vec<[DMatrix<f64>; 2]>,
    single: Vec<[DMatrix<f64>; 2]>,
    sigmas: Vec<f64>,
    times: Vec<f64>,
    midpoint_times: Vec<f64>,
}

impl TraceFunctional {
    pub fn new(geometry: &BoundaryGeometry, coefficient: &TimeCoefficient, m_space: usize, m_time: usize) -> Result<Self> {
        if m_time < 1 {
            return Err(Error::Resolution("m_time must be positive".into()));
        }
        let horizon = coefficient.horizon();
        let a1_end = coefficient.eval_a1(horizon)?;
        if !(a1_end > 0.0) {
            return Err(Error::Assumption("a1(T) must be positive".into()));
        }
        let sigmas: Vec<f64> = (0..=m_time).map(|k| a1_end * k as f64 / m_time as f64).collect();
        let times = sigmas
            .iter()
            .enumerate()
            .map(|(k, &s)| if k == m_time { horizon } else { coefficient.tau_of_sigma(s, horizon) })
            .collect();
        let midpoint_times = sigmas
            .windows(2)
            .map(|w| coefficient.tau_of_sigma(0.5 * (w[0] + w[1]), horizon))
            .collect();
        let disc = Discretization::new(geometry, m_space, 0.5 * a1_end / m_time as f64)?;
        let last = 0.5 * (sigmas[m_time - 1] + sigmas[m_time]);
        Ok(TraceFunctional {
            double: disc.slab_matrices(LayerKind::Double, &sigmas, last),
            single: disc.slab_matrices(LayerKind::Single, &sigmas, last),
            disc,
            sigmas,
            times,
            midpoint_times,
        })
    }

    pub fn nodes(&self) -> &[BoundaryNode] {
        self.disc.nodes()
    }

    /// Times of the sampling levels, `0..=m_time`.
    pub fn level_times(&self) -> &[f64] {
        &self.times
    }

    pub fn midpoint_times(&self) -> &[f64] {
        &self.midpoint_times
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// `B` at the midpoints from `u` and `∂u/∂ν` on the levels and `u` at the midpoints.
    pub fn apply(
        &self,
        values: &[DVector<f64>],
        normal: &[DVector<f64>],
        midpoint_values: &[DVector<f64>],
    ) -> Result<Vec<DVector<f64>>> {
        let m = self.nodes().len();
        let levels = self.sigmas.len();
        let shaped = |v: &[DVector<f64>], n: usize| v.len() == n && v.iter().all(|x| x.len() == m);
        if !shaped(values, levels) || !shaped(normal, levels) || !shaped(midpoint_values, levels - 1) {
            return Err(Error::Resolution(format!("expected {levels} levels of {m} values")));
        }
        let m_time = levels - 1;
        Ok((1..levels)
            .into_par_iter()
            .map(|k| {
                let mut out = -&midpoint_values[k - 1] * 0.5;
                for j in 1..=k {
                    let [d0, d1] = &self.double[j + m_time - k - 1];
                    let [s0, s1] = &self.single[j + m_time - k - 1];
                    out.gemv(1.0, d0, &values[j - 1], 1.0);
                    out.gemv(1.0, d1, &values[j], 1.0);
                    out.gemv(-1.0, s0, &normal[j - 1], 1.0);
                    out.gemv(-1.0, s1, &normal[j], 1.0);
                }
                out
            })
            .collect())
    }
}

/// `u` and `∂u/∂ν` at the nodes on `σ`-uniform levels.
struct BoundaryData {
    functional: TraceFunctional,
    values: Vec<DVector<f64>>,
    normal: Vec<DVector<f64>>,
    scale: f64,
}

fn sample_grid<F>(m: usize, times: &[f64], f: F) -> Result<Vec<DVector<f64>>>
where
    F: Fn(usize, f64) -> Result<f64> + Sync,
{
    let flat = (0..times.len() * m)
        .into_par_iter()
        .map(|idx| f(idx % m, times[idx / m]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(flat.chunks(m).map(|c| DVector::from_column_slice(c)).collect())
}

fn boundary_data(field: &PotentialField, m_space: usize, m_time: usize) -> Result<BoundaryData> {
    check_trace_kind(field)?;
    let functional = TraceFunctional::new(field.geometry(), field.coefficient(), m_space, m_time)?;
    let nodes = functional.nodes().to_vec();
    let times = functional.level_times().to_vec();
    let values = sample_grid(m_space, &times, |i, t| field.eval(&nodes[i].point, t))?;
    let normal = sample_grid(m_space, &times, |i, t| {
        if t == 0.0 {
            Ok(0.0)
        } else {
            eval_directional_derivative(field, &nodes[i].point, t, &nodes[i].normal)
        }
    })?;
    let center = profile_center(field)?;
    let center_values = times
        .par_iter()
        .map(|&t| field.eval(&center, t).map(f64::abs))
        .collect::<Result<Vec<f64>>>()?;
    let scale = values
        .iter()
        .map(|v| v.amax())
        .chain(center_values)
        .fold(0.0, f64::max);
    Ok(BoundaryData {
        functional,
        values,
        normal,
        scale,
    })
}

fn profile_center(field: &PotentialField) -> Result<Point> {
    match field.density() {
        SpaceTimeDensity::Volume(f) => Ok(f.profile().center()),
        SpaceTimeDensity::Initial(p) => Ok(p.center()),
        SpaceTimeDensity::Boundary(_) => Err(Error::UnsupportedKind("boundary density".into())),
    }
}

/// `B[u]` at every node and slab midpoint of an `m_space × m_time` grid.
pub fn trace_residual(field: &PotentialField, m_space: usize, m_time: usize) -> Result<TraceResidualReport> {
    let data = boundary_data(field, m_space, m_time)?;
    let f = &data.functional;
    let nodes = f.nodes();
    let mid = sample_grid(m_space, f.midpoint_times(), |i, t| field.eval(&nodes[i].point, t))?;
    let residual = f.apply(&data.values, &data.normal, &mid)?;
    let mut points = Vec::with_capacity(m_space * m_time);
    let mut l2 = 0.0;
    for (k, r) in residual.iter().enumerate() {
        let t = f.midpoint_times()[k];
        let dt = f.level_times()[k + 1] - f.level_times()[k];
        for (n, &v) in nodes.iter().zip(r.iter()) {
            l2 += v * v * n.weight * dt;
            points.push(TracePoint { s: n.s, t, residual: v });
        }
    }
    let sup_residual = points.iter().map(|p| p.residual.abs()).fold(0.0, f64::max);
    Ok(TraceResidualReport {
        kind: format!("{:?}", field.kind()),
        m_space,
        m_time,
        points,
        sup_residual,
        l2_residual: l2.sqrt(),
        scale: data.scale,
    })
}

/// Terms of the Green representation of `u` at an interior point:
/// `source = T1 - T2 + T3 - T4 + T5`, where `T1` is the `δ → 0` limit of
/// `∫_Ω ε(x - ξ, b(t, t - δ)) u(ξ, t - δ) dξ`, `T2` the propagated initial data, `T3 = D[u|∂Ω]`,
/// `T4 = S[∂u/∂ν]`, and `source` is `Vf(x, t)` (zero for `Pφ`). `T5` closes the identity and
/// should vanish.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub x: Point,
    pub t: f64,
    pub terms: [f64; 5],
    pub source: f64,
    pub u: f64,
    /// `∫_Ω ε u` at `δ = 2e-3 T, 1e-3 T, 5e-4 T`.
    pub delta_samples: Vec<f64>,
    pub extrapolation_error: f64,
}

const DELTAS: [f64; 3] = [2e-3, 1e-3, 5e-4];

pub fn representation_identity_check(
    field: &PotentialField,
    x: &Point,
    t: f64,
    resolution: &Resolution,
) -> Result<RepresentationReport> {
    check_trace_kind(field)?;
    let geometry = field.geometry();
    let c = field.coefficient();
    let horizon = c.horizon();
    if !(t > DELTAS[0] * horizon && t <= horizon) {
        return Err(Error::Domain { t, horizon });
    }
    if geometry.contains(x) != crate::geometry::Location::Inside {
        return Err(Error::Geometry("probe must be interior".into()));
    }
    let dist = geometry
        .boundary_nodes(720)?
        .iter()
        .map(|n| crate::geometry::norm(&crate::geometry::sub(x, &n.point)))
        .fold(f64::INFINITY, f64::min);
    if dist < 0.1 * geometry.diameter() {
        return Err(Error::Geometry(format!(
            "probe is {dist:.3e} from the boundary, below a tenth of the diameter"
        )));
    }
    let a1t = c.eval_a1(t)?;

    let deltas: Vec<f64> = DELTAS.iter().map(|d| d * horizon).collect();
    let delta_samples = deltas
        .iter()
        .map(|&d| {
            let b = a1t - c.eval_a1(t - d)?;
            domain_convolution(field, x, b, t - d)
        })
        .collect::<Result<Vec<f64>>>()?;
    let limit = crate::potentials::richardson_limit(&deltas, &delta_samples)?;
    let t1 = limit.value;

    let t2 = match field.density() {
        SpaceTimeDensity::Initial(p) => heat_semigroup(field.dimension(), p, x, a1t, false).0,
        _ => field.eval(x, 0.0)?,
    };

    let data = boundary_data(field, resolution.m_space, resolution.m_time)?;
    let wrap = |levels: &[DVector<f64>]| -> Result<SpaceTimeDensity> {
        let samples = BoundarySamples::new(
            data.functional.sigmas().to_vec(),
            levels.iter().map(|v| v.iter().copied().collect()).collect(),
        )?;
        Ok(SpaceTimeDensity::Boundary(BoundaryDensity::Samples(samples)))
    };
    let d = PotentialField::new(PotentialKind::D, c.clone(), geometry.clone(), wrap(&data.values)?, *resolution)?;
    let s = PotentialField::new(PotentialKind::S, c.clone(), geometry.clone(), wrap(&data.normal)?, *resolution)?;
    let t3 = d.eval(x, t)?;
    let t4 = s.eval(x, t)?;
    let u = field.eval(x, t)?;
    let source = match field.kind() {
        PotentialKind::V => u,
        _ => 0.0,
    };
    let t5 = source - (t1 - t2 + t3 - t4);
    Ok(RepresentationReport {
        x: *x,
        t,
        terms: [t1, t2, t3, t4, t5],
        source,
        u,
        delta_samples,
        extrapolation_error: limit.error_estimate,
    })
}

/// `∫_Ω ε(x - ξ, b) u(ξ, τ) dξ` in polar coordinates about `x` (plane convex domains).
fn domain_convolution(field: &PotentialField, x: &Point, b: f64, tau: f64) -> Result<f64> {
    if !field.geometry().is_curve() {
        return Err(Error::UnsupportedKind("the representation check is implemented in the plane".into()));
    }
    const ANGLES: usize = 48;
    const PANELS: usize = 4;
    // ρ = 2 sqrt(b) y turns ε ρ dρ into e^{-y²} y dy / π
    let rule = GaussRule::legendre(10);
    let width = 2.0 * b.sqrt();
    let per_angle = (0..ANGLES)
        .into_par_iter()
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / ANGLES as f64;
            let dir = [theta.cos(), theta.sin(), 0.0];
            let y_max = (field.geometry().ray_exit_distance(x, &dir)? / width).min(6.5);
            let step = y_max / PANELS as f64;
            let mut acc = 0.0;
            for p in 0..PANELS {
                for (y, w) in rule.mapped(p as f64 * step, (p + 1) as f64 * step) {
                    let xi = [x[0] + width * y * dir[0], x[1] + width * y * dir[1], 0.0];
                    acc += w * (-y * y).exp() * y * field.eval(&xi, tau)?;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_angle.iter().sum::<f64>() * 2.0 / ANGLES as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub m_space: usize,
    pub m_time: usize,
    /// Largest `|ω|` over the density samples and interior probes.
    pub omega_sup: f64,
    pub probes: usize,
    pub diagonal: DiagonalReport,
}

/// Solves the homogeneous lateral problem (`ω = 0` on the boundary, zero initial data) and
/// measures the discrete solution.
pub fn verify_uniqueness(
    geometry: &BoundaryGeometry,
    coefficient: &TimeCoefficient,
    resolution: &Resolution,
    gamma_eff: f64,
) -> Result<UniquenessReport> {
    let sol = solve_ibvp(geometry, coefficient, &BoundaryDensity::Zero, resolution, gamma_eff)?;
    let mut omega_sup = sol.phi.iter().map(|v| v.amax()).fold(0.0, f64::max);
    let center = geometry.center();
    let reach = 0.5 * geometry.diameter();
    let horizon = coefficient.horizon();
    let mut probes = 0;
    for k in 0..5 {
        let r = 0.15 * reach * k as f64;
        for j in 0..5 {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / 5.0;
            let x = [center[0] + r * theta.cos(), center[1] + 0.6 * r * theta.sin(), 0.0];
            if geometry.contains(&x) != crate::geometry::Location::Inside {
                continue;
            }
            for i in 1..=4 {
                let t = horizon * i as f64 / 4.0;
                omega_sup = omega_sup.max(sol.field.eval(&x, t)?.abs());
                probes += 1;
            }
        }
    }
    if omega_sup > 1e-10 {
        return Err(Error::Numerical(format!(
            "homogeneous problem has a nontrivial discrete solution (sup {omega_sup:.3e})"
        )));
    }
    Ok(UniquenessReport {
        m_space: resolution.m_space,
        m_time: resolution.m_time,
        omega_sup,
        probes,
        diagonal: sol.system.diagonal_report(),
    })
}
