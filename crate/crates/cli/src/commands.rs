//! Kernel, potential, verification and solve commands.

use std::f64::consts::PI;
use std::path::Path;

use degpot::bie::solve_ibvp;
use degpot::density::{BoundaryDensity, SpaceTimeDensity};
use degpot::kernel::{check_delta_limit, check_fourier, check_normalization, eval_kernel, TestFunction};
use degpot::potentials::{
    double_layer_boundary_limit, eval_adjoint_double_layer_direct, eval_double_layer_direct,
    single_layer_gradient_limit, PotentialField, PotentialKind, Side,
};
use degpot::trace::{trace_residual, TraceResidualReport};
use degpot::Point;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{read_points, write_csv, write_json, write_point_values};

/// Guard against hidden NaNs in tolerance comparisons.
fn within(value: f64, tol: f64) -> bool {
    value.is_finite() && value <= tol
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

fn fail_unless(pass: bool, what: impl FnOnce() -> String) -> Result<(), CliError> {
    if pass {
        Ok(())
    } else {
        Err(CliError::Tolerance(what()))
    }
}

pub fn kernel_eval(n: usize, x: &[f64], s: f64) -> Result<f64, CliError> {
    if !(n == 2 || n == 3) {
        return Err(CliError::Config(format!("--n: must be 2 or 3, got {n}")));
    }
    if x.len() != n {
        return Err(CliError::Config(format!("--x: expected {n} coordinates, got {}", x.len())));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(CliError::Config(format!("--s: must be positive, got {s}")));
    }
    let mut p = [0.0; 3];
    p[..n].copy_from_slice(x);
    Ok(eval_kernel(n, &p, s))
}

#[derive(Debug, Serialize)]
struct KernelSample {
    t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    frequency: Option<Vec<f64>>,
    error: f64,
}

#[derive(Debug, Serialize)]
struct KernelCheckReport {
    which: String,
    dimension: usize,
    samples: Vec<KernelSample>,
    max_error: f64,
    /// Absent for the delta check, which asserts monotone decay instead.
    tolerance: Option<f64>,
    pass: bool,
}

pub fn kernel_check(cfg: &RunConfig, which: &str, report: Option<&Path>) -> Result<(), CliError> {
    let n = cfg.dimension;
    let c = &cfg.coefficient;
    let horizon = cfg.horizon();
    let fractions = [0.1, 0.25, 0.5, 0.75, 1.0];
    let (samples, tolerance) = match which {
        "normalization" => {
            let samples = fractions
                .iter()
                .map(|f| {
                    let t = f * horizon;
                    Ok(KernelSample {
                        t,
                        frequency: None,
                        error: check_normalization(n, c, t, 40)?,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            (samples, Some(cfg.tolerances.kernel_normalization))
        }
        "fourier" => {
            let freqs: [Point; 3] = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.5], [1.5, -1.0, 1.0]];
            let mut samples = Vec::new();
            for f in fractions {
                for freq in &freqs {
                    let mut xi = *freq;
                    if n == 2 {
                        xi[2] = 0.0;
                    }
                    let t = f * horizon;
                    samples.push(KernelSample {
                        t,
                        frequency: Some(xi[..n].to_vec()),
                        error: check_fourier(n, c, t, &xi)?,
                    });
                }
            }
            (samples, Some(cfg.tolerances.kernel_fourier))
        }
        "delta" => {
            let psi = TestFunction::standard_bump();
            let samples = (0..8)
                .map(|k| {
                    let t = horizon * 0.5f64.powi(k);
                    Ok(KernelSample {
                        t,
                        frequency: None,
                        error: check_delta_limit(n, c, &psi, t)?,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            (samples, None)
        }
        other => {
            return Err(CliError::Config(format!(
                "--which: expected normalization, fourier or delta, got `{other}`"
            )))
        }
    };
    let max_error = max_abs(samples.iter().map(|s| s.error));
    let pass = match tolerance {
        Some(tol) => within(max_error, tol),
        // halving t must not increase the error beyond roundoff
        None => max_error.is_finite() && samples.windows(2).all(|w| w[1].error <= w[0].error + 1e-14),
    };
    write_json(
        report,
        &KernelCheckReport {
            which: which.to_string(),
            dimension: n,
            samples,
            max_error,
            tolerance,
            pass,
        },
    )?;
    fail_unless(pass, || format!("kernel {which} check failed (max error {max_error:e})"))
}

pub fn field(cfg: &RunConfig, kind: PotentialKind) -> Result<PotentialField, CliError> {
    Ok(PotentialField::new(
        kind,
        cfg.coefficient.clone(),
        cfg.geometry.clone(),
        cfg.density_for(kind)?,
        cfg.resolution,
    )?)
}

fn parse_kind(kind: &str) -> Result<PotentialKind, CliError> {
    PotentialKind::parse(kind).ok_or_else(|| CliError::Config(format!("--kind: expected V, P, S or D, got `{kind}`")))
}

pub fn potential_eval(cfg: &RunConfig, kind: &str, points: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let u = field(cfg, parse_kind(kind)?)?;
    let probes = read_points(points, cfg.dimension)?;
    let values = u.eval_many(&probes)?;
    write_point_values(out, cfg.dimension, &probes, &values)
}

/// `solve cauchy`: `u = Vf + Pφ` in the whole space; `solve poisson`: `u = Pφ`.
pub fn solve_whole_space(cfg: &RunConfig, with_source: bool, points: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let probes = read_points(points, cfg.dimension)?;
    let mut fields = Vec::new();
    if cfg.initial.is_some() || !with_source {
        fields.push(field(cfg, PotentialKind::P)?);
    }
    if with_source {
        if cfg.volume.is_some() {
            fields.push(field(cfg, PotentialKind::V)?);
        }
        if fields.is_empty() {
            return Err(CliError::Config(
                "density: the Cauchy problem needs density.volume or density.initial".into(),
            ));
        }
    }
    let mut values = vec![0.0; probes.len()];
    for u in &fields {
        for (acc, v) in values.iter_mut().zip(u.eval_many(&probes)?) {
            *acc += v;
        }
    }
    write_point_values(out, cfg.dimension, &probes, &values)
}

#[derive(Debug, Serialize)]
struct JumpNode {
    s: f64,
    t: f64,
    phi: f64,
    /// `∂S/∂ν⁻ - ∂S/∂ν⁺ - φ`.
    single_layer_jump: f64,
    /// `∂S/∂ν⁻ - (K*φ + φ/2)`, `K*` the direct value of the normal derivative.
    single_layer_interior: f64,
    /// `lim Dφ - (direct value - φ/2)` from inside.
    double_layer_interior: f64,
}

#[derive(Debug, Serialize)]
struct JumpReport {
    nodes: Vec<JumpNode>,
    max_error: f64,
    tolerance: f64,
    pass: bool,
}

pub fn jump_errors(cfg: &RunConfig, s_values: &[f64], times: &[f64]) -> Result<Vec<JumpNodeErrors>, CliError> {
    let s_field = field(cfg, PotentialKind::S)?;
    let d_field = field(cfg, PotentialKind::D)?;
    let phi = cfg
        .boundary
        .as_ref()
        .ok_or_else(|| CliError::Config("density.boundary: required for the jump check".into()))?;
    let probes: Vec<(f64, f64)> = times.iter().flat_map(|&t| s_values.iter().map(move |&s| (s, t))).collect();
    probes
        .par_iter()
        .map(|&(s0, t)| {
            let sigma = cfg.coefficient.eval_a1(t)?;
            let value = phi.eval(s0, t, sigma);
            let inner = single_layer_gradient_limit(&s_field, s0, t, Side::Interior)?.value;
            let outer = single_layer_gradient_limit(&s_field, s0, t, Side::Exterior)?.value;
            let adjoint = eval_adjoint_double_layer_direct(&s_field, s0, t)?;
            let limit = double_layer_boundary_limit(&d_field, s0, t)?.value;
            let direct = eval_double_layer_direct(&d_field, s0, t)?;
            Ok(JumpNodeErrors {
                s: s0,
                t,
                phi: value,
                errors: [inner - outer - value, inner - adjoint - 0.5 * value, limit - direct + 0.5 * value],
            })
        })
        .collect()
}

pub struct JumpNodeErrors {
    pub s: f64,
    pub t: f64,
    pub phi: f64,
    pub errors: [f64; 3],
}

pub fn verify_jump(cfg: &RunConfig, report: Option<&Path>) -> Result<(), CliError> {
    let m = cfg.jump.nodes;
    let s_values: Vec<f64> = (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect();
    let times: Vec<f64> = cfg.jump.times.iter().map(|f| f * cfg.horizon()).collect();
    let rows = jump_errors(cfg, &s_values, &times)?;
    let max_error = max_abs(rows.iter().flat_map(|r| r.errors));
    let tolerance = cfg.tolerances.jump;
    let pass = within(max_error, tolerance);
    let nodes = rows
        .into_iter()
        .map(|r| JumpNode {
            s: r.s,
            t: r.t,
            phi: r.phi,
            single_layer_jump: r.errors[0],
            single_layer_interior: r.errors[1],
            double_layer_interior: r.errors[2],
        })
        .collect();
    write_json(
        report,
        &JumpReport {
            nodes,
            max_error,
            tolerance,
            pass,
        },
    )?;
    fail_unless(pass, || format!("jump relations off by {max_error:e} (tolerance {tolerance:e})"))
}

fn trace_kind(which: &str) -> Result<PotentialKind, CliError> {
    match which {
        "volume" => Ok(PotentialKind::V),
        "poisson" => Ok(PotentialKind::P),
        other => Err(CliError::Config(format!("--which: expected volume or poisson, got `{other}`"))),
    }
}

/// Resolutions `(m / 2^k, m_time / 2^k)` ending at the configured one.
fn halving_ladder(m_space: usize, m_time: usize, rungs: usize) -> Vec<(usize, usize)> {
    (0..rungs)
        .rev()
        .map(|k| (m_space >> k, m_time >> k))
        .filter(|&(m, mt)| m >= 8 && m % 2 == 0 && mt >= 1)
        .collect()
}

#[derive(Debug, Serialize)]
struct TraceRung {
    m_space: usize,
    m_time: usize,
    sup_residual: f64,
    l2_residual: f64,
}

#[derive(Debug, Serialize)]
struct TraceReport {
    kind: String,
    m_space: usize,
    m_time: usize,
    sup_residual: f64,
    l2_residual: f64,
    scale: f64,
    /// `tolerance · scale`, floored at the roundoff of the sampled potential.
    threshold: f64,
    refinement: Vec<TraceRung>,
    pass: bool,
}

pub fn trace_report(cfg: &RunConfig, which: &str) -> Result<(TraceResidualReport, f64, bool, serde_json::Value), CliError> {
    let u = field(cfg, trace_kind(which)?)?;
    let ladder = halving_ladder(cfg.resolution.m_space, cfg.resolution.m_time, cfg.study.rungs);
    let mut history = Vec::new();
    let mut last = None;
    for &(m, mt) in &ladder {
        let r = trace_residual(&u, m, mt)?;
        history.push(TraceRung {
            m_space: m,
            m_time: mt,
            sup_residual: r.sup_residual,
            l2_residual: r.l2_residual,
        });
        last = Some(r);
    }
    let last = last.ok_or_else(|| CliError::Config("resolution: no admissible trace rung".into()))?;
    let threshold = (cfg.tolerances.trace * last.scale).max(1e-12 * last.scale);
    let pass = last.sup_residual.is_finite() && last.sup_residual <= threshold;
    let report = TraceReport {
        kind: last.kind.clone(),
        m_space: last.m_space,
        m_time: last.m_time,
        sup_residual: last.sup_residual,
        l2_residual: last.l2_residual,
        scale: last.scale,
        threshold,
        refinement: history,
        pass,
    };
    Ok((last, threshold, pass, serde_json::to_value(report)?))
}

pub fn verify_trace(cfg: &RunConfig, which: &str, out: Option<&Path>, report: Option<&Path>) -> Result<(), CliError> {
    let (last, threshold, pass, json) = trace_report(cfg, which)?;
    let rows: Vec<Vec<f64>> = last.points.iter().map(|p| vec![p.s, p.t, p.residual]).collect();
    write_csv(out, &["s", "t", "residual"], &rows)?;
    if let Some(path) = report {
        write_json(Some(path), &json)?;
    }
    fail_unless(pass, || {
        format!("trace residual {:e} exceeds {threshold:e}", last.sup_residual)
    })
}

#[derive(Debug, Serialize)]
struct IbvpResiduals {
    /// `max |u_t - a Δu|` at interior probes by finite differences, over `max |u_t|`.
    pde: f64,
    /// `max |u(·, 0)|` at the interior probes.
    initial: f64,
    /// `max |lim u - g|` at boundary points between the nodes, over `‖g‖∞`.
    boundary: f64,
}

#[derive(Debug, Serialize)]
struct PicardSummary {
    converged: bool,
    iterations: usize,
    history: Vec<f64>,
    /// `max |φ_picard - φ_march|`; absent without convergence.
    gap_to_march: Option<f64>,
}

#[derive(Debug, Serialize)]
struct IbvpReport {
    m_space: usize,
    m_time: usize,
    upsampling: usize,
    diagonal: degpot::bie::DiagonalReport,
    residuals: IbvpResiduals,
    tolerances: [f64; 2],
    picard: PicardSummary,
    pass: bool,
}

/// The domain center and `angles` points halfway to the boundary, at fractions of the horizon.
fn interior_probes(cfg: &RunConfig, angles: usize, fractions: &[f64]) -> Vec<(Point, f64)> {
    let g = &cfg.geometry;
    let c = g.center();
    let mut out = Vec::new();
    for f in fractions {
        let t = f * cfg.horizon();
        out.push((c, t));
        for k in 0..angles {
            let b = g.boundary_point(2.0 * PI * (k as f64 + 0.1) / angles as f64).point;
            out.push(([0.5 * (c[0] + b[0]), 0.5 * (c[1] + b[1]), 0.0], t));
        }
    }
    out
}

pub fn solve_ibvp_command(
    cfg: &RunConfig,
    points: Option<&Path>,
    out: Option<&Path>,
    phi_out: Option<&Path>,
    report: Option<&Path>,
) -> Result<(), CliError> {
    let g = cfg
        .boundary
        .as_ref()
        .ok_or_else(|| CliError::Config("density.boundary: the IBVP needs Dirichlet data".into()))?;
    let sol = solve_ibvp(&cfg.geometry, &cfg.coefficient, g, &cfg.resolution, cfg.gamma_eff)?;
    let sys = &sol.system;
    let u = &sol.field;

    let probes = match points {
        Some(p) => read_points(p, cfg.dimension)?,
        None => interior_probes(cfg, 6, &[0.5, 1.0]),
    };
    let values = u.eval_many(&probes)?;
    write_point_values(out, cfg.dimension, &probes, &values)?;
    if let Some(path) = phi_out {
        let mut rows = Vec::new();
        for (k, level) in sol.phi.iter().enumerate() {
            for (n, v) in sys.nodes().iter().zip(level.iter()) {
                rows.push(vec![n.s, sys.times()[k], *v]);
            }
        }
        write_csv(Some(path), &["s", "t", "phi"], &rows)?;
    }

    let horizon = cfg.horizon();
    // each evaluation of u is a nested adaptive integral, so the checks use few probes
    // the center at T/2 and an off-center point at T
    let probes_pde = interior_probes(cfg, 1, &[0.5, 1.0]);
    let interior = [probes_pde[0], probes_pde[3]];
    // fourth-order central differences in space and time
    let h = 0.02 * cfg.geometry.diameter();
    let dt = 1e-3 * horizon;
    let pde = interior
        .par_iter()
        .map(|&(x, t)| {
            let t = t.min(horizon - 2.0 * dt);
            let at = |dx: f64, dy: f64, tt: f64| u.eval(&[x[0] + dx, x[1] + dy, 0.0], tt);
            let d2 = |f0: f64, p1: f64, m1: f64, p2: f64, m2: f64, step: f64| {
                (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * step * step)
            };
            let u0 = at(0.0, 0.0, t)?;
            let lap = d2(u0, at(h, 0.0, t)?, at(-h, 0.0, t)?, at(2.0 * h, 0.0, t)?, at(-2.0 * h, 0.0, t)?, h)
                + d2(u0, at(0.0, h, t)?, at(0.0, -h, t)?, at(0.0, 2.0 * h, t)?, at(0.0, -2.0 * h, t)?, h);
            let ut = (8.0 * (at(0.0, 0.0, t + dt)? - at(0.0, 0.0, t - dt)?)
                - (at(0.0, 0.0, t + 2.0 * dt)? - at(0.0, 0.0, t - 2.0 * dt)?))
                / (12.0 * dt);
            Ok(((ut - cfg.coefficient.eval_a(t)? * lap).abs(), ut.abs()))
        })
        .collect::<Result<Vec<(f64, f64)>, CliError>>()?;
    let pde_scale = pde.iter().map(|p| p.1).fold(0.0, f64::max);
    let pde_residual = max_abs(pde.iter().map(|p| p.0)) / pde_scale.max(f64::MIN_POSITIVE);
    let initial = max_abs(
        interior
            .iter()
            .map(|(x, _)| u.eval(x, 0.0))
            .collect::<Result<Vec<_>, _>>()?,
    );

    let m = sys.m_space();
    // midway between the first two nodes
    let boundary_probes: Vec<(f64, f64)> = [0.5, 1.0].iter().map(|f| (PI / m as f64, f * horizon)).collect();
    let boundary_errors = boundary_probes
        .par_iter()
        .map(|&(s, t)| {
            let sigma = cfg.coefficient.eval_a1(t)?;
            let limit = double_layer_boundary_limit(u, s, t)?.value;
            Ok((limit - g.eval(s, t, sigma)).abs())
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let samples = sys.sample(g)?;
    let g_scale = samples.iter().map(|v| v.amax()).fold(0.0, f64::max);
    let boundary = max_abs(boundary_errors) / g_scale.max(f64::MIN_POSITIVE);

    let picard = match sys.solve_picard(&samples, cfg.tolerances.picard_max_iters, cfg.tolerances.picard) {
        Ok(p) => PicardSummary {
            converged: true,
            iterations: p.history.len(),
            gap_to_march: Some(max_abs(p.phi.iter().zip(&sol.phi).map(|(a, b)| (a - b).amax()))),
            history: p.history,
        },
        Err(degpot::Error::NonConvergence { iterations, .. }) => PicardSummary {
            converged: false,
            iterations,
            history: Vec::new(),
            gap_to_march: None,
        },
        Err(e) => return Err(e.into()),
    };

    let tol = cfg.tolerances;
    let pass = within(pde_residual, tol.ibvp_pde) && within(boundary, tol.ibvp_boundary) && initial == 0.0;
    let residuals = IbvpResiduals {
        pde: pde_residual,
        initial,
        boundary,
    };
    let summary = format!(
        "PDE residual {:e}, boundary residual {:e}, |u(·,0)| {:e}",
        residuals.pde, residuals.boundary, residuals.initial
    );
    let report_value = IbvpReport {
        m_space: m,
        m_time: sys.m_time(),
        upsampling: sys.upsampling(),
        diagonal: sys.diagonal_report(),
        residuals,
        tolerances: [tol.ibvp_pde, tol.ibvp_boundary],
        picard,
        pass,
    };
    if let Some(path) = report {
        write_json(Some(path), &report_value)?;
    }
    fail_unless(pass, || summary)
}

/// Boundary density values for reports.
pub fn boundary_density(cfg: &RunConfig) -> Result<&BoundaryDensity, CliError> {
    cfg.boundary
        .as_ref()
        .ok_or_else(|| CliError::Config("density.boundary: required by this command".into()))
}

/// Initial profile, rejecting anything but a Gaussian.
pub fn gaussian_initial(cfg: &RunConfig) -> Result<SpaceTimeDensity, CliError> {
    match &cfg.initial {
        Some(p @ degpot::density::SpatialProfile::Gaussian { .. }) => Ok(SpaceTimeDensity::Initial(p.clone())),
        _ => Err(CliError::Config(
            "density.initial: the poisson-gaussian target needs a Gaussian initial profile".into(),
        )),
    }
}
