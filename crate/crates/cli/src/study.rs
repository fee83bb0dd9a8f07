//! Convergence studies over geometric resolution ladders.
//!
//! Targets and their error measures:
//! - `trace`: sup of the lateral trace residual over the scale of the potential;
//! - `jump`: `max |(-½I + D)φ - lim Dφ|` with `D` the Nyström operator and the limit taken from
//!   inside by normal-offset extrapolation, at eight nodes and two levels;
//! - `ibvp-inverse`: relative error of the density recovered from data `(-½I + D)φ*` with `D`
//!   evaluated adaptively;
//! - `poisson-gaussian`: `Pφ` for the Gaussian initial profile by tensor Gauss–Hermite quadrature
//!   in `ξ = x + 2 sqrt(a1(t)) z`, with `m_space` nodes per axis, against the closed form.

use std::path::Path;

use degpot::bie::BieSystem;
use degpot::density::SpatialProfile;
use degpot::kernel::eval_kernel;
use degpot::potentials::{double_layer_boundary_limit, eval_double_layer_direct, PotentialKind};
use degpot::quadrature::GaussRule;
use degpot::trace::trace_residual;
use degpot::Point;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{boundary_density, field, gaussian_initial};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::write_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Trace(PotentialKind),
    Jump,
    IbvpInverse,
    PoissonGaussian,
}

impl Target {
    pub fn parse(name: &str, which: Option<&str>, cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(match name {
            "trace" => Target::Trace(match which {
                Some("volume") => PotentialKind::V,
                Some("poisson") => PotentialKind::P,
                None if cfg.initial.is_some() => PotentialKind::P,
                None => PotentialKind::V,
                Some(other) => {
                    return Err(CliError::Config(format!("--which: expected volume or poisson, got `{other}`")))
                }
            }),
            "jump" => Target::Jump,
            "ibvp-inverse" => Target::IbvpInverse,
            "poisson-gaussian" => Target::PoissonGaussian,
            other => {
                return Err(CliError::Config(format!(
                    "--target: expected trace, jump, ibvp-inverse or poisson-gaussian, got `{other}`"
                )))
            }
        })
    }

    fn name(self) -> &'static str {
        match self {
            Target::Trace(_) => "trace",
            Target::Jump => "jump",
            Target::IbvpInverse => "ibvp-inverse",
            Target::PoissonGaussian => "poisson-gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    RefineSpace,
    RefineTime,
    RefineBoth,
    HorizonSweep,
}

impl Study {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "refine_space" => Study::RefineSpace,
            "refine_time" => Study::RefineTime,
            "refine_both" => Study::RefineBoth,
            "horizon_sweep" => Study::HorizonSweep,
            other => {
                return Err(CliError::Config(format!(
                    "--study: expected refine_space, refine_time, refine_both or horizon_sweep, got `{other}`"
                )))
            }
        })
    }

    fn name(self) -> &'static str {
        match self {
            Study::RefineSpace => "refine_space",
            Study::RefineTime => "refine_time",
            Study::RefineBoth => "refine_both",
            Study::HorizonSweep => "horizon_sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Rung {
    pub m_space: usize,
    pub m_time: usize,
    pub horizon: f64,
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub resolution: Rung,
    pub error: f64,
    /// `log2(e_prev / e)`; empty on the first row.
    pub order: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct StudyTable {
    pub target: String,
    pub study: String,
    pub rows: Vec<Row>,
    pub complete: bool,
    pub failure: Option<String>,
}

/// Rungs double the refined parameters starting from the configured resolution; the horizon
/// sweep halves `T` downward from the configured horizon.
pub fn ladder(cfg: &RunConfig, study: Study) -> Vec<Rung> {
    let r = cfg.resolution;
    let n = cfg.study.rungs;
    (0..n)
        .map(|k| {
            let f = 1usize << k;
            match study {
                Study::RefineSpace => Rung {
                    m_space: r.m_space * f,
                    m_time: r.m_time,
                    horizon: cfg.horizon(),
                },
                Study::RefineTime => Rung {
                    m_space: r.m_space,
                    m_time: r.m_time * f,
                    horizon: cfg.horizon(),
                },
                Study::RefineBoth => Rung {
                    m_space: r.m_space * f,
                    m_time: r.m_time * f,
                    horizon: cfg.horizon(),
                },
                Study::HorizonSweep => Rung {
                    m_space: r.m_space,
                    m_time: r.m_time,
                    horizon: cfg.horizon() * 0.5f64.powi((n - 1 - k) as i32),
                },
            }
        })
        .collect()
}

pub fn run_study(cfg: &RunConfig, target: Target, study: Study) -> (StudyTable, Option<CliError>) {
    let mut table = StudyTable {
        target: target.name().into(),
        study: study.name().into(),
        rows: Vec::new(),
        complete: false,
        failure: None,
    };
    for rung in ladder(cfg, study) {
        let error = cfg
            .with_horizon(rung.horizon)
            .and_then(|c| c.with_resolution(rung.m_space, rung.m_time))
            .and_then(|c| rung_error(&c, target));
        match error {
            Ok(e) => {
                let order = table.rows.last().map(|prev| (prev.error / e).log2());
                table.rows.push(Row {
                    resolution: rung,
                    error: e,
                    order,
                });
            }
            Err(e) => {
                table.failure = Some(e.to_string());
                return (table, Some(e));
            }
        }
    }
    table.complete = true;
    (table, None)
}

pub fn study_command(
    cfg: &RunConfig,
    target: Target,
    study: Study,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let (table, failure) = run_study(cfg, target, study);
    write_json(out, &table)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn rung_error(cfg: &RunConfig, target: Target) -> Result<f64, CliError> {
    let res = cfg.resolution;
    match target {
        Target::Trace(kind) => {
            let r = trace_residual(&field(cfg, kind)?, res.m_space, res.m_time)?;
            if !(r.scale > 0.0) {
                return Err(CliError::Config("density: the potential vanishes on every sample".into()));
            }
            Ok(r.sup_residual / r.scale)
        }
        Target::Jump => jump_error(cfg),
        Target::IbvpInverse => inverse_error(cfg),
        Target::PoissonGaussian => poisson_gaussian_error(cfg),
    }
}

fn system(cfg: &RunConfig) -> Result<BieSystem, CliError> {
    let r = cfg.resolution;
    Ok(BieSystem::assemble(&cfg.geometry, &cfg.coefficient, r.m_space, r.m_time, r.q, cfg.gamma_eff)?)
}

fn jump_error(cfg: &RunConfig) -> Result<f64, CliError> {
    let (m, mt) = (cfg.resolution.m_space, cfg.resolution.m_time);
    if m % 8 != 0 {
        return Err(CliError::Config(format!("resolution.m_space: the jump study needs a multiple of 8, got {m}")));
    }
    let phi = boundary_density(cfg)?;
    let sys = system(cfg)?;
    let d = sys.apply(&sys.sample(phi)?)?;
    let d_field = field(cfg, PotentialKind::D)?;
    let mut levels = vec![mt];
    if mt % 2 == 0 {
        levels.insert(0, mt / 2);
    }
    let probes: Vec<(usize, usize)> = levels.iter().flat_map(|&k| (0..8).map(move |i| (k, i * m / 8))).collect();
    let errors = probes
        .par_iter()
        .map(|&(k, i)| {
            let limit = double_layer_boundary_limit(&d_field, sys.nodes()[i].s, sys.times()[k])?.value;
            Ok((d[k][i] - limit).abs())
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}

fn inverse_error(cfg: &RunConfig) -> Result<f64, CliError> {
    let phi = boundary_density(cfg)?;
    let sys = system(cfg)?;
    let d_field = field(cfg, PotentialKind::D)?;
    let data = sys
        .times()
        .par_iter()
        .zip(sys.sigmas())
        .map(|(&t, &sigma)| {
            let column = sys
                .nodes()
                .iter()
                .map(|n| Ok(eval_double_layer_direct(&d_field, n.s, t)? - 0.5 * phi.eval(n.s, t, sigma)))
                .collect::<Result<Vec<f64>, CliError>>()?;
            Ok(DVector::from_vec(column))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let solution = sys.solve_march(&data)?;
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for (k, level) in solution.iter().enumerate() {
        for (i, n) in sys.nodes().iter().enumerate() {
            let exact = phi.eval(n.s, sys.times()[k], sys.sigmas()[k]);
            err = err.max((level[i] - exact).abs());
            scale = scale.max(exact.abs());
        }
    }
    if !(scale > 0.0) {
        return Err(CliError::Config("density.boundary: the density vanishes at every node".into()));
    }
    Ok(err / scale)
}

/// `amplitude (σ/(σ+s))^{n/2} exp(-|x-c|²/(4(σ+s)))`.
fn gaussian_poisson(profile: &SpatialProfile, n: usize, x: &Point, s: f64) -> f64 {
    let SpatialProfile::Gaussian {
        sigma,
        center,
        amplitude,
    } = profile
    else {
        unreachable!("checked by gaussian_initial")
    };
    let r2: f64 = (0..n).map(|i| (x[i] - center[i]).powi(2)).sum();
    amplitude * (sigma / (sigma + s)).powf(0.5 * n as f64) * (-r2 / (4.0 * (sigma + s))).exp()
}

/// Past this `|z|²` the Hermite weight and kernel underflow and the node contributes nothing.
const HERMITE_CUTOFF: f64 = 600.0;

fn hermite_poisson(profile: &SpatialProfile, n: usize, x: &Point, s: f64, rule: &GaussRule) -> f64 {
    let scale = 2.0 * s.sqrt();
    let jac = scale.powi(n as i32);
    let k = rule.len();
    let mut total = 0.0;
    let mut idx = [0usize; 3];
    let count = k.pow(n as u32);
    for flat in 0..count {
        let mut rem = flat;
        for slot in idx.iter_mut().take(n) {
            *slot = rem % k;
            rem /= k;
        }
        let mut z = [0.0; 3];
        let mut w = 1.0;
        for d in 0..n {
            z[d] = rule.nodes[idx[d]];
            w *= rule.weights[idx[d]];
        }
        let z2: f64 = z.iter().map(|v| v * v).sum();
        if z2 > HERMITE_CUTOFF {
            continue;
        }
        let offset = [scale * z[0], scale * z[1], scale * z[2]];
        let xi = [x[0] + offset[0], x[1] + offset[1], x[2] + offset[2]];
        // divide out the Hermite weight exp(-|z|²)
        total += w * z2.exp() * eval_kernel(n, &offset, s) * jac * profile.eval(&xi);
    }
    total
}

fn poisson_gaussian_error(cfg: &RunConfig) -> Result<f64, CliError> {
    let degpot::density::SpaceTimeDensity::Initial(profile) = gaussian_initial(cfg)? else {
        unreachable!()
    };
    let n = cfg.dimension;
    let c = profile.center();
    let points: Vec<Point> = if cfg.study.points.is_empty() {
        let mut a = c;
        a[0] += 0.2;
        a[1] -= 0.1;
        let mut b = c;
        b[0] -= 0.1;
        b[n - 1] += 0.15;
        vec![c, a, b]
    } else {
        cfg.study
            .points
            .iter()
            .map(|p| {
                let mut x = [0.0; 3];
                x[..n].copy_from_slice(p);
                x
            })
            .collect()
    };
    let rule = GaussRule::hermite(cfg.resolution.m_space);
    let mut worst = 0.0f64;
    for f in &cfg.study.times {
        let s = cfg.coefficient.eval_a1(f * cfg.horizon())?;
        if !(s > 0.0) {
            return Err(CliError::Config(format!("study.times: a1 vanishes at {f} T")));
        }
        for x in &points {
            let e = (hermite_poisson(&profile, n, x, s, &rule) - gaussian_poisson(&profile, n, x, s)).abs();
            worst = if e.is_nan() { f64::NAN } else { worst.max(e) };
        }
    }
    Ok(worst)
}
