//! Run configuration: TOML text, validated into library objects.

use std::fs;
use std::path::{Path, PathBuf};

use degpot::density::{BoundaryDensity, FourierProfile, SpaceTimeDensity, SpatialProfile, TimeFactor, VolumeDensity};
use degpot::potentials::{PotentialKind, Resolution};
use degpot::{Assumption, BoundaryGeometry, CoefficientKind, Shape, TimeCoefficient};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub dimension: Option<usize>,
    pub horizon: f64,
    #[serde(default = "yes")]
    pub parallel: bool,
    pub coefficient: RawCoefficient,
    pub domain: RawDomain,
    #[serde(default)]
    pub resolution: RawResolution,
    #[serde(default)]
    pub density: RawDensities,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub jump: JumpSettings,
    #[serde(default)]
    pub study: StudySettings,
    #[serde(default)]
    pub output: OutputSettings,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawCoefficient {
    Constant {
        c: f64,
    },
    Power {
        p: f64,
    },
    Affine {
        alpha: f64,
        beta: f64,
    },
    PiecewisePolynomial {
        breakpoints: Vec<f64>,
        rows: Vec<Vec<f64>>,
    },
    Tabulated {
        file: Option<PathBuf>,
        grid: Option<Vec<f64>>,
        values: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawDomain {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
    },
    Star {
        center: [f64; 2],
        r0: f64,
        #[serde(default)]
        cos_k: Vec<f64>,
        #[serde(default)]
        sin_k: Vec<f64>,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawResolution {
    pub m_space: usize,
    pub m_time: usize,
    pub q: f64,
    pub gamma_eff: f64,
    pub tolerance: f64,
}

impl Default for RawResolution {
    fn default() -> Self {
        let r = Resolution::default();
        RawResolution {
            m_space: r.m_space,
            m_time: r.m_time,
            q: r.q,
            gamma_eff: 0.75,
            tolerance: r.tolerance,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDensities {
    pub volume: Option<RawVolume>,
    pub initial: Option<RawProfile>,
    pub boundary: Option<RawBoundary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Gaussian,
    Bump,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProfile {
    pub profile: ProfileName,
    /// Gaussian width parameter.
    pub sigma: Option<f64>,
    /// Bump support radius.
    pub radius: Option<f64>,
    pub center: Vec<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVolume {
    pub profile: ProfileName,
    pub sigma: Option<f64>,
    pub radius: Option<f64>,
    pub center: Vec<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// `f = a(t)[β - a1(t)Δβ]`, whose volume potential is `a1(t)β`.
    #[serde(default)]
    pub manufactured: bool,
    pub time: Option<RawTime>,
}

impl RawVolume {
    fn profile(&self) -> RawProfile {
        RawProfile {
            profile: self.profile,
            sigma: self.sigma,
            radius: self.radius,
            center: self.center.clone(),
            amplitude: self.amplitude,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawTime {
    One,
    Polynomial { coefficients: Vec<f64> },
    Sine { omega: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawBoundary {
    Zero,
    Constant {
        value: f64,
    },
    /// `τ cos s`.
    TauCos,
    Separable {
        time: RawTime,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub kernel_normalization: f64,
    pub kernel_fourier: f64,
    pub jump: f64,
    /// Relative to the scale of the potential.
    pub trace: f64,
    /// PDE residual of the IBVP solution, relative to the scale of `u`.
    pub ibvp_pde: f64,
    /// Boundary trace of the IBVP solution, relative to `‖g‖∞`.
    pub ibvp_boundary: f64,
    pub picard: f64,
    pub picard_max_iters: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            kernel_normalization: 1e-10,
            kernel_fourier: 1e-8,
            jump: 1e-3,
            trace: 1e-3,
            ibvp_pde: 1e-3,
            ibvp_boundary: 1e-2,
            picard: 1e-10,
            picard_max_iters: 500,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JumpSettings {
    pub nodes: usize,
    /// Fractions of the horizon.
    pub times: Vec<f64>,
}

impl Default for JumpSettings {
    fn default() -> Self {
        JumpSettings {
            nodes: 16,
            times: vec![0.25, 0.5, 0.75],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySettings {
    pub rungs: usize,
    /// Probe points of the `poisson-gaussian` target; empty means the profile center and two
    /// points offset from it.
    pub points: Vec<Vec<f64>>,
    /// Probe times of the `poisson-gaussian` target, as fractions of the horizon.
    pub times: Vec<f64>,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            rungs: 3,
            points: Vec::new(),
            times: vec![0.01, 0.02],
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dimension: usize,
    pub coefficient: TimeCoefficient,
    pub geometry: BoundaryGeometry,
    pub resolution: Resolution,
    pub gamma_eff: f64,
    pub volume: Option<VolumeDensity>,
    pub initial: Option<SpatialProfile>,
    pub boundary: Option<BoundaryDensity>,
    pub tolerances: Tolerances,
    pub jump: JumpSettings,
    pub study: StudySettings,
    pub output: OutputSettings,
    pub parallel: bool,
    pub raw: RawConfig,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn horizon(&self) -> f64 {
        self.coefficient.horizon()
    }

    /// Density matching a potential kind.
    pub fn density_for(&self, kind: PotentialKind) -> Result<SpaceTimeDensity, CliError> {
        let missing = |table: &str| CliError::Config(format!("density.{table}: required for {kind:?} but missing"));
        Ok(match kind {
            PotentialKind::V => SpaceTimeDensity::Volume(self.volume.clone().ok_or_else(|| missing("volume"))?),
            PotentialKind::P => SpaceTimeDensity::Initial(self.initial.clone().ok_or_else(|| missing("initial"))?),
            PotentialKind::S | PotentialKind::D => {
                SpaceTimeDensity::Boundary(self.boundary.clone().ok_or_else(|| missing("boundary"))?)
            }
        })
    }

    /// The same configuration with another horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<RunConfig, CliError> {
        let mut raw = self.raw.clone();
        raw.horizon = horizon;
        validate(raw, &self.base_dir)
    }

    pub fn with_resolution(&self, m_space: usize, m_time: usize) -> Result<RunConfig, CliError> {
        let mut raw = self.raw.clone();
        raw.resolution.m_space = m_space;
        raw.resolution.m_time = m_time;
        validate(raw, &self.base_dir)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    validate(raw, &base)
}

fn semantic(path: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {message}"))
}

pub fn validate(raw: RawConfig, base_dir: &Path) -> Result<RunConfig, CliError> {
    let horizon = raw.horizon;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(semantic("horizon", format!("must be positive, got {horizon}")));
    }
    let coefficient = coefficient(&raw.coefficient, horizon, base_dir)?;
    let geometry = domain(&raw.domain)?;
    let dimension = raw.dimension.unwrap_or_else(|| geometry.dimension());
    if !(dimension == 2 || dimension == 3) {
        return Err(semantic("dimension", format!("must be 2 or 3, got {dimension}")));
    }
    if dimension != geometry.dimension() {
        return Err(semantic(
            "dimension",
            format!("{dimension} does not match the {}-dimensional domain", geometry.dimension()),
        ));
    }
    let r = raw.resolution;
    if r.m_space < 8 || r.m_space % 2 != 0 {
        return Err(semantic("resolution.m_space", format!("must be even and at least 8, got {}", r.m_space)));
    }
    if r.m_time < 1 {
        return Err(semantic("resolution.m_time", "must be at least 1"));
    }
    if !(r.q >= 1.0) {
        return Err(semantic("resolution.q", format!("must be at least 1, got {}", r.q)));
    }
    if !(r.gamma_eff > 0.5 && r.gamma_eff < 1.0) {
        return Err(semantic("resolution.gamma_eff", format!("must lie in (1/2, 1), got {}", r.gamma_eff)));
    }
    if !(r.tolerance > 0.0 && r.tolerance < 1.0) {
        return Err(semantic("resolution.tolerance", format!("must lie in (0, 1), got {}", r.tolerance)));
    }
    let resolution = Resolution {
        m_space: r.m_space,
        m_time: r.m_time,
        q: r.q,
        tolerance: r.tolerance,
    };

    let volume = match &raw.density.volume {
        None => None,
        Some(v) => {
            let p = profile(&v.profile(), dimension, "density.volume")?;
            let density = match (v.manufactured, &v.time) {
                (true, None) => VolumeDensity::Manufactured {
                    profile: p,
                    coefficient: coefficient.clone(),
                },
                (true, Some(_)) => return Err(semantic("density.volume.time", "not allowed for a manufactured source")),
                (false, t) => VolumeDensity::Separable {
                    profile: p,
                    time: t.as_ref().map(time_factor).unwrap_or(TimeFactor::One),
                },
            };
            check_support(&SpaceTimeDensity::Volume(density.clone()), &geometry, "density.volume")?;
            Some(density)
        }
    };
    let initial = match &raw.density.initial {
        None => None,
        Some(p) => {
            let p = profile(p, dimension, "density.initial")?;
            check_support(&SpaceTimeDensity::Initial(p.clone()), &geometry, "density.initial")?;
            Some(p)
        }
    };
    let boundary = raw.density.boundary.as_ref().map(|b| match b {
        RawBoundary::Zero => BoundaryDensity::Zero,
        RawBoundary::Constant { value } => BoundaryDensity::Constant(*value),
        RawBoundary::TauCos => BoundaryDensity::tau_cos(),
        RawBoundary::Separable { time, cos, sin } => BoundaryDensity::Separable {
            time: time_factor(time),
            angular: FourierProfile {
                cos: cos.clone(),
                sin: sin.clone(),
            },
        },
    });
    if boundary.is_some() && !geometry.is_curve() {
        return Err(semantic("density.boundary", "boundary densities need a plane domain"));
    }

    let t = &raw.tolerances;
    for (name, value) in [
        ("kernel_normalization", t.kernel_normalization),
        ("kernel_fourier", t.kernel_fourier),
        ("jump", t.jump),
        ("trace", t.trace),
        ("ibvp_pde", t.ibvp_pde),
        ("ibvp_boundary", t.ibvp_boundary),
        ("picard", t.picard),
    ] {
        if !(value > 0.0) {
            return Err(semantic(&format!("tolerances.{name}"), format!("must be positive, got {value}")));
        }
    }
    if raw.jump.nodes == 0 || raw.jump.times.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(semantic("jump", "needs at least one node and times in (0, 1]"));
    }
    if raw.study.rungs == 0 || raw.study.times.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(semantic("study", "needs at least one rung and times in (0, 1]"));
    }
    if raw.study.points.iter().any(|p| p.len() != dimension) {
        return Err(semantic("study.points", format!("points must have {dimension} coordinates")));
    }

    Ok(RunConfig {
        dimension,
        coefficient,
        geometry,
        resolution,
        gamma_eff: r.gamma_eff,
        volume,
        initial,
        boundary,
        tolerances: raw.tolerances,
        jump: raw.jump.clone(),
        study: raw.study.clone(),
        output: raw.output.clone(),
        parallel: raw.parallel,
        raw,
        base_dir: base_dir.to_path_buf(),
    })
}

fn coefficient(raw: &RawCoefficient, horizon: f64, base_dir: &Path) -> Result<TimeCoefficient, CliError> {
    let kind = match raw {
        RawCoefficient::Constant { c } => CoefficientKind::Constant(*c),
        RawCoefficient::Power { p } => CoefficientKind::Power(*p),
        RawCoefficient::Affine { alpha, beta } => CoefficientKind::Affine {
            alpha: *alpha,
            beta: *beta,
        },
        RawCoefficient::PiecewisePolynomial { breakpoints, rows } => CoefficientKind::PiecewisePolynomial {
            breakpoints: breakpoints.clone(),
            rows: rows.clone(),
        },
        RawCoefficient::Tabulated { file, grid, values } => {
            let (grid, values) = match (file, grid, values) {
                (Some(file), None, None) => read_table(&base_dir.join(file))?,
                (None, Some(g), Some(v)) => (g.clone(), v.clone()),
                _ => {
                    return Err(semantic(
                        "coefficient",
                        "tabulated coefficients need either `file` or both `grid` and `values`",
                    ))
                }
            };
            CoefficientKind::Tabulated { grid, values }
        }
    };
    let c = TimeCoefficient::new(kind, horizon).map_err(|e| semantic("coefficient", e))?;
    if c.assumption() == Assumption::Neither {
        return Err(semantic(
            "coefficient",
            format!("a1(t) = ∫₀ᵗ a must be positive on (0, {horizon}]; the kernel is undefined otherwise"),
        ));
    }
    Ok(c)
}

/// Two-column CSV `(t, a)`, with or without a header row.
fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| semantic("coefficient.file", format!("{}: {e}", path.display())))?;
    let (mut grid, mut values) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| semantic("coefficient.file", e))?;
        let parsed: Vec<Option<f64>> = record.iter().map(|f| f.parse().ok()).collect();
        match parsed.as_slice() {
            [Some(t), Some(a)] => {
                grid.push(*t);
                values.push(*a);
            }
            _ if line == 0 => {}
            _ => {
                return Err(semantic(
                    "coefficient.file",
                    format!("{}: line {} is not a pair of numbers", path.display(), line + 1),
                ))
            }
        }
    }
    Ok((grid, values))
}

fn domain(raw: &RawDomain) -> Result<BoundaryGeometry, CliError> {
    let shape = match raw {
        RawDomain::Circle { center, radius } => Shape::Circle {
            center: *center,
            radius: *radius,
        },
        RawDomain::Ellipse { center, semi_axes } => Shape::Ellipse {
            center: *center,
            semi_axes: *semi_axes,
        },
        RawDomain::Star { center, r0, cos_k, sin_k } => Shape::StarCurve {
            center: *center,
            r0: *r0,
            cos_k: cos_k.clone(),
            sin_k: sin_k.clone(),
        },
        RawDomain::Sphere { center, radius } => Shape::Sphere {
            center: *center,
            radius: *radius,
        },
    };
    BoundaryGeometry::new(shape).map_err(|e| semantic("domain", e))
}

fn point(coords: &[f64], dimension: usize, path: &str) -> Result<[f64; 3], CliError> {
    if coords.len() != dimension {
        return Err(semantic(path, format!("expected {dimension} coordinates, got {}", coords.len())));
    }
    let mut p = [0.0; 3];
    p[..dimension].copy_from_slice(coords);
    Ok(p)
}

fn profile(raw: &RawProfile, dimension: usize, path: &str) -> Result<SpatialProfile, CliError> {
    let center = point(&raw.center, dimension, &format!("{path}.center"))?;
    let amplitude = raw.amplitude;
    let p = match (raw.profile, raw.sigma, raw.radius) {
        (ProfileName::Gaussian, Some(sigma), None) => SpatialProfile::Gaussian {
            sigma,
            center,
            amplitude,
        },
        (ProfileName::Bump, None, Some(radius)) => SpatialProfile::Bump {
            radius,
            center,
            amplitude,
        },
        (ProfileName::Gaussian, _, _) => {
            return Err(semantic(path, "a gaussian profile takes `sigma` and no `radius`"))
        }
        (ProfileName::Bump, _, _) => return Err(semantic(path, "a bump profile takes `radius` and no `sigma`")),
    };
    p.validate().map_err(|e| semantic(path, e))?;
    Ok(p)
}

fn check_support(density: &SpaceTimeDensity, geometry: &BoundaryGeometry, path: &str) -> Result<(), CliError> {
    density.validate(geometry).map_err(|e| {
        let hint = match density {
            SpaceTimeDensity::Volume(v) if matches!(v.profile(), SpatialProfile::Gaussian { .. }) => {
                "; reduce sigma so that the truncated Gaussian fits inside the domain"
            }
            SpaceTimeDensity::Initial(SpatialProfile::Gaussian { .. }) => {
                "; reduce sigma so that the truncated Gaussian fits inside the domain"
            }
            _ => "",
        };
        semantic(path, format!("{e}{hint}"))
    })
}

fn time_factor(raw: &RawTime) -> TimeFactor {
    match raw {
        RawTime::One => TimeFactor::One,
        RawTime::Polynomial { coefficients } => TimeFactor::Polynomial(coefficients.clone()),
        RawTime::Sine { omega } => TimeFactor::Sine(*omega),
    }
}
