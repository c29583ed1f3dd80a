//! Experiment configuration: strict JSON with per-mode parameter blocks.

use std::fs;
use std::path::{Path, PathBuf};

use relulab::{gamma_threshold, DensitySpec, ParamVec, PiecewisePoly, Problem, TargetSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const DEFAULT_OUT_DIR: &str = "relulab-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    CheckGradient,
    Hessian,
    Manifold,
    Gd,
    Gf,
    Multistart,
    Rates,
    CertifyDets,
}

impl ModeName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CheckGradient => "check-gradient",
            Self::Hessian => "hessian",
            Self::Manifold => "manifold",
            Self::Gd => "gd",
            Self::Gf => "gf",
            Self::Multistart => "multistart",
            Self::Rates => "rates",
            Self::CertifyDets => "certify-dets",
        }
    }

    pub fn is_training(self) -> bool {
        matches!(self, Self::Gd | Self::Gf | Self::Multistart | Self::Rates)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: ProblemConfig,
    mode: ModeName,
    #[serde(default)]
    params: Option<serde_json::Value>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    outputs: OutputConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub target: TargetSpec<f64>,
    /// Uniform on the target's domain when absent.
    #[serde(default)]
    pub density: Option<DensitySpec<f64>>,
    pub width: usize,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// A fixed step size or a named rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSize {
    Fixed(f64),
    Named(NamedStep),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedStep {
    Threshold,
}

impl StepSize {
    pub fn resolve(self, p: &Problem<f64>) -> f64 {
        match self {
            Self::Fixed(g) => g,
            Self::Named(NamedStep::Threshold) => gamma_threshold(p),
        }
    }
}

/// Starting point of a single descent or flow run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Init {
    /// A random chart point moved by `distance` along the Hessian's range.
    ChartOffset { distance: f64 },
    /// Standard normal entries.
    Normal,
    Explicit { theta: Vec<f64> },
}

impl Default for Init {
    fn default() -> Self {
        Self::ChartOffset { distance: 0.05 }
    }
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckGradientParams {
    pub samples: usize,
    /// Standard deviation of the random parameters.
    pub scale: f64,
    pub tolerance: f64,
}

impl Default for CheckGradientParams {
    fn default() -> Self {
        Self {
            samples: 100,
            scale: 1.0,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HessianParams {
    pub samples: usize,
    pub scale: f64,
    pub tolerance: f64,
    pub symmetry_tolerance: f64,
}

impl Default for HessianParams {
    fn default() -> Self {
        Self {
            samples: 50,
            scale: 1.0,
            tolerance: 1e-5,
            symmetry_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldParams {
    pub samples: usize,
    pub risk_tolerance: f64,
    pub gradient_tolerance: f64,
    pub min_gap_ratio: f64,
}

impl Default for ManifoldParams {
    fn default() -> Self {
        Self {
            samples: 50,
            risk_tolerance: 1e-18,
            gradient_tolerance: 1e-10,
            min_gap_ratio: 1e3,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentParams {
    pub gamma: StepSize,
    #[serde(default)]
    pub rho_exp: f64,
    pub steps: usize,
    #[serde(default)]
    pub init: Init,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub track_distance: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    pub t_max: f64,
    pub dt: f64,
    #[serde(default)]
    pub init: Init,
    #[serde(default = "one")]
    pub record_every: usize,
    /// Allowed risk increase between records, relative to the initial risk.
    #[serde(default = "flow_tolerance")]
    pub monotone_tolerance: f64,
}

fn flow_tolerance() -> f64 {
    1e-12
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultistartParams {
    pub restarts: usize,
    pub gamma: StepSize,
    #[serde(default)]
    pub rho_exp: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub record_every: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesParams {
    pub gamma: StepSize,
    #[serde(default)]
    pub rho_exp: f64,
    pub steps: usize,
    #[serde(default)]
    pub init: Init,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default = "min_r2")]
    pub min_r2: f64,
    /// Slack on the fitted envelope `C exp(−c n^{1−ρ})`.
    #[serde(default = "envelope")]
    pub envelope: f64,
}

fn min_r2() -> f64 {
    0.95
}

fn envelope() -> f64 {
    1.5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyParams {
    pub instances: usize,
    pub max_n: usize,
    pub tolerance: f64,
}

impl Default for CertifyParams {
    fn default() -> Self {
        Self {
            instances: 50,
            max_n: 6,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub enum ModeConfig {
    CheckGradient(CheckGradientParams),
    Hessian(HessianParams),
    Manifold(ManifoldParams),
    Gd(DescentParams),
    Gf(FlowParams),
    Multistart(MultistartParams),
    Rates(RatesParams),
    CertifyDets(CertifyParams),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub mode_name: ModeName,
    pub problem: Problem<f64>,
    pub mode: ModeConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// `sha256:` followed by the hex digest of the problem's canonical JSON.
    pub fn problem_hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.problem.to_spec()).expect("problem serializes");
        let digest = Sha256::digest(&canonical);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        format!("sha256:{hex}")
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

fn path_of(path: &serde_path_to_error::Path, prefix: &str) -> String {
    let p = path.to_string();
    match (prefix.is_empty(), p == ".") {
        (true, _) => p,
        (false, true) => prefix.to_string(),
        (false, false) => format!("{prefix}.{p}"),
    }
}

fn from_json<T: DeserializeOwned>(value: serde_json::Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value)
        .map_err(|e| CliError::config(path_of(e.path(), prefix), e.inner()))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::config(path_of(e.path(), ""), e.inner()))?;
    let params = match raw.params {
        None | Some(serde_json::Value::Null) => serde_json::Value::Object(Default::default()),
        Some(v) => v,
    };
    let mode = match raw.mode {
        ModeName::CheckGradient => ModeConfig::CheckGradient(from_json(params, "params")?),
        ModeName::Hessian => ModeConfig::Hessian(from_json(params, "params")?),
        ModeName::Manifold => ModeConfig::Manifold(from_json(params, "params")?),
        ModeName::Gd => ModeConfig::Gd(from_json(params, "params")?),
        ModeName::Gf => ModeConfig::Gf(from_json(params, "params")?),
        ModeName::Multistart => ModeConfig::Multistart(from_json(params, "params")?),
        ModeName::Rates => ModeConfig::Rates(from_json(params, "params")?),
        ModeName::CertifyDets => ModeConfig::CertifyDets(from_json(params, "params")?),
    };
    let problem = build_problem(&raw.problem)?;
    let cfg = ExperimentConfig {
        mode_name: raw.mode,
        problem,
        mode,
        seed: raw.seed,
        out_dir: raw.outputs.dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn build_problem(pc: &ProblemConfig) -> Result<Problem<f64>> {
    pc.target
        .validate()
        .map_err(|e| CliError::config("problem.target", e))?;
    let (a, b) = (pc.target.a(), pc.target.b());
    let density = match &pc.density {
        Some(d) => d.to_piecewise(),
        None => PiecewisePoly::constant(a, b, 1.0),
    }
    .map_err(|e| CliError::config("problem.density", e))?;
    if pc.width == 0 {
        return Err(CliError::config("problem.width", "must be at least 1"));
    }
    Problem::new(pc.target.clone(), density, pc.width).map_err(|e| CliError::config("problem", e))
}

fn require(ok: bool, field: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(field, message))
    }
}

fn check_step(gamma: StepSize, rho_exp: f64, steps: usize, record_every: usize) -> Result<()> {
    if let StepSize::Fixed(g) = gamma {
        require(g > 0.0 && g.is_finite(), "params.gamma", "must be positive and finite")?;
    }
    require((0.0..1.0).contains(&rho_exp), "params.rho_exp", "must lie in [0, 1)")?;
    require(steps >= 1, "params.steps", "must be at least 1")?;
    require(record_every >= 1, "params.record_every", "must be at least 1")
}

fn check_init(init: &Init, p: &Problem<f64>) -> Result<()> {
    match init {
        Init::ChartOffset { distance } => {
            require(
                distance.is_finite() && *distance >= 0.0,
                "params.init.distance",
                "must be finite and nonnegative",
            )?;
            require(
                p.target().repeated_slope().is_none(),
                "params.init",
                "chart-offset needs distinct consecutive slopes",
            )
        }
        Init::Normal => Ok(()),
        Init::Explicit { theta } => ParamVec::new(p.width(), theta.clone())
            .map(|_| ())
            .map_err(|e| CliError::config("params.init.theta", e)),
    }
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    let p = &cfg.problem;
    let n = p.target().n();
    if cfg.mode_name.is_training() || cfg.mode_name == ModeName::Manifold {
        require(
            p.width() >= n,
            "problem.width",
            &format!("width {} is below the target's {n} segments", p.width()),
        )?;
    }
    match &cfg.mode {
        ModeConfig::CheckGradient(c) => {
            require(c.samples >= 1, "params.samples", "must be at least 1")?;
            require(c.scale > 0.0, "params.scale", "must be positive")
        }
        ModeConfig::Hessian(c) => {
            require(c.samples >= 1, "params.samples", "must be at least 1")?;
            require(c.scale > 0.0, "params.scale", "must be positive")
        }
        ModeConfig::Manifold(_) => require(
            p.target().repeated_slope().is_none(),
            "problem.target",
            "consecutive slopes must differ",
        ),
        ModeConfig::Gd(c) => {
            check_step(c.gamma, c.rho_exp, c.steps, c.record_every)?;
            check_init(&c.init, p)
        }
        ModeConfig::Gf(c) => {
            require(c.dt > 0.0 && c.dt.is_finite(), "params.dt", "must be positive and finite")?;
            require(c.t_max >= 0.0 && c.t_max.is_finite(), "params.t_max", "must be finite and nonnegative")?;
            require(c.record_every >= 1, "params.record_every", "must be at least 1")?;
            check_init(&c.init, p)
        }
        ModeConfig::Multistart(c) => {
            require(c.restarts >= 1, "params.restarts", "must be at least 1")?;
            check_step(c.gamma, c.rho_exp, c.steps, c.record_every)
        }
        ModeConfig::Rates(c) => {
            check_step(c.gamma, c.rho_exp, c.steps, c.record_every)?;
            check_init(&c.init, p)
        }
        ModeConfig::CertifyDets(c) => {
            require(c.instances >= 1, "params.instances", "must be at least 1")?;
            require((1..=6).contains(&c.max_n), "params.max_n", "must lie in 1..=6")
        }
    }
}
