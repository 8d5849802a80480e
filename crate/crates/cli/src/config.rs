//! TOML scenario files and their translation into solver objects.

use std::path::PathBuf;
use std::sync::Arc;

use ris_core::control::{ControlProblem, SearchOptions, Target};
use ris_core::expr::{Expr, Var};
use ris_core::scenario::LoadTerm;
use ris_core::verify::ExperimentConfig;
use ris_core::viscous::{Integrator, SolveOptions};
use ris_core::vv::geometric_schedule;
use ris_core::{DissipationSpec, Field, KernelSpec, LoadSpec, Mesh, Scenario};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn field_error(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub mesh: MeshConfig,
    pub energy: EnergyConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub load: LoadConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub dissipation: DissipationConfig,
    #[serde(default)]
    pub viscosity: ViscosityConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    pub control: Option<ControlConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub nodes: usize,
    #[serde(default = "one")]
    pub length: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

/// `amplitude(t) · density(x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub amplitude: String,
    #[serde(default = "one_expr")]
    pub density: String,
}

fn one_expr() -> String {
    "1".into()
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKindConfig {
    #[default]
    Identity,
    Convolution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub kind: KernelKindConfig,
    /// `b(t)` and `b′(t)` for a convolution kernel.
    pub b: Option<String>,
    pub b_prime: Option<String>,
    /// Initial history `y₀(x)`.
    #[serde(default = "zero_expr")]
    pub y0: String,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: KernelKindConfig::Identity,
            b: None,
            b_prime: None,
            y0: zero_expr(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationKindConfig {
    Fatigue,
    WeightedL1,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationConfig {
    pub kind: DissipationKindConfig,
    /// `κ(z)` for fatigue, `g(z)` for weighted L¹.
    pub threshold: String,
    /// `κ′(z)`, required by the Lipschitz experiment.
    pub threshold_prime: Option<String>,
    /// Lipschitz constant of the threshold; estimated on `z_range` if absent.
    pub lipschitz: Option<f64>,
    #[serde(default = "default_z_range")]
    pub z_range: [f64; 2],
}

fn default_z_range() -> [f64; 2] {
    [0.0, 10.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorConfig {
    #[default]
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscosityConfig {
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Explicit strictly decreasing schedule; overrides `eps0`/`levels`.
    pub schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default = "yes")]
    pub warm_start: bool,
}

fn default_eps() -> f64 {
    1e-3
}
fn default_eps0() -> f64 {
    0.1
}
fn default_levels() -> usize {
    8
}
fn yes() -> bool {
    true
}

impl Default for ViscosityConfig {
    fn default() -> Self {
        Self {
            epsilon: default_eps(),
            eps0: default_eps0(),
            levels: default_levels(),
            schedule: None,
            integrator: IntegratorConfig::Implicit,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub bound_eps: Vec<f64>,
    pub lipschitz_eps: Vec<f64>,
    pub load_cap: f64,
    pub n_loads: usize,
    pub n_pairs: usize,
    pub n_modes: usize,
    pub perturbation: [f64; 2],
    pub variation_limit: f64,
    pub n_test_dirs: usize,
    pub certificate_tolerance: f64,
    pub uniqueness_tolerance: f64,
    pub dual_tolerance: f64,
    pub dual_min_order: f64,
    pub history_samples: usize,
    pub history_tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            bound_eps: vec![1e-1, 1e-2, 1e-3, 1e-4],
            lipschitz_eps: vec![1e-1, 1e-2, 1e-3],
            load_cap: 10.0,
            n_loads: 10,
            n_pairs: 20,
            n_modes: 3,
            perturbation: [0.05, 0.3],
            variation_limit: 2.0,
            n_test_dirs: 20,
            certificate_tolerance: 1e-2,
            uniqueness_tolerance: 3e-2,
            dual_tolerance: 1e-6,
            dual_min_order: 0.9,
            history_samples: 50,
            history_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    /// `ψᵢ(t) φᵢ(x)` with `ψᵢ(0) = 0`.
    pub basis: Vec<TermConfig>,
    /// Track the trajectory generated by these coefficients.
    pub target_theta: Option<Vec<f64>>,
    /// Track a terminal state `q_T(x)`.
    pub target_terminal: Option<String>,
    #[serde(default = "default_reg")]
    pub reg_weight: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "one")]
    pub initial_step: f64,
    #[serde(default = "default_min_step")]
    pub min_step: f64,
    pub theta0: Option<Vec<f64>>,
}

fn default_reg() -> f64 {
    1e-6
}
fn default_budget() -> usize {
    200
}
fn default_min_step() -> f64 {
    1e-3
}

/// Problem, starting coefficients and search options.
pub type ControlSetup = (ControlProblem<f64>, Vec<f64>, SearchOptions<f64>);

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(field_error(field, format!("must be positive, got {v}")))
    }
}

fn parse(field: &str, src: &str, vars: &[Var]) -> Result<Expr, CliError> {
    Expr::parse(src, vars).map_err(|e| field_error(field, e))
}

fn terms(field: &str, mesh: &Mesh<f64>, list: &[TermConfig]) -> Result<Vec<LoadTerm<f64>>, CliError> {
    list.iter()
        .enumerate()
        .map(|(i, t)| {
            let amp = parse(&format!("{field}[{i}].amplitude"), &t.amplitude, &[Var::T])?;
            let dens = parse(&format!("{field}[{i}].density"), &t.density, &[Var::X])?;
            let d = dens.to_fn::<f64>(Var::X);
            Ok(LoadTerm {
                amplitude: amp.to_fn(Var::T),
                density: mesh.field_from_fn(|x| d.call(x)),
            })
        })
        .collect()
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Canonical serialization of everything that affects results; the
    /// output directory is left out.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        toml::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check(&self) -> Result<(), CliError> {
        if self.mesh.nodes < 2 {
            return Err(field_error(
                "mesh.nodes",
                format!("must be at least 2, got {}", self.mesh.nodes),
            ));
        }
        positive("mesh.length", self.mesh.length)?;
        positive("energy.alpha", self.energy.alpha)?;
        positive("time.horizon", self.time.horizon)?;
        if self.time.steps == 0 {
            return Err(field_error("time.steps", "must be at least 1"));
        }
        positive("viscosity.epsilon", self.viscosity.epsilon)?;
        positive("viscosity.eps0", self.viscosity.eps0)?;
        if self.viscosity.levels == 0 {
            return Err(field_error("viscosity.levels", "must be at least 1"));
        }
        if let Some(s) = &self.viscosity.schedule {
            if s.is_empty() || s.iter().any(|&e| !(e > 0.0)) || s.windows(2).any(|w| w[1] >= w[0]) {
                return Err(field_error(
                    "viscosity.schedule",
                    "must be a nonempty, strictly decreasing list of positive values",
                ));
            }
        }
        let [lo, hi] = self.dissipation.z_range;
        if !(lo < hi) {
            return Err(field_error("dissipation.z_range", "needs lo < hi"));
        }
        if let Some(l) = self.dissipation.lipschitz {
            if !(l >= 0.0) {
                return Err(field_error(
                    "dissipation.lipschitz",
                    format!("must be nonnegative, got {l}"),
                ));
            }
        }
        let v = &self.verify;
        positive("verify.load_cap", v.load_cap)?;
        for (name, list) in [
            ("verify.bound_eps", &v.bound_eps),
            ("verify.lipschitz_eps", &v.lipschitz_eps),
        ] {
            if list.is_empty() || list.iter().any(|&e| !(e > 0.0)) {
                return Err(field_error(name, "must be a nonempty list of positive values"));
            }
        }
        if !(v.perturbation[0] > 0.0 && v.perturbation[1] >= v.perturbation[0] && v.perturbation[1] < 1.0) {
            return Err(field_error("verify.perturbation", "needs 0 < lo ≤ hi < 1"));
        }
        if let Some(c) = &self.control {
            if c.basis.is_empty() {
                return Err(field_error("control.basis", "must not be empty"));
            }
            if c.target_theta.is_some() == c.target_terminal.is_some() {
                return Err(field_error(
                    "control",
                    "set exactly one of target_theta and target_terminal",
                ));
            }
            if let Some(t) = &c.target_theta {
                if t.len() != c.basis.len() {
                    return Err(field_error("control.target_theta", "length must match control.basis"));
                }
            }
            if let Some(t) = &c.theta0 {
                if t.len() != c.basis.len() {
                    return Err(field_error("control.theta0", "length must match control.basis"));
                }
            }
            positive("control.epsilon", c.epsilon)?;
            positive("control.initial_step", c.initial_step)?;
            positive("control.min_step", c.min_step)?;
            if !(c.reg_weight >= 0.0) {
                return Err(field_error("control.reg_weight", "must be nonnegative"));
            }
            if c.budget == 0 {
                return Err(field_error("control.budget", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Vec<f64> {
        match &self.viscosity.schedule {
            Some(s) => s.clone(),
            None => geometric_schedule(self.viscosity.eps0, self.viscosity.levels),
        }
    }

    pub fn solve_options(&self) -> SolveOptions<f64> {
        SolveOptions {
            integrator: match self.viscosity.integrator {
                IntegratorConfig::Implicit => Integrator::Implicit,
                IntegratorConfig::Explicit => Integrator::Explicit,
            },
            warm_start: self.viscosity.warm_start,
            ..SolveOptions::default()
        }
    }

    fn dissipation(&self) -> Result<DissipationSpec<f64>, CliError> {
        let d = &self.dissipation;
        let f = parse("dissipation.threshold", &d.threshold, &[Var::Z])?.to_fn::<f64>(Var::Z);
        let [lo, hi] = d.z_range;
        let lipschitz = match d.lipschitz {
            Some(l) => l,
            None => {
                let n = 10_000;
                let h = (hi - lo) / n as f64;
                let slope = (0..n)
                    .map(|i| ((f.call(lo + (i + 1) as f64 * h) - f.call(lo + i as f64 * h)) / h).abs())
                    .fold(0.0, f64::max);
                slope * 1.01
            }
        };
        let spec = match d.kind {
            DissipationKindConfig::Fatigue => {
                let prime = d
                    .threshold_prime
                    .as_deref()
                    .map(|s| parse("dissipation.threshold_prime", s, &[Var::Z]).map(|e| e.to_fn(Var::Z)))
                    .transpose()?;
                DissipationSpec::fatigue(f, prime, lipschitz)
            }
            DissipationKindConfig::WeightedL1 => {
                if d.threshold_prime.is_some() {
                    return Err(field_error(
                        "dissipation.threshold_prime",
                        "only used by the fatigue model",
                    ));
                }
                DissipationSpec::weighted_l1(f, lipschitz)
            }
        };
        spec.validate(lo, hi, 2000)
            .map_err(|e| field_error("dissipation.threshold", e))?;
        Ok(spec)
    }

    pub fn scenario(&self) -> Result<Scenario<f64>, CliError> {
        let mesh = Arc::new(Mesh::uniform(self.mesh.nodes, self.mesh.length).map_err(|e| field_error("mesh", e))?);
        let load = LoadSpec::Separable(terms("load.terms", &mesh, &self.load.terms)?);
        let y0 = parse("kernel.y0", &self.kernel.y0, &[Var::X])?.to_fn::<f64>(Var::X);
        let y0 = mesh.field_from_fn(|x| y0.call(x));
        let kernel = match self.kernel.kind {
            KernelKindConfig::Identity => {
                if self.kernel.b.is_some() || self.kernel.b_prime.is_some() {
                    return Err(field_error("kernel", "b and b_prime need kind = \"convolution\""));
                }
                KernelSpec::identity(y0)
            }
            KernelKindConfig::Convolution => {
                let b = self
                    .kernel
                    .b
                    .as_deref()
                    .ok_or_else(|| field_error("kernel.b", "required for a convolution kernel"))?;
                let bp = self
                    .kernel
                    .b_prime
                    .as_deref()
                    .ok_or_else(|| field_error("kernel.b_prime", "required for a convolution kernel"))?;
                KernelSpec::convolution(
                    parse("kernel.b", b, &[Var::T])?.to_fn(Var::T),
                    parse("kernel.b_prime", bp, &[Var::T])?.to_fn(Var::T),
                    y0,
                )
            }
        };
        Scenario::new(
            mesh,
            self.energy.alpha,
            load,
            kernel,
            self.dissipation()?,
            self.time.horizon,
            self.time.steps,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn experiment(&self, scenario: &Scenario<f64>, eps_list: &[f64]) -> ExperimentConfig<f64> {
        let v = &self.verify;
        let mut cfg = ExperimentConfig::new(scenario.clone());
        cfg.load_cap = v.load_cap;
        cfg.eps_list = eps_list.to_vec();
        cfg.n_loads = v.n_loads;
        cfg.n_pairs = v.n_pairs;
        cfg.n_modes = v.n_modes;
        cfg.perturbation = (v.perturbation[0], v.perturbation[1]);
        cfg.seed = self.seed;
        cfg.solve = self.solve_options();
        cfg
    }

    pub fn control(&self, scenario: &Scenario<f64>) -> Result<ControlSetup, CliError> {
        let c = self
            .control
            .as_ref()
            .ok_or_else(|| field_error("control", "section is missing"))?;
        let basis = terms("control.basis", &scenario.mesh, &c.basis)?;
        let template = scenario.with_load(LoadSpec::zero());
        let placeholder = Target::Terminal(Field::zeros(scenario.n_nodes()));
        let probe = ControlProblem::new(template.clone(), placeholder, basis.clone(), c.reg_weight)
            .and_then(|p| p.with_epsilon(c.epsilon))
            .map_err(|e| field_error("control.basis", e))?;
        let target = match (&c.target_theta, &c.target_terminal) {
            (Some(theta), _) => {
                let s = template.with_load(probe.load(theta));
                let (traj, _) = ris_core::viscous::solve_with(&s, c.epsilon, &self.solve_options())?;
                Target::Trajectory(traj)
            }
            (None, Some(expr)) => {
                let f = parse("control.target_terminal", expr, &[Var::X])?.to_fn::<f64>(Var::X);
                Target::Terminal(scenario.mesh.field_from_fn(|x| f.call(x)))
            }
            (None, None) => unreachable!("checked on load"),
        };
        let mut problem = ControlProblem::new(template, target, basis, c.reg_weight)
            .and_then(|p| p.with_epsilon(c.epsilon))
            .map_err(|e| field_error("control", e))?;
        problem.solve = self.solve_options();
        let theta0 = c.theta0.clone().unwrap_or_else(|| vec![0.0; c.basis.len()]);
        let opts = SearchOptions {
            budget: c.budget,
            initial_step: c.initial_step,
            min_step: c.min_step,
            shrink: 0.5,
            seed: self.seed,
        };
        Ok((problem, theta0, opts))
    }
}
