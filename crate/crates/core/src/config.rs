//! Versioned JSON experiment configuration.
//!
//! ```json
//! {
//!   "schema": "evoproc.config/1",
//!   "problem": {
//!     "kind": "reaction_diffusion",
//!     "n_cells": 32,
//!     "a": "(2 + sin(t)) * (1 + 0.25*cos(pi*x)) + eps*x",
//!     "f": "tanh(s) + eps*sin(s)",
//!     "cutoff_radius": 20
//!   },
//!   "eps_list": [0.1, 0.03, 0.01, 0.003],
//!   "grid": { "horizon": 1.0, "n_steps": 64, "rule": "graded", "q": 2.0 }
//! }
//! ```
//!
//! Problem kinds: `reaction_diffusion` (coefficients in `t`, `x`, `eps`; reaction
//! term in `t`, `s`, `eps`), `wave` (coefficient in `t`; `alpha_list` plays the
//! role of `eps_list` through `eps = 1 − alpha`), `scalar` (`A_ε(t) = a(t, eps)`
//! and optional `f(t, s, eps)` on a one-dimensional space).

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Var};
use crate::family::{HypothesisConstants, OperatorFamily};
use crate::problems::{self, ReactionDiffusionConfig, WaveConfig};
use crate::process::{GridRule, PhiMethod, TimeGrid};
use crate::semigroup::Contour;
use crate::semilinear::{Nonlinearity, PicardOptions};
use crate::spaces::DiscreteSpace;

pub const SCHEMA: &str = "evoproc.config/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema: String,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Start times sampled for the sup over `τ`.
    #[serde(default = "default_taus")]
    pub tau_samples: Vec<f64>,
    #[serde(default)]
    pub contour: Contour,
    #[serde(default)]
    pub phi_method: PhiMethodSpec,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub absorbing: Option<AbsorbingSpec>,
    #[serde(default)]
    pub seed: u64,
}

fn default_theta() -> f64 {
    0.9
}

fn default_taus() -> Vec<f64> {
    vec![0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    ReactionDiffusion {
        n_cells: usize,
        a: Expr,
        #[serde(default)]
        a_grad_x: Option<Expr>,
        #[serde(default = "zero_expr")]
        f: Expr,
        #[serde(default = "one")]
        growth_rho: f64,
        #[serde(default = "one")]
        delta: f64,
        #[serde(default)]
        cutoff_radius: Option<f64>,
    },
    Wave {
        n_modes: usize,
        a: Expr,
        alpha_list: Vec<f64>,
    },
    Scalar {
        a: Expr,
        #[serde(default)]
        f: Option<Expr>,
    },
}

fn zero_expr() -> Expr {
    Expr::parse("0").expect("constant expression")
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// `t_end − τ`; also the reference time for rate measurements.
    pub horizon: f64,
    pub n_steps: usize,
    #[serde(default = "default_rule")]
    pub rule: GridRuleName,
    #[serde(default = "default_q")]
    pub q: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridRuleName {
    Uniform,
    Graded,
}

fn default_rule() -> GridRuleName {
    GridRuleName::Graded
}

fn default_q() -> f64 {
    2.0
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            horizon: 1.0,
            n_steps: 64,
            rule: GridRuleName::Graded,
            q: 2.0,
        }
    }
}

impl GridSpec {
    pub fn at(&self, tau: f64) -> Result<TimeGrid> {
        let rule = match self.rule {
            GridRuleName::Uniform => GridRule::Uniform,
            GridRuleName::Graded => GridRule::Graded { q: self.q },
        };
        TimeGrid::new(tau, tau + self.horizon, self.n_steps, rule)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiMethodSpec {
    #[default]
    ProductIntegration,
    Neumann,
}

impl PhiMethodSpec {
    pub fn method(self) -> PhiMethod {
        match self {
            PhiMethodSpec::ProductIntegration => PhiMethod::ProductIntegration,
            PhiMethodSpec::Neumann => PhiMethod::neumann(),
        }
    }
}

/// Initial states: an explicit profile in `x` and/or seeded random draws from a Y-ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub profile: Option<Expr>,
    #[serde(default)]
    pub random_count: usize,
    #[serde(default = "default_radius")]
    pub random_radius: f64,
}

fn default_radius() -> f64 {
    1.0
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            profile: None,
            random_count: 3,
            random_radius: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbingSpec {
    pub eps_list: Vec<f64>,
    pub horizon: f64,
    pub n_steps: usize,
    pub count: usize,
    pub radius: f64,
    /// Reaction term used instead of the problem's `f` for this run.
    #[serde(default)]
    pub f: Option<Expr>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("theta = {} not in (0, 1)", self.theta)));
        }
        if !(self.grid.horizon > 0.0) || self.grid.n_steps == 0 {
            return Err(Error::Config("grid needs a positive horizon and n_steps".into()));
        }
        if self.tau_samples.is_empty() || self.tau_samples.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("tau_samples must be non-empty and finite".into()));
        }
        self.grid.at(self.tau_samples[0])?;
        self.contour.validate()?;
        for e in self.eps_values() {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(Error::Config(format!("eps = {e} must be finite and nonnegative")));
            }
        }
        match &self.problem {
            ProblemSpec::ReactionDiffusion {
                n_cells,
                a,
                a_grad_x,
                f,
                ..
            } => {
                if *n_cells < 2 {
                    return Err(Error::Config("n_cells must be at least 2".into()));
                }
                forbid(a, Var::S, "a")?;
                if let Some(g) = a_grad_x {
                    forbid(g, Var::S, "a_grad_x")?;
                }
                forbid(f, Var::X, "f")?;
            }
            ProblemSpec::Wave { n_modes, a, alpha_list } => {
                if *n_modes == 0 {
                    return Err(Error::Config("n_modes must be positive".into()));
                }
                for v in [Var::X, Var::S, Var::Eps] {
                    forbid(a, v, "a")?;
                }
                if let Some(al) = alpha_list.iter().find(|al| !(**al > 0.0 && **al <= 1.0)) {
                    return Err(Error::Config(format!("alpha = {al} not in (0, 1]")));
                }
                if !self.eps_list.is_empty() {
                    return Err(Error::Config("wave problems take alpha_list, not eps_list".into()));
                }
            }
            ProblemSpec::Scalar { a, f } => {
                forbid(a, Var::X, "a")?;
                forbid(a, Var::S, "a")?;
                if let Some(f) = f {
                    forbid(f, Var::X, "f")?;
                }
            }
        }
        Ok(())
    }

    /// The perturbation parameters; for waves `1 − alpha`.
    pub fn eps_values(&self) -> Vec<f64> {
        match &self.problem {
            ProblemSpec::Wave { alpha_list, .. } => alpha_list.iter().map(|a| 1.0 - a).collect(),
            _ => self.eps_list.clone(),
        }
    }

    /// Operator family, space and nonlinearity for one parameter value.
    pub fn build(&self, eps: f64) -> Result<Bundle> {
        match &self.problem {
            ProblemSpec::ReactionDiffusion { .. } => {
                let rd = self.reaction_diffusion()?;
                let b = problems::build_reaction_diffusion(&rd, eps)?;
                Ok(Bundle {
                    space: b.space,
                    fam: b.fam,
                    nonlinearity: if self.has_nonlinearity() {
                        Some(b.nonlinearity)
                    } else {
                        None
                    },
                })
            }
            ProblemSpec::Wave { .. } => {
                let w = self.wave()?;
                let b = problems::build_wave(&w, 1.0 - eps)?;
                Ok(Bundle {
                    space: b.space,
                    fam: b.fam,
                    nonlinearity: None,
                })
            }
            ProblemSpec::Scalar { a, f } => {
                let space = Arc::new(DiscreteSpace::euclidean(1));
                let a = a.clone();
                let probe: Vec<f64> = (0..=32)
                    .map(|i| self.tau_samples[0] + self.grid.horizon * i as f64 / 32.0)
                    .map(|t| {
                        a.eval(&Env {
                            t,
                            eps,
                            ..Env::default()
                        })
                    })
                    .collect();
                if let Some(v) = probe.iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::Config(format!(
                        "scalar coefficient {v} is not positive (eps = {eps})"
                    )));
                }
                let fam = OperatorFamily::new(space.clone(), eps, move |t| {
                    DMatrix::from_element(
                        1,
                        1,
                        a.eval(&Env {
                            t,
                            eps,
                            ..Env::default()
                        }),
                    )
                })
                .with_declared(HypothesisConstants {
                    phi: problems::DEFAULT_PHI,
                    c_sector: problems::spectral_sector_const(problems::DEFAULT_PHI),
                    beta: 1.0,
                    delta: 1.0,
                    holder_const: 1.0,
                });
                let nonlinearity = f.clone().map(|f| {
                    let g = f.clone();
                    let mut nl = Nonlinearity::pointwise(space.clone(), move |t, s| g.eval(&Env { t, s, eps, x: 0.0 }));
                    // Fixed cut-off radius 10; scalar configs are for sanity runs.
                    nl = nl
                        .with_cutoff(10.0, (0.0, 1.0))
                        .unwrap_or_else(|_| Nonlinearity::zero(space.clone()));
                    nl
                });
                Ok(Bundle {
                    space,
                    fam,
                    nonlinearity,
                })
            }
        }
    }

    pub fn has_nonlinearity(&self) -> bool {
        match &self.problem {
            ProblemSpec::ReactionDiffusion { f, .. } => f.source().trim() != "0",
            ProblemSpec::Wave { .. } => false,
            ProblemSpec::Scalar { f, .. } => f.is_some(),
        }
    }

    fn window(&self) -> (f64, f64) {
        let lo = self.tau_samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.tau_samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi + self.grid.horizon)
    }

    pub fn reaction_diffusion(&self) -> Result<ReactionDiffusionConfig> {
        match &self.problem {
            ProblemSpec::ReactionDiffusion {
                n_cells,
                a,
                a_grad_x,
                f,
                growth_rho,
                delta,
                cutoff_radius,
            } => {
                let av = a.clone();
                let fv = f.clone();
                Ok(ReactionDiffusionConfig {
                    n_cells: *n_cells,
                    a: Arc::new(move |t, x, eps| av.eval(&Env { t, x, eps, s: 0.0 })),
                    a_grad_x: a_grad_x
                        .clone()
                        .map(|g| -> problems::Coef { Arc::new(move |t, x, eps| g.eval(&Env { t, x, eps, s: 0.0 })) }),
                    eps_list: self.eps_list.clone(),
                    f: Arc::new(move |t, s, eps| fv.eval(&Env { t, s, eps, x: 0.0 })),
                    growth_rho: *growth_rho,
                    window: self.window(),
                    delta: *delta,
                    cutoff_radius: *cutoff_radius,
                })
            }
            _ => Err(Error::Config("not a reaction-diffusion problem".into())),
        }
    }

    pub fn wave(&self) -> Result<WaveConfig> {
        match &self.problem {
            ProblemSpec::Wave { n_modes, a, alpha_list } => {
                let av = a.clone();
                Ok(WaveConfig {
                    n_modes: *n_modes,
                    a: Arc::new(move |t| av.eval(&Env { t, ..Env::default() })),
                    alpha_list: alpha_list.clone(),
                    f: None,
                    window: self.window(),
                })
            }
            _ => Err(Error::Config("not a wave problem".into())),
        }
    }
}

fn forbid(e: &Expr, v: Var, name: &str) -> Result<()> {
    if e.uses(v) {
        let var = match v {
            Var::T => "t",
            Var::X => "x",
            Var::S => "s",
            Var::Eps => "eps",
        };
        return Err(Error::Config(format!(
            "expression {name} = {:?} may not use {var}",
            e.source()
        )));
    }
    Ok(())
}

pub struct Bundle {
    pub space: Arc<DiscreteSpace>,
    pub fam: OperatorFamily,
    pub nonlinearity: Option<Nonlinearity>,
}

/// Ready-made configurations written by `example <name>`.
pub fn example(name: &str) -> Option<Config> {
    let text = match name {
        "rd-paper" => RD_PAPER,
        "wave-paper" => WAVE_PAPER,
        "scalar-sanity" => SCALAR_SANITY,
        _ => return None,
    };
    Some(Config::from_json(text).expect("shipped example parses"))
}

pub const EXAMPLE_NAMES: [&str; 3] = ["rd-paper", "wave-paper", "scalar-sanity"];

const RD_PAPER: &str = r#"{
  "schema": "evoproc.config/1",
  "problem": {
    "kind": "reaction_diffusion",
    "n_cells": 32,
    "a": "0.1*(2 + sin(2*pi*t))*(1 + 0.25*cos(pi*x)) + 0.1*eps*x",
    "a_grad_x": "-0.025*pi*(2 + sin(2*pi*t))*sin(pi*x) + 0.1*eps",
    "f": "tanh(s) + eps*sin(s)",
    "growth_rho": 1.0,
    "delta": 1.0,
    "cutoff_radius": 20.0
  },
  "eps_list": [0.1, 0.03, 0.01, 0.003],
  "grid": { "horizon": 1.0, "n_steps": 64, "rule": "graded", "q": 2.0 },
  "theta": 0.9,
  "tau_samples": [0.0],
  "initial": { "profile": "2*cos(3*x)", "random_count": 2, "random_radius": 5.0 },
  "absorbing": { "eps_list": [0.0, 0.01, 0.1], "horizon": 20.0, "n_steps": 80, "count": 10, "radius": 10.0, "f": "tanh(s)" },
  "seed": 7
}"#;

const WAVE_PAPER: &str = r#"{
  "schema": "evoproc.config/1",
  "problem": {
    "kind": "wave",
    "n_modes": 16,
    "a": "1.5 + 0.4*sin(t)",
    "alpha_list": [0.6, 0.8, 0.9, 0.95, 0.99]
  },
  "grid": { "horizon": 1.0, "n_steps": 64, "rule": "graded", "q": 2.0 },
  "theta": 0.9,
  "tau_samples": [0.0],
  "initial": { "random_count": 0 },
  "seed": 7
}"#;

const SCALAR_SANITY: &str = r#"{
  "schema": "evoproc.config/1",
  "problem": { "kind": "scalar", "a": "1 + 0.5*sin(t) + eps", "f": "0.5*tanh(s) + eps*sin(s)" },
  "eps_list": [0.1, 0.03, 0.01, 0.003],
  "grid": { "horizon": 1.0, "n_steps": 32, "rule": "graded", "q": 2.0 },
  "theta": 0.9,
  "tau_samples": [0.0, 0.5],
  "initial": { "random_count": 2, "random_radius": 1.0 },
  "seed": 1
}"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples_parse_and_round_trip() {
        for name in EXAMPLE_NAMES {
            let cfg = example(name).unwrap();
            let back = Config::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
        assert!(example("nope").is_none());
    }

    #[test]
    fn schema_is_checked() {
        let text = SCALAR_SANITY.replace("evoproc.config/1", "evoproc.config/0");
        assert!(matches!(Config::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = SCALAR_SANITY.replace("\"seed\": 1", "\"seed\": 1, \"bogus\": 2");
        assert!(matches!(Config::from_json(&text), Err(Error::Json(_))));
    }

    #[test]
    fn bad_expression_reports_position() {
        let text = SCALAR_SANITY.replace("1 + 0.5*sin(t) + eps", "1 + * t");
        let err = Config::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("4"), "{err}");
    }

    #[test]
    fn wave_alpha_range() {
        let text = WAVE_PAPER.replace("0.99]", "1.2]");
        assert!(Config::from_json(&text).is_err());
        let cfg = example("wave-paper").unwrap();
        let e = cfg.eps_values();
        assert!((e[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rd_bundle_builds() {
        let cfg = example("rd-paper").unwrap();
        let b = cfg.build(0.1).unwrap();
        assert_eq!(b.fam.dim(), 32);
        assert!(b.nonlinearity.unwrap().cutoff_radius().is_some());
    }
}
