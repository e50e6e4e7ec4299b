//! End-to-end experiments driven by a [`Config`]: hypothesis reports, process
//! axioms, trajectories and convergence-rate fits.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Bundle, Config, GridSpec, PhiMethodSpec, ProblemSpec};
use crate::error::{Error, Result};
use crate::expr::Env;
use crate::family::{self, DeltaEstimate, SectorReport};
use crate::fit;
use crate::problems::CoefficientProbe;
use crate::process::{self, AxiomReport, DistanceNorm, EvolutionProcess, ProcessScope, TimeGrid};
use crate::semigroup::{Contour, SemigroupEvaluator};
use crate::semilinear::{self, AbsorbingReport, Nonlinearity, PicardOptions, Trajectory};
use crate::spaces::Norm;

pub const REPORT_SCHEMA: &str = "evoproc.report/1";

/// A fitted log-log slope, or a flag when no slope exists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Slope {
    Value(f64),
    Flag(SlopeFlag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeFlag {
    /// Every value is zero.
    Exact,
    /// Too few positive values to fit.
    Undefined,
}

impl Slope {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Slope {
        if !ys.is_empty() && ys.iter().all(|y| *y == 0.0) {
            return Slope::Flag(SlopeFlag::Exact);
        }
        match fit::loglog_slope(xs, ys) {
            Some(s) => Slope::Value(s),
            None => Slope::Flag(SlopeFlag::Undefined),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Slope::Value(v) => Some(*v),
            Slope::Flag(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Slope::Flag(SlopeFlag::Exact))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub rule: String,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub pass: bool,
}

/// Settings that determine the numbers in a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub crate_version: String,
    pub contour: Contour,
    pub phi_method: PhiMethodSpec,
    pub neumann_tol: f64,
    pub neumann_max_iter: usize,
    pub picard: PicardOptions,
    pub grid: GridSpec,
}

impl Provenance {
    pub fn of(cfg: &Config) -> Self {
        let (neumann_tol, neumann_max_iter) = match process::PhiMethod::neumann() {
            process::PhiMethod::Neumann { tol, max_iter } => (tol, max_iter),
            process::PhiMethod::ProductIntegration => (0.0, 0),
        };
        Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            contour: cfg.contour.clone(),
            phi_method: cfg.phi_method,
            neumann_tol,
            neumann_max_iter,
            picard: cfg.picard,
            grid: cfg.grid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub schema: String,
    pub provenance: Provenance,
    pub eps_grid: Vec<f64>,
    pub theta: f64,
    pub eta_vals: Vec<f64>,
    pub xi_vals: Vec<f64>,
    pub gamma_vals: Vec<f64>,
    pub ell_vals: Vec<f64>,
    pub rho_vals: Vec<f64>,
    /// `max_τ ‖U_ε(τ+T, τ) − U_0(τ+T, τ)‖_{L(X)}` with `T` the reference time.
    pub process_err: Vec<f64>,
    /// `max_{τ, u^τ} ‖u_ε(τ+T) − u_0(τ+T)‖_Y`; empty without a nonlinearity.
    pub solution_err: Vec<f64>,
    /// Same, with an extra sup over the grid nodes.
    pub solution_sup_err: Vec<f64>,
    pub fitted_slopes: BTreeMap<String, Slope>,
    /// Growth rate of `‖U_0(t,τ)‖_{L(X)}` over the second half of the window.
    pub fitted_k: Option<f64>,
    pub window: (f64, f64),
    pub reference_time: f64,
    pub tau_samples: Vec<f64>,
    pub checks: BTreeMap<String, Check>,
    pub failure: Option<StageFailure>,
}

impl RateReport {
    fn empty(cfg: &Config) -> Self {
        let lo = cfg.tau_samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cfg.tau_samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        RateReport {
            schema: REPORT_SCHEMA.into(),
            provenance: Provenance::of(cfg),
            eps_grid: cfg.eps_values(),
            theta: cfg.theta,
            eta_vals: Vec::new(),
            xi_vals: Vec::new(),
            gamma_vals: Vec::new(),
            ell_vals: Vec::new(),
            rho_vals: Vec::new(),
            process_err: Vec::new(),
            solution_err: Vec::new(),
            solution_sup_err: Vec::new(),
            fitted_slopes: BTreeMap::new(),
            fitted_k: None,
            window: (lo, hi + cfg.grid.horizon),
            reference_time: cfg.grid.horizon,
            tau_samples: cfg.tau_samples.clone(),
            checks: BTreeMap::new(),
            failure: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.checks.values().all(|c| c.pass)
    }

    pub fn slope(&self, name: &str) -> Option<Slope> {
        self.fitted_slopes.get(name).copied()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,eta,xi,gamma,ell,rho,process_err,solution_err,solution_sup_err\n");
        let col = |v: &Vec<f64>, i: usize| v.get(i).map_or(String::new(), |x| format!("{x:e}"));
        for (i, e) in self.eps_grid.iter().enumerate() {
            out.push_str(&format!(
                "{e:e},{},{},{},{},{},{},{},{}\n",
                col(&self.eta_vals, i),
                col(&self.xi_vals, i),
                col(&self.gamma_vals, i),
                col(&self.ell_vals, i),
                col(&self.rho_vals, i),
                col(&self.process_err, i),
                col(&self.solution_err, i),
                col(&self.solution_sup_err, i),
            ));
        }
        out
    }
}

/// ε-grid requirement for rate fits: at least four distinct positive values,
/// log-spaced with consecutive ratios of at least 1.5.
fn check_eps_grid(eps: &[f64]) -> Result<()> {
    let mut v: Vec<f64> = eps.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    if v.len() < 4 || v[0] <= 0.0 {
        return Err(Error::Config(format!(
            "rate experiments need at least 4 distinct positive eps values, got {eps:?}"
        )));
    }
    if v.windows(2).any(|w| w[1] / w[0] < 1.5) {
        return Err(Error::Config(format!(
            "eps grid {eps:?} is too dense to fit log-log slopes"
        )));
    }
    Ok(())
}

fn samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn evaluator(cfg: &Config, b: &Bundle) -> Result<SemigroupEvaluator> {
    SemigroupEvaluator::new(b.fam.clone(), cfg.contour.clone())
}

fn build_process(cfg: &Config, b: &Bundle, grid: &TimeGrid, scope: ProcessScope) -> Result<EvolutionProcess> {
    let ev = evaluator(cfg, b)?;
    process::propagate(&ev, grid, cfg.phi_method.method(), scope)
}

/// Initial states: the configured profile followed by seeded draws from the Y-ball.
pub fn initial_states(cfg: &Config, b: &Bundle, seed: u64) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    if let Some(p) = &cfg.initial.profile {
        let xs: Vec<f64> = match &cfg.problem {
            ProblemSpec::ReactionDiffusion { n_cells, .. } => {
                (0..*n_cells).map(|i| (i as f64 + 0.5) / *n_cells as f64).collect()
            }
            _ => (0..b.space.dim()).map(|i| i as f64).collect(),
        };
        out.push(DVector::from_iterator(
            xs.len(),
            xs.iter().map(|&x| p.eval(&Env { x, ..Env::default() })),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.initial.random_count {
        out.push(semilinear::random_in_ball(
            &b.space,
            cfg.initial.random_radius,
            &mut rng,
        ));
    }
    out
}

/// `‖U(t,τ)‖_{L(X)} ≤ Ce^{K(t−τ)}`: slope of the log-norm over the second half of the window.
pub fn fit_growth(p: &EvolutionProcess) -> Result<Option<f64>> {
    let space = p.family().space();
    let nodes = p.nodes();
    let tau = nodes[0];
    let half = tau + 0.5 * (nodes[nodes.len() - 1] - tau);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &t) in nodes.iter().enumerate() {
        if t >= half {
            let n = space.op_norm(p.get(i, 0).unwrap(), Norm::X, Norm::X)?;
            if n > 0.0 {
                xs.push(t - tau);
                ys.push(n.ln());
            }
        }
    }
    Ok(fit::linear_fit(&xs, &ys).map(|f| f.slope))
}

struct MemberResult {
    process_err: f64,
    solution_err: Option<(f64, f64)>,
}

pub fn run_rate_experiment_path(path: &Path, seed: Option<u64>) -> Result<RateReport> {
    let mut cfg = Config::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    run_rate_experiment(&cfg)
}

/// Rates of `η`, `ξ`, `γ`, process and solution distances along the ε-grid.
///
/// Configuration problems are returned as errors; failures in later stages
/// are recorded in the report next to the partial results.
pub fn run_rate_experiment(cfg: &Config) -> Result<RateReport> {
    cfg.validate()?;
    let eps = cfg.eps_values();
    check_eps_grid(&eps)?;
    log::debug!("rate experiment over eps {eps:?}, config {}", cfg.hash());
    let mut report = RateReport::empty(cfg);
    if let Err((stage, e)) = rate_stages(cfg, &eps, &mut report) {
        report.failure = Some(StageFailure {
            stage: stage.into(),
            message: e.to_string(),
        });
    }
    Ok(report)
}

type Staged<T> = std::result::Result<T, (&'static str, Error)>;

fn tag<T>(stage: &'static str, r: Result<T>) -> Staged<T> {
    match &r {
        Ok(_) => log::debug!("{stage} stage done"),
        Err(e) => log::warn!("{stage} stage failed: {e}"),
    }
    r.map_err(|e| (stage, e))
}

fn rate_stages(cfg: &Config, eps: &[f64], report: &mut RateReport) -> Staged<()> {
    let theta = cfg.theta;
    let base = tag("build", cfg.build(0.0))?;
    let members: Vec<Bundle> = tag("build", eps.iter().map(|&e| cfg.build(e)).collect())?;
    let (lo, hi) = report.window;
    let ts = samples(lo, hi, 17);
    let taus = samples(lo, hi, 9);

    let rates: Vec<(f64, f64)> = tag(
        "hypotheses",
        members
            .par_iter()
            .map(|m| {
                Ok((
                    family::eta(&m.fam, &base.fam, &ts)?,
                    family::xi(&m.fam, &base.fam, &ts, &taus)?,
                ))
            })
            .collect(),
    )?;
    report.eta_vals = rates.iter().map(|r| r.0).collect();
    report.xi_vals = rates.iter().map(|r| r.1).collect();

    let nonlinear = base.nonlinearity.is_some();
    if nonlinear {
        let f0 = base.nonlinearity.as_ref().unwrap();
        let radius = f0.cutoff_radius().unwrap_or(cfg.initial.random_radius);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
        let us: Vec<DVector<f64>> = (0..16)
            .map(|_| semilinear::random_in_ball(&base.space, radius, &mut rng))
            .collect();
        report.gamma_vals = tag(
            "gamma",
            members
                .iter()
                .map(|m| semilinear::gamma(m.nonlinearity.as_ref().unwrap(), f0, &ts, &us))
                .collect(),
        )?;
    } else {
        report.gamma_vals = vec![0.0; eps.len()];
    }
    report.ell_vals = report
        .eta_vals
        .iter()
        .zip(&report.xi_vals)
        .map(|(e, x)| e.powf(theta).max(x.powf(theta)))
        .collect();
    report.rho_vals = report
        .ell_vals
        .iter()
        .zip(&report.gamma_vals)
        .map(|(l, g)| l.max(*g))
        .collect();
    for i in 0..eps.len() {
        let ell = report.eta_vals[i].powf(theta).max(report.xi_vals[i].powf(theta));
        assert_eq!(report.ell_vals[i], ell);
        assert_eq!(report.rho_vals[i], ell.max(report.gamma_vals[i]));
    }

    let scope = if nonlinear {
        ProcessScope::AllPairs
    } else {
        ProcessScope::FromInitial
    };
    let mut proc_err = vec![0.0f64; eps.len()];
    let mut sol_err = vec![0.0f64; eps.len()];
    let mut sol_sup = vec![0.0f64; eps.len()];
    for (ti, &tau) in cfg.tau_samples.iter().enumerate() {
        let grid = tag("process", cfg.grid.at(tau))?;
        let p0 = tag("process", build_process(cfg, &base, &grid, scope))?;
        if ti == 0 {
            report.fitted_k = tag("process", fit_growth(&p0))?;
        }
        let inits = initial_states(cfg, &base, cfg.seed.wrapping_add(ti as u64));
        let traj0: Vec<Trajectory> = if nonlinear {
            tag(
                "solution",
                inits
                    .par_iter()
                    .map(|u| {
                        semilinear::solve_semilinear(&p0, base.nonlinearity.as_ref().unwrap(), u, &grid, cfg.picard)
                    })
                    .collect(),
            )?
        } else {
            Vec::new()
        };
        let results: Vec<Staged<MemberResult>> = members
            .par_iter()
            .map(|m| {
                let p = tag("process", build_process(cfg, m, &grid, scope))?;
                let d = tag("process", process::process_distance(&p, &p0, DistanceNorm::X))?;
                let process_err = d.last().unwrap().1;
                let solution_err = if nonlinear {
                    let mut at_end: f64 = 0.0;
                    let mut sup: f64 = 0.0;
                    for (u, t0) in inits.iter().zip(&traj0) {
                        let tr = tag(
                            "solution",
                            semilinear::solve_semilinear(&p, m.nonlinearity.as_ref().unwrap(), u, &grid, cfg.picard),
                        )?;
                        let dist = tag("solution", semilinear::solution_distance(&m.space, &tr, t0))?;
                        at_end = at_end.max(dist.last().unwrap().1);
                        sup = sup.max(dist.iter().map(|x| x.1).fold(0.0, f64::max));
                    }
                    Some((at_end, sup))
                } else {
                    None
                };
                Ok(MemberResult {
                    process_err,
                    solution_err,
                })
            })
            .collect();
        for (i, r) in results.into_iter().enumerate() {
            let r = r?;
            proc_err[i] = proc_err[i].max(r.process_err);
            if let Some((a, b)) = r.solution_err {
                sol_err[i] = sol_err[i].max(a);
                sol_sup[i] = sol_sup[i].max(b);
            }
        }
    }
    report.process_err = proc_err;
    if nonlinear {
        report.solution_err = sol_err;
        report.solution_sup_err = sol_sup;
    }

    let mut slopes = BTreeMap::new();
    for (name, vals) in [
        ("eta", &report.eta_vals),
        ("xi", &report.xi_vals),
        ("gamma", &report.gamma_vals),
        ("ell", &report.ell_vals),
        ("rho", &report.rho_vals),
        ("process_err", &report.process_err),
        ("solution_err", &report.solution_err),
        ("solution_sup_err", &report.solution_sup_err),
    ] {
        if !vals.is_empty() {
            slopes.insert(name.to_string(), Slope::fit(eps, vals));
        }
    }
    report.checks = rate_checks(cfg, &slopes, theta);
    report.fitted_slopes = slopes;
    Ok(())
}

/// `err` must converge at least `factor` times as fast as the driving rate.
fn rate_check(err: Option<&Slope>, driving: Option<f64>, factor: f64, rule: &str) -> Check {
    match (err, driving) {
        (Some(e), _) if e.is_exact() => Check {
            rule: rule.into(),
            value: None,
            threshold: None,
            pass: true,
        },
        (Some(Slope::Value(v)), Some(d)) => Check {
            rule: rule.into(),
            value: Some(*v),
            threshold: Some(factor * d),
            pass: *v >= factor * d,
        },
        (e, d) => Check {
            rule: rule.into(),
            value: e.and_then(|s| s.value()),
            threshold: d.map(|d| factor * d),
            pass: false,
        },
    }
}

fn rate_checks(cfg: &Config, slopes: &BTreeMap<String, Slope>, theta: f64) -> BTreeMap<String, Check> {
    let mut checks = BTreeMap::new();
    let val = |k: &str| slopes.get(k).and_then(|s| s.value());
    let driving_ell = if slopes.get("ell").is_some_and(|s| s.is_exact()) {
        Some(0.0)
    } else {
        val("ell")
    };
    checks.insert(
        "process_rate".into(),
        rate_check(
            slopes.get("process_err"),
            driving_ell,
            0.9,
            "slope(process_err) >= 0.9 * slope(ell)",
        ),
    );
    if slopes.contains_key("solution_err") {
        let mut cands: Vec<f64> = Vec::new();
        for k in ["eta", "xi"] {
            if let Some(v) = val(k) {
                cands.push(theta * v);
            }
        }
        if let Some(v) = val("gamma") {
            cands.push(v);
        }
        let driving = cands.into_iter().reduce(f64::min);
        checks.insert(
            "solution_rate".into(),
            rate_check(
                slopes.get("solution_err"),
                driving,
                0.9,
                "slope(solution_err) >= 0.9 * min(theta*slope(eta), theta*slope(xi), slope(gamma))",
            ),
        );
    }
    if matches!(cfg.problem, ProblemSpec::Wave { .. }) {
        let s = val("eta");
        checks.insert(
            "inverse_power_rate".into(),
            Check {
                rule: "|slope(||L^-alpha - L^-1||) - 1| <= 0.15".into(),
                value: s,
                threshold: Some(0.15),
                pass: s.is_some_and(|s| (s - 1.0).abs() <= 0.15),
            },
        );
    }
    checks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberHypotheses {
    pub eps: f64,
    pub sector: SectorReport,
    pub delta: DeltaEstimate,
    pub probe: Option<CoefficientProbe>,
    /// `(‖a_ε − a_0‖_∞, ‖∂_x a_ε − ∂_x a_0‖_∞)` for reaction-diffusion members.
    pub coefficient_gaps: Option<(f64, f64)>,
    pub eta: f64,
    pub xi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub schema: String,
    pub provenance: Provenance,
    pub members: Vec<MemberHypotheses>,
    pub ok: bool,
}

pub fn check_hypotheses(cfg: &Config) -> Result<HypothesisReport> {
    let mut eps = vec![0.0];
    eps.extend(cfg.eps_values());
    let (lo, hi) = RateReport::empty(cfg).window;
    let ts = samples(lo, hi, 9);
    let base = cfg.build(0.0)?;
    let rd = cfg.reaction_diffusion().ok();
    let members: Vec<MemberHypotheses> = eps
        .par_iter()
        .map(|&e| {
            let b = cfg.build(e)?;
            let phi = b.fam.declared().map_or(cfg.contour.phi, |d| d.phi);
            let sector = family::check_sector(&b.fam, phi, &ts, 9)?;
            let delta = family::estimate_delta(&b.fam, &samples(lo, hi, 12), lo)?;
            let probe = rd.as_ref().map(|r| r.probe(e)).transpose()?;
            Ok(MemberHypotheses {
                eps: e,
                sector,
                delta,
                probe,
                coefficient_gaps: rd.as_ref().map(|r| r.coefficient_gaps(e)),
                eta: family::eta(&b.fam, &base.fam, &ts)?,
                xi: family::xi(&b.fam, &base.fam, &ts, &ts)?,
            })
        })
        .collect::<Result<_>>()?;
    let ok = members.iter().all(|m| m.sector.ok);
    Ok(HypothesisReport {
        schema: REPORT_SCHEMA.into(),
        provenance: Provenance::of(cfg),
        members,
        ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomsReport {
    pub schema: String,
    pub provenance: Provenance,
    pub eps: f64,
    pub tau: f64,
    pub delta: f64,
    pub axioms: AxiomReport,
    /// Largest change of `U` at shared nodes when the grid is refined once.
    pub discretization_tol: f64,
    pub phi_singularity_bound: f64,
    pub sup_norm_x: f64,
    pub sup_weighted_norm_xy: f64,
    pub fitted_k: Option<f64>,
}

/// Process with all pairs plus the axiom diagnostics for one member.
pub fn propagate_member(cfg: &Config, eps: f64) -> Result<(EvolutionProcess, AxiomsReport)> {
    let b = cfg.build(eps)?;
    let tau = cfg.tau_samples[0];
    let grid = cfg.grid.at(tau)?;
    let ev = evaluator(cfg, &b)?;
    let method = cfg.phi_method.method();
    let phi = process::solve_phi(&ev, &grid, method)?;
    let p = process::build_process(&ev, &phi, ProcessScope::AllPairs)?;
    let axioms = process::check_process_axioms(&p)?;
    let fine = process::propagate(&ev, &grid.refined(), method, ProcessScope::AllPairs)?;
    let discretization_tol = process::discretization_tol(&p, &fine)?;
    let beta = b.fam.declared().map_or(1.0, |d| d.beta);
    let (bx, bxy) = process::process_bounds(&p, beta)?;
    let report = AxiomsReport {
        schema: REPORT_SCHEMA.into(),
        provenance: Provenance::of(cfg),
        eps,
        tau,
        delta: p.delta(),
        axioms,
        discretization_tol,
        phi_singularity_bound: phi.singularity_bound(&b.fam)?,
        sup_norm_x: bx,
        sup_weighted_norm_xy: bxy,
        fitted_k: fit_growth(&p)?,
    };
    Ok((p, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: String,
    pub provenance: Provenance,
    pub eps: f64,
    pub tau: f64,
    pub lip_const: f64,
    pub raw_lip_const: f64,
    pub bound_const: f64,
    pub cutoff_radius: Option<f64>,
    pub picard_iterations: Vec<usize>,
    pub max_y_norm: Vec<f64>,
    pub absorbing: Option<AbsorbingReport>,
}

/// Trajectories of one member from the configured initial states.
pub fn solve_member(cfg: &Config, eps: f64) -> Result<(Vec<Trajectory>, SolveReport)> {
    let b = cfg.build(eps)?;
    let nl = b
        .nonlinearity
        .clone()
        .unwrap_or_else(|| Nonlinearity::zero(b.space.clone()));
    let tau = cfg.tau_samples[0];
    let grid = cfg.grid.at(tau)?;
    let p = build_process(cfg, &b, &grid, ProcessScope::AllPairs)?;
    let inits = initial_states(cfg, &b, cfg.seed);
    let trajs: Vec<Trajectory> = inits
        .par_iter()
        .map(|u| semilinear::solve_semilinear(&p, &nl, u, &grid, cfg.picard))
        .collect::<Result<_>>()?;
    let absorbing = match &cfg.absorbing {
        Some(_) => Some(run_absorbing(cfg)?),
        None => None,
    };
    let report = SolveReport {
        schema: REPORT_SCHEMA.into(),
        provenance: Provenance::of(cfg),
        eps,
        tau,
        lip_const: nl.lip_const(),
        raw_lip_const: nl.raw_lip_const(),
        bound_const: nl.bound_const(),
        cutoff_radius: nl.cutoff_radius(),
        picard_iterations: trajs.iter().map(|t| t.picard_history.len()).collect(),
        max_y_norm: trajs
            .iter()
            .map(|t| t.y_norms.iter().copied().fold(0.0, f64::max))
            .collect(),
        absorbing,
    };
    Ok((trajs, report))
}

/// Absorbing-ball evidence for the configured `absorbing` block.
pub fn run_absorbing(cfg: &Config) -> Result<AbsorbingReport> {
    let spec = cfg
        .absorbing
        .as_ref()
        .ok_or_else(|| Error::Config("no absorbing block in the configuration".into()))?;
    let tau = cfg.tau_samples[0];
    let grid = TimeGrid::uniform(tau, tau + spec.horizon, spec.n_steps)?;
    let mut abs_cfg = cfg.clone();
    abs_cfg.tau_samples = vec![tau];
    abs_cfg.grid.horizon = spec.horizon;
    if let (Some(f), ProblemSpec::ReactionDiffusion { f: g, .. }) = (&spec.f, &mut abs_cfg.problem) {
        *g = f.clone();
    }
    let bundles: Vec<Bundle> = spec.eps_list.iter().map(|&e| abs_cfg.build(e)).collect::<Result<_>>()?;
    let procs: Vec<EvolutionProcess> = bundles
        .par_iter()
        .map(|b| build_process(&abs_cfg, b, &grid, ProcessScope::AllPairs))
        .collect::<Result<_>>()?;
    let fs: Vec<Nonlinearity> = bundles
        .iter()
        .map(|b| {
            b.nonlinearity
                .clone()
                .unwrap_or_else(|| Nonlinearity::zero(b.space.clone()))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ball: Vec<DVector<f64>> = (0..spec.count)
        .map(|_| semilinear::random_in_ball(&bundles[0].space, spec.radius, &mut rng))
        .collect();
    semilinear::absorbing_check(&procs, &fs, &ball, spec.horizon, cfg.picard)
}

/// `t,y_norm,x_norm` per node.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut out = String::from("t,y_norm,x_norm\n");
    for ((t, y), x) in tr.nodes.iter().zip(&tr.y_norms).zip(&tr.x_norms) {
        out.push_str(&format!("{t:e},{y:e},{x:e}\n"));
    }
    out
}

/// Full state vectors, one row per node: `t,u_0,…,u_{n−1}`.
pub fn trajectory_states_csv(tr: &Trajectory) -> String {
    let mut out = String::from("t");
    for i in 0..tr.initial.len() {
        out.push_str(&format!(",u_{i}"));
    }
    out.push('\n');
    for (t, u) in tr.nodes.iter().zip(&tr.states) {
        out.push_str(&format!("{t:e}"));
        for v in u.iter() {
            out.push_str(&format!(",{v:e}"));
        }
        out.push('\n');
    }
    out
}

/// Write through a temporary file in the same directory and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    // temporary files are created owner-only; reports are ordinary outputs
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
