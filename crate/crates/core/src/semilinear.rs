//! Semilinear problems `u_t + A(t)u = F(t,u)` through the variation-of-constants
//! map `u(t) = U(t,τ)u^τ + ∫_τ^t U(t,s) F(s,u(s)) ds`.
//!
//! On a panel `[s_k, s_{k+1}]` the integrand is split as
//! `U(t, s_{k+1}) · U(s_{k+1}, s) · F(s)` and `F` is replaced by its linear
//! interpolant. The moments of `U(s_{k+1}, ·)` come from
//! `∂_s U(s_{k+1}, s) = U(s_{k+1}, s)A(s)`: with `E = U(s_{k+1}, s_k)`,
//! `h = s_{k+1} − s_k` and `B = A` at the panel midpoint,
//!
//! ```text
//! Q₀ = ∫ U(s_{k+1},s) ds           ≈ (I − E)B⁻¹
//! Q₁ = ∫ U(s_{k+1},s)(s − s_k)/h ds ≈ (I − Q₀/h)B⁻¹
//! ```
//!
//! exact when `A` is constant on the panel, and with an `O(h³)` defect otherwise.
//! The panel contributes `U(t, s_{k+1})[Q₁F_{k+1} + (Q₀ − Q₁)F_k]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::process::{EvolutionProcess, ProcessScope, TimeGrid};
use crate::spaces::{DiscreteSpace, Norm};

pub type VectorFieldFn = dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync;
pub type ScalarFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Radial profile of the cut-off: identity up to `R`, a C¹ quadratic blend on
/// `[R, 2R]`, constant `3R/2` beyond.
pub fn cutoff_profile(rho: f64, radius: f64) -> f64 {
    if rho <= radius {
        rho
    } else if rho <= 2.0 * radius {
        let d = rho - radius;
        rho - d * d / (2.0 * radius)
    } else {
        1.5 * radius
    }
}

/// The map `(t, u) ↦ F(t, u)`.
#[derive(Clone)]
pub struct Nonlinearity {
    space: Arc<DiscreteSpace>,
    eval: Arc<VectorFieldFn>,
    pointwise: Option<Arc<ScalarFn>>,
    lip_const: f64,
    bound_const: f64,
    raw_lip_const: f64,
    cutoff_radius: Option<f64>,
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("lip_const", &self.lip_const)
            .field("bound_const", &self.bound_const)
            .field("raw_lip_const", &self.raw_lip_const)
            .field("cutoff_radius", &self.cutoff_radius)
            .finish()
    }
}

impl Nonlinearity {
    pub fn new<F>(space: Arc<DiscreteSpace>, lip_const: f64, bound_const: f64, eval: F) -> Self
    where
        F: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Nonlinearity {
            space,
            eval: Arc::new(eval),
            pointwise: None,
            lip_const,
            bound_const,
            raw_lip_const: lip_const,
            cutoff_radius: None,
        }
    }

    pub fn zero(space: Arc<DiscreteSpace>) -> Self {
        let n = space.dim();
        Self::new(space, 0.0, 0.0, move |_, _| DVector::zeros(n))
    }

    /// Nodal application of a scalar `f(t, s)`. Constants are left at zero
    /// until [`Nonlinearity::with_cutoff`] measures them.
    pub fn pointwise<F>(space: Arc<DiscreteSpace>, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let f: Arc<ScalarFn> = Arc::new(f);
        let g = f.clone();
        let mut nl = Self::new(space, 0.0, 0.0, move |t, u| u.map(|s| g(t, s)));
        nl.pointwise = Some(f);
        nl
    }

    pub fn space(&self) -> &Arc<DiscreteSpace> {
        &self.space
    }

    pub fn lip_const(&self) -> f64 {
        self.lip_const
    }

    pub fn bound_const(&self) -> f64 {
        self.bound_const
    }

    /// Lipschitz constant of the unmodified map inside the cut-off ball.
    pub fn raw_lip_const(&self) -> f64 {
        self.raw_lip_const
    }

    pub fn cutoff_radius(&self) -> Option<f64> {
        self.cutoff_radius
    }

    pub fn scalar(&self) -> Option<&Arc<ScalarFn>> {
        self.pointwise.as_ref()
    }

    /// Radial retraction onto the cut-off ball; identity without a cut-off.
    pub fn retract(&self, u: &DVector<f64>) -> DVector<f64> {
        match self.cutoff_radius {
            None => u.clone(),
            Some(r) => {
                let rho = self.space.norm_unchecked(u, Norm::Y);
                if rho <= r {
                    u.clone()
                } else {
                    u * (cutoff_profile(rho, r) / rho)
                }
            }
        }
    }

    pub fn eval(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        if self.cutoff_radius.is_none() {
            return (self.eval)(t, u);
        }
        (self.eval)(t, &self.retract(u))
    }

    /// Apply a cut-off at Y-radius `radius` and measure the constants.
    ///
    /// For pointwise maps the Lipschitz constant is `sup|∂_s f|` over the nodal
    /// range reachable from the ball of radius `2R` (the retraction never leaves
    /// it), times the X/Y embedding constant, doubled for the retraction; the
    /// bound is `sup|f|` times the X-norm of the constant vector.
    pub fn with_cutoff(mut self, radius: f64, t_window: (f64, f64)) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Config(format!("cut-off radius {radius} must be positive")));
        }
        self.cutoff_radius = Some(radius);
        if let Some(f) = self.pointwise.clone() {
            let s_max = nodal_bound(&self.space, 2.0 * radius)?;
            let (lip, sup) = scalar_constants(f.as_ref(), t_window, s_max);
            let ones = DVector::from_element(self.space.dim(), 1.0);
            let embed = self.space.embed_const();
            self.raw_lip_const = lip * embed;
            self.lip_const = 2.0 * lip * embed;
            self.bound_const = sup * self.space.norm_unchecked(&ones, Norm::X);
        }
        Ok(self)
    }

    /// Largest sampled `‖F(t,u) − F(t,v)‖_X / ‖u − v‖_Y` over random pairs in the Y-ball.
    pub fn sampled_lipschitz(&self, t_samples: &[f64], radius: f64, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for i in 0..pairs {
            let t = t_samples[i % t_samples.len().max(1)];
            let u = random_in_ball(&self.space, radius, &mut rng);
            let v = random_in_ball(&self.space, radius, &mut rng);
            let du = self.space.norm_unchecked(&(&u - &v), Norm::Y);
            if du > 0.0 {
                let df = self
                    .space
                    .norm_unchecked(&(self.eval(t, &u) - self.eval(t, &v)), Norm::X);
                worst = worst.max(df / du);
            }
        }
        worst
    }
}

/// `max_i |u_i|` over the Y-ball of radius `r`: `r·max_i sqrt((G_Y⁻¹)_{ii})`.
pub fn nodal_bound(space: &DiscreteSpace, r: f64) -> Result<f64> {
    let inv = linalg::inverse(space.gram(Norm::Y), 0.0)?;
    Ok(r * inv.diagonal().iter().fold(0.0f64, |m, v| m.max(v.sqrt())))
}

fn scalar_constants(f: &ScalarFn, (t0, t1): (f64, f64), s_max: f64) -> (f64, f64) {
    let nt = 17;
    let ns = 801;
    let mut lip: f64 = 0.0;
    let mut sup: f64 = 0.0;
    let ds = 2.0 * s_max / (ns - 1) as f64;
    for i in 0..nt {
        let t = t0 + (t1 - t0) * i as f64 / (nt - 1) as f64;
        let mut prev = f(t, -s_max);
        sup = sup.max(prev.abs());
        for k in 1..ns {
            let s = -s_max + ds * k as f64;
            let v = f(t, s);
            sup = sup.max(v.abs());
            lip = lip.max(((v - prev) / ds).abs());
            prev = v;
        }
    }
    (lip, sup)
}

/// Uniformly random direction, Y-norm uniform in `[0, radius]`.
pub fn random_in_ball(space: &DiscreteSpace, radius: f64, rng: &mut impl Rng) -> DVector<f64> {
    let v = DVector::from_fn(space.dim(), |_, _| rng.gen_range(-1.0..1.0));
    let n = space.norm_unchecked(&v, Norm::Y);
    if n == 0.0 {
        return v;
    }
    v * (radius * rng.gen_range(0.0..1.0) / n)
}

/// `max ‖F_ε(t,u) − F_0(t,u)‖_X` over the sample product grid.
pub fn gamma(f_eps: &Nonlinearity, f_0: &Nonlinearity, t_samples: &[f64], u_samples: &[DVector<f64>]) -> Result<f64> {
    let space = f_0.space();
    let vals: Vec<f64> = t_samples
        .par_iter()
        .map(|&t| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for u in u_samples {
                let d = f_eps.eval(t, u) - f_0.eval(t, u);
                worst = worst.max(space.norm(&d, Norm::X)?);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub blowup: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-8,
            max_iter: 100,
            blowup: 1e8,
        }
    }
}

/// Discrete mild solution on the nodes of a process grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub nodes: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub initial: DVector<f64>,
    pub y_norms: Vec<f64>,
    pub x_norms: Vec<f64>,
    /// Sup-over-grid Y-norm change per sweep.
    pub picard_history: Vec<f64>,
}

/// Panel weights `(Q₁, Q₀ − Q₁)` for each panel of the grid.
fn panel_weights(proc: &EvolutionProcess) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    let nodes = proc.nodes();
    (0..nodes.len() - 1)
        .into_par_iter()
        .map(|k| {
            let h = nodes[k + 1] - nodes[k];
            let mid = nodes[k] + 0.5 * h;
            let b_inv = linalg::inverse(&proc.family().at(mid), mid)?;
            let e = proc.get(k + 1, k).unwrap();
            let id = DMatrix::identity(e.nrows(), e.ncols());
            let q0 = (&id - e) * &b_inv;
            let q1 = (id - &q0 / h) * &b_inv;
            let rest = q0 - &q1;
            Ok((q1, rest))
        })
        .collect()
}

pub fn solve_semilinear(
    proc: &EvolutionProcess,
    f: &Nonlinearity,
    u_tau: &DVector<f64>,
    grid: &TimeGrid,
    opts: PicardOptions,
) -> Result<Trajectory> {
    if proc.scope() != ProcessScope::AllPairs {
        return Err(Error::Domain("semilinear solve needs a process with all pairs".into()));
    }
    if grid.nodes() != proc.nodes() {
        return Err(Error::GridMismatch(
            "trajectory grid differs from the process grid".into(),
        ));
    }
    let space = proc.family().space();
    if u_tau.len() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: u_tau.len(),
        });
    }
    let nodes = proc.nodes();
    let n = nodes.len();
    let weights = panel_weights(proc)?;
    let free: Vec<DVector<f64>> = (0..n).map(|m| proc.get(m, 0).unwrap() * u_tau).collect();
    let mut states = free.clone();
    let mut history = Vec::new();
    for _ in 0..opts.max_iter {
        // One sweep in node order, each node using the newest earlier values.
        let mut forcing: Vec<DVector<f64>> = Vec::with_capacity(n);
        forcing.push(f.eval(nodes[0], &states[0]));
        let mut change: f64 = 0.0;
        for m in 1..n {
            let current = f.eval(nodes[m], &states[m]);
            let mut u = free[m].clone();
            for k in 0..m {
                let fk1 = if k + 1 == m { &current } else { &forcing[k + 1] };
                let panel = &weights[k].0 * fk1 + &weights[k].1 * &forcing[k];
                u += proc.get(m, k + 1).unwrap() * panel;
            }
            let y = space.norm_unchecked(&u, Norm::Y);
            if !(y <= opts.blowup) {
                return Err(Error::BlowUp { t: nodes[m], norm: y });
            }
            change = change.max(space.norm_unchecked(&(&u - &states[m]), Norm::Y));
            states[m] = u;
            forcing.push(f.eval(nodes[m], &states[m]));
        }
        history.push(change);
        log::trace!("picard sweep {}: change {change:e}", history.len());
        if change <= opts.tol {
            let y_norms = states.iter().map(|u| space.norm_unchecked(u, Norm::Y)).collect();
            let x_norms = states.iter().map(|u| space.norm_unchecked(u, Norm::X)).collect();
            return Ok(Trajectory {
                grid: *grid,
                nodes: nodes.to_vec(),
                states,
                initial: u_tau.clone(),
                y_norms,
                x_norms,
                picard_history: history,
            });
        }
    }
    Err(Error::MaxIter {
        iterations: opts.max_iter,
        history,
    })
}

/// `‖u_ε(t_i) − u_0(t_i)‖_Y` per node.
pub fn solution_distance(space: &DiscreteSpace, traj_eps: &Trajectory, traj_0: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if traj_eps.nodes != traj_0.nodes {
        return Err(Error::GridMismatch("trajectories live on different grids".into()));
    }
    traj_eps
        .states
        .iter()
        .zip(&traj_0.states)
        .zip(&traj_0.nodes)
        .map(|((a, b), &t)| Ok((t, space.norm(&(a - b), Norm::Y)?)))
        .collect()
}

/// Sign condition `f(t,s)·s ≤ (1−ω)s² + N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dissipativity {
    pub omega: f64,
    pub n_const: f64,
}

/// Largest `ω ∈ {0.95, 0.90, …, 0.05}` whose `N`, computed on `|s| ≤ s_max`,
/// also bounds the samples on `|s| ≤ 4 s_max`. `None` if no `ω` qualifies.
pub fn dissipativity(f: &ScalarFn, t_samples: &[f64], s_max: f64) -> Option<Dissipativity> {
    let ns = 401;
    let excess = |omega: f64, range: f64| -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for &t in t_samples {
            for k in 0..ns {
                let s = -range + 2.0 * range * k as f64 / (ns - 1) as f64;
                worst = worst.max(f(t, s) * s - (1.0 - omega) * s * s);
            }
        }
        worst
    };
    for i in (1..=19).rev() {
        let omega = 0.05 * i as f64;
        let n_const = excess(omega, s_max).max(0.0);
        let wide = excess(omega, 4.0 * s_max);
        if wide <= n_const * (1.0 + 1e-9) + 1e-12 {
            return Some(Dissipativity { omega, n_const });
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingReport {
    pub radius_e: f64,
    /// Per member of the family: largest tail Y-norm.
    pub per_member_e: Vec<f64>,
    /// `(max − min)/max` of `per_member_e`.
    pub spread: f64,
    /// `entry_times[member][initial state]`.
    pub entry_times: Vec<Vec<f64>>,
    pub dissipativity: Vec<Option<Dissipativity>>,
    pub horizon: f64,
}

/// Evolve every initial state under every member and measure the absorbing radius.
///
/// The radius of one member is the largest Y-norm over the second half of the
/// horizon across its trajectories; the overall `E` is the largest of these.
/// Entry time is the first node after which a trajectory stays within `E`.
pub fn absorbing_check(
    procs: &[EvolutionProcess],
    fs: &[Nonlinearity],
    initial_ball: &[DVector<f64>],
    horizon: f64,
    opts: PicardOptions,
) -> Result<AbsorbingReport> {
    if procs.len() != fs.len() || procs.is_empty() {
        return Err(Error::Domain(
            "absorbing check needs one nonlinearity per process".into(),
        ));
    }
    let mut dissip = Vec::new();
    for (p, f) in procs.iter().zip(fs) {
        if p.nodes().last().copied() != Some(p.nodes()[0] + horizon) {
            return Err(Error::GridMismatch(format!(
                "process window does not end at tau + horizon = {}",
                p.nodes()[0] + horizon
            )));
        }
        let d = match f.scalar() {
            Some(g) => {
                let ts: Vec<f64> = p.nodes().iter().step_by(4).copied().collect();
                let s_max = nodal_bound(f.space(), 2.0 * f.cutoff_radius().unwrap_or(10.0))?;
                let d = dissipativity(g.as_ref(), &ts, s_max.max(1.0));
                if d.is_none() {
                    return Err(Error::Domain(
                        "sampled dissipativity condition fails for every omega".into(),
                    ));
                }
                d
            }
            None => None,
        };
        dissip.push(d);
    }
    let runs: Vec<Vec<Trajectory>> = procs
        .iter()
        .zip(fs)
        .map(|(p, f)| {
            initial_ball
                .par_iter()
                .map(|u0| solve_semilinear(p, f, u0, p.grid(), opts))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let tau = procs[0].nodes()[0];
    let half = tau + 0.5 * horizon;
    let per_member_e: Vec<f64> = runs
        .iter()
        .map(|trajs| {
            trajs
                .iter()
                .flat_map(|tr| {
                    tr.nodes
                        .iter()
                        .zip(&tr.y_norms)
                        .filter(|(t, _)| **t >= half)
                        .map(|(_, y)| *y)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let radius_e = per_member_e.iter().copied().fold(0.0, f64::max);
    let lo = per_member_e.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if radius_e > 0.0 {
        (radius_e - lo) / radius_e
    } else {
        0.0
    };
    let entry_times = runs
        .iter()
        .map(|trajs| {
            trajs
                .iter()
                .map(|tr| {
                    let mut entry = tr.nodes[0];
                    for (t, y) in tr.nodes.iter().zip(&tr.y_norms) {
                        if *y > radius_e * (1.0 + 1e-12) {
                            entry = *t;
                        }
                    }
                    entry
                })
                .collect()
        })
        .collect();
    Ok(AbsorbingReport {
        radius_e,
        per_member_e,
        spread,
        entry_times,
        dissipativity: dissip,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::OperatorFamily;
    use crate::process::{propagate, PhiMethod};
    use crate::semigroup::{Contour, SemigroupEvaluator};

    fn scalar_process(a: f64, grid: &TimeGrid) -> EvolutionProcess {
        let space = Arc::new(DiscreteSpace::euclidean(1));
        let fam = OperatorFamily::constant(space, DMatrix::from_element(1, 1, a));
        let ev = SemigroupEvaluator::new(fam, Contour::default()).unwrap();
        propagate(&ev, grid, PhiMethod::ProductIntegration, ProcessScope::AllPairs).unwrap()
    }

    #[test]
    fn profile_is_c1_and_bounded() {
        let r = 2.0;
        assert_eq!(cutoff_profile(1.0, r), 1.0);
        assert_eq!(cutoff_profile(2.0 * r, r), 1.5 * r);
        assert_eq!(cutoff_profile(10.0 * r, r), 1.5 * r);
        let h = 1e-7;
        for rho in [r, 2.0 * r] {
            let left = (cutoff_profile(rho, r) - cutoff_profile(rho - h, r)) / h;
            let right = (cutoff_profile(rho + h, r) - cutoff_profile(rho, r)) / h;
            assert!((left - right).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_forcing_reproduces_linear_process() {
        let grid = TimeGrid::graded(0.0, 1.0, 16, 2.0).unwrap();
        let p = scalar_process(2.0, &grid);
        let f = Nonlinearity::zero(p.family().space().clone());
        let u0 = DVector::from_element(1, 3.0);
        let tr = solve_semilinear(&p, &f, &u0, &grid, PicardOptions::default()).unwrap();
        for (m, u) in tr.states.iter().enumerate() {
            assert_eq!(*u, p.get(m, 0).unwrap() * &u0);
        }
    }

    #[test]
    fn linear_forcing_matches_exponential() {
        let grid = TimeGrid::graded(0.0, 1.0, 32, 2.0).unwrap();
        let p = scalar_process(2.0, &grid);
        let f = Nonlinearity::new(p.family().space().clone(), 1.0, 1.0, |_, u| u.clone());
        let tr = solve_semilinear(&p, &f, &DVector::from_element(1, 1.0), &grid, PicardOptions::default()).unwrap();
        let last = tr.states.last().unwrap()[0];
        assert!((last - (-1f64).exp()).abs() < 1e-4, "{last}");
        let h = &tr.picard_history;
        assert!(h.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn blow_up_is_reported() {
        let grid = TimeGrid::uniform(0.0, 1.0, 16).unwrap();
        let p = scalar_process(1.0, &grid);
        let f = Nonlinearity::new(p.family().space().clone(), 1.0, 1.0, |_, u| u * 200.0);
        let opts = PicardOptions {
            blowup: 1e3,
            ..PicardOptions::default()
        };
        let err = solve_semilinear(&p, &f, &DVector::from_element(1, 1.0), &grid, opts).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. } | Error::MaxIter { .. }));
    }

    #[test]
    fn gamma_examples() {
        let space = Arc::new(DiscreteSpace::euclidean(2));
        let f0 = Nonlinearity::pointwise(space.clone(), |_, s| s.sin());
        let us = vec![DVector::from_vec(vec![0.3, -1.0])];
        assert_eq!(gamma(&f0, &f0, &[0.0, 1.0], &us).unwrap(), 0.0);
        let eps = 0.01;
        let c = DVector::from_vec(vec![0.6, 0.8]);
        let g = f0.clone();
        let fe = Nonlinearity::new(space, 1.0, 1.0, move |t, u| g.eval(t, u) + &c * eps);
        assert!((gamma(&fe, &f0, &[0.0, 1.0], &us).unwrap() - eps).abs() < 1e-15);
    }

    #[test]
    fn dissipativity_of_half_identity() {
        let d = dissipativity(&|_, s| 0.5 * s, &[0.0, 1.0], 5.0).unwrap();
        assert!((d.omega - 0.5).abs() < 1e-12);
        assert!(d.n_const.abs() < 1e-12);
        assert!(dissipativity(&|_, s| 2.0 * s, &[0.0], 5.0).is_none());
        // s·tanh(s) − (1−ω)s² peaks near s = 1/(2(1−ω)), which must stay inside |s| ≤ 5.
        let d = dissipativity(&|_, s: f64| s.tanh(), &[0.0], 5.0).unwrap();
        assert!(d.omega >= 0.85 && d.omega < 0.95, "{}", d.omega);
    }

    #[test]
    fn cutoff_preserves_values_inside_ball() {
        let space = Arc::new(DiscreteSpace::euclidean(3));
        let f = Nonlinearity::pointwise(space.clone(), |_, s| s * s)
            .with_cutoff(1.0, (0.0, 1.0))
            .unwrap();
        let u = DVector::from_vec(vec![0.1, 0.2, -0.3]);
        assert_eq!(f.eval(0.0, &u), u.map(|s| s * s));
        let big = DVector::from_vec(vec![10.0, 0.0, 0.0]);
        let far = DVector::from_vec(vec![100.0, 0.0, 0.0]);
        assert_eq!(f.eval(0.0, &big), f.eval(0.0, &far));
        let q = f.sampled_lipschitz(&[0.0], 1.0, 500, 3);
        assert!(q <= f.raw_lip_const() * 1.05, "{q} vs {}", f.raw_lip_const());
    }
}
