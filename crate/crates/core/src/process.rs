//! Linear evolution processes `U(t,τ)` built from frozen-time semigroups.
//!
//! With `φ(t,s) = [A(s) − A(t)] T_{A(s)}(t−s)`, the resolvent kernel solves
//! `Φ(t,τ) = φ(t,τ) + ∫_τ^t φ(t,s) Φ(s,τ) ds` and the process is
//! `U(t,τ) = T_{A(τ)}(t−τ) + ∫_τ^t T_{A(s)}(t−s) Φ(s,τ) ds`.
//!
//! All integrals live on the nodes of a [`TimeGrid`]. Weights come from
//! [`product_weights`], which integrates the weak singular factors exactly
//! against a piecewise linear interpolant of the rest.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{estimate_delta, DeltaEstimate, OperatorFamily};
use crate::quadrature::gauss_legendre;
use crate::semigroup::SemigroupEvaluator;
use crate::spaces::Norm;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridRule {
    Uniform,
    Graded { q: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub tau: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub rule: GridRule,
}

impl TimeGrid {
    pub fn new(tau: f64, t_end: f64, n_steps: usize, rule: GridRule) -> Result<Self> {
        let g = TimeGrid {
            tau,
            t_end,
            n_steps,
            rule,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn uniform(tau: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        Self::new(tau, t_end, n_steps, GridRule::Uniform)
    }

    /// Nodes `τ + (t_end − τ)(j/n)^q`.
    pub fn graded(tau: f64, t_end: f64, n_steps: usize, q: f64) -> Result<Self> {
        Self::new(tau, t_end, n_steps, GridRule::Graded { q })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.t_end.is_finite() && self.tau < self.t_end) {
            return Err(Error::Config(format!(
                "time grid needs tau < t_end, got [{}, {}]",
                self.tau, self.t_end
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("time grid needs at least one step".into()));
        }
        if let GridRule::Graded { q } = self.rule {
            if !(q >= 1.0 && q.is_finite()) {
                return Err(Error::Config(format!("grading exponent q = {q} must be ≥ 1")));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.n_steps as f64;
        let len = self.t_end - self.tau;
        (0..=self.n_steps)
            .map(|j| {
                if j == self.n_steps {
                    return self.t_end;
                }
                let x = j as f64 / n;
                match self.rule {
                    GridRule::Uniform => self.tau + len * x,
                    GridRule::Graded { q } => self.tau + len * x.powf(q),
                }
            })
            .collect()
    }

    /// Same grid with twice as many steps; every node of `self` is a node of the result.
    pub fn refined(&self) -> Self {
        TimeGrid {
            n_steps: 2 * self.n_steps,
            ..*self
        }
    }
}

/// Weights `ω_k` with `∫_{s_0}^{s_M} g ≈ Σ ω_k g(s_k)`.
///
/// `g` is written as `w·g̃` with `w(s) = (s−s_0)^{a−1}(s_M−s)^{b−1}` and `g̃`
/// interpolated linearly between nodes. Where `w` is singular the endpoint value
/// of `g̃` is taken as 0, so that node gets weight 0. For `a = b = 1` this is
/// the trapezoid rule.
pub fn product_weights(s: &[f64], a: f64, b: f64) -> Vec<f64> {
    let m = s.len();
    if m < 2 {
        return vec![0.0; m];
    }
    let sing_a = a < 1.0 - 1e-12;
    let sing_b = b < 1.0 - 1e-12;
    let mut out = vec![0.0; m];
    if !sing_a && !sing_b {
        for k in 0..m - 1 {
            let h = 0.5 * (s[k + 1] - s[k]);
            out[k] += h;
            out[k + 1] += h;
        }
        return out;
    }
    let (s0, s_end) = (s[0], s[m - 1]);
    let w = |x: f64| -> f64 {
        let mut v = 1.0;
        if sing_a {
            v *= (x - s0).powf(a - 1.0);
        }
        if sing_b {
            v *= (s_end - x).powf(b - 1.0);
        }
        v
    };
    let gl = gauss_legendre(12);
    let mut moments = vec![0.0; m];
    for k in 0..m - 1 {
        let (lo, hi) = (s[k], s[k + 1]);
        let h = hi - lo;
        let mid = 0.5 * (lo + hi);
        // ∫ ℓ_lo w and ∫ ℓ_hi w on [lo, hi], split at mid so each half has at most one singular end.
        let mut acc = [0.0, 0.0];
        let mut add = |x: f64, weight: f64, rest: f64| {
            let l_hi = (x - lo) / h;
            acc[0] += weight * rest * (1.0 - l_hi);
            acc[1] += weight * rest * l_hi;
        };
        for (half_lo, half_hi) in [(lo, mid), (mid, hi)] {
            let left_singular = sing_a && k == 0 && half_lo == lo;
            let right_singular = sing_b && k == m - 2 && half_hi == hi;
            let len = half_hi - half_lo;
            if left_singular {
                // s = half_lo + len·v^{1/a}: (s−s0)^{a−1} ds = (len^a/a) dv
                let scale = len.powf(a) / a;
                for (v, wt) in gl.on(0.0, 1.0) {
                    let x = half_lo + len * v.powf(1.0 / a);
                    let other = if sing_b { (s_end - x).powf(b - 1.0) } else { 1.0 };
                    add(x, wt * scale, other);
                }
            } else if right_singular {
                let scale = len.powf(b) / b;
                for (v, wt) in gl.on(0.0, 1.0) {
                    let x = half_hi - len * v.powf(1.0 / b);
                    let other = if sing_a { (x - s0).powf(a - 1.0) } else { 1.0 };
                    add(x, wt * scale, other);
                }
            } else {
                for (x, wt) in gl.on(half_lo, half_hi) {
                    add(x, wt, w(x));
                }
            }
        }
        moments[k] += acc[0];
        moments[k + 1] += acc[1];
    }
    for k in 0..m {
        let singular_here = (k == 0 && sing_a) || (k == m - 1 && sing_b);
        out[k] = if singular_here { 0.0 } else { moments[k] / w(s[k]) };
    }
    out
}

/// `φ(t,τ) = [A(τ) − A(t)] T_{A(τ)}(t−τ)`.
pub fn phi_kernel(ev: &SemigroupEvaluator, t: f64, tau: f64) -> Result<DMatrix<f64>> {
    if !(t > tau) {
        return Err(Error::Domain(format!(
            "phi kernel needs t > tau, got t = {t}, tau = {tau}"
        )));
    }
    let diff = ev.operator(tau).as_ref() - ev.operator(t).as_ref();
    Ok(diff * ev.semigroup_at(tau, t - tau)?.as_ref())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiMethod {
    Neumann { tol: f64, max_iter: usize },
    ProductIntegration,
}

impl PhiMethod {
    pub fn neumann() -> Self {
        PhiMethod::Neumann {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Which `U(t_i, t_j)` a process stores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessScope {
    /// Only `U(t_i, τ)`.
    FromInitial,
    /// Every `U(t_i, t_j)` with `i ≥ j`, each from its own shifted start.
    AllPairs,
}

/// Exponent used by the product weights: `min(declared, fitted)`, capped at 1.
pub fn resolve_delta(fam: &OperatorFamily, nodes: &[f64]) -> f64 {
    let declared = fam.declared().map_or(1.0, |d| d.delta);
    let probe: Vec<f64> = if nodes.len() > 12 {
        (0..12).map(|i| nodes[i * (nodes.len() - 1) / 11]).collect()
    } else {
        nodes.to_vec()
    };
    let fitted = match estimate_delta(fam, &probe, nodes[0]) {
        Ok(DeltaEstimate::Fitted { delta, .. }) if delta.is_finite() && delta > 0.0 => delta,
        _ => 1.0,
    };
    declared.min(fitted).min(1.0)
}

/// Semigroups `T_{A(t_k)}(t_m − t_k)` and kernels `φ(t_m, t_k)` on a node set.
struct KernelTable {
    nodes: Vec<f64>,
    /// `semi[m][k]`, `k ≤ m`.
    semi: Vec<Vec<Arc<DMatrix<f64>>>>,
    /// `phi[m][k]`, `k < m`.
    phi: Vec<Vec<Arc<DMatrix<f64>>>>,
}

impl KernelTable {
    fn build(ev: &SemigroupEvaluator, nodes: &[f64]) -> Result<Self> {
        let n = nodes.len();
        let groups: Vec<(f64, Vec<f64>)> = (0..n.saturating_sub(1))
            .map(|k| (nodes[k], ((k + 1)..n).map(|m| nodes[m] - nodes[k]).collect()))
            .collect();
        ev.prefill(&groups)?;
        let ops: Vec<Arc<DMatrix<f64>>> = nodes.iter().map(|&t| ev.operator(t)).collect();
        let rows: Vec<(Vec<Arc<DMatrix<f64>>>, Vec<Arc<DMatrix<f64>>>)> = (0..n)
            .into_par_iter()
            .map(|m| -> Result<_> {
                let mut semi = Vec::with_capacity(m + 1);
                let mut phi = Vec::with_capacity(m);
                for k in 0..m {
                    let t = ev.semigroup_at(nodes[k], nodes[m] - nodes[k])?;
                    phi.push(Arc::new((ops[k].as_ref() - ops[m].as_ref()) * t.as_ref()));
                    semi.push(t);
                }
                semi.push(ev.semigroup_at(nodes[m], 0.0)?);
                Ok((semi, phi))
            })
            .collect::<Result<_>>()?;
        let (semi, phi) = rows.into_iter().unzip();
        Ok(KernelTable {
            nodes: nodes.to_vec(),
            semi,
            phi,
        })
    }

    /// Table for a start at node `j` with `inserted` extra nodes in its first panel.
    ///
    /// Local index 0 is `t_j`, `1..=inserted` are the new nodes, and local
    /// `inserted + l` is node `j + l`. Pairs of original nodes are shared with
    /// `self`; semigroups from inserted nodes are not cached in `ev`.
    fn for_start(&self, ev: &SemigroupEvaluator, j: usize, inserted: &[f64]) -> Result<KernelTable> {
        let n = self.nodes.len();
        let p = inserted.len();
        let mut nodes = Vec::with_capacity(n - j + p);
        nodes.push(self.nodes[j]);
        nodes.extend_from_slice(inserted);
        nodes.extend_from_slice(&self.nodes[j + 1..]);
        let len = nodes.len();
        let orig = |l: usize| -> Option<usize> {
            if l == 0 {
                Some(j)
            } else if l <= p {
                None
            } else {
                Some(j + l - p)
            }
        };
        let ops: Vec<Arc<DMatrix<f64>>> = nodes.iter().map(|&t| ev.operator(t)).collect();
        // Rows from inserted nodes, computed once per row with shared resolvent solves.
        let fresh: Vec<Vec<Arc<DMatrix<f64>>>> = (1..=p)
            .into_par_iter()
            .map(|k| -> Result<_> {
                let times: Vec<f64> = ((k + 1)..len).map(|m| nodes[m] - nodes[k]).collect();
                Ok(ev
                    .semigroup_batch_uncached(nodes[k], &times)?
                    .into_iter()
                    .map(Arc::new)
                    .collect())
            })
            .collect::<Result<_>>()?;
        let rows: Vec<(Vec<Arc<DMatrix<f64>>>, Vec<Arc<DMatrix<f64>>>)> = (0..len)
            .into_par_iter()
            .map(|m| -> Result<_> {
                let mut semi = Vec::with_capacity(m + 1);
                let mut phi = Vec::with_capacity(m);
                for k in 0..m {
                    if let (Some(ok), Some(om)) = (orig(k), orig(m)) {
                        semi.push(self.semi[om][ok].clone());
                        phi.push(self.phi[om][ok].clone());
                        continue;
                    }
                    let t = if k == 0 {
                        ev.semigroup_at(nodes[0], nodes[m] - nodes[0])?
                    } else {
                        fresh[k - 1][m - k - 1].clone()
                    };
                    phi.push(Arc::new((ops[k].as_ref() - ops[m].as_ref()) * t.as_ref()));
                    semi.push(t);
                }
                semi.push(match orig(m) {
                    Some(om) => self.semi[om][om].clone(),
                    None => ev.semigroup_at(nodes[m], 0.0)?,
                });
                Ok((semi, phi))
            })
            .collect::<Result<_>>()?;
        let (semi, phi) = rows.into_iter().unzip();
        Ok(KernelTable { nodes, semi, phi })
    }

    /// `Φ(t_m, t_j)` for `m = j..n`, index `m − j`.
    fn solve_phi(
        &self,
        ev: &SemigroupEvaluator,
        j: usize,
        delta: f64,
        method: PhiMethod,
    ) -> Result<(Vec<DMatrix<f64>>, usize)> {
        let n = self.nodes.len();
        let dim = ev.family().dim();
        let weights: Vec<Vec<f64>> = (j..n)
            .map(|m| product_weights(&self.nodes[j..=m], delta, delta))
            .collect();
        let apply = |m: usize, prev: &[DMatrix<f64>]| -> DMatrix<f64> {
            let mut v = self.phi[m][j].as_ref().clone();
            let w = &weights[m - j];
            for k in (j + 1)..m {
                let wk = w[k - j];
                if wk != 0.0 {
                    v += (self.phi[m][k].as_ref() * &prev[k - j]) * wk;
                }
            }
            v
        };
        let mut vals = vec![DMatrix::zeros(dim, dim); n - j];
        match method {
            PhiMethod::ProductIntegration => {
                for m in (j + 1)..n {
                    vals[m - j] = apply(m, &vals);
                }
                Ok((vals, 1))
            }
            PhiMethod::Neumann { tol, max_iter } => {
                let space = ev.family().space();
                let mut history = Vec::new();
                let mut growth = 0;
                for it in 1..=max_iter {
                    let next: Vec<DMatrix<f64>> = (j..n)
                        .map(|m| {
                            if m == j {
                                DMatrix::zeros(dim, dim)
                            } else {
                                apply(m, &vals)
                            }
                        })
                        .collect();
                    let mut dist: f64 = 0.0;
                    for (a, b) in next.iter().zip(&vals) {
                        dist = dist.max(space.op_norm(&(a - b), Norm::X, Norm::X)?);
                    }
                    vals = next;
                    if let Some(&last) = history.last() {
                        growth = if dist > last { growth + 1 } else { 0 };
                    }
                    history.push(dist);
                    if dist <= tol {
                        return Ok((vals, it));
                    }
                    if growth >= 3 {
                        return Err(Error::NonContraction { history });
                    }
                }
                Err(Error::MaxIter {
                    iterations: max_iter,
                    history,
                })
            }
        }
    }

    /// `U(t_m, t_j)` for `m = j..n` from `Φ(·, t_j)`.
    fn assemble(&self, j: usize, delta: f64, phi: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let n = self.nodes.len();
        (j..n)
            .map(|m| {
                if m == j {
                    return self.semi[m][m].as_ref().clone();
                }
                let w = product_weights(&self.nodes[j..=m], delta, 1.0);
                let mut u = self.semi[m][j].as_ref().clone();
                for k in (j + 1)..=m {
                    let wk = w[k - j];
                    if wk != 0.0 {
                        u += (self.semi[m][k].as_ref() * &phi[k - j]) * wk;
                    }
                }
                u
            })
            .collect()
    }
}

/// Discrete `Φ(t_j, τ)` on a grid.
#[derive(Clone, Debug)]
pub struct PhiResolvent {
    pub grid: TimeGrid,
    pub nodes: Vec<f64>,
    pub values: Vec<DMatrix<f64>>,
    pub delta: f64,
    pub method: PhiMethod,
    pub iterations: usize,
}

impl PhiResolvent {
    /// `max_j (t_j−τ)^{1−δ} ‖Φ(t_j,τ)‖_{L(X)}`.
    pub fn singularity_bound(&self, fam: &OperatorFamily) -> Result<f64> {
        let space = fam.space();
        let mut worst: f64 = 0.0;
        for (t, v) in self.nodes.iter().zip(&self.values).skip(1) {
            let s = (t - self.grid.tau).powf(1.0 - self.delta);
            worst = worst.max(s * space.op_norm(v, Norm::X, Norm::X)?);
        }
        Ok(worst)
    }
}

pub fn solve_phi(ev: &SemigroupEvaluator, grid: &TimeGrid, method: PhiMethod) -> Result<PhiResolvent> {
    grid.validate()?;
    let nodes = grid.nodes();
    let delta = resolve_delta(ev.family(), &nodes);
    solve_phi_with_delta(ev, grid, method, delta)
}

pub fn solve_phi_with_delta(
    ev: &SemigroupEvaluator,
    grid: &TimeGrid,
    method: PhiMethod,
    delta: f64,
) -> Result<PhiResolvent> {
    grid.validate()?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("kernel exponent delta = {delta} not in (0, 1]")));
    }
    let nodes = grid.nodes();
    let table = KernelTable::build(ev, &nodes)?;
    let (values, iterations) = table.solve_phi(ev, 0, delta, method)?;
    Ok(PhiResolvent {
        grid: *grid,
        nodes,
        values,
        delta,
        method,
        iterations,
    })
}

/// `U(t_i, t_j)` on the nodes of a grid.
#[derive(Clone, Debug)]
pub struct EvolutionProcess {
    fam: OperatorFamily,
    grid: TimeGrid,
    nodes: Vec<f64>,
    scope: ProcessScope,
    delta: f64,
    method: PhiMethod,
    /// `values[j][i − j] = U(t_i, t_j)`; only `j = 0` for `FromInitial`.
    values: Vec<Vec<DMatrix<f64>>>,
}

/// Build `U` from an already solved `Φ(·, τ)`; other starts are solved afresh.
pub fn build_process(ev: &SemigroupEvaluator, phi_res: &PhiResolvent, scope: ProcessScope) -> Result<EvolutionProcess> {
    let grid = phi_res.grid;
    let nodes = grid.nodes();
    if nodes != phi_res.nodes {
        return Err(Error::GridMismatch(
            "Phi resolvent was solved on a different grid".into(),
        ));
    }
    let table = KernelTable::build(ev, &nodes)?;
    let delta = phi_res.delta;
    let method = phi_res.method;
    let starts = match scope {
        ProcessScope::FromInitial => 1,
        ProcessScope::AllPairs => nodes.len(),
    };
    let values: Vec<Vec<DMatrix<f64>>> = (0..starts)
        .into_par_iter()
        .map(|j| -> Result<Vec<DMatrix<f64>>> {
            if j == 0 {
                return Ok(table.assemble(0, delta, &phi_res.values));
            }
            let inserted = start_refinement(&grid, &nodes, j);
            if inserted.is_empty() {
                let (phi, _) = table.solve_phi(ev, j, delta, method)?;
                return Ok(table.assemble(j, delta, &phi));
            }
            let local = table.for_start(ev, j, &inserted)?;
            let (phi, _) = local.solve_phi(ev, 0, delta, method)?;
            let mut u = local.assemble(0, delta, &phi);
            u.drain(1..=inserted.len());
            Ok(u)
        })
        .collect::<Result<_>>()?;
    Ok(EvolutionProcess {
        fam: ev.family().clone(),
        grid,
        nodes,
        scope,
        delta,
        method,
        values,
    })
}

/// Extra nodes for the first panel of a shifted start at node `j`.
///
/// On a graded grid the panel `[t_j, t_{j+1}]` is split with the same grading
/// so that its first sub-step is no longer than the grid's first step; this
/// resolves the initial layer of `U(·, t_j)` as well as the one at `τ`.
fn start_refinement(grid: &TimeGrid, nodes: &[f64], j: usize) -> Vec<f64> {
    let q = match grid.rule {
        GridRule::Graded { q } if q > 1.0 => q,
        _ => return Vec::new(),
    };
    if j + 1 >= nodes.len() {
        return Vec::new();
    }
    let h0 = nodes[1] - nodes[0];
    let h = nodes[j + 1] - nodes[j];
    // A quarter of the grading that would match the first panel at t_0;
    // enough to resolve the layer, at a quarter of the extra contour work.
    let parts = ((h / h0).powf(1.0 / q) / 4.0).ceil() as usize;
    (1..parts)
        .map(|i| nodes[j] + h * (i as f64 / parts as f64).powf(q))
        .collect()
}

/// `solve_phi` followed by `build_process`.
pub fn propagate(
    ev: &SemigroupEvaluator,
    grid: &TimeGrid,
    method: PhiMethod,
    scope: ProcessScope,
) -> Result<EvolutionProcess> {
    let phi = solve_phi(ev, grid, method)?;
    build_process(ev, &phi, scope)
}

impl EvolutionProcess {
    pub fn family(&self) -> &OperatorFamily {
        &self.fam
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn scope(&self) -> ProcessScope {
        self.scope
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn method(&self) -> PhiMethod {
        self.method
    }

    /// `U(t_i, t_j)` by node index, `i ≥ j`.
    pub fn get(&self, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        if i < j {
            return None;
        }
        self.values.get(j)?.get(i - j)
    }

    /// `U(t, s)` for grid nodes `t ≥ s`, matched by exact value.
    pub fn at(&self, t: f64, s: f64) -> Option<&DMatrix<f64>> {
        let i = self.nodes.iter().position(|&x| x == t)?;
        let j = self.nodes.iter().position(|&x| x == s)?;
        self.get(i, j)
    }

    /// `U(t_i, τ)` for every node.
    pub fn from_initial(&self) -> &[DMatrix<f64>] {
        &self.values[0]
    }

    /// Reassemble a process from stored values, e.g. a decoded dump.
    /// `values[j][i − j] = U(t_i, t_j)`.
    pub fn from_parts(
        fam: OperatorFamily,
        grid: TimeGrid,
        scope: ProcessScope,
        delta: f64,
        method: PhiMethod,
        values: Vec<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        let nodes = grid.nodes();
        let n = nodes.len();
        let starts = match scope {
            ProcessScope::FromInitial => 1,
            ProcessScope::AllPairs => n,
        };
        if values.len() != starts || values.iter().enumerate().any(|(j, row)| row.len() != n - j) {
            return Err(Error::GridMismatch("process values do not match the grid".into()));
        }
        let dim = fam.dim();
        if values.iter().flatten().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: values
                    .iter()
                    .flatten()
                    .map(|m| m.nrows())
                    .find(|&r| r != dim)
                    .unwrap_or(0),
            });
        }
        Ok(EvolutionProcess {
            fam,
            grid,
            nodes,
            scope,
            delta,
            method,
            values,
        })
    }

    pub(crate) fn raw_values(&self) -> &[Vec<DMatrix<f64>>] {
        &self.values
    }
}

/// Diagnostics for the process axioms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    /// `max ‖U(t,t) − I‖`; zero by construction.
    pub identity_defect: f64,
    /// `max ‖U(t,s)U(s,τ) − U(t,τ)‖_{L(X)}` over sampled triples, `None` without all pairs.
    pub cocycle_defect: Option<f64>,
    pub cocycle_triples: usize,
    /// `max ‖(U(t_{m+1},τ) − U(t_{m−1},τ))/(t_{m+1} − t_{m−1}) + A(t_m)U(t_m,τ)‖_{L(X)}`
    /// over interior nodes in the second half of the window.
    pub generator_residual: f64,
    /// Largest step among the nodes entering `generator_residual`.
    pub generator_h: f64,
    /// `sup ‖U(t,s)‖_{L(X)}` over stored pairs.
    pub sup_norm_x: f64,
    /// `sup (t−s)‖A(t)U(t,s)‖_{L(X)}` over stored pairs.
    pub sup_t_derivative: f64,
}

/// Node indices used for cocycle sampling: at most `max` roughly even ones.
fn sample_indices(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    let mut v: Vec<usize> = (0..max).map(|i| i * (n - 1) / (max - 1)).collect();
    v.dedup();
    v
}

pub fn check_process_axioms(proc: &EvolutionProcess) -> Result<AxiomReport> {
    let n = proc.nodes.len();
    if n < 8 {
        return Err(Error::Domain(format!("axiom checks need at least 8 nodes, got {n}")));
    }
    let space = proc.fam.space();
    let dim = proc.fam.dim();
    let id = DMatrix::<f64>::identity(dim, dim);

    let mut identity_defect: f64 = 0.0;
    for j in 0..proc.values.len() {
        identity_defect = identity_defect.max((&proc.values[j][0] - &id).amax());
    }

    let (cocycle_defect, cocycle_triples) = match proc.scope {
        ProcessScope::FromInitial => (None, 0),
        ProcessScope::AllPairs => {
            let idx = sample_indices(n, 17);
            let mut triples = Vec::new();
            for (a, &j) in idx.iter().enumerate() {
                for (b, &k) in idx.iter().enumerate().skip(a) {
                    for &i in idx.iter().skip(b) {
                        triples.push((i, k, j));
                    }
                }
            }
            let defects: Vec<f64> = triples
                .par_iter()
                .map(|&(i, k, j)| {
                    let lhs = proc.get(i, k).unwrap() * proc.get(k, j).unwrap();
                    space.op_norm(&(lhs - proc.get(i, j).unwrap()), Norm::X, Norm::X)
                })
                .collect::<Result<_>>()?;
            (Some(defects.into_iter().fold(0.0, f64::max)), triples.len())
        }
    };

    let ops: Vec<DMatrix<f64>> = proc.nodes.iter().map(|&t| proc.fam.at(t)).collect();
    let row = &proc.values[0];
    let half = proc.nodes[0] + 0.5 * (proc.nodes[n - 1] - proc.nodes[0]);
    let mut generator_residual: f64 = 0.0;
    let mut generator_h: f64 = 0.0;
    for m in 1..n - 1 {
        if proc.nodes[m] < half {
            continue;
        }
        let dt = proc.nodes[m + 1] - proc.nodes[m - 1];
        let r = (&row[m + 1] - &row[m - 1]) / dt + &ops[m] * &row[m];
        generator_residual = generator_residual.max(space.op_norm(&r, Norm::X, Norm::X)?);
        generator_h = generator_h
            .max(proc.nodes[m + 1] - proc.nodes[m])
            .max(proc.nodes[m] - proc.nodes[m - 1]);
    }

    let pairs: Vec<(usize, usize)> = (0..proc.values.len())
        .flat_map(|j| (j..n).map(move |i| (i, j)))
        .collect();
    let bounds: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<(f64, f64)> {
            let u = proc.get(i, j).unwrap();
            let nx = space.op_norm(u, Norm::X, Norm::X)?;
            let dt = proc.nodes[i] - proc.nodes[j];
            let d = if i == j {
                0.0
            } else {
                dt * space.op_norm(&(&ops[i] * u), Norm::X, Norm::X)?
            };
            Ok((nx, d))
        })
        .collect::<Result<_>>()?;
    let sup_norm_x = bounds.iter().map(|b| b.0).fold(0.0, f64::max);
    let sup_t_derivative = bounds.iter().map(|b| b.1).fold(0.0, f64::max);

    Ok(AxiomReport {
        identity_defect,
        cocycle_defect,
        cocycle_triples,
        generator_residual,
        generator_h,
        sup_norm_x,
        sup_t_derivative,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceNorm {
    /// `L(X)`.
    X,
    /// `L(X, Y)`.
    XY,
}

/// `‖U_ε(t_i,τ) − U_0(t_i,τ)‖` per node.
pub fn process_distance(
    p_eps: &EvolutionProcess,
    p_0: &EvolutionProcess,
    which: DistanceNorm,
) -> Result<Vec<(f64, f64)>> {
    if p_eps.nodes != p_0.nodes {
        return Err(Error::GridMismatch("processes live on different grids".into()));
    }
    if p_eps.fam.dim() != p_0.fam.dim() {
        return Err(Error::DimensionMismatch {
            expected: p_0.fam.dim(),
            got: p_eps.fam.dim(),
        });
    }
    let space = p_0.fam.space();
    let to = match which {
        DistanceNorm::X => Norm::X,
        DistanceNorm::XY => Norm::Y,
    };
    p_eps.values[0]
        .par_iter()
        .zip(&p_0.values[0])
        .zip(&p_0.nodes)
        .map(|((a, b), &t)| Ok((t, space.op_norm(&(a - b), Norm::X, to)?)))
        .collect()
}

/// `max ‖U_a(t_i,t_j) − U_b(t_i,t_j)‖_{L(X)}` over the nodes of the coarser
/// process, which must all be nodes of the finer one.
pub fn discretization_tol(coarse: &EvolutionProcess, fine: &EvolutionProcess) -> Result<f64> {
    let space = coarse.fam.space();
    let map: Vec<usize> = coarse
        .nodes
        .iter()
        .map(|t| {
            fine.nodes
                .iter()
                .position(|x| x == t)
                .ok_or_else(|| Error::GridMismatch(format!("coarse node {t} missing from fine grid")))
        })
        .collect::<Result<_>>()?;
    let starts = coarse.values.len().min(if fine.scope == ProcessScope::AllPairs {
        coarse.nodes.len()
    } else {
        1
    });
    let mut worst: f64 = 0.0;
    for j in 0..starts {
        for i in j..coarse.nodes.len() {
            let a = coarse.get(i, j).unwrap();
            let b = fine
                .get(map[i], map[j])
                .ok_or_else(|| Error::GridMismatch("fine process lacks a coarse pair".into()))?;
            worst = worst.max(space.op_norm(&(a - b), Norm::X, Norm::X)?);
        }
    }
    Ok(worst)
}

/// Measured bounds `sup ‖U(t,τ)‖_{L(X)}` and `sup (t−τ)^{1−β}‖U(t,τ)‖_{L(X,Y)}` from the start.
pub fn process_bounds(proc: &EvolutionProcess, beta: f64) -> Result<(f64, f64)> {
    let space = proc.fam.space();
    let tau = proc.nodes[0];
    let mut bx: f64 = 0.0;
    let mut bxy: f64 = 0.0;
    for (u, &t) in proc.values[0].iter().zip(&proc.nodes).skip(1) {
        bx = bx.max(space.op_norm(u, Norm::X, Norm::X)?);
        bxy = bxy.max((t - tau).powf(1.0 - beta) * space.op_norm(u, Norm::X, Norm::Y)?);
    }
    Ok((bx, bxy))
}
