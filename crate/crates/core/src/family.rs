//! Time-dependent operator families `t ↦ A_ε(t)` and measured hypothesis constants.
//!
//! Everything here is a measurement on a finite sample of times and spectral
//! parameters. The reported constants are what the samples exhibit, nothing
//! more.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::linalg;
use crate::spaces::{DiscreteSpace, Norm, C64};

pub type MatrixFn = dyn Fn(f64) -> DMatrix<f64> + Send + Sync;

/// Constants a problem generator claims for its family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants {
    pub phi: f64,
    pub c_sector: f64,
    pub beta: f64,
    pub delta: f64,
    pub holder_const: f64,
}

impl HypothesisConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > FRAC_PI_2 && self.phi < PI) {
            return Err(Error::Config(format!("phi = {} not in (pi/2, pi)", self.phi)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta = {} not in (0, 1]", self.beta)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config(format!("delta = {} not in (0, 1]", self.delta)));
        }
        if !(self.c_sector > 0.0 && self.holder_const > 0.0) {
            return Err(Error::Config("sector and Hölder constants must be positive".into()));
        }
        Ok(())
    }
}

/// The map `t ↦ A_ε(t)` on a fixed discrete space.
#[derive(Clone)]
pub struct OperatorFamily {
    space: Arc<DiscreteSpace>,
    eval: Arc<MatrixFn>,
    epsilon: f64,
    declared: Option<HypothesisConstants>,
}

impl fmt::Debug for OperatorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorFamily")
            .field("dim", &self.space.dim())
            .field("epsilon", &self.epsilon)
            .field("declared", &self.declared)
            .finish()
    }
}

impl OperatorFamily {
    pub fn new<F>(space: Arc<DiscreteSpace>, epsilon: f64, eval: F) -> Self
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        OperatorFamily {
            space,
            eval: Arc::new(eval),
            epsilon,
            declared: None,
        }
    }

    /// Autonomous family `A(t) ≡ a`.
    pub fn constant(space: Arc<DiscreteSpace>, a: DMatrix<f64>) -> Self {
        Self::new(space, 0.0, move |_| a.clone())
    }

    pub fn with_declared(mut self, declared: HypothesisConstants) -> Self {
        self.declared = Some(declared);
        self
    }

    pub fn space(&self) -> &Arc<DiscreteSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn declared(&self) -> Option<&HypothesisConstants> {
        self.declared.as_ref()
    }

    /// `A(t)`.
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        (self.eval)(t)
    }

    /// `A(t)⁻¹`.
    pub fn inverse(&self, t: f64) -> Result<DMatrix<f64>> {
        linalg::inverse(&self.at(t), t)
    }

    /// `(λI + A(t))⁻¹` by a dense solve.
    pub fn resolvent(&self, t: f64, lambda: C64) -> Result<DMatrix<C64>> {
        linalg::shifted_inverse(&self.at(t), lambda, t)
    }
}

/// Result of sampling the resolvent on the boundary of a sector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub ok: bool,
    pub phi: f64,
    pub beta: f64,
    pub worst_c_x: f64,
    pub worst_c_y: f64,
    pub worst_c_xy_beta: f64,
    /// Supremum of `‖A(λ+A)⁻¹‖` in `L(X)` and `L(Y)` over the samples.
    pub worst_a_res_x: f64,
    pub worst_a_res_y: f64,
    pub samples: usize,
    /// `(t, Re λ, Im λ)` of the first failing sample.
    pub failure: Option<(f64, f64, f64)>,
}

/// Spectral sample points: `λ = 0` plus a geometric grid `|λ| ∈ [1e-3, 1e3]`
/// on both rays `r e^{±iφ}`.
pub fn sector_samples(phi: f64, per_ray: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0)];
    let per_ray = per_ray.max(1);
    for k in 0..per_ray {
        let frac = if per_ray == 1 {
            0.5
        } else {
            k as f64 / (per_ray - 1) as f64
        };
        let r = 10f64.powf(-3.0 + 6.0 * frac);
        out.push(C64::from_polar(r, phi));
        out.push(C64::from_polar(r, -phi));
    }
    out
}

pub fn check_sector(
    fam: &OperatorFamily,
    phi: f64,
    t_samples: &[f64],
    lambda_samples_per_ray: usize,
) -> Result<SectorReport> {
    if !(phi > FRAC_PI_2 && phi < PI) {
        return Err(Error::Domain(format!("sector angle {phi} not in (pi/2, pi)")));
    }
    if t_samples.is_empty() || lambda_samples_per_ray == 0 {
        return Err(Error::Domain("check_sector needs nonempty samples".into()));
    }
    let beta = fam.declared().map_or(1.0, |d| d.beta);
    let lambdas = sector_samples(phi, lambda_samples_per_ray);
    let space = fam.space();
    let pairs: Vec<(f64, C64)> = t_samples
        .iter()
        .flat_map(|&t| lambdas.iter().map(move |&l| (t, l)))
        .collect();

    let measured: Vec<std::result::Result<[f64; 5], (f64, C64)>> = pairs
        .par_iter()
        .map(|&(t, lambda)| {
            let res = fam.resolvent(t, lambda).map_err(|_| (t, lambda))?;
            let norms = || -> Result<[f64; 5]> {
                let r = lambda.norm();
                let a = linalg::to_complex(&fam.at(t));
                let a_res = &a * &res;
                Ok([
                    (r + 1.0) * space.op_norm_complex(&res, Norm::X, Norm::X)?,
                    (r + 1.0) * space.op_norm_complex(&res, Norm::Y, Norm::Y)?,
                    (r.powf(beta) + 1.0) * space.op_norm_complex(&res, Norm::X, Norm::Y)?,
                    space.op_norm_complex(&a_res, Norm::X, Norm::X)?,
                    space.op_norm_complex(&a_res, Norm::Y, Norm::Y)?,
                ])
            };
            norms().map_err(|_| (t, lambda))
        })
        .collect();

    let mut worst = [0.0f64; 5];
    let mut failure = None;
    for m in measured {
        match m {
            Ok(v) => {
                for (w, x) in worst.iter_mut().zip(v) {
                    *w = w.max(x);
                }
            }
            Err((t, l)) => {
                if failure.is_none() {
                    failure = Some((t, l.re, l.im));
                }
            }
        }
    }
    let ok = failure.is_none() && worst.iter().all(|v| v.is_finite());
    Ok(SectorReport {
        ok,
        phi,
        beta,
        worst_c_x: worst[0],
        worst_c_y: worst[1],
        worst_c_xy_beta: worst[2],
        worst_a_res_x: worst[3],
        worst_a_res_y: worst[4],
        samples: pairs.len(),
        failure,
    })
}

/// Fitted Hölder behaviour of `t ↦ A(t)A(τ)⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaEstimate {
    Fitted {
        delta: f64,
        holder_const: f64,
        /// `max ‖[A(t)−A(t′)]A(τ)⁻¹‖ / |t−t′|^δ` over the sampled pairs.
        sup_const: f64,
    },
    /// Every sampled difference vanished.
    Autonomous,
}

impl DeltaEstimate {
    /// `+∞` for autonomous families.
    pub fn delta(&self) -> f64 {
        match self {
            DeltaEstimate::Fitted { delta, .. } => *delta,
            DeltaEstimate::Autonomous => f64::INFINITY,
        }
    }
}

pub fn estimate_delta(fam: &OperatorFamily, t_grid: &[f64], tau: f64) -> Result<DeltaEstimate> {
    let mut ts: Vec<f64> = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 4 {
        return Err(Error::Domain(format!(
            "estimate_delta needs at least 4 distinct times, got {}",
            ts.len()
        )));
    }
    let a_tau_inv = fam.inverse(tau)?;
    let mats: Vec<DMatrix<f64>> = ts.iter().map(|&t| fam.at(t)).collect();
    let scale = mats.iter().map(|m| m.amax()).fold(0.0, f64::max).max(1.0);
    let space = fam.space();

    let mut pairs = Vec::new();
    for i in 0..ts.len() {
        for j in (i + 1)..ts.len() {
            pairs.push((i, j));
        }
    }
    let vals: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<(f64, f64)> {
            let diff = &mats[j] - &mats[i];
            if diff.amax() <= 1e-14 * scale {
                return Ok((ts[j] - ts[i], 0.0));
            }
            let v = space.op_norm(&(diff * &a_tau_inv), Norm::X, Norm::X)?;
            Ok((ts[j] - ts[i], v))
        })
        .collect::<Result<_>>()?;

    let nonzero: Vec<(f64, f64)> = vals.iter().copied().filter(|&(_, v)| v > 0.0).collect();
    if nonzero.is_empty() {
        return Ok(DeltaEstimate::Autonomous);
    }
    if nonzero.len() < 2 {
        return Err(Error::Domain(
            "too few nonzero differences to fit a Hölder exponent".into(),
        ));
    }
    let xs: Vec<f64> = nonzero.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = nonzero.iter().map(|p| p.1.ln()).collect();
    let LinearFit { slope, intercept, .. } =
        linear_fit(&xs, &ys).ok_or_else(|| Error::Domain("degenerate time grid for Hölder fit".into()))?;
    let sup_const = nonzero.iter().map(|&(d, v)| v / d.powf(slope)).fold(0.0, f64::max);
    Ok(DeltaEstimate::Fitted {
        delta: slope,
        holder_const: intercept.exp(),
        sup_const,
    })
}

fn check_same_space(a: &OperatorFamily, b: &OperatorFamily) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// `max_t ‖A_ε(t)⁻¹ − A_0(t)⁻¹‖_{L(X,Y)}` over the samples.
pub fn eta(fam_eps: &OperatorFamily, fam_0: &OperatorFamily, t_samples: &[f64]) -> Result<f64> {
    check_same_space(fam_eps, fam_0)?;
    let space = fam_0.space();
    let vals: Vec<f64> = t_samples
        .par_iter()
        .map(|&t| {
            let d = fam_eps.inverse(t)? - fam_0.inverse(t)?;
            space.op_norm(&d, Norm::X, Norm::Y)
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `max_{t,τ} ‖A_ε(t)A_ε(τ)⁻¹ − A_0(t)A_0(τ)⁻¹‖_{L(X)}` over the sample grid.
pub fn xi(fam_eps: &OperatorFamily, fam_0: &OperatorFamily, t_samples: &[f64], tau_samples: &[f64]) -> Result<f64> {
    check_same_space(fam_eps, fam_0)?;
    let space = fam_0.space();
    let inv_eps: Vec<DMatrix<f64>> = tau_samples
        .iter()
        .map(|&tau| fam_eps.inverse(tau))
        .collect::<Result<_>>()?;
    let inv_0: Vec<DMatrix<f64>> = tau_samples
        .iter()
        .map(|&tau| fam_0.inverse(tau))
        .collect::<Result<_>>()?;
    let vals: Vec<f64> = t_samples
        .par_iter()
        .map(|&t| -> Result<f64> {
            let a_eps = fam_eps.at(t);
            let a_0 = fam_0.at(t);
            let mut worst: f64 = 0.0;
            for (ie, i0) in inv_eps.iter().zip(&inv_0) {
                let d = &a_eps * ie - &a_0 * i0;
                worst = worst.max(space.op_norm(&d, Norm::X, Norm::X)?);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `‖A_ε(t)(λ+A_ε(t))⁻¹ − A_0(t)(λ+A_0(t))⁻¹‖_{L(X)}`.
pub fn resolvent_ratio_gap(fam_eps: &OperatorFamily, fam_0: &OperatorFamily, t: f64, lambda: C64) -> Result<f64> {
    check_same_space(fam_eps, fam_0)?;
    let ge = linalg::to_complex(&fam_eps.at(t)) * fam_eps.resolvent(t, lambda)?;
    let g0 = linalg::to_complex(&fam_0.at(t)) * fam_0.resolvent(t, lambda)?;
    fam_0.space().op_norm_complex(&(ge - g0), Norm::X, Norm::X)
}

/// `‖A_ε(t)A_ε(τ)⁻¹ − A_0(t)A_0(τ)⁻¹‖_{L(X)}` for a single pair.
pub fn ratio_gap(fam_eps: &OperatorFamily, fam_0: &OperatorFamily, t: f64, tau: f64) -> Result<f64> {
    check_same_space(fam_eps, fam_0)?;
    let d = fam_eps.at(t) * fam_eps.inverse(tau)? - fam_0.at(t) * fam_0.inverse(tau)?;
    fam_0.space().op_norm(&d, Norm::X, Norm::X)
}
