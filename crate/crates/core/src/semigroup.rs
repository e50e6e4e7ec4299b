//! Frozen-time analytic semigroups `T(t) = e^{-A(τ)t}` by contour quadrature.
//!
//! `T(t) = (1/2πi) ∫_Γ e^{λt} (λ + A(τ))⁻¹ dλ` with Γ the two rays `r e^{±iφ}`
//! traversed upward. For real `A` the lower ray is the complex conjugate of the
//! upper one, so by default only the upper ray is evaluated and
//! `T(t) = (1/π) Im ∫_0^R e^{λt}(λ+A)⁻¹ e^{iφ} dr`.
//!
//! The ray is split into panels: a uniform one on `[0, r₀]` followed by panels
//! whose length grows geometrically, each carrying the same small rule. The
//! resolvents at the nodes depend only on `τ`, so a whole batch of times is
//! served from one set of solves.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::OperatorFamily;
use crate::linalg;
use crate::quadrature::{gauss_legendre, tanh_sinh, Rule};
use crate::spaces::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureKind {
    CompositeGaussLegendre,
    TanhSinh,
}

/// Ray truncation is `R = radius_factor / (t_min·|cos φ|)` unless `radius_max`
/// pins it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Contour {
    pub phi: f64,
    pub radius_factor: f64,
    pub radius_max: Option<f64>,
    pub nodes_per_panel: usize,
    pub panel_ratio: f64,
    pub quadrature: QuadratureKind,
    /// Evaluate only the upper ray and use conjugate symmetry.
    pub conjugate_symmetry: bool,
}

impl Default for Contour {
    fn default() -> Self {
        Contour {
            phi: 3.0 * PI / 4.0,
            radius_factor: 40.0,
            radius_max: None,
            nodes_per_panel: 16,
            panel_ratio: 3.0,
            quadrature: QuadratureKind::CompositeGaussLegendre,
            conjugate_symmetry: true,
        }
    }
}

/// Below this the imaginary residue of a two-ray evaluation is accepted.
pub const RESIDUE_TOL: f64 = 1e-10;
/// Nodes where `|e^{λt}|` drops under this are skipped.
const NEGLIGIBLE: f64 = 1e-30;

impl Contour {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > PI / 2.0 && self.phi < PI) {
            return Err(Error::Config(format!("contour phi = {} not in (pi/2, pi)", self.phi)));
        }
        if !(self.radius_factor >= 30.0) {
            return Err(Error::Config(format!(
                "contour radius_factor = {} below 30",
                self.radius_factor
            )));
        }
        if self.nodes_per_panel < 4 {
            return Err(Error::Config("contour needs at least 4 nodes per panel".into()));
        }
        if !(self.panel_ratio > 1.0) {
            return Err(Error::Config("contour panel_ratio must exceed 1".into()));
        }
        if let Some(r) = self.radius_max {
            if !(r > 0.0) {
                return Err(Error::Config("contour radius_max must be positive".into()));
            }
        }
        Ok(())
    }

    fn rule(&self) -> Rule {
        match self.quadrature {
            QuadratureKind::CompositeGaussLegendre => gauss_legendre(self.nodes_per_panel),
            QuadratureKind::TanhSinh => tanh_sinh(self.nodes_per_panel | 1),
        }
    }

    fn radius_for(&self, t_min: f64) -> Result<f64> {
        let c = self.phi.cos().abs();
        match self.radius_max {
            Some(r) if r * c * t_min >= 30.0 => Ok(r),
            Some(r) => Err(Error::Domain(format!(
                "contour radius {r} too short for t = {t_min} (needs R·|cos φ|·t ≥ 30)"
            ))),
            None => Ok(self.radius_factor / (t_min * c)),
        }
    }

    /// Panel end points `0 = r_0 < r_1 < … < R`.
    pub fn panels(&self, inner: f64, radius: f64) -> Vec<f64> {
        let mut ends = vec![0.0];
        let inner = inner.min(radius);
        ends.push(inner);
        let mut r = inner;
        while r < radius {
            r = (r * self.panel_ratio).min(radius);
            if radius - r < 1e-9 * radius {
                r = radius;
            }
            ends.push(r);
        }
        ends
    }
}

struct Node {
    lambda: C64,
    weight: f64,
    /// Real and imaginary parts of `e^{iφ}(λ+A)⁻¹` (or the lower-ray analogue).
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

/// Resolvents of one `A(τ)` on a fixed node layout.
struct NodeSet {
    t_min: f64,
    t_max: f64,
    upper: Vec<Node>,
    lower: Vec<Node>,
}

impl NodeSet {
    fn covers(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }
}

/// Evaluates and caches `T_{A(τ)}(t)`.
pub struct SemigroupEvaluator {
    fam: OperatorFamily,
    contour: Contour,
    cache: RwLock<HashMap<(u64, u64), Arc<DMatrix<f64>>>>,
    a_cache: RwLock<HashMap<u64, Arc<DMatrix<f64>>>>,
}

impl std::fmt::Debug for SemigroupEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemigroupEvaluator")
            .field("fam", &self.fam)
            .field("contour", &self.contour)
            .field("cached", &self.cached_len())
            .finish()
    }
}

fn key(tau: f64, t: f64) -> (u64, u64) {
    (tau.to_bits(), t.to_bits())
}

impl SemigroupEvaluator {
    pub fn new(fam: OperatorFamily, contour: Contour) -> Result<Self> {
        contour.validate()?;
        Ok(SemigroupEvaluator {
            fam,
            contour,
            cache: RwLock::new(HashMap::new()),
            a_cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn family(&self) -> &OperatorFamily {
        &self.fam
    }

    pub fn contour(&self) -> &Contour {
        &self.contour
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    /// `A(τ)`, memoised by the exact bits of `τ`.
    pub fn operator(&self, tau: f64) -> Arc<DMatrix<f64>> {
        if let Some(a) = self.a_cache.read().ok().and_then(|c| c.get(&tau.to_bits()).cloned()) {
            return a;
        }
        let a = Arc::new(self.fam.at(tau));
        if let Ok(mut c) = self.a_cache.write() {
            return c.entry(tau.to_bits()).or_insert(a).clone();
        }
        a
    }

    fn inner_radius(&self, a: &DMatrix<f64>, t_max: f64) -> f64 {
        let mu = a
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min);
        let mu = if mu.is_finite() && mu > 0.0 { mu } else { 1.0 };
        0.5 * mu.min(1.0).min(1.0 / t_max.max(1e-300))
    }

    fn build_nodes(&self, tau: f64, t_min: f64, t_max: f64) -> Result<NodeSet> {
        let a = self.operator(tau);
        let radius = self.contour.radius_for(t_min)?;
        let inner = self.inner_radius(&a, t_max);
        let ends = self.contour.panels(inner, radius);
        let rule = self.contour.rule();
        let mut pts = Vec::new();
        for w in ends.windows(2) {
            pts.extend(rule.on(w[0], w[1]));
        }
        let phi = self.contour.phi;
        let make = |sign: f64| -> Result<Vec<Node>> {
            let dir = C64::from_polar(1.0, sign * phi);
            pts.iter()
                .map(|&(r, weight)| {
                    let lambda = dir * r;
                    let res = linalg::shifted_inverse(&a, lambda, tau)? * dir;
                    Ok(Node {
                        lambda,
                        weight,
                        re: res.map(|z| z.re),
                        im: res.map(|z| z.im),
                    })
                })
                .collect()
        };
        let upper = make(1.0)?;
        let lower = if self.contour.conjugate_symmetry {
            Vec::new()
        } else {
            make(-1.0)?
        };
        Ok(NodeSet {
            t_min,
            t_max,
            upper,
            lower,
        })
    }

    /// `(1/2πi)∫_Γ g(λ) e^{λt}(λ+A)⁻¹ dλ` on a prepared node set.
    fn integrate(&self, nodes: &NodeSet, t: f64, g: impl Fn(C64) -> C64) -> Result<DMatrix<f64>> {
        let n = self.fam.dim();
        if self.contour.conjugate_symmetry {
            let mut out = DMatrix::zeros(n, n);
            for node in &nodes.upper {
                let c = g(node.lambda) * (node.lambda * t).exp() * node.weight;
                if c.norm() < NEGLIGIBLE {
                    continue;
                }
                // Im(c·R) = Re(c)·Im(R) + Im(c)·Re(R)
                axpy(&mut out, c.re, &node.im);
                axpy(&mut out, c.im, &node.re);
            }
            return Ok(out / PI);
        }
        // Two rays: upper with +dr, lower traversed inward, i.e. −dr.
        let mut re_part = DMatrix::zeros(n, n);
        let mut im_part = DMatrix::zeros(n, n);
        for (ray, sign) in [(&nodes.upper, 1.0), (&nodes.lower, -1.0)] {
            for node in ray {
                let c = g(node.lambda) * (node.lambda * t).exp() * (sign * node.weight);
                if c.norm() < NEGLIGIBLE {
                    continue;
                }
                axpy(&mut re_part, c.re, &node.re);
                axpy(&mut re_part, -c.im, &node.im);
                axpy(&mut im_part, c.re, &node.im);
                axpy(&mut im_part, c.im, &node.re);
            }
        }
        // Divide by 2πi: real result is im_part/2π, residue is re_part/2π.
        let result = im_part / (2.0 * PI);
        let residue = (re_part / (2.0 * PI)).norm();
        let scale = result.norm();
        if !residue.is_finite() || residue > RESIDUE_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Quadrature {
                residual: residue / scale.max(f64::MIN_POSITIVE),
            });
        }
        Ok(result)
    }

    /// `T_{A(τ)}(t)`.
    pub fn semigroup_at(&self, tau: f64, t: f64) -> Result<Arc<DMatrix<f64>>> {
        check_time(t)?;
        if let Some(v) = self.cache.read().ok().and_then(|c| c.get(&key(tau, t)).cloned()) {
            return Ok(v);
        }
        let value = if t == 0.0 {
            DMatrix::identity(self.fam.dim(), self.fam.dim())
        } else {
            let nodes = self.build_nodes(tau, t, t)?;
            self.integrate(&nodes, t, |_| C64::new(1.0, 0.0))?
        };
        Ok(self.store(tau, t, value))
    }

    fn store(&self, tau: f64, t: f64, value: DMatrix<f64>) -> Arc<DMatrix<f64>> {
        let value = Arc::new(value);
        match self.cache.write() {
            Ok(mut c) => c.entry(key(tau, t)).or_insert(value).clone(),
            Err(_) => value,
        }
    }

    /// `T_{A(τ)}(t)` for several times sharing one set of resolvent solves.
    pub fn semigroup_batch(&self, tau: f64, times: &[f64]) -> Result<Vec<Arc<DMatrix<f64>>>> {
        for &t in times {
            check_time(t)?;
        }
        let missing: Vec<f64> = {
            let cache = self.cache.read().map_err(|_| Error::Domain("cache poisoned".into()))?;
            times
                .iter()
                .copied()
                .filter(|&t| t > 0.0 && !cache.contains_key(&key(tau, t)))
                .collect()
        };
        if !missing.is_empty() {
            let t_min = missing.iter().copied().fold(f64::INFINITY, f64::min);
            let t_max = missing.iter().copied().fold(0.0, f64::max);
            let nodes = self.build_nodes(tau, t_min, t_max)?;
            debug_assert!(missing.iter().all(|&t| nodes.covers(t)));
            for &t in &missing {
                let v = self.integrate(&nodes, t, |_| C64::new(1.0, 0.0))?;
                self.store(tau, t, v);
            }
        }
        times.iter().map(|&t| self.semigroup_at(tau, t)).collect()
    }

    /// Like [`SemigroupEvaluator::semigroup_batch`] but bypasses the cache.
    pub fn semigroup_batch_uncached(&self, tau: f64, times: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        for &t in times {
            check_time(t)?;
        }
        let n = self.fam.dim();
        let positive: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
        if positive.is_empty() {
            return Ok(times.iter().map(|_| DMatrix::identity(n, n)).collect());
        }
        let t_min = positive.iter().copied().fold(f64::INFINITY, f64::min);
        let t_max = positive.iter().copied().fold(0.0, f64::max);
        let nodes = self.build_nodes(tau, t_min, t_max)?;
        times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    Ok(DMatrix::identity(n, n))
                } else {
                    self.integrate(&nodes, t, |_| C64::new(1.0, 0.0))
                }
            })
            .collect()
    }

    /// Fill the cache for many `(τ, times)` groups in parallel.
    pub fn prefill(&self, groups: &[(f64, Vec<f64>)]) -> Result<()> {
        groups
            .par_iter()
            .map(|(tau, ts)| self.semigroup_batch(*tau, ts).map(|_| ()))
            .collect()
    }

    /// `A(τ)·T_{A(τ)}(t)` by the matrix product.
    pub fn a_semigroup_at(&self, tau: f64, t: f64) -> Result<DMatrix<f64>> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("A T(t) needs t > 0, got {t}")));
        }
        let a = self.operator(tau);
        Ok(a.as_ref() * self.semigroup_at(tau, t)?.as_ref())
    }

    /// `A(τ)·T_{A(τ)}(t)` from the contour directly: `−(1/2πi)∫ λ e^{λt}(λ+A)⁻¹ dλ`.
    pub fn a_semigroup_contour(&self, tau: f64, t: f64) -> Result<DMatrix<f64>> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("A T(t) needs t > 0, got {t}")));
        }
        let nodes = self.build_nodes(tau, t, t)?;
        self.integrate(&nodes, t, |l| -l)
    }
}

fn axpy(out: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    for (o, v) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *o += a * v;
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("semigroup time must be finite and ≥ 0, got {t}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::DiscreteSpace;
    use nalgebra::DVector;

    fn constant(a: DMatrix<f64>) -> SemigroupEvaluator {
        let space = Arc::new(DiscreteSpace::euclidean(a.nrows()));
        SemigroupEvaluator::new(OperatorFamily::constant(space, a), Contour::default()).unwrap()
    }

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn diagonal_exponential() {
        let ev = constant(diag(&[1.0, 2.0]));
        let t = ev.semigroup_at(0.3, 1.0).unwrap();
        assert!((t[(0, 0)] - (-1f64).exp()).abs() < 1e-12);
        assert!((t[(1, 1)] - (-2f64).exp()).abs() < 1e-12);
        assert!(t[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn zero_time_is_identity() {
        let ev = constant(diag(&[3.0, 5.0, 7.0]));
        assert_eq!(*ev.semigroup_at(0.0, 0.0).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn a_semigroup_examples() {
        let ev = constant(diag(&[2.0]));
        let v = ev.a_semigroup_at(0.0, 1.0).unwrap()[(0, 0)];
        assert!((v - 2.0 * (-2f64).exp()).abs() < 1e-10);
        let ev = constant(diag(&[1.0, 4.0]));
        let m = ev.a_semigroup_at(0.0, 0.5).unwrap();
        assert!((m[(0, 0)] - (-0.5f64).exp()).abs() < 1e-10);
        assert!((m[(1, 1)] - 4.0 * (-2f64).exp()).abs() < 1e-10);
        let c = ev.a_semigroup_contour(0.0, 0.5).unwrap();
        assert!((c - m).norm() < 1e-10);
        assert!(ev.a_semigroup_at(0.0, 0.0).is_err());
    }

    #[test]
    fn negative_time_rejected() {
        let ev = constant(diag(&[1.0]));
        assert!(ev.semigroup_at(0.0, -1.0).is_err());
        assert!(ev.semigroup_at(0.0, f64::NAN).is_err());
    }

    #[test]
    fn two_ray_mode_agrees_and_residue_small() {
        let a = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 0.0, -0.5, 2.0, 0.3, 0.0, 0.2, 5.0]);
        let space = Arc::new(DiscreteSpace::euclidean(3));
        let fam = OperatorFamily::constant(space, a);
        let sym = SemigroupEvaluator::new(fam.clone(), Contour::default()).unwrap();
        let full = SemigroupEvaluator::new(
            fam,
            Contour {
                conjugate_symmetry: false,
                ..Contour::default()
            },
        )
        .unwrap();
        for t in [0.01, 0.3, 2.0] {
            let x = sym.semigroup_at(0.0, t).unwrap();
            let y = full.semigroup_at(0.0, t).unwrap();
            assert!((x.as_ref() - y.as_ref()).norm() < 1e-12 * x.norm());
        }
    }

    #[test]
    fn batch_matches_single_and_cache_is_stable() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, -1.0, -1.0, 4.0]);
        let ev = constant(a.clone());
        let times = [1e-3, 0.05, 0.5, 3.0];
        let batch = ev.semigroup_batch(0.0, &times).unwrap();
        let other = constant(a);
        for (t, b) in times.iter().zip(&batch) {
            let s = other.semigroup_at(0.0, *t).unwrap();
            assert!((s.as_ref() - b.as_ref()).norm() < 1e-11 * s.norm().max(1e-3));
            let again = ev.semigroup_at(0.0, *t).unwrap();
            assert_eq!(again.as_ref(), b.as_ref());
        }
    }

    #[test]
    fn panels_cover_radius() {
        let c = Contour::default();
        let p = c.panels(0.5, 1000.0);
        assert_eq!(p[0], 0.0);
        assert_eq!(*p.last().unwrap(), 1000.0);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        let p = c.panels(0.5, 0.2);
        assert_eq!(p, vec![0.0, 0.2]);
    }

    #[test]
    fn contour_validation() {
        assert!(Contour::default().validate().is_ok());
        let bad = Contour {
            radius_factor: 10.0,
            ..Contour::default()
        };
        assert!(bad.validate().is_err());
        let pinned = Contour {
            radius_max: Some(10.0),
            ..Contour::default()
        };
        let ev = SemigroupEvaluator::new(
            OperatorFamily::constant(Arc::new(DiscreteSpace::euclidean(1)), diag(&[1.0])),
            pinned,
        )
        .unwrap();
        assert!(ev.semigroup_at(0.0, 0.1).is_err());
        assert!(ev.semigroup_at(0.0, 10.0).is_ok());
    }

    #[test]
    fn diagonal_positive_for_spd() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let ev = constant(a * 50.0);
        for t in [1e-4, 1e-2, 0.1] {
            let m = ev.semigroup_at(0.0, t).unwrap();
            assert!(m.diagonal().iter().all(|&d| d > 0.0));
        }
    }
}
