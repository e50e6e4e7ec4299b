//! Problem generators: a 1D reaction-diffusion family and a damped wave family.
//!
//! Reaction-diffusion: `u_t − ∂_x(a_ε(t,x)∂_x u) + u = f_ε(t,u)` on `(0,1)`
//! with homogeneous Neumann conditions, cell-centred finite differences,
//! `X = L²` (mass Gram) and `Y = H¹` (mass plus stiffness Gram).
//!
//! Wave: per Dirichlet mode `μ_k = k²` on `(0,π)` with `s = a(t)μ_k`, the
//! generator block is `[[0, −1], [s, 2√s]]` and its fractional powers have the
//! closed form
//!
//! ```text
//! Λ^α  = [[(1−α)s^{α/2},     −α s^{(α−1)/2}],
//!         [α s^{(1+α)/2},    (1+α)s^{α/2}  ]]
//! Λ^−α = [[(1+α)s^{−α/2},     α s^{(−1−α)/2}],
//!         [−α s^{(1−α)/2},   (1−α)s^{−α/2} ]]
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::{HypothesisConstants, OperatorFamily};
use crate::semilinear::Nonlinearity;
use crate::spaces::{DiscreteSpace, Norm};

/// `(t, x, ε) ↦ value`; for reaction terms the second argument is the state `s`.
pub type Coef = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

pub const DEFAULT_PHI: f64 = 3.0 * PI / 4.0;

/// Sector constant valid for any operator with spectrum in `[1, ∞)` on the rays at angle `φ`.
pub fn spectral_sector_const(phi: f64) -> f64 {
    (2.0 / (1.0 + phi.cos())).sqrt()
}

#[derive(Clone)]
pub struct ReactionDiffusionConfig {
    pub n_cells: usize,
    pub a: Coef,
    /// `∂_x a`; approximated by central differences when absent.
    pub a_grad_x: Option<Coef>,
    pub eps_list: Vec<f64>,
    pub f: Coef,
    pub growth_rho: f64,
    /// Time window probed for the coefficient checks.
    pub window: (f64, f64),
    /// Declared Hölder exponent of `a` in `t`.
    pub delta: f64,
    /// Y-radius of the cut-off applied to `f`.
    pub cutoff_radius: Option<f64>,
}

impl std::fmt::Debug for ReactionDiffusionConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReactionDiffusionConfig")
            .field("n_cells", &self.n_cells)
            .field("eps_list", &self.eps_list)
            .field("growth_rho", &self.growth_rho)
            .field("window", &self.window)
            .field("delta", &self.delta)
            .field("cutoff_radius", &self.cutoff_radius)
            .finish()
    }
}

/// What the probe grid showed about the coefficients.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoefficientProbe {
    pub a_min: f64,
    pub a_max: f64,
    /// `max |a(t,x) − a(s,x)| / |t−s|^δ`.
    pub holder_const: f64,
    /// `max |f(t,s)| / (1 + |s|^ρ)` on `|s| ≤ 10`.
    pub growth_const: f64,
}

pub struct RdBundle {
    pub space: Arc<DiscreteSpace>,
    pub fam: OperatorFamily,
    pub nonlinearity: Nonlinearity,
    pub probe: CoefficientProbe,
}

impl ReactionDiffusionConfig {
    /// `a ≡ 1 + ε·0`, `f ≡ 0`.
    pub fn constant_diffusion(n_cells: usize, a: f64) -> Self {
        ReactionDiffusionConfig {
            n_cells,
            a: Arc::new(move |_, _, _| a),
            a_grad_x: None,
            eps_list: vec![0.0],
            f: Arc::new(|_, _, _| 0.0),
            growth_rho: 1.0,
            window: (0.0, 1.0),
            delta: 1.0,
            cutoff_radius: None,
        }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Cell centres `(i + 1/2)h`.
    pub fn centres(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n_cells).map(|i| (i as f64 + 0.5) * h).collect()
    }

    /// Interior faces `(i + 1)h`.
    pub fn faces(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n_cells.saturating_sub(1))
            .map(|i| (i + 1) as f64 * h)
            .collect()
    }

    pub fn a_grad(&self, t: f64, x: f64, eps: f64) -> f64 {
        match &self.a_grad_x {
            Some(g) => g(t, x, eps),
            None => {
                let d = 1e-6;
                ((self.a)(t, x + d, eps) - (self.a)(t, x - d, eps)) / (2.0 * d)
            }
        }
    }

    pub fn probe(&self, eps: f64) -> Result<CoefficientProbe> {
        let (t0, t1) = self.window;
        let nt = 33;
        let ts: Vec<f64> = (0..nt).map(|i| t0 + (t1 - t0) * i as f64 / (nt - 1) as f64).collect();
        let mut xs = self.centres();
        xs.extend(self.faces());
        xs.push(0.0);
        xs.push(1.0);
        let mut a_min = f64::INFINITY;
        let mut a_max = f64::NEG_INFINITY;
        for &t in &ts {
            for &x in &xs {
                let v = (self.a)(t, x, eps);
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Config(format!(
                        "diffusion coefficient a({t}, {x}) = {v} is not positive (eps = {eps})"
                    )));
                }
                a_min = a_min.min(v);
                a_max = a_max.max(v);
            }
        }
        let mut holder_const: f64 = 0.0;
        for i in 0..nt {
            for j in (i + 1)..nt {
                let dt = (ts[j] - ts[i]).powf(self.delta);
                for &x in &xs {
                    let d = ((self.a)(ts[j], x, eps) - (self.a)(ts[i], x, eps)).abs();
                    holder_const = holder_const.max(d / dt);
                }
            }
        }
        let mut growth_const: f64 = 0.0;
        for &t in ts.iter().step_by(4) {
            for k in 0..=200 {
                let s = -10.0 + 0.1 * k as f64;
                let v = (self.f)(t, s, eps).abs();
                growth_const = growth_const.max(v / (1.0 + s.abs().powf(self.growth_rho)));
            }
        }
        Ok(CoefficientProbe {
            a_min,
            a_max,
            holder_const,
            growth_const,
        })
    }

    /// `‖a_ε − a_0‖_∞` and `‖∂_x a_ε − ∂_x a_0‖_∞` on the probe grid.
    pub fn coefficient_gaps(&self, eps: f64) -> (f64, f64) {
        let (t0, t1) = self.window;
        let mut da: f64 = 0.0;
        let mut dg: f64 = 0.0;
        let mut xs = self.centres();
        xs.extend(self.faces());
        for i in 0..33 {
            let t = t0 + (t1 - t0) * i as f64 / 32.0;
            for &x in &xs {
                da = da.max(((self.a)(t, x, eps) - (self.a)(t, x, 0.0)).abs());
                dg = dg.max((self.a_grad(t, x, eps) - self.a_grad(t, x, 0.0)).abs());
            }
        }
        (da, dg)
    }
}

/// Mass and H¹ Gram matrices of the cell-centred mesh.
pub fn rd_space(n_cells: usize) -> Result<DiscreteSpace> {
    if n_cells == 0 {
        return Err(Error::Config("n_cells must be positive".into()));
    }
    let h = 1.0 / n_cells as f64;
    let mass = DMatrix::identity(n_cells, n_cells) * h;
    let mut stiff = DMatrix::zeros(n_cells, n_cells);
    for i in 0..n_cells.saturating_sub(1) {
        stiff[(i, i)] += 1.0 / h;
        stiff[(i + 1, i + 1)] += 1.0 / h;
        stiff[(i, i + 1)] -= 1.0 / h;
        stiff[(i + 1, i)] -= 1.0 / h;
    }
    DiscreteSpace::new(mass.clone(), mass + stiff)
}

/// `−∂_x(a ∂_x ·) + I` with face coefficients `a_face` (length `n − 1`).
pub fn rd_matrix(a_face: &[f64], h: f64) -> DMatrix<f64> {
    let n = a_face.len() + 1;
    let mut m = DMatrix::identity(n, n);
    let k = 1.0 / (h * h);
    for (i, &a) in a_face.iter().enumerate() {
        m[(i, i)] += a * k;
        m[(i + 1, i + 1)] += a * k;
        m[(i, i + 1)] -= a * k;
        m[(i + 1, i)] -= a * k;
    }
    m
}

pub fn build_reaction_diffusion(cfg: &ReactionDiffusionConfig, eps: f64) -> Result<RdBundle> {
    if cfg.n_cells < 2 {
        return Err(Error::Config("reaction-diffusion needs at least 2 cells".into()));
    }
    if !(cfg.delta > 0.0 && cfg.delta <= 1.0) {
        return Err(Error::Config(format!("delta = {} not in (0, 1]", cfg.delta)));
    }
    if !(cfg.growth_rho >= 1.0 && cfg.growth_rho < 3.0) {
        return Err(Error::Config(format!("growth_rho = {} not in [1, 3)", cfg.growth_rho)));
    }
    let probe = cfg.probe(eps)?;
    let space = Arc::new(rd_space(cfg.n_cells)?);
    let faces = cfg.faces();
    let h = cfg.h();
    let a = cfg.a.clone();
    let declared = HypothesisConstants {
        phi: DEFAULT_PHI,
        c_sector: spectral_sector_const(DEFAULT_PHI),
        beta: 0.5,
        delta: cfg.delta,
        holder_const: probe.holder_const.max(f64::MIN_POSITIVE),
    };
    let fam = OperatorFamily::new(space.clone(), eps, move |t| {
        let af: Vec<f64> = faces.iter().map(|&x| a(t, x, eps)).collect();
        rd_matrix(&af, h)
    })
    .with_declared(declared);
    let f = cfg.f.clone();
    let mut nonlinearity = Nonlinearity::pointwise(space.clone(), move |t, s| f(t, s, eps));
    if let Some(r) = cfg.cutoff_radius {
        nonlinearity = nonlinearity.with_cutoff(r, cfg.window)?;
    }
    Ok(RdBundle {
        space,
        fam,
        nonlinearity,
        probe,
    })
}

#[derive(Clone)]
pub struct WaveConfig {
    pub n_modes: usize,
    pub a: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub alpha_list: Vec<f64>,
    /// Nonlinearity on the `(u, v)` state; `None` means `F ≡ 0`.
    pub f: Option<Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>>,
    pub window: (f64, f64),
}

impl std::fmt::Debug for WaveConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveConfig")
            .field("n_modes", &self.n_modes)
            .field("alpha_list", &self.alpha_list)
            .field("window", &self.window)
            .finish()
    }
}

pub struct WaveBundle {
    pub space: Arc<DiscreteSpace>,
    pub fam: OperatorFamily,
    pub nonlinearity: Nonlinearity,
}

/// `s^e` with the exponents 0, 1/2, 1 (and their negatives) evaluated exactly.
fn spow(s: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        s
    } else if e == 0.5 {
        s.sqrt()
    } else if e == -1.0 {
        1.0 / s
    } else if e == -0.5 {
        1.0 / s.sqrt()
    } else {
        s.powf(e)
    }
}

/// 2×2 block of `Λ^α` for `s = a(t)μ_k`.
pub fn lambda_power_block(s: f64, alpha: f64) -> [[f64; 2]; 2] {
    [
        [
            (1.0 - alpha) * spow(s, alpha / 2.0),
            -alpha * spow(s, (alpha - 1.0) / 2.0),
        ],
        [
            alpha * spow(s, (1.0 + alpha) / 2.0),
            (1.0 + alpha) * spow(s, alpha / 2.0),
        ],
    ]
}

/// 2×2 block of `Λ^{−α}`.
pub fn lambda_inverse_power_block(s: f64, alpha: f64) -> [[f64; 2]; 2] {
    [
        [
            (1.0 + alpha) * spow(s, -alpha / 2.0),
            alpha * spow(s, (-1.0 - alpha) / 2.0),
        ],
        [
            -alpha * spow(s, (1.0 - alpha) / 2.0),
            (1.0 - alpha) * spow(s, -alpha / 2.0),
        ],
    ]
}

fn block_diag(blocks: impl Iterator<Item = [[f64; 2]; 2]>, n_modes: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for (k, b) in blocks.enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                m[(2 * k + i, 2 * k + j)] = b[i][j];
            }
        }
    }
    m
}

impl WaveConfig {
    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.n_modes).map(|k| (k * k) as f64).collect()
    }

    fn check(&self, alpha: f64) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::Config("n_modes must be positive".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("alpha = {alpha} not in (0, 1]")));
        }
        let (t0, t1) = self.window;
        for i in 0..=32 {
            let t = t0 + (t1 - t0) * i as f64 / 32.0;
            let v = (self.a)(t);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("wave coefficient a({t}) = {v} is not positive")));
            }
        }
        Ok(())
    }

    /// `Λ(t)^α`, block diagonal over the modes.
    pub fn power(&self, alpha: f64, t: f64) -> DMatrix<f64> {
        let a = (self.a)(t);
        block_diag(
            self.eigenvalues()
                .into_iter()
                .map(|mu| lambda_power_block(a * mu, alpha)),
            self.n_modes,
        )
    }

    /// `Λ(t)^{−α}` from the closed form.
    pub fn inverse_power(&self, alpha: f64, t: f64) -> DMatrix<f64> {
        let a = (self.a)(t);
        block_diag(
            self.eigenvalues()
                .into_iter()
                .map(|mu| lambda_inverse_power_block(a * mu, alpha)),
            self.n_modes,
        )
    }

    /// `Λ(t)` assembled directly as `[[0, −1], [s, 2√s]]`.
    pub fn generator(&self, t: f64) -> DMatrix<f64> {
        let a = (self.a)(t);
        block_diag(
            self.eigenvalues().into_iter().map(|mu| {
                let s = a * mu;
                [[0.0, -1.0], [s, 2.0 * s.sqrt()]]
            }),
            self.n_modes,
        )
    }

    /// `max_t ‖Λ(t)^{−α} − Λ(t)^{−1}‖_{L(X)}` over the samples.
    pub fn inverse_power_gap(&self, space: &DiscreteSpace, alpha: f64, t_samples: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &t in t_samples {
            let d = self.inverse_power(alpha, t) - self.inverse_power(1.0, t);
            worst = worst.max(space.op_norm(&d, Norm::X, Norm::X)?);
        }
        Ok(worst)
    }
}

/// `X = Y = E^{1/2} × E`: Gram `diag(μ_k, 1)` per mode.
pub fn wave_space(n_modes: usize) -> Result<DiscreteSpace> {
    let mut d = Vec::with_capacity(2 * n_modes);
    for k in 1..=n_modes {
        d.push((k * k) as f64);
        d.push(1.0);
    }
    let g = DMatrix::from_diagonal(&DVector::from_vec(d));
    DiscreteSpace::new(g.clone(), g)
}

pub fn build_wave(cfg: &WaveConfig, alpha: f64) -> Result<WaveBundle> {
    cfg.check(alpha)?;
    let space = Arc::new(wave_space(cfg.n_modes)?);
    let c = cfg.clone();
    let declared = HypothesisConstants {
        phi: DEFAULT_PHI,
        c_sector: 1.0,
        beta: 1.0,
        delta: 1.0,
        holder_const: 1.0,
    };
    let fam = OperatorFamily::new(space.clone(), 1.0 - alpha, move |t| c.power(alpha, t)).with_declared(declared);
    let nonlinearity = match &cfg.f {
        None => Nonlinearity::zero(space.clone()),
        Some(f) => {
            let f = f.clone();
            Nonlinearity::new(space.clone(), 0.0, 0.0, move |t, u| f(t, u))
        }
    };
    Ok(WaveBundle {
        space,
        fam,
        nonlinearity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cell_matrix() {
        let b = build_reaction_diffusion(&ReactionDiffusionConfig::constant_diffusion(2, 1.0), 0.0).unwrap();
        let k = 1.0 / 0.25;
        let expect = DMatrix::from_row_slice(2, 2, &[1.0 + k, -k, -k, 1.0 + k]);
        assert_eq!(b.fam.at(0.3), expect);
    }

    #[test]
    fn neumann_laplacian_smallest_eigenvalue_is_one() {
        let b = build_reaction_diffusion(&ReactionDiffusionConfig::constant_diffusion(32, 1.0), 0.0).unwrap();
        let eig = b.fam.at(0.0).symmetric_eigenvalues();
        assert!((eig.min() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nonpositive_coefficient_rejected() {
        let mut cfg = ReactionDiffusionConfig::constant_diffusion(4, 1.0);
        cfg.a = Arc::new(|t, _, _| t - 0.5);
        assert!(matches!(build_reaction_diffusion(&cfg, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn rd_operator_is_mass_symmetric_with_spectrum_above_one() {
        let mut cfg = ReactionDiffusionConfig::constant_diffusion(16, 1.0);
        cfg.a = Arc::new(|t, x, e| 2.0 + t.sin() * (PI * x).cos() + e * x);
        let b = build_reaction_diffusion(&cfg, 0.1).unwrap();
        let a = b.fam.at(0.7);
        let ma = b.space.gram(Norm::X) * &a;
        assert!((&ma - ma.transpose()).amax() < 1e-12 * ma.amax());
        assert!(a.symmetric_eigenvalues().min() >= 1.0 - 1e-10);
    }

    #[test]
    fn wave_blocks() {
        let b = lambda_power_block(7.3, 1.0);
        assert_eq!(b, [[0.0, -1.0], [7.3, 2.0 * 7.3f64.sqrt()]]);
        assert_eq!(lambda_power_block(1.0, 0.5), [[0.5, -0.5], [0.5, 1.5]]);
        let cfg = WaveConfig {
            n_modes: 5,
            a: Arc::new(|t: f64| 1.5 + 0.4 * t.sin()),
            alpha_list: vec![1.0],
            f: None,
            window: (0.0, 1.0),
        };
        assert_eq!(cfg.power(1.0, 0.4), cfg.generator(0.4));
        for alpha in [0.3, 0.8, 1.0] {
            let p = cfg.power(alpha, 0.2) * cfg.inverse_power(alpha, 0.2);
            assert!((p - DMatrix::identity(10, 10)).amax() < 1e-12);
        }
        assert!(build_wave(&cfg, 0.0).is_err());
        assert!(build_wave(&cfg, 1.1).is_err());
    }

    #[test]
    fn half_power_squares_to_generator() {
        for s in [1.0, 4.0, 37.5] {
            let h = lambda_power_block(s, 0.5);
            let sq = [
                [
                    h[0][0] * h[0][0] + h[0][1] * h[1][0],
                    h[0][0] * h[0][1] + h[0][1] * h[1][1],
                ],
                [
                    h[1][0] * h[0][0] + h[1][1] * h[1][0],
                    h[1][0] * h[0][1] + h[1][1] * h[1][1],
                ],
            ];
            let g = lambda_power_block(s, 1.0);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((sq[i][j] - g[i][j]).abs() < 1e-12 * s.max(1.0));
                }
            }
        }
    }
}
