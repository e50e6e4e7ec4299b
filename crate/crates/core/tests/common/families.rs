use std::f64::consts::PI;
use std::sync::Arc;

use evoproc::problems::spectral_sector_const;
use evoproc::{DiscreteSpace, HypothesisConstants, OperatorFamily};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::random_spd;

/// `A_ε(t) = M⁻¹(K₀ + 0.3 sin(2t) K₁ + ε K₂)` on the space with Grams `M`
/// and `M + K₀`. Self-adjoint in the `M` inner product, spectrum in `[0.7·λ_min(K₀), ∞)`.
pub struct SmoothFamily {
    pub space: Arc<DiscreteSpace>,
    pub m_inv: DMatrix<f64>,
    pub k0: DMatrix<f64>,
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
}

impl SmoothFamily {
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_spd(dim, 0.5, 2.0, &mut rng);
        let k0 = random_spd(dim, 1.0, 20.0, &mut rng);
        let s = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let s = &s + s.transpose();
        let k1 = &s / s.clone().symmetric_eigen().eigenvalues.amax();
        let k2 = random_spd(dim, 0.1, 1.0, &mut rng);
        let space = Arc::new(DiscreteSpace::new(m.clone(), &m + &k0).unwrap());
        SmoothFamily {
            space,
            m_inv: m.try_inverse().unwrap(),
            k0,
            k1,
            k2,
        }
    }

    pub fn member(&self, eps: f64) -> OperatorFamily {
        let (m_inv, k0, k1, k2) = (self.m_inv.clone(), self.k0.clone(), self.k1.clone(), self.k2.clone());
        OperatorFamily::new(self.space.clone(), eps, move |t| {
            &m_inv * (&k0 + &k1 * (0.3 * (2.0 * t).sin()) + &k2 * eps)
        })
        .with_declared(HypothesisConstants {
            phi: 0.75 * PI,
            c_sector: spectral_sector_const(0.75 * PI),
            beta: 0.5,
            delta: 1.0,
            holder_const: 1.0,
        })
    }
}
