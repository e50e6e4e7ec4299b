//! Finite-dimensional Banach pair `Y ⊂ X`.
//!
//! Both norms come from SPD Gram matrices, `‖u‖² = uᵀ G u`. Operator norms
//! between the two are computed exactly as the largest singular value of
//! `R_to · M · R_from⁻¹`, where `G = RᵀR` is the Cholesky factorisation.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Which norm of the pair to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Norm {
    X,
    Y,
}

/// Relative tolerance for symmetry and for the eigenvalue ratio of a Gram matrix.
pub const SPD_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Factor {
    gram: DMatrix<f64>,
    upper: DMatrix<f64>,
    upper_inv: DMatrix<f64>,
}

impl Factor {
    fn new(which: &'static str, gram: DMatrix<f64>) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: gram.ncols(),
            });
        }
        let scale = gram.amax().max(f64::MIN_POSITIVE);
        let asym = (&gram - gram.transpose()).amax();
        let eigs = gram.clone().symmetric_eigenvalues();
        let min_eig = eigs.min();
        let max_eig = eigs.max();
        if asym > SPD_TOL * scale || !(min_eig > SPD_TOL * max_eig) || max_eig <= 0.0 {
            return Err(Error::NotSpd {
                which,
                min_eig,
                max_eig,
            });
        }
        let chol = gram.clone().cholesky().ok_or(Error::NotSpd {
            which,
            min_eig,
            max_eig,
        })?;
        let upper = chol.l().transpose();
        let upper_inv = upper
            .clone()
            .solve_upper_triangular(&DMatrix::identity(n, n))
            .ok_or(Error::NotSpd {
                which,
                min_eig,
                max_eig,
            })?;
        Ok(Factor { gram, upper, upper_inv })
    }
}

/// Finite-dimensional stand-in for the pair `Y ↪ X`.
#[derive(Clone, Debug)]
pub struct DiscreteSpace {
    dim: usize,
    x: Factor,
    y: Factor,
    embed_const: f64,
}

impl DiscreteSpace {
    pub fn new(gram_x: DMatrix<f64>, gram_y: DMatrix<f64>) -> Result<Self> {
        let dim = gram_x.nrows();
        if gram_y.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: gram_y.nrows(),
            });
        }
        let x = Factor::new("X", gram_x)?;
        let y = Factor::new("Y", gram_y)?;
        let mut space = DiscreteSpace {
            dim,
            x,
            y,
            embed_const: 0.0,
        };
        space.embed_const = space.op_norm(&DMatrix::identity(dim, dim), Norm::Y, Norm::X)?;
        Ok(space)
    }

    /// Euclidean space of dimension `dim` with `X = Y`.
    pub fn euclidean(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), DMatrix::identity(dim, dim)).expect("identity Gram matrices are SPD")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gram(&self, which: Norm) -> &DMatrix<f64> {
        &self.factor(which).gram
    }

    /// Smallest `C` with `‖u‖_X ≤ C ‖u‖_Y`.
    pub fn embed_const(&self) -> f64 {
        self.embed_const
    }

    fn factor(&self, which: Norm) -> &Factor {
        match which {
            Norm::X => &self.x,
            Norm::Y => &self.y,
        }
    }

    pub fn norm(&self, u: &DVector<f64>, which: Norm) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: u.len(),
            });
        }
        Ok(self.norm_unchecked(u, which))
    }

    pub(crate) fn norm_unchecked(&self, u: &DVector<f64>, which: Norm) -> f64 {
        (&self.factor(which).upper * u).norm()
    }

    /// Weighted operator norm of `m` viewed as a map on this space.
    pub fn op_norm(&self, m: &DMatrix<f64>, from: Norm, to: Norm) -> Result<f64> {
        op_norm_between(self, from, self, to, m)
    }

    /// Weighted operator norm of a complex matrix (e.g. a resolvent).
    pub fn op_norm_complex(&self, m: &DMatrix<C64>, from: Norm, to: Norm) -> Result<f64> {
        check_shape(m.nrows(), m.ncols(), self.dim, self.dim)?;
        let r_to = self.factor(to).upper.map(|v| C64::new(v, 0.0));
        let r_from_inv = self.factor(from).upper_inv.map(|v| C64::new(v, 0.0));
        Ok(max_singular_value_c(&(r_to * m * r_from_inv)))
    }
}

fn check_shape(rows: usize, cols: usize, exp_rows: usize, exp_cols: usize) -> Result<()> {
    if cols != exp_cols {
        return Err(Error::DimensionMismatch {
            expected: exp_cols,
            got: cols,
        });
    }
    if rows != exp_rows {
        return Err(Error::DimensionMismatch {
            expected: exp_rows,
            got: rows,
        });
    }
    Ok(())
}

/// `‖M‖` as a map from `(space_from, from)` to `(space_to, to)`.
pub fn op_norm_between(
    space_from: &DiscreteSpace,
    from: Norm,
    space_to: &DiscreteSpace,
    to: Norm,
    m: &DMatrix<f64>,
) -> Result<f64> {
    check_shape(m.nrows(), m.ncols(), space_to.dim, space_from.dim)?;
    let w = &space_to.factor(to).upper * m * &space_from.factor(from).upper_inv;
    Ok(max_singular_value(&w))
}

pub(crate) fn max_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub(crate) fn max_singular_value_c(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn euclidean_norms() {
        let s = DiscreteSpace::euclidean(2);
        assert_eq!(s.norm(&DVector::from_vec(vec![3.0, 4.0]), Norm::X).unwrap(), 5.0);
        assert_eq!(s.norm(&DVector::zeros(2), Norm::Y).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_direct_formula() {
        let gx = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let s = DiscreteSpace::new(gx, DMatrix::identity(2, 2)).unwrap();
        let v = s.norm(&DVector::from_vec(vec![1.0, 1.0]), Norm::X).unwrap();
        assert!((v - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = DiscreteSpace::euclidean(3);
        let err = s.norm(&DVector::zeros(2), Norm::X).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 2 }));
        let err = s.op_norm(&DMatrix::zeros(3, 2), Norm::X, Norm::X).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn rejects_non_spd() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            DiscreteSpace::new(g, DMatrix::identity(2, 2)),
            Err(Error::NotSpd { which: "X", .. })
        ));
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(DiscreteSpace::new(DMatrix::identity(2, 2), g).is_err());
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14]));
        assert!(DiscreteSpace::new(g, DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn op_norm_trivial_cases() {
        let s = DiscreteSpace::euclidean(2);
        let id = DMatrix::<f64>::identity(2, 2);
        assert!((s.op_norm(&id, Norm::X, Norm::X).unwrap() - 1.0).abs() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -3.0]));
        assert!((s.op_norm(&d, Norm::X, Norm::Y).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn op_norm_matches_brute_force_maximisation() {
        // gram_x = diag(4,1) on the source side, identity on the target side.
        let from = DiscreteSpace::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let to = DiscreteSpace::euclidean(2);
        let m = DMatrix::<f64>::identity(2, 2);
        let exact = op_norm_between(&from, Norm::X, &to, Norm::X, &m).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut best: f64 = 0.0;
        for _ in 0..20_000 {
            let u = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let q = to.norm(&(&m * &u), Norm::X).unwrap() / from.norm(&u, Norm::X).unwrap();
            best = best.max(q);
        }
        assert!((best - 1.0).abs() < 1e-3, "brute force {best}");
        assert!((exact - 1.0).abs() < 1e-14, "exact {exact}");
        assert!(best <= exact + 1e-12);
    }

    #[test]
    fn embed_constant_bounds_norm_ratio() {
        let gx = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5]));
        let gy = DMatrix::from_row_slice(3, 3, &[3.0, 0.5, 0.0, 0.5, 2.0, 0.1, 0.0, 0.1, 1.0]);
        let s = DiscreteSpace::new(gx, gy).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let u = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let lhs = s.norm(&u, Norm::X).unwrap();
            let rhs = s.embed_const() * s.norm(&u, Norm::Y).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn complex_op_norm_of_real_matrix_agrees() {
        let gx = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let s = DiscreteSpace::new(gx.clone(), gx).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let mc = m.map(|v| C64::new(v, 0.0));
        let a = s.op_norm(&m, Norm::X, Norm::Y).unwrap();
        let b = s.op_norm_complex(&mc, Norm::X, Norm::Y).unwrap();
        assert!((a - b).abs() < 1e-13 * a);
    }
}
