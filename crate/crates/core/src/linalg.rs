//! Small dense helpers shared by the operator modules.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::spaces::C64;

/// Systems whose 1-norm condition number exceeds this are treated as singular.
pub fn singular_threshold() -> f64 {
    1.0 / (100.0 * f64::EPSILON)
}

fn norm1<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse plus its 1-norm condition number, or `None` if LU breaks down.
fn checked_inverse<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Option<(DMatrix<T>, f64)> {
    let inv = m.clone().lu().try_inverse()?;
    let cond = norm1(m) * norm1(&inv);
    if !cond.is_finite() || cond > singular_threshold() {
        return None;
    }
    Some((inv, cond))
}

pub fn inverse(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    checked_inverse(m).map(|(inv, _)| inv).ok_or_else(|| Error::Singular {
        t,
        lambda_re: 0.0,
        lambda_im: 0.0,
        cond: condition_or_inf(m),
    })
}

/// `(λI + A)⁻¹` for a real `A`.
pub fn shifted_inverse(a: &DMatrix<f64>, lambda: C64, t: f64) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    let mut m = a.map(|v| C64::new(v, 0.0));
    for i in 0..n {
        m[(i, i)] += lambda;
    }
    checked_inverse(&m).map(|(inv, _)| inv).ok_or_else(|| Error::Singular {
        t,
        lambda_re: lambda.re,
        lambda_im: lambda.im,
        cond: condition_or_inf(&m),
    })
}

fn condition_or_inf<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    match m.clone().lu().try_inverse() {
        Some(inv) => norm1(m) * norm1(&inv),
        None => f64::INFINITY,
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}
