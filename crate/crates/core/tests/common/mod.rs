//! Reference solutions used by the integration tests. None of this goes through
//! the contour or Volterra machinery of the library.
#![allow(dead_code)]

pub mod families;
pub mod invariants;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// `exp(−tA)` for `A = M⁻¹K` with `M`, `K` symmetric positive definite,
/// through the symmetric eigendecomposition of `M^{-1/2} K M^{-1/2}`.
pub fn expm_gram_symmetric(m: &DMatrix<f64>, k: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let me = m.clone().symmetric_eigen();
    let half =
        &me.eigenvectors * DMatrix::from_diagonal(&me.eigenvalues.map(|v| v.sqrt())) * me.eigenvectors.transpose();
    let half_inv = &me.eigenvectors
        * DMatrix::from_diagonal(&me.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * me.eigenvectors.transpose();
    let s = &half_inv * k * &half_inv;
    let s = (&s + s.transpose()) * 0.5;
    let se = s.symmetric_eigen();
    let e = &se.eigenvectors
        * DMatrix::from_diagonal(&se.eigenvalues.map(|l| (-l * t).exp()))
        * se.eigenvectors.transpose();
    half_inv * e * half
}

/// `exp(−tA)` for `A = V diag(d) V⁻¹`.
pub fn expm_diagonalizable(v: &DMatrix<f64>, d: &[f64], t: f64) -> DMatrix<f64> {
    let vi = v.clone().try_inverse().expect("invertible eigenvector matrix");
    v * DMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|l| (-l * t).exp()))) * vi
}

pub fn random_spd(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
    let d = DVector::from_fn(n, |_, _| lo * (hi / lo).powf(rng.gen_range(0.0..1.0)));
    &q * DMatrix::from_diagonal(&d) * q.transpose()
}

/// Dormand–Prince 5(4) with standard step-size control.
pub struct Rk45 {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub max_steps: usize,
}

impl Default for Rk45 {
    fn default() -> Self {
        Rk45 {
            rtol: 1e-11,
            atol: 1e-13,
            h0: 1e-5,
            max_steps: 2_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl Rk45 {
    /// Integrate `y' = f(t, y)` from `t0` and return the state at each of `outputs` (increasing, ≥ t0).
    pub fn solve(
        &self,
        f: impl Fn(f64, &DMatrix<f64>) -> DMatrix<f64>,
        t0: f64,
        y0: DMatrix<f64>,
        outputs: &[f64],
    ) -> Vec<DMatrix<f64>> {
        let mut t = t0;
        let mut y = y0;
        let mut h = self.h0;
        let mut out = Vec::with_capacity(outputs.len());
        let mut steps = 0;
        for &target in outputs {
            while t < target {
                if target - t < 1e-14 * target.abs().max(1.0) {
                    t = target;
                    break;
                }
                let step = h.min(target - t);
                let mut k: Vec<DMatrix<f64>> = Vec::with_capacity(7);
                for s in 0..7 {
                    let mut yi = y.clone();
                    for (j, kj) in k.iter().enumerate() {
                        if A[s][j] != 0.0 {
                            yi += kj * (step * A[s][j]);
                        }
                    }
                    k.push(f(t + C[s] * step, &yi));
                }
                let mut y5 = y.clone();
                let mut err = DMatrix::zeros(y.nrows(), y.ncols());
                for s in 0..7 {
                    y5 += &k[s] * (step * B5[s]);
                    err += &k[s] * (step * (B5[s] - B4[s]));
                }
                let mut e: f64 = 0.0;
                for (ev, (a, b)) in err.iter().zip(y.iter().zip(y5.iter())) {
                    let sc = self.atol + self.rtol * a.abs().max(b.abs());
                    e = e.max((ev / sc).abs());
                }
                if e <= 1.0 {
                    t += step;
                    y = y5;
                }
                let fac = if e == 0.0 {
                    5.0
                } else {
                    (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = step * fac;
                steps += 1;
                assert!(steps < self.max_steps, "reference integrator exceeded its step budget");
            }
            out.push(y.clone());
        }
        out
    }
}

/// `U(t_m, τ)` for `U' = −A(t)U`, `U(τ) = I`.
pub fn process_reference(a: impl Fn(f64) -> DMatrix<f64>, tau: f64, times: &[f64], rk: &Rk45) -> Vec<DMatrix<f64>> {
    let n = a(tau).nrows();
    rk.solve(|t, u| -(a(t) * u), tau, DMatrix::identity(n, n), times)
}

/// Method-of-lines solution of `u' = −A(t)u + F(t,u)`.
pub fn semilinear_reference(
    a: impl Fn(f64) -> DMatrix<f64>,
    f: impl Fn(f64, &DVector<f64>) -> DVector<f64>,
    tau: f64,
    u0: &DVector<f64>,
    times: &[f64],
    rk: &Rk45,
) -> Vec<DVector<f64>> {
    let n = u0.len();
    let y0 = DMatrix::from_column_slice(n, 1, u0.as_slice());
    rk.solve(
        |t, y| {
            let u = y.column(0).into_owned();
            let r = -(a(t) * &u) + f(t, &u);
            DMatrix::from_column_slice(n, 1, r.as_slice())
        },
        tau,
        y0,
        times,
    )
    .into_iter()
    .map(|m| m.column(0).into_owned())
    .collect()
}
