//! Property suites shared by the `properties` and `acceptance` targets.
//! Every runner draws from the same deterministic ChaCha stream.

use std::f64::consts::PI;

use evoproc::family::{check_sector, eta, ratio_gap, resolvent_ratio_gap, sector_samples, xi};
use evoproc::process::{process_bounds, propagate, solve_phi, PhiMethod, ProcessScope, TimeGrid};
use evoproc::semilinear::{solve_semilinear, Nonlinearity, PicardOptions};
use evoproc::{Contour, Norm, SemigroupEvaluator, C64};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use super::families::SmoothFamily;

pub fn runner(cases: u32) -> TestRunner {
    let cfg = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn family_strategy() -> impl Strategy<Value = (usize, u64)> {
    (3usize..=5, any::<u64>())
}

fn sector_point(r: f64, arg: f64) -> C64 {
    C64::from_polar(r, arg)
}

fn fail(e: impl std::fmt::Display) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

pub fn resolvent_identity(cases: u32) -> Result<(), String> {
    let strat = (
        family_strategy(),
        0.0..2.0f64,
        0.1..50.0f64,
        -2.3..2.3f64,
        0.1..50.0f64,
        -2.3..2.3f64,
    );
    runner(cases)
        .run(&strat, |((dim, seed), t, r1, a1, r2, a2)| {
            let fam = SmoothFamily::random(dim, seed).member(0.0);
            let (l, m) = (sector_point(r1, a1), sector_point(r2, a2));
            let rl = fam.resolvent(t, l).map_err(fail)?;
            let rm = fam.resolvent(t, m).map_err(fail)?;
            let lhs = &rl - &rm;
            let rhs = (&rl * &rm) * (m - l);
            let err = (&lhs - &rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-300);
            prop_assert!(err <= 1e-10 || lhs.norm() < 1e-14, "relative error {err:e}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn op_norm_submultiplicative(cases: u32) -> Result<(), String> {
    let strat = (family_strategy(), any::<u64>());
    runner(cases)
        .run(&strat, |((dim, seed), mseed)| {
            let space = SmoothFamily::random(dim, seed).space.clone();
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(mseed);
            let mut mat = || DMatrix::from_fn(dim, dim, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
            let (a, b) = (mat(), mat());
            let ab = &a * &b;
            for (from, mid, to) in [
                (Norm::X, Norm::X, Norm::X),
                (Norm::X, Norm::Y, Norm::Y),
                (Norm::X, Norm::X, Norm::Y),
                (Norm::Y, Norm::X, Norm::Y),
            ] {
                let lhs = space.op_norm(&ab, from, to).map_err(fail)?;
                let rhs = space.op_norm(&a, mid, to).map_err(fail)? * space.op_norm(&b, from, mid).map_err(fail)?;
                prop_assert!(
                    lhs <= rhs * (1.0 + 1e-12),
                    "{lhs} > {rhs} for {from:?}->{mid:?}->{to:?}"
                );
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn semigroup_property(cases: u32) -> Result<(), String> {
    let strat = (family_strategy(), 0.0..1.0f64, 0.01..1.0f64, 0.01..1.0f64);
    runner(cases)
        .run(&strat, |((dim, seed), tau, t, s)| {
            let ev = SemigroupEvaluator::new(SmoothFamily::random(dim, seed).member(0.0), Contour::default())
                .map_err(fail)?;
            let prod =
                ev.semigroup_at(tau, t).map_err(fail)?.as_ref() * ev.semigroup_at(tau, s).map_err(fail)?.as_ref();
            let sum = ev.semigroup_at(tau, t + s).map_err(fail)?;
            let err = (&prod - sum.as_ref()).norm() / sum.norm();
            prop_assert!(err <= 1e-8, "relative error {err:e}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// `(t−τ)^{1−δ}‖Φ(t,τ)‖` finite and within a factor 1.25 under grid refinement.
pub fn phi_singularity_bound(cases: u32) -> Result<(), String> {
    let strat = family_strategy();
    runner(cases)
        .run(&strat, |(dim, seed)| {
            let fam = SmoothFamily::random(dim, seed).member(0.5);
            let ev = SemigroupEvaluator::new(fam.clone(), Contour::default()).map_err(fail)?;
            let coarse = TimeGrid::graded(0.0, 1.0, 16, 2.0).map_err(fail)?;
            let b1 = solve_phi(&ev, &coarse, PhiMethod::ProductIntegration)
                .map_err(fail)?
                .singularity_bound(&fam)
                .map_err(fail)?;
            let b2 = solve_phi(&ev, &coarse.refined(), PhiMethod::ProductIntegration)
                .map_err(fail)?
                .singularity_bound(&fam)
                .map_err(fail)?;
            prop_assert!(b1.is_finite() && b2.is_finite());
            prop_assert!(
                b2 <= 1.25 * b1 && b1 <= 1.25 * b2,
                "bound {b1} vs {b2} after refinement"
            );
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Once the sweep change falls below the first-iterate scale it shrinks geometrically.
pub fn picard_contraction(cases: u32) -> Result<(), String> {
    let strat = (family_strategy(), 0.1..3.0f64);
    runner(cases)
        .run(&strat, |((dim, seed), amp)| {
            let sf = SmoothFamily::random(dim, seed);
            let fam = sf.member(0.0);
            let ev = SemigroupEvaluator::new(fam, Contour::default()).map_err(fail)?;
            let grid = TimeGrid::graded(0.0, 1.0, 16, 2.0).map_err(fail)?;
            let p = propagate(&ev, &grid, PhiMethod::ProductIntegration, ProcessScope::AllPairs).map_err(fail)?;
            let f = Nonlinearity::pointwise(sf.space.clone(), |t, s| s.tanh() + t.sin())
                .with_cutoff(10.0, (0.0, 1.0))
                .map_err(fail)?;
            let u0 = DVector::from_fn(dim, |i, _| amp * ((i + 1) as f64).cos());
            let tr = solve_semilinear(&p, &f, &u0, &grid, PicardOptions::default()).map_err(fail)?;
            let h = &tr.picard_history;
            prop_assert!(*h.last().unwrap() <= 1e-8, "no convergence: {h:?}");
            let first = h[0];
            let tail: Vec<f64> = h.iter().copied().skip_while(|&v| v >= first).collect();
            for w in tail.windows(2) {
                prop_assert!(w[1] <= 0.5 * w[0] || w[1] <= 1e-12, "not contracting: {h:?}");
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// `‖A_ε(λ+A_ε)⁻¹ − A_0(λ+A_0)⁻¹‖ ≤ C|λ|η` with `C` assembled from the sector report.
pub fn resolvent_ratio_bound(cases: u32) -> Result<(), String> {
    let strat = (family_strategy(), 0.05..1.0f64);
    runner(cases)
        .run(&strat, |((dim, seed), eps)| {
            let sf = SmoothFamily::random(dim, seed);
            let (fe, f0) = (sf.member(eps), sf.member(0.0));
            let ts = [0.0, 0.3, 0.7, 1.0];
            let se = check_sector(&fe, 0.75 * PI, &ts, 8).map_err(fail)?;
            let s0 = check_sector(&f0, 0.75 * PI, &ts, 8).map_err(fail)?;
            let c = se.worst_a_res_x * s0.worst_a_res_x * sf.space.embed_const();
            let e = eta(&fe, &f0, &ts).map_err(fail)?;
            for &t in &ts {
                for l in sector_samples(0.75 * PI, 8) {
                    let g = resolvent_ratio_gap(&fe, &f0, t, l).map_err(fail)?;
                    let bound = c * l.norm() * e;
                    prop_assert!(g <= 1.1 * bound + 1e-13, "gap {g} > C|λ|η = {bound} at λ = {l}");
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// `‖A_ε(t)A_ε(τ)⁻¹ − A_0(t)A_0(τ)⁻¹‖ ≤ C_θ|t−τ|^{δ(1−θ)}ξ^θ` for θ ∈ {0, 1/2, 1}:
/// `C_1 = 1` by definition of ξ, `C_0` is fitted, and `C_{1/2}` must not exceed `1.1·√C_0`.
pub fn interpolated_ratio_bound(cases: u32) -> Result<(), String> {
    let strat = (family_strategy(), 0.05..1.0f64);
    runner(cases)
        .run(&strat, |((dim, seed), eps)| {
            let sf = SmoothFamily::random(dim, seed);
            let (fe, f0) = (sf.member(eps), sf.member(0.0));
            let ts: Vec<f64> = (0..9).map(|k| k as f64 / 8.0).collect();
            let x = xi(&fe, &f0, &ts, &ts).map_err(fail)?;
            let delta = 1.0;
            let mut c0: f64 = 0.0;
            let mut c_half: f64 = 0.0;
            for &t in &ts {
                for &tau in &ts {
                    let g = ratio_gap(&fe, &f0, t, tau).map_err(fail)?;
                    prop_assert!(g <= x * (1.0 + 1e-12), "gap {g} above xi {x}");
                    if t != tau {
                        let d = (t - tau).abs();
                        c0 = c0.max(g / d.powf(delta));
                        c_half = c_half.max(g / (d.powf(0.5 * delta) * x.sqrt()));
                    }
                }
            }
            prop_assert!(c0.is_finite());
            prop_assert!(c_half <= 1.1 * c0.sqrt(), "C_1/2 = {c_half}, sqrt(C_0) = {}", c0.sqrt());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// `sup_{t ∈ [1e−3, 1]} t^{1−β}‖T(t)‖_{L(X,Y)}` is finite and does not move when the
/// sampling is refined.
pub fn smoothing_bound(cases: u32) -> Result<(), String> {
    let strat = (family_strategy(), 0.0..1.0f64);
    runner(cases)
        .run(&strat, |((dim, seed), tau)| {
            let sf = SmoothFamily::random(dim, seed);
            let ev = SemigroupEvaluator::new(sf.member(0.0), Contour::default()).map_err(fail)?;
            let sup = |n: usize| -> Result<f64, TestCaseError> {
                let mut s: f64 = 0.0;
                for k in 0..=n {
                    let t = 1e-3 * 1e3f64.powf(k as f64 / n as f64);
                    let tm = ev.semigroup_at(tau, t).map_err(fail)?;
                    s = s.max(t.sqrt() * sf.space.op_norm(&tm, Norm::X, Norm::Y).map_err(fail)?);
                }
                Ok(s)
            };
            let (s1, s2) = (sup(48)?, sup(96)?);
            prop_assert!(s1.is_finite() && s2 <= 1.05 * s1, "sup {s1} then {s2}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn process_constants(sf: &SmoothFamily, grid: &TimeGrid) -> Result<(f64, f64), TestCaseError> {
    let ev = SemigroupEvaluator::new(sf.member(0.3), Contour::default()).map_err(fail)?;
    let p = propagate(&ev, grid, PhiMethod::ProductIntegration, ProcessScope::FromInitial).map_err(fail)?;
    process_bounds(&p, 0.5).map_err(fail)
}

/// `‖U(t,τ)‖_{L(X)}` and `(t−τ)^{1−β}‖U(t,τ)‖_{L(X,Y)}` have measured constants that are
/// stable under refinement.
pub fn process_growth_bounds(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&family_strategy(), |(dim, seed)| {
            let sf = SmoothFamily::random(dim, seed);
            let grid = TimeGrid::graded(0.0, 2.0, 32, 2.0).map_err(fail)?;
            let (x1, xy1) = process_constants(&sf, &grid)?;
            let (x2, xy2) = process_constants(&sf, &grid.refined())?;
            prop_assert!(x1.is_finite() && xy1.is_finite());
            prop_assert!((x2 - x1).abs() <= 0.1 * x1, "X bound {x1} vs {x2}");
            prop_assert!((xy2 - xy1).abs() <= 0.1 * xy1, "X→Y bound {xy1} vs {xy2}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn solution_constant(sf: &SmoothFamily, grid: &TimeGrid, u0: &DVector<f64>) -> Result<f64, TestCaseError> {
    let ev = SemigroupEvaluator::new(sf.member(0.0), Contour::default()).map_err(fail)?;
    let p = propagate(&ev, grid, PhiMethod::ProductIntegration, ProcessScope::AllPairs).map_err(fail)?;
    let f = Nonlinearity::pointwise(sf.space.clone(), |_, s| s.sin())
        .with_cutoff(10.0, (0.0, 1.0))
        .map_err(fail)?;
    let tr = solve_semilinear(&p, &f, u0, grid, PicardOptions::default()).map_err(fail)?;
    let y0 = sf.space.norm(u0, Norm::Y).map_err(fail)?;
    Ok(tr
        .nodes
        .iter()
        .zip(&tr.y_norms)
        .map(|(t, y)| t.sqrt() * y / (1.0 + y0))
        .fold(0.0, f64::max))
}

/// `(t−τ)^{1−β}‖u(t)‖_Y / (1 + ‖u^τ‖_Y)` bounded over the grid, stable under refinement.
pub fn solution_growth_bound(cases: u32) -> Result<(), String> {
    let strat = (family_strategy(), 0.1..5.0f64);
    runner(cases)
        .run(&strat, |((dim, seed), amp)| {
            let sf = SmoothFamily::random(dim, seed);
            let u0 = DVector::from_fn(dim, |i, _| amp * (1.0 + i as f64).sin());
            let grid = TimeGrid::graded(0.0, 1.0, 16, 2.0).map_err(fail)?;
            let c1 = solution_constant(&sf, &grid, &u0)?;
            let c2 = solution_constant(&sf, &grid.refined(), &u0)?;
            prop_assert!(c1.is_finite());
            prop_assert!((c2 - c1).abs() <= 0.1 * c1, "constant {c1} vs {c2}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every suite with the case count used by both targets.
pub fn all() -> Vec<(&'static str, fn(u32) -> Result<(), String>, u32)> {
    vec![
        ("resolvent_identity", resolvent_identity, 256),
        ("op_norm_submultiplicative", op_norm_submultiplicative, 256),
        ("semigroup_property", semigroup_property, 64),
        ("phi_singularity_bound", phi_singularity_bound, 24),
        ("picard_contraction", picard_contraction, 24),
        ("resolvent_ratio_bound", resolvent_ratio_bound, 32),
        ("interpolated_ratio_bound", interpolated_ratio_bound, 32),
        ("smoothing_bound", smoothing_bound, 16),
        ("process_growth_bounds", process_growth_bounds, 24),
        ("solution_growth_bound", solution_growth_bound, 24),
    ]
}
