use rayon::prelude::*;
use serde::Serialize;

use super::effective::EffectiveMatrix;
use crate::environment::{check_support, Environment};
use crate::error::{Result, SepError};
use crate::hydrodynamics::{continuum_resolvent, continuum_semigroup, TestFunction};
use crate::random_walk::{resolvent_solve, semigroup_apply, DEFAULT_RESOLVENT_TOL};
use crate::scalar::Scalar;

/// Continuum evaluations are asked for this absolute accuracy.
const CONTINUUM_TOL: f64 = 1e-9;

/// One member of an environment family at its scale.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceCase<'a, T> {
    pub env: &'a Environment<T>,
    pub eps: T,
    pub d: &'a EffectiveMatrix<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub eps: Vec<f64>,
    /// `∫ |discrete − continuum| dμ^ε` per case.
    pub gaps: Vec<f64>,
    pub strictly_decreasing: bool,
    /// Last gap over first gap; 0 when the first gap vanishes.
    pub final_ratio: f64,
}

impl ConvergenceReport {
    fn new(eps: Vec<f64>, gaps: Vec<f64>) -> Self {
        let strictly_decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
        let final_ratio = match (gaps.first(), gaps.last()) {
            (Some(a), Some(b)) if *a > 0.0 => b / a,
            _ => 0.0,
        };
        ConvergenceReport {
            eps,
            gaps,
            strictly_decreasing,
            final_ratio,
        }
    }
}

fn scaled_points<T: Scalar>(env: &Environment<T>, eps: T) -> Vec<Vec<T>> {
    (0..env.len())
        .map(|i| env.centered_position(i).into_iter().map(|v| v * eps).collect())
        .collect()
}

fn l1_gap<T: Scalar>(env: &Environment<T>, eps: T, discrete: &[T], continuum: &[T]) -> f64 {
    let s: f64 = discrete
        .iter()
        .zip(continuum)
        .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
        .sum();
    s * eps.as_f64().powi(env.dim() as i32)
}

fn validate_case<T: Scalar>(case: &ConvergenceCase<'_, T>, phi: &TestFunction<T>) -> Result<()> {
    if phi.dim() != case.env.dim() || case.d.dim() != case.env.dim() {
        return Err(SepError::invalid("dimension mismatch between environment, matrix and test function"));
    }
    check_support(case.env, phi.reach(), case.eps)
}

/// `∫ |R^ε_λ φ − R_λ φ| dμ^ε` for each case.
pub fn resolvent_convergence_check<T: Scalar>(
    cases: &[ConvergenceCase<'_, T>],
    phi: &TestFunction<T>,
    lambda: T,
) -> Result<ConvergenceReport> {
    let mut gaps = Vec::with_capacity(cases.len());
    for case in cases {
        validate_case(case, phi)?;
        if phi.is_zero() {
            gaps.push(0.0);
            continue;
        }
        let pts = scaled_points(case.env, case.eps);
        let f: Vec<T> = pts.iter().map(|x| phi.value(x)).collect();
        let discrete = resolvent_solve(case.env, case.eps, lambda, &f, DEFAULT_RESOLVENT_TOL)?.u;
        let continuum = pts
            .par_iter()
            .map(|x| continuum_resolvent(case.d, phi, lambda, x, T::lit(CONTINUUM_TOL)))
            .collect::<Result<Vec<T>>>()?;
        gaps.push(l1_gap(case.env, case.eps, &discrete, &continuum));
    }
    Ok(ConvergenceReport::new(
        cases.iter().map(|c| c.eps.as_f64()).collect(),
        gaps,
    ))
}

/// `∫ |P^ε_t φ − P_t φ| dμ^ε` for each case.
pub fn semigroup_convergence_check<T: Scalar>(
    cases: &[ConvergenceCase<'_, T>],
    phi: &TestFunction<T>,
    t: T,
) -> Result<ConvergenceReport> {
    let mut gaps = Vec::with_capacity(cases.len());
    for case in cases {
        validate_case(case, phi)?;
        if phi.is_zero() || t == T::zero() {
            gaps.push(0.0);
            continue;
        }
        let pts = scaled_points(case.env, case.eps);
        let f: Vec<T> = pts.iter().map(|x| phi.value(x)).collect();
        let discrete = semigroup_apply(case.env, case.eps, t.as_f64(), &f, 1e-12)?;
        let continuum = pts
            .par_iter()
            .map(|x| continuum_semigroup(case.d, phi, t, x, T::lit(CONTINUUM_TOL)))
            .collect::<Result<Vec<T>>>()?;
        gaps.push(l1_gap(case.env, case.eps, &discrete, &continuum));
    }
    Ok(ConvergenceReport::new(
        cases.iter().map(|c| c.eps.as_f64()).collect(),
        gaps,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct TailMassRow {
    pub eps: f64,
    pub ell: f64,
    pub value: f64,
}

/// `∫ ψ(|x|) 1{|x| ≥ ℓ} dμ^ε` with `ψ(r) = 1/(1 + r^{d+1})`, for every
/// pair of scale and radius.
pub fn tail_mass_check<T: Scalar>(env: &Environment<T>, eps: &[T], ells: &[T]) -> Vec<TailMassRow> {
    let d = env.dim();
    let mut rows = Vec::with_capacity(eps.len() * ells.len());
    for &e in eps {
        let radii: Vec<f64> = scaled_points(env, e)
            .iter()
            .map(|x| x.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt())
            .collect();
        let w = e.as_f64().powi(d as i32);
        for &ell in ells {
            let ell = ell.as_f64();
            let value: f64 = radii
                .iter()
                .filter(|r| **r >= ell)
                .map(|r| 1.0 / (1.0 + r.powi(d as i32 + 1)))
                .sum::<f64>()
                * w;
            rows.push(TailMassRow {
                eps: e.as_f64(),
                ell,
                value,
            });
        }
    }
    rows
}
