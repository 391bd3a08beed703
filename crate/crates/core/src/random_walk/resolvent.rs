use serde::Serialize;

use super::generator::{GeneratorOperator, ShiftedOperator};
use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::linalg::{conjugate_gradient, norm_inf, CgOptions};
use crate::scalar::Scalar;

pub const DEFAULT_RESOLVENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub relative_residual: f64,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ResolventSolution<T> {
    pub u: Vec<T>,
    pub diagnostics: SolverDiagnostics,
}

/// Solves `(λ − 𝕃^ε) u = f` by Jacobi-preconditioned CG, then checks the
/// maximum principle and the `L²(μ^ε)` contraction bound.
pub fn resolvent_solve<T: Scalar>(
    env: &Environment<T>,
    eps: T,
    lambda: T,
    f: &[T],
    tol: f64,
) -> Result<ResolventSolution<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(SepError::invalid("resolvent parameter must be positive"));
    }
    if f.len() != env.len() {
        return Err(SepError::invalid("function length differs from the point count"));
    }
    if !(tol > 0.0) {
        return Err(SepError::invalid("tolerance must be positive"));
    }
    let generator = GeneratorOperator::new(env, eps)?;
    let op = ShiftedOperator { generator, lambda };
    // f/(λ + ε^{-2}c) is already exact for constant f.
    let mut u: Vec<T> = f
        .iter()
        .zip(env.exit_rates())
        .map(|(fi, _)| *fi / lambda)
        .collect();
    let report = conjugate_gradient(&op, f, &mut u, &CgOptions::new(tol, env.len()))?;

    let slack = T::one() + T::lit(10.0 * tol.max(T::epsilon().as_f64()));
    let f_inf = norm_inf(f);
    if norm_inf(&u) * lambda > f_inf * slack {
        return Err(SepError::Numerical(format!(
            "maximum principle violated: λ‖u‖∞ = {} > ‖f‖∞ = {}",
            norm_inf(&u) * lambda,
            f_inf
        )));
    }
    if generator.norm(&u) * lambda > generator.norm(f) * slack {
        return Err(SepError::Numerical("L² resolvent bound violated".into()));
    }
    Ok(ResolventSolution {
        u,
        diagnostics: SolverDiagnostics {
            iterations: report.iterations,
            relative_residual: report.relative_residual,
            residual_history: report.history,
        },
    })
}
