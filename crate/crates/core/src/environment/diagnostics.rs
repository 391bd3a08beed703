use serde::Serialize;

use super::Environment;
use crate::error::{Result, SepError};
use crate::hydrodynamics::TestFunction;
use crate::scalar::Scalar;

/// Site average `(1/N) Σ_i f(i)`, the sample estimator of a Palm expectation.
pub fn palm_site_average<T: Scalar>(env: &Environment<T>, f: impl Fn(usize) -> T) -> Result<T> {
    if env.is_empty() {
        return Err(SepError::EmptyEnvironment("no points to average over".into()));
    }
    let mut s = T::zero();
    for i in 0..env.len() {
        s += f(i);
    }
    Ok(s / T::from_usize_lossy(env.len()))
}

/// `λ̂_k = avg_i Σ_j c_ij |x_j − x_i|^k` for `k ∈ {0, 2}`.
pub fn moment_check<T: Scalar>(env: &Environment<T>, k: u32) -> Result<T> {
    match k {
        0 => palm_site_average(env, |i| env.exit_rate(i)),
        2 => palm_site_average(env, |i| {
            env.neighbors(i)
                .map(|nb| {
                    let r2: T = env.edge_displacement(nb.edge).iter().map(|v| *v * *v).sum();
                    nb.rate * r2
                })
                .sum()
        }),
        _ => Err(SepError::invalid(format!("moment order {k} not in {{0, 2}}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErgodicCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub gap: T,
}

/// Fails unless the scaled torus contains the support of `phi` in its
/// centred fundamental domain.
pub(crate) fn check_support<T: Scalar>(env: &Environment<T>, reach: T, eps: T) -> Result<()> {
    let inner = env.torus().inradius() * eps;
    if reach >= inner {
        let required = env.box_side() * reach / inner;
        return Err(SepError::SupportViolation {
            message: format!(
                "test function reaches radius {reach} but the scaled box only contains radius {inner}"
            ),
            required_side: required.as_f64(),
        });
    }
    Ok(())
}

/// Compares `ε^d Σ_i φ(ε x_i) f(i)` with `m · avg(f) · ∫φ`.
pub fn ergodic_average_check<T: Scalar>(
    env: &Environment<T>,
    f: impl Fn(usize) -> T,
    phi: &TestFunction<T>,
    eps: T,
) -> Result<ErgodicCheck<T>> {
    if !(eps > T::zero()) {
        return Err(SepError::invalid("scale must be positive"));
    }
    if phi.dim() != env.dim() {
        return Err(SepError::invalid("test function dimension mismatch"));
    }
    check_support(env, phi.reach(), eps)?;
    let scale = eps.powi(env.dim() as i32);
    let mut lhs = T::zero();
    let mut fvals = Vec::with_capacity(env.len());
    for i in 0..env.len() {
        let fi = f(i);
        fvals.push(fi);
        let x: Vec<T> = env.centered_position(i).into_iter().map(|v| v * eps).collect();
        let p = phi.value(&x);
        if p != T::zero() {
            lhs += p * fi;
        }
    }
    lhs *= scale;
    let palm = palm_site_average(env, |i| fvals[i])?;
    let rhs = env.intensity() * palm * phi.integral()?;
    Ok(ErgodicCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{gen_crystal_conductance, gen_zd_conductance, ConductanceLaw, CrystalSpec};

    #[test]
    fn ring_moments() {
        let env: Environment<f64> = gen_zd_conductance(1, 8, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        assert_eq!(moment_check(&env, 0).unwrap(), 2.0);
        assert_eq!(moment_check(&env, 2).unwrap(), 2.0);
        assert_eq!(palm_site_average(&env, |_| 1.0).unwrap(), 1.0);
        let hex: Environment<f64> =
            gen_crystal_conductance(&CrystalSpec::hexagonal(), 4, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        assert_eq!(moment_check(&hex, 0).unwrap(), 3.0);
    }

    #[test]
    fn ergodic_check_constant_f() {
        let env: Environment<f64> = gen_zd_conductance(1, 256, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        let phi = TestFunction::canonical(1);
        let r = ergodic_average_check(&env, |i| env.exit_rate(i), &phi, 1.0 / 64.0).unwrap();
        let plain = ergodic_average_check(&env, |_| 1.0, &phi, 1.0 / 64.0).unwrap();
        assert!((r.lhs - 2.0 * plain.lhs).abs() < 1e-14);
        assert!(plain.gap < 1e-6);
        let zero = ergodic_average_check(&env, |_| 1.0, &TestFunction::zero(1), 1.0 / 64.0).unwrap();
        assert_eq!((zero.lhs, zero.rhs, zero.gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn support_violation_names_side() {
        let env: Environment<f64> = gen_zd_conductance(1, 16, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        let e = ergodic_average_check(&env, |_| 1.0, &TestFunction::canonical(1), 1.0 / 16.0).unwrap_err();
        match e {
            SepError::SupportViolation { required_side, .. } => assert!((required_side - 32.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }
}
