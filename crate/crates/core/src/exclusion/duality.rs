use rayon::prelude::*;
use serde::Serialize;

use super::clocks::{default_slab_width, ClockSchedule};
use super::config::ParticleConfig;
use super::evolve::{evolve_with, EvolveOptions};
use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::quadrature::adaptive_simpson;
use crate::random_walk::Uniformizer;
use crate::scalar::Scalar;
use crate::seeds::{self, seed_derive};

/// Truncation mass of the uniformized kernels used below.
pub const KERNEL_TOL: f64 = 1e-13;

/// Largest instance accepted by [`nagy_check`].
pub const NAGY_MAX_POINTS: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct DualityResult {
    pub mc_mean: f64,
    pub stderr: f64,
    pub kernel_value: f64,
    /// `(mc_mean − kernel_value)/stderr`; 0 when both sides agree exactly.
    pub z: f64,
    pub replicas: usize,
}

/// Compares the Monte Carlo mean of `η_t(x)` with `Σ_y p_t(x,y) ξ(y)`.
pub fn duality_mc<T: Scalar>(
    env: &Environment<T>,
    xi: &ParticleConfig,
    x: usize,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<DualityResult> {
    if replicas < 100 {
        return Err(SepError::invalid("at least 100 replicas are required"));
    }
    if xi.len() != env.len() || x >= env.len() {
        return Err(SepError::invalid("configuration or point out of range"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(SepError::invalid("time must be finite and nonnegative"));
    }
    let (row, _) = Uniformizer::new(env, T::one())?.kernel_row(x, t, KERNEL_TOL)?;
    let kernel_value: f64 = row.iter().enumerate().map(|(y, p)| p.as_f64() * xi.value(y)).sum();

    let width = default_slab_width(env, 1.0).0.min(t);
    let opts = EvolveOptions {
        check_order: false,
        ..EvolveOptions::default()
    };
    let hits = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<usize> {
            let s = seed_derive(seed, seeds::DUALITY_REPLICA, r as u64)?;
            let k = ClockSchedule::sample(env, 1.0, t, width, s)?;
            Ok(usize::from(evolve_with(env, &k, xi, t, &opts)?.config.get(x)))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    let n = replicas as f64;
    let mc_mean = hits as f64 / n;
    let stderr = (mc_mean * (1.0 - mc_mean) / (n - 1.0)).sqrt();
    let diff = mc_mean - kernel_value;
    let z = if stderr > 0.0 {
        diff / stderr
    } else if diff.abs() < 1e-9 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(DualityResult {
        mc_mean,
        stderr,
        kernel_value,
        z,
        replicas,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NagyResult {
    pub lhs: f64,
    /// Kernel-smoothed initial data.
    pub initial: f64,
    /// Sum over the clock events of the kernel-weighted jumps.
    pub jumps: f64,
    /// Time integral of the kernel against the compensator.
    pub compensator: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Bound on the residual: `10·quad_tol` plus the kernel error.
    pub bound: f64,
}

/// Pathwise check of
/// `η_t(x) = Σ_y p(t,x,y) ξ(y) + Σ_y ∫₀ᵗ p(t−s,x,y) dM_y(s)`
/// for the fixed clock realization `k` (rates unscaled).
pub fn nagy_check<T: Scalar>(
    env: &Environment<T>,
    k: &ClockSchedule,
    xi: &ParticleConfig,
    x: usize,
    t: f64,
    quad_tol: f64,
) -> Result<NagyResult> {
    let n = env.len();
    if n > NAGY_MAX_POINTS {
        return Err(SepError::InstanceTooLarge(format!(
            "{n} points; the pathwise check uses dense kernels and accepts at most {NAGY_MAX_POINTS}"
        )));
    }
    if !(quad_tol >= 1e-8) {
        return Err(SepError::invalid("quadrature tolerance must be at least 1e-8"));
    }
    if xi.len() != n || x >= n {
        return Err(SepError::invalid("configuration or point out of range"));
    }
    if k.rate_scale() != 1.0 {
        return Err(SepError::invalid("clocks must run at the unscaled rates"));
    }
    let opts = EvolveOptions {
        record_events: true,
        check_order: false,
        ..EvolveOptions::default()
    };
    let outcome = evolve_with(env, k, xi, t, &opts)?;
    let lhs = outcome.config.value(x);

    let walk = Uniformizer::new(env, T::one())?;
    let row = |s: f64| -> Result<Vec<f64>> {
        Ok(walk
            .kernel_row(x, s.max(0.0), KERNEL_TOL)?
            .0
            .into_iter()
            .map(|v| v.as_f64())
            .collect())
    };
    let initial: f64 = row(t)?.iter().enumerate().map(|(y, p)| p * xi.value(y)).sum();

    let mut eta = xi.clone();
    let mut jumps = 0.0;
    let mut compensator = 0.0;
    let mut failure = None;
    let mut s0 = 0.0;
    let segments = outcome.events.len() + 1;
    let seg_tol = quad_tol / segments as f64;
    let events = outcome.events.iter().map(Some).chain(std::iter::once(None));
    for ev in events {
        let s1 = ev.map_or(t, |e| e.time);
        // (𝕃η)(y) = Σ_z c_yz (η(z) − η(y)) is frozen on (s0, s1).
        let lap: Vec<f64> = (0..n)
            .map(|y| env.neighbors(y).map(|nb| nb.rate.as_f64() * (eta.value(nb.point) - eta.value(y))).sum())
            .collect();
        if lap.iter().any(|v| *v != 0.0) && s1 > s0 {
            let integrand = |s: f64| -> f64 {
                match row(t - s) {
                    Ok(p) => p.iter().zip(&lap).map(|(a, b)| a * b).sum(),
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            };
            compensator += adaptive_simpson(integrand, s0, s1, seg_tol)?;
        }
        if let Some(err) = failure.take() {
            return Err(err);
        }
        let Some(ev) = ev else { break };
        if ev.swapped {
            let p = row(t - ev.time)?;
            let (a, b) = (ev.i, ev.j);
            let jump_a = eta.value(b) - eta.value(a);
            jumps += (p[a] - p[b]) * jump_a;
            eta.exchange_in_place(a, b);
        }
        s0 = s1;
    }
    let rhs = initial + jumps - compensator;
    Ok(NagyResult {
        lhs,
        initial,
        jumps,
        compensator,
        rhs,
        residual: (lhs - rhs).abs(),
        bound: 10.0 * quad_tol + 10.0 * KERNEL_TOL * (segments as f64 + 1.0),
    })
}
