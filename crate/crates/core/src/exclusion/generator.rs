use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use super::clocks::poisson_at_least;
use super::config::ParticleConfig;
use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::scalar::Scalar;
use crate::seeds::{self, stream};

/// Exchanges tried outside the declared support when fuzzing.
pub const SUPPORT_FUZZ_EXCHANGES: usize = 32;

/// A function of the configuration that only looks at the points of
/// `support`.
pub struct LocalFunction<F> {
    support: Vec<usize>,
    f: F,
}

impl<F: Fn(&ParticleConfig) -> f64> LocalFunction<F> {
    pub fn new(mut support: Vec<usize>, f: F) -> Self {
        support.sort_unstable();
        support.dedup();
        LocalFunction { support, f }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    #[inline]
    pub fn eval(&self, eta: &ParticleConfig) -> f64 {
        (self.f)(eta)
    }

    fn in_support(&self, i: usize) -> bool {
        self.support.binary_search(&i).is_ok()
    }
}

fn check_inputs<T: Scalar, F: Fn(&ParticleConfig) -> f64>(
    env: &Environment<T>,
    f: &LocalFunction<F>,
    eta: &ParticleConfig,
) -> Result<()> {
    if eta.len() != env.len() {
        return Err(SepError::invalid("configuration length differs from the point count"));
    }
    if let Some(&bad) = f.support.iter().find(|&&i| i >= env.len()) {
        return Err(SepError::invalid(format!("support point {bad} out of range")));
    }
    Ok(())
}

/// Applies random exchanges between points outside the support and fails
/// if `f` notices.
pub fn check_declared_support<T: Scalar, F: Fn(&ParticleConfig) -> f64>(
    env: &Environment<T>,
    f: &LocalFunction<F>,
    eta: &ParticleConfig,
    seed: u64,
) -> Result<()> {
    check_inputs(env, f, eta)?;
    let outside: Vec<usize> = (0..env.len()).filter(|i| !f.in_support(*i)).collect();
    if outside.len() < 2 {
        return Ok(());
    }
    let base = f.eval(eta);
    let mut rng = stream(seed, seeds::FUZZ, 0);
    let mut probe = eta.clone();
    for _ in 0..SUPPORT_FUZZ_EXCHANGES {
        let a = outside[rng.random_range(0..outside.len())];
        let b = outside[rng.random_range(0..outside.len())];
        probe.exchange_in_place(a, b);
        if f.eval(&probe) != base {
            return Err(SepError::invalid(format!(
                "local function depends on points outside its declared support (exchange {a}, {b})"
            )));
        }
    }
    Ok(())
}

/// `ℒf(η) = Σ_{edges} c_e [f(η^e) − f(η)]`, summed over the edges meeting
/// the support. Debug builds also fuzz the declared support.
pub fn generator_apply<T: Scalar, F: Fn(&ParticleConfig) -> f64>(
    env: &Environment<T>,
    f: &LocalFunction<F>,
    eta: &ParticleConfig,
) -> Result<f64> {
    check_inputs(env, f, eta)?;
    if cfg!(debug_assertions) {
        check_declared_support(env, f, eta, 0)?;
    }
    let base = f.eval(eta);
    let mut probe = eta.clone();
    let mut total = 0.0;
    for e in env.edges() {
        if !(f.in_support(e.i) || f.in_support(e.j)) {
            continue;
        }
        // Exchanges between equal occupations are no-ops.
        if eta.get(e.i) == eta.get(e.j) {
            continue;
        }
        probe.exchange_in_place(e.i, e.j);
        total += e.rate.as_f64() * (f.eval(&probe) - base);
        probe.exchange_in_place(e.i, e.j);
    }
    Ok(total)
}

/// `ℒf(η) = Σ_x Σ_y c_xy η(x)(1 − η(y)) [f(η^{x,y}) − f(η)]` over all
/// ordered pairs of neighbors.
pub fn generator_apply_occupation<T: Scalar, F: Fn(&ParticleConfig) -> f64>(
    env: &Environment<T>,
    f: &LocalFunction<F>,
    eta: &ParticleConfig,
) -> Result<f64> {
    check_inputs(env, f, eta)?;
    let base = f.eval(eta);
    let mut probe = eta.clone();
    let mut total = 0.0;
    for x in eta.occupied() {
        for nb in env.neighbors(x) {
            if eta.get(nb.point) {
                continue;
            }
            probe.exchange_in_place(x, nb.point);
            total += nb.rate.as_f64() * (f.eval(&probe) - base);
            probe.exchange_in_place(x, nb.point);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct FdEstimate {
    pub h: f64,
    /// Estimate of `(𝔼f(η_h) − f(η))/h`.
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of `(𝔼f(η_h) − f(η))/h`.
///
/// The number of clock rings in `[0, h]` is Poisson with mean `Λh`, `Λ` the
/// total rate. The no-ring and one-ring strata are summed exactly; the rest
/// is sampled `samples` times, each sample a sequence of at least two
/// exchanges on edges drawn proportionally to their rates.
pub fn fd_generator_estimate<T: Scalar, F: Fn(&ParticleConfig) -> f64 + Sync>(
    env: &Environment<T>,
    f: &LocalFunction<F>,
    eta: &ParticleConfig,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<FdEstimate> {
    check_inputs(env, f, eta)?;
    if !(h > 0.0) || samples < 2 {
        return Err(SepError::invalid("need h > 0 and at least two samples"));
    }
    let edges = env.edges();
    let rates: Vec<f64> = edges.iter().map(|e| e.rate.as_f64()).collect();
    let lambda: f64 = rates.iter().sum();
    if lambda == 0.0 {
        return Ok(FdEstimate {
            h,
            value: 0.0,
            stderr: 0.0,
            samples,
        });
    }
    let base = f.eval(eta);
    let mean = lambda * h;
    let p0 = (-mean).exp();
    let p1 = mean * p0;
    let p2 = (1.0 - p0 - p1).max(0.0);

    let mut probe = eta.clone();
    let mut one = 0.0;
    for (e, c) in edges.iter().zip(&rates) {
        probe.exchange_in_place(e.i, e.j);
        one += c / lambda * (f.eval(&probe) - base);
        probe.exchange_in_place(e.i, e.j);
    }

    let alias = WeightedAliasIndex::new(rates).map_err(|e| SepError::Numerical(format!("alias table: {e}")))?;
    let draws: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream(seed, seeds::GENERATOR_MC, s as u64);
            let n = poisson_at_least(mean, 2, &mut rng);
            let mut cfg = eta.clone();
            for _ in 0..n {
                let e = &edges[alias.sample(&mut rng)];
                cfg.exchange_in_place(e.i, e.j);
            }
            f.eval(&cfg) - base
        })
        .collect();
    let m = draws.iter().sum::<f64>() / samples as f64;
    let var = draws.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (samples - 1) as f64;
    Ok(FdEstimate {
        h,
        value: (p1 * one + p2 * m) / h,
        stderr: p2 * (var / samples as f64).sqrt() / h,
        samples,
    })
}
