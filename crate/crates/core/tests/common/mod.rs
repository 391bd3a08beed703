#![allow(dead_code)]

use nalgebra::DMatrix;
use sepsim::environment::Environment;
use sepsim::exclusion::ParticleConfig;

/// Dense walk generator `ε^{−2}(c_xy − δ_xy c_x)` built from the edge list.
pub fn walk_generator(env: &Environment<f64>, eps: f64) -> DMatrix<f64> {
    let n = env.len();
    let s = eps.powi(-2);
    let mut q = DMatrix::zeros(n, n);
    for e in env.edges() {
        q[(e.i, e.j)] += s * e.rate;
        q[(e.j, e.i)] += s * e.rate;
        q[(e.i, e.i)] -= s * e.rate;
        q[(e.j, e.j)] -= s * e.rate;
    }
    q
}

/// `e^{tQ}` for the walk.
pub fn walk_kernel(env: &Environment<f64>, eps: f64, t: f64) -> DMatrix<f64> {
    (walk_generator(env, eps) * t).exp()
}

pub fn state_of(eta: &ParticleConfig) -> usize {
    eta.as_bits().iter().enumerate().map(|(i, b)| usize::from(*b) << i).sum()
}

pub fn config_of(state: usize, n: usize) -> ParticleConfig {
    ParticleConfig::from_bits((0..n).map(|i| state >> i & 1 == 1).collect())
}

/// Exclusion generator on all `2^n` configurations.
pub fn exclusion_generator(env: &Environment<f64>) -> DMatrix<f64> {
    let n = env.len();
    assert!(n <= 10, "dense exclusion oracle is for tiny rings");
    let size = 1 << n;
    let mut q = DMatrix::zeros(size, size);
    for s in 0..size {
        for e in env.edges() {
            if (s >> e.i & 1) != (s >> e.j & 1) {
                let t = s ^ (1 << e.i) ^ (1 << e.j);
                q[(s, t)] += e.rate;
                q[(s, s)] -= e.rate;
            }
        }
    }
    q
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
