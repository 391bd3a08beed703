use rand::Rng;
use serde::Serialize;

use super::heat::{MacroProfile, Profile};
use super::test_functions::TestFunction;
use crate::environment::{check_support, Environment};
use crate::error::{Result, SepError};
use crate::exclusion::ParticleConfig;
use crate::homogenization::EffectiveMatrix;
use crate::random_walk::{resolvent_solve, DEFAULT_RESOLVENT_TOL};
use crate::scalar::Scalar;
use crate::seeds::{self, stream};

/// `φ(εx)` at every point, for repeated evaluation of `π^ε(φ)`.
#[derive(Debug, Clone)]
pub(crate) struct PointWeights {
    pub values: Vec<f64>,
    pub mass: f64,
}

impl PointWeights {
    pub fn new<T: Scalar>(env: &Environment<T>, eps: T, f: impl Fn(&[T]) -> T) -> Self {
        let values = (0..env.len())
            .map(|i| {
                let x: Vec<T> = env.centered_position(i).into_iter().map(|v| v * eps).collect();
                f(&x).as_f64()
            })
            .collect();
        PointWeights {
            values,
            mass: eps.as_f64().powi(env.dim() as i32),
        }
    }

    #[inline]
    pub fn apply(&self, eta: &ParticleConfig) -> f64 {
        let bits = eta.as_bits();
        let mut s = 0.0;
        for (w, b) in self.values.iter().zip(bits) {
            if *b {
                s += *w;
            }
        }
        s * self.mass
    }
}

/// `π^ε(φ) = ε^d Σ_{η(x)=1} φ(εx)`.
pub fn empirical_eval<T: Scalar>(env: &Environment<T>, eta: &ParticleConfig, eps: T, phi: &TestFunction<T>) -> Result<T> {
    if eta.len() != env.len() {
        return Err(SepError::invalid("configuration length differs from the point count"));
    }
    if phi.dim() != env.dim() {
        return Err(SepError::invalid("test function dimension mismatch"));
    }
    if !(eps > T::zero()) {
        return Err(SepError::invalid("scale must be positive"));
    }
    check_support(env, phi.reach(), eps)?;
    let mut s = T::zero();
    for i in eta.occupied() {
        let x: Vec<T> = env.centered_position(i).into_iter().map(|v| v * eps).collect();
        s += phi.value(&x);
    }
    Ok(s * eps.powi(env.dim() as i32))
}

/// Independent `η(x) ~ Bernoulli(ρ₀(εx))`.
pub fn init_product_bernoulli<T: Scalar>(env: &Environment<T>, rho0: &Profile<T>, eps: T, seed: u64) -> Result<ParticleConfig> {
    rho0.validate(env.dim())?;
    let mut rng = stream(seed, seeds::INIT_BERNOULLI, 0);
    let bits = (0..env.len())
        .map(|i| {
            let x: Vec<T> = env.centered_position(i).into_iter().map(|v| v * eps).collect();
            let p = rho0.value(&x).as_f64();
            rng.random::<f64>() < p
        })
        .collect();
    Ok(ParticleConfig::from_bits(bits))
}

/// `Var π^ε(φ) = ε^{2d} Σ_x φ(εx)² ρ₀(εx)(1 − ρ₀(εx))` under the product law.
pub fn bernoulli_variance<T: Scalar>(env: &Environment<T>, rho0: &Profile<T>, eps: T, phi: &TestFunction<T>) -> T {
    let mut s = T::zero();
    for i in 0..env.len() {
        let x: Vec<T> = env.centered_position(i).into_iter().map(|v| v * eps).collect();
        let p = rho0.value(&x);
        let f = phi.value(&x);
        s += f * f * p * (T::one() - p);
    }
    s * eps.powi(2 * env.dim() as i32)
}

/// Values of a measure path `α_s` on `φ` and on `∇·D∇φ` over a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct MeasurePath {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub div: Vec<f64>,
    /// Error bound on each stored value.
    pub value_tol: f64,
}

impl MeasurePath {
    /// `α_s(dx) = ρ(x, s) dx` for the heat solution.
    pub fn analytic<T: Scalar>(profile: &MacroProfile<T>, phi: &TestFunction<T>, times: &[T]) -> Result<Self> {
        let dm = profile.d.thresholded().data;
        let mut path = MeasurePath {
            times: times.iter().map(|t| t.as_f64()).collect(),
            phi: Vec::with_capacity(times.len()),
            div: Vec::with_capacity(times.len()),
            value_tol: profile.tol.as_f64(),
        };
        for &t in times {
            path.phi.push(profile.integrate_against(phi, t)?.as_f64());
            path.div
                .push(profile.integrate_weighted(phi, |x| phi.divergence_form(&dm, x), t)?.as_f64());
        }
        Ok(path)
    }

    /// `α_s = π^ε_s` along configuration snapshots.
    pub fn empirical<T: Scalar>(
        env: &Environment<T>,
        eps: T,
        snapshots: &[(f64, ParticleConfig)],
        phi: &TestFunction<T>,
        d: &EffectiveMatrix<T>,
    ) -> Result<Self> {
        check_support(env, phi.reach(), eps)?;
        let dm = d.thresholded().data;
        let wphi = PointWeights::new(env, eps, |x| phi.value(x));
        let wdiv = PointWeights::new(env, eps, |x| phi.divergence_form(&dm, x));
        Ok(MeasurePath {
            times: snapshots.iter().map(|(t, _)| *t).collect(),
            phi: snapshots.iter().map(|(_, c)| wphi.apply(c)).collect(),
            div: snapshots.iter().map(|(_, c)| wdiv.apply(c)).collect(),
            value_tol: 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeakResidual {
    /// `α_t(φ) − α_0(φ) − ∫₀ᵗ α_s(∇·D∇φ) ds`, trapezoid in time.
    pub residual: f64,
    /// `t h² max|g''|/12` with `g''` from second differences, plus the
    /// propagated value errors.
    pub trapezoid_bound: f64,
    pub intervals: usize,
}

/// Weak-form residual of a measure path up to the grid time `t`.
pub fn weak_solution_residual(path: &MeasurePath, t: f64) -> Result<WeakResidual> {
    let n = path.times.len();
    if path.phi.len() != n || path.div.len() != n {
        return Err(SepError::invalid("path columns differ in length"));
    }
    if path.times.first() != Some(&0.0) {
        return Err(SepError::invalid("the time grid must start at 0"));
    }
    if path.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SepError::invalid("the time grid must be increasing"));
    }
    let Some(end) = path.times.iter().position(|s| *s == t) else {
        return Err(SepError::invalid(format!("time {t} is not on the grid")));
    };
    if end < 8 {
        return Err(SepError::invalid(format!(
            "grid has {end} intervals up to t; at least 8 are required"
        )));
    }
    let ts = &path.times[..=end];
    let g = &path.div[..=end];
    let mut integral = 0.0;
    let mut hmax: f64 = 0.0;
    for k in 0..end {
        let h = ts[k + 1] - ts[k];
        hmax = hmax.max(h);
        integral += 0.5 * h * (g[k] + g[k + 1]);
    }
    let mut curvature: f64 = 0.0;
    for k in 1..end {
        let (h0, h1) = (ts[k] - ts[k - 1], ts[k + 1] - ts[k]);
        let second = 2.0 * ((g[k + 1] - g[k]) / h1 - (g[k] - g[k - 1]) / h0) / (h0 + h1);
        curvature = curvature.max(second.abs());
    }
    let residual = path.phi[end] - path.phi[0] - integral;
    Ok(WeakResidual {
        residual,
        trapezoid_bound: t * hmax * hmax * curvature / 12.0 + path.value_tol * (2.0 + t),
        intervals: end,
    })
}

/// Resolvent-corrected test function and its distance from `G`.
#[derive(Debug, Clone)]
pub struct CorrectedGap {
    pub eps: f64,
    pub lambda: f64,
    /// `ε^d Σ_x |G(εx) − G^ε_λ(x)|`.
    pub gap: f64,
    pub g: Vec<f64>,
    pub corrected: Vec<f64>,
    /// `ε^d Σ_x |∇·D∇G(εx)|`.
    pub div_norm: f64,
    pub dim: usize,
}

impl CorrectedGap {
    /// `|π^ε(G) − π^ε(G^ε_λ)|`, never above `gap`.
    pub fn pi_difference(&self, eta: &ParticleConfig) -> f64 {
        let m = self.eps.powi(self.dim as i32);
        eta.occupied().map(|x| self.g[x] - self.corrected[x]).sum::<f64>().abs() * m
    }
}

/// Solves `λG^ε − 𝕃^ε G^ε = λG − ∇·D∇G` and measures `G − G^ε` in
/// `L¹(μ^ε)`.
pub fn corrected_empirical_gap<T: Scalar>(
    env: &Environment<T>,
    eps: T,
    g: &TestFunction<T>,
    d: &EffectiveMatrix<T>,
    lambda: T,
) -> Result<CorrectedGap> {
    if !(lambda > T::zero()) {
        return Err(SepError::invalid("resolvent parameter must be positive"));
    }
    if g.dim() != env.dim() || d.dim() != env.dim() {
        return Err(SepError::invalid("dimension mismatch"));
    }
    check_support(env, g.reach(), eps)?;
    let dm = d.thresholded().data;
    let pts: Vec<Vec<T>> = (0..env.len())
        .map(|i| env.centered_position(i).into_iter().map(|v| v * eps).collect())
        .collect();
    let gv: Vec<T> = pts.iter().map(|x| g.value(x)).collect();
    let div: Vec<T> = pts.iter().map(|x| g.divergence_form(&dm, x)).collect();
    let rhs: Vec<T> = gv.iter().zip(&div).map(|(a, b)| lambda * *a - *b).collect();
    let mass = eps.as_f64().powi(env.dim() as i32);
    let corrected: Vec<f64> = if g.is_zero() {
        vec![0.0; env.len()]
    } else {
        resolvent_solve(env, eps, lambda, &rhs, DEFAULT_RESOLVENT_TOL)?
            .u
            .iter()
            .map(|v| v.as_f64())
            .collect()
    };
    let g: Vec<f64> = gv.iter().map(|v| v.as_f64()).collect();
    let gap = g.iter().zip(&corrected).map(|(a, b)| (a - b).abs()).sum::<f64>() * mass;
    Ok(CorrectedGap {
        eps: eps.as_f64(),
        lambda: lambda.as_f64(),
        gap,
        g,
        corrected,
        div_norm: div.iter().map(|v| v.as_f64().abs()).sum::<f64>() * mass,
        dim: env.dim(),
    })
}
