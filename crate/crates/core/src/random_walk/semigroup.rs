//! Uniformization: `P_t f = Σ_k Pois(Λt; k) Pᵏ f` with `P = I + 𝕃/Λ`.

use serde::Serialize;

use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::scalar::Scalar;

/// Largest `Λt` handled by a single series.
pub const SPLIT_THRESHOLD: f64 = 700.0;
pub const MAX_SPLITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesDiagnostics {
    pub splits: usize,
    /// Terms of the series per split.
    pub terms: usize,
    /// Largest negative entry clamped to zero (kernel rows only).
    pub clamp: f64,
}

/// Poisson weights `e^{−μ} μ^k / k!` for `k = 0..=K`, with `K` the first
/// index whose upper tail is below `tail_tol`; renormalized to sum 1.
pub(crate) fn poisson_weights(mu: f64, tail_tol: f64) -> Vec<f64> {
    if mu == 0.0 {
        return vec![1.0];
    }
    let kmax = (mu + 12.0 * mu.sqrt() + 60.0).ceil() as usize;
    let ln_mu = mu.ln();
    let mut w: Vec<f64> = (0..=kmax)
        .map(|k| (-mu + k as f64 * ln_mu - libm::lgamma(k as f64 + 1.0)).exp())
        .collect();
    let mut tail = 0.0;
    let mut cut = kmax;
    for k in (0..=kmax).rev() {
        if tail + w[k] >= tail_tol {
            cut = k;
            break;
        }
        tail += w[k];
    }
    w.truncate(cut + 1);
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Uniformized semigroup of the walk sped up by `ε^{−2}`.
#[derive(Debug, Clone)]
pub struct Uniformizer<'a, T> {
    env: &'a Environment<T>,
    /// `Λ = ε^{−2} max_i c_i`.
    lambda: f64,
    /// `c_ij / max_i c_i` in CSR order.
    weights: Vec<T>,
}

impl<'a, T: Scalar> Uniformizer<'a, T> {
    pub fn new(env: &'a Environment<T>, eps: T) -> Result<Self> {
        if !(eps > T::zero()) {
            return Err(SepError::invalid("scale must be positive"));
        }
        let cmax = env.max_exit_rate();
        let (_, _, rate) = env.csr();
        Ok(Uniformizer {
            env,
            lambda: cmax.as_f64() / (eps * eps).as_f64(),
            weights: rate.iter().map(|r| *r / cmax).collect(),
        })
    }

    pub fn rate(&self) -> f64 {
        self.lambda
    }

    fn step(&self, u: &[T], out: &mut [T]) {
        let (offsets, nbr, _) = self.env.csr();
        for i in 0..u.len() {
            let ui = u[i];
            let mut s = T::zero();
            for k in offsets[i]..offsets[i + 1] {
                s += self.weights[k] * (u[nbr[k]] - ui);
            }
            out[i] = ui + s;
        }
    }

    pub fn split_count(&self, t: f64) -> Result<usize> {
        let lt = self.lambda * t;
        let n = ((lt / SPLIT_THRESHOLD).ceil() as usize).max(1);
        if n > MAX_SPLITS {
            return Err(SepError::CapExceeded {
                required_splits: n,
                max_splits: MAX_SPLITS,
            });
        }
        Ok(n)
    }

    /// `P^ε_t f` with total truncation mass below `tol`.
    pub fn apply(&self, t: f64, f: &[T], tol: f64) -> Result<(Vec<T>, SeriesDiagnostics)> {
        if f.len() != self.env.len() {
            return Err(SepError::invalid("function length differs from the point count"));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(SepError::invalid("time must be finite and nonnegative"));
        }
        if !(tol > 0.0 && tol <= 1e-3) {
            return Err(SepError::invalid("tolerance must lie in (0, 1e-3]"));
        }
        if t == 0.0 {
            return Ok((
                f.to_vec(),
                SeriesDiagnostics {
                    splits: 0,
                    terms: 0,
                    clamp: 0.0,
                },
            ));
        }
        let n = self.split_count(t)?;
        let w = poisson_weights(self.lambda * t / n as f64, tol / n as f64);
        let w: Vec<T> = w.into_iter().map(T::lit).collect();
        let mut cur = f.to_vec();
        let mut next = vec![T::zero(); f.len()];
        let mut acc = vec![T::zero(); f.len()];
        for _ in 0..n {
            let mut power = cur.clone();
            acc.iter_mut().zip(&power).for_each(|(a, p)| *a = w[0] * *p);
            for wk in &w[1..] {
                self.step(&power, &mut next);
                std::mem::swap(&mut power, &mut next);
                acc.iter_mut().zip(&power).for_each(|(a, p)| *a += *wk * *p);
            }
            std::mem::swap(&mut cur, &mut acc);
        }
        Ok((
            cur,
            SeriesDiagnostics {
                splits: n,
                terms: w.len(),
                clamp: 0.0,
            },
        ))
    }

    /// `p^ε_t(x, ·)`, clamped to be nonnegative and renormalized.
    pub fn kernel_row(&self, x: usize, t: f64, tol: f64) -> Result<(Vec<T>, SeriesDiagnostics)> {
        if x >= self.env.len() {
            return Err(SepError::invalid(format!("point {x} out of range")));
        }
        let mut e = vec![T::zero(); self.env.len()];
        e[x] = T::one();
        // The kernel is symmetric, so the row at x equals P_t applied to 1_x.
        let (mut row, mut diag) = self.apply(t, &e, tol)?;
        let mut clamp = 0.0f64;
        for v in row.iter_mut() {
            if *v < T::zero() {
                clamp = clamp.max(-v.as_f64());
                *v = T::zero();
            }
        }
        let s: T = row.iter().copied().sum();
        row.iter_mut().for_each(|v| *v /= s);
        diag.clamp = clamp;
        Ok((row, diag))
    }

    /// Dense kernel matrix, row-major; intended for small instances.
    pub fn kernel_matrix(&self, t: f64, tol: f64) -> Result<Vec<T>> {
        let n = self.env.len();
        let mut out = Vec::with_capacity(n * n);
        for x in 0..n {
            out.extend(self.kernel_row(x, t, tol)?.0);
        }
        Ok(out)
    }
}

pub fn heat_kernel_row<T: Scalar>(env: &Environment<T>, eps: T, x: usize, t: f64, tol: f64) -> Result<Vec<T>> {
    Ok(Uniformizer::new(env, eps)?.kernel_row(x, t, tol)?.0)
}

pub fn semigroup_apply<T: Scalar>(env: &Environment<T>, eps: T, t: f64, f: &[T], tol: f64) -> Result<Vec<T>> {
    Ok(Uniformizer::new(env, eps)?.apply(t, f, tol)?.0)
}
