use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::linalg::{dot, LinearOperator};
use crate::scalar::Scalar;

/// `(𝕃^ε u)(i) = ε^{−2} Σ_j c_ij (u_j − u_i)`.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorOperator<'a, T> {
    env: &'a Environment<T>,
    eps: T,
    rate_scale: T,
    max_rate: T,
}

impl<'a, T: Scalar> GeneratorOperator<'a, T> {
    pub fn new(env: &'a Environment<T>, eps: T) -> Result<Self> {
        if !(eps > T::zero()) || !eps.is_finite() {
            return Err(SepError::invalid("scale must be positive and finite"));
        }
        Ok(GeneratorOperator {
            env,
            eps,
            rate_scale: T::one() / (eps * eps),
            max_rate: env.max_exit_rate(),
        })
    }

    pub fn env(&self) -> &'a Environment<T> {
        self.env
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    /// `ε^{−2}`.
    pub fn rate_scale(&self) -> T {
        self.rate_scale
    }

    /// `max_i c_i` of the unscaled environment.
    pub fn max_rate(&self) -> T {
        self.max_rate
    }

    pub fn apply_into(&self, u: &[T], out: &mut [T]) {
        let (offsets, nbr, rate) = self.env.csr();
        for i in 0..self.env.len() {
            let ui = u[i];
            let mut s = T::zero();
            for k in offsets[i]..offsets[i + 1] {
                s += rate[k] * (u[nbr[k]] - ui);
            }
            out[i] = s * self.rate_scale;
        }
    }

    pub fn apply(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        self.apply_into(u, &mut out);
        out
    }

    /// `⟨u, v⟩` in `L²(μ^ε)`: `ε^d Σ_i u_i v_i`.
    pub fn inner(&self, u: &[T], v: &[T]) -> T {
        self.eps.powi(self.env.dim() as i32) * dot(u, v)
    }

    pub fn norm(&self, u: &[T]) -> T {
        self.inner(u, u).sqrt()
    }
}

/// `λ − 𝕃^ε`, symmetric positive definite for `λ > 0`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedOperator<'a, T> {
    pub generator: GeneratorOperator<'a, T>,
    pub lambda: T,
}

impl<T: Scalar> LinearOperator<T> for ShiftedOperator<'_, T> {
    fn dim(&self) -> usize {
        self.generator.env.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.generator.apply_into(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.lambda * *xi - *yi;
        }
    }

    fn diagonal(&self) -> Vec<T> {
        self.generator
            .env
            .exit_rates()
            .iter()
            .map(|c| self.lambda + *c * self.generator.rate_scale)
            .collect()
    }
}

/// `ℰ^ε(u, v) = ε^{d−2} Σ_{edges} c_ij (u_j − u_i)(v_j − v_i)`.
pub fn dirichlet_form<T: Scalar>(env: &Environment<T>, eps: T, u: &[T], v: &[T]) -> Result<T> {
    if u.len() != env.len() || v.len() != env.len() {
        return Err(SepError::invalid("function length differs from the point count"));
    }
    let mut s = T::zero();
    for e in env.edges() {
        s += e.rate * (u[e.j] - u[e.i]) * (v[e.j] - v[e.i]);
    }
    Ok(s * eps.powi(env.dim() as i32 - 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{gen_zd_conductance, ConductanceLaw};

    #[test]
    fn constants_are_harmonic_and_form_matches() {
        let env: Environment<f64> = gen_zd_conductance(1, 16, &ConductanceLaw::Uniform { low: 1.0, high: 2.0 }, 4).unwrap();
        let g = GeneratorOperator::new(&env, 0.25).unwrap();
        assert!(g.apply(&vec![3.0; 16]).iter().all(|v| v.abs() < 1e-12));
        let u: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let v: Vec<f64> = (0..16).map(|i| (i as f64 * 0.3).sin()).collect();
        let e = dirichlet_form(&env, 0.25, &u, &v).unwrap();
        let via_gen = -g.inner(&u, &g.apply(&v));
        assert!((e - via_gen).abs() <= 1e-10 * e.abs().max(1.0));
        let sym = g.inner(&u, &g.apply(&v)) - g.inner(&g.apply(&u), &v);
        assert!(sym.abs() < 1e-10);
    }
}
