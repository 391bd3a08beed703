use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::linalg::{conjugate_gradient, dot, norm2, CgOptions, LinearOperator};
use crate::scalar::Scalar;

pub const DEFAULT_CORRECTOR_TOL: f64 = 1e-10;

/// Periodic corrector in direction `a`.
#[derive(Debug, Clone)]
pub struct Corrector<T> {
    pub direction: Vec<T>,
    /// Zero-mean point function.
    pub chi: Vec<T>,
    /// `(1/2N) Σ_i Σ_j c_ij (a·δ_ij − (χ_j − χ_i))²`.
    pub energy: T,
    /// Energy of the trial function `χ = 0`.
    pub trivial_energy: T,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Graph Laplacian `(Aχ)_i = Σ_j c_ij (χ_i − χ_j)`.
struct Laplacian<'a, T> {
    env: &'a Environment<T>,
}

impl<T: Scalar> LinearOperator<T> for Laplacian<'_, T> {
    fn dim(&self) -> usize {
        self.env.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let (offsets, nbr, rate) = self.env.csr();
        for i in 0..x.len() {
            let mut s = T::zero();
            for k in offsets[i]..offsets[i + 1] {
                s += rate[k] * (x[i] - x[nbr[k]]);
            }
            y[i] = s;
        }
    }

    fn diagonal(&self) -> Vec<T> {
        self.env.exit_rates().to_vec()
    }
}

fn projections<T: Scalar>(env: &Environment<T>, a: &[T]) -> Vec<T> {
    (0..env.num_edges()).map(|e| dot(a, env.edge_displacement(e))).collect()
}

fn energy<T: Scalar>(env: &Environment<T>, s: &[T], chi: &[T]) -> T {
    let mut acc = T::zero();
    for (k, e) in env.edges().iter().enumerate() {
        let r = s[k] - (chi[e.j] - chi[e.i]);
        acc += e.rate * r * r;
    }
    acc / T::from_usize_lossy(env.len())
}

/// Visiting order of a connected 2-regular graph, as `(point, edge to the
/// next point, orientation)` triples.
fn cycle_order<T: Scalar>(env: &Environment<T>) -> Option<Vec<(usize, usize, bool)>> {
    let n = env.len();
    if n < 3 || env.num_edges() != n || (0..n).any(|i| env.degree(i) != 2) {
        return None;
    }
    let mut order = Vec::with_capacity(n);
    let mut prev_edge = usize::MAX;
    let mut cur = 0;
    for _ in 0..n {
        let nb = env.neighbors(cur).find(|nb| nb.edge != prev_edge)?;
        let forward = env.edges()[nb.edge].i == cur;
        order.push((cur, nb.edge, forward));
        prev_edge = nb.edge;
        cur = nb.point;
    }
    (cur == 0).then_some(order)
}

/// Solves the corrector equation `Σ_j c_ij (χ_j − χ_i) = Σ_j c_ij a·δ_ij`
/// with the mean-zero gauge.
pub fn corrector_solve<T: Scalar>(env: &Environment<T>, a: &[T], tol: f64) -> Result<Corrector<T>> {
    if a.len() != env.dim() {
        return Err(SepError::invalid("direction has the wrong dimension"));
    }
    if env.has_ambiguous_displacement() {
        return Err(SepError::invalid(
            "an edge spans half the period, so its displacement is ambiguous; enlarge the box",
        ));
    }
    let n = env.len();
    let s = projections(env, a);
    // A χ = g with A the graph Laplacian and g_i = −Σ_j c_ij a·δ_ij.
    let mut g = vec![T::zero(); n];
    for (k, e) in env.edges().iter().enumerate() {
        g[e.i] -= e.rate * s[k];
        g[e.j] += e.rate * s[k];
    }
    let total: T = g.iter().copied().sum();
    let scale: T = g.iter().map(|v| v.abs()).sum();
    if total.abs() > T::lit(1e-10).max(T::epsilon() * T::lit(64.0)) * scale.max(T::min_positive_value()) {
        return Err(SepError::InconsistentSystem(format!(
            "right-hand side sums to {total} (scale {scale})"
        )));
    }

    // Symmetric environments cancel the drift up to roundoff; χ = 0 then.
    let drift_scale: T = env.edges().iter().zip(&s).map(|(e, v)| e.rate * v.abs()).sum();
    let trivial = norm2(&g) <= T::epsilon() * T::lit(64.0) * drift_scale;
    let (chi, iterations) = if trivial {
        (vec![T::zero(); n], 0)
    } else if let Some(order) = cycle_order(env) {
        // On a ring the flux J = c_e (s_e − Δχ_e) is the same on every edge.
        let mut sum_s = T::zero();
        let mut sum_r = T::zero();
        for &(_, e, fwd) in &order {
            let se = if fwd { s[e] } else { -s[e] };
            sum_s += se;
            sum_r += T::one() / env.edges()[e].rate;
        }
        let flux = sum_s / sum_r;
        let mut chi = vec![T::zero(); n];
        let mut acc = T::zero();
        for w in order.windows(2) {
            let (_, e, fwd) = w[0];
            let se = if fwd { s[e] } else { -s[e] };
            acc += se - flux / env.edges()[e].rate;
            chi[w[1].0] = acc;
        }
        let m = chi.iter().copied().sum::<T>() / T::from_usize_lossy(n);
        chi.iter_mut().for_each(|v| *v -= m);
        (chi, 0)
    } else {
        let mut chi = vec![T::zero(); n];
        let mut opts = CgOptions::new(tol, n);
        opts.project_constants = true;
        let report = conjugate_gradient(&Laplacian { env }, &g, &mut chi, &opts)?;
        let m = chi.iter().copied().sum::<T>() / T::from_usize_lossy(n);
        chi.iter_mut().for_each(|v| *v -= m);
        (chi, report.iterations)
    };

    let mut ax = vec![T::zero(); n];
    Laplacian { env }.apply(&chi, &mut ax);
    let res: Vec<T> = ax.iter().zip(&g).map(|(x, y)| *x - *y).collect();
    let gnorm = norm2(&g);
    let relative_residual = if trivial {
        0.0
    } else if gnorm > T::zero() {
        (norm2(&res) / gnorm).as_f64()
    } else {
        norm2(&res).as_f64()
    };
    // The direct ring solve is exact up to roundoff accumulated along the cycle.
    let floor = if iterations == 0 { 64.0 * n as f64 } else { 1e3 } * T::epsilon().as_f64();
    if relative_residual > tol.max(floor) {
        return Err(SepError::NoConvergence {
            iterations,
            residual: relative_residual,
            history: vec![],
        });
    }
    let zero = vec![T::zero(); n];
    let e = energy(env, &s, &chi);
    let trivial_energy = energy(env, &s, &zero);
    Ok(Corrector {
        direction: a.to_vec(),
        chi,
        energy: e,
        trivial_energy,
        iterations,
        relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{gen_zd_conductance, ConductanceLaw};

    #[test]
    fn ring_energy_is_harmonic_mean() {
        let law = ConductanceLaw::Periodic { values: vec![1.0, 2.0, 4.0, 0.5, 3.0] };
        let env: Environment<f64> = gen_zd_conductance(1, 10, &law, 0).unwrap();
        let c = corrector_solve(&env, &[1.0], 1e-12).unwrap();
        let h = 10.0 / (2.0 * (1.0 + 0.5 + 0.25 + 2.0 + 1.0 / 3.0));
        assert!((c.energy - h).abs() < 1e-12, "{} vs {h}", c.energy);
        assert!(c.energy <= c.trivial_energy);
        assert!(c.chi.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn ambiguous_displacement_rejected() {
        let env: Environment<f64> = gen_zd_conductance(1, 2, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        assert!(corrector_solve(&env, &[1.0], 1e-10).is_err());
    }
}
