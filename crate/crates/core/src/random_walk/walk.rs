use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::scalar::Scalar;
use crate::seeds::{self, stream};

/// Piecewise-constant trajectory of the walk on `[0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub start: usize,
    /// `(jump time, point entered)`, times strictly increasing.
    pub jumps: Vec<(f64, usize)>,
    pub t_end: f64,
}

impl WalkPath {
    pub fn position_at(&self, t: f64) -> usize {
        let k = self.jumps.partition_point(|(s, _)| *s <= t);
        if k == 0 {
            self.start
        } else {
            self.jumps[k - 1].1
        }
    }

    pub fn end_point(&self) -> usize {
        self.jumps.last().map_or(self.start, |j| j.1)
    }

    /// Holding times of the completed sojourns.
    pub fn holding_times(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.jumps
            .iter()
            .map(|(s, _)| {
                let h = s - prev;
                prev = *s;
                h
            })
            .collect()
    }
}

/// Picks a neighbor of `i` with probability `c_ij / c_i`.
pub(crate) fn choose_neighbor<T: Scalar, R: Rng + ?Sized>(env: &Environment<T>, i: usize, rng: &mut R) -> (usize, usize) {
    let (offsets, nbr, rate) = env.csr();
    let total = env.exit_rate(i).as_f64();
    let mut u = rng.random::<f64>() * total;
    let (s, e) = (offsets[i], offsets[i + 1]);
    for k in s..e {
        let r = rate[k].as_f64();
        if u < r {
            return (nbr[k], k);
        }
        u -= r;
    }
    // Rounding left a sliver of mass past the last positive rate.
    let k = (s..e).rev().find(|&k| rate[k] > T::zero()).expect("positive exit rate");
    (nbr[k], k)
}

/// Samples the walk from `x0` with unit time scale up to `t_end`.
pub fn sample_walk_path<T: Scalar>(env: &Environment<T>, x0: usize, t_end: f64, seed: u64) -> Result<WalkPath> {
    let mut rng = stream(seed, seeds::WALK_PATH, 0);
    sample_walk_path_with(env, x0, t_end, &mut rng)
}

pub fn sample_walk_path_with<T: Scalar, R: Rng + ?Sized>(
    env: &Environment<T>,
    x0: usize,
    t_end: f64,
    rng: &mut R,
) -> Result<WalkPath> {
    if x0 >= env.len() {
        return Err(SepError::invalid(format!("start point {x0} out of range")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(SepError::invalid("end time must be finite and nonnegative"));
    }
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let mut x = x0;
    loop {
        let hold: f64 = Exp1.sample(rng);
        t += hold / env.exit_rate(x).as_f64();
        if t > t_end {
            break;
        }
        x = choose_neighbor(env, x, rng).0;
        jumps.push((t, x));
    }
    Ok(WalkPath {
        start: x0,
        jumps,
        t_end,
    })
}

/// Unwrapped displacement accumulated jump by jump up to time `t`, and the
/// number of jumps.
pub(crate) fn walk_displacement<T: Scalar, R: Rng + ?Sized>(
    env: &Environment<T>,
    x0: usize,
    t: f64,
    rng: &mut R,
    disp: &mut [f64],
) -> usize {
    disp.iter_mut().for_each(|v| *v = 0.0);
    let mut time = 0.0;
    let mut x = x0;
    let mut jumps = 0;
    loop {
        let hold: f64 = Exp1.sample(rng);
        time += hold / env.exit_rate(x).as_f64();
        if time > t {
            return jumps;
        }
        let (y, k) = choose_neighbor(env, x, rng);
        let e = env.csr_edge(k);
        let sign = if env.edges()[e].i == x { 1.0 } else { -1.0 };
        for (slot, v) in disp.iter_mut().zip(env.edge_displacement(e)) {
            *slot += sign * v.as_f64();
        }
        x = y;
        jumps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{gen_zd_conductance, ConductanceLaw};

    #[test]
    fn zero_time_path() {
        let env: Environment<f64> = gen_zd_conductance(1, 4, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        let p = sample_walk_path(&env, 2, 0.0, 1).unwrap();
        assert_eq!(p.jumps, vec![]);
        assert_eq!(p.position_at(0.0), 2);
    }

    #[test]
    fn jumps_follow_edges() {
        let env: Environment<f64> = gen_zd_conductance(2, 5, &ConductanceLaw::Exponential { rate: 1.0 }, 0).unwrap();
        let p = sample_walk_path(&env, 0, 30.0, 9).unwrap();
        let mut prev = p.start;
        let mut last_t = 0.0;
        for &(t, x) in &p.jumps {
            assert!(t > last_t);
            assert!(env.rate(prev, x) > 0.0);
            prev = x;
            last_t = t;
        }
    }
}
