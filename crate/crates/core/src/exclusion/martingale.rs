use std::io::Write;

use serde::Serialize;

use super::clocks::ClockSchedule;
use super::config::ParticleConfig;
use super::evolve::{evolve_with, EvolveOptions};
use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::scalar::Scalar;

/// `M_t = π_t(u) − π_0(u) − ∫₀ᵗ ε^{−2}ℒπ(u)(η_s) ds` and its bracket
/// `∫₀ᵗ B(η_s) ds` at the requested times.
#[derive(Debug, Clone, Serialize)]
pub struct MartingalePath {
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    pub bracket: Vec<f64>,
}

impl MartingalePath {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "M", "bracket"])?;
        for k in 0..self.times.len() {
            out.write_record([
                format!("{:e}", self.times[k]),
                format!("{:e}", self.m[k]),
                format!("{:e}", self.bracket[k]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Dynkin martingale of `π^ε(u)` along the trajectory driven by `k`, whose
/// clocks must run at `ε^{−2}` times the environment rates.
///
/// Drift and bracket integrands are constant between events, so both time
/// integrals are exact sums.
pub fn dynkin_path<T: Scalar>(
    env: &Environment<T>,
    eps: f64,
    k: &ClockSchedule,
    xi: &ParticleConfig,
    u: &[f64],
    times: &[f64],
) -> Result<MartingalePath> {
    let n = env.len();
    if u.len() != n || xi.len() != n {
        return Err(SepError::invalid("u and ξ must have one entry per point"));
    }
    if !(eps > 0.0) {
        return Err(SepError::invalid("scale must be positive"));
    }
    let speed = eps.powi(-2);
    if (k.rate_scale() - speed).abs() > 1e-12 * speed {
        return Err(SepError::invalid(format!(
            "clock rates are scaled by {} but the walk speed is ε^-2 = {speed}",
            k.rate_scale()
        )));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(SepError::invalid("times must be sorted"));
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    if times.iter().any(|t| !(*t >= 0.0 && *t <= k.horizon())) {
        return Err(SepError::invalid(format!("times must lie in [0, {}]", k.horizon())));
    }
    let d = env.dim() as i32;
    let mass = eps.powi(d);
    let drift_scale = eps.powi(d - 2);
    let bracket_scale = eps.powi(2 * d - 2);

    // g(x) = Σ_y c_xy (u_y − u_x), so the drift is ε^{d−2} Σ_x η(x) g(x).
    let g: Vec<f64> = (0..n)
        .map(|x| env.neighbors(x).map(|nb| nb.rate.as_f64() * (u[nb.point] - u[x])).sum())
        .collect();
    let edge_weight: Vec<f64> = env
        .edges()
        .iter()
        .map(|e| e.rate.as_f64() * (u[e.i] - u[e.j]).powi(2))
        .collect();

    let mut eta = xi.clone();
    let pi0: f64 = eta.occupied().map(|x| u[x]).sum::<f64>() * mass;
    let mut pi = pi0;
    let mut drift: f64 = eta.occupied().map(|x| g[x]).sum::<f64>() * drift_scale;
    // Only edges joining an occupied and an empty point contribute.
    let mut bsum: f64 = env
        .edges()
        .iter()
        .zip(&edge_weight)
        .filter(|(e, _)| eta.get(e.i) != eta.get(e.j))
        .map(|(_, w)| w)
        .sum();

    let opts = EvolveOptions {
        record_events: true,
        check_order: false,
        ..EvolveOptions::default()
    };
    let events = evolve_with(env, k, xi, t_end, &opts)?.events;

    let mut path = MartingalePath {
        times: times.to_vec(),
        m: Vec::with_capacity(times.len()),
        bracket: Vec::with_capacity(times.len()),
    };
    let mut now = 0.0;
    let mut integral = 0.0;
    let mut bracket = 0.0;
    let mut next = 0;
    for ev in events.iter().map(Some).chain(std::iter::once(None)) {
        let until = ev.map_or(f64::INFINITY, |e| e.time);
        // Path values are right-continuous: a time equal to an event time
        // sees the exchange.
        while next < times.len() && times[next] < until {
            integral += drift * (times[next] - now);
            bracket += bsum * bracket_scale * (times[next] - now);
            now = times[next];
            path.m.push(pi - pi0 - integral);
            path.bracket.push(bracket);
            next += 1;
        }
        let Some(ev) = ev else { break };
        integral += drift * (ev.time - now);
        bracket += bsum * bracket_scale * (ev.time - now);
        now = ev.time;
        if !ev.swapped {
            continue;
        }
        let (i, j) = (ev.i, ev.j);
        let incident = |eta: &ParticleConfig| -> f64 {
            let mut s = 0.0;
            for p in [i, j] {
                for nb in env.neighbors(p) {
                    if p == j && nb.point == i {
                        continue;
                    }
                    if eta.get(p) != eta.get(nb.point) {
                        s += edge_weight[nb.edge];
                    }
                }
            }
            s
        };
        let before = incident(&eta);
        let (from, to) = if eta.get(i) { (i, j) } else { (j, i) };
        eta.exchange_in_place(i, j);
        bsum += incident(&eta) - before;
        pi += (u[to] - u[from]) * mass;
        drift += (g[to] - g[from]) * drift_scale;
    }
    Ok(path)
}
