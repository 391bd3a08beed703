use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::empirical::{init_product_bernoulli, PointWeights};
use super::heat::MacroProfile;
use super::test_functions::TestFunction;
use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::exclusion::{default_slab_width, evolve_with, ClockSchedule, EvolveOptions, DEFAULT_COMPONENT_CAP};
use crate::scalar::Scalar;
use crate::seeds::{self, seed_derive};

pub const DEFAULT_TIME_POINTS: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct HydroConfig {
    pub eps: Vec<f64>,
    pub horizon: f64,
    /// Uniform grid on `[0, horizon]`, endpoints included.
    pub time_points: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Thresholds for the exceedance frequencies.
    pub deltas: Vec<f64>,
    pub component_cap: usize,
}

impl HydroConfig {
    pub fn new(eps: Vec<f64>, horizon: f64, replicas: usize, seed: u64) -> Self {
        HydroConfig {
            eps,
            horizon,
            time_points: DEFAULT_TIME_POINTS,
            replicas,
            seed,
            deltas: vec![0.01, 0.02, 0.05, 0.1],
            component_cap: DEFAULT_COMPONENT_CAP,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.time_points - 1;
        (0..=n).map(|k| self.horizon * k as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationRow {
    pub eps: f64,
    pub phi: usize,
    pub replica: usize,
    pub sup_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleSummary {
    pub eps: f64,
    /// Median sup-deviation per test function.
    pub median: Vec<f64>,
    /// `exceedance[φ][k]`: fraction of replicas above `deltas[k]`.
    pub exceedance: Vec<Vec<f64>>,
    pub mean_events: f64,
    pub max_halvings: usize,
    pub max_component: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HydroReport {
    pub schema_version: u32,
    pub config: HydroConfig,
    pub intensity: f64,
    pub times: Vec<f64>,
    /// `m ∫ φ ρ(·, t)` per test function and grid time.
    pub targets: Vec<Vec<f64>>,
    pub quadrature_tol: f64,
    pub scales: Vec<ScaleSummary>,
    #[serde(skip)]
    pub deviations: Vec<DeviationRow>,
}

impl HydroReport {
    pub fn median(&self, eps_index: usize, phi: usize) -> f64 {
        self.scales[eps_index].median[phi]
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// `eps,phi,replica,sup_deviation` rows.
    pub fn write_deviations_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["eps", "phi", "replica", "sup_deviation"])?;
        for r in &self.deviations {
            out.write_record([
                format!("{:e}", r.eps),
                r.phi.to_string(),
                r.replica.to_string(),
                format!("{:e}", r.sup_deviation),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `x,t,rho` rows of the heat solution on a grid, for plotting.
pub fn write_profile_csv<T: Scalar, W: Write>(profile: &MacroProfile<T>, xs: &[Vec<T>], ts: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "t", "rho"])?;
    for x in xs {
        let label = x.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ");
        for &t in ts {
            out.write_record([label.clone(), format!("{t}"), format!("{:e}", profile.heat_solution(x, t)?)])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Replicated comparison of `π^ε_t(φ)` with `m ∫ φ ρ(·, t)` along the
/// exclusion process sped up by `ε^{−2}`, from product Bernoulli data.
pub fn hydro_experiment<T: Scalar>(
    env: &Environment<T>,
    profile: &MacroProfile<T>,
    phis: &[TestFunction<T>],
    cfg: &HydroConfig,
) -> Result<HydroReport> {
    if cfg.eps.is_empty() || cfg.eps.iter().any(|e| !(*e > 0.0)) {
        return Err(SepError::invalid("scales must be positive"));
    }
    if !(cfg.horizon > 0.0) || cfg.time_points < 2 || cfg.replicas == 0 {
        return Err(SepError::invalid("need a positive horizon, two grid points and one replica"));
    }
    if profile.dim() != env.dim() || phis.iter().any(|p| p.dim() != env.dim()) {
        return Err(SepError::invalid("dimension mismatch"));
    }
    let spread = 6.0 * (2.0 * profile.d.max_eigenvalue().as_f64() * cfg.horizon).sqrt();
    let inner = env.torus().inradius().as_f64();
    for phi in phis {
        let need = phi.reach().as_f64() + spread;
        for &e in &cfg.eps {
            if need > e * inner {
                return Err(SepError::SupportViolation {
                    message: format!(
                        "support reach plus diffusive spread {need} exceeds the scaled half box {} at ε = {e}",
                        e * inner
                    ),
                    required_side: env.box_side().as_f64() * need / (e * inner),
                });
            }
        }
    }

    let times = cfg.times();
    let m = env.intensity().as_f64();
    let targets = phis
        .iter()
        .map(|phi| {
            times
                .iter()
                .map(|&t| Ok(m * profile.integrate_against(phi, T::lit(t))?.as_f64()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let opts = EvolveOptions {
        cap: cfg.component_cap,
        snapshots: times.clone(),
        check_order: false,
        ..EvolveOptions::default()
    };
    let mut scales = Vec::with_capacity(cfg.eps.len());
    let mut deviations = Vec::new();
    for (ei, &eps) in cfg.eps.iter().enumerate() {
        let eps_t = T::lit(eps);
        let weights: Vec<PointWeights> = phis.iter().map(|p| PointWeights::new(env, eps_t, |x| p.value(x))).collect();
        let speed = eps.powi(-2);
        let width = default_slab_width(env, speed).0.min(cfg.horizon);
        let runs = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| -> Result<(Vec<f64>, usize, usize, usize)> {
                let index = ((ei as u64) << 32) | r as u64;
                let eta0 = init_product_bernoulli(env, &profile.initial, eps_t, seed_derive(cfg.seed, seeds::INIT_BERNOULLI, index)?)?;
                let k = ClockSchedule::sample(env, speed, cfg.horizon, width, seed_derive(cfg.seed, seeds::HYDRO_REPLICA, index)?)?;
                let out = evolve_with(env, &k, &eta0, cfg.horizon, &opts)?;
                let sups = weights
                    .iter()
                    .zip(&targets)
                    .map(|(w, target)| {
                        out.snapshots
                            .iter()
                            .zip(target)
                            .map(|((_, c), y)| (w.apply(c) - y).abs())
                            .fold(0.0, f64::max)
                    })
                    .collect();
                Ok((sups, out.halvings, out.max_component, out.event_count))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut median_v = Vec::with_capacity(phis.len());
        let mut exceedance = Vec::with_capacity(phis.len());
        for j in 0..phis.len() {
            let mut col: Vec<f64> = runs.iter().map(|r| r.0[j]).collect();
            for (r, v) in col.iter().enumerate() {
                deviations.push(DeviationRow {
                    eps,
                    phi: j,
                    replica: r,
                    sup_deviation: *v,
                });
            }
            exceedance.push(
                cfg.deltas
                    .iter()
                    .map(|d| col.iter().filter(|v| **v > *d).count() as f64 / col.len() as f64)
                    .collect(),
            );
            median_v.push(median(&mut col));
        }
        scales.push(ScaleSummary {
            eps,
            median: median_v,
            exceedance,
            mean_events: runs.iter().map(|r| r.3 as f64).sum::<f64>() / runs.len() as f64,
            max_halvings: runs.iter().map(|r| r.1).max().unwrap_or(0),
            max_component: runs.iter().map(|r| r.2).max().unwrap_or(0),
        });
    }
    Ok(HydroReport {
        schema_version: 1,
        config: cfg.clone(),
        intensity: m,
        times,
        targets,
        quadrature_tol: profile.tol.as_f64(),
        scales,
        deviations,
    })
}
