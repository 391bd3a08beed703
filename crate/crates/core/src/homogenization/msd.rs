use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::random_walk::walk_displacement;
use crate::scalar::Scalar;
use crate::seeds::{self, stream};

/// `Cov(X_t)/(2t)` with per-entry standard errors, row-major.
#[derive(Debug, Clone, Serialize)]
pub struct MsdEstimate {
    pub dim: usize,
    pub t: f64,
    pub replicas: usize,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    pub mean_jumps: f64,
    pub warning: Option<String>,
}

impl MsdEstimate {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.estimate[i * self.dim + j]
    }

    pub fn stderr(&self, i: usize, j: usize) -> f64 {
        self.stderr[i * self.dim + j]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "entry", "estimate", "stderr"])?;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.write_record([
                    format!("{:e}", self.t),
                    format!("{i}{j}"),
                    format!("{:e}", self.entry(i, j)),
                    format!("{:e}", self.stderr(i, j)),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Mean-square-displacement estimate of `D` from walks started at uniformly
/// chosen points.
pub fn msd_diffusivity<T: Scalar>(
    env: &Environment<T>,
    t: f64,
    replicas: usize,
    seed: u64,
    strict: bool,
) -> Result<MsdEstimate> {
    if replicas < 1000 {
        return Err(SepError::invalid("at least 1000 replicas are required"));
    }
    let mean_rate: f64 = env.exit_rates().iter().map(|c| c.as_f64()).sum::<f64>() / env.len() as f64;
    if !(t > 0.0) || t * mean_rate < 100.0 {
        return Err(SepError::invalid(format!(
            "expected jump count {} is below 100; increase t",
            t * mean_rate
        )));
    }
    let d = env.dim();
    let samples: Vec<(Vec<f64>, usize)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, seeds::WALK_MSD, r as u64);
            let x0 = rng.random_range(0..env.len());
            let mut disp = vec![0.0; d];
            let jumps = walk_displacement(env, x0, t, &mut rng, &mut disp);
            (disp, jumps)
        })
        .collect();

    let n = replicas as f64;
    let mut mean = vec![0.0; d];
    for (x, _) in &samples {
        for k in 0..d {
            mean[k] += x[k] / n;
        }
    }
    let mut estimate = vec![0.0; d * d];
    let mut stderr = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let vals: Vec<f64> = samples
                .iter()
                .map(|(x, _)| (x[i] - mean[i]) * (x[j] - mean[j]) / (2.0 * t))
                .collect();
            let m = vals.iter().sum::<f64>() / (n - 1.0);
            let mu = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0);
            estimate[i * d + j] = m;
            stderr[i * d + j] = (var / n).sqrt();
        }
    }
    let mean_jumps = samples.iter().map(|(_, k)| *k as f64).sum::<f64>() / n;
    let trace: f64 = (0..d).map(|i| estimate[i * d + i]).sum();
    let spread = (2.0 * trace * t).sqrt();
    let limit = env.torus().inradius().as_f64() / 2.0;
    let warning = (spread > limit).then(|| {
        format!("typical displacement {spread:.3} exceeds a quarter of the box ({limit:.3}); the torus may bias the estimate")
    });
    if strict {
        if let Some(w) = &warning {
            return Err(SepError::SupportViolation {
                message: w.clone(),
                required_side: env.box_side().as_f64() * spread / limit,
            });
        }
    }
    Ok(MsdEstimate {
        dim: d,
        t,
        replicas,
        estimate,
        stderr,
        mean_jumps,
        warning,
    })
}
