use sepsim::hydrodynamics::{test_family, TestFunction};

use crate::config::{diffusivity_bound, half_box, ExperimentConfig};
use crate::Command;

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Diagnostics for running `cmd` with `cfg`; empty when the run may start.
/// Pure: nothing is sampled and no file is touched.
pub fn validate(cfg: &ExperimentConfig, cmd: Command) -> Vec<String> {
    let mut out = Vec::new();
    match (&cfg.environment, &cfg.env_file) {
        (Some(law), None) => out.extend(law.diagnostics()),
        (None, Some(_)) => {}
        (Some(_), Some(_)) => out.push("give either [environment] or env_file, not both".into()),
        (None, None) => out.push("missing [environment] section or env_file".into()),
    }
    if cmd == Command::GenEnv && cfg.environment.is_none() {
        out.push("gen-env samples a law; env_file is not accepted".into());
    }
    if cfg.workers == Some(0) {
        out.push("workers must be positive".into());
    }
    let s = &cfg.solver;
    if !positive(s.corrector_tol) || s.corrector_tol >= 1.0 {
        out.push("solver.corrector_tol must lie in (0, 1)".into());
    }
    if !positive(s.heat_tol) {
        out.push("solver.heat_tol must be positive".into());
    }
    if s.component_cap < 2 {
        out.push("solver.component_cap must be at least 2".into());
    }

    match cmd {
        Command::GenEnv => {}
        Command::EstimateD => {
            if let Some(m) = &cfg.msd {
                if !positive(m.t) {
                    out.push("msd.t must be positive".into());
                }
                if m.replicas < 1000 {
                    out.push("msd.replicas must be at least 1000".into());
                }
            }
        }
        Command::SimulateSep => match &cfg.sep {
            None => out.push("simulate-sep needs a [sep] section".into()),
            Some(sep) => {
                if !positive(sep.horizon) {
                    out.push("sep.horizon must be positive".into());
                }
                if !positive(sep.eps) {
                    out.push("sep.eps must be positive".into());
                }
                if sep.occupied.is_some() == sep.profile.is_some() {
                    out.push("sep needs exactly one of `occupied` and `profile`".into());
                }
                if let Some(p) = &sep.profile {
                    if let Some(law) = &cfg.environment {
                        if let Err(e) = p.validate(law.dim()) {
                            out.push(format!("sep.profile: {e}"));
                        }
                    }
                }
                if sep.snapshots.iter().any(|t| !(*t >= 0.0 && *t <= sep.horizon)) {
                    out.push("sep.snapshots must lie in [0, horizon]".into());
                }
                if sep.martingale && sep.snapshots.is_empty() {
                    out.push("sep.martingale needs snapshot times".into());
                }
                if let Some(w) = sep.slab_width {
                    if !(positive(w) && w <= sep.horizon) {
                        out.push("sep.slab_width must lie in (0, horizon]".into());
                    }
                }
            }
        },
        Command::DualityTest => match &cfg.duality {
            None => out.push("duality-test needs a [duality] section".into()),
            Some(d) => {
                if d.replicas < 100 {
                    out.push("duality.replicas must be at least 100".into());
                }
                if d.cases.is_empty() && d.random_cases == 0 {
                    out.push("duality needs `cases` or `random_cases`".into());
                }
                if d.cases.iter().any(|c| !(c.t >= 0.0 && c.t.is_finite())) {
                    out.push("duality case times must be finite and nonnegative".into());
                }
                if !positive(d.max_t) {
                    out.push("duality.max_t must be positive".into());
                }
            }
        },
        Command::NagyTest => match &cfg.nagy {
            None => out.push("nagy-test needs a [nagy] section".into()),
            Some(n) => {
                if n.instances == 0 {
                    out.push("nagy.instances must be positive".into());
                }
                if !positive(n.horizon) {
                    out.push("nagy.horizon must be positive".into());
                }
                if !(n.quad_tol >= 1e-8) {
                    out.push("nagy.quad_tol must be at least 1e-8".into());
                }
                if !positive(n.residual_bound) {
                    out.push("nagy.residual_bound must be positive".into());
                }
            }
        },
        Command::Hydro => match &cfg.hydro {
            None => out.push("hydro needs a [hydro] section".into()),
            Some(h) => validate_hydro(cfg, h, &mut out),
        },
    }
    out
}

fn validate_hydro(cfg: &ExperimentConfig, h: &crate::config::HydroSection, out: &mut Vec<String>) {
    if h.eps.is_empty() || h.eps.iter().any(|e| !positive(*e)) {
        out.push("hydro.eps must be a nonempty list of positive scales".into());
    }
    if !positive(h.horizon) {
        out.push("hydro.horizon must be positive".into());
    }
    if h.replicas == 0 {
        out.push("hydro.replicas must be positive".into());
    }
    if h.time_points < 9 {
        out.push("hydro.time_points must be at least 9".into());
    }
    if h.test_functions == 0 {
        out.push("hydro.test_functions must be positive".into());
    }
    if let Some(deltas) = &h.deltas {
        if deltas.iter().any(|d| !positive(*d)) {
            out.push("hydro.deltas must be positive".into());
        }
    }
    let Some(law) = &cfg.environment else { return };
    let dim = law.dim();
    if let Err(e) = h.initial.validate(dim) {
        out.push(format!("hydro.initial: {e}"));
    }
    let lambda = match &h.d {
        Some(rows) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                out.push(format!("hydro.d must be a {dim}x{dim} matrix"));
                return;
            }
            // Gershgorin bound on the largest eigenvalue.
            Some(rows.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max))
        }
        None => diffusivity_bound(law),
    };
    let (Some(lambda), Some(half)) = (lambda, half_box(law)) else { return };
    if !positive(h.horizon) || dim == 0 {
        return;
    }
    let reach = test_family::<f64>(dim, h.test_functions.max(1))
        .iter()
        .map(TestFunction::reach)
        .fold(0.0, f64::max);
    let need = reach + 6.0 * (2.0 * lambda * h.horizon).sqrt();
    for e in h.eps.iter().filter(|e| positive(**e)) {
        if need > e * half {
            out.push(format!(
                "support violation at eps = {e}: r_supp + 6 sqrt(2 lambda_max T) = {need:.4} exceeds eps L/2 = {:.4}",
                e * half
            ));
        }
    }
}
