use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sepsim::environment::{load_environment, write_environment, Environment};
use sepsim::exclusion::{
    default_slab_width, duality_mc, dynkin_path, evolve_with, nagy_check, ClockSchedule, DualityResult,
    EvolveOptions, ParticleConfig, KERNEL_TOL, NAGY_MAX_POINTS,
};
use sepsim::homogenization::{effective_matrix, msd_diffusivity, DReport, EffectiveMatrix, RANK_THRESHOLD};
use sepsim::hydrodynamics::{
    hydro_experiment, init_product_bernoulli, test_family, write_profile_csv, HydroConfig, MacroProfile, TestFunction,
};
use sepsim::random_walk::{MAX_SPLITS, SPLIT_THRESHOLD};
use sepsim::seeds::{self, seed_derive, stream};
use sepsim::SepError;

use crate::config::{DualityCase, ExperimentConfig};
use crate::output::{Manifest, Outputs, Seeds, MANIFEST_FILE};
use crate::validate::validate;
use crate::{CliError, Command};

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
}

/// State shared by the pipelines while they fill the output directory.
struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: Outputs,
    numerics: Map<String, Value>,
    labels: Vec<&'static str>,
    env_summary: Option<Value>,
}

impl Ctx<'_> {
    fn note(&mut self, key: &str, value: impl Serialize) {
        self.numerics.insert(key.into(), json!(value));
    }

    fn uses(&mut self, label: &'static str) {
        if !self.labels.contains(&label) {
            self.labels.push(label);
        }
    }

    fn environment(&mut self) -> Result<Environment<f64>, CliError> {
        let env = match (&self.cfg.environment, &self.cfg.env_file) {
            (Some(law), _) => {
                for l in [seeds::ENV_RATES, seeds::ENV_POINTS, seeds::ENV_MARKS, seeds::ENV_PERCOLATION] {
                    self.uses(l);
                }
                law.sample::<f64>(self.cfg.seed)?
            }
            (None, Some(path)) => load_environment(path)?,
            (None, None) => unreachable!("validated"),
        };
        let meta = env.meta();
        if self.cfg.strict && meta.restricted {
            return Err(SepError::Disconnected(format!(
                "{} points lie outside the largest component (strict mode)",
                meta.discarded_points
            ))
            .into());
        }
        self.env_summary = Some(json!({
            "model_tag": meta.model_tag,
            "seed": meta.seed,
            "dim": env.dim(),
            "box_side": env.box_side(),
            "points": env.len(),
            "edges": env.num_edges(),
            "intensity": env.intensity(),
            "connected": meta.connected,
            "restricted": meta.restricted,
            "discarded_points": meta.discarded_points,
            "truncation": meta.truncation.map(|t| json!({
                "r_max": t.r_max,
                "rate_floor": t.rate_floor,
                "tail_bound": t.tail_bound,
                "floor_dropped": t.floor_dropped,
            })),
        }));
        Ok(env)
    }

    fn effective(&mut self, env: &Environment<f64>) -> Result<EffectiveMatrix<f64>, CliError> {
        let tol = self.cfg.solver.corrector_tol;
        self.note("corrector_tol", tol);
        self.note("rank_threshold", RANK_THRESHOLD);
        Ok(effective_matrix(env, tol)?)
    }

    fn evolve_options(&mut self) -> EvolveOptions {
        let s = &self.cfg.solver;
        let opts = EvolveOptions {
            cap: s.component_cap,
            max_halvings: s.max_halvings,
            ..EvolveOptions::default()
        };
        self.note("component_cap", opts.cap);
        self.note("max_halvings", opts.max_halvings);
        opts
    }
}

/// Validates `cfg`, runs `cmd` into `out_dir` and writes the manifest last.
/// On failure the files of this run are removed unless `keep_partial`.
pub fn run(cmd: Command, cfg: &ExperimentConfig, out_dir: &Path, keep_partial: bool) -> Result<RunSummary, CliError> {
    let diagnostics = validate(cfg, cmd);
    if !diagnostics.is_empty() {
        return Err(CliError::Validation(diagnostics));
    }
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut ctx = Ctx {
        cfg,
        out: Outputs::open(out_dir)?,
        numerics: Map::new(),
        labels: Vec::new(),
        env_summary: None,
    };
    let result = match cmd {
        Command::GenEnv => gen_env(&mut ctx),
        Command::EstimateD => estimate_d(&mut ctx),
        Command::SimulateSep => simulate_sep(&mut ctx),
        Command::DualityTest => duality_test(&mut ctx),
        Command::NagyTest => nagy_test(&mut ctx),
        Command::Hydro => hydro(&mut ctx),
    }
    .and_then(|()| {
        let wall = started.elapsed().as_secs_f64();
        let mut outputs = ctx.out.names();
        outputs.push(MANIFEST_FILE.into());
        let manifest = Manifest {
            schema_version: 1,
            tool: "sepsim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: cmd.name().into(),
            config: cfg.clone(),
            seeds: Seeds {
                master: cfg.seed,
                labels: ctx.labels.iter().map(|l| l.to_string()).collect(),
            },
            numerics: ctx.numerics.clone(),
            environment: ctx.env_summary.clone(),
            outputs: outputs.clone(),
            started_unix,
            wall_time_seconds: wall,
        };
        ctx.out.write(MANIFEST_FILE, |w| Ok(serde_json::to_writer_pretty(w, &manifest).map_err(SepError::from)?))?;
        Ok(RunSummary {
            outputs,
            wall_time_seconds: wall,
        })
    });
    if result.is_err() && !keep_partial {
        ctx.out.discard();
    }
    result
}

fn gen_env(ctx: &mut Ctx) -> Result<(), CliError> {
    let env = ctx.environment()?;
    ctx.out.write("environment.txt", |w| Ok(write_environment(&env, w)?))
}

fn estimate_d(ctx: &mut Ctx) -> Result<(), CliError> {
    let env = ctx.environment()?;
    let dm = ctx.effective(&env)?;
    let report = DReport::new(&env, &dm);
    ctx.out.write("d-report.json", |w| Ok(report.write_json(w)?))?;
    if let Some(m) = ctx.cfg.msd.clone() {
        ctx.uses(seeds::WALK_MSD);
        let est = msd_diffusivity(&env, m.t, m.replicas, ctx.cfg.seed, ctx.cfg.strict)?;
        if let Some(w) = &est.warning {
            log::warn!("{w}");
            ctx.note("msd_warning", w);
        }
        ctx.out.write("msd.csv", |w| Ok(est.write_csv(w)?))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SepReport {
    schema_version: u32,
    points: usize,
    horizon: f64,
    eps: f64,
    slab_width: f64,
    adaptive_slab_width: bool,
    halvings: usize,
    max_component: usize,
    order_checks: usize,
    event_count: usize,
    initial_particles: usize,
    final_particles: usize,
}

fn simulate_sep(ctx: &mut Ctx) -> Result<(), CliError> {
    let env = ctx.environment()?;
    let sep = ctx.cfg.sep.clone().expect("validated");
    let n = env.len();
    let xi = match (&sep.occupied, &sep.profile) {
        (Some(sites), _) => {
            if let Some(bad) = sites.iter().find(|s| **s >= n) {
                return Err(SepError::InvalidParameter(format!("occupied point {bad} out of range ({n} points)")).into());
            }
            ParticleConfig::from_occupied(n, sites)
        }
        (None, Some(profile)) => {
            ctx.uses(seeds::INIT_BERNOULLI);
            init_product_bernoulli(&env, profile, sep.eps, seed_derive(ctx.cfg.seed, seeds::INIT_BERNOULLI, 0)?)?
        }
        (None, None) => unreachable!("validated"),
    };
    let speed = sep.eps.powi(-2);
    let (default_width, adaptive) = default_slab_width(&env, speed);
    let width = sep.slab_width.unwrap_or(default_width.min(sep.horizon));
    ctx.uses(seeds::CLOCKS_BLOCK);
    ctx.uses(seeds::CLOCKS_REDRAW);
    let k = ClockSchedule::sample(&env, speed, sep.horizon, width, ctx.cfg.seed)?;
    let mut opts = ctx.evolve_options();
    opts.snapshots = sep.snapshots.clone();
    opts.record_events = sep.record_events;
    let outcome = evolve_with(&env, &k, &xi, sep.horizon, &opts)?;
    ctx.note("initial_slab_width", width);
    ctx.note("final_slab_width", outcome.slab_width);
    ctx.note("adaptive_slab_width", adaptive);

    let report = SepReport {
        schema_version: 1,
        points: n,
        horizon: sep.horizon,
        eps: sep.eps,
        slab_width: outcome.slab_width,
        adaptive_slab_width: adaptive,
        halvings: outcome.halvings,
        max_component: outcome.max_component,
        order_checks: outcome.order_checks,
        event_count: outcome.event_count,
        initial_particles: xi.count(),
        final_particles: outcome.config.count(),
    };
    ctx.out.write("sep-report.json", |w| Ok(serde_json::to_writer_pretty(w, &report).map_err(SepError::from)?))?;
    if sep.record_events {
        ctx.out.write("trajectory.csv", |w| Ok(outcome.write_trajectory_csv(w)?))?;
    }
    if !sep.snapshots.is_empty() {
        ctx.out.write("snapshots.csv", |w| Ok(outcome.write_snapshots_csv(w)?))?;
    }
    if sep.martingale {
        let phi = TestFunction::<f64>::canonical(env.dim());
        let u: Vec<f64> = (0..n)
            .map(|i| {
                let x: Vec<f64> = env.centered_position(i).iter().map(|v| v * sep.eps).collect();
                phi.value(&x)
            })
            .collect();
        let mut times = sep.snapshots.clone();
        times.sort_by(f64::total_cmp);
        let path = dynkin_path(&env, sep.eps, &k, &xi, &u, &times)?;
        ctx.out.write("martingale.csv", |w| Ok(path.write_csv(w)?))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DualityRow {
    case: usize,
    x: usize,
    t: f64,
    particles: usize,
    #[serde(flatten)]
    result: DualityResult,
}

fn duality_test(ctx: &mut Ctx) -> Result<(), CliError> {
    let env = ctx.environment()?;
    let d = ctx.cfg.duality.clone().expect("validated");
    let n = env.len();
    let mut cases = d.cases.clone();
    if d.random_cases > 0 {
        ctx.uses(seeds::FUZZ);
    }
    for i in 0..d.random_cases {
        let mut rng = stream(ctx.cfg.seed, seeds::FUZZ, i as u64);
        let x = rng.random_range(0..n);
        let t = d.max_t * (1.0 - rng.random::<f64>());
        let occupied = (0..n).filter(|_| rng.random::<bool>()).collect();
        cases.push(DualityCase { x, t, occupied });
    }
    ctx.uses(seeds::DUALITY_REPLICA);
    ctx.uses(seeds::CLOCKS_BLOCK);
    ctx.note("kernel_tol", KERNEL_TOL);
    ctx.note("split_threshold", SPLIT_THRESHOLD);
    ctx.note("max_splits", MAX_SPLITS);
    let mut rows = Vec::with_capacity(cases.len());
    for (i, c) in cases.iter().enumerate() {
        if c.x >= n || c.occupied.iter().any(|s| *s >= n) {
            return Err(SepError::InvalidParameter(format!("duality case {i} references a point beyond {n}")).into());
        }
        let xi = ParticleConfig::from_occupied(n, &c.occupied);
        let seed = seed_derive(ctx.cfg.seed, seeds::DUALITY_REPLICA, i as u64)?;
        let result = duality_mc(&env, &xi, c.x, c.t, d.replicas, seed)?;
        rows.push(DualityRow {
            case: i,
            x: c.x,
            t: c.t,
            particles: xi.count(),
            result,
        });
    }
    let max_abs_z = rows.iter().map(|r| r.result.z.abs()).fold(0.0, f64::max);
    let report = json!({ "schema_version": 1, "replicas": d.replicas, "max_abs_z": max_abs_z, "cases": rows });
    ctx.out.write("duality-report.json", |w| Ok(serde_json::to_writer_pretty(w, &report).map_err(SepError::from)?))?;
    ctx.out.write("duality.csv", |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["case", "x", "t", "particles", "mc_mean", "stderr", "kernel", "z"]).map_err(SepError::from)?;
        for r in &rows {
            out.write_record([
                r.case.to_string(),
                r.x.to_string(),
                format!("{:e}", r.t),
                r.particles.to_string(),
                format!("{:e}", r.result.mc_mean),
                format!("{:e}", r.result.stderr),
                format!("{:e}", r.result.kernel_value),
                format!("{:e}", r.result.z),
            ])
            .map_err(SepError::from)?;
        }
        out.flush()?;
        Ok(())
    })
}

fn nagy_test(ctx: &mut Ctx) -> Result<(), CliError> {
    let env = ctx.environment()?;
    let cfg = ctx.cfg.nagy.clone().expect("validated");
    let n = env.len();
    if n > NAGY_MAX_POINTS {
        return Err(SepError::InstanceTooLarge(format!("{n} points; nagy-test accepts at most {NAGY_MAX_POINTS}")).into());
    }
    ctx.uses(seeds::NAGY_INSTANCE);
    ctx.uses(seeds::CLOCKS_BLOCK);
    ctx.note("quad_tol", cfg.quad_tol);
    ctx.note("kernel_tol", KERNEL_TOL);
    let width = default_slab_width(&env, 1.0).0.min(cfg.horizon);
    let mut rows = Vec::with_capacity(cfg.instances);
    for i in 0..cfg.instances {
        let mut rng = stream(ctx.cfg.seed, seeds::NAGY_INSTANCE, i as u64);
        let x = rng.random_range(0..n);
        let xi = ParticleConfig::from_bits((0..n).map(|_| rng.random::<bool>()).collect());
        let k = ClockSchedule::sample(&env, 1.0, cfg.horizon, width, seed_derive(ctx.cfg.seed, seeds::NAGY_INSTANCE, i as u64)?)?;
        let events = k.events(cfg.horizon);
        // Stop halfway between the last allowed event and the next one.
        let t = match events.get(cfg.max_events) {
            Some(next) => {
                let prev = cfg.max_events.checked_sub(1).map_or(0.0, |j| events[j].time);
                0.5 * (prev + next.time)
            }
            None => cfg.horizon,
        };
        let r = nagy_check(&env, &k, &xi, x, t, cfg.quad_tol)?;
        let used = events.iter().filter(|e| e.time <= t).count();
        rows.push(json!({
            "instance": i,
            "x": x,
            "t": t,
            "events": used,
            "lhs": r.lhs,
            "rhs": r.rhs,
            "residual": r.residual,
            "bound": r.bound,
            "pass": r.residual <= cfg.residual_bound,
        }));
    }
    let max_residual = rows.iter().map(|r| r["residual"].as_f64().unwrap_or(f64::NAN)).fold(0.0, f64::max);
    let report = json!({
        "schema_version": 1,
        "residual_bound": cfg.residual_bound,
        "max_residual": max_residual,
        "pass": max_residual <= cfg.residual_bound,
        "instances": rows,
    });
    ctx.out.write("nagy-report.json", |w| Ok(serde_json::to_writer_pretty(w, &report).map_err(SepError::from)?))
}

fn hydro(ctx: &mut Ctx) -> Result<(), CliError> {
    let env = ctx.environment()?;
    let h = ctx.cfg.hydro.clone().expect("validated");
    let dim = env.dim();
    let d = match &h.d {
        Some(rows) => {
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            EffectiveMatrix::from_matrix(dim, &flat)?
        }
        None => ctx.effective(&env)?,
    };
    ctx.note("diffusivity", (0..dim).map(|i| (0..dim).map(|j| d.entry(i, j)).collect::<Vec<_>>()).collect::<Vec<_>>());
    let mut profile = MacroProfile::new(h.initial.clone(), d)?;
    profile.tol = ctx.cfg.solver.heat_tol;
    ctx.note("heat_tol", profile.tol);
    let phis: Vec<TestFunction<f64>> = test_family(dim, h.test_functions);
    let mut hc = HydroConfig::new(h.eps.clone(), h.horizon, h.replicas, ctx.cfg.seed);
    hc.time_points = h.time_points;
    hc.component_cap = ctx.cfg.solver.component_cap;
    if let Some(deltas) = &h.deltas {
        hc.deltas = deltas.clone();
    }
    ctx.note("component_cap", hc.component_cap);
    let widths: Vec<f64> = h.eps.iter().map(|e| default_slab_width(&env, e.powi(-2)).0.min(h.horizon)).collect();
    ctx.note("initial_slab_widths", widths);
    for l in [seeds::INIT_BERNOULLI, seeds::HYDRO_REPLICA, seeds::CLOCKS_BLOCK, seeds::CLOCKS_REDRAW] {
        ctx.uses(l);
    }
    let report = hydro_experiment(&env, &profile, &phis, &hc)?;
    ctx.note(
        "max_halvings_observed",
        report.scales.iter().map(|s| s.max_halvings).max().unwrap_or(0),
    );
    ctx.out.write("hydro-report.json", |w| Ok(report.write_json(w)?))?;
    ctx.out.write("deviations.csv", |w| Ok(report.write_deviations_csv(w)?))?;

    // Profile along the first axis over the window seen at the coarsest scale.
    let eps_max = h.eps.iter().copied().fold(0.0, f64::max);
    let half = eps_max * env.torus().inradius();
    let xs: Vec<Vec<f64>> = (0..=100)
        .map(|k| {
            let mut x = vec![0.0; dim];
            x[0] = -half + 2.0 * half * k as f64 / 100.0;
            x
        })
        .collect();
    let step = (report.times.len() / 8).max(1);
    let mut ts: Vec<f64> = report.times.iter().step_by(step).copied().collect();
    if ts.last() != report.times.last() {
        ts.push(h.horizon);
    }
    ctx.out.write("profile.csv", |w| Ok(write_profile_csv(&profile, &xs, &ts, w)?))
}
