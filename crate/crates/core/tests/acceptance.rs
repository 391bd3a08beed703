//! The acceptance suite. Criteria run one after another in a single test so
//! that each one is timed on its own; every criterion prints a PASS or FAIL
//! line and the test fails if any of them does.

mod common;

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;
use sepsim::environment::*;
use sepsim::exclusion::*;
use sepsim::homogenization::*;
use sepsim::hydrodynamics::*;
use sepsim::seeds::{self, seed_derive, stream};

use common::{config_of, exclusion_generator, mean_se, state_of, walk_kernel};

const MASTER: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn zd(d: usize, side: usize, law: ConductanceLaw, seed: u64) -> Environment<f64> {
    gen_zd_conductance(d, side, &law, seed).unwrap()
}

fn unit() -> ConductanceLaw {
    ConductanceLaw::Constant { value: 1.0 }
}

fn random_config<R: Rng>(n: usize, p: f64, rng: &mut R) -> ParticleConfig {
    ParticleConfig::from_bits((0..n).map(|_| rng.random_bool(p)).collect())
}

fn identity_lattices() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        let dm = effective_matrix(&zd(d, 16, unit(), 0), 1e-12).unwrap();
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dm.entry(i, j) - want).abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max |D - I| = {worst:.2e}"))
}

fn one_dimensional_exact() -> Outcome {
    let alt = zd(1, 1000, ConductanceLaw::Periodic { values: vec![1.0, 2.0] }, 0);
    let a = effective_matrix(&alt, 1e-12).unwrap().entry(0, 0);
    let iid = zd(1, 100_000, ConductanceLaw::Uniform { low: 1.0, high: 2.0 }, MASTER);
    let b = effective_matrix(&iid, 1e-12).unwrap().entry(0, 0);
    let target = 1.0 / std::f64::consts::LN_2;
    let rel = (b - target).abs() / target;
    outcome(
        (a - 4.0 / 3.0).abs() <= 1e-8 && rel <= 0.01,
        format!("alternating D = {a:.10}, uniform D = {b:.5} ({:.3}% from 1/ln 2)", 100.0 * rel),
    )
}

fn corrector_and_msd_agree() -> Outcome {
    let env = zd(2, 64, ConductanceLaw::LogNormal { mu: 0.0, sigma: 0.5 }, MASTER);
    let dm = effective_matrix(&env, 1e-12).unwrap();
    let msd = msd_diffusivity(&env, 200.0, 10_000, MASTER, false).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, j) in [(0, 0), (1, 1), (0, 1)] {
        let z = (dm.entry(i, j) - msd.entry(i, j)) / msd.stderr(i, j);
        pass &= z.abs() <= 3.0;
        parts.push(format!("D{i}{j}: {:.4} vs {:.4} (z = {z:+.2})", dm.entry(i, j), msd.entry(i, j)));
    }
    outcome(pass, parts.join(", "))
}

fn duality() -> Outcome {
    let env = zd(1, 8, ConductanceLaw::Uniform { low: 0.5, high: 1.5 }, MASTER);
    let mut rng = stream(MASTER, seeds::FUZZ, 4);
    let mut worst: f64 = 0.0;
    let mut kernel_err: f64 = 0.0;
    for case in 0..10u64 {
        let x = rng.random_range(0..8);
        let t = rng.random_range(0.05..1.0);
        let xi = random_config(8, 0.5, &mut rng);
        let p = walk_kernel(&env, 1.0, t);
        let exact: f64 = (0..8).map(|y| p[(x, y)] * xi.value(y)).sum();
        let r = duality_mc(&env, &xi, x, t, 100_000, seed_derive(MASTER, seeds::DUALITY_REPLICA, case).unwrap()).unwrap();
        kernel_err = kernel_err.max((r.kernel_value - exact).abs());
        let z = if r.stderr > 0.0 {
            (r.mc_mean - exact) / r.stderr
        } else if r.mc_mean == exact {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z.abs());
    }
    outcome(
        worst <= 3.0 && kernel_err <= 1e-8,
        format!("max |z| = {worst:.2} over 10 cases, kernel error {kernel_err:.1e}"),
    )
}

fn pathwise_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut attempt = 0u64;
    while done < 20 {
        let mut rng = stream(MASTER, seeds::NAGY_INSTANCE, attempt);
        attempt += 1;
        let env = if rng.random_bool(0.5) {
            zd(1, rng.random_range(3..=16), ConductanceLaw::Uniform { low: 0.5, high: 2.0 }, attempt)
        } else {
            zd(2, rng.random_range(3..=4), ConductanceLaw::Exponential { rate: 1.0 }, attempt)
        };
        let k = ClockSchedule::sample(&env, 1.0, 4.0, 4.0, seed_derive(MASTER, seeds::NAGY_INSTANCE, attempt).unwrap()).unwrap();
        let times: Vec<f64> = k.events(4.0).iter().map(|e| e.time).collect();
        // Stop between the fifth and sixth event, or at the horizon.
        let t = match times.len() {
            0 => 1.0,
            n if n <= 5 => 0.5 * (times[n - 1] + 4.0),
            _ => 0.5 * (times[4] + times[5]),
        };
        let xi = random_config(env.len(), 0.5, &mut rng);
        let x = rng.random_range(0..env.len());
        let r = nagy_check(&env, &k, &xi, x, t, 1e-8).unwrap();
        worst = worst.max(r.residual.abs());
        done += 1;
    }
    outcome(worst <= 1e-6, format!("max residual {worst:.2e} over 20 instances"))
}

/// `f(η) = table[η restricted to support]`.
fn table_function(support: Vec<usize>, table: Vec<f64>) -> LocalFunction<impl Fn(&ParticleConfig) -> f64 + Sync> {
    let sites = support.clone();
    LocalFunction::new(support, move |eta: &ParticleConfig| {
        let idx: usize = sites.iter().enumerate().map(|(k, s)| usize::from(eta.get(*s)) << k).sum();
        table[idx]
    })
}

fn generator_slope() -> Outcome {
    let env = zd(1, 8, ConductanceLaw::Uniform { low: 0.5, high: 1.5 }, MASTER);
    let n = env.len();
    let q = exclusion_generator(&env);
    let q2 = &q * &q;
    // Fuzz candidates and keep those whose second-order term is largest, so
    // that the O(h) bias dominates the Monte Carlo noise.
    let mut rng = stream(MASTER, seeds::FUZZ, 6);
    let mut candidates = Vec::new();
    for _ in 0..40 {
        let size = rng.random_range(2..=3);
        let support = sample(&mut rng, n, size).into_vec();
        let table: Vec<f64> = (0..1 << size).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eta = random_config(n, 0.5, &mut rng);
        let f = table_function(support.clone(), table.clone());
        let values: Vec<f64> = (0..1 << n).map(|s| f.eval(&config_of(s, n))).collect();
        let second = (&q2 * DVector::from_vec(values))[state_of(&eta)];
        candidates.push((second.abs(), support, table, eta));
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut pass = true;
    let mut ratios = Vec::new();
    for (k, (_, support, table, eta)) in candidates.into_iter().take(5).enumerate() {
        let f = table_function(support, table);
        let exact = generator_apply(&env, &f, &eta).unwrap();
        let seed = seed_derive(MASTER, seeds::GENERATOR_MC, k as u64).unwrap();
        let a = fd_generator_estimate(&env, &f, &eta, 0.02, 1_000_000, seed).unwrap();
        let b = fd_generator_estimate(&env, &f, &eta, 0.01, 1_000_000, seed ^ 1).unwrap();
        let ratio = (a.value - exact).abs() / (b.value - exact).abs();
        pass &= (1.5..=2.5).contains(&ratio);
        ratios.push(format!("{ratio:.3}"));
    }
    outcome(pass, format!("error ratios [{}]", ratios.join(", ")))
}

fn martingale_moments() -> Outcome {
    let env = zd(1, 8, ConductanceLaw::Uniform { low: 0.5, high: 1.5 }, MASTER);
    let xi = ParticleConfig::from_occupied(8, &[0, 2, 3, 6]);
    let mut u = vec![0.0; 8];
    u[0] = 1.0;
    let t = 1.0;
    let width = default_slab_width(&env, 1.0).0.min(t);
    let n = 10_000;
    let (m, b): (Vec<f64>, Vec<f64>) = (0..n as u64)
        .map(|r| {
            let k = ClockSchedule::sample(&env, 1.0, t, width, seed_derive(MASTER, seeds::MARTINGALE_REPLICA, r).unwrap()).unwrap();
            let path = dynkin_path(&env, 1.0, &k, &xi, &u, &[0.0, t]).unwrap();
            (path.m[1], path.bracket[1])
        })
        .unzip();
    let (mean_m, se_m) = mean_se(&m);
    // Paired statistic: its mean is var(M_T) − E⟨M⟩_T.
    let nf = n as f64;
    let paired: Vec<f64> = m.iter().zip(&b).map(|(mi, bi)| (mi - mean_m).powi(2) * nf / (nf - 1.0) - bi).collect();
    let (mean_d, se_d) = mean_se(&paired);
    let var_m = m.iter().map(|v| (v - mean_m).powi(2)).sum::<f64>() / (nf - 1.0);
    let mean_b = b.iter().sum::<f64>() / nf;
    outcome(
        mean_m.abs() <= 3.0 * se_m && mean_d.abs() <= 3.0 * se_d,
        format!(
            "mean M = {mean_m:+.4} (se {se_m:.4}); var M = {var_m:.4} vs mean bracket {mean_b:.4} (z = {:+.2})",
            mean_d / se_d
        ),
    )
}

const MACRO_SIDE: f64 = 32.0;
const SCALES: [f64; 3] = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];

/// Gaps for one environment per scale, sampled with `seed`.
fn convergence_gaps(law: &ConductanceLaw, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let envs: Vec<Environment<f64>> = SCALES.iter().map(|e| zd(1, (MACRO_SIDE / e) as usize, law.clone(), seed)).collect();
    let dms: Vec<EffectiveMatrix<f64>> = envs.iter().map(|e| effective_matrix(e, 1e-12).unwrap()).collect();
    let cases: Vec<ConvergenceCase<'_, f64>> = envs
        .iter()
        .zip(&dms)
        .zip(SCALES)
        .map(|((env, d), eps)| ConvergenceCase { env, eps, d })
        .collect();
    let phi = TestFunction::canonical(1);
    let r = resolvent_convergence_check(&cases, &phi, 1.0).unwrap();
    let s = semigroup_convergence_check(&cases, &phi, 0.25).unwrap();
    (r.gaps, s.gaps)
}

fn trend(gaps: &[f64]) -> (bool, f64) {
    let ratio = gaps[gaps.len() - 1] / gaps[0];
    (gaps.windows(2).all(|w| w[1] < w[0]) && ratio < 0.5, ratio)
}

fn homogenized_convergence() -> Outcome {
    let (hr, hs) = convergence_gaps(&unit(), 0);
    // For the random law each gap is averaged over independent samples.
    let seeds = 16;
    let law = ConductanceLaw::Uniform { low: 1.0, high: 2.0 };
    let mut rr = vec![0.0; 3];
    let mut rs = vec![0.0; 3];
    for s in 0..seeds {
        let (a, b) = convergence_gaps(&law, seed_derive(MASTER, seeds::ENV_RATES, s).unwrap());
        for k in 0..3 {
            rr[k] += a[k] / seeds as f64;
            rs[k] += b[k] / seeds as f64;
        }
    }
    let rows = [("homogeneous resolvent", hr), ("homogeneous semigroup", hs), ("random resolvent", rr), ("random semigroup", rs)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, gaps) in &rows {
        let (ok, ratio) = trend(gaps);
        pass &= ok;
        parts.push(format!(
            "{name} {:.3e}/{:.3e}/{:.3e} ratio {ratio:.3} {}",
            gaps[0],
            gaps[1],
            gaps[2],
            if ok { "ok" } else { "no" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn hydrodynamic_limit() -> Outcome {
    let env = zd(1, 3584, unit(), 0);
    let d = effective_matrix(&env, 1e-12).unwrap();
    let profile = MacroProfile::new(Profile::step(1, 0), d).unwrap();
    let cfg = HydroConfig::new(vec![1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0], 0.5, 50, MASTER);
    let report = hydro_experiment(&env, &profile, &[TestFunction::canonical(1)], &cfg).unwrap();
    let medians: Vec<f64> = (0..3).map(|i| report.median(i, 0)).collect();
    let pass = medians.windows(2).all(|w| w[1] < w[0]) && medians[2] < 0.05;
    outcome(pass, format!("medians {:.4} / {:.4} / {:.4}", medians[0], medians[1], medians[2]))
}

fn invariant_suite() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    let laws = [
        EnvironmentLaw::ZdConductance { d: 2, side: 8, law: ConductanceLaw::LogNormal { mu: 0.0, sigma: 1.0 } },
        EnvironmentLaw::CrystalConductance { preset: "hexagonal".into(), side: 6, law: ConductanceLaw::Exponential { rate: 1.0 } },
        EnvironmentLaw::MottPpp(MottParams {
            d: 2,
            side: 12.0,
            intensity: 1.0,
            energy: MarkLaw::Uniform { low: -1.0, high: 1.0 },
            r_max: Some(5.0),
            rate_floor: 0.0,
        }),
        EnvironmentLaw::PercolationCluster { lattice: LatticeChoice::Zd { d: 2 }, side: 16, p: 0.75 },
    ];
    let mut bad = 0;
    for law in &laws {
        for s in 0..10 {
            let env: Environment<f64> = law.sample(seed_derive(MASTER, seeds::FUZZ, s).unwrap()).unwrap();
            bad += usize::from(env.check_invariants().is_err());
        }
    }
    pass &= bad == 0;
    parts.push(format!("{bad} environment invariant failures"));

    let mut lost = 0;
    let mut order_checked = 0;
    for call in 0..1000u64 {
        let mut rng = stream(MASTER, seeds::FUZZ, 1000 + call);
        let law = ConductanceLaw::Uniform { low: 0.2, high: 3.0 };
        let env = if call % 2 == 0 { zd(1, rng.random_range(3..40), law, call) } else { zd(2, rng.random_range(3..10), law, call) };
        let t = rng.random_range(0.01..2.0);
        let xi = random_config(env.len(), rng.random_range(0.0..1.0), &mut rng);
        let k = ClockSchedule::sample(&env, 1.0, t, default_slab_width(&env, 1.0).0.min(t), rng.random()).unwrap();
        let opts = EvolveOptions {
            check_order: call < 100,
            ..EvolveOptions::default()
        };
        match evolve_with(&env, &k, &xi, t, &opts) {
            Ok(out) => {
                lost += usize::from(out.config.count() != xi.count());
                if call < 100 && (out.order_checks > 0 || k.events(t).is_empty()) {
                    order_checked += 1;
                }
            }
            Err(_) => lost += 1,
        }
    }
    pass &= lost == 0 && order_checked == 100;
    parts.push(format!("{lost} conservation failures in 1000 calls, {order_checked}/100 order replays"));

    let profile = MacroProfile::new(Profile::step(1, 0), EffectiveMatrix::isotropic(1, 1.0)).unwrap();
    let times: Vec<f64> = (0..64).map(|k| 0.5 * k as f64 / 63.0).collect();
    let mut worst: f64 = 0.0;
    for phi in test_family::<f64>(1, 6) {
        let path = MeasurePath::analytic(&profile, &phi, &times).unwrap();
        let r = weak_solution_residual(&path, 0.5).unwrap();
        pass &= r.residual.abs() <= r.trapezoid_bound;
        worst = worst.max(r.residual.abs() / r.trapezoid_bound);
    }
    parts.push(format!("weak residual at most {worst:.3} of its bound over 6 test functions"));
    outcome(pass, parts.join("; "))
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("effective matrix of unit lattices", 10, identity_lattices),
        ("one-dimensional effective matrix", 60, one_dimensional_exact),
        ("corrector and MSD agree", 300, corrector_and_msd_agree),
        ("duality on the ring", 120, duality),
        ("pathwise kernel identity", 60, pathwise_identity),
        ("generator slope on local functions", 180, generator_slope),
        ("martingale moments", 120, martingale_moments),
        ("homogenized convergence", 300, homogenized_convergence),
        ("hydrodynamic limit", 900, hydrodynamic_limit),
        ("invariant suite", 300, invariant_suite),
    ];
    let mut failed = Vec::new();
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(*budget);
        let ok = out.pass && in_time;
        println!(
            "{} {:>2} {name}: {} [{:.1} s of {budget} s]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            out.detail,
            elapsed.as_secs_f64()
        );
        if !ok {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
