mod common;

use sepsim::environment::*;
use sepsim::homogenization::{effective_matrix, EffectiveMatrix};
use sepsim::hydrodynamics::*;

use common::mean_se;

fn unit_ring(side: usize) -> Environment<f64> {
    gen_zd_conductance(1, side, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap()
}

/// Composite Simpson on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn step_profile_spreads_as_erfc() {
    let p = MacroProfile::new(Profile::step(1, 0), EffectiveMatrix::isotropic(1, 1.0)).unwrap();
    for t in [0.05, 0.5, 2.0] {
        for x in [-1.0, -0.2, 0.0, 0.3, 1.5] {
            let want = 0.5 * libm::erfc(x / (4.0f64 * t).sqrt());
            assert!((p.heat_solution(&[x], t).unwrap() - want).abs() < 1e-6, "x={x} t={t}");
        }
    }
    // With D = 2 the profile at time t is the D = 1 profile at time 2t.
    let q = MacroProfile::new(Profile::step(1, 0), EffectiveMatrix::isotropic(1, 2.0)).unwrap();
    assert!((q.heat_solution(&[0.4], 0.25).unwrap() - p.heat_solution(&[0.4], 0.5).unwrap()).abs() < 1e-6);
}

#[test]
fn degenerate_matrix_only_spreads_along_its_range() {
    let d = EffectiveMatrix::from_matrix(2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(d.rank(), 1);
    let w: f64 = 0.4;
    let p = MacroProfile::new(Profile::Gaussian { center: vec![0.0, 0.0], width: w, height: 0.8 }, d).unwrap();
    let t = 0.3;
    let s2 = w * w + 2.0 * t;
    for x in [[0.0, 0.0], [0.5, -0.3], [-1.0, 0.7]] {
        let want = 0.8 * (w * w / s2).sqrt() * (-x[0] * x[0] / (2.0 * s2)).exp() * (-x[1] * x[1] / (2.0 * w * w)).exp();
        assert!((p.heat_solution(&x, t).unwrap() - want).abs() < 1e-6, "{x:?}");
    }
}

#[test]
fn heat_solution_solves_the_weak_equation() {
    let p = MacroProfile::new(
        Profile::Gaussian { center: vec![0.1], width: 0.3, height: 0.9 },
        EffectiveMatrix::isotropic(1, 1.0),
    )
    .unwrap();
    let times: Vec<f64> = (0..=256).map(|k| 0.5 * k as f64 / 256.0).collect();
    let path = MeasurePath::analytic(&p, &TestFunction::canonical(1), &times).unwrap();
    let r = weak_solution_residual(&path, 0.5).unwrap();
    assert_eq!(r.intervals, 256);
    assert!(r.residual.abs() < 1e-4, "{r:?}");
    assert!(r.residual.abs() <= r.trapezoid_bound, "{r:?}");
    assert!(weak_solution_residual(&path, 0.123).is_err());
}

#[test]
fn product_bernoulli_variance() {
    let env = unit_ring(512);
    let eps = 1.0 / 128.0;
    let rho = Profile::Gaussian { center: vec![0.0], width: 0.5, height: 0.7 };
    let phi = TestFunction::canonical(1);
    let samples: Vec<f64> = (0..200)
        .map(|s| {
            let eta = init_product_bernoulli(&env, &rho, eps, s).unwrap();
            empirical_eval(&env, &eta, eps, &phi).unwrap()
        })
        .collect();
    let (m, se) = mean_se(&samples);
    let expected: f64 = (0..512)
        .map(|i| {
            let x = [env.centered_position(i)[0] * eps];
            phi.value(&x) * rho.value(&x)
        })
        .sum::<f64>()
        * eps;
    assert!((m - expected).abs() < 3.0 * se);
    let var = se * se * 200.0;
    let want = bernoulli_variance(&env, &rho, eps, &phi);
    // Sample variance over 199 degrees of freedom has relative spread 0.1.
    assert!((var / want - 1.0).abs() < 0.35, "variance {var} vs {want}");
}

#[test]
fn full_occupation_deviation_is_the_riemann_error() {
    let env = unit_ring(512);
    let d = effective_matrix(&env, 1e-12).unwrap();
    let p = MacroProfile::new(Profile::Constant { value: 1.0 }, d).unwrap();
    let phi = TestFunction::canonical(1);
    let cfg = HydroConfig::new(vec![1.0 / 32.0, 1.0 / 64.0], 0.05, 3, 1);
    let report = hydro_experiment(&env, &p, &[phi.clone()], &cfg).unwrap();
    let exact = simpson(|x| phi.value(&[x]), -1.0, 1.0, 20_000);
    for (ei, eps) in [1.0 / 32.0, 1.0 / 64.0].iter().enumerate() {
        let riemann: f64 = (0..512).map(|i| phi.value(&[env.centered_position(i)[0] * eps])).sum::<f64>() * eps;
        assert!((report.median(ei, 0) - (riemann - exact).abs()).abs() < 1e-5);
    }
}

#[test]
fn corrected_gap_shrinks() {
    let law = ConductanceLaw::Uniform { low: 1.0, high: 2.0 };
    let g = TestFunction::canonical(1);
    let mut gaps = Vec::new();
    for (side, eps) in [(128usize, 1.0 / 16.0), (256, 1.0 / 32.0), (512, 1.0 / 64.0)] {
        let env: Environment<f64> = gen_zd_conductance(1, side, &law, 3).unwrap();
        let d = effective_matrix(&env, 1e-12).unwrap();
        gaps.push(corrected_empirical_gap(&env, eps, &g, &d, 1.0).unwrap().gap);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");

    // Homogeneous ring: the gap is O(ε²) and decays like 1/λ.
    let env = unit_ring(256);
    let d = effective_matrix(&env, 1e-12).unwrap();
    let a = corrected_empirical_gap(&env, 1.0 / 32.0, &g, &d, 1.0).unwrap();
    let big = corrected_empirical_gap(&env, 1.0 / 32.0, &g, &d, 1e3).unwrap();
    assert!(a.gap < 1e-2);
    assert!(big.gap < 2.0 * a.div_norm / 1e3);
    assert!(big.gap < a.gap);
    let eta = sepsim::exclusion::ParticleConfig::full(256);
    assert!(a.pi_difference(&eta) <= a.gap + 1e-15);
}

#[test]
fn test_family_layout() {
    let fam = test_family::<f64>(2, 8);
    let shapes: Vec<Shape> = fam.iter().map(|f| f.shape()).collect();
    assert_eq!(shapes[0], Shape::Bump);
    assert!(matches!(shapes[1], Shape::Plateau { .. }));
    assert_eq!(shapes[2], Shape::BumpMonomial { axis: 0 });
    assert_eq!(shapes[3], Shape::BumpMonomial { axis: 1 });
    assert_eq!(fam[4].support_radius(), 2.0);
    // The monomial family integrates to zero by symmetry.
    assert_eq!(fam[2].integral().unwrap(), 0.0);
}
