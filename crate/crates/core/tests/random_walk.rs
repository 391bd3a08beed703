mod common;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sepsim::environment::*;
use sepsim::random_walk::*;

use common::{mean_se, walk_generator, walk_kernel};

fn ring(side: usize, seed: u64) -> Environment<f64> {
    gen_zd_conductance(1, side, &ConductanceLaw::Uniform { low: 0.5, high: 2.0 }, seed).unwrap()
}

fn two_point() -> Environment<f64> {
    let mut b = Environment::<f64>::builder(GroupAction::continuum(1), 4.0);
    b.point(&[0.0]);
    b.point(&[1.0]);
    b.edge(0, 1, 1.0);
    b.build(ConnectivityPolicy::Keep).unwrap()
}

#[test]
fn kernel_row_matches_matrix_exponential() {
    let env = ring(8, 3);
    let p = walk_kernel(&env, 1.0, 0.5);
    for x in [0, 5] {
        let row = heat_kernel_row(&env, 1.0, x, 0.5, 1e-12).unwrap();
        for y in 0..8 {
            assert!((row[y] - p[(x, y)]).abs() < 1e-8, "p({x},{y})");
        }
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn semigroup_matches_matrix_exponential() {
    let env: Environment<f64> = gen_zd_conductance(2, 4, &ConductanceLaw::Exponential { rate: 1.0 }, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f: Vec<f64> = (0..env.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let eps = 0.5;
    for t in [0.05, 0.7] {
        let got = semigroup_apply(&env, eps, t, &f, 1e-12).unwrap();
        let want = walk_kernel(&env, eps, t) * DVector::from_vec(f.clone());
        for i in 0..env.len() {
            assert!((got[i] - want[i]).abs() < 1e-8);
        }
    }
    // Large rate times trigger time splitting and still agree.
    let u = Uniformizer::new(&env, 0.05).unwrap();
    assert!(u.split_count(1.0).unwrap() > 1);
}

#[test]
fn resolvent_matches_dense_solve() {
    let env = ring(32, 8);
    let eps = 0.25;
    let lambda = 0.7;
    let f: Vec<f64> = (0..32).map(|i| (i as f64 * 0.4).sin()).collect();
    let sol = resolvent_solve(&env, eps, lambda, &f, 1e-12).unwrap();
    let a = DMatrix::identity(32, 32) * lambda - walk_generator(&env, eps);
    let want = a.lu().solve(&DVector::from_vec(f)).unwrap();
    for i in 0..32 {
        assert!((sol.u[i] - want[i]).abs() < 1e-9);
    }
    assert!(sol.diagnostics.relative_residual <= 1e-12);
}

#[test]
fn two_point_resolvent() {
    let env = two_point();
    let s = resolvent_solve(&env, 1.0, 1.0, &[1.0, 0.0], 1e-12).unwrap();
    assert!((s.u[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((s.u[1] - 1.0 / 3.0).abs() < 1e-12);
    let row = heat_kernel_row(&env, 1.0, 0, 0.3, 1e-13).unwrap();
    assert!((row[0] - (1.0 + (-0.6f64).exp()) / 2.0).abs() < 1e-12);
}

#[test]
fn dirichlet_form_is_minus_generator_pairing() {
    let env: Environment<f64> = gen_zd_conductance(2, 6, &ConductanceLaw::LogNormal { mu: 0.0, sigma: 0.5 }, 2).unwrap();
    let eps = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u: Vec<f64> = (0..env.len()).map(|_| rng.random::<f64>()).collect();
    let v: Vec<f64> = (0..env.len()).map(|_| rng.random::<f64>()).collect();
    let g = GeneratorOperator::new(&env, eps).unwrap();
    let e = dirichlet_form(&env, eps, &u, &v).unwrap();
    let pairing = -g.inner(&u, &g.apply(&v));
    assert!((e - pairing).abs() < 1e-10 * e.abs().max(1.0));
    assert!((e - dirichlet_form(&env, eps, &v, &u).unwrap()).abs() < 1e-12);
    assert!(dirichlet_form(&env, eps, &u, &u).unwrap() >= 0.0);
}

#[test]
fn jump_counts_and_holding_times() {
    // A single edge of rate 1: jumps form a Poisson process of rate 1.
    let env = two_point();
    let t = 3.0;
    let counts: Vec<f64> = (0..4000).map(|s| sample_walk_path(&env, 0, t, s).unwrap().jumps.len() as f64).collect();
    let (m, se) = mean_se(&counts);
    assert!((m - t).abs() < 3.0 * se, "mean jumps {m}");

    // Unit ring: exit rate 2 everywhere.
    let env: Environment<f64> = gen_zd_conductance(1, 16, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
    let holds: Vec<f64> = (0..200).flat_map(|s| sample_walk_path(&env, 3, 20.0, s).unwrap().holding_times()).collect();
    let (m, se) = mean_se(&holds);
    assert!((m - 0.5).abs() < 3.0 * se, "mean holding time {m}");
}

#[test]
fn single_precision_kernel() {
    let env: Environment<f32> = gen_zd_conductance(1, 8, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
    let row = heat_kernel_row(&env, 1.0f32, 0, 0.5, 1e-6).unwrap();
    let env64: Environment<f64> = gen_zd_conductance(1, 8, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
    let p = walk_kernel(&env64, 1.0, 0.5);
    for y in 0..8 {
        assert!((row[y] as f64 - p[(0, y)]).abs() < 1e-5);
    }
}
