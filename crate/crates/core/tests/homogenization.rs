use nalgebra::{DMatrix, DVector};
use sepsim::environment::*;
use sepsim::homogenization::*;
use sepsim::hydrodynamics::TestFunction;

/// Minimal-image bond vector, searching the neighboring periods directly.
fn bond(env: &Environment<f64>, i: usize, j: usize) -> Vec<f64> {
    let side = env.box_side();
    let cols: Vec<Vec<f64>> = (0..env.dim()).map(|k| env.geometry().basis_column(k)).collect();
    let raw: Vec<f64> = env.position(j).iter().zip(env.position(i)).map(|(a, b)| a - b).collect();
    let mut best = raw.clone();
    for k0 in -1i32..=1 {
        for k1 in -1i32..=1 {
            let v: Vec<f64> = (0..2)
                .map(|c| raw[c] + side * (k0 as f64 * cols[0][c] + k1 as f64 * cols[1][c]))
                .collect();
            if v.iter().map(|x| x * x).sum::<f64>() < best.iter().map(|x| x * x).sum::<f64>() {
                best = v;
            }
        }
    }
    best
}

/// Minimum of `Σ_e c_e (a·δ_e − (χ_j − χ_i))² / N` over mean-zero `χ` via the
/// bordered normal equations.
fn dense_energy(env: &Environment<f64>, a: &[f64]) -> f64 {
    let n = env.len();
    let m = env.num_edges();
    let mut b = DMatrix::zeros(m, n);
    let mut w = DVector::zeros(m);
    let mut s = DVector::zeros(m);
    for (k, e) in env.edges().iter().enumerate() {
        b[(k, e.i)] = -1.0;
        b[(k, e.j)] = 1.0;
        w[k] = e.rate;
        let d = bond(env, e.i, e.j);
        s[k] = a[0] * d[0] + a[1] * d[1];
    }
    let bw = b.transpose() * DMatrix::from_diagonal(&w);
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(&bw * &b));
    for i in 0..n {
        kkt[(i, n)] = 1.0;
        kkt[(n, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(&(&bw * &s));
    let sol = kkt.lu().solve(&rhs).unwrap();
    let r = s - b * sol.rows(0, n);
    r.iter().zip(w.iter()).map(|(r, w)| w * r * r).sum::<f64>() / n as f64
}

#[test]
fn ring_gives_the_harmonic_mean() {
    let env: Environment<f64> = gen_zd_conductance(1, 40, &ConductanceLaw::Uniform { low: 0.5, high: 3.0 }, 6).unwrap();
    let hm = env.len() as f64 / env.edges().iter().map(|e| 1.0 / e.rate).sum::<f64>();
    let d = effective_matrix(&env, 1e-12).unwrap();
    assert!((d.entry(0, 0) - hm).abs() < 1e-12);
    let c = corrector_solve(&env, &[1.0], 1e-12).unwrap();
    assert!(c.chi.iter().sum::<f64>().abs() < 1e-10);
    assert!(c.energy <= c.trivial_energy);
}

#[test]
fn unit_lattices_give_the_identity() {
    for d in 1..=3 {
        let env: Environment<f64> = gen_zd_conductance(d, 6, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        let dm = effective_matrix(&env, 1e-12).unwrap();
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dm.entry(i, j) - want).abs() < 1e-10, "d={d} ({i},{j})");
            }
        }
        assert_eq!(dm.rank(), d);
    }
}

#[test]
fn honeycomb_matches_the_dense_oracle() {
    let spec = CrystalSpec::<f64>::hexagonal();
    let unit = gen_crystal_conductance(&spec, 3, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
    let dm = effective_matrix(&unit, 1e-12).unwrap();
    // Three unit bonds per pair of points, no corrector by symmetry.
    assert!((dm.entry(0, 0) - 0.75).abs() < 1e-10 && (dm.entry(1, 1) - 0.75).abs() < 1e-10);
    assert!(dm.entry(0, 1).abs() < 1e-10);

    let env = gen_crystal_conductance(&spec, 3, &ConductanceLaw::Exponential { rate: 1.0 }, 12).unwrap();
    for e in env.edges() {
        let d = bond(&env, e.i, e.j);
        assert!(((d[0] * d[0] + d[1] * d[1]).sqrt() - 1.0).abs() < 1e-12);
    }
    let dm = effective_matrix(&env, 1e-13).unwrap();
    let e00 = dense_energy(&env, &[1.0, 0.0]);
    let e11 = dense_energy(&env, &[0.0, 1.0]);
    let h = 0.5f64.sqrt();
    let e01 = dense_energy(&env, &[h, h]) - 0.5 * (e00 + e11);
    assert!((dm.entry(0, 0) - e00).abs() < 1e-8);
    assert!((dm.entry(1, 1) - e11).abs() < 1e-8);
    assert!((dm.entry(0, 1) - e01).abs() < 1e-8);
}

#[test]
fn msd_matches_the_unit_lattice() {
    let env: Environment<f64> = gen_zd_conductance(2, 64, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
    let est = msd_diffusivity(&env, 30.0, 2000, 3, false).unwrap();
    for i in 0..2 {
        assert!((est.entry(i, i) - 1.0).abs() < 3.0 * est.stderr(i, i), "D_{i}{i} = {}", est.entry(i, i));
    }
    assert!(est.entry(0, 1).abs() < 3.0 * est.stderr(0, 1));
    assert!(msd_diffusivity(&env, 30.0, 999, 3, false).is_err());
}

#[test]
fn convergence_checks() {
    let law = ConductanceLaw::Uniform { low: 1.0, high: 2.0 };
    let envs: Vec<Environment<f64>> = [64usize, 128].iter().map(|l| gen_zd_conductance(1, *l, &law, 1).unwrap()).collect();
    let dms: Vec<EffectiveMatrix<f64>> = envs.iter().map(|e| effective_matrix(e, 1e-12).unwrap()).collect();
    let cases: Vec<ConvergenceCase<'_, f64>> = envs
        .iter()
        .zip(&dms)
        .zip([1.0 / 16.0, 1.0 / 32.0])
        .map(|((env, d), eps)| ConvergenceCase { env, eps, d })
        .collect();

    let zero = resolvent_convergence_check(&cases, &TestFunction::zero(1), 1.0).unwrap();
    assert_eq!(zero.gaps, vec![0.0, 0.0]);
    assert_eq!(zero.final_ratio, 0.0);

    // Both resolvents are bounded by ‖φ‖₁/λ.
    let phi = TestFunction::canonical(1);
    let mass = phi.integral().unwrap();
    let lambda = 1e3;
    let big = resolvent_convergence_check(&cases, &phi, lambda).unwrap();
    assert!(big.gaps.iter().all(|g| *g < 2.0 * mass / lambda));

    let t0 = semigroup_convergence_check(&cases, &phi, 0.0).unwrap();
    assert_eq!(t0.gaps, vec![0.0, 0.0]);

    // A support that leaves the scaled box is refused.
    let wide = TestFunction::bump(1, 3.0);
    assert!(matches!(
        resolvent_convergence_check(&cases, &wide, 1.0),
        Err(sepsim::SepError::SupportViolation { .. })
    ));
}

#[test]
fn tail_mass_is_a_riemann_sum() {
    let env: Environment<f64> = gen_zd_conductance(1, 4096, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
    let rows = tail_mass_check(&env, &[1.0 / 64.0, 1.0 / 256.0], &[1.0, 4.0]);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let outer = r.eps * 2048.0;
        let exact = 2.0 * (outer.atan() - r.ell.atan());
        assert!((r.value - exact).abs() < 2.0 * r.eps, "{r:?} vs {exact}");
    }
}
