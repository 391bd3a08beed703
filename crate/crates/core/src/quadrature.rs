//! One-dimensional quadrature rules used by the macroscopic layer and the
//! pathwise checks.

use std::sync::OnceLock;

use crate::error::{Result, SepError};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: usize = 60;

fn gk15<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let c = (a + b) * T::lit(0.5);
    let h = (b - a) * T::lit(0.5);
    let fc = f(c);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for k in 0..7 {
        let dx = h * T::lit(XGK[k]);
        let s = f(c - dx) + f(c + dx);
        kron += s * T::lit(WGK[k]);
        if k % 2 == 1 {
            gauss += s * T::lit(WG[k / 2]);
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

fn gk_recursive<T: Scalar, F: FnMut(T) -> T>(
    f: &mut F,
    a: T,
    b: T,
    tol: T,
    depth: usize,
    evals: &mut usize,
) -> Result<T> {
    let (k, err) = gk15(f, a, b);
    *evals += 15;
    let width = (b - a).abs();
    let scale = a.abs().max(b.abs()).max(T::one());
    if err <= tol || width <= scale * T::epsilon() * T::lit(64.0) {
        return Ok(k);
    }
    if depth >= MAX_DEPTH {
        return Err(SepError::Quadrature(format!(
            "adaptive Gauss–Kronrod hit depth {MAX_DEPTH} on [{a}, {b}] with error {err:e}"
        )));
    }
    let m = (a + b) * T::lit(0.5);
    let half = tol * T::lit(0.5);
    Ok(gk_recursive(f, a, m, half, depth + 1, evals)? + gk_recursive(f, m, b, half, depth + 1, evals)?)
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]` to an
/// absolute tolerance.
pub fn integrate<T: Scalar, F: FnMut(T) -> T>(mut f: F, a: T, b: T, abs_tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let mut evals = 0;
    gk_recursive(&mut f, a, b, abs_tol, 0, &mut evals)
}

/// Integral of `f` against the standard normal density, truncated to
/// `|z| ≤ 8.5` (dropped mass below 2e-17).
pub fn integrate_gaussian<T: Scalar, F: FnMut(T) -> T>(mut f: F, abs_tol: T) -> Result<T> {
    let norm = T::one() / (T::lit(2.0) * T::PI()).sqrt();
    let zmax = T::lit(8.5);
    integrate(
        |z: T| f(z) * (-(z * z) * T::lit(0.5)).exp() * norm,
        -zmax,
        zmax,
        abs_tol,
    )
}

fn simpson_recursive<T: Scalar, F: FnMut(T) -> T>(
    f: &mut F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: usize,
) -> Result<T> {
    let m = (a + b) * T::lit(0.5);
    let lm = (a + m) * T::lit(0.5);
    let rm = (m + b) * T::lit(0.5);
    let flm = f(lm);
    let frm = f(rm);
    let six = T::lit(6.0);
    let left = (m - a) / six * (fa + T::lit(4.0) * flm + fm);
    let right = (b - m) / six * (fm + T::lit(4.0) * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= T::lit(15.0) * tol {
        return Ok(left + right + delta / T::lit(15.0));
    }
    if depth >= MAX_DEPTH {
        return Err(SepError::Quadrature(format!(
            "adaptive Simpson hit depth {MAX_DEPTH} on [{a}, {b}]"
        )));
    }
    let half = tol * T::lit(0.5);
    Ok(simpson_recursive(f, a, m, fa, flm, fm, left, half, depth + 1)?
        + simpson_recursive(f, m, b, fm, frm, fb, right, half, depth + 1)?)
}

/// Adaptive Simpson integration with Richardson correction.
pub fn adaptive_simpson<T: Scalar, F: FnMut(T) -> T>(mut f: F, a: T, b: T, abs_tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) * T::lit(0.5);
    let fm = f(m);
    let whole = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    simpson_recursive(&mut f, a, b, fa, fm, fb, whole, abs_tol, 0)
}

/// Number of nodes of the shipped Gauss–Laguerre rule.
pub const LAGUERRE_NODES: usize = 64;

/// Nodes and weights of the 64-point Gauss–Laguerre rule for
/// `∫₀^∞ e^{−s} g(s) ds`.
pub fn gauss_laguerre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| laguerre_rule(LAGUERRE_NODES))
}

fn laguerre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n {
        if i == 0 {
            z = 3.0 / (1.0 + 2.4 * nf);
        } else if i == 1 {
            z += 15.0 / (1.0 + 2.5 * nf);
        } else {
            let ai = (i - 1) as f64;
            z += (1.0 + 2.55 * ai) / (1.9 * ai) * (z - x[i - 2]);
        }
        let mut pp = 0.0;
        let mut p2 = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = (nf * p1 - nf * p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs() {
                break;
            }
        }
        x[i] = z;
        w[i] = -1.0 / (pp * nf * p2);
    }
    (x, w)
}
