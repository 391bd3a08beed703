use serde::{Deserialize, Serialize};

use super::test_functions::TestFunction;
use crate::error::{Result, SepError};
use crate::homogenization::EffectiveMatrix;
use crate::linalg::dot;
use crate::quadrature::{gauss_laguerre, integrate, integrate_gaussian};
use crate::scalar::Scalar;

/// Absolute accuracy target of the quadrature paths.
pub const DEFAULT_HEAT_TOL: f64 = 1e-6;

/// Initial macroscopic density `ρ₀` with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile<T> {
    Constant { value: T },
    /// `inside` where `normal·x < offset`, `outside` elsewhere.
    Step { normal: Vec<T>, offset: T, inside: T, outside: T },
    /// `height·exp(1 − 1/(1 − |y|²))` with `y = (x − center)/radius`.
    Bump { center: Vec<T>, radius: T, height: T },
    /// `height·exp(−|x − center|²/(2 width²))`.
    Gaussian { center: Vec<T>, width: T, height: T },
    /// Linear interpolation of `values` at `xs` along one axis, constant
    /// beyond the ends.
    Table { axis: usize, xs: Vec<T>, values: Vec<T> },
    Product { factors: Vec<Profile<T>> },
}

impl<T: Scalar> Profile<T> {
    /// Step of height 1 on `x_axis < 0`.
    pub fn step(d: usize, axis: usize) -> Self {
        let mut normal = vec![T::zero(); d];
        normal[axis] = T::one();
        Profile::Step {
            normal,
            offset: T::zero(),
            inside: T::one(),
            outside: T::zero(),
        }
    }

    pub fn value(&self, x: &[T]) -> T {
        match self {
            Profile::Constant { value } => *value,
            Profile::Step { normal, offset, inside, outside } => {
                if dot(normal, x) < *offset {
                    *inside
                } else {
                    *outside
                }
            }
            Profile::Bump { center, radius, height } => {
                let q = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (*a - *c) * (*a - *c))
                    .sum::<T>()
                    / (*radius * *radius);
                if q >= T::one() {
                    T::zero()
                } else {
                    *height * (T::one() - T::one() / (T::one() - q)).exp()
                }
            }
            Profile::Gaussian { center, width, height } => {
                let r2 = x.iter().zip(center).map(|(a, c)| (*a - *c) * (*a - *c)).sum::<T>();
                *height * (-r2 / (T::lit(2.0) * *width * *width)).exp()
            }
            Profile::Table { axis, xs, values } => interpolate(xs, values, x[*axis]),
            Profile::Product { factors } => factors.iter().map(|f| f.value(x)).fold(T::one(), |a, b| a * b),
        }
    }

    /// `(inf, sup)` of the profile.
    pub fn range(&self) -> (T, T) {
        match self {
            Profile::Constant { value } => (*value, *value),
            Profile::Step { inside, outside, .. } => (inside.min(*outside), inside.max(*outside)),
            Profile::Bump { height, .. } | Profile::Gaussian { height, .. } => (T::zero(), *height),
            Profile::Table { values, .. } => values
                .iter()
                .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(*v), hi.max(*v))),
            Profile::Product { factors } => {
                // Factors are nonnegative, so the bounds multiply.
                factors.iter().fold((T::one(), T::one()), |(lo, hi), f| {
                    let (a, b) = f.range();
                    (lo * a, hi * b)
                })
            }
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad_dim = |v: &Vec<T>| v.len() != d;
        match self {
            Profile::Step { normal, .. } if bad_dim(normal) => {
                return Err(SepError::invalid("step normal has the wrong dimension"))
            }
            Profile::Bump { center, radius, .. } => {
                if bad_dim(center) || !(*radius > T::zero()) {
                    return Err(SepError::invalid("bump profile needs a center in R^d and a positive radius"));
                }
            }
            Profile::Gaussian { center, width, .. } => {
                if bad_dim(center) || !(*width > T::zero()) {
                    return Err(SepError::invalid("gaussian profile needs a center in R^d and a positive width"));
                }
            }
            Profile::Table { axis, xs, values } => {
                if *axis >= d || xs.is_empty() || xs.len() != values.len() {
                    return Err(SepError::invalid("table profile needs matching, nonempty nodes and values"));
                }
                if xs.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(SepError::invalid("table nodes must be strictly increasing"));
                }
            }
            Profile::Product { factors } => {
                for f in factors {
                    f.validate(d)?;
                }
            }
            _ => {}
        }
        let (lo, hi) = self.range();
        if !(lo >= T::zero() && hi <= T::one()) {
            return Err(SepError::invalid(format!(
                "initial profile takes values in [{lo}, {hi}], outside [0, 1]"
            )));
        }
        Ok(())
    }

    /// Direction `n` such that the profile is a function of `n·x` alone.
    /// `Some(None)` for constants.
    fn ridge(&self) -> Option<Option<&[T]>> {
        match self {
            Profile::Constant { .. } => Some(None),
            Profile::Step { normal, .. } => Some(Some(normal)),
            _ => None,
        }
    }
}

fn interpolate<T: Scalar>(xs: &[T], values: &[T], x: T) -> T {
    if x <= xs[0] {
        return values[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return values[last];
    }
    let k = xs.partition_point(|v| *v <= x) - 1;
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    values[k] * (T::one() - w) + values[k + 1] * w
}

/// Initial profile together with the effective matrix driving `∂_t ρ = ∇·D∇ρ`.
#[derive(Debug, Clone)]
pub struct MacroProfile<T> {
    pub initial: Profile<T>,
    pub d: EffectiveMatrix<T>,
    pub tol: T,
}

impl<T: Scalar> MacroProfile<T> {
    pub fn new(initial: Profile<T>, d: EffectiveMatrix<T>) -> Result<Self> {
        initial.validate(d.dim())?;
        Ok(MacroProfile {
            initial,
            d,
            tol: T::lit(DEFAULT_HEAT_TOL).max(T::epsilon() * T::lit(64.0)),
        })
    }

    pub fn dim(&self) -> usize {
        self.d.dim()
    }

    /// Positive eigenpairs of `D` after thresholding.
    fn active(&self) -> Vec<(T, &[T])> {
        self.d
            .eigenvalues()
            .iter()
            .zip(self.d.eigenvectors())
            .filter(|(l, _)| **l > T::zero())
            .map(|(l, v)| (*l, v.as_slice()))
            .collect()
    }

    /// `nᵀ D n` with the thresholded spectrum.
    fn spread(&self, a: &[T], b: &[T]) -> T {
        self.active()
            .iter()
            .map(|(l, v)| *l * dot(v, a) * dot(v, b))
            .sum()
    }

    /// `ρ(x, t) = P_t ρ₀(x)`.
    pub fn heat_solution(&self, x: &[T], t: T) -> Result<T> {
        if !(t >= T::zero()) {
            return Err(SepError::invalid("time must be nonnegative"));
        }
        if x.len() != self.dim() {
            return Err(SepError::invalid("point has the wrong dimension"));
        }
        if t == T::zero() {
            return Ok(self.initial.value(x));
        }
        let v = self.evolve(&self.initial, x, t)?;
        let (lo, hi) = self.initial.range();
        Ok(v.max(lo).min(hi))
    }

    fn evolve(&self, p: &Profile<T>, x: &[T], t: T) -> Result<T> {
        match p {
            Profile::Constant { value } => Ok(*value),
            Profile::Step { normal, offset, inside, outside } => {
                let var = T::lit(2.0) * t * self.spread(normal, normal);
                let s = dot(normal, x) - *offset;
                if var <= T::zero() {
                    return Ok(if s < T::zero() { *inside } else { *outside });
                }
                let below = (s / (T::lit(2.0) * var).sqrt()).erfc() * T::lit(0.5);
                Ok(*outside + (*inside - *outside) * below)
            }
            Profile::Gaussian { center, width, height } => {
                let w2 = *width * *width;
                let y: Vec<T> = x.iter().zip(center).map(|(a, c)| *a - *c).collect();
                let mut acc = *height;
                for (l, v) in self.d.eigenvalues().iter().zip(self.d.eigenvectors()) {
                    let s2 = w2 + T::lit(2.0) * t * *l;
                    let yk = dot(v, &y);
                    acc *= (-(yk * yk) / (T::lit(2.0) * s2)).exp() * (w2 / s2).sqrt();
                }
                Ok(acc)
            }
            Profile::Table { axis, .. } => {
                let mut n = vec![T::zero(); self.dim()];
                n[*axis] = T::one();
                let sd = (T::lit(2.0) * t * self.spread(&n, &n)).sqrt();
                if sd == T::zero() {
                    return Ok(p.value(x));
                }
                let mut xs = x.to_vec();
                integrate_gaussian(
                    |z| {
                        xs[*axis] = x[*axis] + sd * z;
                        p.value(&xs)
                    },
                    self.tol,
                )
            }
            Profile::Product { factors } if self.factorizes(factors) => {
                let mut acc = T::one();
                for f in factors {
                    acc *= self.evolve(f, x, t)?;
                }
                Ok(acc)
            }
            Profile::Bump { .. } | Profile::Product { .. } => self.convolve(p, x, t),
        }
    }

    /// Ridge factors whose Gaussian projections are independent evolve
    /// separately.
    fn factorizes(&self, factors: &[Profile<T>]) -> bool {
        let mut dirs = Vec::new();
        for f in factors {
            match f.ridge() {
                Some(Some(n)) => dirs.push(n),
                Some(None) => {}
                None => return false,
            }
        }
        let lead = self.d.max_eigenvalue();
        for a in 0..dirs.len() {
            for b in (a + 1)..dirs.len() {
                let scale = lead * dot(dirs[a], dirs[a]).sqrt() * dot(dirs[b], dirs[b]).sqrt();
                if self.spread(dirs[a], dirs[b]).abs() > T::lit(1e-12) * scale {
                    return false;
                }
            }
        }
        true
    }

    /// Nested Gaussian quadrature over the positive eigen-directions.
    fn convolve(&self, p: &Profile<T>, x: &[T], t: T) -> Result<T> {
        let active = self.active();
        if active.is_empty() {
            return Ok(p.value(x));
        }
        let sds: Vec<T> = active.iter().map(|(l, _)| (T::lit(2.0) * t * *l).sqrt()).collect();
        let dirs: Vec<&[T]> = active.iter().map(|(_, v)| *v).collect();
        let tol = self.tol / T::from_usize_lossy(active.len());
        let mut z = vec![T::zero(); active.len()];
        nested_gaussian(0, &mut z, tol, &mut |z: &[T]| {
            let y: Vec<T> = (0..x.len())
                .map(|i| x[i] + (0..z.len()).map(|k| sds[k] * z[k] * dirs[k][i]).sum::<T>())
                .collect();
            p.value(&y)
        })
    }

    /// `∫ φ(x) ρ(x, t) dx` over the support of `φ`.
    pub fn integrate_against(&self, phi: &TestFunction<T>, t: T) -> Result<T> {
        self.integrate_weighted(phi, |x| phi.value(x), t)
    }

    /// `∫ w(x) ρ(x, t) dx` for a weight vanishing outside the support of `φ`.
    pub fn integrate_weighted(&self, phi: &TestFunction<T>, w: impl Fn(&[T]) -> T, t: T) -> Result<T> {
        if phi.is_zero() {
            return Ok(T::zero());
        }
        let r = phi.support_radius();
        let c = phi.center().to_vec();
        let mut x = c.clone();
        let mut failure = None;
        let v = nested_box(0, &c, r, &mut x, self.tol, &mut |x: &[T]| {
            let f = w(x);
            if f == T::zero() {
                return T::zero();
            }
            match self.heat_solution(x, t) {
                Ok(rho) => f * rho,
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            }
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// `R_λ ρ(x) = ∫₀^∞ e^{−λs} P_s g(x) ds` for `g` given as a profile,
    /// by 64-node Gauss–Laguerre in `s`.
    pub fn resolvent(&self, lambda: T, x: &[T]) -> Result<T> {
        if !(lambda > T::zero()) {
            return Err(SepError::invalid("resolvent parameter must be positive"));
        }
        laplace_transform(lambda, self.tol, |s| self.evolve(&self.initial, x, s))
    }
}

fn nested_gaussian<T: Scalar>(k: usize, z: &mut Vec<T>, tol: T, f: &mut dyn FnMut(&[T]) -> T) -> Result<T> {
    if k == z.len() {
        return Ok(f(z));
    }
    let mut failure = None;
    let v = integrate_gaussian(
        |zk| {
            z[k] = zk;
            match nested_gaussian(k + 1, z, tol, f) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            }
        },
        tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

fn nested_box<T: Scalar>(
    k: usize,
    c: &[T],
    r: T,
    x: &mut Vec<T>,
    tol: T,
    f: &mut dyn FnMut(&[T]) -> T,
) -> Result<T> {
    if k == c.len() {
        return Ok(f(x));
    }
    let mut failure = None;
    let v = integrate(
        |xk| {
            x[k] = xk;
            match nested_box(k + 1, c, r, x, tol, f) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            }
        },
        c[k] - r,
        c[k] + r,
        tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `ρ(x, t)` for a profile and effective matrix.
pub fn heat_solution<T: Scalar>(profile: &MacroProfile<T>, x: &[T], t: T) -> Result<T> {
    profile.heat_solution(x, t)
}

/// `R_λ φ(x)` for a test function, by Gauss–Laguerre over the semigroup.
pub fn continuum_resolvent<T: Scalar>(
    d: &EffectiveMatrix<T>,
    phi: &TestFunction<T>,
    lambda: T,
    x: &[T],
    tol: T,
) -> Result<T> {
    if !(lambda > T::zero()) {
        return Err(SepError::invalid("resolvent parameter must be positive"));
    }
    laplace_transform(lambda, tol, |s| continuum_semigroup(d, phi, s, x, tol))
}

/// `∫₀^∞ e^{−λs} g(s) ds`: adaptive Gauss–Kronrod on `[0, 1/λ]` and
/// 64-node Gauss–Laguerre on the shifted tail. Semigroup values have a
/// branch point just left of `s = 0`, which a single Laguerre rule resolves
/// poorly.
fn laplace_transform<T: Scalar>(lambda: T, tol: T, mut g: impl FnMut(T) -> Result<T>) -> Result<T> {
    let a = T::one() / lambda;
    let mut failure = None;
    let mut eval = |s: T| match g(s) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            T::zero()
        }
    };
    let head = integrate(|s| (-lambda * s).exp() * eval(s), T::zero(), a, tol * T::lit(0.5) / lambda)?;
    let (nodes, weights) = gauss_laguerre();
    let mut tail = T::zero();
    for (u, w) in nodes.iter().zip(weights) {
        tail += T::lit(*w) * eval(a + T::lit(*u) / lambda);
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(head + (-T::one()).exp() * tail / lambda)
}

/// `P_t φ(x)` for a test function: Gaussian convolution along the positive
/// eigen-directions of `D`.
pub fn continuum_semigroup<T: Scalar>(
    d: &EffectiveMatrix<T>,
    phi: &TestFunction<T>,
    t: T,
    x: &[T],
    tol: T,
) -> Result<T> {
    if phi.is_zero() {
        return Ok(T::zero());
    }
    if t == T::zero() {
        return Ok(phi.value(x));
    }
    let active: Vec<(T, &[T])> = d
        .eigenvalues()
        .iter()
        .zip(d.eigenvectors())
        .filter(|(l, _)| **l > T::zero())
        .map(|(l, v)| (*l, v.as_slice()))
        .collect();
    if active.is_empty() {
        return Ok(phi.value(x));
    }
    let sds: Vec<T> = active.iter().map(|(l, _)| (T::lit(2.0) * t * *l).sqrt()).collect();
    // Along each eigen-direction only the slab crossing the support ball
    // contributes.
    let r = phi.support_radius();
    let zmax = T::lit(8.5);
    let ranges: Vec<(T, T)> = active
        .iter()
        .zip(&sds)
        .map(|((_, v), sd)| {
            let off: T = v.iter().zip(x.iter().zip(phi.center())).map(|(vi, (a, c))| *vi * (*a - *c)).sum();
            (((-r - off) / *sd).max(-zmax), ((r - off) / *sd).min(zmax))
        })
        .collect();
    if ranges.iter().any(|(a, b)| a >= b) {
        return Ok(T::zero());
    }
    let tol = tol / T::from_usize_lossy(active.len());
    let mut z = vec![T::zero(); active.len()];
    let mut y = x.to_vec();
    nested_gaussian_ranges(0, &ranges, &mut z, tol, &mut |z: &[T]| {
        for i in 0..x.len() {
            y[i] = x[i] + (0..z.len()).map(|k| sds[k] * z[k] * active[k].1[i]).sum::<T>();
        }
        phi.value(&y)
    })
}

/// Nested integration against the standard normal density with each
/// coordinate restricted to a range.
fn nested_gaussian_ranges<T: Scalar>(
    k: usize,
    ranges: &[(T, T)],
    z: &mut Vec<T>,
    tol: T,
    f: &mut dyn FnMut(&[T]) -> T,
) -> Result<T> {
    if k == z.len() {
        return Ok(f(z));
    }
    let norm = T::one() / (T::lit(2.0) * T::PI()).sqrt();
    let mut failure = None;
    let v = integrate(
        |zk: T| {
            z[k] = zk;
            let w = (-(zk * zk) * T::lit(0.5)).exp() * norm;
            match nested_gaussian_ranges(k + 1, ranges, z, tol, f) {
                Ok(v) => w * v,
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            }
        },
        ranges[k].0,
        ranges[k].1,
        tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}
