//! Compactly supported smooth test functions with exact Hessians.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::quadrature;
use crate::scalar::Scalar;

/// Second-order univariate jet `(f, f', f'')`.
#[derive(Debug, Clone, Copy)]
struct Jet<T> {
    v: T,
    d: T,
    dd: T,
}

impl<T: Scalar> Jet<T> {
    fn var(x: T) -> Self {
        Jet { v: x, d: T::one(), dd: T::zero() }
    }

    fn constant(c: T) -> Self {
        Jet { v: c, d: T::zero(), dd: T::zero() }
    }

    fn add(self, o: Self) -> Self {
        Jet { v: self.v + o.v, d: self.d + o.d, dd: self.dd + o.dd }
    }

    fn sub(self, o: Self) -> Self {
        Jet { v: self.v - o.v, d: self.d - o.d, dd: self.dd - o.dd }
    }

    fn mul(self, o: Self) -> Self {
        Jet {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + T::lit(2.0) * self.d * o.d + self.v * o.dd,
        }
    }

    fn recip(self) -> Self {
        let r = T::one() / self.v;
        Jet {
            v: r,
            d: -self.d * r * r,
            dd: (T::lit(2.0) * self.d * self.d * r - self.dd) * r * r,
        }
    }

    fn div(self, o: Self) -> Self {
        self.mul(o.recip())
    }

    fn exp(self) -> Self {
        let e = self.v.exp();
        Jet { v: e, d: e * self.d, dd: e * (self.dd + self.d * self.d) }
    }
}

/// `exp(−1/u)` for `u > 0`, zero otherwise.
fn flat<T: Scalar>(u: Jet<T>) -> Jet<T> {
    if u.v <= T::zero() {
        Jet::constant(T::zero())
    } else {
        Jet::constant(T::zero()).sub(u.recip()).exp()
    }
}

/// Smooth step from 1 at `u ≤ 0` to 0 at `u ≥ 1`.
fn smooth_step<T: Scalar>(u: Jet<T>) -> Jet<T> {
    if u.v <= T::zero() {
        return Jet::constant(T::one());
    }
    if u.v >= T::one() {
        return Jet::constant(T::zero());
    }
    let a = flat(Jet::constant(T::one()).sub(u));
    let b = flat(u);
    a.div(a.add(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `exp(−1/(1 − |y|²))`, `y = (x − c)/r`; peak value `1/e`.
    Bump,
    /// Equal to 1 on `B_inner`, vanishing outside `B_{inner+1}`.
    Plateau { inner: f64 },
    /// Bump times `y_axis`.
    BumpMonomial { axis: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<T> {
    shape: Shape,
    center: Vec<T>,
    radius: T,
    scale: T,
}

impl<T: Scalar> TestFunction<T> {
    pub fn bump(d: usize, radius: T) -> Self {
        TestFunction {
            shape: Shape::Bump,
            center: vec![T::zero(); d],
            radius,
            scale: T::one(),
        }
    }

    /// The bump of radius 1 at the origin.
    pub fn canonical(d: usize) -> Self {
        Self::bump(d, T::one())
    }

    pub fn plateau(d: usize, inner: T) -> Self {
        TestFunction {
            shape: Shape::Plateau { inner: inner.as_f64() },
            center: vec![T::zero(); d],
            radius: inner + T::one(),
            scale: T::one(),
        }
    }

    pub fn bump_monomial(d: usize, radius: T, axis: usize) -> Self {
        assert!(axis < d);
        TestFunction {
            shape: Shape::BumpMonomial { axis },
            center: vec![T::zero(); d],
            radius,
            scale: T::one(),
        }
    }

    /// Identically zero function with the support of `self`.
    pub fn zero(d: usize) -> Self {
        Self::canonical(d).scaled(T::zero())
    }

    pub fn scaled(mut self, s: T) -> Self {
        self.scale *= s;
        self
    }

    pub fn centered_at(mut self, c: Vec<T>) -> Self {
        assert_eq!(c.len(), self.center.len());
        self.center = c;
        self
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    /// `φ ≡ 0` outside the ball of this radius around the center.
    pub fn support_radius(&self) -> T {
        self.radius
    }

    /// Distance of the support from the origin plus its radius.
    pub fn reach(&self) -> T {
        self.center.iter().map(|c| *c * *c).sum::<T>().sqrt() + self.radius
    }

    pub fn is_zero(&self) -> bool {
        self.scale == T::zero()
    }

    fn offset(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.center).map(|(a, c)| *a - *c).collect()
    }

    /// Bump as a function of `q = |y|²/r²`.
    fn bump_q(q: Jet<T>) -> Jet<T> {
        if q.v >= T::one() {
            return Jet::constant(T::zero());
        }
        let u = Jet::constant(T::one()).sub(q);
        Jet::constant(T::zero()).sub(u.recip()).exp()
    }

    fn plateau_radial(&self, rho: T, inner: T) -> Jet<T> {
        smooth_step(Jet::var(rho).sub(Jet::constant(inner)))
    }

    pub fn value(&self, x: &[T]) -> T {
        if self.is_zero() {
            return T::zero();
        }
        let y = self.offset(x);
        let r2 = y.iter().map(|v| *v * *v).sum::<T>();
        if r2 >= self.radius * self.radius {
            return T::zero();
        }
        let v = match self.shape {
            Shape::Bump => Self::bump_q(Jet::constant(r2 / (self.radius * self.radius))).v,
            Shape::BumpMonomial { axis } => {
                Self::bump_q(Jet::constant(r2 / (self.radius * self.radius))).v * y[axis] / self.radius
            }
            Shape::Plateau { inner } => self.plateau_radial(r2.sqrt(), T::lit(inner)).v,
        };
        v * self.scale
    }

    /// Row-major `d × d` Hessian.
    pub fn hessian(&self, x: &[T]) -> Vec<T> {
        let d = self.dim();
        let mut h = vec![T::zero(); d * d];
        if self.is_zero() {
            return h;
        }
        let y = self.offset(x);
        let r2 = y.iter().map(|v| *v * *v).sum::<T>();
        if r2 >= self.radius * self.radius {
            return h;
        }
        let two = T::lit(2.0);
        match self.shape {
            Shape::Bump | Shape::BumpMonomial { .. } => {
                let rr = self.radius * self.radius;
                let g = Self::bump_q(Jet::var(r2 / rr));
                // ∂_i q = 2 y_i / r², ∂_ik q = 2 δ_ik / r².
                for i in 0..d {
                    for k in 0..d {
                        let mut v = g.dd * two * y[i] / rr * two * y[k] / rr;
                        if i == k {
                            v += g.d * two / rr;
                        }
                        h[i * d + k] = v;
                    }
                }
                if let Shape::BumpMonomial { axis } = self.shape {
                    let s = y[axis] / self.radius;
                    for v in h.iter_mut() {
                        *v *= s;
                    }
                    for i in 0..d {
                        let gi = g.d * two * y[i] / rr / self.radius;
                        h[i * d + axis] += gi;
                        h[axis * d + i] += gi;
                    }
                }
            }
            Shape::Plateau { inner } => {
                let rho = r2.sqrt();
                if rho <= T::lit(inner) || rho == T::zero() {
                    return h;
                }
                let g = self.plateau_radial(rho, T::lit(inner));
                for i in 0..d {
                    for k in 0..d {
                        let eik = y[i] * y[k] / r2;
                        let delta = if i == k { T::one() } else { T::zero() };
                        h[i * d + k] = g.dd * eik + g.d / rho * (delta - eik);
                    }
                }
            }
        }
        for v in h.iter_mut() {
            *v *= self.scale;
        }
        h
    }

    /// `∇·D∇φ = Σ D_ik ∂_i∂_k φ` for a row-major `D`.
    pub fn divergence_form(&self, dmat: &[T], x: &[T]) -> T {
        self.hessian(x).iter().zip(dmat).map(|(a, b)| *a * *b).sum()
    }

    /// `∫ φ dx`.
    pub fn integral(&self) -> Result<T> {
        if self.is_zero() {
            return Ok(T::zero());
        }
        let d = self.dim();
        match self.shape {
            Shape::BumpMonomial { .. } => Ok(T::zero()),
            _ => {
                let area = T::lit(2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0));
                let radial = |rho: T| {
                    let mut x = vec![T::zero(); d];
                    x[0] = rho;
                    let c: Vec<T> = x.iter().zip(&self.center).map(|(a, b)| *a + *b).collect();
                    self.value(&c) * rho.powi(d as i32 - 1)
                };
                let tol = T::lit(1e-13).max(T::epsilon() * T::lit(16.0));
                Ok(area * quadrature::integrate(radial, T::zero(), self.radius, tol)?)
            }
        }
    }
}

/// The fixed family `φ_0, φ_1, …`: for `ℓ = 1, 2, …` a bump of radius `ℓ`,
/// a plateau on `B_ℓ` supported in `B_{ℓ+1}`, then the bump times each
/// coordinate.
pub fn test_family<T: Scalar>(d: usize, len: usize) -> Vec<TestFunction<T>> {
    let group = 2 + d;
    (0..len)
        .map(|j| {
            let l = T::from_usize_lossy(j / group + 1);
            match j % group {
                0 => TestFunction::bump(d, l),
                1 => TestFunction::plateau(d, l),
                k => TestFunction::bump_monomial(d, l, k - 2),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureDistance {
    pub value: f64,
    /// Bound on the omitted terms of the series.
    pub tail: f64,
}

/// `Σ_j 2^{−j} (1 ∧ |a_j − b_j|)` over the compared prefix.
pub fn measure_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<MeasureDistance> {
    if a.len() != b.len() {
        return Err(crate::error::SepError::invalid(format!(
            "compared prefixes differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let mut value = 0.0;
    let mut w = 1.0;
    for (x, y) in a.iter().zip(b) {
        value += w * (x.as_f64() - y.as_f64()).abs().min(1.0);
        w *= 0.5;
    }
    Ok(MeasureDistance {
        value,
        tail: 2.0f64.powi(1 - a.len() as i32),
    })
}
