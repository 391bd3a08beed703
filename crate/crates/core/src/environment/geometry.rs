use serde::{Deserialize, Serialize};

use crate::error::{Result, SepError};
use crate::linalg::SmallMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    /// Translations by ℝ^d.
    Continuum,
    /// Translations by `V·g`, `g ∈ ℤ^d`.
    Lattice,
}

/// Action of the translation group on ℝ^d: `x ↦ x + V g`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAction<T> {
    kind: ActionKind,
    basis: SmallMatrix<T>,
    inverse: SmallMatrix<T>,
    det: T,
}

/// Result of splitting a point into a group element and a cell representative.
#[derive(Debug, Clone, PartialEq)]
pub enum OrbitDecomposition<T> {
    Lattice { cell: Vec<i64>, offset: Vec<T> },
    /// Continuum actions reach every point from the origin: `x = V g`.
    Continuum { shift: Vec<T> },
}

impl<T: Scalar> GroupAction<T> {
    /// Builds an action from the basis columns `v₁..v_d`.
    pub fn new(kind: ActionKind, columns: &[Vec<T>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(SepError::invalid("dimension must be positive"));
        }
        let basis = SmallMatrix::from_columns(columns);
        let (inverse, det) = basis
            .inverse_with_det()
            .ok_or_else(|| SepError::invalid("basis matrix is not invertible"))?;
        Ok(GroupAction {
            kind,
            basis,
            inverse,
            det,
        })
    }

    pub fn identity_lattice(d: usize) -> Self {
        Self::new(ActionKind::Lattice, &unit_columns(d)).expect("identity is invertible")
    }

    pub fn continuum(d: usize) -> Self {
        Self::new(ActionKind::Continuum, &unit_columns(d)).expect("identity is invertible")
    }

    /// Honeycomb lattice with unit bond length: `v₁ = (√3, 0)`,
    /// `v₂ = (√3/2, 3/2)`.
    pub fn hexagonal() -> Self {
        let s3 = T::lit(3.0).sqrt();
        let half = T::lit(0.5);
        Self::new(
            ActionKind::Lattice,
            &[vec![s3, T::zero()], vec![s3 * half, T::lit(1.5)]],
        )
        .expect("hexagonal basis is invertible")
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.basis.n
    }

    pub fn basis(&self) -> &SmallMatrix<T> {
        &self.basis
    }

    pub fn basis_column(&self, k: usize) -> Vec<T> {
        self.basis.column(k)
    }

    /// `|det V|`, the volume of the cell Δ.
    pub fn cell_volume(&self) -> T {
        self.det.abs()
    }

    pub fn translate(&self, x: &[T], g: &[i64]) -> Vec<T> {
        let gv: Vec<T> = g.iter().map(|&k| T::lit(k as f64)).collect();
        let shift = self.basis.mul_vec(&gv);
        x.iter().zip(shift).map(|(a, b)| *a + b).collect()
    }

    /// Cell coordinates `V⁻¹ x`.
    pub fn cell_coordinates(&self, x: &[T]) -> Vec<T> {
        self.inverse.mul_vec(x)
    }

    /// Splits `x = V g + β` with `β` in the half-open cell. Coordinates
    /// within `1e-12` of a face snap onto it (floor semantics).
    pub fn orbit_decompose(&self, x: &[T]) -> OrbitDecomposition<T> {
        assert_eq!(x.len(), self.dim());
        let s = self.cell_coordinates(x);
        match self.kind {
            ActionKind::Continuum => OrbitDecomposition::Continuum { shift: s },
            ActionKind::Lattice => {
                let tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
                let cell: Vec<i64> = s
                    .iter()
                    .map(|&sk| {
                        let r = sk.round();
                        let g = if (sk - r).abs() <= tol * sk.abs().max(T::one()) {
                            r
                        } else {
                            sk.floor()
                        };
                        g.to_i64().expect("cell index fits in i64")
                    })
                    .collect();
                let origin = self.translate(&vec![T::zero(); self.dim()], &cell);
                let offset = x.iter().zip(origin).map(|(a, b)| *a - b).collect();
                OrbitDecomposition::Lattice { cell, offset }
            }
        }
    }
}

pub(crate) fn unit_columns<T: Scalar>(d: usize) -> Vec<Vec<T>> {
    (0..d)
        .map(|k| (0..d).map(|i| if i == k { T::one() } else { T::zero() }).collect())
        .collect()
}

/// Periodic box `ℝ^d / P ℤ^d` with `P = side · V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Torus<T> {
    period: SmallMatrix<T>,
    inverse: SmallMatrix<T>,
    volume: T,
}

impl<T: Scalar> Torus<T> {
    pub fn new(geometry: &GroupAction<T>, side: T) -> Result<Self> {
        if !(side > T::zero()) || !side.is_finite() {
            return Err(SepError::invalid("box side must be positive and finite"));
        }
        let period = geometry.basis().scaled(side);
        let (inverse, det) = period
            .inverse_with_det()
            .ok_or_else(|| SepError::invalid("degenerate torus"))?;
        Ok(Torus {
            period,
            inverse,
            volume: det.abs(),
        })
    }

    pub fn dim(&self) -> usize {
        self.period.n
    }

    pub fn volume(&self) -> T {
        self.volume
    }

    pub fn period(&self) -> &SmallMatrix<T> {
        &self.period
    }

    /// Minimal-image representative of a displacement. The flag reports a
    /// tie (a fractional coordinate at ±1/2), where the image is ambiguous.
    pub fn wrap_displacement(&self, delta: &[T]) -> (Vec<T>, bool) {
        let mut s = self.inverse.mul_vec(delta);
        let mut ambiguous = false;
        let half = T::lit(0.5);
        let tol = T::lit(1e-9);
        for v in s.iter_mut() {
            *v -= v.round();
            if ((*v).abs() - half).abs() <= tol {
                ambiguous = true;
            }
        }
        (self.period.mul_vec(&s), ambiguous)
    }

    /// Representative with fractional coordinates in `[-1/2, 1/2)`.
    pub fn centered(&self, x: &[T]) -> Vec<T> {
        let mut s = self.inverse.mul_vec(x);
        let half = T::lit(0.5);
        for v in s.iter_mut() {
            *v = *v - (*v + half).floor();
        }
        self.period.mul_vec(&s)
    }

    /// Representative with fractional coordinates in `[0, 1)`.
    pub fn wrap_position(&self, x: &[T]) -> Vec<T> {
        let mut s = self.inverse.mul_vec(x);
        for v in s.iter_mut() {
            *v = *v - v.floor();
            if *v >= T::one() {
                *v = T::zero();
            }
        }
        self.period.mul_vec(&s)
    }

    pub fn distance(&self, a: &[T], b: &[T]) -> T {
        let delta: Vec<T> = b.iter().zip(a).map(|(x, y)| *x - *y).collect();
        let (w, _) = self.wrap_displacement(&delta);
        w.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    /// Radius of the largest ball centred at the origin that fits in the
    /// centred fundamental domain.
    pub fn inradius(&self) -> T {
        (0..self.dim())
            .map(|k| {
                let row_norm = (0..self.dim())
                    .map(|j| self.inverse[(k, j)] * self.inverse[(k, j)])
                    .sum::<T>()
                    .sqrt();
                T::lit(0.5) / row_norm
            })
            .fold(T::infinity(), |a, b| a.min(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_decomposition() {
        let g = GroupAction::<f64>::identity_lattice(2);
        match g.orbit_decompose(&[2.5, -1.2]) {
            OrbitDecomposition::Lattice { cell, offset } => {
                assert_eq!(cell, vec![2, -2]);
                assert!((offset[0] - 0.5).abs() < 1e-15);
                assert!((offset[1] - 0.8).abs() < 1e-15);
            }
            _ => panic!("lattice expected"),
        }
    }

    #[test]
    fn hexagonal_basis_vector_maps_to_next_cell() {
        let g = GroupAction::<f64>::hexagonal();
        let v1 = g.basis_column(0);
        assert_eq!(
            g.orbit_decompose(&v1),
            OrbitDecomposition::Lattice {
                cell: vec![1, 0],
                offset: vec![0.0, 0.0]
            }
        );
        assert!((g.cell_volume() - 1.5 * 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn continuum_branch() {
        let g = GroupAction::<f64>::continuum(2);
        assert_eq!(
            g.orbit_decompose(&[0.25, 3.0]),
            OrbitDecomposition::Continuum {
                shift: vec![0.25, 3.0]
            }
        );
    }

    #[test]
    fn singular_basis_rejected() {
        let r = GroupAction::<f64>::new(ActionKind::Lattice, &[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(r.is_err());
    }

    #[test]
    fn torus_wrapping() {
        let t = Torus::new(&GroupAction::<f64>::identity_lattice(1), 8.0).unwrap();
        assert_eq!(t.wrap_displacement(&[7.0]).0, vec![-1.0]);
        assert!(t.wrap_displacement(&[4.0]).1);
        assert_eq!(t.centered(&[5.0]), vec![-3.0]);
        assert_eq!(t.centered(&[4.0]), vec![-4.0]);
        assert_eq!(t.inradius(), 4.0);
        assert_eq!(t.distance(&[0.5], &[7.5]), 1.0);
    }
}
