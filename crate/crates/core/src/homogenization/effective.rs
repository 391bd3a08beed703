use std::io::Write;

use serde::Serialize;

use super::corrector::{corrector_solve, Corrector};
use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::linalg::SmallMatrix;
use crate::scalar::Scalar;

pub const RANK_THRESHOLD: f64 = 1e-8;
const PSD_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRecord {
    pub direction: Vec<f64>,
    pub energy: f64,
    pub trivial_energy: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone)]
pub struct EffectiveMatrix<T> {
    d: SmallMatrix<T>,
    eigenvalues: Vec<T>,
    eigenvectors: Vec<Vec<T>>,
    rank_threshold: T,
    pub box_side: T,
    pub probes: Vec<ProbeRecord>,
}

impl<T: Scalar> EffectiveMatrix<T> {
    /// Wraps a symmetric PSD matrix given row-major.
    pub fn from_matrix(dim: usize, entries: &[T]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(SepError::invalid("matrix has the wrong number of entries"));
        }
        let m = SmallMatrix {
            n: dim,
            data: entries.to_vec(),
        };
        if !m.is_symmetric() {
            return Err(SepError::invalid("matrix is not symmetric"));
        }
        Self::finish(m, T::zero(), Vec::new())
    }

    pub fn isotropic(dim: usize, value: T) -> Self {
        let m = SmallMatrix::identity(dim).scaled(value);
        Self::finish(m, T::zero(), Vec::new()).expect("scaled identity is PSD")
    }

    fn finish(d: SmallMatrix<T>, box_side: T, probes: Vec<ProbeRecord>) -> Result<Self> {
        let (mut vals, vecs) = d.symmetric_eigen();
        let lead = vals.iter().fold(T::zero(), |m, v| m.max(*v));
        for v in vals.iter_mut() {
            if *v < -T::lit(PSD_SLACK) * lead.max(T::min_positive_value()) {
                return Err(SepError::Numerical(format!(
                    "effective matrix has negative eigenvalue {v} (leading {lead})"
                )));
            }
        }
        let threshold = T::lit(RANK_THRESHOLD) * lead;
        for v in vals.iter_mut() {
            if *v <= threshold {
                *v = T::zero();
            }
        }
        Ok(EffectiveMatrix {
            d,
            eigenvalues: vals,
            eigenvectors: vecs,
            rank_threshold: threshold,
            box_side,
            probes,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.n
    }

    pub fn matrix(&self) -> &SmallMatrix<T> {
        &self.d
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.d[(i, j)]
    }

    /// Nonincreasing, with entries below the threshold set to 0.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[Vec<T>] {
        &self.eigenvectors
    }

    pub fn rank_threshold(&self) -> T {
        self.rank_threshold
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|v| **v > T::zero()).count()
    }

    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues.first().copied().unwrap_or(T::zero())
    }

    /// `D` rebuilt from the thresholded spectrum.
    pub fn thresholded(&self) -> SmallMatrix<T> {
        let n = self.dim();
        let mut m = SmallMatrix::zeros(n);
        for (lam, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += *lam * v[i] * v[j];
                }
            }
        }
        m
    }
}

/// Finite-volume effective matrix from `d(d+1)/2` corrector solves.
pub fn effective_matrix<T: Scalar>(env: &Environment<T>, tol: f64) -> Result<EffectiveMatrix<T>> {
    let d = env.dim();
    let mut dm = SmallMatrix::zeros(d);
    let mut probes = Vec::new();
    let record = |c: &Corrector<T>| ProbeRecord {
        direction: c.direction.iter().map(|v| v.as_f64()).collect(),
        energy: c.energy.as_f64(),
        trivial_energy: c.trivial_energy.as_f64(),
        iterations: c.iterations,
        relative_residual: c.relative_residual,
    };
    let check_bound = |c: &Corrector<T>| -> Result<()> {
        if c.energy > c.trivial_energy * (T::one() + T::lit(1e-10)) {
            return Err(SepError::Numerical(format!(
                "corrector energy {} exceeds the zero-corrector bound {}",
                c.energy, c.trivial_energy
            )));
        }
        Ok(())
    };
    for i in 0..d {
        let mut a = vec![T::zero(); d];
        a[i] = T::one();
        let c = corrector_solve(env, &a, tol)?;
        check_bound(&c)?;
        dm[(i, i)] = c.energy;
        probes.push(record(&c));
    }
    let h = T::one() / T::lit(2.0).sqrt();
    for i in 0..d {
        for j in (i + 1)..d {
            let mut a = vec![T::zero(); d];
            a[i] = h;
            a[j] = h;
            let c = corrector_solve(env, &a, tol)?;
            check_bound(&c)?;
            // a·Da = (D_ii + D_jj)/2 + D_ij for a = (e_i + e_j)/√2.
            let off = c.energy - (dm[(i, i)] + dm[(j, j)]) * T::lit(0.5);
            dm[(i, j)] = off;
            dm[(j, i)] = off;
            probes.push(record(&c));
        }
    }
    EffectiveMatrix::finish(dm, env.box_side(), probes)
}

#[derive(Debug, Clone, Serialize)]
pub struct DReport {
    pub schema_version: u32,
    pub model: String,
    pub box_side: f64,
    pub points: usize,
    pub seed: u64,
    pub d: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub rank: usize,
    pub rank_threshold: f64,
    pub probes: Vec<ProbeRecord>,
}

impl DReport {
    pub fn new<T: Scalar>(env: &Environment<T>, dm: &EffectiveMatrix<T>) -> Self {
        let n = dm.dim();
        DReport {
            schema_version: 1,
            model: env.meta().model_tag.clone(),
            box_side: env.box_side().as_f64(),
            points: env.len(),
            seed: env.meta().seed,
            d: (0..n).map(|i| (0..n).map(|j| dm.entry(i, j).as_f64()).collect()).collect(),
            eigenvalues: dm.eigenvalues().iter().map(|v| v.as_f64()).collect(),
            eigenvectors: dm
                .eigenvectors()
                .iter()
                .map(|v| v.iter().map(|x| x.as_f64()).collect())
                .collect(),
            rank: dm.rank(),
            rank_threshold: dm.rank_threshold().as_f64(),
            probes: dm.probes.clone(),
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}
