//! Finite periodized samples of random environments: a point set on a torus
//! with symmetric jump rates.
//!
//! Every generator goes through [`EnvironmentBuilder`], which enforces the
//! structural invariants once: rates are stored per unordered pair (so
//! `c_ij = c_ji` holds by construction), self-pairs are rejected, and every
//! point must have a strictly positive exit rate. Disconnected samples are
//! restricted to their largest component or kept with a flag, depending on
//! the [`ConnectivityPolicy`].

mod diagnostics;
mod generators;
mod geometry;
pub mod hexfloat;
mod io;
mod law;

pub use diagnostics::{ergodic_average_check, moment_check, palm_site_average, ErgodicCheck};
pub(crate) use diagnostics::check_support;
pub use generators::{
    gen_crystal_conductance, gen_mott_ppp, gen_percolation_cluster, gen_zd_conductance, hexagonal_cell_points,
    hexagonal_template, square_template, CrystalSpec, EnvironmentLaw, LatticeChoice, MottParams, TemplateEdge,
};
pub use geometry::{ActionKind, GroupAction, OrbitDecomposition, Torus};
pub use io::{load_environment, read_environment, save_environment, write_environment};
pub use law::{ConductanceLaw, MarkLaw};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SepError};
use crate::scalar::Scalar;
use crate::union_find::UnionFind;

/// One stored rate between points `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<T> {
    pub i: usize,
    pub j: usize,
    pub rate: T,
}

/// Lattice in which a sample is embedded, used to pick slab widths below the
/// bond percolation threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmbientLattice {
    Zd(usize),
    Honeycomb,
}

impl AmbientLattice {
    /// Bond percolation threshold (a lower bound `1/(2d−1)` for d ≥ 5).
    pub fn bond_threshold(&self) -> f64 {
        match self {
            AmbientLattice::Zd(1) => 1.0,
            AmbientLattice::Zd(2) => 0.5,
            AmbientLattice::Zd(3) => 0.248_8,
            AmbientLattice::Zd(4) => 0.160_1,
            AmbientLattice::Zd(d) => 1.0 / (2.0 * *d as f64 - 1.0),
            AmbientLattice::Honeycomb => 1.0 - 2.0 * (std::f64::consts::PI / 18.0).sin(),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            AmbientLattice::Zd(d) => format!("zd{d}"),
            AmbientLattice::Honeycomb => "honeycomb".into(),
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        if tag == "honeycomb" {
            return Some(AmbientLattice::Honeycomb);
        }
        tag.strip_prefix("zd").and_then(|d| d.parse().ok()).map(AmbientLattice::Zd)
    }
}

/// Record of the range truncation applied to unbounded-range rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation<T> {
    pub r_max: T,
    pub rate_floor: T,
    /// Expected envelope mass per point beyond `r_max`.
    pub tail_bound: T,
    /// Average per point of the rates dropped by the floor.
    pub floor_dropped: T,
}

impl<T: Scalar> Truncation<T> {
    pub fn dropped_mass(&self) -> T {
        self.tail_bound + self.floor_dropped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMeta<T> {
    pub model_tag: String,
    pub seed: u64,
    pub truncation: Option<Truncation<T>>,
    /// Connectivity certificate of the stored rate graph.
    pub connected: bool,
    /// The sample was cut down to its largest component.
    pub restricted: bool,
    pub discarded_points: usize,
    pub ambient: Option<AmbientLattice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectivityPolicy {
    #[default]
    RestrictLargest,
    Keep,
}

/// Immutable finite environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment<T> {
    geometry: GroupAction<T>,
    box_side: T,
    torus: Torus<T>,
    coords: Vec<T>,
    edges: Vec<Edge<T>>,
    displacements: Vec<T>,
    ambiguous_displacement: bool,
    offsets: Vec<usize>,
    nbr: Vec<usize>,
    nbr_rate: Vec<T>,
    nbr_edge: Vec<usize>,
    exit_rates: Vec<T>,
    intensity: T,
    meta: EnvironmentMeta<T>,
}

/// Neighbor of a point in the rate graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub point: usize,
    pub rate: T,
    pub edge: usize,
}

impl<T: Scalar> Environment<T> {
    pub fn builder(geometry: GroupAction<T>, box_side: T) -> EnvironmentBuilder<T> {
        EnvironmentBuilder::new(geometry, box_side)
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn len(&self) -> usize {
        self.exit_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exit_rates.is_empty()
    }

    pub fn geometry(&self) -> &GroupAction<T> {
        &self.geometry
    }

    pub fn box_side(&self) -> T {
        self.box_side
    }

    pub fn torus(&self) -> &Torus<T> {
        &self.torus
    }

    pub fn meta(&self) -> &EnvironmentMeta<T> {
        &self.meta
    }

    pub fn intensity(&self) -> T {
        self.intensity
    }

    pub fn position(&self, i: usize) -> &[T] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    /// Position wrapped into the centred fundamental domain.
    pub fn centered_position(&self, i: usize) -> Vec<T> {
        self.torus.centered(self.position(i))
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Minimal-image displacement `x_j − x_i` of edge `e = (i, j)`.
    pub fn edge_displacement(&self, e: usize) -> &[T] {
        let d = self.dim();
        &self.displacements[e * d..(e + 1) * d]
    }

    /// Some edge spans exactly half a period, so its displacement is ambiguous.
    pub fn has_ambiguous_displacement(&self) -> bool {
        self.ambiguous_displacement
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = Neighbor<T>> + '_ {
        (self.offsets[i]..self.offsets[i + 1]).map(move |k| Neighbor {
            point: self.nbr[k],
            rate: self.nbr_rate[k],
            edge: self.nbr_edge[k],
        })
    }

    /// Edge index behind CSR slot `k`.
    pub fn csr_edge(&self, k: usize) -> usize {
        self.nbr_edge[k]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// `c_ij`, zero when no rate is stored.
    pub fn rate(&self, i: usize, j: usize) -> T {
        let slice = &self.nbr[self.offsets[i]..self.offsets[i + 1]];
        match slice.binary_search(&j) {
            Ok(k) => self.nbr_rate[self.offsets[i] + k],
            Err(_) => T::zero(),
        }
    }

    pub fn exit_rate(&self, i: usize) -> T {
        self.exit_rates[i]
    }

    pub fn exit_rates(&self) -> &[T] {
        &self.exit_rates
    }

    pub fn max_exit_rate(&self) -> T {
        self.exit_rates.iter().fold(T::zero(), |m, c| m.max(*c))
    }

    pub fn max_edge_rate(&self) -> T {
        self.edges.iter().fold(T::zero(), |m, e| m.max(e.rate))
    }

    /// Adjacency in CSR form: `(offsets, neighbor indices, rates)`.
    pub fn csr(&self) -> (&[usize], &[usize], &[T]) {
        (&self.offsets, &self.nbr, &self.nbr_rate)
    }

    /// Same environment with every rate multiplied by `kappa`.
    pub fn scaled_rates(&self, kappa: T) -> Result<Self> {
        if !(kappa > T::zero()) {
            return Err(SepError::invalid("rate scale must be positive"));
        }
        let mut out = self.clone();
        out.edges.iter_mut().for_each(|e| e.rate *= kappa);
        out.nbr_rate.iter_mut().for_each(|r| *r *= kappa);
        out.exit_rates.iter_mut().for_each(|r| *r *= kappa);
        Ok(out)
    }

    /// Re-checks the structural invariants; used by tests and the loader.
    pub fn check_invariants(&self) -> Result<()> {
        for e in &self.edges {
            if e.i >= e.j {
                return Err(SepError::invalid(format!("edge ({}, {}) not canonical", e.i, e.j)));
            }
            if !(e.rate >= T::zero()) || !e.rate.is_finite() {
                return Err(SepError::invalid(format!("edge ({}, {}) has invalid rate", e.i, e.j)));
            }
            if self.rate(e.i, e.j) != self.rate(e.j, e.i) {
                return Err(SepError::invalid("asymmetric rates"));
            }
        }
        for (i, c) in self.exit_rates.iter().enumerate() {
            if !(*c > T::zero()) || !c.is_finite() {
                return Err(SepError::invalid(format!("point {i} has exit rate {c}")));
            }
            if self.rate(i, i) != T::zero() {
                return Err(SepError::invalid(format!("self-rate at {i}")));
            }
        }
        Ok(())
    }
}

/// Collects points and rates, then validates and freezes them.
#[derive(Debug, Clone)]
pub struct EnvironmentBuilder<T> {
    geometry: GroupAction<T>,
    box_side: T,
    coords: Vec<T>,
    pending: Vec<(usize, usize, T)>,
    meta: EnvironmentMeta<T>,
}

impl<T: Scalar> EnvironmentBuilder<T> {
    pub fn new(geometry: GroupAction<T>, box_side: T) -> Self {
        EnvironmentBuilder {
            geometry,
            box_side,
            coords: Vec::new(),
            pending: Vec::new(),
            meta: EnvironmentMeta {
                model_tag: "custom".into(),
                seed: 0,
                truncation: None,
                connected: false,
                restricted: false,
                discarded_points: 0,
                ambient: None,
            },
        }
    }

    pub fn model_tag(mut self, tag: impl Into<String>) -> Self {
        self.meta.model_tag = tag.into();
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.meta.seed = seed;
        self
    }

    pub fn ambient(mut self, ambient: Option<AmbientLattice>) -> Self {
        self.meta.ambient = ambient;
        self
    }

    pub fn truncation(mut self, t: Option<Truncation<T>>) -> Self {
        self.meta.truncation = t;
        self
    }

    pub fn num_points(&self) -> usize {
        self.coords.len() / self.geometry.dim()
    }

    pub fn point(&mut self, x: &[T]) -> usize {
        assert_eq!(x.len(), self.geometry.dim(), "point dimension mismatch");
        self.coords.extend_from_slice(x);
        self.num_points() - 1
    }

    /// Adds a rate between `i` and `j`; repeated pairs accumulate.
    pub fn edge(&mut self, i: usize, j: usize, rate: T) -> &mut Self {
        self.pending.push((i, j, rate));
        self
    }

    pub fn build(self, policy: ConnectivityPolicy) -> Result<Environment<T>> {
        let EnvironmentBuilder {
            geometry,
            box_side,
            coords,
            pending,
            mut meta,
        } = self;
        let d = geometry.dim();
        let n = coords.len() / d;
        if n == 0 {
            return Err(SepError::EmptyEnvironment("no points".into()));
        }
        let torus = Torus::new(&geometry, box_side)?;

        let mut edges: Vec<Edge<T>> = Vec::with_capacity(pending.len());
        for (i, j, rate) in pending {
            if i >= n || j >= n {
                return Err(SepError::invalid(format!("edge ({i}, {j}) references a missing point")));
            }
            if i == j {
                return Err(SepError::invalid(format!("self-rate at point {i}")));
            }
            if !rate.is_finite() || rate < T::zero() {
                return Err(SepError::invalid(format!("rate {rate} on ({i}, {j}) is not a finite nonnegative number")));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            edges.push(Edge { i: a, j: b, rate });
        }
        edges.sort_by(|x, y| (x.i, x.j).cmp(&(y.i, y.j)));
        let mut merged: Vec<Edge<T>> = Vec::with_capacity(edges.len());
        for e in edges {
            match merged.last_mut() {
                Some(last) if last.i == e.i && last.j == e.j => last.rate += e.rate,
                _ => merged.push(e),
            }
        }

        let mut uf = UnionFind::new(n);
        for e in merged.iter().filter(|e| e.rate > T::zero()) {
            uf.union(e.i, e.j);
        }
        let largest = uf.largest_component();
        meta.connected = largest.len() == n;
        let (coords, merged) = if !meta.connected && policy == ConnectivityPolicy::RestrictLargest {
            let mut new_index = vec![usize::MAX; n];
            for (k, &p) in largest.iter().enumerate() {
                new_index[p] = k;
            }
            let coords: Vec<T> = largest
                .iter()
                .flat_map(|&p| coords[p * d..(p + 1) * d].iter().copied())
                .collect();
            let merged: Vec<Edge<T>> = merged
                .into_iter()
                .filter(|e| new_index[e.i] != usize::MAX && new_index[e.j] != usize::MAX)
                .map(|e| Edge {
                    i: new_index[e.i],
                    j: new_index[e.j],
                    rate: e.rate,
                })
                .collect();
            meta.restricted = true;
            meta.discarded_points += n - largest.len();
            meta.connected = true;
            (coords, merged)
        } else {
            (coords, merged)
        };
        let n = coords.len() / d;

        let mut degree = vec![0usize; n];
        for e in &merged {
            degree[e.i] += 1;
            degree[e.j] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut nbr = vec![0usize; offsets[n]];
        let mut nbr_rate = vec![T::zero(); offsets[n]];
        let mut nbr_edge = vec![0usize; offsets[n]];
        let mut exit_rates = vec![T::zero(); n];
        // Edges are sorted by (i, j), so each neighbor list comes out sorted.
        for (k, e) in merged.iter().enumerate() {
            for (a, b) in [(e.i, e.j), (e.j, e.i)] {
                let slot = fill[a];
                nbr[slot] = b;
                nbr_rate[slot] = e.rate;
                nbr_edge[slot] = k;
                fill[a] += 1;
                exit_rates[a] += e.rate;
            }
        }
        for i in 0..n {
            let s = offsets[i];
            let t = offsets[i + 1];
            let mut idx: Vec<usize> = (s..t).collect();
            idx.sort_by_key(|&k| nbr[k]);
            let (a, b, c): (Vec<usize>, Vec<T>, Vec<usize>) = (
                idx.iter().map(|&k| nbr[k]).collect(),
                idx.iter().map(|&k| nbr_rate[k]).collect(),
                idx.iter().map(|&k| nbr_edge[k]).collect(),
            );
            nbr[s..t].copy_from_slice(&a);
            nbr_rate[s..t].copy_from_slice(&b);
            nbr_edge[s..t].copy_from_slice(&c);
        }
        for (i, c) in exit_rates.iter().enumerate() {
            if !(*c > T::zero()) {
                return Err(SepError::invalid(format!(
                    "point {i} has zero total exit rate (isolated point)"
                )));
            }
            if !c.is_finite() {
                return Err(SepError::invalid(format!("point {i} has infinite exit rate")));
            }
        }

        let mut displacements = Vec::with_capacity(merged.len() * d);
        let mut ambiguous = false;
        for e in &merged {
            let delta: Vec<T> = (0..d).map(|k| coords[e.j * d + k] - coords[e.i * d + k]).collect();
            let (w, amb) = torus.wrap_displacement(&delta);
            ambiguous |= amb;
            displacements.extend(w);
        }

        let intensity = T::from_usize_lossy(n) / torus.volume();
        Ok(Environment {
            geometry,
            box_side,
            torus,
            coords,
            edges: merged,
            displacements,
            ambiguous_displacement: ambiguous,
            offsets,
            nbr,
            nbr_rate,
            nbr_edge,
            exit_rates,
            intensity,
            meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(c: f64) -> Environment<f64> {
        let mut b = Environment::builder(GroupAction::continuum(1), 4.0);
        b.point(&[0.0]);
        b.point(&[1.0]);
        b.edge(0, 1, c);
        b.build(ConnectivityPolicy::Keep).unwrap()
    }

    #[test]
    fn two_point_pair() {
        let env = pair(2.0);
        assert_eq!(env.len(), 2);
        assert_eq!(env.rate(0, 1), 2.0);
        assert_eq!(env.rate(1, 0), 2.0);
        assert_eq!(env.exit_rates(), &[2.0, 2.0]);
        assert_eq!(env.edge_displacement(0), &[1.0]);
        env.check_invariants().unwrap();
    }

    #[test]
    fn isolated_point_rejected() {
        let mut b = Environment::builder(GroupAction::continuum(1), 4.0);
        b.point(&[0.0]);
        b.point(&[1.0]);
        b.point(&[2.0]);
        b.edge(0, 1, 1.0);
        assert!(b.clone().build(ConnectivityPolicy::Keep).is_err());
        let env = b.build(ConnectivityPolicy::RestrictLargest).unwrap();
        assert_eq!(env.len(), 2);
        assert!(env.meta().restricted);
        assert_eq!(env.meta().discarded_points, 1);
    }

    #[test]
    fn self_rate_rejected() {
        let mut b = Environment::builder(GroupAction::continuum(1), 4.0);
        b.point(&[0.0]);
        b.edge(0, 0, 1.0);
        assert!(b.build(ConnectivityPolicy::Keep).is_err());
    }

    #[test]
    fn rate_scaling() {
        let env = pair(1.5).scaled_rates(2.0).unwrap();
        assert_eq!(env.rate(0, 1), 3.0);
        assert_eq!(env.exit_rate(1), 3.0);
    }
}
