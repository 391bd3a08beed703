use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    AmbientLattice, ConductanceLaw, ConnectivityPolicy, Environment, GroupAction, MarkLaw, Torus, Truncation,
};
use crate::error::{Result, SepError};
use crate::scalar::Scalar;
use crate::seeds::{self, stream};

/// `(a, b, g)`: a rate between cell point `a` of cell `h` and cell point
/// `b` of cell `h + g`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEdge {
    pub a: usize,
    pub b: usize,
    pub offset: Vec<i64>,
}

impl TemplateEdge {
    pub fn new(a: usize, b: usize, offset: Vec<i64>) -> Self {
        TemplateEdge { a, b, offset }
    }

    fn reversed(&self) -> Self {
        TemplateEdge {
            a: self.b,
            b: self.a,
            offset: self.offset.iter().map(|g| -g).collect(),
        }
    }

    /// `a < b`, or `a == b` with a lexicographically positive offset.
    fn is_canonical(&self) -> bool {
        match self.a.cmp(&self.b) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.offset.iter().find(|g| **g != 0).is_some_and(|g| *g > 0),
        }
    }
}

/// Nearest-neighbor template of ℤ^d: one point per cell, one edge per axis.
pub fn square_template(d: usize) -> Vec<TemplateEdge> {
    (0..d)
        .map(|k| TemplateEdge::new(0, 0, (0..d).map(|i| i64::from(i == k)).collect()))
        .collect()
}

/// Cell points `{0, (√3/2, 1/2)}` of the honeycomb preset.
pub fn hexagonal_cell_points<T: Scalar>() -> Vec<Vec<T>> {
    vec![
        vec![T::zero(), T::zero()],
        vec![T::lit(3.0).sqrt() * T::lit(0.5), T::lit(0.5)],
    ]
}

/// The three unit bonds leaving the origin of the honeycomb preset.
pub fn hexagonal_template() -> Vec<TemplateEdge> {
    vec![
        TemplateEdge::new(0, 1, vec![0, 0]),
        TemplateEdge::new(0, 1, vec![-1, 0]),
        TemplateEdge::new(0, 1, vec![0, -1]),
    ]
}

/// Crystal description consumed by [`gen_crystal_conductance`].
#[derive(Debug, Clone)]
pub struct CrystalSpec<T> {
    pub geometry: GroupAction<T>,
    pub cell_points: Vec<Vec<T>>,
    pub template: Vec<TemplateEdge>,
}

impl<T: Scalar> CrystalSpec<T> {
    pub fn hexagonal() -> Self {
        CrystalSpec {
            geometry: GroupAction::hexagonal(),
            cell_points: hexagonal_cell_points(),
            template: hexagonal_template(),
        }
    }

    pub fn square(d: usize) -> Self {
        CrystalSpec {
            geometry: GroupAction::identity_lattice(d),
            cell_points: vec![vec![T::zero(); d]],
            template: square_template(d),
        }
    }

    /// Template with each reversal pair kept once, in first-seen order.
    fn canonical_template(&self) -> Result<Vec<TemplateEdge>> {
        let d = self.geometry.dim();
        let mut out: Vec<TemplateEdge> = Vec::new();
        for e in &self.template {
            if e.a >= self.cell_points.len() || e.b >= self.cell_points.len() {
                return Err(SepError::invalid(format!(
                    "template edge ({}, {}) references a point outside the cell",
                    e.a, e.b
                )));
            }
            if e.offset.len() != d {
                return Err(SepError::invalid("template offset has the wrong dimension"));
            }
            if e.a == e.b && e.offset.iter().all(|g| *g == 0) {
                return Err(SepError::invalid("template edge is a self-loop"));
            }
            let c = if e.is_canonical() { e.clone() } else { e.reversed() };
            if !out.contains(&c) {
                out.push(c);
            }
        }
        Ok(out)
    }
}

fn cell_index(g: &[i64], side: usize) -> usize {
    g.iter().rev().fold(0usize, |acc, &k| acc * side + k.rem_euclid(side as i64) as usize)
}

fn cell_of(mut idx: usize, side: usize, d: usize) -> Vec<i64> {
    let mut g = vec![0i64; d];
    for slot in g.iter_mut() {
        *slot = (idx % side) as i64;
        idx /= side;
    }
    g
}

/// Periodized crystal with `side` cells per lattice direction and i.i.d.
/// rates drawn per instantiated template edge.
pub fn gen_crystal_conductance<T: Scalar>(
    spec: &CrystalSpec<T>,
    side: usize,
    law: &ConductanceLaw,
    seed: u64,
) -> Result<Environment<T>> {
    law.validate()?;
    if spec.cell_points.is_empty() {
        return Err(SepError::invalid("crystal cell has no points"));
    }
    if side < 1 {
        return Err(SepError::invalid("need at least one cell per side"));
    }
    let d = spec.geometry.dim();
    for p in &spec.cell_points {
        if p.len() != d {
            return Err(SepError::invalid("cell point has the wrong dimension"));
        }
        let s = spec.geometry.cell_coordinates(p);
        let tol = T::lit(1e-12);
        if s.iter().any(|v| *v < -tol || *v >= T::one() - tol) {
            return Err(SepError::invalid("cell point lies outside the cell"));
        }
    }
    let template = spec.canonical_template()?;
    let cells = side
        .checked_pow(d as u32)
        .ok_or_else(|| SepError::InstanceTooLarge("cell count overflows".into()))?;
    let per_cell = spec.cell_points.len();

    let mut b = Environment::builder(spec.geometry.clone(), T::from_usize_lossy(side));
    for c in 0..cells {
        let g = cell_of(c, side, d);
        for p in &spec.cell_points {
            b.point(&spec.geometry.translate(p, &g));
        }
    }
    let mut rng = stream(seed, seeds::ENV_RATES, 0);
    let mut k = 0usize;
    for c in 0..cells {
        let g = cell_of(c, side, d);
        for e in &template {
            let h: Vec<i64> = g.iter().zip(&e.offset).map(|(x, y)| x + y).collect();
            let i = c * per_cell + e.a;
            let j = cell_index(&h, side) * per_cell + e.b;
            let rate = law.sample(&mut rng, k);
            k += 1;
            if i == j {
                return Err(SepError::invalid(format!(
                    "template edge wraps onto itself with {side} cells per side"
                )));
            }
            b.edge(i, j, T::lit(rate));
        }
    }
    b.model_tag("crystal_conductance").seed(seed).build(ConnectivityPolicy::RestrictLargest)
}

/// Nearest-neighbor conductances on the discrete torus `(ℤ_L)^d`.
pub fn gen_zd_conductance<T: Scalar>(d: usize, side: usize, law: &ConductanceLaw, seed: u64) -> Result<Environment<T>> {
    if d == 0 {
        return Err(SepError::invalid("dimension must be positive"));
    }
    if side < 2 {
        return Err(SepError::invalid("box side must be at least 2"));
    }
    let env = gen_crystal_conductance(&CrystalSpec::square(d), side, law, seed)?;
    Ok(retag(env, "zd_conductance", Some(AmbientLattice::Zd(d))))
}

fn retag<T: Scalar>(mut env: Environment<T>, tag: &str, ambient: Option<AmbientLattice>) -> Environment<T> {
    env.meta.model_tag = tag.into();
    env.meta.ambient = ambient;
    env
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeChoice {
    Zd { d: usize },
    Hexagonal,
}

/// Largest open cluster of Bernoulli site percolation, with unit rates on
/// the lattice bonds between open sites.
pub fn gen_percolation_cluster<T: Scalar>(lattice: LatticeChoice, side: usize, p: f64, seed: u64) -> Result<Environment<T>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SepError::invalid("percolation parameter out of [0,1]"));
    }
    if p == 0.0 {
        return Err(SepError::EmptyEnvironment("no open site at p = 0".into()));
    }
    let (spec, ambient) = match lattice {
        LatticeChoice::Zd { d } => {
            if d == 0 || side < 2 {
                return Err(SepError::invalid("need d >= 1 and box side >= 2"));
            }
            (CrystalSpec::<T>::square(d), AmbientLattice::Zd(d))
        }
        LatticeChoice::Hexagonal => (CrystalSpec::hexagonal(), AmbientLattice::Honeycomb),
    };
    let full = gen_crystal_conductance(&spec, side, &ConductanceLaw::Constant { value: 1.0 }, seed)?;
    let mut rng = stream(seed, seeds::ENV_PERCOLATION, 0);
    let open: Vec<bool> = (0..full.len()).map(|_| p >= 1.0 || rng.random::<f64>() < p).collect();
    let kept: Vec<usize> = (0..full.len()).filter(|&i| open[i]).collect();
    if kept.is_empty() {
        return Err(SepError::EmptyEnvironment("no open site".into()));
    }
    let mut index = vec![usize::MAX; full.len()];
    let mut b = Environment::builder(full.geometry().clone(), full.box_side());
    for &i in &kept {
        index[i] = b.point(full.position(i));
    }
    let mut any_edge = false;
    for e in full.edges() {
        if open[e.i] && open[e.j] {
            b.edge(index[e.i], index[e.j], T::one());
            any_edge = true;
        }
    }
    if !any_edge {
        return Err(SepError::EmptyEnvironment("open sites form no bond".into()));
    }
    b.model_tag("percolation_cluster")
        .seed(seed)
        .ambient(Some(ambient))
        .build(ConnectivityPolicy::RestrictLargest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MottParams {
    pub d: usize,
    pub side: f64,
    pub intensity: f64,
    pub energy: MarkLaw,
    /// Defaults to `8 ln 10`, so that `e^{−R_max} = 1e-8`.
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub rate_floor: f64,
}

pub const DEFAULT_MOTT_RANGE: f64 = 18.420_680_743_952_367;
const MOTT_RETRIES: u64 = 8;

fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0)
}

/// `Γ(d, r)` for integer `d`.
fn upper_gamma_int(d: usize, r: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..d {
        term *= r / k as f64;
        sum += term;
    }
    let fact: f64 = (1..d).map(|k| k as f64).product();
    fact * (-r).exp() * sum
}

/// Mott variable range hopping on a Poisson point process.
pub fn gen_mott_ppp<T: Scalar>(params: &MottParams, seed: u64) -> Result<Environment<T>> {
    let MottParams {
        d,
        side,
        intensity,
        ref energy,
        r_max,
        rate_floor,
    } = *params;
    let r_max = r_max.unwrap_or(DEFAULT_MOTT_RANGE);
    if d == 0 {
        return Err(SepError::invalid("dimension must be positive"));
    }
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(SepError::invalid("intensity must be positive"));
    }
    if !(r_max > 0.0) || !(rate_floor >= 0.0) {
        return Err(SepError::invalid("need R_max > 0 and rate_floor >= 0"));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(SepError::invalid("box side must be positive"));
    }
    if 2.0 * r_max >= side {
        return Err(SepError::SupportViolation {
            message: format!("cutoff radius {r_max} is not below half the box side {side}"),
            required_side: 2.0 * r_max,
        });
    }
    energy.validate()?;
    let volume = side.powi(d as i32);
    let mean = intensity * volume;
    if mean > 5e7 {
        return Err(SepError::InstanceTooLarge(format!("expected {mean} points")));
    }
    let count_law = Poisson::new(mean).map_err(|e| SepError::invalid(e.to_string()))?;

    let mut attempt = 0;
    let n = loop {
        let mut rng = stream(seed, seeds::ENV_POINTS, attempt);
        let n = count_law.sample(&mut rng) as usize;
        if n > 0 {
            break n;
        }
        attempt += 1;
        if attempt >= MOTT_RETRIES {
            return Err(SepError::EmptyEnvironment(format!("{MOTT_RETRIES} empty Poisson samples")));
        }
    };
    let mut rng = stream(seed, seeds::ENV_POINTS, attempt);
    let _ = count_law.sample(&mut rng);
    let coords: Vec<f64> = (0..n * d).map(|_| rng.random_range(0.0..side)).collect();
    let mut mark_rng = stream(seed, seeds::ENV_MARKS, attempt);
    let marks: Vec<f64> = (0..n).map(|_| energy.sample(&mut mark_rng)).collect();

    let geometry = GroupAction::<T>::continuum(d);
    let torus = Torus::new(&geometry, T::lit(side))?;
    let mut b = Environment::builder(geometry, T::lit(side));
    for i in 0..n {
        let x: Vec<T> = coords[i * d..(i + 1) * d].iter().map(|v| T::lit(*v)).collect();
        b.point(&x);
    }

    let per_side = ((side / r_max).floor() as usize).max(1);
    let cell_len = side / per_side as f64;
    let cell_key = |i: usize| -> Vec<usize> {
        (0..d)
            .map(|k| ((coords[i * d + k] / cell_len) as usize).min(per_side - 1))
            .collect()
    };
    let flat = |c: &[usize]| c.iter().rev().fold(0usize, |acc, &k| acc * per_side + k);
    let total_cells = per_side.pow(d as u32);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); total_cells];
    for i in 0..n {
        buckets[flat(&cell_key(i))].push(i);
    }
    // Neighbor cell offsets in {-1,0,1}^d, deduplicated when a side has < 3 cells.
    let mut offsets: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..d {
        offsets = offsets
            .into_iter()
            .flat_map(|o| {
                (-1..=1).map(move |s| {
                    let mut v = o.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
    }
    let mut dropped = 0.0f64;
    let mut neighbors: Vec<usize> = Vec::new();
    for i in 0..n {
        let ci = cell_key(i);
        neighbors.clear();
        for o in &offsets {
            let c: Vec<usize> = ci
                .iter()
                .zip(o)
                .map(|(&k, &s)| (k as i64 + s).rem_euclid(per_side as i64) as usize)
                .collect();
            neighbors.extend(buckets[flat(&c)].iter().copied().filter(|&j| j > i));
        }
        neighbors.sort_unstable();
        neighbors.dedup();
        for &j in &neighbors {
            let delta: Vec<T> = (0..d).map(|k| T::lit(coords[j * d + k] - coords[i * d + k])).collect();
            let (w, _) = torus.wrap_displacement(&delta);
            let r = w.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
            if r > r_max {
                continue;
            }
            let (ei, ej) = (marks[i], marks[j]);
            let rate = (-r - ei.abs() - ej.abs() - (ei - ej).abs()).exp();
            if rate < rate_floor || rate == 0.0 {
                dropped += 2.0 * rate;
                continue;
            }
            b.edge(i, j, T::lit(rate));
        }
    }
    let truncation = Truncation {
        r_max: T::lit(r_max),
        rate_floor: T::lit(rate_floor),
        tail_bound: T::lit(intensity * sphere_area(d) * upper_gamma_int(d, r_max)),
        floor_dropped: T::lit(dropped / n as f64),
    };
    b.model_tag("mott_ppp")
        .seed(seed)
        .truncation(Some(truncation))
        .build(ConnectivityPolicy::RestrictLargest)
}

/// Serializable description of any of the four model classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentLaw {
    ZdConductance {
        d: usize,
        side: usize,
        law: ConductanceLaw,
    },
    CrystalConductance {
        /// Only the honeycomb preset is configurable from files.
        preset: String,
        side: usize,
        law: ConductanceLaw,
    },
    MottPpp(MottParams),
    PercolationCluster {
        lattice: LatticeChoice,
        side: usize,
        p: f64,
    },
}

impl EnvironmentLaw {
    /// Parameter diagnostics without sampling anything.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            EnvironmentLaw::ZdConductance { d, side, law } => {
                if *d == 0 {
                    out.push("dimension must be positive".into());
                }
                if *side < 2 {
                    out.push("box side must be at least 2".into());
                }
                if let Err(e) = law.validate() {
                    out.push(e.to_string());
                }
            }
            EnvironmentLaw::CrystalConductance { preset, side, law } => {
                if preset != "hexagonal" {
                    out.push(format!("unknown crystal preset `{preset}`"));
                }
                if *side < 2 {
                    out.push("need at least 2 cells per side".into());
                }
                if let Err(e) = law.validate() {
                    out.push(e.to_string());
                }
            }
            EnvironmentLaw::MottPpp(p) => {
                if p.d == 0 {
                    out.push("dimension must be positive".into());
                }
                if !(p.intensity > 0.0) {
                    out.push("intensity must be positive".into());
                }
                let r = p.r_max.unwrap_or(DEFAULT_MOTT_RANGE);
                if !(r > 0.0) {
                    out.push("cutoff radius must be positive".into());
                } else if 2.0 * r >= p.side {
                    out.push(format!("cutoff radius {r} requires box side > {}", 2.0 * r));
                }
                if !(p.rate_floor >= 0.0) {
                    out.push("rate floor must be nonnegative".into());
                }
                if let Err(e) = p.energy.validate() {
                    out.push(e.to_string());
                }
            }
            EnvironmentLaw::PercolationCluster { lattice, side, p } => {
                if !(0.0..=1.0).contains(p) {
                    out.push("percolation parameter out of [0,1]".into());
                } else if *p == 0.0 {
                    out.push("percolation parameter must be positive".into());
                }
                if *side < 2 {
                    out.push("box side must be at least 2".into());
                }
                if let LatticeChoice::Zd { d: 0 } = lattice {
                    out.push("dimension must be positive".into());
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        match self {
            EnvironmentLaw::ZdConductance { d, .. } => *d,
            EnvironmentLaw::CrystalConductance { .. } => 2,
            EnvironmentLaw::MottPpp(p) => p.d,
            EnvironmentLaw::PercolationCluster { lattice, .. } => match lattice {
                LatticeChoice::Zd { d } => *d,
                LatticeChoice::Hexagonal => 2,
            },
        }
    }

    /// Side of the sample in ambient length units.
    pub fn box_extent(&self) -> f64 {
        match self {
            EnvironmentLaw::ZdConductance { side, .. } => *side as f64,
            EnvironmentLaw::CrystalConductance { side, .. } => *side as f64 * 1.5,
            EnvironmentLaw::MottPpp(p) => p.side,
            EnvironmentLaw::PercolationCluster { lattice, side, .. } => match lattice {
                LatticeChoice::Zd { .. } => *side as f64,
                LatticeChoice::Hexagonal => *side as f64 * 1.5,
            },
        }
    }

    pub fn sample<T: Scalar>(&self, seed: u64) -> Result<Environment<T>> {
        match self {
            EnvironmentLaw::ZdConductance { d, side, law } => gen_zd_conductance(*d, *side, law, seed),
            EnvironmentLaw::CrystalConductance { preset, side, law } => {
                if preset != "hexagonal" {
                    return Err(SepError::invalid(format!("unknown crystal preset `{preset}`")));
                }
                let env = gen_crystal_conductance(&CrystalSpec::hexagonal(), *side, law, seed)?;
                Ok(retag(env, "crystal_conductance", Some(AmbientLattice::Honeycomb)))
            }
            EnvironmentLaw::MottPpp(p) => gen_mott_ppp(p, seed),
            EnvironmentLaw::PercolationCluster { lattice, side, p } => gen_percolation_cluster(*lattice, *side, *p, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_structure() {
        let env: Environment<f64> = gen_zd_conductance(1, 4, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        assert_eq!(env.len(), 4);
        let pairs: Vec<(usize, usize)> = env.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert!(env.exit_rates().iter().all(|c| *c == 2.0));
        assert_eq!(env.intensity(), 1.0);
    }

    #[test]
    fn alternating_ring() {
        let law = ConductanceLaw::Periodic { values: vec![1.0, 2.0] };
        let env: Environment<f64> = gen_zd_conductance(1, 6, &law, 0).unwrap();
        assert_eq!(env.rate(0, 1), 1.0);
        assert_eq!(env.rate(1, 2), 2.0);
        assert_eq!(env.rate(5, 0), 2.0);
    }

    #[test]
    fn honeycomb_degree_three() {
        let env: Environment<f64> =
            gen_crystal_conductance(&CrystalSpec::hexagonal(), 4, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        assert_eq!(env.len(), 32);
        assert!((0..32).all(|i| env.degree(i) == 3 && env.exit_rate(i) == 3.0));
        for e in 0..env.num_edges() {
            let r: f64 = env.edge_displacement(e).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn template_reversal_is_deduplicated() {
        let mut spec = CrystalSpec::<f64>::hexagonal();
        let extra: Vec<TemplateEdge> = spec.template.iter().map(|e| e.reversed()).collect();
        spec.template.extend(extra);
        let env = gen_crystal_conductance(&spec, 4, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        assert_eq!(env.num_edges(), 48);
    }

    #[test]
    fn template_outside_cell_rejected() {
        let mut spec = CrystalSpec::<f64>::hexagonal();
        spec.template.push(TemplateEdge::new(0, 2, vec![0, 0]));
        assert!(gen_crystal_conductance(&spec, 4, &ConductanceLaw::Constant { value: 1.0 }, 0).is_err());
    }

    #[test]
    fn upper_gamma_matches_closed_form() {
        assert!((upper_gamma_int(1, 2.0) - (-2.0f64).exp()).abs() < 1e-15);
        assert!((upper_gamma_int(2, 2.0) - 3.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn percolation_rejects_bad_p() {
        let e = gen_percolation_cluster::<f64>(LatticeChoice::Zd { d: 2 }, 8, 1.3, 0).unwrap_err();
        assert!(e.to_string().contains("percolation parameter out of [0,1]"));
    }
}
