use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sepsim::environment::{ConductanceLaw, EnvironmentLaw, LatticeChoice};
use sepsim::hydrodynamics::Profile;

/// One experiment, read from TOML. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub strict: bool,
    /// Law to sample; exclusive with `env_file`.
    #[serde(default)]
    pub environment: Option<EnvironmentLaw>,
    #[serde(default)]
    pub env_file: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub msd: Option<MsdConfig>,
    #[serde(default)]
    pub sep: Option<SepConfig>,
    #[serde(default)]
    pub duality: Option<DualityConfig>,
    #[serde(default)]
    pub nagy: Option<NagyConfig>,
    #[serde(default)]
    pub hydro: Option<HydroSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub corrector_tol: f64,
    pub heat_tol: f64,
    pub component_cap: usize,
    pub max_halvings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            corrector_tol: sepsim::homogenization::DEFAULT_CORRECTOR_TOL,
            heat_tol: sepsim::hydrodynamics::DEFAULT_HEAT_TOL,
            component_cap: sepsim::exclusion::DEFAULT_COMPONENT_CAP,
            max_halvings: sepsim::exclusion::DEFAULT_MAX_HALVINGS,
        }
    }
}

/// Optional mean-square-displacement cross-check for `estimate-d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsdConfig {
    pub t: f64,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SepConfig {
    pub horizon: f64,
    /// Clocks run at `eps^-2` times the rates.
    #[serde(default = "one")]
    pub eps: f64,
    /// Deterministic initial configuration.
    #[serde(default)]
    pub occupied: Option<Vec<usize>>,
    /// Product Bernoulli initial data with density `ρ₀(εx)`.
    #[serde(default)]
    pub profile: Option<Profile<f64>>,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default = "yes")]
    pub record_events: bool,
    /// Also export the martingale of the canonical bump at the snapshot times.
    #[serde(default)]
    pub martingale: bool,
    #[serde(default)]
    pub slab_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityCase {
    pub x: usize,
    pub t: f64,
    pub occupied: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityConfig {
    pub replicas: usize,
    #[serde(default)]
    pub cases: Vec<DualityCase>,
    /// Additional cases drawn from the seed, with `t` in `(0, max_t]`.
    #[serde(default)]
    pub random_cases: usize,
    #[serde(default = "one")]
    pub max_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NagyConfig {
    pub instances: usize,
    pub horizon: f64,
    /// Instances stop before this many clock events plus one.
    #[serde(default = "five")]
    pub max_events: usize,
    #[serde(default = "nagy_tol")]
    pub quad_tol: f64,
    #[serde(default = "nagy_bound")]
    pub residual_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroSection {
    pub eps: Vec<f64>,
    pub horizon: f64,
    pub replicas: usize,
    pub initial: Profile<f64>,
    #[serde(default = "time_points")]
    pub time_points: usize,
    /// Length of the shipped test family; 1 is the canonical bump alone.
    #[serde(default = "one_usize")]
    pub test_functions: usize,
    /// Prescribed `D` (rows); computed from correctors when absent.
    #[serde(default)]
    pub d: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn five() -> usize {
    5
}
fn nagy_tol() -> f64 {
    1e-8
}
fn nagy_bound() -> f64 {
    1e-6
}
fn time_points() -> usize {
    sepsim::hydrodynamics::DEFAULT_TIME_POINTS
}

/// Upper bound on the largest eigenvalue of `D` implied by the law, if any.
/// Nearest-neighbor conductances give `D ≤ max c`; clusters have unit rates.
pub(crate) fn diffusivity_bound(law: &EnvironmentLaw) -> Option<f64> {
    match law {
        EnvironmentLaw::ZdConductance { law, .. } => match law {
            ConductanceLaw::Constant { value } => Some(*value),
            ConductanceLaw::Uniform { high, .. } => Some(*high),
            ConductanceLaw::TwoPoint { low, high, .. } => Some(low.max(*high)),
            ConductanceLaw::Table { values, .. } | ConductanceLaw::Periodic { values } => {
                values.iter().copied().reduce(f64::max)
            }
            ConductanceLaw::Exponential { .. } | ConductanceLaw::LogNormal { .. } => None,
        },
        EnvironmentLaw::PercolationCluster {
            lattice: LatticeChoice::Zd { .. },
            ..
        } => Some(1.0),
        _ => None,
    }
}

/// Half the side of a lattice box, when the law fixes it.
pub(crate) fn half_box(law: &EnvironmentLaw) -> Option<f64> {
    match law {
        EnvironmentLaw::ZdConductance { side, .. } => Some(*side as f64 / 2.0),
        EnvironmentLaw::PercolationCluster {
            lattice: LatticeChoice::Zd { .. },
            side,
            ..
        } => Some(*side as f64 / 2.0),
        _ => None,
    }
}
