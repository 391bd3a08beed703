//! Effective diffusivity: periodic correctors, the finite-volume matrix `D`,
//! the mean-square-displacement cross-check and convergence of the rescaled
//! walk to the limiting diffusion.

mod convergence;
mod corrector;
mod effective;
mod msd;

pub use convergence::{
    resolvent_convergence_check, semigroup_convergence_check, tail_mass_check, ConvergenceCase, ConvergenceReport,
    TailMassRow,
};
pub use corrector::{corrector_solve, Corrector, DEFAULT_CORRECTOR_TOL};
pub use effective::{effective_matrix, DReport, EffectiveMatrix, ProbeRecord, RANK_THRESHOLD};
pub use msd::{msd_diffusivity, MsdEstimate};
