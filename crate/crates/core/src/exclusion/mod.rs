//! Simple exclusion through the graphical construction: Poisson clocks on
//! edges, slab certificates, exchange dynamics and the martingale and
//! duality diagnostics built on top of them.

mod clocks;
mod config;
mod duality;
mod evolve;
mod generator;
mod martingale;

pub use clocks::{
    default_slab_width, sample_clocks, slab_certificates, ClockEvent, ClockSchedule, SlabCertificate,
    DEFAULT_COMPONENT_CAP,
};
pub use config::{exchange, ParticleConfig};
pub use duality::{duality_mc, nagy_check, DualityResult, NagyResult, KERNEL_TOL, NAGY_MAX_POINTS};
pub use evolve::{evolve, evolve_with, EventRecord, EvolveOptions, EvolveOutcome, DEFAULT_MAX_HALVINGS};
pub use generator::{
    check_declared_support, fd_generator_estimate, generator_apply, generator_apply_occupation, FdEstimate,
    LocalFunction, SUPPORT_FUZZ_EXCHANGES,
};
pub use martingale::{dynkin_path, MartingalePath};
