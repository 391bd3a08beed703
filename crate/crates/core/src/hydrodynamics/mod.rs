mod empirical;
mod experiment;
mod heat;
mod test_functions;

pub use empirical::{
    bernoulli_variance, corrected_empirical_gap, empirical_eval, init_product_bernoulli, weak_solution_residual,
    CorrectedGap, MeasurePath, WeakResidual,
};
pub use experiment::{
    hydro_experiment, write_profile_csv, DeviationRow, HydroConfig, HydroReport, ScaleSummary, DEFAULT_TIME_POINTS,
};
pub use heat::{continuum_resolvent, continuum_semigroup, heat_solution, MacroProfile, Profile, DEFAULT_HEAT_TOL};
pub use test_functions::{measure_distance, test_family, MeasureDistance, Shape, TestFunction};
