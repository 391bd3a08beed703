//! The single random walk on an environment: path sampling, the uniformized
//! semigroup and resolvent solves.

mod generator;
mod resolvent;
mod semigroup;
mod walk;

pub use generator::{dirichlet_form, GeneratorOperator, ShiftedOperator};
pub use resolvent::{resolvent_solve, ResolventSolution, SolverDiagnostics, DEFAULT_RESOLVENT_TOL};
pub use semigroup::{heat_kernel_row, semigroup_apply, SeriesDiagnostics, Uniformizer, MAX_SPLITS, SPLIT_THRESHOLD};
pub use walk::{sample_walk_path, sample_walk_path_with, WalkPath};

pub(crate) use walk::walk_displacement;

use std::io::Write;

use crate::environment::Environment;
use crate::error::Result;
use crate::scalar::Scalar;

/// Writes `index, x_0.., value` rows for a point function.
pub fn write_point_values_csv<T: Scalar, W: Write>(env: &Environment<T>, values: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["index".to_string()];
    header.extend((0..env.dim()).map(|k| format!("x{k}")));
    header.push("value".into());
    out.write_record(&header)?;
    for (i, v) in values.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(env.position(i).iter().map(|c| format!("{c:e}")));
        rec.push(format!("{v:e}"));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
