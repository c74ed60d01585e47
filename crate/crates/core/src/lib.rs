//! Level-set solver for fronts moving with a nonlocal speed
//! `c[1_{u >= 0}] = c0 * 1_{u >= 0} + c1`, together with oracles and
//! empirical audits of the a-priori estimates satisfied by its solutions.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod grid;
pub mod hj;
pub mod nonlocal;
pub mod fixedpoint;
pub mod analysis;
pub mod oracles;

pub use error::{Error, Result};
pub use grid::{sample, BandSpec, Grid, ScalarField};
pub use hj::{solve_local, LocalProblem, SignMode, Trajectory, VelocityField};
pub use nonlocal::{Kernel, TimeSeries};
pub use fixedpoint::{solve_nonlocal, DislocationProblem, NonlocalSolution, SolveOptions};
