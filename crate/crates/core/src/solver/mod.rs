//! Scalar advection on the AMR hierarchy, the test profiles, and the
//! pure-interpolation studies.

mod advect;
mod profiles;
mod study;

pub use advect::{
    advance, initial_hierarchy, l1_error, level_prolongators, mass, run_advection, AdvectConfig, AdvectResult,
    StepRecord, CFL_LIMIT,
};
pub use profiles::{gaussian_average_1d, Profile, StreamFunctionField};
pub use study::{alpha_demo, convergence_study, AlphaCell, ConvergenceRow, ConvergenceStudy};
