//! Instance generation, fixtures and the experiment drivers.

pub mod fixtures;
pub mod generators;
pub mod suites;
pub mod table;

pub use fixtures::{extremal_fixtures, validate_extremal, NamedMatrix};
pub use generators::{
    gen_extremal_dnn, gen_objective, gen_unit_vector, GeneratedInstance, RandomObjective,
};
pub use suites::{
    covariance_experiment, gap_experiment, mean_experiment, reference_moments,
    separation_experiment, solve_separation, AnnealMethod, Body, GapProblem, Reference,
    ReferenceScale, SamplingGrid, SeparationMethod, SeparationOutcome,
};
pub use table::{Cell, ExperimentTable};
