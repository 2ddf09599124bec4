//! Best-arm identification with anytime KL confidence sequences.
//!
//! The crate provides the pieces needed to run and analyse the lil-KLUCB
//! algorithm on bounded rewards:
//!
//! * [`kl_math`]: Bernoulli divergence, its inverses and Chernoff information.
//! * [`confidence`]: the KL, KL-prime and sub-Gaussian confidence sequences.
//! * [`bandit`]: lil-KLUCB, the UCB race and the sample-complexity evaluator.
//! * [`environments`]: Bernoulli, discrete and bootstrap reward processes.
//! * [`data_ingest`]: contest vote tables in, experiment tables out.
//! * [`simulation`]: seeded Monte-Carlo repetitions and their summaries.

pub mod bandit;
pub mod confidence;
pub mod data_ingest;
pub mod environments;
pub mod error;
pub mod kl_math;
pub mod simulation;

pub use bandit::{
    lil_klucb, predicted_complexity, predicted_complexity_with, top_index, ucb_race, ArmStats,
    ComplexityBound, RunRecord,
};
pub use confidence::{
    c_of_n, kappa, sg2_radius, BoundScheme, Coverage, SchemeKind, Side, DEFAULT_BOUND_N,
    DEFAULT_DELTA,
};
pub use data_ingest::{
    parse_contest_csv, read_output, write_output, Caption, ColumnMap, ContestDataset,
    ExperimentOutput, Metadata, OutputFormat,
};
pub use environments::{
    from_contest, gap_family, parametric_means, ArmDistribution, Environment, DEFAULT_STAR_MAP,
};
pub use error::{Error, Result};
pub use kl_math::{
    bernoulli_kl, chernoff_floor, chernoff_information, kl_lower_inverse, kl_upper_inverse,
    tilted_kl_lower_inverse, tilted_kl_upper_inverse, Divergence, Prob,
};
