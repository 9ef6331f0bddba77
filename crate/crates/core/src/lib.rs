//! Variance-ratio dispersion tests for fitted parametric models, with the
//! distribution, fitting, goodness-of-fit and Monte Carlo machinery they need.

pub mod dist;
pub mod error;
pub mod fitting;
pub mod gof;
pub mod harness;
pub mod io;
pub mod special;
pub mod vartest;

pub use dist::{DistributionSpec, Family, MixtureComponent, MomentSet, RngStream, Sampler};
pub use error::{Error, Result};
pub use fitting::{fit_mle, FitResult};
pub use vartest::{var_test, DfConvention, VarTestOutcome};
pub use harness::{run_rejection_experiment, run_table1, ExperimentConfig, ExperimentSummary};
