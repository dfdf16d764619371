//! Walk-sum evaluation of conditional evolution operators for a probe atom
//! coupled to a frozen environment, with a Rydberg-lattice model, observables
//! and dense reference solvers.

pub mod configuration;
pub mod cost;
pub mod error;
pub mod expoly;
pub mod graph;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod pipeline;
pub mod sampling;
pub mod sweep;

pub use configuration::Configuration;
pub use error::{Result, WalkSumError};
pub use expoly::{conv_into, expm2, ExpMatrix, ExpPoly, OpCount};
pub use graph::{build_graph, walk_count, walk_counts, ConfigurationModel, VertexHamiltonian, WalkGraph};
pub use model::{ModelSpec, RydbergModel, SiteCoord};
pub use sweep::{sum_walks, ConditionalEvolution, CostReport, SweepOptions};

pub use nalgebra;
pub use num_bigint;
pub use num_complex;
