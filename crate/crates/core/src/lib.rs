//! Simulation library for energy-limited, bit-flipping computation.
//!
//! Boolean problems are read through a noisy channel where bit `j` flips with
//! probability `2^-e_j`. An adversary may permute the energy vector before
//! the read. The crate evaluates decoders under this model, searches for good
//! energy allocations and measures how much the permutation hurts.

pub mod adversary;
pub mod allocators;
pub mod decoders;
pub mod error;
pub mod kernel;
pub mod metrics;
pub mod noise;
pub mod problems;
pub mod rng;

pub use adversary::{GroupKind, GroupSpec, Permutation, PermutationGroup};
pub use decoders::{Decoder, DecoderStrategy, ErrorReport, Estimate, Mode, Prior, Quality};
pub use allocators::{Allocation, AllocationObjective, Method, Objective, OptimizerSettings};
pub use error::{Error, Result};
pub use metrics::{MobsConfig, MobsResult, QualityMetric};
pub use noise::EnergyVector;
pub use problems::{build_problem, truth_table, BooleanProblem, ProblemSpec, TruthTable};
