//! Stochastic block model and broadcast-tree simulations under a monotone
//! semirandom adversary: samplers, the adversary itself, tree estimators,
//! SDP recovery, threshold calculators, and an experiment harness.

pub mod error;
pub mod graph_adversary;
pub mod graph_io;
pub mod harness;
pub mod rng;
pub mod sdp;
pub mod sbm;
pub mod thresholds;
pub mod tree;
pub mod tree_model;
pub mod tree_reconstruct;

pub use error::{Error, Residuals, Result};
pub use graph_adversary::{AdversaryOutcome, PrecursorCensus, Topology, Violation};
pub use sbm::{Graph, Marking, Mode, ModelParams, Spin, SpinAssignment};
pub use tree::Tree;
pub use tree_model::{Birth, DPlus, EdgeNoise, SemirandomTree};
pub use tree_reconstruct::{PosteriorModel, RootEstimate};
