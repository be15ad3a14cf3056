//! Influence blocking maximization on directed social graphs.
//!
//! The crate simulates competing false/true information cascades, extracts
//! seven graph features per false/true seed pair, trains a small MLP that
//! predicts blocked influence from those features, and plugs either the MLP
//! or Monte Carlo simulation into a lazy-greedy (CELF) seed selector.

pub mod bench;
pub mod cascade;
pub mod datagen;
pub mod error;
pub mod features;
pub mod graph;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod seed;
pub mod synth;

pub use cascade::{
    estimate_blocked, estimate_y, exact_blocked, simulate_once, Estimate, HashedWorld, Instance,
    NodeState, SimOutcome,
};
pub use error::{Error, Result};
pub use features::{featurize, FeatureVector};
pub use graph::{compute_node_stats, ClosenessMode, Graph, NodeId, NodeStats};
pub use model::MlpModel;
