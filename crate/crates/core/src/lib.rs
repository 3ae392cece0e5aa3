//! Simulation and aggregation library for binary crowdsourced labelling.
//!
//! Five strategies are provided: majority vote, weighted vote, and three
//! probabilistic strategies (point-estimate skills, Beta-Bernoulli skills,
//! and Beta-Bernoulli skills with confidence-scaled updates) that keep
//! querying workers until the label posterior clears a confidence threshold,
//! escalating to known experts when the crowd runs out.

pub mod aggregation;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod orchestrator;
pub mod par;
pub mod report;
pub mod rng;
pub mod simulation;
pub mod types;

pub use aggregation::{PosteriorResult, StrategyKind};
pub use config::Config;
pub use error::{Error, Result};
pub use par::Execution;
pub use types::{Decision, Label, Question, WorkerClass, WorkerId, WorkerProfile, WorkerRecord};
