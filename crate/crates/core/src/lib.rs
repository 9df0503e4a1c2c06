//! Seed-reproducible simulation and analysis of entanglement accessibility
//! in quantum repeater networks under localized failure domains.
//!
//! The pipeline: build or load a [`network::QuantumNetwork`], sample
//! [`failure`] domains, serve demands over surviving connections
//! ([`routing`]), summarize accessibility ratios ([`metrics`]), optionally
//! fit a latent noise-to-signal profile ([`estimation`]) and track the
//! SE(2)-valued event statistics ([`liegroup`]). [`experiment`] ties the
//! stages together and writes CSV reports.
//!
//! The default `parallel` feature runs trials and grid searches on rayon;
//! disable it for a fully sequential build. Results are identical either
//! way because every random draw derives from `(master seed, purpose,
//! index)` via [`rng::sub_rng`].

pub mod error;
pub mod estimation;
pub mod experiment;
pub mod failure;
pub mod liegroup;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod routing;

pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ReportBundle};
pub use network::QuantumNetwork;
pub use routing::run_trials;
