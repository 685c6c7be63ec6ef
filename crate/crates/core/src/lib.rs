//! Simulation and verification toolkit for a reinforced growth process on a
//! cycle graph.
//!
//! Particles arrive one at a time on the sites of a cycle with `N >= 4`
//! vertices. Site `i` receives the next particle with probability
//! proportional to `exp(lambda_i * u_i)`, where `u_i` counts the particles at
//! `i` and at its two neighbours. The process localizes almost surely, either
//! at a single site (a local maximum of the lambda landscape) or at a pair of
//! adjacent sites with equal lambda.
//!
//! Modules:
//!
//! - [`model`]: chain state, log-space rates, transition sampling, trajectories.
//! - [`landscape`]: classification of the lambda landscape and pair regimes.
//! - [`progressions`]: Bernoulli-driven random geometric progressions.
//! - [`oracles`]: exact and semi-exact sticking probabilities and bounds.
//! - [`experiments`]: localization detection, batches, first-exit events.
//! - [`cli`]: configuration parsing and command dispatch.
//! - [`acceptance`]: the end-to-end verification suite.
//!
//! Site indices are zero-based throughout the library. The CLI reports
//! one-based site labels.

pub mod acceptance;
pub mod cli;
pub mod experiments;
pub mod landscape;
pub mod model;
pub mod oracles;
pub mod progressions;
pub mod rng;
pub mod stats;

pub use landscape::{classify, LandscapeReport, PairType, Regime};
pub use model::{simulate, step, Config, ModelError, Params, TransitionDistribution};
pub use rng::RngStream;
