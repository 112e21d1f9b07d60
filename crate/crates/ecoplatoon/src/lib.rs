//! Deterministic single-lane mixed-platoon traffic simulation together with
//! a nested-graph reinforcement-learning stack for longitudinal control.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] - dense row-major matrices.
//! * [`sim`] - vehicle kinematics, a car-following baseline, leader speed
//!   profiles and the world stepper.
//! * [`graph`] - nested traffic graphs (per-platoon vehicle graphs inside a
//!   platoon-level graph), spatio-temporal edge weights, spectral analysis,
//!   connection-intensity accounting, colour refinement and text dumps.
//! * [`nn`] - a tape-based reverse-mode autodiff engine, graph-attention and
//!   dense layers, and a named parameter store with checkpointing.
//! * [`reward`] - the four-objective reward (safety, task, comfort, energy)
//!   and the longitudinal power model behind the energy term.
//! * [`rl`] - replay buffer, exploration noise, actor/critic networks, the
//!   per-ablation state encoders and the training loop.
//! * [`metrics`] - run logs, traffic and energy summary statistics, CSV export.
//! * [`config`] - flat key=value configuration with env and flag overrides.

pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod reward;
pub mod rl;
pub mod sim;

pub use linalg::Mat;
