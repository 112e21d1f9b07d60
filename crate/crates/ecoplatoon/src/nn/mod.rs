//! A small neural-network stack: tape autodiff, dense and graph-attention
//! layers, and a named parameter store with checkpoints.
//!
//! Everything is written against [`Mat`](crate::linalg::Mat) and a
//! deterministic seeded RNG; there is no global state and no threading,
//! so identical seeds give identical parameters, gradients, and updates.

pub mod gradcheck;
pub mod layers;
pub mod store;
pub mod tape;

use std::error::Error;
use std::fmt;

#[derive(Debug)]
pub enum NnError {
    UnknownParam(String),
    DuplicateParam(String),
    Shape(String),
    NonFinite(String),
    Checkpoint(String),
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::UnknownParam(name) => write!(f, "unknown parameter {name}"),
            NnError::DuplicateParam(name) => write!(f, "parameter {name} already registered"),
            NnError::Shape(msg) => write!(f, "shape error: {msg}"),
            NnError::NonFinite(what) => write!(f, "non-finite value in {what}"),
            NnError::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
        }
    }
}

impl Error for NnError {}
