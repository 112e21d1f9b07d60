//! Actor-critic training over nested graph observations.
//!
//! The controller is a deterministic-policy-gradient learner: a shared
//! per-platoon policy maps the encoded graph state to one bounded
//! acceleration per connected vehicle, and a centralized critic scores
//! the joint action against the fleet-level reward. Four encoder
//! variants form an ablation ladder, from raw feature rows up to
//! weighted attention on both graph levels.

pub mod networks;
pub mod noise;
pub mod replay;
pub mod trainer;

pub use networks::{observe, EncodeStats, NetConfig, Networks};
pub use noise::NoiseSchedule;
pub use replay::{ReplayBuffer, Transition};
pub use trainer::{
    rollout, train, EnvSetup, EpisodeStats, NullObserver, Policy, TrainConfig, TrainObserver,
    TrainOutcome,
};

use std::fmt;

use crate::graph::{GraphError, WeightScheme};
use crate::nn::NnError;
use crate::reward::RewardError;
use crate::sim::SimError;

#[derive(Debug)]
pub enum RlError {
    /// Invalid training or environment configuration.
    Config(String),
    Graph(GraphError),
    Net(NnError),
    Sim(SimError),
    Reward(RewardError),
}

impl fmt::Display for RlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RlError::Config(msg) => write!(f, "config error: {msg}"),
            RlError::Graph(e) => write!(f, "graph: {e}"),
            RlError::Net(e) => write!(f, "network: {e}"),
            RlError::Sim(e) => write!(f, "simulation: {e}"),
            RlError::Reward(e) => write!(f, "reward: {e}"),
        }
    }
}

impl std::error::Error for RlError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            RlError::Config(_) => None,
            RlError::Graph(e) => Some(e),
            RlError::Net(e) => Some(e),
            RlError::Sim(e) => Some(e),
            RlError::Reward(e) => Some(e),
        }
    }
}

impl From<GraphError> for RlError {
    fn from(e: GraphError) -> Self {
        RlError::Graph(e)
    }
}

impl From<NnError> for RlError {
    fn from(e: NnError) -> Self {
        RlError::Net(e)
    }
}

impl From<SimError> for RlError {
    fn from(e: SimError) -> Self {
        RlError::Sim(e)
    }
}

impl From<RewardError> for RlError {
    fn from(e: RewardError) -> Self {
        RlError::Reward(e)
    }
}

/// Controller variants, ordered from plain actor-critic to the full
/// nested weighted-attention encoder. Each rung adds exactly one piece
/// of machinery to the rung below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    /// Raw feature rows feed the policy directly; no attention.
    Ddpg,
    /// Multi-head attention over binary platoon graphs.
    Mgat,
    /// Platoon attention driven by spatio-temporal edge weights.
    Stw,
    /// Weighted attention on the vehicle and the platoon level.
    Nstw,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Ddpg,
        Ablation::Mgat,
        Ablation::Stw,
        Ablation::Nstw,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Ablation::Ddpg => "ddpg",
            Ablation::Mgat => "mgat",
            Ablation::Stw => "stw",
            Ablation::Nstw => "nstw",
        }
    }

    pub fn parse(s: &str) -> Option<Ablation> {
        Ablation::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Edge-weight scheme for the vehicle-level graph.
    pub fn vv_scheme(&self) -> WeightScheme {
        match self {
            Ablation::Ddpg | Ablation::Mgat => WeightScheme::Binary,
            Ablation::Stw | Ablation::Nstw => WeightScheme::StWeight,
        }
    }

    /// Edge-weight scheme for the platoon-level graph.
    pub fn ff_scheme(&self) -> WeightScheme {
        match self {
            Ablation::Nstw => WeightScheme::StWeight,
            _ => WeightScheme::Binary,
        }
    }

    pub fn uses_vv_attention(&self) -> bool {
        *self != Ablation::Ddpg
    }

    pub fn uses_ff_attention(&self) -> bool {
        *self == Ablation::Nstw
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
