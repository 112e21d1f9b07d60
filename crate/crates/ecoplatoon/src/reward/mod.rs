//! Four-objective reward model: safety, task tracking, comfort, energy.
//!
//! Each sub-reward is a pure function mapping physical quantities to a
//! dimensionless penalty in [-1, 0] (energy excepted, which is a
//! normalized joule count). Per-CAV vectors are scalarized by a weighted
//! dot product and summed into the global training reward.

pub mod energy;

use std::error::Error;
use std::fmt;

use crate::sim::{safe_distance, ttc, ScenarioConfig, VehicleKind, WorldState};
use energy::{step_energy, EnergyBreakdown, EnergyParams};

/// Piecewise boundary of the jerk penalty, as printed in the source model.
pub const JERK_PIECE_BOUNDARY: f64 = 2.94;

#[derive(Debug)]
pub enum RewardError {
    Input(String),
}

impl fmt::Display for RewardError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardError::Input(msg) => write!(f, "invalid reward input: {msg}"),
        }
    }
}

impl Error for RewardError {}

/// Tunable constants of the reward model.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardParams {
    /// TTC threshold below which the log penalty activates, s.
    pub ttc_limit: f64,
    /// Desired following distance for the gap-tracking term, m.
    pub desired_gap: f64,
    /// Acceleration magnitude where the comfort penalty saturates, m/s^2.
    pub accel_comfort: f64,
    /// Multiplier on the large-jerk branch of the jerk penalty.
    pub jerk_scale: f64,
    /// Jerk normalization bound, m/s^3.
    pub jerk_max: f64,
    /// Component weights: safe, task, comfort, energy.
    pub weights: [f64; 4],
    /// Normalization power for the energy component, W.
    pub reference_power: f64,
    /// Added to the global reward on a collision step.
    pub collision_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            ttc_limit: 4.0,
            desired_gap: 20.0,
            accel_comfort: 2.5,
            jerk_scale: 1.0,
            jerk_max: 90.0,
            weights: [1.0; 4],
            reference_power: 1.0e4,
            collision_penalty: -100.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.ttc_limit > 0.0) {
            return Err(RewardError::Input(format!(
                "ttc_limit must be positive, got {}",
                self.ttc_limit
            )));
        }
        if !(self.desired_gap > 0.0) {
            return Err(RewardError::Input(format!(
                "desired_gap must be positive, got {}",
                self.desired_gap
            )));
        }
        if !(self.accel_comfort > 0.0) || !(self.jerk_max > 0.0) {
            return Err(RewardError::Input(
                "accel_comfort and jerk_max must be positive".into(),
            ));
        }
        if self.weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(RewardError::Input("weights must be finite and >= 0".into()));
        }
        if !(self.reference_power > 0.0) {
            return Err(RewardError::Input(format!(
                "reference_power must be positive, got {}",
                self.reference_power
            )));
        }
        Ok(())
    }
}

/// Safety terms: hard penalty below the dynamic safe distance, log
/// penalty as time-to-collision shrinks under the threshold. A
/// non-positive TTC is already on the collision path and pins -1.
pub fn r_safe(delta_d: f64, d_s: f64, ttc: f64, t_limit: f64) -> (f64, f64) {
    let r_ds = if delta_d < d_s { -1.0 } else { 0.0 };
    let r_ttc = if ttc <= 0.0 {
        -1.0
    } else if ttc > t_limit {
        0.0
    } else {
        (ttc / t_limit).ln().max(-1.0)
    };
    (r_ds, r_ttc)
}

/// Tracking terms: bounded penalties on gap error and speed mismatch.
pub fn r_task(delta_d: f64, delta_d_des: f64, v_ego: f64, v_front: f64) -> (f64, f64) {
    let r_gap = -(delta_d - delta_d_des).abs().tanh();
    let r_speed = -(v_ego - v_front).abs().tanh();
    (r_gap, r_speed)
}

/// Comfort terms: quadratic penalties on acceleration and jerk. The jerk
/// branch above [`JERK_PIECE_BOUNDARY`] applies the `c2` multiplier and
/// the -1 clamp; below it the raw quadratic is kept unclamped.
pub fn r_comfort(a: f64, jerk: f64, c1: f64, c2: f64, j_max: f64) -> (f64, f64) {
    let r_a = (-(a / c1).powi(2)).max(-1.0);
    let jj = (jerk / j_max).powi(2);
    let r_j = if jerk.abs() >= JERK_PIECE_BOUNDARY {
        (-c2 * jj).max(-1.0)
    } else {
        -jj
    };
    (r_a, r_j)
}

/// Per-CAV reward components plus their weighted scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardVector {
    pub safe: f64,
    pub task: f64,
    pub comfort: f64,
    pub energy: f64,
    pub scalar: f64,
}

impl RewardVector {
    pub fn assemble(safe: f64, task: f64, comfort: f64, energy: f64, weights: &[f64; 4]) -> Self {
        let scalar =
            weights[0] * safe + weights[1] * task + weights[2] * comfort + weights[3] * energy;
        RewardVector {
            safe,
            task,
            comfort,
            energy,
            scalar,
        }
    }
}

/// Sum of per-CAV scalars plus the terminal penalty on a collision step.
pub fn global_reward(per_cav: &[RewardVector], collision: bool, collision_penalty: f64) -> f64 {
    let base: f64 = per_cav.iter().map(|rv| rv.scalar).sum();
    if collision {
        base + collision_penalty
    } else {
        base
    }
}

/// Everything the trainer and logs need from one reward evaluation.
#[derive(Debug, Clone)]
pub struct StepReward {
    pub per_cav: Vec<RewardVector>,
    pub global: f64,
    pub energy: EnergyBreakdown,
}

/// Full reward evaluation on a post-step world.
///
/// `prev_accel` holds every vehicle's acceleration from the previous
/// step (jerk is the backward difference; pass the current accelerations
/// on the first step so jerk starts at zero). `links` is the active
/// communication link count per CAV in `WorldState::cav_ids` order.
/// Fleet energy is split equally across CAVs after normalization by
/// reference_power * dt * fleet size, so the global reward counts the
/// fleet's energy exactly once.
pub fn step_rewards(
    world: &WorldState,
    prev_accel: &[f64],
    links: &[usize],
    handoffs: usize,
    scenario: &ScenarioConfig,
    rp: &RewardParams,
    ep: &EnergyParams,
) -> Result<StepReward, RewardError> {
    rp.validate()?;
    if prev_accel.len() != world.vehicles.len() {
        return Err(RewardError::Input(format!(
            "prev_accel has {} entries for {} vehicles",
            prev_accel.len(),
            world.vehicles.len()
        )));
    }
    let cav_ids = world.cav_ids();
    if links.len() != cav_ids.len() {
        return Err(RewardError::Input(format!(
            "links has {} entries for {} connected vehicles",
            links.len(),
            cav_ids.len()
        )));
    }

    let energy = step_energy(world, links, handoffs, ep);
    let m = world.vehicles.len() as f64;
    let fleet_norm = energy.total() / (rp.reference_power * ep.timestep * m);
    let energy_share = if cav_ids.is_empty() {
        0.0
    } else {
        fleet_norm / cav_ids.len() as f64
    };

    let mut per_cav = Vec::with_capacity(cav_ids.len());
    for &i in &cav_ids {
        debug_assert!(i > 0, "a connected vehicle always has a leader ahead");
        let ego = &world.vehicles[i];
        let front = &world.vehicles[i - 1];
        let gap = world.gap_ahead(i, scenario.vehicle_length).unwrap_or(0.0);
        let d_s = safe_distance(ego.speed, front.speed, &scenario.safety);
        let t = ttc(ego, front, scenario.vehicle_length);
        let (r_ds, r_ttc) = r_safe(gap, d_s, t, rp.ttc_limit);
        let (r_gap, r_speed) = r_task(gap, rp.desired_gap, ego.speed, front.speed);
        let jerk = (ego.accel - prev_accel[i]) / scenario.dt;
        let (r_a, r_j) = r_comfort(
            ego.accel,
            jerk,
            rp.accel_comfort,
            rp.jerk_scale,
            rp.jerk_max,
        );
        per_cav.push(RewardVector::assemble(
            r_ds + r_ttc,
            r_gap + r_speed,
            r_a + r_j,
            energy_share,
            &rp.weights,
        ));
    }

    let global = global_reward(&per_cav, world.collision_flag, rp.collision_penalty);
    Ok(StepReward {
        per_cav,
        global,
        energy,
    })
}

/// Per-CAV active link count: off-diagonal positive entries in the
/// connected-vehicle rows of the nested graph's vehicle adjacency.
pub fn comm_links(graph: &crate::graph::NestedTrafficGraph) -> Vec<usize> {
    graph
        .cav_rows()
        .iter()
        .map(|&row| {
            (0..graph.vv.adjacency.cols())
                .filter(|&j| j != row && graph.vv.adjacency.get(row, j) > 0.0)
                .count()
        })
        .collect()
}

/// Tracks each follower's nearest in-range connected vehicle and counts
/// reassignments between consecutive steps. Gaining or losing coverage
/// is not a handoff; only a change between two concrete assignments is.
#[derive(Debug, Default, Clone)]
pub struct HandoffTracker {
    assignment: Vec<Option<usize>>,
}

impl HandoffTracker {
    pub fn new() -> Self {
        HandoffTracker::default()
    }

    /// Updates assignments from the current world; returns the handoff
    /// count for this step. `range` is the coverage radius in meters.
    pub fn update(&mut self, world: &WorldState, range: f64) -> usize {
        self.update_with_targets(world, range).len()
    }

    /// Like [`HandoffTracker::update`], but returns the gaining
    /// connected vehicle of each handoff (for per-vehicle accounting).
    pub fn update_with_targets(&mut self, world: &WorldState, range: f64) -> Vec<usize> {
        let cavs = world.cav_ids();
        let n = world.vehicles.len();
        if self.assignment.len() != n {
            self.assignment = vec![None; n];
        }
        let mut targets = Vec::new();
        for (i, v) in world.vehicles.iter().enumerate() {
            if v.kind != VehicleKind::Av {
                continue;
            }
            let nearest = cavs
                .iter()
                .copied()
                .map(|c| (c, (world.vehicles[c].position - v.position).abs()))
                .filter(|(_, d)| *d <= range)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c);
            if let (Some(old), Some(new)) = (self.assignment[i], nearest) {
                if old != new {
                    targets.push(new);
                }
            }
            self.assignment[i] = nearest;
        }
        targets
    }
}
