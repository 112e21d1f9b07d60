//! The training loop: environment interaction, replay, twin-network
//! updates, and deterministic evaluation rollouts.
//!
//! One gradient step pair (critic, then actor) runs per environment
//! step once the buffer holds a full batch; the frozen copies then
//! blend toward the online weights. An episode is one pass over the
//! leader trajectory; a collision ends it early and is the only
//! terminal condition the bootstrap respects. Connectivity coverage
//! (for task handoffs) uses the spatio-temporal reach `d_max`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{NormConstants, StWeightParams};
use crate::linalg::Mat;
use crate::metrics::{EnergyRecord, RunLog, StepRecord};
use crate::nn::store::{
    write_checkpoint, CheckpointMeta, ParameterStore, UpdateRule,
};
use crate::nn::tape::{Tape, TensorId};
use crate::reward::energy::{energy_ledger_rows, EnergyParams};
use crate::reward::{comm_links, step_rewards, HandoffTracker, RewardParams};
use crate::rl::networks::{action_leaf, observe, EncodeStats, NetConfig, Networks};
use crate::rl::noise::NoiseSchedule;
use crate::rl::replay::{ReplayBuffer, Transition};
use crate::rl::{Ablation, RlError};
use crate::sim::{
    build_scenario, idm_actions, step as sim_step, LeaderTrajectory, ScenarioConfig, WorldState,
};

/// Optimization and schedule knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_steps: u64,
    pub batch: usize,
    /// Steps over which exploration noise anneals linearly.
    pub exploration_steps: u64,
    pub noise_start: f64,
    pub noise_end: f64,
    pub lr: f64,
    /// Blend factor for the frozen copies, (0, 1].
    pub tau: f64,
    pub gamma: f64,
    pub seed: u64,
    pub ablation: Ablation,
    pub replay_capacity: usize,
    pub net: NetConfig,
    /// Adam instead of plain SGD.
    pub adam: bool,
    /// Leave encoder weights out of the critic update.
    pub freeze_encoder_in_critic: bool,
    /// Leave encoder weights out of the actor update. The default trains
    /// the encoders through the critic loss only, which keeps the two
    /// heads from tugging the shared embedding in opposite directions.
    pub freeze_encoder_in_actor: bool,
    /// Emit a checkpoint every this many steps (0: never).
    pub checkpoint_every: u64,
    /// Opaque configuration digest recorded in checkpoints.
    pub config_hash: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 900_000,
            batch: 64,
            exploration_steps: 600_000,
            noise_start: 0.5,
            noise_end: 7.5e-3,
            lr: 7.5e-3,
            tau: 7.5e-2,
            gamma: 0.99,
            seed: 0,
            ablation: Ablation::Nstw,
            replay_capacity: 100_000,
            net: NetConfig::default(),
            adam: false,
            freeze_encoder_in_critic: false,
            freeze_encoder_in_actor: true,
            checkpoint_every: 0,
            config_hash: String::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        if self.total_steps == 0 {
            return Err(RlError::Config("total_steps must be positive".into()));
        }
        if self.batch == 0 {
            return Err(RlError::Config("batch must be positive".into()));
        }
        if self.replay_capacity < self.batch {
            return Err(RlError::Config(format!(
                "replay capacity {} cannot hold a batch of {}",
                self.replay_capacity, self.batch
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(RlError::Config("lr must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(RlError::Config("tau must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(RlError::Config("gamma must lie in [0, 1]".into()));
        }
        if self.noise_start < 0.0 || self.noise_end < 0.0 {
            return Err(RlError::Config("noise levels must be nonnegative".into()));
        }
        self.net.validate()
    }
}

/// Everything the environment side needs: scenario, speed profile, and
/// the reward/energy/weight parameter blocks.
#[derive(Debug, Clone)]
pub struct EnvSetup {
    pub scenario: ScenarioConfig,
    pub trajectory: LeaderTrajectory,
    pub reward: RewardParams,
    pub energy: EnergyParams,
    pub stw: StWeightParams,
}

impl EnvSetup {
    pub fn validate(&self) -> Result<(), RlError> {
        self.scenario.validate()?;
        self.reward.validate()?;
        self.stw.validate()?;
        if self.energy.timestep != self.scenario.dt {
            return Err(RlError::Config(format!(
                "energy timestep {} does not match the simulation step {}",
                self.energy.timestep, self.scenario.dt
            )));
        }
        if self.trajectory.duration() < self.scenario.dt {
            return Err(RlError::Config(
                "trajectory must span at least one simulation step".into(),
            ));
        }
        Ok(())
    }
}

/// Per-episode aggregates of the fleet-level reward.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: u64,
    pub steps: u64,
    pub mean_reward: f64,
    pub std_reward: f64,
    /// 1 when the episode ended in a collision.
    pub collisions: u64,
    /// Exploration noise level when the episode closed.
    pub noise_std: f64,
}

impl EpisodeStats {
    pub const CSV_HEADER: &'static str =
        "episode,steps,mean_reward,std_reward,collisions,noise_std";

    fn from_rewards(episode: u64, rewards: &[f64], collided: bool, noise_std: f64) -> Self {
        let n = rewards.len().max(1) as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        EpisodeStats {
            episode,
            steps: rewards.len() as u64,
            mean_reward: mean,
            std_reward: var.sqrt(),
            collisions: collided as u64,
            noise_std,
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.episode,
            self.steps,
            self.mean_reward,
            self.std_reward,
            self.collisions,
            self.noise_std
        )
    }
}

/// Callbacks fired as training progresses.
pub trait TrainObserver {
    fn on_episode(&mut self, _stats: &EpisodeStats) {}
    fn on_checkpoint(&mut self, _step: u64, _text: &str) {}
}

/// Observer that ignores every event.
pub struct NullObserver;

impl TrainObserver for NullObserver {}

/// Final state of a training run. Only completed episodes (collision or
/// full trajectory pass) appear in `episodes`.
#[derive(Debug)]
pub struct TrainOutcome {
    pub networks: Networks,
    pub store: ParameterStore,
    pub episodes: Vec<EpisodeStats>,
    pub steps_run: u64,
    pub encode_stats: EncodeStats,
}

fn checkpoint_meta(cfg: &TrainConfig, norm: &NormConstants, step: u64) -> CheckpointMeta {
    CheckpointMeta {
        config_hash: cfg.config_hash.clone(),
        seed: cfg.seed,
        step,
        ablation: cfg.ablation.name().to_string(),
        norm: [
            norm.road_length,
            norm.speed_cap,
            norm.accel_cap,
            norm.d_max,
            norm.vehicle_length,
        ],
    }
}

/// Runs the full training loop. The master seed splits into three
/// independent streams (weight init, exploration noise, replay
/// sampling) so a run is reproducible bit for bit.
pub fn train(
    cfg: &TrainConfig,
    env: &EnvSetup,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome, RlError> {
    cfg.validate()?;
    env.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init_seed: u64 = master.gen();
    let noise_seed: u64 = master.gen();
    let replay_seed: u64 = master.gen();
    let mut init_rng = ChaCha8Rng::seed_from_u64(init_seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut replay_rng = ChaCha8Rng::seed_from_u64(replay_seed);

    let rule = if cfg.adam {
        UpdateRule::adam(cfg.lr)
    } else {
        UpdateRule::sgd(cfg.lr)
    };
    let mut store = ParameterStore::new(rule);
    let networks = Networks::init(&mut store, &mut init_rng, cfg.ablation, cfg.net.clone())?;
    let mut target = store.clone();

    let norm = NormConstants::from_scenario(&env.scenario, env.stw.d_max);
    let noise = NoiseSchedule {
        start: cfg.noise_start,
        end: cfg.noise_end,
        anneal_steps: cfg.exploration_steps,
    };
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut stats = EncodeStats::default();

    let mut world = build_scenario(&env.scenario, &env.trajectory)?;
    let mut tracker = HandoffTracker::new();
    tracker.update(&world, env.stw.d_max);
    let mut obs = observe(&world, &env.stw, &norm, cfg.ablation, &mut stats)?;
    let n_cav = world.cav_count();

    let mut episodes = Vec::new();
    let mut episode_rewards: Vec<f64> = Vec::new();
    let mut episode_idx: u64 = 0;

    for step in 0..cfg.total_steps {
        let mut actions = networks.policy_actions(&store, &obs, &mut stats)?;
        for (a, eps) in actions
            .iter_mut()
            .zip(noise.sample(&mut noise_rng, step, n_cav))
        {
            *a = (*a + eps).clamp(-cfg.net.action_bound, cfg.net.action_bound);
        }

        let prev_accels: Vec<f64> = world.vehicles.iter().map(|v| v.accel).collect();
        let links = comm_links(&obs);
        let next_world = sim_step(&world, &actions, &env.trajectory, &env.scenario)?;
        let handoffs = tracker.update(&next_world, env.stw.d_max);
        let sr = step_rewards(
            &next_world,
            &prev_accels,
            &links,
            handoffs,
            &env.scenario,
            &env.reward,
            &env.energy,
        )?;
        let next_obs = observe(&next_world, &env.stw, &norm, cfg.ablation, &mut stats)?;
        let terminal = next_world.collision_flag;
        let truncated =
            next_world.time + env.scenario.dt > env.trajectory.duration() + 1e-9;

        episode_rewards.push(sr.global);
        replay.push(Transition {
            obs,
            actions,
            reward: sr.global,
            next_obs: next_obs.clone(),
            terminal,
        });

        if replay.len() >= cfg.batch {
            let batch = replay.sample(&mut replay_rng, cfg.batch);
            critic_update(&networks, &mut store, &target, &batch, cfg, &mut stats)?;
            actor_update(&networks, &mut store, &batch, cfg, &mut stats)?;
            target.soft_update_from(&store, cfg.tau)?;
        }

        if terminal || truncated {
            let ep = EpisodeStats::from_rewards(
                episode_idx,
                &episode_rewards,
                terminal,
                noise.std_at(step),
            );
            observer.on_episode(&ep);
            episodes.push(ep);
            episode_idx += 1;
            episode_rewards.clear();
            world = build_scenario(&env.scenario, &env.trajectory)?;
            tracker = HandoffTracker::new();
            tracker.update(&world, env.stw.d_max);
            obs = observe(&world, &env.stw, &norm, cfg.ablation, &mut stats)?;
        } else {
            world = next_world;
            obs = next_obs;
        }

        if cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 {
            let meta = checkpoint_meta(cfg, &norm, step + 1);
            observer.on_checkpoint(step + 1, &write_checkpoint(&store, &meta));
        }
    }

    Ok(TrainOutcome {
        networks,
        store,
        episodes,
        steps_run: cfg.total_steps,
        encode_stats: stats,
    })
}

/// One value-regression step: bootstrapped targets from the frozen
/// copies, mean squared error on the online critic. Returns the loss.
fn critic_update(
    networks: &Networks,
    store: &mut ParameterStore,
    target: &ParameterStore,
    batch: &[&Transition],
    cfg: &TrainConfig,
    stats: &mut EncodeStats,
) -> Result<f64, RlError> {
    let mut ys = Vec::with_capacity(batch.len());
    for t in batch {
        let y = if t.terminal {
            t.reward
        } else {
            let mut tape = Tape::new();
            let s = networks.encode(&mut tape, target, &t.next_obs, stats)?;
            let a = networks.actor_forward(&mut tape, target, s)?;
            let q = networks.critic_forward(&mut tape, target, s, a)?;
            t.reward + cfg.gamma * tape.value(q).scalar()
        };
        ys.push(y);
    }

    let mut tape = Tape::new();
    let mut total: Option<TensorId> = None;
    for (t, y) in batch.iter().zip(&ys) {
        let s = networks.encode(&mut tape, store, &t.obs, stats)?;
        let a = action_leaf(&mut tape, &t.actions);
        let q = networks.critic_forward(&mut tape, store, s, a)?;
        let diff = tape.offset(q, Mat::filled(1, 1, -y));
        let sq = tape.square(diff);
        total = Some(match total {
            None => sq,
            Some(acc) => tape.add(acc, sq),
        });
    }
    let loss = tape.scale(total.expect("batch is non-empty"), 1.0 / batch.len() as f64);
    let value = tape.value(loss).scalar();
    let grads = tape.backward(loss)?;
    tape.accumulate_into(&grads, store)?;
    let train_encoder = !cfg.freeze_encoder_in_critic;
    store.apply_update_where(|name| {
        name.starts_with("critic/") || (train_encoder && name.starts_with("enc_"))
    })?;
    Ok(value)
}

/// One policy-improvement step: raise the critic's score of the
/// policy's own actions. Returns the pre-update mean score.
fn actor_update(
    networks: &Networks,
    store: &mut ParameterStore,
    batch: &[&Transition],
    cfg: &TrainConfig,
    stats: &mut EncodeStats,
) -> Result<f64, RlError> {
    let mut tape = Tape::new();
    let mut total: Option<TensorId> = None;
    for t in batch {
        let s = networks.encode(&mut tape, store, &t.obs, stats)?;
        let a = networks.actor_forward(&mut tape, store, s)?;
        let q = networks.critic_forward(&mut tape, store, s, a)?;
        total = Some(match total {
            None => q,
            Some(acc) => tape.add(acc, q),
        });
    }
    let loss = tape.scale(
        total.expect("batch is non-empty"),
        -1.0 / batch.len() as f64,
    );
    let mean_q = -tape.value(loss).scalar();
    let grads = tape.backward(loss)?;
    tape.accumulate_into(&grads, store)?;
    let train_encoder = !cfg.freeze_encoder_in_actor;
    store.apply_update_where(|name| {
        name.starts_with("actor/") || (train_encoder && name.starts_with("enc_"))
    })?;
    Ok(mean_q)
}

/// Evaluation controller.
pub enum Policy<'a> {
    /// Zero-noise rollout of a trained controller.
    Learned {
        networks: &'a Networks,
        store: &'a ParameterStore,
    },
    /// Car-following control for every platoon leader. The baseline
    /// pays no connectivity overheads: link, migration, and onboard
    /// compute energies are zeroed.
    Idm,
}

fn record_world(log: &mut Vec<StepRecord>, world: &WorldState) {
    for v in &world.vehicles {
        log.push(StepRecord {
            t: world.time,
            id: v.id,
            x: v.position,
            v: v.speed,
            a: v.accel,
        });
    }
}

/// Deterministic rollout over one trajectory pass (ending early on a
/// collision), producing the full kinematic and energy log. `seed` only
/// labels the log; evaluation draws no randomness.
pub fn rollout(env: &EnvSetup, policy: Policy<'_>, seed: u64) -> Result<RunLog, RlError> {
    env.validate()?;
    let norm = NormConstants::from_scenario(&env.scenario, env.stw.d_max);
    let energy_params = match &policy {
        Policy::Learned { .. } => env.energy.clone(),
        Policy::Idm => EnergyParams {
            comm_power: 0.0,
            migration_energy_per_handoff: 0.0,
            local_compute_power: 0.0,
            ..env.energy.clone()
        },
    };
    let mut world = build_scenario(&env.scenario, &env.trajectory)?;
    let mut tracker = HandoffTracker::new();
    tracker.update(&world, env.stw.d_max);
    let mut stats = EncodeStats::default();

    let mut steps = Vec::new();
    let mut energy = Vec::new();
    record_world(&mut steps, &world);

    while world.time + env.scenario.dt <= env.trajectory.duration() + 1e-9 {
        let (actions, links) = match &policy {
            Policy::Learned { networks, store } => {
                let obs = observe(&world, &env.stw, &norm, networks.ablation, &mut stats)?;
                let actions = networks.policy_actions(store, &obs, &mut stats)?;
                (actions, comm_links(&obs))
            }
            Policy::Idm => (
                idm_actions(&world, &env.scenario),
                vec![0; world.cav_count()],
            ),
        };
        let next = sim_step(&world, &actions, &env.trajectory, &env.scenario)?;
        let targets = match &policy {
            Policy::Learned { .. } => tracker.update_with_targets(&next, env.stw.d_max),
            Policy::Idm => Vec::new(),
        };
        let rows = energy_ledger_rows(&next, &links, &targets, &energy_params);
        for (id, row) in rows.iter().enumerate() {
            energy.push(EnergyRecord {
                t: next.time,
                id,
                battery: row.battery,
                comm: row.comm,
                migration: row.migration,
                compute: row.compute,
            });
        }
        record_world(&mut steps, &next);
        world = next;
        if world.collision_flag {
            break;
        }
    }

    Ok(RunLog {
        seed,
        scenario: env.scenario.clone(),
        steps,
        energy,
        collision: world.collision_flag,
    })
}
