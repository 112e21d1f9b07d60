//! Flat key=value run configuration with env and flag overrides.
//!
//! Precedence, lowest to highest: config file, `ECOPLATOON_*` environment
//! variables, command-line flags. Env var names map to keys by stripping the
//! prefix, lowercasing, and turning `__` into `.` (`ECOPLATOON_TRAIN__SEED`
//! is `train.seed`). Unknown keys are rejected by name so typos cannot
//! silently fall back to defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use ecoplatoon::graph::weight::{StWeightParams, WeightMode};
use ecoplatoon::metrics::SummaryOptions;
use ecoplatoon::reward::energy::EnergyParams;
use ecoplatoon::reward::RewardParams;
use ecoplatoon::rl::trainer::{EnvSetup, TrainConfig};
use ecoplatoon::rl::Ablation;
use ecoplatoon::sim::idm::IdmParams;
use ecoplatoon::sim::trajectory::LeaderTrajectory;
use ecoplatoon::sim::{SafetyParams, ScenarioConfig};
use sha2::{Digest, Sha256};

use crate::usage;

pub const ENV_PREFIX: &str = "ECOPLATOON_";

/// How the lead vehicle's speed profile is built. Everything except `Csv`
/// is synthesized; `Csv` reads a `t,v` table at resolve time.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    Integrated,
    HighSpeed,
    LowSpeed,
    RapidAccel,
    EmergencyBrake,
    Constant { speed: f64, duration: f64 },
    Sinusoid { mean: f64, amp: f64, period: f64, duration: f64 },
    Csv { file: String },
}

impl TrajectorySpec {
    pub fn profile_name(&self) -> &'static str {
        match self {
            TrajectorySpec::Integrated => "integrated",
            TrajectorySpec::HighSpeed => "high-speed",
            TrajectorySpec::LowSpeed => "low-speed",
            TrajectorySpec::RapidAccel => "rapid-accel",
            TrajectorySpec::EmergencyBrake => "emergency-brake",
            TrajectorySpec::Constant { .. } => "constant",
            TrajectorySpec::Sinusoid { .. } => "sinusoid",
            TrajectorySpec::Csv { .. } => "csv",
        }
    }

    pub fn build(&self) -> Result<LeaderTrajectory> {
        Ok(match self {
            TrajectorySpec::Integrated => LeaderTrajectory::integrated(),
            TrajectorySpec::HighSpeed => LeaderTrajectory::high_speed(),
            TrajectorySpec::LowSpeed => LeaderTrajectory::low_speed(),
            TrajectorySpec::RapidAccel => LeaderTrajectory::rapid_accel(),
            TrajectorySpec::EmergencyBrake => LeaderTrajectory::emergency_brake(),
            TrajectorySpec::Constant { speed, duration } => {
                LeaderTrajectory::constant(*speed, *duration)
                    .map_err(|e| usage(format!("invalid trajectory config: {e}")))?
            }
            TrajectorySpec::Sinusoid { mean, amp, period, duration } => {
                LeaderTrajectory::sinusoid(*mean, *amp, *period, *duration)
                    .map_err(|e| usage(format!("invalid trajectory config: {e}")))?
            }
            TrajectorySpec::Csv { file } => LeaderTrajectory::from_csv_path(Path::new(file))
                .map_err(|e| usage(format!("config key 'trajectory.file': {e}")))?,
        })
    }
}

/// Fully resolved run configuration: typed parameter blocks plus the
/// canonical text snapshot and its digest for manifests.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub stw: StWeightParams,
    pub reward: RewardParams,
    pub energy: EnergyParams,
    pub train: TrainConfig,
    pub trajectory: TrajectorySpec,
    pub eval: SummaryOptions,
    pub eval_seed: u64,
    pub snapshot: String,
    pub hash: String,
}

impl RunConfig {
    /// Recomputes the snapshot and hash after a field was mutated in code
    /// (sweeps override the ablation or the fleet mix per run). Also refreshes
    /// `train.config_hash` so checkpoints carry the digest of what actually ran.
    pub fn rebuild_digest(&mut self) {
        self.snapshot = build_snapshot(self);
        self.hash = sha256_hex(self.snapshot.as_bytes());
        self.train.config_hash = self.hash.clone();
    }

    pub fn env_setup(&self) -> Result<EnvSetup> {
        let setup = EnvSetup {
            scenario: self.scenario.clone(),
            trajectory: self.trajectory.build()?,
            reward: self.reward.clone(),
            energy: self.energy.clone(),
            stw: self.stw.clone(),
        };
        setup
            .validate()
            .map_err(|e| usage(format!("invalid config: {e}")))?;
        Ok(setup)
    }
}

/// Parses the flat key=value format: one pair per line, `#` comments,
/// blank lines ignored. Duplicate keys are an error so a stale line cannot
/// shadow an edit lower in the file.
pub fn parse_config_str(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            usage(format!("config line {}: expected key=value, got '{line}'", idx + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(usage(format!("config line {}: empty key", idx + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(usage(format!("config line {}: duplicate key '{key}'", idx + 1)));
        }
    }
    Ok(map)
}

/// Collects `ECOPLATOON_*` overrides from the process environment.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::env::vars()
        .filter_map(|(name, value)| {
            let tail = name.strip_prefix(ENV_PREFIX)?;
            Some((tail.to_ascii_lowercase().replace("__", "."), value))
        })
        .collect();
    out.sort();
    out
}

/// Applies the layering: file entries, then env pairs, then flag pairs.
pub fn resolve(
    file: BTreeMap<String, String>,
    env: &[(String, String)],
    flags: &[(String, String)],
) -> BTreeMap<String, String> {
    let mut map = file;
    for (k, v) in env.iter().chain(flags.iter()) {
        map.insert(k.clone(), v.clone());
    }
    map
}

/// Loads, layers, and type-checks a run configuration.
pub fn load_run_config(path: &Path, flags: &[(String, String)]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("config not found: {} ({e})", path.display())))?;
    run_config_from_str(&text, &env_overrides(), flags)
}

/// Same as [`load_run_config`] but with explicit text and env pairs, so tests
/// can exercise the layering without touching the process environment.
pub fn run_config_from_str(
    text: &str,
    env: &[(String, String)],
    flags: &[(String, String)],
) -> Result<RunConfig> {
    let file = parse_config_str(text)?;
    let resolved = resolve(file, env, flags);
    build_run_config(resolved)
}

/// Tracks which keys the schema consumed so leftovers can be named.
struct Fields {
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Fields {
    fn new(map: BTreeMap<String, String>) -> Self {
        Fields { map, used: BTreeSet::new() }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let hit = self.map.get(key).cloned();
        if hit.is_some() {
            self.used.insert(key.to_string());
        }
        hit
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| usage(format!("config key '{key}': expected a number, got '{s}'"))),
        }
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| usage(format!("config key '{key}': expected a number, got '{s}'"))),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse::<u64>().map_err(|_| {
                usage(format!("config key '{key}': expected a non-negative integer, got '{s}'"))
            }),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse::<usize>().map_err(|_| {
                usage(format!("config key '{key}': expected a non-negative integer, got '{s}'"))
            }),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key).as_deref() {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(s) => Err(usage(format!("config key '{key}': expected true or false, got '{s}'"))),
        }
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or_else(|| default.to_string())
    }

    fn finish(self) -> Result<()> {
        let unknown: Vec<&String> =
            self.map.keys().filter(|k| !self.used.contains(*k)).collect();
        match unknown.first() {
            None => Ok(()),
            Some(first) => Err(usage(format!(
                "unknown config key '{first}' ({} unknown total)",
                unknown.len()
            ))),
        }
    }
}

fn build_run_config(resolved: BTreeMap<String, String>) -> Result<RunConfig> {
    let mut f = Fields::new(resolved);
    let d_scn = ScenarioConfig::default();
    let d_stw = StWeightParams::default();
    let d_rwd = RewardParams::default();
    let d_nrg = EnergyParams::default();
    let d_trn = TrainConfig::default();

    let scenario = ScenarioConfig {
        n_groups: f.usize("scenario.n_groups", d_scn.n_groups)?,
        avs_per_group: f.usize("scenario.avs_per_group", d_scn.avs_per_group)?,
        initial_spacing: f.f64("scenario.initial_spacing", d_scn.initial_spacing)?,
        road_length: f.f64("scenario.road_length", d_scn.road_length)?,
        dt: f.f64("scenario.dt", d_scn.dt)?,
        vehicle_length: f.f64("scenario.vehicle_length", d_scn.vehicle_length)?,
        rsu_span: f.f64("scenario.rsu_span", d_scn.rsu_span)?,
        idm: IdmParams {
            desired_speed: f.f64("idm.desired_speed", d_scn.idm.desired_speed)?,
            time_headway: f.f64("idm.time_headway", d_scn.idm.time_headway)?,
            max_accel: f.f64("idm.max_accel", d_scn.idm.max_accel)?,
            comfortable_decel: f.f64("idm.comfortable_decel", d_scn.idm.comfortable_decel)?,
            accel_exponent: f.f64("idm.accel_exponent", d_scn.idm.accel_exponent)?,
            jam_distance: f.f64("idm.jam_distance", d_scn.idm.jam_distance)?,
        },
        safety: SafetyParams {
            reaction_time: f.f64("safety.reaction_time", d_scn.safety.reaction_time)?,
            max_decel: f.f64("safety.max_decel", d_scn.safety.max_decel)?,
            standstill_margin: f.f64("safety.standstill_margin", d_scn.safety.standstill_margin)?,
        },
    };

    let mode_str = f.string("stw.mode", mode_name(d_stw.mode));
    let mode = parse_mode(&mode_str)?;
    let stw = StWeightParams {
        d_max: f.f64("stw.d_max", d_stw.d_max)?,
        v_max: f.f64("stw.v_max", d_stw.v_max)?,
        mode,
    };

    let reward = RewardParams {
        ttc_limit: f.f64("reward.ttc_limit", d_rwd.ttc_limit)?,
        desired_gap: f.f64("reward.desired_gap", d_rwd.desired_gap)?,
        accel_comfort: f.f64("reward.accel_comfort", d_rwd.accel_comfort)?,
        jerk_scale: f.f64("reward.jerk_scale", d_rwd.jerk_scale)?,
        jerk_max: f.f64("reward.jerk_max", d_rwd.jerk_max)?,
        weights: [
            f.f64("reward.weight_safe", d_rwd.weights[0])?,
            f.f64("reward.weight_task", d_rwd.weights[1])?,
            f.f64("reward.weight_comfort", d_rwd.weights[2])?,
            f.f64("reward.weight_energy", d_rwd.weights[3])?,
        ],
        reference_power: f.f64("reward.reference_power", d_rwd.reference_power)?,
        collision_penalty: f.f64("reward.collision_penalty", d_rwd.collision_penalty)?,
    };

    // The battery integrator must tick at the sim rate, so the timestep is
    // slaved to scenario.dt rather than exposed as its own key.
    let energy = EnergyParams {
        mass: f.f64("energy.mass", d_nrg.mass)?,
        drag_area: f.f64("energy.drag_area", d_nrg.drag_area)?,
        air_density: f.f64("energy.air_density", d_nrg.air_density)?,
        rolling_coeff: f.f64("energy.rolling_coeff", d_nrg.rolling_coeff)?,
        drivetrain_eff: f.f64("energy.drivetrain_eff", d_nrg.drivetrain_eff)?,
        regen_eff: f.f64("energy.regen_eff", d_nrg.regen_eff)?,
        aux_power: f.f64("energy.aux_power", d_nrg.aux_power)?,
        comm_power: f.f64("energy.comm_power", d_nrg.comm_power)?,
        migration_energy_per_handoff: f.f64(
            "energy.migration_energy_per_handoff",
            d_nrg.migration_energy_per_handoff,
        )?,
        local_compute_power: f.f64("energy.local_compute_power", d_nrg.local_compute_power)?,
        timestep: scenario.dt,
    };

    let ablation_str = f.string("train.ablation", d_trn.ablation.name());
    let ablation = Ablation::parse(&ablation_str).ok_or_else(|| {
        usage(format!(
            "config key 'train.ablation': expected one of ddpg, mgat, stw, nstw; got '{ablation_str}'"
        ))
    })?;

    let mut net = d_trn.net.clone();
    net.heads = f.usize("net.heads", net.heads)?;
    net.vv_hidden_head_dim = f.usize("net.vv_hidden_head_dim", net.vv_hidden_head_dim)?;
    net.vv_embed_dim = f.usize("net.vv_embed_dim", net.vv_embed_dim)?;
    net.ff_embed_dim = f.usize("net.ff_embed_dim", net.ff_embed_dim)?;
    net.actor_hidden = f.usize("net.actor_hidden", net.actor_hidden)?;
    net.critic_hidden = f.usize("net.critic_hidden", net.critic_hidden)?;
    net.action_bound = f.f64("net.action_bound", net.action_bound)?;

    let train = TrainConfig {
        total_steps: f.u64("train.total_steps", d_trn.total_steps)?,
        batch: f.usize("train.batch", d_trn.batch)?,
        exploration_steps: f.u64("train.exploration_steps", d_trn.exploration_steps)?,
        noise_start: f.f64("train.noise_start", d_trn.noise_start)?,
        noise_end: f.f64("train.noise_end", d_trn.noise_end)?,
        lr: f.f64("train.lr", d_trn.lr)?,
        tau: f.f64("train.tau", d_trn.tau)?,
        gamma: f.f64("train.gamma", d_trn.gamma)?,
        seed: f.u64("train.seed", d_trn.seed)?,
        ablation,
        replay_capacity: f.usize("train.replay_capacity", d_trn.replay_capacity)?,
        net,
        adam: f.bool("train.adam", d_trn.adam)?,
        freeze_encoder_in_critic: f
            .bool("train.freeze_encoder_in_critic", d_trn.freeze_encoder_in_critic)?,
        freeze_encoder_in_actor: f
            .bool("train.freeze_encoder_in_actor", d_trn.freeze_encoder_in_actor)?,
        checkpoint_every: f.u64("train.checkpoint_every", d_trn.checkpoint_every)?,
        config_hash: String::new(),
    };

    // All profile-scoped keys are consumed and format-checked up front, so
    // overriding the profile never turns a sibling key into an "unknown
    // key" rejection; inactive keys are simply dropped from the snapshot.
    let profile = f.string("trajectory.profile", "integrated");
    let speed = f.f64("trajectory.speed", 25.0)?;
    let duration = f.f64("trajectory.duration", 120.0)?;
    let mean = f.f64("trajectory.mean", 22.0)?;
    let amp = f.f64("trajectory.amp", 5.0)?;
    let period = f.f64("trajectory.period", 60.0)?;
    let file = f.raw("trajectory.file");
    let trajectory = match profile.as_str() {
        "integrated" => TrajectorySpec::Integrated,
        "high-speed" => TrajectorySpec::HighSpeed,
        "low-speed" => TrajectorySpec::LowSpeed,
        "rapid-accel" => TrajectorySpec::RapidAccel,
        "emergency-brake" => TrajectorySpec::EmergencyBrake,
        "constant" => TrajectorySpec::Constant { speed, duration },
        "sinusoid" => TrajectorySpec::Sinusoid { mean, amp, period, duration },
        "csv" => {
            let file = file.ok_or_else(|| {
                usage("config key 'trajectory.file' is required when trajectory.profile=csv")
            })?;
            TrajectorySpec::Csv { file }
        }
        other => {
            return Err(usage(format!(
                "config key 'trajectory.profile': expected one of integrated, high-speed, \
                 low-speed, rapid-accel, emergency-brake, constant, sinusoid, csv; got '{other}'"
            )))
        }
    };

    let x_star = f.f64_opt("eval.x_star")?;
    let window_start = f.f64_opt("eval.window_start")?;
    let window_end = f.f64_opt("eval.window_end")?;
    let window = match (window_start, window_end) {
        (None, None) => None,
        (Some(a), Some(b)) => Some((a, b)),
        _ => {
            return Err(usage(
                "config keys 'eval.window_start' and 'eval.window_end' must be set together",
            ))
        }
    };
    let eval = SummaryOptions { x_star, window };
    let eval_seed = f.u64("eval.seed", 0)?;

    f.finish()?;

    scenario
        .validate()
        .map_err(|e| usage(format!("invalid config: {e}")))?;
    stw.validate()
        .map_err(|e| usage(format!("invalid config: {e}")))?;
    reward
        .validate()
        .map_err(|e| usage(format!("invalid config: {e}")))?;
    train
        .validate()
        .map_err(|e| usage(format!("invalid config: {e}")))?;

    let mut run = RunConfig {
        scenario,
        stw,
        reward,
        energy,
        train,
        trajectory,
        eval,
        eval_seed,
        snapshot: String::new(),
        hash: String::new(),
    };
    run.rebuild_digest();
    Ok(run)
}

fn mode_name(mode: WeightMode) -> &'static str {
    match mode {
        WeightMode::AsWritten => "as-written",
        WeightMode::ProseConsistent => "prose",
    }
}

fn parse_mode(s: &str) -> Result<WeightMode> {
    match s {
        "as-written" => Ok(WeightMode::AsWritten),
        "prose" => Ok(WeightMode::ProseConsistent),
        other => Err(usage(format!(
            "config key 'stw.mode': expected as-written or prose, got '{other}'"
        ))),
    }
}

/// Serializes the effective configuration: every key the schema knows, with
/// the value actually in force, sorted by key. `f64::to_string` round-trips
/// bitwise, so reloading a snapshot reproduces the run even if compiled-in
/// defaults change later.
fn build_snapshot(run: &RunConfig) -> String {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| pairs.push((k.to_string(), v));

    let s = &run.scenario;
    put("scenario.n_groups", s.n_groups.to_string());
    put("scenario.avs_per_group", s.avs_per_group.to_string());
    put("scenario.initial_spacing", s.initial_spacing.to_string());
    put("scenario.road_length", s.road_length.to_string());
    put("scenario.dt", s.dt.to_string());
    put("scenario.vehicle_length", s.vehicle_length.to_string());
    put("scenario.rsu_span", s.rsu_span.to_string());
    put("idm.desired_speed", s.idm.desired_speed.to_string());
    put("idm.time_headway", s.idm.time_headway.to_string());
    put("idm.max_accel", s.idm.max_accel.to_string());
    put("idm.comfortable_decel", s.idm.comfortable_decel.to_string());
    put("idm.accel_exponent", s.idm.accel_exponent.to_string());
    put("idm.jam_distance", s.idm.jam_distance.to_string());
    put("safety.reaction_time", s.safety.reaction_time.to_string());
    put("safety.max_decel", s.safety.max_decel.to_string());
    put("safety.standstill_margin", s.safety.standstill_margin.to_string());

    put("stw.d_max", run.stw.d_max.to_string());
    put("stw.v_max", run.stw.v_max.to_string());
    put("stw.mode", mode_name(run.stw.mode).to_string());

    let r = &run.reward;
    put("reward.ttc_limit", r.ttc_limit.to_string());
    put("reward.desired_gap", r.desired_gap.to_string());
    put("reward.accel_comfort", r.accel_comfort.to_string());
    put("reward.jerk_scale", r.jerk_scale.to_string());
    put("reward.jerk_max", r.jerk_max.to_string());
    put("reward.weight_safe", r.weights[0].to_string());
    put("reward.weight_task", r.weights[1].to_string());
    put("reward.weight_comfort", r.weights[2].to_string());
    put("reward.weight_energy", r.weights[3].to_string());
    put("reward.reference_power", r.reference_power.to_string());
    put("reward.collision_penalty", r.collision_penalty.to_string());

    let e = &run.energy;
    put("energy.mass", e.mass.to_string());
    put("energy.drag_area", e.drag_area.to_string());
    put("energy.air_density", e.air_density.to_string());
    put("energy.rolling_coeff", e.rolling_coeff.to_string());
    put("energy.drivetrain_eff", e.drivetrain_eff.to_string());
    put("energy.regen_eff", e.regen_eff.to_string());
    put("energy.aux_power", e.aux_power.to_string());
    put("energy.comm_power", e.comm_power.to_string());
    put(
        "energy.migration_energy_per_handoff",
        e.migration_energy_per_handoff.to_string(),
    );
    put("energy.local_compute_power", e.local_compute_power.to_string());

    let t = &run.train;
    put("train.total_steps", t.total_steps.to_string());
    put("train.batch", t.batch.to_string());
    put("train.exploration_steps", t.exploration_steps.to_string());
    put("train.noise_start", t.noise_start.to_string());
    put("train.noise_end", t.noise_end.to_string());
    put("train.lr", t.lr.to_string());
    put("train.tau", t.tau.to_string());
    put("train.gamma", t.gamma.to_string());
    put("train.seed", t.seed.to_string());
    put("train.ablation", t.ablation.name().to_string());
    put("train.replay_capacity", t.replay_capacity.to_string());
    put("train.adam", t.adam.to_string());
    put(
        "train.freeze_encoder_in_critic",
        t.freeze_encoder_in_critic.to_string(),
    );
    put(
        "train.freeze_encoder_in_actor",
        t.freeze_encoder_in_actor.to_string(),
    );
    put("train.checkpoint_every", t.checkpoint_every.to_string());
    put("net.heads", t.net.heads.to_string());
    put("net.vv_hidden_head_dim", t.net.vv_hidden_head_dim.to_string());
    put("net.vv_embed_dim", t.net.vv_embed_dim.to_string());
    put("net.ff_embed_dim", t.net.ff_embed_dim.to_string());
    put("net.actor_hidden", t.net.actor_hidden.to_string());
    put("net.critic_hidden", t.net.critic_hidden.to_string());
    put("net.action_bound", t.net.action_bound.to_string());

    put("trajectory.profile", run.trajectory.profile_name().to_string());
    match &run.trajectory {
        TrajectorySpec::Constant { speed, duration } => {
            put("trajectory.speed", speed.to_string());
            put("trajectory.duration", duration.to_string());
        }
        TrajectorySpec::Sinusoid { mean, amp, period, duration } => {
            put("trajectory.mean", mean.to_string());
            put("trajectory.amp", amp.to_string());
            put("trajectory.period", period.to_string());
            put("trajectory.duration", duration.to_string());
        }
        TrajectorySpec::Csv { file } => put("trajectory.file", file.clone()),
        _ => {}
    }

    if let Some(x) = run.eval.x_star {
        put("eval.x_star", x.to_string());
    }
    if let Some((a, b)) = run.eval.window {
        put("eval.window_start", a.to_string());
        put("eval.window_end", b.to_string());
    }
    put("eval.seed", run.eval_seed.to_string());

    pairs.sort();
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}
