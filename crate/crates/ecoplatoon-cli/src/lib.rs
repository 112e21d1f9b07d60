//! Command implementations behind the `ecoplatoon` binary.
//!
//! Every command is an ordinary function taking typed arguments and
//! returning a report string, so integration tests drive them without
//! spawning processes. File layout per training run directory:
//!
//! ```text
//! out/
//!   config.txt        effective configuration, sorted key=value
//!   manifest.txt      digest, seed, variant, run shape
//!   episodes.csv      one row per completed episode
//!   encode_stats.txt  encoder instrumentation counters
//!   ckpt_final.bin    parameters at the last step
//!   ckpt_<step>.bin   periodic checkpoints when train.checkpoint_every > 0
//! ```
//!
//! Evaluation directories hold `summary.txt`, `spacetime.csv`, `speeds.csv`,
//! `energy.csv`, the two histogram CSVs, and their own `manifest.txt`.

pub mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use ecoplatoon::graph::spectral::{
    disjoint_triangles, nested_entropy, six_cycle, spectral_entropy, subgraph_entropies,
    uniform_weights,
};
use ecoplatoon::graph::dump::{parse_dump, write_dump};
use ecoplatoon::graph::intensity::nested_intensity;
use ecoplatoon::graph::wl::indistinguishable;
use ecoplatoon::graph::{NestedTrafficGraph, NormConstants};
use ecoplatoon::metrics::export::{
    export_energy_ledger, export_histogram, export_spacetime, export_speed_traces,
};
use ecoplatoon::metrics::{accel_jerk_distributions, summary, Summary, SUMMARY_COLUMNS};
use ecoplatoon::nn::store::{load_checkpoint, write_checkpoint, CheckpointMeta, UpdateRule};
use ecoplatoon::rl::networks::{observe, EncodeStats, Networks};
use ecoplatoon::rl::trainer::{rollout, train, EpisodeStats, Policy, TrainObserver};
use ecoplatoon::rl::Ablation;
use ecoplatoon::sim::build_scenario;
use rand_chacha::rand_core::SeedableRng;

use config::RunConfig;

/// Marker for operator mistakes: bad flags, malformed or missing
/// configuration, refusals that the caller can fix by changing inputs.
/// `main` maps these to exit code 1; any other failure exits 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    if err.chain().any(|c| c.downcast_ref::<UsageError>().is_some()) {
        1
    } else {
        2
    }
}

/// Creates `out`, refusing to clobber existing content unless forced.
fn prepare_run_dir(out: &Path, force: bool) -> Result<()> {
    if out.is_file() {
        return Err(usage(format!(
            "output path {} exists and is not a directory",
            out.display()
        )));
    }
    if out.is_dir() {
        let occupied = fs::read_dir(out)
            .with_context(|| format!("reading {}", out.display()))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(usage(format!(
                "output directory {} is not empty; pass --force to overwrite",
                out.display()
            )));
        }
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn encode_stats_kv(stats: &EncodeStats) -> String {
    format!(
        "vv_attention_passes={}\nff_attention_passes={}\nst_weight_evals={}\nraw_bypass_encodes={}\n",
        stats.vv_attention_passes,
        stats.ff_attention_passes,
        stats.st_weight_evals,
        stats.raw_bypass_encodes
    )
}

/// Streams episode rows and periodic checkpoints to the run directory.
/// Observer hooks cannot return errors, so the first io failure is stashed
/// and surfaced after training finishes.
struct FileObserver {
    dir: PathBuf,
    episodes: Vec<EpisodeStats>,
    checkpoints: u64,
    io_error: Option<anyhow::Error>,
}

impl FileObserver {
    fn new(dir: &Path) -> Self {
        FileObserver {
            dir: dir.to_path_buf(),
            episodes: Vec::new(),
            checkpoints: 0,
            io_error: None,
        }
    }
}

impl TrainObserver for FileObserver {
    fn on_episode(&mut self, stats: &EpisodeStats) {
        self.episodes.push(stats.clone());
    }

    fn on_checkpoint(&mut self, step: u64, text: &str) {
        let path = self.dir.join(format!("ckpt_{step:09}.bin"));
        if let Err(e) = write_file(&path, text) {
            if self.io_error.is_none() {
                self.io_error = Some(e);
            }
        }
        self.checkpoints += 1;
    }
}

pub fn cmd_train(cfg: &RunConfig, out: &Path, force: bool) -> Result<String> {
    prepare_run_dir(out, force)?;
    let env = cfg.env_setup()?;
    write_file(&out.join("config.txt"), &cfg.snapshot)?;

    let mut observer = FileObserver::new(out);
    let outcome = train(&cfg.train, &env, &mut observer).context("training failed")?;
    if let Some(e) = observer.io_error {
        return Err(e);
    }

    let mut episodes = String::from(EpisodeStats::CSV_HEADER);
    episodes.push('\n');
    for ep in &observer.episodes {
        episodes.push_str(&ep.to_csv_row());
        episodes.push('\n');
    }
    write_file(&out.join("episodes.csv"), &episodes)?;
    write_file(&out.join("encode_stats.txt"), &encode_stats_kv(&outcome.encode_stats))?;

    let norm = NormConstants::from_scenario(&cfg.scenario, cfg.stw.d_max);
    let meta = CheckpointMeta {
        config_hash: cfg.hash.clone(),
        seed: cfg.train.seed,
        step: outcome.steps_run,
        ablation: cfg.train.ablation.name().to_string(),
        norm: [
            norm.road_length,
            norm.speed_cap,
            norm.accel_cap,
            norm.d_max,
            norm.vehicle_length,
        ],
    };
    write_file(&out.join("ckpt_final.bin"), &write_checkpoint(&outcome.store, &meta))?;

    let manifest = format!(
        "kind=train\nconfig_hash={}\nseed={}\nablation={}\nsteps_run={}\nepisodes={}\nperiodic_checkpoints={}\n",
        cfg.hash,
        cfg.train.seed,
        cfg.train.ablation.name(),
        outcome.steps_run,
        observer.episodes.len(),
        observer.checkpoints
    );
    write_file(&out.join("manifest.txt"), &manifest)?;

    let tail = observer
        .episodes
        .last()
        .map(|ep| format!(", last episode mean reward {:.4}", ep.mean_reward))
        .unwrap_or_default();
    Ok(format!(
        "trained variant {} for {} steps ({} completed episodes{tail}); run dir {}",
        cfg.train.ablation.name(),
        outcome.steps_run,
        observer.episodes.len(),
        out.display()
    ))
}

/// What `eval` runs: a trained checkpoint or the car-following baseline.
pub enum EvalTarget {
    BaselineIdm,
    Checkpoint(PathBuf),
}

fn update_rule(cfg: &RunConfig) -> UpdateRule {
    if cfg.train.adam {
        UpdateRule::adam(cfg.train.lr)
    } else {
        UpdateRule::sgd(cfg.train.lr)
    }
}

pub fn cmd_eval(cfg: &RunConfig, target: &EvalTarget, out: &Path, force: bool) -> Result<String> {
    prepare_run_dir(out, force)?;
    let env = cfg.env_setup()?;

    let (log, target_desc) = match target {
        EvalTarget::BaselineIdm => {
            let log = rollout(&env, Policy::Idm, cfg.eval_seed).context("baseline rollout failed")?;
            (log, "target=idm\n".to_string())
        }
        EvalTarget::Checkpoint(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("checkpoint not found: {} ({e})", path.display())))?;
            let (store, meta) =
                load_checkpoint(&text, update_rule(cfg)).context("reading checkpoint")?;
            if meta.ablation != cfg.train.ablation.name() {
                return Err(usage(format!(
                    "checkpoint was trained with variant '{}' but the config requests '{}'",
                    meta.ablation,
                    cfg.train.ablation.name()
                )));
            }
            let mut scratch = ecoplatoon::nn::store::ParameterStore::new(update_rule(cfg));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
            let networks = Networks::init(
                &mut scratch,
                &mut rng,
                cfg.train.ablation,
                cfg.train.net.clone(),
            )
            .context("building network for evaluation")?;
            store.validate_shapes(&networks.shapes()).map_err(|e| {
                usage(format!(
                    "checkpoint does not match the configured architecture: {e}"
                ))
            })?;
            let log = rollout(
                &env,
                Policy::Learned {
                    networks: &networks,
                    store: &store,
                },
                cfg.eval_seed,
            )
            .context("rollout failed")?;
            (
                log,
                format!(
                    "target=checkpoint\ncheckpoint={}\ncheckpoint_hash={}\ncheckpoint_step={}\n",
                    path.display(),
                    meta.config_hash,
                    meta.step
                ),
            )
        }
    };

    let report = summary(&log, &cfg.eval).context("summarizing rollout")?;
    write_file(&out.join("summary.txt"), &report.to_kv_string())?;
    write_file(&out.join("spacetime.csv"), &export_spacetime(&log))?;
    write_file(&out.join("speeds.csv"), &export_speed_traces(&log))?;
    write_file(&out.join("energy.csv"), &export_energy_ledger(&log.energy))?;
    let aj = accel_jerk_distributions(&log).context("building distributions")?;
    write_file(&out.join("accel_hist.csv"), &export_histogram(&aj.accel_hist))?;
    write_file(&out.join("jerk_hist.csv"), &export_histogram(&aj.jerk_hist))?;

    let manifest = format!(
        "kind=eval\nconfig_hash={}\nseed={}\nablation={}\n{}collision={}\n",
        cfg.hash,
        cfg.eval_seed,
        cfg.train.ablation.name(),
        target_desc,
        log.collision
    );
    write_file(&out.join("manifest.txt"), &manifest)?;

    Ok(format!(
        "evaluated {}: throughput {:.1} veh/h, min speed {:.2} m/s, collision {}; outputs in {}",
        match target {
            EvalTarget::BaselineIdm => "idm baseline".to_string(),
            EvalTarget::Checkpoint(p) => p.display().to_string(),
        },
        report.throughput,
        report.v_min,
        log.collision,
        out.display()
    ))
}

/// Columns where larger is better; every other summary column improves
/// downward. theta is the safety margin, so its level rises with safety
/// while its spread should still shrink.
const HIGHER_BETTER: [&str; 5] = ["throughput", "v_min", "accel_min", "theta_max", "theta_mean"];

fn run_label(dir: &Path) -> String {
    let parts: Vec<&str> = dir
        .components()
        .filter_map(|c| match c {
            std::path::Component::Normal(s) => s.to_str(),
            _ => None,
        })
        .collect();
    match parts.len() {
        0 => dir.display().to_string(),
        1 => parts[0].to_string(),
        n => format!("{}/{}", parts[n - 2], parts[n - 1]),
    }
}

pub fn cmd_compare(dirs: &[PathBuf]) -> Result<String> {
    if dirs.len() < 2 {
        return Err(usage(format!(
            "compare needs at least two run directories, got {}",
            dirs.len()
        )));
    }
    let mut labels = Vec::new();
    let mut rows: Vec<[f64; 14]> = Vec::new();
    for dir in dirs {
        let path = dir.join("summary.txt");
        let text = fs::read_to_string(&path)
            .map_err(|e| usage(format!("no summary at {} ({e})", path.display())))?;
        let s = Summary::from_kv_str(&text)
            .map_err(|e| anyhow!("{}: {e}", path.display()))?;
        labels.push(run_label(dir));
        rows.push(s.values());
    }

    // Best value per column; ties all get the mark so identical runs
    // render identically.
    let mut best = [f64::NAN; 14];
    for (c, col) in SUMMARY_COLUMNS.iter().enumerate() {
        let higher = HIGHER_BETTER.contains(col);
        for row in &rows {
            let v = row[c];
            if v.is_nan() {
                continue;
            }
            if best[c].is_nan() || (higher && v > best[c]) || (!higher && v < best[c]) {
                best[c] = v;
            }
        }
    }

    let mut cells: Vec<Vec<String>> = Vec::new();
    for row in &rows {
        let mut line = Vec::new();
        for (c, v) in row.iter().enumerate() {
            let mark = if !v.is_nan() && *v == best[c] { "*" } else { "" };
            line.push(format!("{v:.4}{mark}"));
        }
        cells.push(line);
    }

    let mut widths: Vec<usize> = SUMMARY_COLUMNS.iter().map(|c| c.len()).collect();
    for line in &cells {
        for (c, cell) in line.iter().enumerate() {
            widths[c] = widths[c].max(cell.len());
        }
    }
    let label_w = labels
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(3)
        .max("run".len());

    let mut out = String::new();
    out.push_str(&format!("{:label_w$}", "run"));
    for (c, col) in SUMMARY_COLUMNS.iter().enumerate() {
        out.push_str(&format!("  {:>w$}", col, w = widths[c]));
    }
    out.push('\n');
    for (label, line) in labels.iter().zip(&cells) {
        out.push_str(&format!("{label:label_w$}"));
        for (c, cell) in line.iter().enumerate() {
            out.push_str(&format!("  {:>w$}", cell, w = widths[c]));
        }
        out.push('\n');
    }
    out.push_str(
        "* best per column; higher is better for throughput, v_min, accel_min, theta_max, theta_mean\n",
    );
    Ok(out)
}

/// Input to `analyze-graph`: the built-in two-triangles demo, a graph dump
/// file, or a scenario snapshot built from a config.
pub enum AnalyzeTarget {
    Demo,
    Dump(PathBuf),
    Config(Box<RunConfig>),
}

fn initial_graph(cfg: &RunConfig) -> Result<NestedTrafficGraph> {
    let traj = cfg.trajectory.build()?;
    let world = build_scenario(&cfg.scenario, &traj).context("building scenario")?;
    let norm = NormConstants::from_scenario(&cfg.scenario, cfg.stw.d_max);
    let mut stats = EncodeStats::default();
    observe(&world, &cfg.stw, &norm, cfg.train.ablation, &mut stats)
        .context("building nested graph")
}

fn nested_report(g: &NestedTrafficGraph) -> Result<String> {
    let platoon_entropies = subgraph_entropies(g, false).context("platoon entropies")?;
    let with_ff = subgraph_entropies(g, true).context("subgraph entropies")?;
    let weights = uniform_weights(with_ff.len());
    let nested = nested_entropy(&with_ff, &weights).context("nested entropy")?;
    let intensity = nested_intensity(g).context("information intensity")?;

    let mut out = String::new();
    out.push_str(&format!(
        "nested graph: {} platoons, {} vehicles\n",
        g.platoon_count(),
        g.vv.features.rows()
    ));
    for (p, h) in platoon_entropies.iter().enumerate() {
        out.push_str(&format!("platoon {p}: spectral entropy {h:.9} nats\n"));
    }
    let ff_h = with_ff.last().copied().unwrap_or(0.0);
    out.push_str(&format!("platoon-level graph: spectral entropy {ff_h:.9} nats\n"));
    out.push_str(&format!("nested entropy (uniform weights): {nested:.9} nats\n"));
    out.push_str(&format!(
        "information intensity: intra {:.6}, inter {:.6}, total {:.6}\n",
        intensity.intra, intensity.inter, intensity.total
    ));
    Ok(out)
}

pub fn cmd_analyze_graph(target: &AnalyzeTarget) -> Result<String> {
    match target {
        AnalyzeTarget::Demo => {
            let tri = disjoint_triangles();
            let hex = six_cycle();
            let h_tri = spectral_entropy(&tri).context("triangle entropy")?;
            let h_hex = spectral_entropy(&hex).context("cycle entropy")?;
            let same_colors = indistinguishable(&tri, &hex);
            let mut out = String::new();
            out.push_str(&format!(
                "two disjoint triangles: spectral entropy {h_tri:.9} nats\n"
            ));
            out.push_str(&format!(
                "six-node cycle:         spectral entropy {h_hex:.9} nats\n"
            ));
            out.push_str(&format!("entropy gap:            {:.9}\n", (h_hex - h_tri).abs()));
            out.push_str(&format!(
                "1-WL color multisets:   {}\n",
                if same_colors {
                    "identical (color refinement cannot separate these graphs)"
                } else {
                    "different"
                }
            ));
            Ok(out)
        }
        AnalyzeTarget::Dump(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("graph dump not found: {} ({e})", path.display())))?;
            let (g, _norm) = parse_dump(&text).map_err(|e| usage(format!("bad graph dump: {e}")))?;
            nested_report(&g)
        }
        AnalyzeTarget::Config(cfg) => {
            let g = initial_graph(cfg)?;
            nested_report(&g)
        }
    }
}

pub fn cmd_export(cfg: &RunConfig, out_file: &Path, force: bool) -> Result<String> {
    if out_file.exists() && !force {
        return Err(usage(format!(
            "output file {} exists; pass --force to overwrite",
            out_file.display()
        )));
    }
    let g = initial_graph(cfg)?;
    let norm = NormConstants::from_scenario(&cfg.scenario, cfg.stw.d_max);
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    write_file(out_file, &write_dump(&g, &norm))?;
    Ok(format!(
        "wrote nested graph dump ({} platoons, {} vehicles) to {}",
        g.platoon_count(),
        g.vv.features.rows(),
        out_file.display()
    ))
}

/// One sweep entry: run name, the config to use, and whether it trains a
/// controller (the idm entry only evaluates the baseline).
fn sweep_plan(cfg: &RunConfig, dimension: &str) -> Result<Vec<(String, RunConfig, bool)>> {
    match dimension {
        "ablation" => {
            let mut plan = vec![("idm".to_string(), cfg.clone(), false)];
            for ab in Ablation::ALL {
                let mut c = cfg.clone();
                c.train.ablation = ab;
                c.rebuild_digest();
                plan.push((ab.name().to_string(), c, true));
            }
            Ok(plan)
        }
        "penetration" => {
            // Controller share of a fixed 201-vehicle fleet: one lead
            // vehicle plus n_groups * (1 + avs_per_group) followers.
            let mixes = [("pen05", 10usize, 19usize), ("pen10", 20, 9), ("pen20", 40, 4)];
            let mut plan = Vec::new();
            for (name, n_groups, avs) in mixes {
                let mut c = cfg.clone();
                c.scenario.n_groups = n_groups;
                c.scenario.avs_per_group = avs;
                c.scenario
                    .validate()
                    .map_err(|e| usage(format!("penetration sweep config: {e}")))?;
                c.rebuild_digest();
                plan.push((name.to_string(), c, true));
            }
            Ok(plan)
        }
        other => Err(usage(format!(
            "unknown sweep dimension '{other}'; expected ablation or penetration"
        ))),
    }
}

fn sweep_run(rcfg: &RunConfig, dir: &Path, trains: bool) -> Result<String> {
    if trains {
        let line = cmd_train(rcfg, dir, true)?;
        cmd_eval(
            rcfg,
            &EvalTarget::Checkpoint(dir.join("ckpt_final.bin")),
            &dir.join("eval"),
            true,
        )?;
        Ok(line)
    } else {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_file(&dir.join("config.txt"), &rcfg.snapshot)?;
        write_file(&dir.join("encode_stats.txt"), &encode_stats_kv(&EncodeStats::default()))?;
        let manifest = format!(
            "kind=baseline\nconfig_hash={}\nseed={}\nablation=idm\n",
            rcfg.hash, rcfg.eval_seed
        );
        write_file(&dir.join("manifest.txt"), &manifest)?;
        cmd_eval(rcfg, &EvalTarget::BaselineIdm, &dir.join("eval"), true)
    }
}

pub fn cmd_sweep(cfg: &RunConfig, dimension: &str, out: &Path, force: bool) -> Result<String> {
    let plan = sweep_plan(cfg, dimension)?;
    prepare_run_dir(out, force)?;

    let mut lines = Vec::new();
    let mut eval_dirs = Vec::new();
    for (name, rcfg, trains) in &plan {
        let dir = out.join(name);
        // One bad run must not sink the sweep; failures are reported in
        // the roll-up and the remaining runs still execute.
        match sweep_run(rcfg, &dir, *trains) {
            Ok(_) => {
                lines.push(format!("{name}: ok"));
                eval_dirs.push(dir.join("eval"));
            }
            Err(e) => lines.push(format!("{name}: FAILED: {e:#}")),
        }
    }

    if eval_dirs.len() >= 2 {
        let table = cmd_compare(&eval_dirs)?;
        write_file(&out.join("comparison.txt"), &table)?;
        lines.push(format!("comparison written to {}", out.join("comparison.txt").display()));
    } else {
        lines.push("too few successful runs for a comparison".to_string());
    }
    Ok(lines.join("\n"))
}
