//! Evaluation battery over completed rollout logs: spacing stability,
//! speed fluctuation, throughput, acceleration/jerk distributions, and
//! energy per meter, plus a one-record summary mirroring the standard
//! results-table layout.
//!
//! Everything here is pure post-processing over an immutable [`RunLog`];
//! identical logs give identical outputs.

pub mod export;

use std::collections::BTreeMap;
use std::error::Error;
use std::fmt;

use crate::sim::{safe_distance, ScenarioConfig};

#[derive(Debug)]
pub enum MetricsError {
    Empty(String),
    Window(String),
    Parse { line: usize, msg: String },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::Empty(what) => write!(f, "no data: {what}"),
            MetricsError::Window(msg) => write!(f, "bad window: {msg}"),
            MetricsError::Parse { line, msg } => write!(f, "line {line}: {msg}"),
        }
    }
}

impl Error for MetricsError {}

/// One vehicle's kinematic state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub id: usize,
    pub x: f64,
    pub v: f64,
    pub a: f64,
}

/// One vehicle's energy spend over one step, all entries <= 0 J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub id: usize,
    pub battery: f64,
    pub comm: f64,
    pub migration: f64,
    pub compute: f64,
}

impl EnergyRecord {
    pub fn total(&self) -> f64 {
        self.battery + self.comm + self.migration + self.compute
    }
}

/// Complete record of one rollout: kinematics and energy for every
/// vehicle at every logged instant, plus the scenario that produced it.
/// Records are dense per vehicle and sorted by (t, id).
#[derive(Debug, Clone)]
pub struct RunLog {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub steps: Vec<StepRecord>,
    pub energy: Vec<EnergyRecord>,
    pub collision: bool,
}

impl RunLog {
    /// Per-vehicle time series, each sorted by t.
    pub fn by_vehicle(&self) -> BTreeMap<usize, Vec<StepRecord>> {
        let mut map: BTreeMap<usize, Vec<StepRecord>> = BTreeMap::new();
        for r in &self.steps {
            map.entry(r.id).or_default().push(*r);
        }
        map
    }

    pub fn time_span(&self) -> Option<(f64, f64)> {
        let first = self.steps.first()?.t;
        let last = self.steps.last()?.t;
        Some((first, last))
    }
}

/// Max / mean / population standard deviation of a sample set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stats {
    /// Population (not sample) standard deviation.
    pub fn from_samples(samples: &[f64]) -> Option<Stats> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Stats {
            max,
            mean,
            std: var.sqrt(),
            count: samples.len(),
        })
    }
}

/// Vehicles per hour crossing `x_star`, counted as upward position
/// crossings inside the (t0, t1] window and scaled to an hourly rate.
pub fn throughput(
    steps: &[StepRecord],
    x_star: f64,
    t0: f64,
    t1: f64,
) -> Result<f64, MetricsError> {
    if !(t1 > t0) {
        return Err(MetricsError::Window(format!(
            "window ({t0}, {t1}] is empty"
        )));
    }
    let mut by_vehicle: BTreeMap<usize, Vec<&StepRecord>> = BTreeMap::new();
    for r in steps {
        by_vehicle.entry(r.id).or_default().push(r);
    }
    if by_vehicle.is_empty() {
        return Err(MetricsError::Empty("no step records".into()));
    }
    let mut crossings = 0u64;
    for series in by_vehicle.values() {
        for pair in series.windows(2) {
            let (prev, next) = (pair[0], pair[1]);
            if prev.x < x_star && next.x >= x_star && next.t > t0 && next.t <= t1 {
                crossings += 1;
            }
        }
    }
    Ok(crossings as f64 * 3600.0 / (t1 - t0))
}

/// Spacing statistics over every connected vehicle and logged step.
///
/// `cav_gap` is the bumper gap from each connected vehicle to the
/// vehicle directly ahead; `platoon_spacing` is the distance from each
/// platoon to the rear of the preceding formation, which in a single
/// lane is measured by the same leader-gap samples and is emitted under
/// its own name. `theta_safe` is gap minus the dynamic safe distance.
#[derive(Debug, Clone)]
pub struct SpacingReport {
    pub cav_gap: Stats,
    pub platoon_spacing: Stats,
    pub theta_safe: Stats,
}

pub fn spacing_stats(log: &RunLog) -> Result<SpacingReport, MetricsError> {
    let by_vehicle = log.by_vehicle();
    let mut gaps = Vec::new();
    let mut margins = Vec::new();
    let cavs: Vec<usize> = log
        .scenario
        .group_layout()
        .iter()
        .map(|g| g.cav)
        .collect();
    for &cav in &cavs {
        let ego = by_vehicle
            .get(&cav)
            .ok_or_else(|| MetricsError::Empty(format!("no records for vehicle {cav}")))?;
        let front = by_vehicle
            .get(&(cav - 1))
            .ok_or_else(|| MetricsError::Empty(format!("no records for vehicle {}", cav - 1)))?;
        if ego.len() != front.len() {
            return Err(MetricsError::Empty(format!(
                "vehicle {cav} has {} records but its leader has {}",
                ego.len(),
                front.len()
            )));
        }
        for (e, f) in ego.iter().zip(front) {
            let gap = f.x - e.x - log.scenario.vehicle_length;
            gaps.push(gap);
            margins.push(gap - safe_distance(e.v, f.v, &log.scenario.safety));
        }
    }
    let gap_stats =
        Stats::from_samples(&gaps).ok_or_else(|| MetricsError::Empty("no gap samples".into()))?;
    let theta = Stats::from_samples(&margins)
        .ok_or_else(|| MetricsError::Empty("no margin samples".into()))?;
    Ok(SpacingReport {
        cav_gap: gap_stats,
        platoon_spacing: gap_stats,
        theta_safe: theta,
    })
}

/// Fixed-width histogram keyed by bin index (floor(value / width)).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: BTreeMap<i64, u64>,
}

impl Histogram {
    pub fn new(bin_width: f64) -> Self {
        Histogram {
            bin_width,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, value: f64) {
        let bin = (value / self.bin_width).floor() as i64;
        *self.counts.entry(bin).or_insert(0) += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Inclusive lower edge of a bin.
    pub fn edge(&self, bin: i64) -> f64 {
        bin as f64 * self.bin_width
    }
}

pub const ACCEL_BIN_WIDTH: f64 = 0.1;
pub const JERK_BIN_WIDTH: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct AccelJerkReport {
    pub accel_hist: Histogram,
    pub jerk_hist: Histogram,
    pub accel_max: f64,
    pub accel_min: f64,
    pub jerk_max_abs: f64,
    pub jerk_mean_abs: f64,
}

/// Acceleration and jerk distributions over all vehicles and steps.
/// Jerk is the backward difference of acceleration; the first sample of
/// each vehicle has no predecessor and is defined as 0.
pub fn accel_jerk_distributions(log: &RunLog) -> Result<AccelJerkReport, MetricsError> {
    let by_vehicle = log.by_vehicle();
    if by_vehicle.is_empty() {
        return Err(MetricsError::Empty("no step records".into()));
    }
    let mut accel_hist = Histogram::new(ACCEL_BIN_WIDTH);
    let mut jerk_hist = Histogram::new(JERK_BIN_WIDTH);
    let mut accel_max = f64::NEG_INFINITY;
    let mut accel_min = f64::INFINITY;
    let mut jerk_max_abs: f64 = 0.0;
    let mut jerk_abs_sum = 0.0;
    let mut jerk_count = 0usize;
    for series in by_vehicle.values() {
        for (k, r) in series.iter().enumerate() {
            accel_hist.add(r.a);
            accel_max = accel_max.max(r.a);
            accel_min = accel_min.min(r.a);
            let jerk = if k == 0 {
                0.0
            } else {
                let prev = &series[k - 1];
                (r.a - prev.a) / (r.t - prev.t)
            };
            jerk_hist.add(jerk);
            jerk_max_abs = jerk_max_abs.max(jerk.abs());
            jerk_abs_sum += jerk.abs();
            jerk_count += 1;
        }
    }
    Ok(AccelJerkReport {
        accel_hist,
        jerk_hist,
        accel_max,
        accel_min,
        jerk_max_abs,
        jerk_mean_abs: jerk_abs_sum / jerk_count as f64,
    })
}

/// Energy per meter for one vehicle group and for the whole fleet.
#[derive(Debug, Clone)]
pub struct EnergyPerMeter {
    /// Platoon index -> J/m, absent when the group covered no distance.
    pub per_group: Vec<Option<f64>>,
    pub fleet: Option<f64>,
}

/// Positive joules per meter: total ledger energy of the members divided
/// by their total distance covered.
pub fn energy_per_meter(log: &RunLog) -> Result<EnergyPerMeter, MetricsError> {
    if log.energy.is_empty() {
        return Err(MetricsError::Empty("no energy ledger".into()));
    }
    let by_vehicle = log.by_vehicle();
    let distance = |id: usize| -> f64 {
        by_vehicle
            .get(&id)
            .and_then(|s| Some(s.last()?.x - s.first()?.x))
            .unwrap_or(0.0)
    };
    let mut spent_by_vehicle: BTreeMap<usize, f64> = BTreeMap::new();
    for e in &log.energy {
        *spent_by_vehicle.entry(e.id).or_insert(0.0) += -e.total();
    }

    let groups = log.scenario.group_layout();
    let mut per_group = Vec::with_capacity(groups.len());
    for g in &groups {
        let members: Vec<usize> = std::iter::once(g.cav).chain(g.avs.iter().copied()).collect();
        let spent: f64 = members
            .iter()
            .map(|id| spent_by_vehicle.get(id).copied().unwrap_or(0.0))
            .sum();
        let dist: f64 = members.iter().map(|&id| distance(id)).sum();
        per_group.push((dist > 0.0).then_some(spent / dist));
    }

    let fleet_spent: f64 = spent_by_vehicle.values().sum();
    let fleet_dist: f64 = by_vehicle.keys().map(|&id| distance(id)).sum();
    Ok(EnergyPerMeter {
        per_group,
        fleet: (fleet_dist > 0.0).then_some(fleet_spent / fleet_dist),
    })
}

/// One results-table record. Column order is fixed: gap max/mean/std,
/// throughput, minimum speed, accel max/min, jerk max/mean, energy
/// max/min across groups, safety margin max/mean/std.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub gap_max: f64,
    pub gap_mean: f64,
    pub gap_std: f64,
    pub throughput: f64,
    pub v_min: f64,
    pub accel_max: f64,
    pub accel_min: f64,
    pub jerk_max: f64,
    pub jerk_mean: f64,
    pub energy_max: f64,
    pub energy_min: f64,
    pub theta_max: f64,
    pub theta_mean: f64,
    pub theta_std: f64,
}

pub const SUMMARY_COLUMNS: [&str; 14] = [
    "gap_max",
    "gap_mean",
    "gap_std",
    "throughput",
    "v_min",
    "accel_max",
    "accel_min",
    "jerk_max",
    "jerk_mean",
    "energy_max",
    "energy_min",
    "theta_max",
    "theta_mean",
    "theta_std",
];

impl Summary {
    pub fn values(&self) -> [f64; 14] {
        [
            self.gap_max,
            self.gap_mean,
            self.gap_std,
            self.throughput,
            self.v_min,
            self.accel_max,
            self.accel_min,
            self.jerk_max,
            self.jerk_mean,
            self.energy_max,
            self.energy_min,
            self.theta_max,
            self.theta_mean,
            self.theta_std,
        ]
    }

    /// Key-value export; floats round-trip exactly through parse.
    pub fn to_kv_string(&self) -> String {
        SUMMARY_COLUMNS
            .iter()
            .zip(self.values())
            .map(|(k, v)| format!("{k} {v}\n"))
            .collect()
    }

    pub fn from_kv_str(text: &str) -> Result<Summary, MetricsError> {
        let mut values = [f64::NAN; 14];
        let mut seen = [false; 14];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(' ').ok_or(MetricsError::Parse {
                line: lineno + 1,
                msg: "expected `key value`".into(),
            })?;
            let idx = SUMMARY_COLUMNS
                .iter()
                .position(|c| *c == key)
                .ok_or_else(|| MetricsError::Parse {
                    line: lineno + 1,
                    msg: format!("unknown column {key}"),
                })?;
            values[idx] = value.trim().parse().map_err(|e| MetricsError::Parse {
                line: lineno + 1,
                msg: format!("bad value: {e}"),
            })?;
            seen[idx] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(MetricsError::Parse {
                line: 0,
                msg: format!("missing column {}", SUMMARY_COLUMNS[missing]),
            });
        }
        Ok(Summary {
            gap_max: values[0],
            gap_mean: values[1],
            gap_std: values[2],
            throughput: values[3],
            v_min: values[4],
            accel_max: values[5],
            accel_min: values[6],
            jerk_max: values[7],
            jerk_mean: values[8],
            energy_max: values[9],
            energy_min: values[10],
            theta_max: values[11],
            theta_mean: values[12],
            theta_std: values[13],
        })
    }
}

/// Where throughput is measured: road midpoint, over the run minus the
/// leading 10% warm-up, unless overridden.
#[derive(Debug, Clone, Copy, Default)]
pub struct SummaryOptions {
    pub x_star: Option<f64>,
    pub window: Option<(f64, f64)>,
}

pub fn summary(log: &RunLog, opts: &SummaryOptions) -> Result<Summary, MetricsError> {
    let spacing = spacing_stats(log)?;
    let aj = accel_jerk_distributions(log)?;
    let energy = energy_per_meter(log)?;
    let (t_first, t_last) = log
        .time_span()
        .ok_or_else(|| MetricsError::Empty("no step records".into()))?;
    let x_star = opts.x_star.unwrap_or(log.scenario.road_length / 2.0);
    let (t0, t1) = opts
        .window
        .unwrap_or((t_first + 0.1 * (t_last - t_first), t_last));
    let q = throughput(&log.steps, x_star, t0, t1)?;
    let v_min = log
        .steps
        .iter()
        .map(|r| r.v)
        .fold(f64::INFINITY, f64::min);
    let group_values: Vec<f64> = energy.per_group.iter().filter_map(|g| *g).collect();
    let (energy_max, energy_min) = if group_values.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            group_values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            group_values.iter().copied().fold(f64::INFINITY, f64::min),
        )
    };
    Ok(Summary {
        gap_max: spacing.cav_gap.max,
        gap_mean: spacing.cav_gap.mean,
        gap_std: spacing.cav_gap.std,
        throughput: q,
        v_min,
        accel_max: aj.accel_max,
        accel_min: aj.accel_min,
        jerk_max: aj.jerk_max_abs,
        jerk_mean: aj.jerk_mean_abs,
        energy_max,
        energy_min,
        theta_max: spacing.theta_safe.max,
        theta_mean: spacing.theta_safe.mean,
        theta_std: spacing.theta_safe.std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SafetyParams;

    /// Convoy of `n` vehicles at constant speed and headway, logged for
    /// `steps` steps of `dt`, starting behind x = 0.
    fn convoy_log(n: usize, speed: f64, spacing: f64, steps: usize, dt: f64) -> RunLog {
        let scenario = ScenarioConfig {
            n_groups: 1,
            avs_per_group: n.saturating_sub(2),
            initial_spacing: spacing,
            road_length: 1.0e5,
            dt,
            ..ScenarioConfig::default()
        };
        let mut log = RunLog {
            seed: 0,
            scenario,
            steps: Vec::new(),
            energy: Vec::new(),
            collision: false,
        };
        for k in 0..steps {
            let t = k as f64 * dt;
            for id in 0..n {
                let x0 = (n - 1 - id) as f64 * spacing;
                log.steps.push(StepRecord {
                    t,
                    id,
                    x: x0 + speed * t,
                    v: speed,
                    a: 0.0,
                });
            }
        }
        log
    }

    #[test]
    fn convoy_throughput_matches_the_flow_identity() {
        // Headway h seconds -> 3600/h veh/h, within one vehicle of
        // rounding, over a window the vehicle stream fully spans.
        let speed = 20.0;
        let spacing = 40.0;
        let headway = spacing / speed;
        let n = 60;
        let dt = 0.1;
        let steps = 1200;
        let log = convoy_log(n, speed, spacing, steps, dt);
        let x_star = (n as f64) * spacing / 2.0;
        let t1 = 50.0;
        let q = throughput(&log.steps, x_star, 0.0, t1).unwrap();
        let expected = 3600.0 / headway;
        let per_window = 3600.0 / t1;
        assert!(
            (q - expected).abs() <= per_window + 1e-9,
            "{q} vs {expected}"
        );
    }

    #[test]
    fn ten_crossings_in_360_seconds_is_100_per_hour() {
        // Hand-built: 10 vehicles cross x=0 inside a 360 s window.
        let mut steps = Vec::new();
        for id in 0..10 {
            let t = 10.0 + id as f64;
            steps.push(StepRecord { t: t - 1.0, id, x: -5.0, v: 5.0, a: 0.0 });
            steps.push(StepRecord { t, id, x: 5.0, v: 5.0, a: 0.0 });
        }
        let q = throughput(&steps, 0.0, 0.0, 360.0).unwrap();
        assert!((q - 100.0).abs() < 1e-9);
    }

    #[test]
    fn no_crossings_is_zero_and_empty_window_errors() {
        let log = convoy_log(3, 10.0, 30.0, 5, 0.1);
        let q = throughput(&log.steps, 9.0e4, 0.0, 0.4).unwrap();
        assert_eq!(q, 0.0);
        assert!(throughput(&log.steps, 50.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn constant_convoy_spacing_is_exact_with_zero_spread() {
        let log = convoy_log(6, 20.0, 40.0, 50, 0.1);
        let report = spacing_stats(&log).unwrap();
        let gap = 40.0 - log.scenario.vehicle_length;
        assert!((report.cav_gap.max - gap).abs() < 1e-9);
        assert!((report.cav_gap.mean - gap).abs() < 1e-9);
        assert!(report.cav_gap.std < 1e-9);
        assert_eq!(report.platoon_spacing.mean, report.cav_gap.mean);
        // theta_safe = gap - D_s at equal speeds: D_s = v t0 + d0.
        let safety = SafetyParams::default();
        let d_s = 20.0 * safety.reaction_time + safety.standstill_margin;
        assert!((report.theta_safe.mean - (gap - d_s)).abs() < 1e-9);
    }

    #[test]
    fn two_sample_population_std_convention() {
        let s = Stats::from_samples(&[30.0, 50.0]).unwrap();
        assert!((s.mean - 40.0).abs() < 1e-12);
        assert!((s.std - 10.0).abs() < 1e-12);
    }

    #[test]
    fn constant_log_has_all_mass_at_zero() {
        let log = convoy_log(4, 15.0, 35.0, 30, 0.1);
        let aj = accel_jerk_distributions(&log).unwrap();
        assert_eq!(aj.accel_hist.total(), 4 * 30);
        assert_eq!(aj.accel_hist.counts.get(&0).copied(), Some(4 * 30));
        assert_eq!(aj.jerk_hist.counts.get(&0).copied(), Some(4 * 30));
        assert_eq!(aj.jerk_max_abs, 0.0);
    }

    #[test]
    fn single_accel_step_gives_one_jerk_sample() {
        let mut log = convoy_log(1, 10.0, 40.0, 3, 0.1);
        // Hand-edit: accel jumps by 0.5 at the last record.
        log.steps[2].a = 0.5;
        let aj = accel_jerk_distributions(&log).unwrap();
        assert!((aj.jerk_max_abs - 5.0).abs() < 1e-9);
        let bin = (5.0 / JERK_BIN_WIDTH).floor() as i64;
        assert_eq!(aj.jerk_hist.counts.get(&bin).copied(), Some(1));
    }

    #[test]
    fn sinusoidal_accel_jerk_tracks_the_derivative() {
        let dt = 0.01;
        let steps = 700;
        let mut log = convoy_log(1, 10.0, 40.0, steps, dt);
        for (k, r) in log.steps.iter_mut().enumerate() {
            r.a = (k as f64 * dt).sin();
        }
        let aj = accel_jerk_distributions(&log).unwrap();
        assert!((aj.jerk_max_abs - 1.0).abs() < 0.01, "{}", aj.jerk_max_abs);
    }

    #[test]
    fn constant_power_rollout_spends_p_over_v_per_meter() {
        // One vehicle at 20 m/s drawing 10 kW -> 500 J/m. Kinematics
        // carry one more record than the ledger (initial state at t=0).
        let mut log = convoy_log(2, 20.0, 40.0, 101, 0.1);
        for k in 0..100 {
            let t = k as f64 * 0.1;
            for id in 0..2 {
                log.energy.push(EnergyRecord {
                    t,
                    id,
                    battery: -10_000.0 * 0.1,
                    comm: 0.0,
                    migration: 0.0,
                    compute: 0.0,
                });
            }
        }
        let e = energy_per_meter(&log).unwrap();
        let fleet = e.fleet.unwrap();
        assert!((fleet - 500.0).abs() < 1e-6, "{fleet}");
        // Duplicating identical vehicles leaves the ratio unchanged.
        let g0 = e.per_group[0].unwrap();
        assert!((g0 - 500.0).abs() < 1e-6);
    }

    #[test]
    fn zero_distance_energy_is_absent() {
        let mut log = convoy_log(2, 0.0, 40.0, 10, 0.1);
        log.energy.push(EnergyRecord {
            t: 0.0,
            id: 0,
            battery: -1.0,
            comm: 0.0,
            migration: 0.0,
            compute: 0.0,
        });
        let e = energy_per_meter(&log).unwrap();
        assert!(e.fleet.is_none());
        assert!(e.per_group[0].is_none());
    }

    #[test]
    fn summary_round_trips_bit_exactly() {
        let mut log = convoy_log(5, 22.0, 38.0, 400, 0.1);
        for k in 0..400 {
            let t = k as f64 * 0.1;
            for id in 0..5 {
                log.energy.push(EnergyRecord {
                    t,
                    id,
                    battery: -700.0 * 0.1,
                    comm: if id == 1 { -0.2 } else { 0.0 },
                    migration: 0.0,
                    compute: if id == 1 { -0.5 } else { 0.0 },
                });
            }
        }
        let s = summary(&log, &SummaryOptions::default()).unwrap();
        let text = s.to_kv_string();
        let back = Summary::from_kv_str(&text).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.to_kv_string(), text);
        // Constant convoy: variability columns are zero.
        assert!(s.gap_std < 1e-9);
        assert_eq!(s.jerk_max, 0.0);
    }

    #[test]
    fn summary_parse_errors_name_the_problem() {
        let err = Summary::from_kv_str("gap_max not-a-number\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let err = Summary::from_kv_str("").unwrap_err();
        assert!(err.to_string().contains("gap_max"));
    }
}
