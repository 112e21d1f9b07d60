//! Lead-vehicle speed profiles.
//!
//! A trajectory is a piecewise-linear speed curve given by (time, speed)
//! samples. Five synthetic scenario profiles are generated procedurally with
//! the formulas documented on their constructors; arbitrary profiles load
//! from a two-column `t,v` text file.

use std::fmt;
use std::path::Path;

use super::SimError;

/// Speed cap for every profile, m/s.
pub const SPEED_CAP: f64 = 40.0;

const DEFAULT_DURATION: f64 = 300.0;

/// Which scenario family a trajectory belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioTag {
    Integrated,
    HighSpeed,
    LowSpeed,
    RapidAccel,
    EmergencyBrake,
    Custom,
}

impl fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ScenarioTag::Integrated => "integrated",
            ScenarioTag::HighSpeed => "high-speed",
            ScenarioTag::LowSpeed => "low-speed",
            ScenarioTag::RapidAccel => "rapid-accel",
            ScenarioTag::EmergencyBrake => "emergency-brake",
            ScenarioTag::Custom => "custom",
        };
        f.write_str(name)
    }
}

/// Piecewise-linear lead-vehicle speed profile.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderTrajectory {
    samples: Vec<(f64, f64)>,
    tag: ScenarioTag,
}

impl LeaderTrajectory {
    /// Validates and wraps raw samples: times strictly increasing, speeds in
    /// [0, 40] m/s, at least one sample.
    pub fn new(samples: Vec<(f64, f64)>, tag: ScenarioTag) -> Result<Self, SimError> {
        if samples.is_empty() {
            return Err(SimError::Trajectory("trajectory has no samples".into()));
        }
        for window in samples.windows(2) {
            if window[1].0 <= window[0].0 {
                return Err(SimError::Trajectory(format!(
                    "sample times must be strictly increasing (t={} then t={})",
                    window[0].0, window[1].0
                )));
            }
        }
        for &(t, v) in &samples {
            if !t.is_finite() || !v.is_finite() {
                return Err(SimError::Trajectory(format!(
                    "non-finite sample (t={t}, v={v})"
                )));
            }
            if !(0.0..=SPEED_CAP).contains(&v) {
                return Err(SimError::Trajectory(format!(
                    "speed {v} m/s at t={t} outside [0, {SPEED_CAP}]"
                )));
            }
        }
        Ok(LeaderTrajectory { samples, tag })
    }

    /// Cruise with a gentle wave: v(t) = 30 + 2 sin(2 pi t / 60), 300 s.
    pub fn high_speed() -> Self {
        sampled_sine(30.0, 2.0, 60.0, DEFAULT_DURATION, ScenarioTag::HighSpeed)
    }

    /// Congested crawl: v(t) = 6 + 2 sin(2 pi t / 50), 300 s.
    pub fn low_speed() -> Self {
        sampled_sine(6.0, 2.0, 50.0, DEFAULT_DURATION, ScenarioTag::LowSpeed)
    }

    /// Slow start then a sustained ramp: 8 m/s until t=60, linear to 35 m/s
    /// at t=150, hold to 300 s.
    pub fn rapid_accel() -> Self {
        let pts = vec![(0.0, 8.0), (60.0, 8.0), (150.0, 35.0), (300.0, 35.0)];
        LeaderTrajectory::new(pts, ScenarioTag::RapidAccel).expect("static profile is valid")
    }

    /// Hard brake and recovery: cruise 30 m/s to t=30, brake at -4 m/s^2 to
    /// 2 m/s at t=37, hold to t=57, accelerate at +2 m/s^2 to 28 m/s at
    /// t=70, hold to 300 s.
    pub fn emergency_brake() -> Self {
        let pts = vec![
            (0.0, 30.0),
            (30.0, 30.0),
            (37.0, 2.0),
            (57.0, 2.0),
            (70.0, 28.0),
            (300.0, 28.0),
        ];
        LeaderTrajectory::new(pts, ScenarioTag::EmergencyBrake).expect("static profile is valid")
    }

    /// Mixed profile touching every regime: cruise, decel to crawl, crawl,
    /// ramp up, cruise, hard brake, creep, recovery, cruise.
    pub fn integrated() -> Self {
        let pts = vec![
            (0.0, 25.0),
            (40.0, 25.0),
            (60.0, 10.0),
            (100.0, 10.0),
            (130.0, 32.0),
            (180.0, 32.0),
            (187.0, 3.0),
            (210.0, 3.0),
            (240.0, 28.0),
            (300.0, 28.0),
        ];
        LeaderTrajectory::new(pts, ScenarioTag::Integrated).expect("static profile is valid")
    }

    /// v(t) = mean + amp sin(2 pi t / period), sampled once per second,
    /// clamped into [0, 40].
    pub fn sinusoid(mean: f64, amp: f64, period: f64, duration: f64) -> Result<Self, SimError> {
        if period <= 0.0 || duration <= 0.0 {
            return Err(SimError::Trajectory(
                "sinusoid period and duration must be positive".into(),
            ));
        }
        Ok(sampled_sine(mean, amp, period, duration, ScenarioTag::Custom))
    }

    /// Constant-speed profile.
    pub fn constant(speed: f64, duration: f64) -> Result<Self, SimError> {
        LeaderTrajectory::new(vec![(0.0, speed), (duration, speed)], ScenarioTag::Custom)
    }

    /// Parses the `t,v` comma-separated format (header line required).
    pub fn from_csv_str(text: &str) -> Result<Self, SimError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "t,v" => {}
            Some((_, header)) => {
                return Err(SimError::Trajectory(format!(
                    "line 1: expected header 't,v', found '{}'",
                    header.trim()
                )))
            }
            None => return Err(SimError::Trajectory("empty trajectory file".into())),
        }
        let mut samples = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (t_str, v_str) = line.split_once(',').ok_or_else(|| {
                SimError::Trajectory(format!("line {}: expected 't,v' pair", idx + 1))
            })?;
            let t: f64 = t_str.trim().parse().map_err(|_| {
                SimError::Trajectory(format!("line {}: bad time '{}'", idx + 1, t_str.trim()))
            })?;
            let v: f64 = v_str.trim().parse().map_err(|_| {
                SimError::Trajectory(format!("line {}: bad speed '{}'", idx + 1, v_str.trim()))
            })?;
            samples.push((t, v));
        }
        LeaderTrajectory::new(samples, ScenarioTag::Custom)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::Trajectory(format!("cannot read '{}': {e}", path.display()))
        })?;
        Self::from_csv_str(&text)
    }

    /// Writes the samples back out in the `t,v` format.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,v\n");
        for &(t, v) in &self.samples {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }

    /// Speed at time t: linear interpolation between samples, held constant
    /// outside the sampled range.
    pub fn speed_at(&self, t: f64) -> f64 {
        let first = self.samples[0];
        let last = self.samples[self.samples.len() - 1];
        if t <= first.0 {
            return first.1;
        }
        if t >= last.0 {
            return last.1;
        }
        // First sample with time > t; its predecessor starts the segment.
        let hi = self.samples.partition_point(|&(st, _)| st <= t);
        let (t0, v0) = self.samples[hi - 1];
        let (t1, v1) = self.samples[hi];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    pub fn tag(&self) -> ScenarioTag {
        self.tag
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }
}

fn sampled_sine(mean: f64, amp: f64, period: f64, duration: f64, tag: ScenarioTag) -> LeaderTrajectory {
    let mut samples = Vec::new();
    let mut t = 0.0;
    while t < duration {
        samples.push((t, sine_speed(mean, amp, period, t)));
        t += 1.0;
    }
    samples.push((duration, sine_speed(mean, amp, period, duration)));
    LeaderTrajectory::new(samples, tag).expect("generated sine profile is valid")
}

fn sine_speed(mean: f64, amp: f64, period: f64, t: f64) -> f64 {
    (mean + amp * (2.0 * std::f64::consts::PI * t / period).sin()).clamp(0.0, SPEED_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles_satisfy_invariants() {
        for traj in [
            LeaderTrajectory::integrated(),
            LeaderTrajectory::high_speed(),
            LeaderTrajectory::low_speed(),
            LeaderTrajectory::rapid_accel(),
            LeaderTrajectory::emergency_brake(),
        ] {
            assert_eq!(traj.duration(), 300.0);
            for w in traj.samples().windows(2) {
                assert!(w[1].0 > w[0].0);
            }
            for &(_, v) in traj.samples() {
                assert!((0.0..=SPEED_CAP).contains(&v));
            }
        }
    }

    #[test]
    fn emergency_brake_hits_its_breakpoints() {
        let traj = LeaderTrajectory::emergency_brake();
        assert_eq!(traj.speed_at(0.0), 30.0);
        assert_eq!(traj.speed_at(30.0), 30.0);
        assert_eq!(traj.speed_at(37.0), 2.0);
        assert_eq!(traj.speed_at(57.0), 2.0);
        assert_eq!(traj.speed_at(70.0), 28.0);
        // Braking segment slope is -4 m/s^2.
        let slope = (traj.speed_at(37.0) - traj.speed_at(30.0)) / 7.0;
        assert!((slope + 4.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_is_linear_between_samples() {
        let traj =
            LeaderTrajectory::new(vec![(0.0, 10.0), (10.0, 20.0)], ScenarioTag::Custom).unwrap();
        assert_eq!(traj.speed_at(5.0), 15.0);
        assert_eq!(traj.speed_at(2.5), 12.5);
        // Held constant beyond the ends.
        assert_eq!(traj.speed_at(-1.0), 10.0);
        assert_eq!(traj.speed_at(99.0), 20.0);
    }

    #[test]
    fn sinusoid_peaks_at_quarter_period() {
        let traj = LeaderTrajectory::sinusoid(22.0, 6.0, 60.0, 120.0).unwrap();
        assert!((traj.speed_at(15.0) - 28.0).abs() < 1e-12);
        assert!((traj.speed_at(45.0) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let traj = LeaderTrajectory::emergency_brake();
        let text = traj.to_csv_string();
        let back = LeaderTrajectory::from_csv_str(&text).unwrap();
        assert_eq!(back.samples(), traj.samples());
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = LeaderTrajectory::from_csv_str("t,v\n0,10\nbogus\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = LeaderTrajectory::from_csv_str("time,speed\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn rejects_out_of_range_and_non_monotone() {
        assert!(LeaderTrajectory::new(vec![(0.0, 50.0)], ScenarioTag::Custom).is_err());
        assert!(LeaderTrajectory::new(vec![(0.0, 1.0), (0.0, 2.0)], ScenarioTag::Custom).is_err());
        assert!(LeaderTrajectory::new(vec![(0.0, -1.0)], ScenarioTag::Custom).is_err());
    }
}
