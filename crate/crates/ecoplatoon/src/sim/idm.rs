//! Intelligent-driver-model car following.

use super::{SimError, ACCEL_MAX, ACCEL_MIN};

/// IDM parameters. Defaults are config-overridable; the desired speed matches
/// the scenario speed cap of 40 m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    /// Desired free-flow speed v0, m/s.
    pub desired_speed: f64,
    /// Desired time headway T, s.
    pub time_headway: f64,
    /// Maximum acceleration a, m/s^2.
    pub max_accel: f64,
    /// Comfortable deceleration b, m/s^2 (positive magnitude).
    pub comfortable_decel: f64,
    /// Acceleration exponent delta.
    pub accel_exponent: f64,
    /// Jam distance s0, m.
    pub jam_distance: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            desired_speed: 40.0,
            time_headway: 1.0,
            max_accel: 1.3,
            comfortable_decel: 2.0,
            accel_exponent: 4.0,
            jam_distance: 2.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let all_positive = self.desired_speed > 0.0
            && self.time_headway > 0.0
            && self.max_accel > 0.0
            && self.comfortable_decel > 0.0
            && self.jam_distance > 0.0;
        if !all_positive {
            return Err(SimError::Config(
                "IDM parameters must be strictly positive".into(),
            ));
        }
        if self.accel_exponent < 1.0 {
            return Err(SimError::Config(
                "IDM acceleration exponent must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Desired dynamic gap s*(v, dv) = s0 + vT + v*dv / (2*sqrt(a*b)).
    pub fn desired_gap(&self, speed: f64, approach_rate: f64) -> f64 {
        self.jam_distance
            + speed * self.time_headway
            + speed * approach_rate / (2.0 * (self.max_accel * self.comfortable_decel).sqrt())
    }

    /// Gap at which the IDM bracket vanishes for a steady state
    /// (v = v_front, so the approach rate is 0). Only defined for v < v0.
    pub fn equilibrium_gap(&self, speed: f64) -> f64 {
        let free = 1.0 - (speed / self.desired_speed).powf(self.accel_exponent);
        self.desired_gap(speed, 0.0) / free.sqrt()
    }
}

/// IDM acceleration from the ego speed, front speed and bumper-to-bumper gap:
/// a * [1 - (v/v0)^delta - (s*/s)^2], clamped to the common action bounds.
///
/// A non-positive gap means the vehicles overlap; that is a collision,
/// reported as an error for the stepper to translate into the terminal flag.
pub fn idm_accel_from_gap(
    speed: f64,
    front_speed: f64,
    gap: f64,
    p: &IdmParams,
) -> Result<f64, SimError> {
    if gap <= 0.0 {
        return Err(SimError::NonPositiveGap { gap });
    }
    let s_star = p.desired_gap(speed, speed - front_speed);
    let free_term = (speed / p.desired_speed).powf(p.accel_exponent);
    let interaction = (s_star / gap).powi(2);
    let raw = p.max_accel * (1.0 - free_term - interaction);
    Ok(raw.clamp(ACCEL_MIN, ACCEL_MAX))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_flow_from_standstill_gives_max_accel() {
        let p = IdmParams::default();
        let a = idm_accel_from_gap(0.0, 0.0, 1000.0, &p).unwrap();
        // Interaction term is (s0/1000)^2, negligible.
        assert!((a - p.max_accel).abs() < 1e-4);
    }

    #[test]
    fn desired_speed_with_open_road_gives_zero_accel() {
        let p = IdmParams::default();
        let a = idm_accel_from_gap(p.desired_speed, p.desired_speed, 1e12, &p).unwrap();
        assert!(a.abs() < 1e-6);
    }

    #[test]
    fn fixed_instance_matches_direct_formula_evaluation() {
        // v=20, v0=30, T=1.5, a=1, b=2, delta=4, s0=2, gap=32, dv=0:
        // s* = 2 + 20*1.5 = 32, so a = 1 - (2/3)^4 - 1 = -16/81.
        let p = IdmParams {
            desired_speed: 30.0,
            time_headway: 1.5,
            max_accel: 1.0,
            comfortable_decel: 2.0,
            accel_exponent: 4.0,
            jam_distance: 2.0,
        };
        let a = idm_accel_from_gap(20.0, 20.0, 32.0, &p).unwrap();
        let expected = -16.0 / 81.0;
        assert!((a - expected).abs() <= 1e-9 * expected.abs());
    }

    #[test]
    fn equilibrium_gap_zeroes_the_bracket() {
        let p = IdmParams::default();
        for &v in &[5.0, 15.0, 25.0, 35.0] {
            let s_eq = p.equilibrium_gap(v);
            let a = idm_accel_from_gap(v, v, s_eq, &p).unwrap();
            assert!(a.abs() < 1e-9, "v={v}: accel {a} at equilibrium gap {s_eq}");
        }
    }

    #[test]
    fn non_positive_gap_is_a_collision_error() {
        let p = IdmParams::default();
        assert!(matches!(
            idm_accel_from_gap(10.0, 10.0, 0.0, &p),
            Err(SimError::NonPositiveGap { .. })
        ));
        assert!(matches!(
            idm_accel_from_gap(10.0, 10.0, -3.0, &p),
            Err(SimError::NonPositiveGap { .. })
        ));
    }

    #[test]
    fn hard_approach_is_clamped_to_action_bounds() {
        let p = IdmParams::default();
        let a = idm_accel_from_gap(35.0, 0.0, 3.0, &p).unwrap();
        assert_eq!(a, ACCEL_MIN);
    }

    #[test]
    fn rejects_non_positive_params() {
        let p = IdmParams {
            time_headway: 0.0,
            ..IdmParams::default()
        };
        assert!(p.validate().is_err());
        let p = IdmParams {
            accel_exponent: 0.5,
            ..IdmParams::default()
        };
        assert!(p.validate().is_err());
    }
}
