//! Spatio-temporal edge weight between two vehicles.

use super::GraphError;

/// How the weight formula is read. The printed formula's activation condition
/// (|dv| >= V_max) contradicts the accompanying prose, so both readings ship.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Exactly as printed: max(ln(1 + D_max/dd + |dv|/V_max), 1) when
    /// dd < D_max and |dv| >= V_max, else 0.
    AsWritten,
    /// Prose reading: the log term is anchored at its boundary value ln 2
    /// (the limit as dd -> D_max with dv -> 0) and clamped, giving a weight
    /// that decays to 0 at the distance threshold and saturates at 1 as the
    /// gap closes: clamp(ln(1 + D_max/dd + |dv|/V_max)/ln 2 - 1, 0, 1) for
    /// dd < D_max, else 0.
    ProseConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StWeightParams {
    /// Distance threshold D_max, m.
    pub d_max: f64,
    /// Velocity threshold V_max, m/s.
    pub v_max: f64,
    pub mode: WeightMode,
}

impl Default for StWeightParams {
    fn default() -> Self {
        StWeightParams {
            d_max: 100.0,
            v_max: 40.0,
            mode: WeightMode::AsWritten,
        }
    }
}

impl StWeightParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.d_max > 0.0 && self.v_max > 0.0 {
            Ok(())
        } else {
            Err(GraphError::Domain(
                "st-weight thresholds must be positive".into(),
            ))
        }
    }
}

/// Edge weight from relative distance (m, must be positive) and relative
/// speed (m/s, sign ignored).
pub fn st_weight(delta_d: f64, delta_v: f64, p: &StWeightParams) -> Result<f64, GraphError> {
    p.validate()?;
    if delta_d <= 0.0 {
        return Err(GraphError::Domain(format!(
            "st_weight needs a positive relative distance, got {delta_d}"
        )));
    }
    let dv = delta_v.abs();
    if delta_d >= p.d_max {
        return Ok(0.0);
    }
    let raw = (1.0 + p.d_max / delta_d + dv / p.v_max).ln();
    match p.mode {
        WeightMode::AsWritten => {
            if dv >= p.v_max {
                Ok(raw.max(1.0))
            } else {
                Ok(0.0)
            }
        }
        WeightMode::ProseConsistent => Ok((raw / std::f64::consts::LN_2 - 1.0).clamp(0.0, 1.0)),
    }
}
