//! Longitudinal-dynamics energy accounting.
//!
//! Battery draw covers motor and auxiliary load for every vehicle;
//! communication, task-migration, and local-compute energies accrue only
//! to connected vehicles. All returned energies are <= 0 (joules spent).

use crate::sim::{VehicleKind, WorldState};

const GRAVITY: f64 = 9.81;

/// Physical and platform constants of the energy model.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    /// Vehicle mass, kg.
    pub mass: f64,
    /// Drag area C_d * A, m^2.
    pub drag_area: f64,
    /// Air density, kg/m^3.
    pub air_density: f64,
    /// Rolling-resistance coefficient.
    pub rolling_coeff: f64,
    /// Drivetrain efficiency for positive wheel power, (0, 1].
    pub drivetrain_eff: f64,
    /// Fraction of negative wheel power recovered, [0, 1].
    pub regen_eff: f64,
    /// Constant auxiliary electrical load, W.
    pub aux_power: f64,
    /// Radio power per active link, W.
    pub comm_power: f64,
    /// Energy charged per task handoff, J.
    pub migration_energy_per_handoff: f64,
    /// Onboard compute power while connected, W.
    pub local_compute_power: f64,
    /// Accounting interval; must match the simulation step, s.
    pub timestep: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            mass: 1600.0,
            drag_area: 0.6,
            air_density: 1.2,
            rolling_coeff: 0.01,
            drivetrain_eff: 0.9,
            regen_eff: 0.6,
            aux_power: 500.0,
            comm_power: 2.0,
            migration_energy_per_handoff: 50.0,
            local_compute_power: 5.0,
            timestep: 0.1,
        }
    }
}

/// Instantaneous battery power, W. Traction force is the sum of inertial,
/// rolling, and aerodynamic terms; positive wheel power is divided by the
/// drivetrain efficiency, negative wheel power is recovered at the regen
/// efficiency (a cap on recuperation, never extra credit).
pub fn drive_power(v: f64, a: f64, p: &EnergyParams) -> f64 {
    debug_assert!(v >= 0.0, "speeds are nonnegative in this model");
    let force = p.mass * a
        + p.mass * GRAVITY * p.rolling_coeff
        + 0.5 * p.air_density * p.drag_area * v * v;
    let wheel = force * v;
    let motor = if wheel >= 0.0 {
        wheel / p.drivetrain_eff
    } else {
        wheel * p.regen_eff
    };
    motor + p.aux_power
}

/// One step's fleet energy by category, all entries <= 0 J.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub battery: f64,
    pub comm: f64,
    pub migration: f64,
    pub compute: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.battery + self.comm + self.migration + self.compute
    }
}

/// Fleet energy for one step. `links` gives the active link count per
/// connected vehicle (in [`WorldState::cav_ids`] order); `handoffs` is
/// the number of coverage reassignments this step.
pub fn step_energy(
    world: &WorldState,
    links: &[usize],
    handoffs: usize,
    p: &EnergyParams,
) -> EnergyBreakdown {
    // Per-vehicle draw is floored at zero: recuperation offsets positive
    // load but never banks credit, keeping every category <= 0.
    let battery: f64 = world
        .vehicles
        .iter()
        .map(|v| drive_power(v.speed, v.accel, p).max(0.0) * p.timestep)
        .sum();
    let comm: f64 = links
        .iter()
        .map(|&l| p.comm_power * l as f64 * p.timestep)
        .sum();
    let migration = p.migration_energy_per_handoff * handoffs as f64;
    let n_cav = world
        .vehicles
        .iter()
        .filter(|v| v.kind == VehicleKind::Cav)
        .count();
    let compute = p.local_compute_power * n_cav as f64 * p.timestep;
    EnergyBreakdown {
        battery: -battery,
        comm: -comm,
        migration: -migration,
        compute: -compute,
    }
}

/// Per-vehicle energy rows for one step, indexed by vehicle id. Battery
/// accrues to every vehicle; link and compute overheads to connected
/// vehicles (`links` in [`WorldState::cav_ids`] order); each migration
/// is charged to its gaining connected vehicle in `handoff_targets`.
pub fn energy_ledger_rows(
    world: &WorldState,
    links: &[usize],
    handoff_targets: &[usize],
    p: &EnergyParams,
) -> Vec<EnergyBreakdown> {
    let mut rows = vec![EnergyBreakdown::default(); world.vehicles.len()];
    for (row, v) in rows.iter_mut().zip(&world.vehicles) {
        row.battery = -(drive_power(v.speed, v.accel, p).max(0.0) * p.timestep);
    }
    for (&id, &l) in world.cav_ids().iter().zip(links) {
        rows[id].comm = -(p.comm_power * l as f64 * p.timestep);
        rows[id].compute = -(p.local_compute_power * p.timestep);
    }
    for &target in handoff_targets {
        rows[target].migration -= p.migration_energy_per_handoff;
    }
    rows
}

/// Exact fold of ledger rows back into fleet totals.
pub fn fleet_energy(rows: &[EnergyBreakdown]) -> EnergyBreakdown {
    let mut total = EnergyBreakdown::default();
    for r in rows {
        total.battery += r.battery;
        total.comm += r.comm;
        total.migration += r.migration;
        total.compute += r.compute;
    }
    total
}
