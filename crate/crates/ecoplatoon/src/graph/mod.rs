//! Nested traffic graphs: per-platoon vehicle graphs (V-V) inside a global
//! platoon graph (F-F), plus the analysis tools that operate on them.

pub mod dump;
pub mod intensity;
pub mod message;
pub mod spectral;
pub mod weight;
pub mod wl;

pub use weight::{st_weight, StWeightParams, WeightMode};

use std::fmt;

use crate::linalg::Mat;
use crate::sim::{ScenarioConfig, VehicleKind, WorldState};

/// Width of a V-V feature row: [X, V, I, dX, dV, a].
pub const F_V: usize = 6;
/// Width of an F-F feature row: [V_cav, dX_front, V_mean, a_mean].
pub const F_F: usize = 4;

#[derive(Debug)]
pub enum GraphError {
    /// Input outside an operation's mathematical domain.
    Domain(String),
    /// Inconsistent graph structure (dimensions, membership).
    Structure(String),
    /// Text-dump parse failure with a 1-based line number.
    Parse { line: usize, msg: String },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::Domain(msg) => write!(f, "domain error: {msg}"),
            GraphError::Structure(msg) => write!(f, "structure error: {msg}"),
            GraphError::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
        }
    }
}

impl std::error::Error for GraphError {}

/// Normalization constants applied to every feature before storage; they are
/// recorded in checkpoints and graph dumps so downstream consumers can undo
/// them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormConstants {
    pub road_length: f64,
    pub speed_cap: f64,
    pub accel_cap: f64,
    pub d_max: f64,
    pub vehicle_length: f64,
}

impl NormConstants {
    pub fn from_scenario(cfg: &ScenarioConfig, d_max: f64) -> Self {
        NormConstants {
            road_length: cfg.road_length,
            speed_cap: crate::sim::SPEED_CAP,
            accel_cap: crate::sim::ACCEL_MAX,
            d_max,
            vehicle_length: cfg.vehicle_length,
        }
    }
}

/// Whether edges carry the spatio-temporal weight or plain 0/1 connectivity.
/// Binary keeps the structural ranges (who can talk to whom) but drops the
/// distance/speed modulation; it is the graph half of the ablation ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    Binary,
    StWeight,
}

/// Vehicle-level graph: one row per vehicle, front to back.
#[derive(Debug, Clone, PartialEq)]
pub struct VvGraph {
    /// M x 6 normalized features.
    pub features: Mat,
    /// M x M symmetric nonnegative weights, unit diagonal.
    pub adjacency: Mat,
}

/// Platoon-level graph: one row per platoon, in platoon order.
#[derive(Debug, Clone, PartialEq)]
pub struct FfGraph {
    /// N x 4 normalized features.
    pub features: Mat,
    /// N x N symmetric weights, unit diagonal.
    pub adjacency: Mat,
}

/// The pair of graph observations plus the vehicle-to-platoon mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedTrafficGraph {
    pub vv: VvGraph,
    pub ff: FfGraph,
    /// Per vehicle row: its platoon, or None for the trajectory leader.
    pub membership: Vec<Option<usize>>,
}

impl NestedTrafficGraph {
    /// Row indices of platoon-leader vehicles (type code 0.5), platoon order.
    pub fn cav_rows(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = (0..self.vv.features.rows())
            .filter(|&r| self.vv.features.get(r, 2) == 0.5)
            .collect();
        rows.sort_by_key(|&r| self.membership[r]);
        rows
    }

    /// Vehicle rows of one platoon, in front-to-back order.
    pub fn platoon_members(&self, platoon: usize) -> Vec<usize> {
        (0..self.membership.len())
            .filter(|&r| self.membership[r] == Some(platoon))
            .collect()
    }

    pub fn platoon_count(&self) -> usize {
        self.ff.features.rows()
    }

    /// The V-V adjacency restricted to one platoon's members.
    pub fn platoon_adjacency(&self, platoon: usize) -> Mat {
        let members = self.platoon_members(platoon);
        submatrix(&self.vv.adjacency, &members)
    }
}

/// Square submatrix over the given row/column indices.
pub fn submatrix(m: &Mat, idx: &[usize]) -> Mat {
    let mut out = Mat::zeros(idx.len(), idx.len());
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out.set(a, b, m.get(i, j));
        }
    }
    out
}

fn type_code(kind: VehicleKind) -> f64 {
    match kind {
        VehicleKind::TrajectoryLeader => 0.0,
        VehicleKind::Cav => 0.5,
        VehicleKind::Av => 1.0,
    }
}

/// Edge weight between two vehicle rows under the connectivity assumptions:
/// CAV-CAV within the RSU span, CAV-to-anything within the CAV's reach
/// (taken as D_max), nothing between non-CAVs. Returns 0 for no edge.
fn vv_edge(
    a: &crate::sim::VehicleState,
    b: &crate::sim::VehicleState,
    rsu_span: f64,
    p: &StWeightParams,
    scheme: WeightScheme,
    stats: Option<&mut u64>,
) -> Result<f64, GraphError> {
    let dist = (a.position - b.position).abs();
    let a_cav = a.kind == VehicleKind::Cav;
    let b_cav = b.kind == VehicleKind::Cav;
    let connected = if a_cav && b_cav {
        dist <= rsu_span
    } else if a_cav || b_cav {
        dist <= p.d_max
    } else {
        false
    };
    if !connected || dist <= 0.0 {
        return Ok(0.0);
    }
    match scheme {
        WeightScheme::Binary => Ok(1.0),
        WeightScheme::StWeight => {
            if let Some(count) = stats {
                *count += 1;
            }
            st_weight(dist, a.speed - b.speed, p)
        }
    }
}

/// Builds the vehicle-level graph. Features per row j:
/// [distance behind the leader / road length, v/speed_cap, type code,
/// front gap / D_max (leader sentinel: 1), speed delta to front / speed_cap
/// (leader: 0), accel/accel_cap].
pub fn build_vv_graph(
    world: &WorldState,
    p: &StWeightParams,
    scheme: WeightScheme,
    norm: &NormConstants,
) -> Result<VvGraph, GraphError> {
    build_vv_graph_counted(world, p, scheme, norm, None)
}

/// Same as [`build_vv_graph`] but bumps an st-weight evaluation counter,
/// used by the ablation instrumentation.
pub fn build_vv_graph_counted(
    world: &WorldState,
    p: &StWeightParams,
    scheme: WeightScheme,
    norm: &NormConstants,
    mut st_evals: Option<&mut u64>,
) -> Result<VvGraph, GraphError> {
    p.validate()?;
    let m = world.vehicles.len();
    let leader_pos = world.vehicles[0].position;

    let mut features = Mat::zeros(m, F_V);
    for (r, v) in world.vehicles.iter().enumerate() {
        let (front_gap, front_dv) = if r == 0 {
            (norm.d_max, 0.0)
        } else {
            let front = &world.vehicles[r - 1];
            (
                front.position - v.position - norm.vehicle_length,
                v.speed - front.speed,
            )
        };
        features.set(r, 0, (leader_pos - v.position) / norm.road_length);
        features.set(r, 1, v.speed / norm.speed_cap);
        features.set(r, 2, type_code(v.kind));
        features.set(r, 3, front_gap / norm.d_max);
        features.set(r, 4, front_dv / norm.speed_cap);
        features.set(r, 5, v.accel / norm.accel_cap);
    }

    let mut adjacency = Mat::eye(m);
    for i in 0..m {
        for j in (i + 1)..m {
            let w = vv_edge(
                &world.vehicles[i],
                &world.vehicles[j],
                world.rsu_span,
                p,
                scheme,
                st_evals.as_deref_mut(),
            )?;
            if w > 0.0 {
                adjacency.set(i, j, w);
                adjacency.set(j, i, w);
            }
        }
    }
    Ok(VvGraph {
        features,
        adjacency,
    })
}

/// Builds the platoon-level graph. Features per platoon: [lead-CAV speed,
/// lead-CAV front gap, mean member speed, mean member accel], normalized.
/// Adjacency is 1 between platoons whose centroids lie within the RSU span
/// (and on the diagonal); the st-weight variant modulates that by the
/// centroid distance/speed weight.
pub fn build_ff_graph(
    world: &WorldState,
    norm: &NormConstants,
    scheme: WeightScheme,
    p: &StWeightParams,
) -> Result<FfGraph, GraphError> {
    let n = world.groups.len();
    if n == 0 {
        return Err(GraphError::Structure("world has no platoons".into()));
    }
    let mut features = Mat::zeros(n, F_F);
    let mut centroids = Vec::with_capacity(n);
    let mut mean_speeds = Vec::with_capacity(n);

    for (g, group) in world.groups.iter().enumerate() {
        let members: Vec<usize> = std::iter::once(group.cav)
            .chain(group.avs.iter().copied())
            .collect();
        if members.is_empty() {
            return Err(GraphError::Structure(format!("platoon {g} is empty")));
        }
        let cav = &world.vehicles[group.cav];
        if cav.kind != VehicleKind::Cav {
            return Err(GraphError::Structure(format!(
                "platoon {g} leader {} is not a CAV",
                group.cav
            )));
        }
        if group.cav == 0 {
            return Err(GraphError::Structure(
                "a platoon leader cannot be the front vehicle".into(),
            ));
        }
        let front = &world.vehicles[group.cav - 1];
        let front_gap = front.position - cav.position - norm.vehicle_length;

        let count = members.len() as f64;
        let mean_v = members.iter().map(|&i| world.vehicles[i].speed).sum::<f64>() / count;
        let mean_a = members.iter().map(|&i| world.vehicles[i].accel).sum::<f64>() / count;
        let centroid =
            members.iter().map(|&i| world.vehicles[i].position).sum::<f64>() / count;

        features.set(g, 0, cav.speed / norm.speed_cap);
        features.set(g, 1, front_gap / norm.d_max);
        features.set(g, 2, mean_v / norm.speed_cap);
        features.set(g, 3, mean_a / norm.accel_cap);
        centroids.push(centroid);
        mean_speeds.push(mean_v);
    }

    let mut adjacency = Mat::eye(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (centroids[i] - centroids[j]).abs();
            if dist > world.rsu_span {
                continue;
            }
            let w = match scheme {
                WeightScheme::Binary => 1.0,
                WeightScheme::StWeight => {
                    if dist <= 0.0 {
                        0.0
                    } else {
                        st_weight(dist, mean_speeds[i] - mean_speeds[j], p)?
                    }
                }
            };
            if w > 0.0 {
                adjacency.set(i, j, w);
                adjacency.set(j, i, w);
            }
        }
    }
    Ok(FfGraph {
        features,
        adjacency,
    })
}

/// Validates and merges the two levels into one nested observation.
pub fn nest(
    vv: VvGraph,
    ff: FfGraph,
    membership: Vec<Option<usize>>,
) -> Result<NestedTrafficGraph, GraphError> {
    let m = vv.features.rows();
    let n = ff.features.rows();
    if membership.len() != m {
        return Err(GraphError::Structure(format!(
            "membership covers {} vehicles, V-V graph has {m}",
            membership.len()
        )));
    }
    if vv.adjacency.shape() != (m, m) || vv.features.cols() != F_V {
        return Err(GraphError::Structure("V-V matrix shapes inconsistent".into()));
    }
    if ff.adjacency.shape() != (n, n) || ff.features.cols() != F_F {
        return Err(GraphError::Structure("F-F matrix shapes inconsistent".into()));
    }
    for (r, slot) in membership.iter().enumerate() {
        let is_leader_row = vv.features.get(r, 2) == 0.0;
        match slot {
            Some(p) if *p >= n => {
                return Err(GraphError::Structure(format!(
                    "vehicle row {r} maps to platoon {p}, only {n} exist"
                )));
            }
            Some(_) if is_leader_row => {
                return Err(GraphError::Structure(format!(
                    "trajectory-leader row {r} cannot belong to a platoon"
                )));
            }
            None if !is_leader_row => {
                return Err(GraphError::Structure(format!(
                    "vehicle row {r} is missing from the membership map"
                )));
            }
            _ => {}
        }
    }
    Ok(NestedTrafficGraph {
        vv,
        ff,
        membership,
    })
}

/// One-shot construction of the nested observation from a world state.
pub fn build_nested(
    world: &WorldState,
    p: &StWeightParams,
    vv_scheme: WeightScheme,
    ff_scheme: WeightScheme,
    norm: &NormConstants,
) -> Result<NestedTrafficGraph, GraphError> {
    let vv = build_vv_graph(world, p, vv_scheme, norm)?;
    let ff = build_ff_graph(world, norm, ff_scheme, p)?;
    let membership = world.vehicles.iter().map(|v| v.group).collect();
    nest(vv, ff, membership)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_scenario, LeaderTrajectory, PlatoonGroup, VehicleState};

    fn vehicle(id: usize, kind: VehicleKind, pos: f64, speed: f64) -> VehicleState {
        VehicleState {
            id,
            kind,
            position: pos,
            speed,
            accel: 0.0,
            group: if kind == VehicleKind::TrajectoryLeader {
                None
            } else {
                Some(0)
            },
        }
    }

    fn norm() -> NormConstants {
        NormConstants {
            road_length: 1000.0,
            speed_cap: 40.0,
            accel_cap: 4.5,
            d_max: 100.0,
            vehicle_length: 5.0,
        }
    }

    #[test]
    fn avs_alone_yield_identity_adjacency() {
        let world = WorldState {
            time: 0.0,
            vehicles: vec![
                vehicle(0, VehicleKind::Av, 50.0, 10.0),
                vehicle(1, VehicleKind::Av, 10.0, 10.0),
            ],
            groups: vec![],
            rsu_span: 2000.0,
            collision_flag: false,
        };
        let g = build_vv_graph(&world, &StWeightParams::default(), WeightScheme::StWeight, &norm())
            .unwrap();
        assert_eq!(g.adjacency, Mat::eye(2));
    }

    #[test]
    fn cav_av_edge_carries_the_st_weight() {
        // Distance 20 m, speed delta 40 m/s: active region of the printed
        // formula, weight ln(1 + 100/20 + 40/40) = ln 7.
        let world = WorldState {
            time: 0.0,
            vehicles: vec![
                vehicle(0, VehicleKind::Cav, 20.0, 40.0),
                vehicle(1, VehicleKind::Av, 0.0, 0.0),
            ],
            groups: vec![],
            rsu_span: 2000.0,
            collision_flag: false,
        };
        let g = build_vv_graph(&world, &StWeightParams::default(), WeightScheme::StWeight, &norm())
            .unwrap();
        let expected = 1.945910149055313; // ln 7
        assert!((g.adjacency.get(0, 1) - expected).abs() <= 1e-9 * expected);
        assert_eq!(g.adjacency.get(0, 1), g.adjacency.get(1, 0));
        assert_eq!(g.adjacency.get(0, 0), 1.0);
        assert_eq!(g.adjacency.get(1, 1), 1.0);
    }

    #[test]
    fn far_apart_vehicles_leave_only_self_loops() {
        let world = WorldState {
            time: 0.0,
            vehicles: vec![
                vehicle(0, VehicleKind::Cav, 500.0, 20.0),
                vehicle(1, VehicleKind::Cav, 250.0, 20.0),
                vehicle(2, VehicleKind::Av, 0.0, 20.0),
            ],
            groups: vec![],
            rsu_span: 100.0,
            collision_flag: false,
        };
        let g = build_vv_graph(&world, &StWeightParams::default(), WeightScheme::StWeight, &norm())
            .unwrap();
        assert_eq!(g.adjacency, Mat::eye(3));
    }

    #[test]
    fn binary_scheme_marks_structural_edges_with_ones() {
        let world = WorldState {
            time: 0.0,
            vehicles: vec![
                vehicle(0, VehicleKind::Cav, 60.0, 20.0),
                vehicle(1, VehicleKind::Av, 30.0, 20.0),
                vehicle(2, VehicleKind::Av, 0.0, 20.0),
            ],
            groups: vec![],
            rsu_span: 2000.0,
            collision_flag: false,
        };
        let g = build_vv_graph(&world, &StWeightParams::default(), WeightScheme::Binary, &norm())
            .unwrap();
        // CAV reaches both AVs (60 and 30 m away, within D_max): weight 1.
        assert_eq!(g.adjacency.get(0, 1), 1.0);
        assert_eq!(g.adjacency.get(0, 2), 1.0);
        // The AV pair stays disconnected.
        assert_eq!(g.adjacency.get(1, 2), 0.0);
    }

    #[test]
    fn features_follow_the_documented_normalization() {
        let cfg = ScenarioConfig {
            n_groups: 1,
            avs_per_group: 1,
            ..ScenarioConfig::default()
        };
        let traj = LeaderTrajectory::constant(20.0, 60.0).unwrap();
        let world = build_scenario(&cfg, &traj).unwrap();
        let nc = NormConstants::from_scenario(&cfg, 100.0);
        let g = build_vv_graph(&world, &StWeightParams::default(), WeightScheme::StWeight, &nc)
            .unwrap();
        // Leader row: at the front, sentinel gap, zero speed delta.
        assert_eq!(g.features.row(0), &[0.0, 0.5, 0.0, 1.0, 0.0, 0.0]);
        // CAV row: 40 m behind over a 25 km road, 35 m front gap.
        let r = g.features.row(1);
        assert!((r[0] - 40.0 / 2.5e4).abs() < 1e-15);
        assert_eq!(r[1], 0.5);
        assert_eq!(r[2], 0.5);
        assert!((r[3] - 0.35).abs() < 1e-15);
        assert_eq!(r[4], 0.0);
        assert_eq!(r[5], 0.0);
    }

    #[test]
    fn ff_rows_and_adjacency_for_one_rsu() {
        let cfg = ScenarioConfig {
            n_groups: 2,
            avs_per_group: 2,
            ..ScenarioConfig::default()
        };
        let traj = LeaderTrajectory::constant(20.0, 60.0).unwrap();
        let world = build_scenario(&cfg, &traj).unwrap();
        let nc = NormConstants::from_scenario(&cfg, 100.0);
        let g =
            build_ff_graph(&world, &nc, WeightScheme::Binary, &StWeightParams::default()).unwrap();
        assert_eq!(g.features.shape(), (2, F_F));
        // Identical speeds, zero accels: [0.5, 0.35, 0.5, 0].
        for i in 0..2 {
            assert_eq!(g.features.row(i), &[0.5, 0.35, 0.5, 0.0]);
        }
        // Both platoons sit inside one RSU span: all-ones adjacency.
        assert_eq!(g.adjacency, Mat::filled(2, 2, 1.0));
    }

    #[test]
    fn ff_platoons_beyond_span_disconnect() {
        let cfg = ScenarioConfig {
            n_groups: 2,
            avs_per_group: 2,
            initial_spacing: 40.0,
            rsu_span: 100.0,
            ..ScenarioConfig::default()
        };
        let traj = LeaderTrajectory::constant(20.0, 60.0).unwrap();
        let world = build_scenario(&cfg, &traj).unwrap();
        let nc = NormConstants::from_scenario(&cfg, 100.0);
        let g =
            build_ff_graph(&world, &nc, WeightScheme::Binary, &StWeightParams::default()).unwrap();
        // Centroids are 120 m apart, beyond the 100 m span.
        assert_eq!(g.adjacency, Mat::eye(2));
    }

    #[test]
    fn default_scenario_nests_into_201_and_10_nodes() {
        let cfg = ScenarioConfig::default();
        let traj = LeaderTrajectory::constant(30.0, 60.0).unwrap();
        let world = build_scenario(&cfg, &traj).unwrap();
        let nc = NormConstants::from_scenario(&cfg, 100.0);
        let g = build_nested(
            &world,
            &StWeightParams::default(),
            WeightScheme::StWeight,
            WeightScheme::Binary,
            &nc,
        )
        .unwrap();
        assert_eq!(g.vv.features.shape(), (201, F_V));
        assert_eq!(g.ff.features.shape(), (10, F_F));
        assert_eq!(g.platoon_count(), 10);
        assert_eq!(g.cav_rows().len(), 10);
        assert_eq!(g.platoon_members(0).len(), 20);
        assert!(g.vv.adjacency.is_symmetric(0.0));
        // AV-AV off-diagonal block is identically zero.
        for i in 0..201 {
            for j in 0..201 {
                if i != j
                    && g.vv.features.get(i, 2) == 1.0
                    && g.vv.features.get(j, 2) == 1.0
                {
                    assert_eq!(g.vv.adjacency.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn single_platoon_ff_is_a_self_looped_node() {
        let cfg = ScenarioConfig {
            n_groups: 1,
            avs_per_group: 5,
            ..ScenarioConfig::default()
        };
        let traj = LeaderTrajectory::constant(20.0, 60.0).unwrap();
        let world = build_scenario(&cfg, &traj).unwrap();
        let nc = NormConstants::from_scenario(&cfg, 100.0);
        let g =
            build_ff_graph(&world, &nc, WeightScheme::Binary, &StWeightParams::default()).unwrap();
        assert_eq!(g.adjacency, Mat::eye(1));
    }

    #[test]
    fn nest_rejects_membership_holes() {
        let cfg = ScenarioConfig {
            n_groups: 1,
            avs_per_group: 2,
            ..ScenarioConfig::default()
        };
        let traj = LeaderTrajectory::constant(20.0, 60.0).unwrap();
        let world = build_scenario(&cfg, &traj).unwrap();
        let nc = NormConstants::from_scenario(&cfg, 100.0);
        let p = StWeightParams::default();
        let vv = build_vv_graph(&world, &p, WeightScheme::StWeight, &nc).unwrap();
        let ff = build_ff_graph(&world, &nc, WeightScheme::Binary, &p).unwrap();
        // Drop one AV from the map.
        let mut membership: Vec<Option<usize>> =
            world.vehicles.iter().map(|v| v.group).collect();
        membership[2] = None;
        assert!(matches!(
            nest(vv.clone(), ff.clone(), membership),
            Err(GraphError::Structure(_))
        ));
        // Platoon index out of range.
        let mut membership: Vec<Option<usize>> =
            world.vehicles.iter().map(|v| v.group).collect();
        membership[2] = Some(9);
        assert!(matches!(
            nest(vv, ff, membership),
            Err(GraphError::Structure(_))
        ));
    }

    #[test]
    fn collision_validation_helpers() {
        // Hand-built group metadata is validated by build_ff_graph.
        let world = WorldState {
            time: 0.0,
            vehicles: vec![
                vehicle(0, VehicleKind::TrajectoryLeader, 100.0, 10.0),
                vehicle(1, VehicleKind::Av, 60.0, 10.0),
            ],
            groups: vec![PlatoonGroup {
                cav: 1,
                avs: vec![],
            }],
            rsu_span: 2000.0,
            collision_flag: false,
        };
        assert!(matches!(
            build_ff_graph(
                &world,
                &norm(),
                WeightScheme::Binary,
                &StWeightParams::default()
            ),
            Err(GraphError::Structure(_))
        ));
    }
}
