//! Generic message passing over a weighted graph, plus the nested wiring
//! where per-platoon vehicle passes feed the platoon-level pass.
//!
//! The message and update maps are closures so the wiring contract can be
//! tested with hand-written linear maps; the learned attention layers plug
//! into the same shape.

use super::{GraphError, NestedTrafficGraph};
use crate::linalg::Mat;

/// One round of message passing: for each node v,
/// m_v = sum over neighbors u (adjacency[v][u] > 0, self included via its
/// self-loop) of msg(h_v, h_u, w_vu), then h'_v = update(h_v, m_v).
pub fn message_pass(
    hidden: &Mat,
    adjacency: &Mat,
    msg: impl Fn(&[f64], &[f64], f64) -> Vec<f64>,
    update: impl Fn(&[f64], &[f64]) -> Vec<f64>,
) -> Result<Mat, GraphError> {
    let n = hidden.rows();
    if adjacency.shape() != (n, n) {
        return Err(GraphError::Structure(format!(
            "adjacency {}x{} does not match {n} hidden rows",
            adjacency.rows(),
            adjacency.cols()
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for v in 0..n {
        let mut aggregate: Option<Vec<f64>> = None;
        for u in 0..n {
            let w = adjacency.get(v, u);
            if w <= 0.0 {
                continue;
            }
            let m = msg(hidden.row(v), hidden.row(u), w);
            match &mut aggregate {
                None => aggregate = Some(m),
                Some(acc) => {
                    if acc.len() != m.len() {
                        return Err(GraphError::Structure(
                            "message width varies across neighbors".into(),
                        ));
                    }
                    for (a, b) in acc.iter_mut().zip(&m) {
                        *a += b;
                    }
                }
            }
        }
        let aggregate = aggregate.ok_or_else(|| {
            GraphError::Domain(format!("node {v} has no neighbors and no self-loop"))
        })?;
        rows.push(update(hidden.row(v), &aggregate));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(GraphError::Structure(
            "update width varies across nodes".into(),
        ));
    }
    Ok(Mat::from_rows(&rows))
}

/// Output of one nested round: updated vehicle rows and platoon rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedPassOutput {
    /// One row per vehicle; rows outside every platoon (the trajectory
    /// leader) are zero.
    pub vv_hidden: Mat,
    /// One row per platoon.
    pub ff_hidden: Mat,
}

/// Nested wiring: each platoon's members exchange messages over the V-V
/// subgraph; the mean of a platoon's updated rows is appended to its
/// platoon-level features; the platoon graph then runs its own pass.
pub fn nested_message_pass(
    g: &NestedTrafficGraph,
    msg_v: impl Fn(&[f64], &[f64], f64) -> Vec<f64>,
    upd_v: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    msg_f: impl Fn(&[f64], &[f64], f64) -> Vec<f64>,
    upd_f: impl Fn(&[f64], &[f64]) -> Vec<f64>,
) -> Result<NestedPassOutput, GraphError> {
    let n_platoons = g.platoon_count();
    let mut vv_width = None;
    let mut platoon_rows: Vec<(Vec<usize>, Mat)> = Vec::with_capacity(n_platoons);

    for p in 0..n_platoons {
        let members = g.platoon_members(p);
        if members.is_empty() {
            return Err(GraphError::Structure(format!("platoon {p} is empty")));
        }
        let sub_features = Mat::from_rows(
            &members
                .iter()
                .map(|&r| g.vv.features.row(r).to_vec())
                .collect::<Vec<_>>(),
        );
        let sub_adj = g.platoon_adjacency(p);
        let updated = message_pass(&sub_features, &sub_adj, &msg_v, &upd_v)?;
        match vv_width {
            None => vv_width = Some(updated.cols()),
            Some(w) if w != updated.cols() => {
                return Err(GraphError::Structure(
                    "vehicle update width varies across platoons".into(),
                ))
            }
            _ => {}
        }
        platoon_rows.push((members, updated));
    }

    let width = vv_width.expect("at least one platoon");
    let mut vv_hidden = Mat::zeros(g.vv.features.rows(), width);
    let mut summaries = Mat::zeros(n_platoons, width);
    for (p, (members, updated)) in platoon_rows.iter().enumerate() {
        for (local, &row) in members.iter().enumerate() {
            for c in 0..width {
                vv_hidden.set(row, c, updated.get(local, c));
            }
        }
        let inv = 1.0 / members.len() as f64;
        for c in 0..width {
            let mean = (0..members.len()).map(|r| updated.get(r, c)).sum::<f64>() * inv;
            summaries.set(p, c, mean);
        }
    }

    // Platoon rows: declared features plus the aggregated vehicle summary.
    let ff_input = Mat::from_rows(
        &(0..n_platoons)
            .map(|p| {
                let mut row = g.ff.features.row(p).to_vec();
                row.extend_from_slice(summaries.row(p));
                row
            })
            .collect::<Vec<_>>(),
    );
    let ff_hidden = message_pass(&ff_input, &g.ff.adjacency, &msg_f, &upd_f)?;
    Ok(NestedPassOutput {
        vv_hidden,
        ff_hidden,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weighted_copy(_h: &[f64], hu: &[f64], w: f64) -> Vec<f64> {
        hu.iter().map(|x| x * w).collect()
    }

    fn add_update(h: &[f64], m: &[f64]) -> Vec<f64> {
        h.iter().zip(m).map(|(a, b)| a + b).collect()
    }

    #[test]
    fn isolated_node_with_self_loop_updates_from_itself() {
        let h = Mat::from_rows(&[vec![2.0, -1.0]]);
        let adj = Mat::eye(1);
        let out = message_pass(&h, &adj, weighted_copy, add_update).unwrap();
        // m = 1 * h, h' = h + m = 2h.
        assert_eq!(out.row(0), &[4.0, -2.0]);
    }

    #[test]
    fn isolated_node_without_self_loop_is_an_error() {
        let h = Mat::from_rows(&[vec![1.0]]);
        let adj = Mat::zeros(1, 1);
        assert!(matches!(
            message_pass(&h, &adj, weighted_copy, add_update),
            Err(GraphError::Domain(_))
        ));
    }

    #[test]
    fn symmetric_nodes_get_symmetric_outputs() {
        let h = Mat::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]);
        let adj = Mat::from_rows(&[vec![1.0, 0.7], vec![0.7, 1.0]]);
        let out = message_pass(&h, &adj, weighted_copy, add_update).unwrap();
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn three_node_path_matches_hand_computation() {
        // Self-loops of 1 plus unit edges 0-1 and 1-2; messages are w * h_u,
        // updates are h + m.
        let h = Mat::from_rows(&[vec![1.0], vec![10.0], vec![100.0]]);
        let adj = Mat::from_rows(&[
            vec![1.0, 1.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![0.0, 1.0, 1.0],
        ]);
        let out = message_pass(&h, &adj, weighted_copy, add_update).unwrap();
        // Node 0: m = 1 + 10 = 11, h' = 12.
        // Node 1: m = 1 + 10 + 100 = 111, h' = 121.
        // Node 2: m = 10 + 100 = 110, h' = 210.
        assert_eq!(out.row(0), &[12.0]);
        assert_eq!(out.row(1), &[121.0]);
        assert_eq!(out.row(2), &[210.0]);
    }

    #[test]
    fn nested_pass_wires_platoon_summaries_into_the_global_graph() {
        use crate::graph::{build_nested, NormConstants, StWeightParams, WeightScheme};
        use crate::sim::{build_scenario, LeaderTrajectory, ScenarioConfig};

        let cfg = ScenarioConfig {
            n_groups: 2,
            avs_per_group: 1,
            ..ScenarioConfig::default()
        };
        let traj = LeaderTrajectory::constant(20.0, 60.0).unwrap();
        let world = build_scenario(&cfg, &traj).unwrap();
        let nc = NormConstants::from_scenario(&cfg, 100.0);
        let g = build_nested(
            &world,
            &StWeightParams::default(),
            WeightScheme::Binary,
            WeightScheme::Binary,
            &nc,
        )
        .unwrap();

        let out = nested_message_pass(&g, weighted_copy, add_update, weighted_copy, add_update)
            .unwrap();
        assert_eq!(out.vv_hidden.rows(), 5);
        assert_eq!(out.vv_hidden.cols(), crate::graph::F_V);
        // The leader belongs to no platoon: all-zero row.
        assert!(out.vv_hidden.row(0).iter().all(|&x| x == 0.0));
        // Platoon rows carry the declared features plus the summary width.
        assert_eq!(out.ff_hidden.rows(), 2);
        assert_eq!(
            out.ff_hidden.cols(),
            crate::graph::F_F + crate::graph::F_V
        );
        // The two platoons are symmetric in speed terms; identical speeds
        // and accels give identical platoon-level rows.
        for c in 0..out.ff_hidden.cols() {
            let a = out.ff_hidden.get(0, c);
            let b = out.ff_hidden.get(1, c);
            // Position-derived columns differ; speed/accel ones match.
            if c == 0 || c == 2 || c == 3 {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
