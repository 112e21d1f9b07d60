//! Information-intensity accounting over a nested graph: how much pairwise
//! information flows inside subgraphs versus between them. The defining
//! guarantee is total >= intra, since the inter-subgraph part is a sum of
//! nonnegative terms.

use super::{GraphError, NestedTrafficGraph};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityReport {
    pub intra: f64,
    pub inter: f64,
    pub total: f64,
}

/// Computes intra/inter/total intensity.
///
/// `members[i]` lists subgraph i's node indices. `intensity(u, v)` must be
/// nonnegative; it is summed over ordered node pairs (u = v included) inside
/// each subgraph for the intra part, and over ordered subgraph pairs i != j,
/// scaled by `betas[(i, j)]`, for the inter part.
pub fn information_intensity(
    members: &[Vec<usize>],
    intensity: impl Fn(usize, usize) -> f64,
    betas: &Mat,
) -> Result<IntensityReport, GraphError> {
    let n = members.len();
    if betas.shape() != (n, n) {
        return Err(GraphError::Structure(format!(
            "beta matrix is {}x{}, expected {n}x{n}",
            betas.rows(),
            betas.cols()
        )));
    }
    let eval = |u: usize, v: usize| -> Result<f64, GraphError> {
        let value = intensity(u, v);
        if value < 0.0 {
            return Err(GraphError::Domain(format!(
                "intensity({u},{v}) = {value} is negative"
            )));
        }
        Ok(value)
    };

    let mut intra = 0.0;
    for group in members {
        for &u in group {
            for &v in group {
                intra += eval(u, v)?;
            }
        }
    }

    let mut inter = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let beta = betas.get(i, j);
            if beta < 0.0 {
                return Err(GraphError::Domain(format!(
                    "beta({i},{j}) = {beta} is negative"
                )));
            }
            if beta == 0.0 {
                continue;
            }
            let mut pair_sum = 0.0;
            for &u in &members[i] {
                for &v in &members[j] {
                    pair_sum += eval(u, v)?;
                }
            }
            inter += beta * pair_sum;
        }
    }

    Ok(IntensityReport {
        intra,
        inter,
        total: intra + inter,
    })
}

/// Intensity report for a nested traffic graph with the default plumbing:
/// I(u, v) = V-V edge weight, beta = F-F adjacency entry.
pub fn nested_intensity(g: &NestedTrafficGraph) -> Result<IntensityReport, GraphError> {
    let members: Vec<Vec<usize>> = (0..g.platoon_count())
        .map(|p| g.platoon_members(p))
        .collect();
    information_intensity(&members, |u, v| g.vv.adjacency.get(u, v), &g.ff.adjacency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_betas_reduce_total_to_intra() {
        let members = vec![vec![0, 1], vec![2, 3]];
        let betas = Mat::zeros(2, 2);
        let r = information_intensity(&members, |_, _| 1.0, &betas).unwrap();
        assert_eq!(r.inter, 0.0);
        assert_eq!(r.total, r.intra);
        // Ordered pairs including u = v: 4 per two-node subgraph.
        assert_eq!(r.intra, 8.0);
    }

    #[test]
    fn two_singletons_with_unit_betas() {
        let members = vec![vec![0], vec![1]];
        let betas = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let r = information_intensity(&members, |_, _| 1.0, &betas).unwrap();
        assert_eq!(r.inter, 2.0);
        assert_eq!(r.total, r.intra + 2.0);
    }

    #[test]
    fn total_never_undercuts_intra_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let n_sub = rng.gen_range(1..5);
            let mut members = Vec::new();
            let mut next = 0;
            for _ in 0..n_sub {
                let size = rng.gen_range(1..5);
                members.push((next..next + size).collect::<Vec<_>>());
                next += size;
            }
            let mut betas = Mat::zeros(n_sub, n_sub);
            for i in 0..n_sub {
                for j in 0..n_sub {
                    if i != j {
                        betas.set(i, j, rng.gen_range(0.0..2.0));
                    }
                }
            }
            let values: Vec<f64> = (0..next * next).map(|_| rng.gen_range(0.0..3.0)).collect();
            let r = information_intensity(&members, |u, v| values[u * next + v], &betas).unwrap();
            assert!(r.total >= r.intra);
            assert!(r.inter >= 0.0);
        }
    }

    #[test]
    fn negative_inputs_are_domain_errors() {
        let members = vec![vec![0], vec![1]];
        let betas = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(information_intensity(&members, |_, _| -1.0, &betas).is_err());
        let betas = Mat::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        assert!(information_intensity(&members, |_, _| 1.0, &betas).is_err());
    }
}
