//! Spectral entropy of weighted graphs and its nested weighted average.

use nalgebra::DMatrix;

use super::{GraphError, NestedTrafficGraph};
use crate::linalg::Mat;

/// Spectral entropy of a symmetric nonnegative adjacency matrix: the Shannon
/// entropy (nats) of the normalized Laplacian spectrum p_j = lambda_j / sum,
/// with 0 ln 0 := 0. Self-loops are excluded from the Laplacian so classical
/// graphs keep their textbook spectra; an edgeless graph has entropy 0 by
/// convention.
pub fn spectral_entropy(adjacency: &Mat) -> Result<f64, GraphError> {
    let n = adjacency.rows();
    if adjacency.cols() != n {
        return Err(GraphError::Structure(format!(
            "adjacency must be square, got {}x{}",
            n,
            adjacency.cols()
        )));
    }
    if !adjacency.is_symmetric(1e-9) {
        return Err(GraphError::Domain("adjacency must be symmetric".into()));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = adjacency.get(i, j);
            if w < 0.0 {
                return Err(GraphError::Domain(format!(
                    "negative edge weight {w} at ({i},{j})"
                )));
            }
            degree += w;
            lap[(i, j)] = -w;
        }
        lap[(i, i)] = degree;
    }
    let eigenvalues = lap.symmetric_eigenvalues();
    // The Laplacian is positive semidefinite; tiny negative values are
    // numerical noise.
    let total: f64 = eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let entropy: f64 = eigenvalues
        .iter()
        .map(|&l| l.max(0.0) / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    // Entropy is nonnegative; a lone unit p yields -0.0, and eigenvalue
    // noise can dip infinitesimally below zero.
    Ok(entropy.max(0.0))
}

/// Weighted average of subgraph entropies. Weights must be nonnegative and
/// sum to 1.
pub fn nested_entropy(entropies: &[f64], weights: &[f64]) -> Result<f64, GraphError> {
    if entropies.len() != weights.len() {
        return Err(GraphError::Structure(format!(
            "{} entropies but {} weights",
            entropies.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(GraphError::Domain("subgraph weights must be >= 0".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(GraphError::Domain(format!(
            "subgraph weights must sum to 1, got {total}"
        )));
    }
    Ok(entropies
        .iter()
        .zip(weights)
        .map(|(h, w)| h * w)
        .sum())
}

/// Entropy of every subgraph level: one value per platoon's V-V subgraph,
/// then (optionally) the F-F graph last.
pub fn subgraph_entropies(
    g: &NestedTrafficGraph,
    include_ff: bool,
) -> Result<Vec<f64>, GraphError> {
    let mut out = Vec::with_capacity(g.platoon_count() + 1);
    for p in 0..g.platoon_count() {
        out.push(spectral_entropy(&g.platoon_adjacency(p))?);
    }
    if include_ff {
        out.push(spectral_entropy(&g.ff.adjacency)?);
    }
    Ok(out)
}

pub fn uniform_weights(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

/// Two disjoint triangles on six nodes; Laplacian spectrum {0,0,3,3,3,3}.
pub fn disjoint_triangles() -> Mat {
    let mut a = Mat::zeros(6, 6);
    for base in [0, 3] {
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    a.set(base + i, base + j, 1.0);
                }
            }
        }
    }
    a
}

/// The 6-cycle; Laplacian spectrum {0,1,1,3,3,4}.
pub fn six_cycle() -> Mat {
    let mut a = Mat::zeros(6, 6);
    for i in 0..6 {
        let j = (i + 1) % 6;
        a.set(i, j, 1.0);
        a.set(j, i, 1.0);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Mat {
        Mat::from_rows(&[
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
    }

    #[test]
    fn triangle_entropy_is_ln_2() {
        // Spectrum {0, 3, 3}: p = {1/2, 1/2}.
        let h = spectral_entropy(&triangle()).unwrap();
        assert!((h - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_edge_entropy_is_zero() {
        // Spectrum {0, 2}: all mass on one eigenvalue.
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(spectral_entropy(&a).unwrap().abs() < 1e-15);
    }

    #[test]
    fn edgeless_graph_has_zero_entropy() {
        assert_eq!(spectral_entropy(&Mat::zeros(5, 5)).unwrap(), 0.0);
    }

    #[test]
    fn self_loops_do_not_change_the_spectrum() {
        let plain = spectral_entropy(&triangle()).unwrap();
        let mut looped = triangle();
        for i in 0..3 {
            looped.set(i, i, 1.0);
        }
        let with_loops = spectral_entropy(&looped).unwrap();
        assert_eq!(plain, with_loops);
    }

    #[test]
    fn six_node_demo_pair_is_distinguished() {
        let h1 = spectral_entropy(&disjoint_triangles()).unwrap();
        let h2 = spectral_entropy(&six_cycle()).unwrap();
        // {0,0,3,3,3,3}: four equal shares of 1/4.
        assert!((h1 - 4.0f64.ln()).abs() < 1e-6);
        // {0,1,1,3,3,4}/12: H = ln(12)/6 + ln(4)/2 + ln(3)/3.
        let expected = 12.0f64.ln() / 6.0 + 4.0f64.ln() / 2.0 + 3.0f64.ln() / 3.0;
        assert!((h2 - expected).abs() < 1e-6);
        assert!((h1 - h2).abs() > 0.05);
    }

    #[test]
    fn entropy_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(3..8);
            let mut a = Mat::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.6) {
                        let w = rng.gen_range(0.1..2.0);
                        a.set(i, j, w);
                        a.set(j, i, w);
                    }
                }
            }
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let mut b = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    b.set(perm[i], perm[j], a.get(i, j));
                }
            }
            let ha = spectral_entropy(&a).unwrap();
            let hb = spectral_entropy(&b).unwrap();
            assert!((ha - hb).abs() < 1e-9, "{ha} vs {hb}");
        }
    }

    #[test]
    fn asymmetric_and_negative_inputs_are_domain_errors() {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.0]]);
        assert!(matches!(
            spectral_entropy(&a),
            Err(GraphError::Domain(_))
        ));
        let a = Mat::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]);
        assert!(matches!(
            spectral_entropy(&a),
            Err(GraphError::Domain(_))
        ));
    }

    #[test]
    fn nested_entropy_degenerate_cases() {
        // Two identical subgraphs at equal weight equal the single value.
        let h = spectral_entropy(&triangle()).unwrap();
        let avg = nested_entropy(&[h, h], &[0.5, 0.5]).unwrap();
        assert_eq!(avg, h);
        // Weight vector (1, 0) selects the first entropy.
        let sel = nested_entropy(&[h, 99.0], &[1.0, 0.0]).unwrap();
        assert_eq!(sel, h);
    }

    #[test]
    fn nested_entropy_validates_weights() {
        assert!(nested_entropy(&[1.0, 2.0], &[0.4, 0.4]).is_err());
        assert!(nested_entropy(&[1.0, 2.0], &[1.5, -0.5]).is_err());
        assert!(nested_entropy(&[1.0], &[0.5, 0.5]).is_err());
    }
}
