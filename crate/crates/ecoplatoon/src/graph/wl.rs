//! One-dimensional color refinement (iterated neighborhood hashing) on the
//! binary skeleton of a weighted graph. Refinement is run on the disjoint
//! union of two graphs so their color vocabularies are shared; two graphs
//! with identical stable color multisets are indistinguishable to this
//! procedure even when they are not isomorphic.

use std::collections::HashMap;

use crate::linalg::Mat;

fn neighbor_lists(adj: &Mat) -> Vec<Vec<usize>> {
    let n = adj.rows();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && adj.get(i, j) > 0.0)
                .collect()
        })
        .collect()
}

/// Stable colors after refinement to a fixed point (at most n rounds).
/// Self-loops are ignored; edges are taken as present where weight > 0.
pub fn refine_colors(adj: &Mat) -> Vec<u64> {
    refine_neighborhoods(&neighbor_lists(adj))
}

fn refine_neighborhoods(neighbors: &[Vec<usize>]) -> Vec<u64> {
    let n = neighbors.len();
    let mut colors = vec![0u64; n];
    for _ in 0..n {
        let mut interner: HashMap<(u64, Vec<u64>), u64> = HashMap::new();
        let mut next: Vec<u64> = Vec::with_capacity(n);
        for v in 0..n {
            let mut around: Vec<u64> = neighbors[v].iter().map(|&u| colors[u]).collect();
            around.sort_unstable();
            let key = (colors[v], around);
            let fresh = interner.len() as u64;
            let id = *interner.entry(key).or_insert(fresh);
            next.push(id);
        }
        if partition_of(&next) == partition_of(&colors) {
            return colors;
        }
        colors = next;
    }
    colors
}

/// Canonical form of a coloring: sorted class sizes keyed by first-seen
/// order, so renamings compare equal.
fn partition_of(colors: &[u64]) -> Vec<Vec<usize>> {
    let mut classes: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, &c) in colors.iter().enumerate() {
        classes.entry(c).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = classes.into_values().collect();
    out.sort();
    out
}

/// Sorted multiset of stable colors, as (color, count) pairs.
pub fn color_multiset(colors: &[u64]) -> Vec<(u64, usize)> {
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for &c in colors {
        *counts.entry(c).or_default() += 1;
    }
    let mut out: Vec<(u64, usize)> = counts.into_iter().collect();
    out.sort_unstable();
    out
}

/// True when color refinement cannot tell the two graphs apart: refined on
/// their disjoint union, both halves end with identical color multisets.
pub fn indistinguishable(a: &Mat, b: &Mat) -> bool {
    let na = a.rows();
    let mut union = neighbor_lists(a);
    for list in neighbor_lists(b) {
        union.push(list.into_iter().map(|u| u + na).collect());
    }
    let colors = refine_neighborhoods(&union);
    color_multiset(&colors[..na]) == color_multiset(&colors[na..])
}
