//! Turning edge probabilities into vertex-disjoint paths.
//!
//! Both solvers accept an edge only if every node keeps at most one accepted incoming
//! and one accepted outgoing edge.

use std::cmp::Ordering;

use crate::assign::max_weight_matching;
use crate::error::{Error, Result};
use crate::model::AssocGraph;

/// Greedy order: score descending, then earlier source frame, source index, destination index.
fn greedy_order(g: &AssocGraph, a: usize, b: usize) -> Ordering {
    let (ea, eb) = (&g.edges[a], &g.edges[b]);
    eb.score
        .total_cmp(&ea.score)
        .then_with(|| {
            g.nodes[ea.src]
                .first_frame()
                .cmp(&g.nodes[eb.src].first_frame())
        })
        .then_with(|| ea.src.cmp(&eb.src))
        .then_with(|| ea.dst.cmp(&eb.dst))
}

/// Accepted edge indices, sorted ascending.
pub fn greedy_round(g: &AssocGraph, threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.edges.len())
        .filter(|&i| g.edges[i].score as f64 >= threshold)
        .collect();
    order.sort_by(|&a, &b| greedy_order(g, a, b));
    let mut out_used = vec![false; g.nodes.len()];
    let mut in_used = vec![false; g.nodes.len()];
    let mut accepted = Vec::new();
    for i in order {
        let e = &g.edges[i];
        if !out_used[e.src] && !in_used[e.dst] {
            out_used[e.src] = true;
            in_used[e.dst] = true;
            accepted.push(i);
        }
    }
    accepted.sort_unstable();
    accepted
}

/// Maximizes the total surplus `score - threshold` over accepted edges.
///
/// Out-slots and in-slots form the two sides of a bipartite graph, so the flow
/// constraints reduce to a maximum-weight matching. Edges with non-positive surplus
/// never enter the solution.
pub fn exact_round(g: &AssocGraph, threshold: f64, node_cap: usize) -> Result<Vec<usize>> {
    let n = g.nodes.len();
    if n > node_cap {
        return Err(Error::Solver(format!(
            "exact rounding limited to {node_cap} nodes, graph has {n}"
        )));
    }
    if g.edges.is_empty() {
        return Ok(Vec::new());
    }
    // Best edge per (src, dst) slot pair, preferring the greedy order on ties.
    let mut best: Vec<Vec<Option<usize>>> = vec![vec![None; n]; n];
    for i in 0..g.edges.len() {
        let e = &g.edges[i];
        let slot = &mut best[e.src][e.dst];
        match slot {
            Some(j) if greedy_order(g, *j, i) != Ordering::Greater => {}
            _ => *slot = Some(i),
        }
    }
    let weights: Vec<Vec<Option<f64>>> = best
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| e.map(|i| g.edges[i].score as f64 - threshold))
                .collect()
        })
        .collect();
    let mut accepted: Vec<usize> = max_weight_matching(&weights)
        .into_iter()
        .filter_map(|(s, d)| best[s][d])
        .collect();
    accepted.sort_unstable();
    Ok(accepted)
}

/// Sum of `score - threshold` over the given edges.
pub fn surplus(g: &AssocGraph, accepted: &[usize], threshold: f64) -> f64 {
    accepted
        .iter()
        .map(|&i| g.edges[i].score as f64 - threshold)
        .sum()
}

/// Checks that `edges` form vertex-disjoint paths over `n` nodes.
pub fn check_flow(n: usize, edges: &[(usize, usize)]) -> Result<()> {
    let mut outd = vec![0u32; n];
    let mut ind = vec![0u32; n];
    for &(s, d) in edges {
        if s >= n || d >= n {
            return Err(Error::Invariant(format!("edge {s}->{d} references a missing node")));
        }
        outd[s] += 1;
        ind[d] += 1;
        if outd[s] > 1 || ind[d] > 1 {
            return Err(Error::Invariant(format!(
                "flow constraint violated at edge {s}->{d}"
            )));
        }
    }
    Ok(())
}

/// Splits nodes into maximal paths. Chains are ordered by their head node.
pub fn extract_chains(n: usize, edges: &[(usize, usize)]) -> Result<Vec<Vec<usize>>> {
    check_flow(n, edges)?;
    let mut next = vec![None; n];
    let mut has_pred = vec![false; n];
    for &(s, d) in edges {
        next[s] = Some(d);
        has_pred[d] = true;
    }
    let mut chains = Vec::new();
    let mut seen = 0usize;
    for head in (0..n).filter(|&i| !has_pred[i]) {
        let mut chain = vec![head];
        let mut cur = head;
        while let Some(nx) = next[cur] {
            chain.push(nx);
            cur = nx;
        }
        seen += chain.len();
        chains.push(chain);
    }
    if seen != n {
        return Err(Error::Invariant("accepted edges contain a cycle".into()));
    }
    Ok(chains)
}

/// `(src, dst)` pairs of the given edge indices.
pub fn edge_pairs(g: &AssocGraph, accepted: &[usize]) -> Vec<(usize, usize)> {
    accepted
        .iter()
        .map(|&i| (g.edges[i].src, g.edges[i].dst))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{BBox, Detection, Edge, FeatureBundle, Position, Tracklet, JERSEY_LEN};

    pub(crate) fn node(i: u32, frame: u32) -> Tracklet {
        let d = Detection {
            det_id: i,
            frame,
            bbox: BBox::new(0.0, 0.0, 1.0, 1.0),
            confidence: 1.0,
        };
        let b = FeatureBundle {
            appearance: vec![1.0],
            jersey: vec![0.0; JERSEY_LEN],
            legible: false,
            team: [1.0, 0.0, 0.0],
            position: Position::Field { x: 0.0, y: 0.0 },
        };
        Tracklet::from_detection(i, &d, &b)
    }

    pub(crate) fn graph(frames: &[u32], edges: &[(usize, usize, f32)]) -> AssocGraph {
        AssocGraph {
            level: 1,
            window: (0, 1 + frames.iter().copied().max().unwrap_or(0)),
            nodes: frames
                .iter()
                .enumerate()
                .map(|(i, &f)| node(i as u32, f))
                .collect(),
            edges: edges
                .iter()
                .map(|&(src, dst, score)| Edge {
                    src,
                    dst,
                    features: vec![],
                    score,
                })
                .collect(),
        }
    }

    #[test]
    fn greedy_prefers_higher_score_on_conflict() {
        let g = graph(&[0, 0, 1], &[(0, 2, 0.9), (1, 2, 0.8)]);
        assert_eq!(greedy_round(&g, 0.5), vec![0]);
    }

    #[test]
    fn below_threshold_yields_nothing() {
        let g = graph(&[0, 1, 2], &[(0, 1, 0.4), (1, 2, 0.49)]);
        assert!(greedy_round(&g, 0.5).is_empty());
        assert!(exact_round(&g, 0.5, 200).unwrap().is_empty());
    }

    #[test]
    fn conflict_free_chain_accepts_all() {
        let g = graph(&[0, 1, 2, 3], &[(0, 1, 0.9), (1, 2, 0.9), (2, 3, 0.9)]);
        assert_eq!(greedy_round(&g, 0.5), vec![0, 1, 2]);
        assert_eq!(exact_round(&g, 0.5, 200).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn exact_triangle_prefers_larger_surplus() {
        // a->b 0.6, b->c 0.6, a->c 0.9: {a->c} has surplus 0.4, {a->b, b->c} has 0.2.
        let g = graph(&[0, 1, 2], &[(0, 1, 0.6), (1, 2, 0.6), (0, 2, 0.9)]);
        let acc = exact_round(&g, 0.5, 200).unwrap();
        assert_eq!(acc, vec![2]);
        assert!((surplus(&g, &acc, 0.5) - 0.4).abs() < 1e-6);
    }

    #[test]
    fn exact_single_and_empty() {
        let g = graph(&[0, 1], &[(0, 1, 0.7)]);
        assert_eq!(exact_round(&g, 0.5, 200).unwrap(), vec![0]);
        let g = graph(&[], &[]);
        assert!(exact_round(&g, 0.5, 200).unwrap().is_empty());
        let g = graph(&[0, 1, 2], &[]);
        assert!(exact_round(&g, 0.5, 2).is_err());
    }

    #[test]
    fn chains() {
        assert_eq!(extract_chains(3, &[(0, 1), (1, 2)]).unwrap(), vec![vec![0, 1, 2]]);
        assert_eq!(
            extract_chains(3, &[]).unwrap(),
            vec![vec![0], vec![1], vec![2]]
        );
        assert_eq!(
            extract_chains(4, &[(0, 1), (2, 3)]).unwrap(),
            vec![vec![0, 1], vec![2, 3]]
        );
        assert!(extract_chains(3, &[(0, 1), (0, 2)]).is_err());
        assert!(extract_chains(2, &[(0, 1), (1, 0)]).is_err());
    }
}
