//! Rectangular assignment (Kuhn-Munkres with potentials), shared by rounding and evaluation.

/// Minimum-cost assignment of every row to a distinct column; requires `rows <= cols`.
/// Returns the column of each row.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment needs rows <= cols");
    // 1-based potentials formulation; column 0 is a sentinel.
    let mut u = vec![0f64; n + 1];
    let mut v = vec![0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Maximum-weight matching in a bipartite graph given as a dense weight matrix.
/// Only pairs with `Some(w)` and `w > 0` may be matched. Returns `(row, col)` pairs sorted by row.
pub fn max_weight_matching(weights: &[Vec<Option<f64>>]) -> Vec<(usize, usize)> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    // Pad to square: unmatched rows take zero-weight dummy columns.
    let n = rows.max(cols);
    let mut cost = vec![vec![0f64; n]; n];
    for (r, row) in weights.iter().enumerate() {
        for (c, w) in row.iter().enumerate() {
            if let Some(w) = w {
                if *w > 0.0 {
                    cost[r][c] = -w;
                }
            }
        }
    }
    let sol = min_cost_assignment(&cost);
    let mut out: Vec<(usize, usize)> = sol
        .into_iter()
        .enumerate()
        .filter(|&(r, c)| r < rows && c < cols && matches!(weights[r][c], Some(w) if w > 0.0))
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(w: &[Vec<Option<f64>>]) -> f64 {
        fn rec(w: &[Vec<Option<f64>>], r: usize, used: &mut Vec<bool>) -> f64 {
            if r == w.len() {
                return 0.0;
            }
            let mut best = rec(w, r + 1, used);
            for c in 0..used.len() {
                if let Some(x) = w[r][c] {
                    if x > 0.0 && !used[c] {
                        used[c] = true;
                        best = best.max(x + rec(w, r + 1, used));
                        used[c] = false;
                    }
                }
            }
            best
        }
        let cols = w.first().map_or(0, Vec::len);
        rec(w, 0, &mut vec![false; cols])
    }

    #[test]
    fn matches_brute_force_on_small_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let r = rng.random_range(1..5);
            let c = rng.random_range(1..5);
            let w: Vec<Vec<Option<f64>>> = (0..r)
                .map(|_| {
                    (0..c)
                        .map(|_| rng.random_bool(0.7).then(|| rng.random_range(-0.5..1.0)))
                        .collect()
                })
                .collect();
            let m = max_weight_matching(&w);
            let total: f64 = m.iter().map(|&(a, b)| w[a][b].unwrap()).sum();
            assert!((total - brute(&w)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_inputs() {
        assert!(max_weight_matching(&[]).is_empty());
        assert!(min_cost_assignment(&[]).is_empty());
    }
}
