//! Maximum-weight bipartite assignment (Hungarian method with potentials).

/// Assigns rows to columns maximizing total weight over a dense `rows × cols` matrix.
///
/// Every row is paired with a distinct column when `rows <= cols` (and vice versa);
/// callers that want "unmatched" semantics should treat zero-weight pairs as unmatched.
/// Returns `assignment[row] = Some(col)`.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        solve_min(rows, cols, |i, j| -weights[i][j])
    } else {
        let by_col = solve_min(cols, rows, |i, j| -weights[j][i]);
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        out
    }
}

/// Minimum-cost assignment of `n` rows into `m >= n` columns.
fn solve_min(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    // 1-based potentials; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Total weight of an assignment.
pub fn assignment_weight(weights: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| weights[r][c]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(weights: &[Vec<f64>]) -> f64 {
        fn go(w: &[Vec<f64>], r: usize, used: &mut Vec<bool>) -> f64 {
            if r == w.len() {
                return 0.0;
            }
            let mut best = go(w, r + 1, used);
            for c in 0..used.len() {
                if !used[c] {
                    used[c] = true;
                    best = best.max(w[r][c] + go(w, r + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        let cols = weights.first().map_or(0, Vec::len);
        go(weights, 0, &mut vec![false; cols])
    }

    #[test]
    fn classic_example() {
        let w = vec![
            vec![7.0, 5.0, 11.0],
            vec![5.0, 4.0, 1.0],
            vec![9.0, 3.0, 2.0],
        ];
        let a = max_weight_assignment(&w);
        assert_eq!(assignment_weight(&w, &a), 24.0);
        assert_eq!(a, vec![Some(2), Some(1), Some(0)]);
    }

    #[test]
    fn empty_and_rectangular() {
        assert!(max_weight_assignment(&[]).is_empty());
        let w = vec![vec![0.1], vec![0.9], vec![0.5]];
        let a = max_weight_assignment(&w);
        assert_eq!(a, vec![None, Some(0), None]);
    }

    proptest! {
        #[test]
        fn optimal_against_enumeration(
            rows in 1usize..6, cols in 1usize..6,
            seed in prop::collection::vec(0.0..1.0f64, 36),
        ) {
            let w: Vec<Vec<f64>> = (0..rows).map(|r| (0..cols).map(|c| seed[r * 6 + c]).collect()).collect();
            let a = max_weight_assignment(&w);
            let mut seen = std::collections::HashSet::new();
            for c in a.iter().flatten() {
                prop_assert!(seen.insert(*c));
            }
            prop_assert!((assignment_weight(&w, &a) - brute(&w)).abs() < 1e-9);
        }
    }
}
