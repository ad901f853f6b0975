//! Maximum-weight bipartite assignment (Hungarian algorithm, shortest
//! augmenting paths with potentials, O(n^3)).

/// Solves the maximum-weight perfect assignment on the square padding of a
/// `rows x cols` weight matrix. Padding cells weigh zero.
///
/// Returns the column assigned to each row (`None` when the row was matched
/// to a padding column). Rows are inserted in ascending order and the
/// cheapest column is chosen with the lowest index on ties, so equal inputs
/// always give equal outputs.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.iter().map(Vec::len).max().unwrap_or(0);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    // 1-based cost matrix, minimizing the negated weight
    let cost = |i: usize, j: usize| -> f64 {
        weights
            .get(i - 1)
            .and_then(|r| r.get(j - 1))
            .map_or(0.0, |w| -w)
    };

    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0, j) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
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

    let mut assignment = vec![None; rows];
    for (j, &i) in owner.iter().enumerate().take(n + 1).skip(1) {
        if (1..=rows).contains(&i) && j <= cols {
            assignment[i - 1] = Some(j - 1);
        }
    }
    assignment
}
