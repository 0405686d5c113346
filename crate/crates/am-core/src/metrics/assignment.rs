//! Exact minimum-cost perfect assignment by shortest augmenting paths with
//! dual potentials (O(n³), dense costs).

/// Returns `assign` with `assign[col] = row` minimizing `Σ cost[row][col]`
/// over permutations, plus the optimal total. `cost` is row-major `n × n`.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert_eq!(cost.len(), n * n);
    const UNASSIGNED: usize = usize::MAX;
    // 1-based columns; column 0 is the virtual root.
    let mut row_of = vec![UNASSIGNED; n + 1];
    let mut u = vec![0.0; n + 1]; // row potentials
    let mut v = vec![0.0; n + 1]; // column potentials
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let base = (i0 - 1) * n;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[base + j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == UNASSIGNED {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assign = vec![0usize; n];
    let mut total = 0.0;
    for j in 1..=n {
        assign[j - 1] = row_of[j] - 1;
        total += cost[(row_of[j] - 1) * n + (j - 1)];
    }
    (assign, total)
}
