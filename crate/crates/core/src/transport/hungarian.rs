//! Square linear assignment by shortest augmenting paths with dual potentials.

/// Minimum-cost perfect matching for the row-major `n x n` matrix `cost`.
///
/// Returns `assignment[row] = column` and the total cost.
pub fn solve(cost: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based arrays with a virtual column 0, as in the classical formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let base = (i0 - 1) * n;
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[base + j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
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
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    (assignment, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row * n + j] + rec(cost, n, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, n, 0, &mut vec![false; n])
    }

    #[test]
    fn small_known_instance() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let (a, total) = solve(&cost, 3);
        assert_eq!(total, 5.0);
        let mut seen = a.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..7, seed in proptest::collection::vec(-50.0..50.0f64, 49)) {
            let cost: Vec<f64> = seed[..n * n].to_vec();
            let (a, total) = solve(&cost, n);
            let mut cols = a.clone();
            cols.sort();
            prop_assert_eq!(cols, (0..n).collect::<Vec<_>>());
            prop_assert!((total - brute_force(&cost, n)).abs() < 1e-9);
        }
    }
}
