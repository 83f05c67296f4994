//! One-to-one cluster/class matching (Hungarian algorithm).

/// Minimum-cost assignment for a square cost matrix; returns the column of each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // potentials-based O(n^3) formulation, 1-indexed internally
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
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
            }
            for j in 0..=n {
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
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of items whose cluster maps to their class under the best one-to-one matching.
pub fn matched_accuracy(clusters: &[usize], classes: &[usize]) -> f64 {
    assert_eq!(clusters.len(), classes.len(), "label sequences differ in length");
    if clusters.is_empty() {
        return 0.0;
    }
    let rows = clusters.iter().max().unwrap() + 1;
    let cols = classes.iter().max().unwrap() + 1;
    let n = rows.max(cols);
    let mut counts = vec![vec![0.0; n]; n];
    for (&c, &t) in clusters.iter().zip(classes) {
        counts[c][t] += 1.0;
    }
    let cost: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|&v| -v).collect()).collect();
    let matched: f64 = hungarian(&cost)
        .iter()
        .enumerate()
        .map(|(r, &c)| counts[r][c])
        .sum();
    matched / clusters.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permuted_labels_are_fully_matched() {
        assert_eq!(matched_accuracy(&[2, 2, 0, 0, 1], &[0, 0, 1, 1, 2]), 1.0);
    }

    #[test]
    fn classic_cost_matrix() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn more_clusters_than_classes() {
        // cluster 2 is left unmatched
        assert!((matched_accuracy(&[0, 1, 2, 2], &[0, 1, 1, 1]) - 0.75).abs() < 1e-12);
    }
}
