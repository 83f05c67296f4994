//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid (lowest index on ties) and its squared distance.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(point, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

pub fn predict(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points.par_iter().map(|p| nearest(p, centroids).0).collect()
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // every remaining point coincides with a center
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Clusters `points` into `k` groups.
///
/// Iterates until no assignment changes or `max_iters` updates have run. An
/// empty cluster is re-seeded at the point farthest from its current centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={}", points.len())));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("points differ in dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignments = predict(points, &centroids);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        let mut reseeded = false;
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                let n = counts[c] as f64;
                centroids[c] = sums[c].iter().map(|s| s / n).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = points
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken.contains(i))
                    .map(|(i, p)| (i, sq_dist(p, &centroids[assignments[i]])))
                    .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
                    .0;
                tracing::warn!(cluster = c, point = far, "empty k-means cluster re-seeded");
                centroids[c] = points[far].clone();
                taken.push(far);
                reseeded = true;
            }
        }
        let next = predict(points, &centroids);
        if next == assignments && !reseeded {
            converged = true;
            break;
        }
        assignments = next;
    }
    Ok(KMeansResult {
        assignments,
        centroids,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 1.0]];
        let res = kmeans(&pts, 1, 0, 10).unwrap();
        assert!(res.assignments.iter().all(|&a| a == 0));
        assert!((res.centroids[0][0] - 3.0).abs() < 1e-12);
        assert!((res.centroids[0][1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn separated_blobs_split_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pts = Vec::new();
        for i in 0..200 {
            let c = if i < 100 { -10.0 } else { 10.0 };
            pts.push(vec![c + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        }
        for seed in 0..5 {
            let res = kmeans(&pts, 2, seed, 100).unwrap();
            assert!(res.converged);
            let first = res.assignments[0];
            assert!(res.assignments[..100].iter().all(|&a| a == first));
            assert!(res.assignments[100..].iter().all(|&a| a != first));
        }
    }

    #[test]
    fn converged_state_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let res = kmeans(&pts, 5, 1, 500).unwrap();
        assert!(res.converged);
        assert_eq!(predict(&pts, &res.centroids), res.assignments);
        for c in 0..5 {
            let members: Vec<&Vec<f64>> = pts.iter().zip(&res.assignments).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
            for d in 0..3 {
                let mean = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
                assert!((mean - res.centroids[c][d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_and_handles_duplicates() {
        let pts = vec![vec![0.0]; 5];
        let a = kmeans(&pts, 3, 2, 10).unwrap();
        assert_eq!(a, kmeans(&pts, 3, 2, 10).unwrap());
        assert!(kmeans(&pts, 6, 0, 10).is_err());
        assert!(kmeans(&pts, 2, 0, 0).is_err());
    }
}
