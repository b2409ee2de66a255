use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Point;
use crate::error::{AsdError, Result};

#[derive(PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Mean Euclidean distance from each point to its `k` nearest other points.
///
/// With fewer than `k` other points the mean runs over all of them. Fewer than two
/// points is a [`AsdError::Degenerate`] error.
pub fn knn_mean_distance(points: &[Point], k: usize) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(AsdError::Degenerate(format!(
            "nearest-neighbour distances need at least 2 points, got {}",
            points.len()
        )));
    }
    if k == 0 {
        return Err(AsdError::Argument("k must be >= 1".into()));
    }
    let k = k.min(points.len() - 1);
    let mut heap: BinaryHeap<Dist> = BinaryHeap::with_capacity(k + 1);
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        heap.clear();
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = p.distance(q);
            if heap.len() < k {
                heap.push(Dist(d));
            } else if heap.peek().is_some_and(|top| d < top.0) {
                heap.pop();
                heap.push(Dist(d));
            }
        }
        let mut nearest: Vec<f64> = heap.drain().map(|d| d.0).collect();
        nearest.sort_by(f64::total_cmp);
        out.push(nearest.iter().sum::<f64>() / k as f64);
    }
    Ok(out)
}
