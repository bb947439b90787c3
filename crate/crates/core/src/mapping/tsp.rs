use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    math::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Closed-tour length under the Euclidean metric.
pub fn tour_length(points: &[Vec<f64>], order: &[usize]) -> f64 {
    let n = order.len();
    (0..n)
        .map(|t| dist(&points[order[t]], &points[order[(t + 1) % n]]))
        .sum()
}

/// Greedy tour from point 0, always stepping to the nearest unvisited point
/// (lowest index on ties).
pub fn nearest_neighbor_tour(points: &[Vec<f64>]) -> Vec<usize> {
    let n = points.len();
    let mut visited = alloc::vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = 0;
    visited[0] = true;
    order.push(0);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| dist(&points[cur], &points[a]).total_cmp(&dist(&points[cur], &points[b])))
            .expect("unvisited point remains");
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    order
}

/// First-improvement 2-opt: reverse `order[i+1..=j]` whenever that
/// shortens the tour, until a full sweep finds nothing.
pub fn two_opt(points: &[Vec<f64>], mut order: Vec<usize>) -> Vec<usize> {
    let n = order.len();
    if n < 4 {
        return order;
    }
    let d = |a: usize, b: usize| dist(&points[a], &points[b]);
    loop {
        let mut improved = false;
        for i in 0..n - 1 {
            for j in (i + 2)..n {
                let (a, b) = (order[i], order[i + 1]);
                let (c, e) = (order[j], order[(j + 1) % n]);
                if e == a {
                    continue;
                }
                let delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
                if delta < -1e-12 {
                    order[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            return order;
        }
    }
}

/// Visiting order of a short closed tour through `points`.
pub fn tsp_hue_order(points: &[Vec<f64>]) -> Result<Vec<usize>> {
    if points.len() < 2 {
        return Err(Error::range("points", "need at least 2"));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("points differ in dimension".into()));
    }
    Ok(two_opt(points, nearest_neighbor_tour(points)))
}

/// Hue in degrees per point, spaced equally around the circle in tour order.
pub fn hue_assignment(order: &[usize]) -> Vec<f64> {
    let n = order.len();
    let mut hues = alloc::vec![0.0; n];
    for (pos, &idx) in order.iter().enumerate() {
        hues[idx] = 360.0 * pos as f64 / n as f64;
    }
    hues
}
