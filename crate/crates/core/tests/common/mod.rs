//! Independent oracles and seeded fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use drivable_core::clustering::{ClusterLabels, Label};
use drivable_core::{ConvexPolygon, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cross(o: Point<f64>, a: Point<f64>, b: Point<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Hull vertex set by checking every ordered pair as a candidate edge:
/// `p→q` is a hull edge when no point lies strictly to its right and every
/// collinear point lies on the closed segment. O(n³). Exact for
/// integer-valued coordinates.
pub fn brute_force_hull(points: &[Point<f64>]) -> BTreeSet<(i64, i64)> {
    let mut uniq: Vec<Point<f64>> = Vec::new();
    for &p in points {
        if !uniq.contains(&p) {
            uniq.push(p);
        }
    }
    let mut out = BTreeSet::new();
    for &p in &uniq {
        for &q in &uniq {
            if p == q {
                continue;
            }
            let edge = uniq.iter().all(|&r| {
                let c = cross(p, q, r);
                if c < 0.0 {
                    return false;
                }
                if c > 0.0 {
                    return true;
                }
                let t = (r.x - p.x) * (q.x - p.x) + (r.y - p.y) * (q.y - p.y);
                let len2 = (q.x - p.x).powi(2) + (q.y - p.y).powi(2);
                (0.0..=len2).contains(&t)
            });
            if edge {
                out.insert((p.x as i64, p.y as i64));
                out.insert((q.x as i64, q.y as i64));
            }
        }
    }
    out
}

pub fn vertex_set(poly: &ConvexPolygon<f64>) -> BTreeSet<(i64, i64)> {
    poly.vertices().iter().map(|v| (v.x.round() as i64, v.y.round() as i64)).collect()
}

/// Integer-valued random points, deliberately rich in duplicates and
/// collinear runs.
pub fn lattice_points(rng: &mut ChaCha8Rng, n: usize, span: i64) -> Vec<Point<f64>> {
    (0..n)
        .map(|_| {
            let (x, y) = if rng.gen_bool(0.2) {
                // snap to a common line
                let t = rng.gen_range(0..span);
                (t, t / 2)
            } else {
                (rng.gen_range(0..span), rng.gen_range(0..span))
            };
            Point::new(x as f64, y as f64)
        })
        .collect()
}

pub fn random_convex(rng: &mut ChaCha8Rng, center: (f64, f64), radius: f64) -> ConvexPolygon<f64> {
    loop {
        let n = rng.gen_range(3..12);
        let pts: Vec<Point<f64>> = (0..n)
            .map(|_| {
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = radius * rng.gen_range(0.3..1.0);
                Point::new(center.0 + r * a.cos(), center.1 + r * a.sin())
            })
            .collect();
        if let Some(h) = drivable_core::convex_hull(&pts) {
            return h;
        }
    }
}

/// Blob-structured point cloud with scattered noise, on a 0.5 px lattice.
pub fn clustered_points(rng: &mut ChaCha8Rng, max_points: usize) -> Vec<Point<f64>> {
    let n = rng.gen_range(1..=max_points);
    let blobs: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..6))
        .map(|_| (rng.gen_range(0.0..80.0), rng.gen_range(0.0..80.0), rng.gen_range(1.0..6.0)))
        .collect();
    (0..n)
        .map(|_| {
            let (x, y) = if rng.gen_bool(0.15) {
                (rng.gen_range(0.0..90.0), rng.gen_range(0.0..90.0))
            } else {
                let &(cx, cy, r) = &blobs[rng.gen_range(0..blobs.len())];
                (cx + rng.gen_range(-r..r), cy + rng.gen_range(-r..r))
            };
            Point::new((x * 2.0).round() / 2.0, (y * 2.0).round() / 2.0)
        })
        .collect()
}

/// True when both labelings have the same noise points and the same
/// clusters up to a relabeling.
pub fn same_partition(a: &ClusterLabels, b: &ClusterLabels) -> bool {
    if a.len() != b.len() || a.cluster_count() != b.cluster_count() {
        return false;
    }
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    let mut used: BTreeSet<usize> = BTreeSet::new();
    for (la, lb) in a.labels().iter().zip(b.labels()) {
        match (la, lb) {
            (Label::Noise, Label::Noise) => {}
            (Label::Cluster(x), Label::Cluster(y)) => match map.get(x) {
                Some(m) if m != y => return false,
                Some(_) => {}
                None => {
                    if !used.insert(*y) {
                        return false;
                    }
                    map.insert(*x, *y);
                }
            },
            _ => return false,
        }
    }
    true
}

/// Monte-Carlo estimate of the area of `{p : inside(p)}` within a box.
pub fn monte_carlo_area(rng: &mut ChaCha8Rng, bbox: (f64, f64, f64, f64), samples: usize, inside: impl Fn(Point<f64>) -> bool) -> f64 {
    let (x0, y0, x1, y1) = bbox;
    let hits = (0..samples)
        .filter(|_| inside(Point::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1))))
        .count();
    (x1 - x0) * (y1 - y0) * hits as f64 / samples as f64
}
