//! DBSCAN over 2-D points with a uniform-grid neighbour index.
//!
//! Labeling is deterministic for a given input order: seeds are visited in
//! index order and a border point reachable from several clusters stays with
//! the first cluster that claims it. [`dbscan_bruteforce`] implements the
//! same procedure with all-pairs neighbourhoods and serves as the reference.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::scalar::Scalar;
use crate::types::Point;

/// Validated DBSCAN parameters. `min_pts` counts the point itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
#[serde(try_from = "RawClusterParams<T>", into = "RawClusterParams<T>")]
pub struct ClusterParams<T: Scalar> {
    eps: T,
    min_pts: usize,
    min_cluster_size: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
struct RawClusterParams<T: Scalar> {
    #[serde(default = "default_eps")]
    eps: T,
    #[serde(default = "default_min_pts")]
    min_pts: usize,
    #[serde(default = "default_min_cluster_size")]
    min_cluster_size: usize,
}

fn default_eps<T: Scalar>() -> T {
    T::of(ClusterParams::<f64>::DEFAULT_EPS)
}
fn default_min_pts() -> usize {
    ClusterParams::<f64>::DEFAULT_MIN_PTS
}
fn default_min_cluster_size() -> usize {
    ClusterParams::<f64>::DEFAULT_MIN_CLUSTER_SIZE
}

impl<T: Scalar> TryFrom<RawClusterParams<T>> for ClusterParams<T> {
    type Error = Error;

    fn try_from(r: RawClusterParams<T>) -> Result<Self> {
        Self::new(r.eps, r.min_pts, r.min_cluster_size)
    }
}

impl<T: Scalar> From<ClusterParams<T>> for RawClusterParams<T> {
    fn from(p: ClusterParams<T>) -> Self {
        Self { eps: p.eps, min_pts: p.min_pts, min_cluster_size: p.min_cluster_size }
    }
}

impl<T: Scalar> ClusterParams<T> {
    /// Connects 8-neighbourhoods on a unit pixel grid.
    pub const DEFAULT_EPS: f64 = 1.5;
    pub const DEFAULT_MIN_PTS: usize = 4;
    pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 12;

    pub fn new(eps: T, min_pts: usize, min_cluster_size: usize) -> Result<Self> {
        if !(eps.is_finite() && eps > T::zero()) {
            return Err(invalid_arg(format!("eps must be positive and finite, got {eps}")));
        }
        if min_pts < 1 {
            return Err(invalid_arg("min_pts must be at least 1"));
        }
        if min_cluster_size < 3 {
            return Err(invalid_arg("min_cluster_size must be at least 3"));
        }
        Ok(Self { eps, min_pts, min_cluster_size })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn min_pts(&self) -> usize {
        self.min_pts
    }

    pub fn min_cluster_size(&self) -> usize {
        self.min_cluster_size
    }
}

impl<T: Scalar> Default for ClusterParams<T> {
    fn default() -> Self {
        Self {
            eps: T::of(Self::DEFAULT_EPS),
            min_pts: Self::DEFAULT_MIN_PTS,
            min_cluster_size: Self::DEFAULT_MIN_CLUSTER_SIZE,
        }
    }
}

/// Cluster assignment of one input point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Cluster(usize),
    Noise,
}

/// Per-point labels with cluster indices contiguous from 0.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterLabels {
    labels: Vec<Label>,
    clusters: usize,
}

impl ClusterLabels {
    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Noise).count()
    }

    /// Point indices of each cluster, in index order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.clusters];
        for (i, l) in self.labels.iter().enumerate() {
            if let Label::Cluster(c) = l {
                out[*c].push(i);
            }
        }
        out
    }
}

trait Neighbours {
    fn query(&self, i: usize, out: &mut Vec<usize>);
}

struct AllPairs<'a, T: Scalar> {
    points: &'a [Point<T>],
    eps2: T,
}

impl<T: Scalar> Neighbours for AllPairs<'_, T> {
    fn query(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = self.points[i];
        out.extend((0..self.points.len()).filter(|&j| p.dist2(self.points[j]) <= self.eps2));
    }
}

/// Uniform grid with cell side `eps`: all neighbours of a point lie in the
/// 3×3 block of cells around it.
struct Grid<'a, T: Scalar> {
    points: &'a [Point<T>],
    eps2: T,
    cells: HashMap<(i64, i64), Vec<usize>>,
    keys: Vec<(i64, i64)>,
}

impl<'a, T: Scalar> Grid<'a, T> {
    fn new(points: &'a [Point<T>], eps: T) -> Self {
        let (mx, my) = points
            .iter()
            .fold((T::infinity(), T::infinity()), |(mx, my), p| (mx.min(p.x), my.min(p.y)));
        let keys: Vec<(i64, i64)> = points
            .iter()
            .map(|p| {
                let cx = ((p.x - mx) / eps).floor().to_i64().unwrap_or(i64::MAX);
                let cy = ((p.y - my) / eps).floor().to_i64().unwrap_or(i64::MAX);
                (cx, cy)
            })
            .collect();
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::with_capacity(points.len());
        for (i, &k) in keys.iter().enumerate() {
            cells.entry(k).or_default().push(i);
        }
        Self { points, eps2: eps * eps, cells, keys }
    }
}

impl<T: Scalar> Neighbours for Grid<'_, T> {
    fn query(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = self.points[i];
        let (cx, cy) = self.keys[i];
        for dy in -1..=1 {
            for dx in -1..=1 {
                let key = (cx.saturating_add(dx), cy.saturating_add(dy));
                if let Some(cell) = self.cells.get(&key) {
                    out.extend(cell.iter().copied().filter(|&j| p.dist2(self.points[j]) <= self.eps2));
                }
            }
        }
        out.sort_unstable();
    }
}

const UNVISITED: usize = usize::MAX;
const NOISE: usize = usize::MAX - 1;

fn run<N: Neighbours>(n: usize, index: &N, min_pts: usize, min_cluster_size: usize) -> ClusterLabels {
    let mut raw = vec![UNVISITED; n];
    let mut next = 0usize;
    let mut nb = Vec::new();
    let mut nb2 = Vec::new();
    let mut seeds: Vec<usize> = Vec::new();
    for i in 0..n {
        if raw[i] != UNVISITED {
            continue;
        }
        index.query(i, &mut nb);
        if nb.len() < min_pts {
            raw[i] = NOISE;
            continue;
        }
        let c = next;
        next += 1;
        raw[i] = c;
        seeds.clear();
        seeds.extend(nb.iter().copied().filter(|&j| j != i));
        let mut k = 0;
        while k < seeds.len() {
            let q = seeds[k];
            k += 1;
            if raw[q] == NOISE {
                raw[q] = c;
                continue;
            }
            if raw[q] != UNVISITED {
                continue;
            }
            raw[q] = c;
            index.query(q, &mut nb2);
            if nb2.len() >= min_pts {
                seeds.extend(nb2.iter().copied().filter(|&j| raw[j] == UNVISITED || raw[j] == NOISE));
            }
        }
    }

    // Drop undersized clusters and renumber the survivors in order.
    let mut sizes = vec![0usize; next];
    for &r in &raw {
        if r < next {
            sizes[r] += 1;
        }
    }
    let mut remap = vec![None; next];
    let mut clusters = 0;
    for (c, &s) in sizes.iter().enumerate() {
        if s >= min_cluster_size {
            remap[c] = Some(clusters);
            clusters += 1;
        }
    }
    let labels = raw
        .into_iter()
        .map(|r| match remap.get(r).copied().flatten() {
            Some(c) => Label::Cluster(c),
            None => Label::Noise,
        })
        .collect();
    ClusterLabels { labels, clusters }
}

/// Grid-indexed DBSCAN (Euclidean metric, `dist ≤ eps` neighbourhoods).
pub fn dbscan<T: Scalar>(points: &[Point<T>], params: &ClusterParams<T>) -> ClusterLabels {
    if points.is_empty() {
        return ClusterLabels::default();
    }
    let grid = Grid::new(points, params.eps);
    run(points.len(), &grid, params.min_pts, params.min_cluster_size)
}

/// Quadratic all-pairs DBSCAN with the same contract as [`dbscan`].
pub fn dbscan_bruteforce<T: Scalar>(points: &[Point<T>], params: &ClusterParams<T>) -> ClusterLabels {
    let index = AllPairs { points, eps2: params.eps * params.eps };
    run(points.len(), &index, params.min_pts, params.min_cluster_size)
}
