use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::LatticeMetric;

pub const NO_PRED: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
pub(crate) struct HeapEntry {
    pub dist: f64,
    pub vertex: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Min-heap on (dist, vertex).
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

/// Shortest-path table from a source set.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub sources: Vec<usize>,
    pub dist: Vec<f64>,
    pub pred: Vec<usize>,
}

impl DistanceField {
    /// Vertex sequence from the source set to `v`, or empty if unreached.
    pub fn path_to(&self, v: usize) -> Vec<usize> {
        if !self.dist[v].is_finite() {
            return Vec::new();
        }
        let mut path = vec![v];
        let mut cur = v;
        while self.pred[cur] != NO_PRED {
            cur = self.pred[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }

    /// Checks `dist(v) <= dist(u) + w(u, v)` on every usable edge inside
    /// `allowed`, for vertices whose distance is final (below `limit`).
    pub fn audit(&self, metric: &LatticeMetric, allowed: Option<&[bool]>) -> bool {
        let inside = |v: usize| allowed.is_none_or(|a| a[v]);
        (0..metric.grid().len()).filter(|&u| inside(u) && self.dist[u].is_finite()).all(|u| {
            let mut ok = true;
            metric.for_each_neighbor(u, |v, w| {
                if inside(v) && self.dist[v] > self.dist[u] + w {
                    ok = false;
                }
            });
            ok
        })
    }
}

/// Dijkstra over the lattice, restricted to `allowed`.
///
/// `sources` carry initial distances. `exit` holds a finite exit cost for
/// each target vertex; the search stops once no target can improve on the
/// best `dist + exit` seen, or once distances exceed `limit`. Ties in the
/// heap pop the lower vertex index first; equal-distance relaxations keep the
/// lower predecessor index.
pub(crate) fn dijkstra(
    metric: &LatticeMetric,
    sources: &[(usize, f64)],
    allowed: Option<&[bool]>,
    exit: Option<&[f64]>,
    limit: f64,
) -> (DistanceField, Option<usize>) {
    let len = metric.grid().len();
    let mut dist = vec![f64::INFINITY; len];
    let mut pred = vec![NO_PRED; len];
    let mut done = vec![false; len];
    let mut heap = BinaryHeap::new();
    for &(s, d0) in sources {
        if d0 < dist[s] {
            dist[s] = d0;
            heap.push(HeapEntry { dist: d0, vertex: s });
        }
    }
    let mut best = f64::INFINITY;
    let mut reached = None;
    while let Some(HeapEntry { dist: d, vertex: u }) = heap.pop() {
        if done[u] || d > dist[u] {
            continue;
        }
        if d > limit || d >= best {
            break;
        }
        done[u] = true;
        if let Some(e) = exit {
            if d + e[u] < best {
                best = d + e[u];
                reached = Some(u);
            }
        }
        metric.for_each_neighbor(u, |v, w| {
            if allowed.is_some_and(|a| !a[v]) || done[v] {
                return;
            }
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = u;
                heap.push(HeapEntry { dist: nd, vertex: v });
            } else if nd == dist[v] && pred[v] != NO_PRED && u < pred[v] {
                pred[v] = u;
            }
        });
    }
    // Anything tentative beyond the stopping point is not final.
    for v in 0..len {
        if !done[v] {
            dist[v] = f64::INFINITY;
            pred[v] = NO_PRED;
        }
    }
    let sources = sources.iter().map(|&(s, _)| s).collect();
    (DistanceField { sources, dist, pred }, reached)
}
