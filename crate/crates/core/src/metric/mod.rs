//! Discrete LFPP metric on the 8-neighbor torus lattice.
//!
//! Edge `(u, v)` weighs `exp(xi * (phi(u) + phi(v)) / 2) * |u - v|`, so a
//! constant shift of `phi` rescales every path length by the same factor.

mod annulus;
mod search;

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MollifiedField;
use crate::grid::{GridSpec, LatticeField, Point};

pub use annulus::{across, across_path, around, around_cycle, canonical_cycle, separates, AnnulusCells, AnnulusSpec, SeparatingCycle};
pub use search::{DistanceField, NO_PRED};

/// Distance between vertex sets with no connecting path.
pub const UNREACHABLE: f64 = f64::INFINITY;

/// Forward directions stored per vertex: E, N, NE, NW.
const FORWARD: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (-1, 1)];

/// All eight neighbor offsets paired with (stored direction, stored at self?).
const NEIGHBORS: [(isize, isize, usize, bool); 8] = [
    (1, 0, 0, true),
    (0, 1, 1, true),
    (1, 1, 2, true),
    (-1, 1, 3, true),
    (-1, 0, 0, false),
    (0, -1, 1, false),
    (-1, -1, 2, false),
    (1, -1, 3, false),
];

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeMetric {
    grid: GridSpec,
    xi: f64,
    epsilon: f64,
    weights: [Vec<f64>; 4],
    mask: Option<Vec<bool>>,
}

pub fn build_metric(phi: &MollifiedField, xi: f64, mask: Option<&[usize]>) -> Result<LatticeMetric> {
    LatticeMetric::from_potential(*phi.spec(), xi, phi.epsilon(), phi.values(), mask)
}

impl LatticeMetric {
    pub fn from_potential(grid: GridSpec, xi: f64, epsilon: f64, phi: &[f64], mask: Option<&[usize]>) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::NonPositiveXi(xi));
        }
        if phi.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), got: phi.len() });
        }
        let s = grid.spacing();
        let weights = FORWARD.map(|(di, dj)| {
            let len = if di != 0 && dj != 0 { s * SQRT_2 } else { s };
            (0..grid.len())
                .map(|v| {
                    let u = grid.offset(v, di, dj);
                    libm::exp(xi * (phi[v] + phi[u]) / 2.0) * len
                })
                .collect::<Vec<f64>>()
        });
        if weights.iter().flatten().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter("edge weights must be positive and finite"));
        }
        let mask = match mask {
            Some(vs) => {
                let mut m = vec![false; grid.len()];
                for &v in vs {
                    if v >= grid.len() {
                        return Err(Error::VertexOutOfRange(v));
                    }
                    m[v] = true;
                }
                Some(m)
            }
            None => None,
        };
        Ok(Self { grid, xi, epsilon, weights, mask })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_masked(&self, v: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m[v])
    }

    pub fn has_mask(&self) -> bool {
        self.mask.is_some()
    }

    /// Same metric with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for w in out.weights.iter_mut().flatten() {
            *w *= factor;
        }
        out
    }

    /// Calls `f(neighbor, weight)` for each usable edge at `u`.
    #[inline]
    pub fn for_each_neighbor(&self, u: usize, mut f: impl FnMut(usize, f64)) {
        if self.is_masked(u) {
            return;
        }
        let n = self.grid.n();
        let i = u % n;
        let j = u / n;
        let left = if i == 0 { n - 1 } else { i - 1 };
        let right = if i + 1 == n { 0 } else { i + 1 };
        let down = if j == 0 { n - 1 } else { j - 1 };
        let up = if j + 1 == n { 0 } else { j + 1 };
        for &(di, dj, dir, own) in &NEIGHBORS {
            let vi = match di {
                -1 => left,
                1 => right,
                _ => i,
            };
            let vj = match dj {
                -1 => down,
                1 => up,
                _ => j,
            };
            let v = vj * n + vi;
            if self.is_masked(v) {
                continue;
            }
            let w = if own { self.weights[dir][u] } else { self.weights[dir][v] };
            f(v, w);
        }
    }

    /// Weight of the edge `u - v`, or `None` if they are not adjacent or the
    /// edge is unusable.
    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        let mut out = None;
        self.for_each_neighbor(u, |x, w| {
            if x == v {
                out = Some(w);
            }
        });
        out
    }

    /// Sum of edge weights along `path`, accumulated from its first vertex.
    pub fn path_length(&self, path: &[usize]) -> Result<f64> {
        path.windows(2)
            .try_fold(0.0, |acc, e| self.edge_weight(e[0], e[1]).map(|w| acc + w).ok_or(Error::InvalidParameter("path uses a non-edge")))
    }

    pub(crate) fn check_vertices(&self, set: &[usize]) -> Result<()> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        for &v in set {
            if v >= self.grid.len() {
                return Err(Error::VertexOutOfRange(v));
            }
            if self.is_masked(v) {
                return Err(Error::MaskedVertex(v));
            }
        }
        Ok(())
    }

    /// Full single-source (or multi-source) shortest-path table.
    pub fn distance_field(&self, sources: &[usize], region: Option<&Region>) -> Result<DistanceField> {
        self.check_vertices(sources)?;
        let seeds: Vec<(usize, f64)> = sources.iter().map(|&v| (v, 0.0)).collect();
        Ok(search::dijkstra(self, &seeds, region.map(|r| r.members()), None, f64::INFINITY).0)
    }
}

/// Vertex membership mask used to restrict paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    member: Vec<bool>,
}

impl Region {
    pub fn all(grid: &GridSpec) -> Self {
        Self { member: vec![true; grid.len()] }
    }

    pub fn from_vertices(grid: &GridSpec, vertices: &[usize]) -> Result<Self> {
        let mut member = vec![false; grid.len()];
        for &v in vertices {
            if v >= grid.len() {
                return Err(Error::VertexOutOfRange(v));
            }
            member[v] = true;
        }
        Ok(Self { member })
    }

    pub fn from_mask(member: Vec<bool>) -> Self {
        Self { member }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.member.get(v).copied().unwrap_or(false)
    }

    pub fn members(&self) -> &[bool] {
        &self.member
    }

    pub fn vertices(&self) -> Vec<usize> {
        (0..self.member.len()).filter(|&v| self.member[v]).collect()
    }

    /// Region plus every vertex with an edge into it.
    pub fn closure(&self, grid: &GridSpec) -> Self {
        let mut member = self.member.clone();
        for v in (0..grid.len()).filter(|&v| self.member[v]) {
            for &(di, dj, _, _) in &NEIGHBORS {
                member[grid.offset(v, di, dj)] = true;
            }
        }
        Self { member }
    }
}

/// Shortest path with its weight; consecutive vertices are adjacent and the
/// weight equals the metric distance between the endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub vertices: Vec<usize>,
    pub length: f64,
}

impl GeodesicPath {
    pub fn empty() -> Self {
        Self { vertices: Vec::new(), length: UNREACHABLE }
    }

    fn verified(metric: &LatticeMetric, vertices: Vec<usize>, distance: f64) -> Result<Self> {
        let length = metric.path_length(&vertices)?;
        let mut seen = vertices.clone();
        seen.sort_unstable();
        seen.dedup();
        if length != distance || seen.len() != vertices.len() {
            return Err(Error::AuditFailed);
        }
        Ok(Self { vertices, length })
    }

    /// Running distance from the first vertex at each path vertex.
    pub fn cumulative(&self, metric: &LatticeMetric) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for e in self.vertices.windows(2) {
            acc += metric.edge_weight(e[0], e[1]).unwrap_or(f64::NAN);
            out.push(acc);
        }
        out.truncate(self.vertices.len());
        out
    }
}

/// Exit-cost table with zero cost on `set` and infinity elsewhere.
fn exit_costs(len: usize, set: &[usize]) -> Vec<f64> {
    let mut m = vec![f64::INFINITY; len];
    for &v in set {
        m[v] = 0.0;
    }
    m
}

/// `inf_{a in A, b in B} d(a, b)` and one realizing path. Returns
/// [`UNREACHABLE`] with an empty path when no route exists.
pub fn distance(metric: &LatticeMetric, a: &[usize], b: &[usize]) -> Result<(f64, GeodesicPath)> {
    metric.check_vertices(a)?;
    metric.check_vertices(b)?;
    let len = metric.grid().len();
    let targets = exit_costs(len, b);
    if a.iter().any(|&v| targets[v] == 0.0) {
        return Err(Error::OverlappingSets);
    }
    restricted(metric, a, &targets, None)
}

fn restricted(metric: &LatticeMetric, a: &[usize], targets: &[f64], region: Option<&[bool]>) -> Result<(f64, GeodesicPath)> {
    let seeds: Vec<(usize, f64)> = a.iter().map(|&v| (v, 0.0)).collect();
    let (field, reached) = search::dijkstra(metric, &seeds, region, Some(targets), f64::INFINITY);
    match reached {
        Some(t) => {
            let d = field.dist[t];
            Ok((d, GeodesicPath::verified(metric, field.path_to(t), d)?))
        }
        None => Ok((UNREACHABLE, GeodesicPath::empty())),
    }
}

/// Distance from `a` to `b` using only vertices of `region`.
pub fn internal_distance(metric: &LatticeMetric, a: &[usize], b: &[usize], region: &Region) -> Result<f64> {
    internal_path(metric, a, b, region).map(|(d, _)| d)
}

pub fn internal_path(metric: &LatticeMetric, a: &[usize], b: &[usize], region: &Region) -> Result<(f64, GeodesicPath)> {
    metric.check_vertices(a)?;
    metric.check_vertices(b)?;
    if let Some(&v) = a.iter().chain(b).find(|&&v| !region.contains(v)) {
        return Err(Error::OutsideRegion(v));
    }
    let targets = exit_costs(metric.grid().len(), b);
    if a.iter().any(|&v| targets[v] == 0.0) {
        return Ok((0.0, GeodesicPath { vertices: Vec::new(), length: 0.0 }));
    }
    restricted(metric, a, &targets, Some(region.members()))
}

/// Axis-aligned square `[origin, origin + side]^2` snapped to the lattice,
/// with its left and right columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareCells {
    pub region: Region,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl SquareCells {
    pub fn new(grid: &GridSpec, side: f64, origin: Point) -> Result<Self> {
        let s = grid.spacing();
        let n = grid.n() as f64;
        let snap = 1e-9;
        let i0 = libm::ceil(origin.x / s - snap);
        let j0 = libm::ceil(origin.y / s - snap);
        let i1 = libm::floor((origin.x + side) / s + snap);
        let j1 = libm::floor((origin.y + side) / s + snap);
        if !(side > 0.0) || i0 < 0.0 || j0 < 0.0 || i1 >= n || j1 >= n || i1 <= i0 || j1 < j0 {
            return Err(Error::SquareOutsideDomain { side });
        }
        let (i0, i1, j0, j1) = (i0 as usize, i1 as usize, j0 as usize, j1 as usize);
        let mut member = vec![false; grid.len()];
        for j in j0..=j1 {
            for i in i0..=i1 {
                member[grid.index(i, j)] = true;
            }
        }
        Ok(Self {
            region: Region::from_mask(member),
            left: (j0..=j1).map(|j| grid.index(i0, j)).collect(),
            right: (j0..=j1).map(|j| grid.index(i1, j)).collect(),
        })
    }

    /// Square of the given side centered on `center`.
    pub fn centered(grid: &GridSpec, side: f64, center: Point) -> Result<Self> {
        Self::new(grid, side, Point::new(center.x - side / 2.0, center.y - side / 2.0))
    }
}

/// Left-right crossing distance of the square with lower-left corner `origin`.
pub fn crossing_distance(metric: &LatticeMetric, square_side: f64, origin: Point) -> Result<f64> {
    let sq = SquareCells::new(metric.grid(), square_side, origin)?;
    crossing_of(metric, &sq)
}

pub fn crossing_of(metric: &LatticeMetric, sq: &SquareCells) -> Result<f64> {
    let left: Vec<usize> = sq.left.iter().copied().filter(|&v| !metric.is_masked(v)).collect();
    let right: Vec<usize> = sq.right.iter().copied().filter(|&v| !metric.is_masked(v)).collect();
    if left.is_empty() || right.is_empty() {
        return Ok(UNREACHABLE);
    }
    internal_distance(metric, &left, &right, &sq.region)
}

/// Shortest path between two vertices with deterministic tie-breaking.
pub fn geodesic(metric: &LatticeMetric, z: usize, w: usize) -> Result<GeodesicPath> {
    if z == w {
        return Err(Error::OverlappingSets);
    }
    let (d, path) = distance(metric, &[z], &[w])?;
    if !d.is_finite() {
        return Err(Error::Unreachable);
    }
    Ok(path)
}

/// Point-to-point distance, [`UNREACHABLE`] if disconnected, 0 if `z == w`.
pub fn vertex_distance(metric: &LatticeMetric, z: usize, w: usize) -> Result<f64> {
    if z == w {
        metric.check_vertices(&[z])?;
        return Ok(0.0);
    }
    distance(metric, &[z], &[w]).map(|(d, _)| d)
}

/// `{v : d(z, v) <= s}`, sorted by vertex index.
pub fn ball(metric: &LatticeMetric, z: usize, s: f64) -> Result<Vec<usize>> {
    metric.check_vertices(&[z])?;
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter("ball radius must be non-negative"));
    }
    let (field, _) = search::dijkstra(metric, &[(z, 0.0)], None, None, s);
    Ok((0..field.dist.len()).filter(|&v| field.dist[v] <= s).collect())
}

/// Fraction of unordered target pairs whose geodesics from `z` share their
/// first `k` steps (the `k` vertices after `z`). Duplicate targets are
/// merged; fewer than two targets give 1 by convention.
pub fn confluence_fraction(metric: &LatticeMetric, z: usize, targets: &[usize], k: usize) -> Result<f64> {
    metric.check_vertices(&[z])?;
    let mut targets = targets.to_vec();
    targets.sort_unstable();
    targets.dedup();
    if targets.len() < 2 {
        return Ok(1.0);
    }
    metric.check_vertices(&targets)?;
    let n = metric.grid().n() as isize;
    let (zi, zj) = metric.grid().coords(z);
    for &t in &targets {
        let (ti, tj) = metric.grid().coords(t);
        let wrap = |d: isize| (d + n / 2).rem_euclid(n) - n / 2;
        let hops = wrap(ti as isize - zi as isize).abs().max(wrap(tj as isize - zj as isize).abs());
        if hops as usize <= k {
            return Err(Error::InvalidParameter("targets must be more than k steps from the source"));
        }
    }
    let field = metric.distance_field(&[z], None)?;
    let prefixes: Vec<Option<Vec<usize>>> = targets
        .iter()
        .map(|&t| {
            let p = field.path_to(t);
            (p.len() > k).then(|| p[1..=k].to_vec())
        })
        .collect();
    let mut pairs = 0usize;
    let mut shared = 0usize;
    for a in 0..prefixes.len() {
        for b in a + 1..prefixes.len() {
            pairs += 1;
            if let (Some(pa), Some(pb)) = (&prefixes[a], &prefixes[b]) {
                if pa == pb {
                    shared += 1;
                }
            }
        }
    }
    Ok(shared as f64 / pairs as f64)
}
