//! Distances across and around lattice annuli.
//!
//! `around` finds the lightest closed walk inside the annulus that crosses a
//! fixed horizontal ray from the center an odd number of times. The search
//! runs Dijkstra on the two-sheeted cover of the annulus graph (sheet =
//! crossing parity): a path from `(s, 0)` to `(s, 1)` projects to an
//! odd-winding closed walk through `s`. The lightest such walk is a simple
//! cycle, and every odd-winding cycle separates the two boundary circles.

use alloc::collections::{BTreeSet, BinaryHeap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::search::{dijkstra, HeapEntry};
use super::{GeodesicPath, LatticeMetric, Region, NEIGHBORS, UNREACHABLE};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point};

/// Closed annulus `r_inner <= |x - center| <= r_outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub center: Point,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl AnnulusSpec {
    pub fn new(center: Point, r_inner: f64, r_outer: f64) -> Self {
        Self { center, r_inner, r_outer }
    }

    /// Same shape scaled about its center.
    pub fn scaled(&self, r: f64) -> Self {
        Self { center: self.center, r_inner: self.r_inner * r, r_outer: self.r_outer * r }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let s = grid.spacing();
        if !(self.r_inner >= 2.0 * s) {
            return Err(Error::DegenerateAnnulus("inner radius below two lattice spacings"));
        }
        if !(self.r_outer > self.r_inner) {
            return Err(Error::DegenerateAnnulus("outer radius must exceed inner radius"));
        }
        if !(self.r_outer + 2.0 * s < grid.side_length() / 2.0) {
            return Err(Error::DegenerateAnnulus("annulus does not fit in the torus"));
        }
        Ok(())
    }
}

/// Lattice vertices of an annulus with local indexing and boundary flags.
#[derive(Debug, Clone)]
pub struct AnnulusCells {
    pub vertices: Vec<usize>,
    /// Displacement from the center in lattice units, unwrapped.
    pub rel: Vec<(f64, f64)>,
    pub inner: Vec<usize>,
    pub outer: Vec<usize>,
    pub r_inner: f64,
    pub r_outer: f64,
    pub center_units: (f64, f64),
    local: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl AnnulusCells {
    pub fn new(grid: &GridSpec, a: &AnnulusSpec) -> Result<Self> {
        a.validate(grid)?;
        let s = grid.spacing();
        let n = grid.n() as i64;
        let (cx, cy) = (a.center.x / s, a.center.y / s);
        let (r1, r2) = (a.r_inner / s, a.r_outer / s);
        let (r1s, r2s) = (r1 * r1, r2 * r2);
        let reach = libm::ceil(r2) as i64 + 1;
        let (bx, by) = (libm::floor(cx) as i64, libm::floor(cy) as i64);
        let mut local = vec![NONE; grid.len()];
        let mut vertices = Vec::new();
        let mut rel = Vec::new();
        let mut inner = Vec::new();
        let mut outer = Vec::new();
        for y in by - reach..=by + reach {
            for x in bx - reach..=bx + reach {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let d2 = dx * dx + dy * dy;
                if d2 < r1s || d2 > r2s {
                    continue;
                }
                let v = grid.index(x.rem_euclid(n) as usize, y.rem_euclid(n) as usize);
                local[v] = vertices.len() as u32;
                let (mut touches_in, mut touches_out) = (false, false);
                for &(di, dj, _, _) in &NEIGHBORS {
                    let (ex, ey) = (dx + di as f64, dy + dj as f64);
                    let e2 = ex * ex + ey * ey;
                    touches_in |= e2 < r1s;
                    touches_out |= e2 > r2s;
                }
                if touches_in {
                    inner.push(v);
                }
                if touches_out {
                    outer.push(v);
                }
                vertices.push(v);
                rel.push((dx, dy));
            }
        }
        if inner.is_empty() || outer.is_empty() {
            return Err(Error::DegenerateAnnulus("empty boundary"));
        }
        Ok(Self { vertices, rel, inner, outer, r_inner: a.r_inner, r_outer: a.r_outer, center_units: (cx, cy), local })
    }

    pub fn contains(&self, v: usize) -> bool {
        self.local[v] != NONE
    }

    pub fn local_index(&self, v: usize) -> Option<usize> {
        let l = self.local[v];
        (l != NONE).then_some(l as usize)
    }

    pub fn region(&self) -> Region {
        Region::from_mask(self.local.iter().map(|&l| l != NONE).collect())
    }
}

/// Distance across: the lightest path inside the closed annulus from an
/// inner-boundary vertex to an outer-boundary vertex, where each end is
/// charged half the weight of its lightest edge leaving the annulus. The half
/// edges measure from the boundary circles rather than from the outermost
/// lattice layers, so the flat metric gives `r_outer - r_inner` to within one
/// lattice step.
pub fn across(metric: &LatticeMetric, a: &AnnulusSpec) -> Result<f64> {
    across_path(metric, a).map(|(d, _)| d)
}

/// Half the lightest usable edge from `v` to a vertex outside the annulus on
/// the given side, or infinity.
fn stub(metric: &LatticeMetric, cells: &AnnulusCells, v: usize, inward: bool) -> f64 {
    let mut best = f64::INFINITY;
    let l = cells.local_index(v).expect("annulus vertex");
    let (dx, dy) = cells.rel[l];
    metric.for_each_neighbor(v, |u, w| {
        if cells.contains(u) {
            return;
        }
        let (di, dj) = lattice_step(metric.grid(), v, u);
        let (ex, ey) = (dx + di as f64, dy + dj as f64);
        let r2 = ex * ex + ey * ey;
        let toward_center = r2 < dx * dx + dy * dy;
        if toward_center == inward {
            best = best.min(w / 2.0);
        }
    });
    best
}

/// Signed unit step from `v` to its neighbor `u`.
pub(crate) fn lattice_step(grid: &GridSpec, v: usize, u: usize) -> (isize, isize) {
    let n = grid.n() as isize;
    let (vi, vj) = grid.coords(v);
    let (ui, uj) = grid.coords(u);
    let wrap = |d: isize| (d + n / 2).rem_euclid(n) - n / 2;
    (wrap(ui as isize - vi as isize), wrap(uj as isize - vj as isize))
}

/// Across distance with the realizing in-annulus path.
pub fn across_path(metric: &LatticeMetric, a: &AnnulusSpec) -> Result<(f64, GeodesicPath)> {
    let cells = AnnulusCells::new(metric.grid(), a)?;
    let len = metric.grid().len();
    let seeds: Vec<(usize, f64)> = cells
        .inner
        .iter()
        .filter(|&&v| !metric.is_masked(v))
        .map(|&v| (v, stub(metric, &cells, v, true)))
        .filter(|s| s.1.is_finite())
        .collect();
    let mut exit = vec![f64::INFINITY; len];
    for &v in cells.outer.iter().filter(|&&v| !metric.is_masked(v)) {
        exit[v] = stub(metric, &cells, v, false);
    }
    if seeds.is_empty() || exit.iter().all(|e| e.is_infinite()) {
        return Ok((UNREACHABLE, GeodesicPath::empty()));
    }
    let region = cells.region();
    let (field, reached) = dijkstra(metric, &seeds, Some(region.members()), Some(&exit), f64::INFINITY);
    let Some(t) = reached else {
        return Ok((UNREACHABLE, GeodesicPath::empty()));
    };
    let vertices = field.path_to(t);
    let length = metric.path_length(&vertices)?;
    Ok((field.dist[t] + exit[t], GeodesicPath { vertices, length }))
}

/// A closed lattice walk, listed without repeating the start vertex.
/// Separating cycle in canonical order: it starts at its smallest vertex index
/// and continues toward the smaller of that vertex's two cycle neighbors. The
/// length is summed along this order, closing edge last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatingCycle {
    pub vertices: Vec<usize>,
    pub length: f64,
}

impl SeparatingCycle {
    /// Consecutive vertex pairs including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.vertices.len();
        (0..k).map(move |t| (self.vertices[t], self.vertices[(t + 1) % k]))
    }
}

/// Distance around: weight of the lightest lattice cycle in the annulus that
/// separates its inner boundary from its outer boundary.
pub fn around(metric: &LatticeMetric, a: &AnnulusSpec) -> Result<f64> {
    around_cycle(metric, a).map(|c| c.length)
}

struct CoverGraph {
    /// `(neighbor local index, weight, flips parity)` per local vertex.
    adj: Vec<Vec<(u32, f64, bool)>>,
    sources: Vec<usize>,
}

fn cover_graph(metric: &LatticeMetric, cells: &AnnulusCells, a: &AnnulusSpec) -> CoverGraph {
    let s = metric.grid().spacing();
    let cy = a.center.y / s;
    // Ray y = ray_y (relative units), halfway between lattice rows.
    let ray_y = libm::floor(cy) + 0.5 - cy;
    let m = cells.vertices.len();
    let mut adj = vec![Vec::new(); m];
    let mut sources = BTreeSet::new();
    for (lu, &u) in cells.vertices.iter().enumerate() {
        let (xu, yu) = cells.rel[lu];
        metric.for_each_neighbor(u, |v, w| {
            let Some(lv) = cells.local_index(v) else { return };
            // Neighbor displacement must be consistent with the unwrapped frame.
            let (xv, yv) = cells.rel[lv];
            debug_assert!((xv - xu).abs() <= 1.0 + 1e-9 && (yv - yu).abs() <= 1.0 + 1e-9);
            let flips = (yu - ray_y) * (yv - ray_y) < 0.0 && {
                let t = (ray_y - yu) / (yv - yu);
                xu + t * (xv - xu) > 0.0
            };
            if flips && yu < ray_y {
                sources.insert((u, lu));
            }
            adj[lu].push((lv as u32, w, flips));
        });
    }
    CoverGraph { adj, sources: sources.into_iter().map(|(_, l)| l).collect() }
}

pub fn around_cycle(metric: &LatticeMetric, a: &AnnulusSpec) -> Result<SeparatingCycle> {
    let cells = AnnulusCells::new(metric.grid(), a)?;
    let graph = cover_graph(metric, &cells, a);
    let m = cells.vertices.len();
    let mut dist = vec![f64::INFINITY; 2 * m];
    let mut pred = vec![u32::MAX; 2 * m];
    let mut touched: Vec<usize> = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_walk: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();
    for &src in &graph.sources {
        for &t in &touched {
            dist[t] = f64::INFINITY;
            pred[t] = u32::MAX;
        }
        touched.clear();
        heap.clear();
        let start = 2 * src;
        let goal = 2 * src + 1;
        dist[start] = 0.0;
        touched.push(start);
        heap.push(HeapEntry { dist: 0.0, vertex: start });
        while let Some(HeapEntry { dist: d, vertex: state }) = heap.pop() {
            if d > dist[state] {
                continue;
            }
            if d >= best {
                break;
            }
            if state == goal {
                best = d;
                let mut walk = Vec::new();
                let mut cur = goal;
                while cur != start {
                    cur = pred[cur] as usize;
                    walk.push(cur / 2);
                }
                walk.reverse();
                best_walk = walk;
                break;
            }
            let (lu, parity) = (state / 2, state % 2);
            for &(lv, w, flips) in &graph.adj[lu] {
                let next = 2 * lv as usize + (parity ^ flips as usize);
                let nd = d + w;
                if nd < dist[next] {
                    if dist[next].is_infinite() {
                        touched.push(next);
                    }
                    dist[next] = nd;
                    pred[next] = state as u32;
                    heap.push(HeapEntry { dist: nd, vertex: next });
                }
            }
        }
    }
    if best_walk.is_empty() {
        let blocked = cells.vertices.iter().any(|&v| metric.is_masked(v));
        return if blocked { Ok(SeparatingCycle { vertices: Vec::new(), length: UNREACHABLE }) } else { Err(Error::ThinAnnulus) };
    }
    let walk = odd_simple_cycle(&graph, best_walk);
    let vertices = canonical_cycle(walk.iter().map(|&l| cells.vertices[l]).collect());
    let mut closed = vertices.clone();
    closed.push(vertices[0]);
    let length = metric.path_length(&closed)?;
    let cycle = SeparatingCycle { vertices, length };
    if !separates(metric, &cells, &cycle) {
        return Err(Error::AuditFailed);
    }
    Ok(cycle)
}

/// Rotates and orients a cycle into the order documented on [`SeparatingCycle`].
pub fn canonical_cycle(mut vertices: Vec<usize>) -> Vec<usize> {
    let k = vertices.len();
    if k < 3 {
        return vertices;
    }
    let start = (0..k).min_by_key(|&t| vertices[t]).unwrap_or(0);
    vertices.rotate_left(start);
    if vertices[k - 1] < vertices[1] {
        vertices[1..].reverse();
    }
    vertices
}

fn edge_flips(graph: &CoverGraph, a: usize, b: usize) -> bool {
    graph.adj[a].iter().find(|e| e.0 as usize == b).is_some_and(|e| e.2)
}

/// Reduces a closed walk with odd crossing parity to a simple cycle with odd
/// parity by repeatedly splitting at a repeated vertex.
fn odd_simple_cycle(graph: &CoverGraph, mut walk: Vec<usize>) -> Vec<usize> {
    'outer: loop {
        let k = walk.len();
        for i in 0..k {
            for j in i + 1..k {
                if walk[i] == walk[j] {
                    let a: Vec<usize> = walk[i..j].to_vec();
                    let parity = (0..a.len()).filter(|&t| edge_flips(graph, a[t], a[(t + 1) % a.len()])).count() % 2;
                    walk = if parity == 1 { a } else { walk[..i].iter().chain(&walk[j..]).copied().collect() };
                    continue 'outer;
                }
            }
        }
        return walk;
    }
}

/// Flood-fill audit: starting from the open inner disk and moving between
/// lattice neighbors that are not on the cycle, never along a diagonal that
/// crosses one of the cycle's diagonal edges, the flood must not reach a
/// vertex outside the outer circle.
pub fn separates(metric: &LatticeMetric, cells: &AnnulusCells, cycle: &SeparatingCycle) -> bool {
    let grid = metric.grid();
    if cycle.vertices.is_empty() {
        return false;
    }
    let on_cycle: BTreeSet<usize> = cycle.vertices.iter().copied().collect();
    let blocked = crossing_diagonals(grid, cycle.edges());
    let s = grid.spacing();
    let (r1, r2) = (cells.r_inner / s, cells.r_outer / s);
    let (cx, cy) = cells.center_units;
    let reach = libm::ceil(r2) as i64 + 2;
    let (bx, by) = (libm::floor(cx) as i64, libm::floor(cy) as i64);
    let side = (2 * reach + 1) as usize;
    let n = grid.n() as i64;
    // Box-local flood in unwrapped coordinates.
    let slot = |x: i64, y: i64| ((y - by + reach) as usize) * side + (x - bx + reach) as usize;
    let vertex = |x: i64, y: i64| grid.index(x.rem_euclid(n) as usize, y.rem_euclid(n) as usize);
    let radius2 = |x: i64, y: i64| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy
    };
    let mut seen = vec![false; side * side];
    let mut queue = VecDeque::new();
    for y in by - reach..=by + reach {
        for x in bx - reach..=bx + reach {
            if radius2(x, y) < r1 * r1 {
                seen[slot(x, y)] = true;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        if radius2(x, y) > r2 * r2 {
            return false;
        }
        let u = vertex(x, y);
        for &(di, dj, _, _) in &NEIGHBORS {
            let (nx, ny) = (x + di as i64, y + dj as i64);
            if (nx - bx).abs() > reach || (ny - by).abs() > reach || seen[slot(nx, ny)] {
                continue;
            }
            let v = vertex(nx, ny);
            if on_cycle.contains(&v) || blocked.contains(&(u.min(v), u.max(v))) {
                continue;
            }
            seen[slot(nx, ny)] = true;
            queue.push_back((nx, ny));
        }
    }
    true
}

/// For every diagonal edge in `edges`, the opposite diagonal of the same
/// lattice square, as an ordered vertex pair.
pub fn crossing_diagonals(grid: &GridSpec, edges: impl Iterator<Item = (usize, usize)>) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (a, b) in edges {
        let (di, dj) = lattice_step(grid, a, b);
        if di != 0 && dj != 0 {
            let p = grid.offset(a, di, 0);
            let q = grid.offset(a, 0, dj);
            out.insert((p.min(q), p.max(q)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{PI, SQRT_2};

    fn flat(n: usize, l: f64) -> LatticeMetric {
        let g = GridSpec::new(n, l).unwrap();
        LatticeMetric::from_potential(g, 0.5, 1.0, &vec![0.0; g.len()], None).unwrap()
    }

    #[test]
    fn validation() {
        let g = GridSpec::new(32, 32.0).unwrap();
        let c = g.center();
        assert!(AnnulusSpec::new(c, 1.0, 4.0).validate(&g).is_err());
        assert!(AnnulusSpec::new(c, 4.0, 4.0).validate(&g).is_err());
        assert!(AnnulusSpec::new(c, 4.0, 15.0).validate(&g).is_err());
        assert!(AnnulusSpec::new(c, 4.0, 8.0).validate(&g).is_ok());
    }

    #[test]
    fn flat_across_is_width() {
        let m = flat(64, 64.0);
        let a = AnnulusSpec::new(Point::new(32.0, 32.0), 5.0, 12.0);
        let d = across(&m, &a).unwrap();
        assert!((d - 7.0).abs() <= SQRT_2, "{d}");
    }

    #[test]
    fn flat_around_is_near_circumference() {
        // The lightest loop hugs the inner circle: 16 axis steps and 8
        // diagonals around the radius-4 disk.
        let m = flat(64, 64.0);
        let a = AnnulusSpec::new(Point::new(32.0, 32.0), 4.0, 8.0);
        let c = around_cycle(&m, &a).unwrap();
        assert!((c.length - (16.0 + 8.0 * SQRT_2)).abs() < 1e-12, "{}", c.length);
        assert!((c.length - 2.0 * PI * 4.0).abs() <= 0.15 * 2.0 * PI * 4.0);
        assert_eq!(c.length, m.path_length(&[c.vertices.clone(), vec![c.vertices[0]]].concat()).unwrap());
    }

    #[test]
    fn thin_annulus_has_no_cycle() {
        let m = flat(64, 64.0);
        // No lattice vertex has distance in [2.05, 2.2] from this center.
        let a = AnnulusSpec::new(Point::new(32.0, 32.0), 2.05, 2.2);
        assert!(AnnulusCells::new(m.grid(), &a).is_err() || around(&m, &a).is_err());
    }

    #[test]
    fn around_scales_with_weights() {
        let m = flat(64, 64.0);
        let a = AnnulusSpec::new(Point::new(30.5, 31.5), 3.0, 6.0);
        let base = around(&m, &a).unwrap();
        let f = libm::exp(0.5 * 1.3);
        assert!((around(&m.scaled(f), &a).unwrap() / base / f - 1.0).abs() < 1e-12);
        assert!((across(&m.scaled(f), &a).unwrap() / across(&m, &a).unwrap() / f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_separating_cycle_fails_audit() {
        let m = flat(64, 64.0);
        let a = AnnulusSpec::new(Point::new(32.0, 32.0), 4.0, 8.0);
        let cells = AnnulusCells::new(m.grid(), &a).unwrap();
        let g = *m.grid();
        let small = SeparatingCycle { vertices: vec![g.index(37, 32), g.index(38, 32), g.index(38, 33), g.index(37, 33)], length: 4.0 };
        assert!(!separates(&m, &cells, &small));
        let real = around_cycle(&m, &a).unwrap();
        assert!(separates(&m, &cells, &real));
    }
}
