//! Brute-force oracles on small random-weight instances. Weights are
//! recomputed here from the potential; shortest paths come from Bellman-Ford
//! and separating cycles from exhaustive enumeration of simple cycles. Each
//! `*_case` compares one seeded instance with the library and reports the
//! first mismatch.

use std::collections::BTreeSet;
use std::f64::consts::{PI, SQRT_2};

use lfpp_core::metric::{across, around, around_cycle, crossing_distance, distance, internal_distance, Region};
use lfpp_core::rng::stream;
use lfpp_core::{AnnulusSpec, GridSpec, LatticeMetric, Point};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const N: usize = 16;
pub const INSTANCES: u64 = 50;

pub struct Instance {
    grid: GridSpec,
    xi: f64,
    phi: Vec<f64>,
    masked: BTreeSet<usize>,
}

impl Instance {
    pub fn random(seed: u64, mask_rate: f64) -> Self {
        let mut r = stream(seed, 0, 99);
        let grid = GridSpec::new(N, N as f64).unwrap();
        let xi = r.random_range(0.2..1.5);
        let phi = (0..grid.len()).map(|_| r.random_range(-2.0..2.0)).collect();
        let masked = (0..grid.len()).filter(|_| r.random::<f64>() < mask_rate).collect();
        Self { grid, xi, phi, masked }
    }

    fn metric(&self) -> LatticeMetric {
        let mask: Vec<usize> = self.masked.iter().copied().collect();
        LatticeMetric::from_potential(self.grid, self.xi, 1.0, &self.phi, Some(&mask)).unwrap()
    }

    /// Neighbors of `v` as (vertex, weight, step), skipping masked endpoints.
    fn edges(&self, v: usize) -> Vec<(usize, f64, (i64, i64))> {
        if self.masked.contains(&v) {
            return Vec::new();
        }
        let n = N as i64;
        let (i, j) = ((v % N) as i64, (v / N) as i64);
        let mut out = Vec::new();
        for di in -1..=1i64 {
            for dj in -1..=1i64 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let u = ((j + dj).rem_euclid(n) * n + (i + di).rem_euclid(n)) as usize;
                if self.masked.contains(&u) {
                    continue;
                }
                let len = if di != 0 && dj != 0 { SQRT_2 } else { 1.0 };
                out.push((u, libm::exp(self.xi * (self.phi[v] + self.phi[u]) / 2.0) * len, (di, dj)));
            }
        }
        out
    }

    /// Bellman-Ford from offset sources, restricted to `allowed`.
    fn bellman_ford(&self, sources: &[(usize, f64)], allowed: &dyn Fn(usize) -> bool) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; self.grid.len()];
        for &(s, o) in sources {
            d[s] = d[s].min(o);
        }
        loop {
            let mut changed = false;
            for u in 0..self.grid.len() {
                if !allowed(u) || d[u].is_infinite() {
                    continue;
                }
                for (v, w, _) in self.edges(u) {
                    if allowed(v) && d[u] + w < d[v] {
                        d[v] = d[u] + w;
                        changed = true;
                    }
                }
            }
            if !changed {
                return d;
            }
        }
    }
}

fn same<T: PartialEq + std::fmt::Debug>(got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("library gave {got:?}, oracle {want:?}"))
    }
}

fn pick(r: &mut ChaCha8Rng, pool: &[usize], k: usize) -> Vec<usize> {
    (0..k).map(|_| pool[r.random_range(0..pool.len())]).collect::<BTreeSet<_>>().into_iter().collect()
}

pub fn distance_case(seed: u64) -> Result<(), String> {
    let inst = Instance::random(seed, 0.15);
    let metric = inst.metric();
    let mut r = stream(seed, 1, 99);
    let free: Vec<usize> = (0..inst.grid.len()).filter(|v| !inst.masked.contains(v)).collect();
    let a = pick(&mut r, &free, 3);
    let b: Vec<usize> = pick(&mut r, &free, 3).into_iter().filter(|v| !a.contains(v)).collect();
    if b.is_empty() {
        return Ok(());
    }
    let d = inst.bellman_ford(&a.iter().map(|&v| (v, 0.0)).collect::<Vec<_>>(), &|_| true);
    let oracle = b.iter().map(|&v| d[v]).fold(f64::INFINITY, f64::min);
    let (got, path) = distance(&metric, &a, &b).unwrap();
    same(got, oracle)?;
    if got.is_finite() {
        same(metric.path_length(&path.vertices).unwrap(), got)?;
    }
    Ok(())
}

pub fn internal_distance_case(seed: u64) -> Result<(), String> {
    let inst = Instance::random(seed, 0.0);
    let metric = inst.metric();
    let mut r = stream(seed, 2, 99);
    let (i0, j0) = (r.random_range(0..N), r.random_range(0..N));
    let block: Vec<usize> =
        (0..36).filter(|_| r.random::<f64>() < 0.75).map(|t| inst.grid.index((i0 + t % 6) % N, (j0 + t / 6) % N)).collect();
    if block.len() < 2 {
        return Ok(());
    }
    let region = Region::from_vertices(&inst.grid, &block).unwrap();
    let a = pick(&mut r, &block, 2);
    let b: Vec<usize> = pick(&mut r, &block, 2).into_iter().filter(|v| !a.contains(v)).collect();
    if b.is_empty() {
        return Ok(());
    }
    let d = inst.bellman_ford(&a.iter().map(|&v| (v, 0.0)).collect::<Vec<_>>(), &|v| block.contains(&v));
    let oracle = b.iter().map(|&v| d[v]).fold(f64::INFINITY, f64::min);
    same(internal_distance(&metric, &a, &b, &region).unwrap(), oracle)?;
    Ok(())
}

pub fn crossing_case(seed: u64) -> Result<(), String> {
    let inst = Instance::random(seed, 0.1);
    let metric = inst.metric();
    let mut r = stream(seed, 3, 99);
    let (i0, j0) = (r.random_range(0..N - 6), r.random_range(0..N - 6));
    let inside = |v: usize| {
        let (i, j) = (v % N, v / N);
        (i0..=i0 + 5).contains(&i) && (j0..=j0 + 5).contains(&j)
    };
    let left: Vec<(usize, f64)> =
        (j0..=j0 + 5).map(|j| inst.grid.index(i0, j)).filter(|v| !inst.masked.contains(v)).map(|v| (v, 0.0)).collect();
    let d = inst.bellman_ford(&left, &inside);
    let oracle = (j0..=j0 + 5).map(|j| d[inst.grid.index(i0 + 5, j)]).fold(f64::INFINITY, f64::min);
    let got = crossing_distance(&metric, 5.0, Point::new(i0 as f64, j0 as f64)).unwrap();
    same(got, oracle)?;
    Ok(())
}

/// Annulus about a half-integer center with radii 2 and 3 (lattice units):
/// its vertices fill a 6x6 box.
fn small_annulus(r: &mut ChaCha8Rng) -> AnnulusSpec {
    let c = Point::new(r.random_range(3..12) as f64 + 0.5, r.random_range(3..12) as f64 + 0.5);
    AnnulusSpec::new(c, 2.0, r.random_range(3.0..3.6))
}

/// Annulus vertices with displacement from the center, computed directly.
fn annulus_vertices(inst: &Instance, a: &AnnulusSpec) -> Vec<(usize, (f64, f64))> {
    let mut out = Vec::new();
    for v in 0..inst.grid.len() {
        let (i, j) = ((v % N) as f64, (v / N) as f64);
        let (dx, dy) = (i - a.center.x, j - a.center.y);
        let d = dx.hypot(dy);
        if d >= a.r_inner && d <= a.r_outer {
            out.push((v, (dx, dy)));
        }
    }
    out
}

pub fn across_case(seed: u64) -> Result<(), String> {
    let inst = Instance::random(seed, 0.0);
    let metric = inst.metric();
    let mut r = stream(seed, 4, 99);
    let a = small_annulus(&mut r);
    let cells = annulus_vertices(&inst, &a);
    let members: BTreeSet<usize> = cells.iter().map(|c| c.0).collect();
    let dist_of = |rel: (f64, f64), step: (i64, i64)| (rel.0 + step.0 as f64).hypot(rel.1 + step.1 as f64);
    let mut sources = Vec::new();
    let mut exit = vec![f64::INFINITY; inst.grid.len()];
    for &(v, rel) in &cells {
        for (_, w, step) in inst.edges(v) {
            let d = dist_of(rel, step);
            if d < a.r_inner {
                sources.push((v, w / 2.0));
            }
            if d > a.r_outer {
                exit[v] = exit[v].min(w / 2.0);
            }
        }
    }
    let d = inst.bellman_ford(&sources, &|v| members.contains(&v));
    let oracle = (0..inst.grid.len()).map(|v| d[v] + exit[v]).fold(f64::INFINITY, f64::min);
    same(across(&metric, &a).unwrap(), oracle)?;
    Ok(())
}

/// Lightest simple cycle with odd winding about the center, enumerated by
/// depth-first search from each start vertex through higher-indexed vertices.
/// Lengths are summed in the canonical cycle order.
fn brute_force_around(inst: &Instance, a: &AnnulusSpec) -> (f64, Vec<usize>) {
    let cells = annulus_vertices(inst, a);
    let rel: std::collections::BTreeMap<usize, (f64, f64)> = cells.iter().copied().collect();
    let adj: std::collections::BTreeMap<usize, Vec<(usize, f64)>> = cells
        .iter()
        .map(|&(v, _)| (v, inst.edges(v).into_iter().filter(|e| rel.contains_key(&e.0)).map(|e| (e.0, e.1)).collect()))
        .collect();
    let angle = |v: usize| rel[&v].1.atan2(rel[&v].0);
    let mut best = (f64::INFINITY, Vec::new());

    fn dfs(
        path: &mut Vec<usize>,
        turn: f64,
        weight: f64,
        adj: &std::collections::BTreeMap<usize, Vec<(usize, f64)>>,
        angle: &dyn Fn(usize) -> f64,
        best: &mut (f64, Vec<usize>),
    ) {
        let start = path[0];
        let last = *path.last().unwrap();
        for &(v, w) in &adj[&last] {
            // Prune with slack: the canonical sum may differ in the last bits.
            if weight + w > best.0 * (1.0 + 1e-9) {
                continue;
            }
            let mut step = angle(v) - angle(last);
            if step > PI {
                step -= 2.0 * PI;
            } else if step < -PI {
                step += 2.0 * PI;
            }
            if v == start && path.len() >= 3 {
                let winding = ((turn + step) / (2.0 * PI)).round() as i64;
                if winding % 2 != 0 {
                    let cycle = lfpp_core::metric::canonical_cycle(path.clone());
                    let mut closed = cycle.clone();
                    closed.push(cycle[0]);
                    let len = closed.windows(2).map(|e| adj[&e[0]].iter().find(|x| x.0 == e[1]).unwrap().1).fold(0.0, |acc, w| acc + w);
                    if len < best.0 {
                        *best = (len, cycle);
                    }
                }
                continue;
            }
            if v > start && !path.contains(&v) {
                path.push(v);
                dfs(path, turn + step, weight + w, adj, angle, best);
                path.pop();
            }
        }
    }

    for &(s, _) in &cells {
        let mut path = vec![s];
        dfs(&mut path, 0.0, 0.0, &adj, &angle, &mut best);
    }
    best
}

pub fn around_case(seed: u64) -> Result<(), String> {
    let inst = Instance::random(seed, if seed % 5 == 4 { 0.08 } else { 0.0 });
    let metric = inst.metric();
    let mut r = stream(seed, 5, 99);
    let a = small_annulus(&mut r);
    let (oracle, cycle) = brute_force_around(&inst, &a);
    same(around(&metric, &a).unwrap(), oracle)?;
    if oracle.is_finite() {
        same(around_cycle(&metric, &a).unwrap().vertices, cycle)?;
    }
    Ok(())
}
