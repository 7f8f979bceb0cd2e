//! Executable checks of the metric axioms on the discrete model.
//!
//! Exact checks recompute both sides of an identity and compare them with a
//! stated tolerance (zero where the identity holds in floating point too).
//! Statistical checks report one test outcome with its statistic.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::stats::{mann_whitney, median};
use crate::estimators::{FieldSource, ReplicaExecutor, ScaleStats};
use crate::field::{mollify, sample_gff, FieldGrid, MollifiedField};
use crate::grid::{GridSpec, LatticeField, Point};
use crate::metric::{build_metric, crossing_of, internal_distance, DistanceField, LatticeMetric, Region, SquareCells};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    MetricSpace,
    LengthSpace,
    Locality,
    Weyl,
    Translation,
    Tightness,
    ScalingRelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    Exact,
    Statistical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub label: String,
    pub error: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Outcome of one axiom check. In exact mode `checked` counts cases; in
/// statistical mode it is 1 and `statistic` carries the test quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub mode: CheckMode,
    pub tolerance: f64,
    pub checked: usize,
    pub violations: usize,
    pub worst_error: f64,
    pub statistic: Option<f64>,
    pub details: Vec<CaseRecord>,
}

impl AxiomReport {
    fn new(axiom: Axiom, mode: CheckMode, tolerance: f64) -> Self {
        Self { axiom, mode, tolerance, checked: 0, violations: 0, worst_error: 0.0, statistic: None, details: Vec::new() }
    }

    /// Records one case; `error` must be finite and `passed` decided against a
    /// tolerance no larger than the report's.
    fn record(&mut self, label: String, error: f64, passed: bool) {
        self.checked += 1;
        if !passed {
            self.violations += 1;
        }
        self.worst_error = self.worst_error.max(error);
        self.details.push(CaseRecord { label, error, passed, skipped: None });
    }

    fn skip(&mut self, label: String, reason: &str) {
        self.details.push(CaseRecord { label, error: 0.0, passed: true, skipped: Some(reason.into()) });
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Concatenates two reports of the same axiom and mode.
    pub fn merge(mut self, other: AxiomReport) -> Result<Self> {
        if self.axiom != other.axiom || self.mode != other.mode {
            return Err(Error::InvalidParameter("cannot merge reports of different checks"));
        }
        self.tolerance = self.tolerance.max(other.tolerance);
        self.checked += other.checked;
        self.violations += other.violations;
        self.worst_error = self.worst_error.max(other.worst_error);
        self.statistic = match (self.statistic, other.statistic) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.details.extend(other.details);
        Ok(self)
    }
}

/// `|a - b| / max(|a|, |b|)`, with equal infinities counted as 0 and a lone
/// infinity as 1.
fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if !a.is_finite() || !b.is_finite() {
        return 1.0;
    }
    libm::fabs(a - b) / libm::fabs(a).max(libm::fabs(b))
}

/// Relative amount by which `lhs <= rhs` fails; 0 when it holds.
fn excess(lhs: f64, rhs: f64) -> f64 {
    if lhs <= rhs {
        0.0
    } else if !lhs.is_finite() || !rhs.is_finite() {
        1.0
    } else {
        (lhs - rhs) / libm::fabs(lhs).max(libm::fabs(rhs))
    }
}

fn label(z: usize, w: usize) -> String {
    format!("{z}-{w}")
}

fn fields(metric: &LatticeMetric, sources: impl Iterator<Item = usize>) -> Result<BTreeMap<usize, DistanceField>> {
    let mut out = BTreeMap::new();
    for s in sources {
        if let alloc::collections::btree_map::Entry::Vacant(e) = out.entry(s) {
            e.insert(metric.distance_field(&[s], None)?);
        }
    }
    Ok(out)
}

/// Distinct-endpoint vertex pairs drawn uniformly from `vertices`.
pub fn sample_pairs_from(vertices: &[usize], count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if vertices.len() < 2 {
        return Err(Error::InvalidParameter("need at least two vertices to sample pairs"));
    }
    let mut r = rng::stream(seed, 0, rng::STREAM_QUERIES);
    Ok((0..count)
        .map(|_| loop {
            let z = vertices[r.random_range(0..vertices.len())];
            let w = vertices[r.random_range(0..vertices.len())];
            if z != w {
                break (z, w);
            }
        })
        .collect())
}

pub fn sample_pairs(grid: &GridSpec, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let all: Vec<usize> = (0..grid.len()).collect();
    sample_pairs_from(&all, count, seed).expect("grid has at least 256 vertices")
}

pub const EXACT_TOLERANCE: f64 = 1e-12;
pub const WEYL_TOLERANCE: f64 = 1e-10;

/// Identity, symmetry and the triangle inequality. Pair `k` is closed into a
/// triangle with the first endpoint of pair `k + 1`.
pub fn check_metric_axioms(metric: &LatticeMetric, pairs: &[(usize, usize)]) -> Result<AxiomReport> {
    let mut report = AxiomReport::new(Axiom::MetricSpace, CheckMode::Exact, EXACT_TOLERANCE);
    let table = fields(metric, pairs.iter().flat_map(|&(z, w)| [z, w]))?;
    for (k, &(z, w)) in pairs.iter().enumerate() {
        let v = pairs[(k + 1) % pairs.len()].0;
        let (dz, dw) = (&table[&z].dist, &table[&w].dist);
        let identity = dz[z] == 0.0 && (z == w || dz[w] > 0.0);
        report.record(format!("identity {}", label(z, w)), if identity { 0.0 } else { 1.0 }, identity);
        let sym = relative(dz[w], dw[z]);
        report.record(format!("symmetry {}", label(z, w)), sym, sym <= EXACT_TOLERANCE);
        let tri = excess(dz[v], dz[w] + dw[v]);
        report.record(format!("triangle {} via {w} to {v}", label(z, w)), tri, tri <= EXACT_TOLERANCE);
    }
    Ok(report)
}

/// Along each geodesic, prefix sums reproduce `d(z, v)` bit-exactly and
/// `d(z, v) + d(v, w)` matches `d(z, w)` to [`EXACT_TOLERANCE`].
pub fn check_length_space(metric: &LatticeMetric, pairs: &[(usize, usize)]) -> Result<AxiomReport> {
    let mut report = AxiomReport::new(Axiom::LengthSpace, CheckMode::Exact, EXACT_TOLERANCE);
    let table = fields(metric, pairs.iter().flat_map(|&(z, w)| [z, w]))?;
    for &(z, w) in pairs {
        let (fz, fw) = (&table[&z], &table[&w]);
        let total = fz.dist[w];
        if !total.is_finite() {
            if fw.dist[z].is_finite() {
                report.record(label(z, w), 1.0, false);
            } else {
                report.skip(label(z, w), "endpoints disconnected; distance infinite in both directions");
            }
            continue;
        }
        let path = fz.path_to(w);
        let prefix = crate::metric::GeodesicPath { vertices: path.clone(), length: total }.cumulative(metric);
        let prefix_exact = path.iter().zip(&prefix).all(|(&v, &p)| p.to_bits() == fz.dist[v].to_bits());
        let worst = path.iter().map(|&v| relative(fz.dist[v] + fw.dist[v], total)).fold(0.0, f64::max);
        let error = if prefix_exact { worst } else { worst.max(1.0) };
        report.record(label(z, w), error, error <= EXACT_TOLERANCE);
    }
    Ok(report)
}

/// Internal distances in `region` are bit-identical after adding
/// `perturbation`, which must vanish on the closure of `region`.
pub fn check_locality(
    phi: &MollifiedField,
    xi: f64,
    region: &Region,
    perturbation: &[f64],
    pairs: &[(usize, usize)],
) -> Result<AxiomReport> {
    let grid = *phi.spec();
    if perturbation.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.len(), got: perturbation.len() });
    }
    let closure = region.closure(&grid);
    if let Some(v) = (0..grid.len()).find(|&v| closure.contains(v) && perturbation[v] != 0.0) {
        return Err(Error::PerturbationInRegion(v));
    }
    let before = build_metric(phi, xi, None)?;
    let after = build_metric(&phi.shifted(perturbation)?, xi, None)?;
    let mut report = AxiomReport::new(Axiom::Locality, CheckMode::Exact, 0.0);
    for &(z, w) in pairs {
        let a = internal_distance(&before, &[z], &[w], region)?;
        let b = internal_distance(&after, &[z], &[w], region)?;
        let same = a.to_bits() == b.to_bits();
        report.record(label(z, w), if same { 0.0 } else { relative(a, b).max(f64::MIN_POSITIVE) }, same);
    }
    Ok(report)
}

/// Weyl scaling in three parts: a constant shift by `c = mean(f)` scales
/// distances by `e^{xi c}`; `D_{h+f}` lies between `e^{xi min f} D_h` and
/// `e^{xi max f} D_h`; and every geodesic of `D_h`, reweighted by
/// `e^{xi (f(u) + f(v)) / 2}` per edge, is no shorter than `D_{h+f}`.
pub fn check_weyl(phi: &MollifiedField, xi: f64, f: &[f64], pairs: &[(usize, usize)]) -> Result<AxiomReport> {
    let grid = *phi.spec();
    if f.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.len(), got: f.len() });
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("Weyl function must be finite"));
    }
    let c = f.iter().sum::<f64>() / f.len() as f64;
    let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let m0 = build_metric(phi, xi, None)?;
    let m1 = build_metric(&phi.shifted(f)?, xi, None)?;
    let mc = build_metric(&phi.shifted(&vec![c; grid.len()])?, xi, None)?;
    let (gain_c, gain_lo, gain_hi) = (libm::exp(xi * c), libm::exp(xi * lo), libm::exp(xi * hi));
    let mut report = AxiomReport::new(Axiom::Weyl, CheckMode::Exact, WEYL_TOLERANCE);
    let mut sources: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    sources.sort_unstable();
    sources.dedup();
    for z in sources {
        let (f0, f1, fc) = (m0.distance_field(&[z], None)?, m1.distance_field(&[z], None)?, mc.distance_field(&[z], None)?);
        for &(_, w) in pairs.iter().filter(|p| p.0 == z) {
            let (d0, d1, dc) = (f0.dist[w], f1.dist[w], fc.dist[w]);
            if !d0.is_finite() {
                report.skip(label(z, w), "endpoints disconnected");
                continue;
            }
            let e = relative(dc, gain_c * d0);
            report.record(format!("constant {}", label(z, w)), e, e <= WEYL_TOLERANCE);
            let e = excess(gain_lo * d0, d1).max(excess(d1, gain_hi * d0));
            report.record(format!("sandwich {}", label(z, w)), e, e <= WEYL_TOLERANCE);
            let path = f0.path_to(w);
            let reweighted = m1.path_length(&path)?;
            let by_hand: f64 =
                path.windows(2).map(|e| libm::exp(xi * (f[e[0]] + f[e[1]]) / 2.0) * m0.edge_weight(e[0], e[1]).unwrap_or(f64::NAN)).sum();
            let e = excess(d1, reweighted).max(relative(reweighted, by_hand));
            report.record(format!("reweight {}", label(z, w)), e, d1 <= reweighted && e <= EXACT_TOLERANCE);
        }
    }
    Ok(report)
}

/// Field translated by a whole number of lattice steps: `g(x) = h(x + shift)`.
pub fn roll(field: &FieldGrid, di: isize, dj: isize) -> Result<FieldGrid> {
    let grid = *field.spec();
    let values = (0..grid.len()).map(|v| field.values()[grid.offset(v, di, dj)]).collect();
    FieldGrid::from_values(grid, values, field.seed())
}

/// Lattice steps of a physical shift, or [`Error::NonLatticeShift`].
pub fn lattice_shift(grid: &GridSpec, shift: Point) -> Result<(isize, isize)> {
    let (a, b) = (shift.x / grid.spacing(), shift.y / grid.spacing());
    let (ra, rb) = (libm::round(a), libm::round(b));
    if !(libm::fabs(a - ra) <= 1e-9 && libm::fabs(b - rb) <= 1e-9) {
        return Err(Error::NonLatticeShift);
    }
    Ok((ra as isize, rb as isize))
}

pub const TRANSLATION_ALPHA: f64 = 0.01;

/// Rank test between unit-square crossings at the domain center and at the
/// center moved by `shift`, over the same replicas.
pub fn check_translation<S: FieldSource, E: ReplicaExecutor>(
    source: &S,
    xi: f64,
    epsilon: f64,
    shift: Point,
    replicas: usize,
    exec: &E,
) -> Result<AxiomReport> {
    let grid = source.grid();
    let (di, dj) = lattice_shift(&grid, shift)?;
    if replicas < 2 {
        return Err(Error::InvalidParameter("need at least two replicas"));
    }
    let square = SquareCells::centered(&grid, 1.0, grid.center())?;
    let rows: Vec<Result<(f64, f64)>> = exec.map_replicas(replicas, |k| {
        let h = source.field(k)?;
        let a = crossing_of(&build_metric(&mollify(&h, epsilon)?, xi, None)?, &square)?;
        let b = crossing_of(&build_metric(&mollify(&roll(&h, di, dj)?, epsilon)?, xi, None)?, &square)?;
        Ok((a, b))
    });
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let test = mann_whitney(&a, &b);
    let mut report = AxiomReport::new(Axiom::Translation, CheckMode::Statistical, TRANSLATION_ALPHA);
    report.statistic = Some(test.p_value);
    report.record(format!("rank test z = {:.4}", test.z), 0.0, test.p_value >= TRANSLATION_ALPHA);
    Ok(report)
}

pub const SCALING_THRESHOLD: f64 = 0.25;

/// Compares `D^eps_h(2a, 2b)` with `2 D^{eps/2}_g(a, b)` where `g = h(2.)` is
/// `h` read at every other vertex. Pairs are vertices of the half grid.
pub fn check_scaling_relation(h: &FieldGrid, xi: f64, epsilon: f64, pairs: &[(usize, usize)]) -> Result<AxiomReport> {
    let fine = *h.spec();
    let g = h.subsample_half()?;
    let coarse = *g.spec();
    let mh = build_metric(&mollify(h, epsilon)?, xi, None)?;
    let mg = build_metric(&mollify(&g, epsilon / 2.0)?, xi, None)?;
    let lift = |v: usize| {
        let (i, j) = coarse.coords(v);
        fine.index(2 * i, 2 * j)
    };
    let mut report = AxiomReport::new(Axiom::ScalingRelation, CheckMode::Statistical, SCALING_THRESHOLD);
    let mut discrepancies = Vec::new();
    let table_g = fields(&mg, pairs.iter().map(|p| p.0))?;
    let table_h = fields(&mh, pairs.iter().map(|p| lift(p.0)))?;
    for &(a, b) in pairs {
        let dh = table_h[&lift(a)].dist[lift(b)];
        let dg = 2.0 * table_g[&a].dist[b];
        let d = relative(dg, dh);
        discrepancies.push(d);
        report.details.push(CaseRecord { label: label(a, b), error: d, passed: d < SCALING_THRESHOLD, skipped: None });
        report.worst_error = report.worst_error.max(d);
    }
    let med = median(&discrepancies);
    report.statistic = Some(med);
    report.checked = 1;
    report.violations = usize::from(!(med < SCALING_THRESHOLD));
    Ok(report)
}

pub const TIGHTNESS_BAND: (f64, f64) = (1.0 / 3.0, 3.0);

/// Ratio of normalized medians at the largest and smallest radius, compared
/// with a fixed band. The band is a convention, not a tightness proof.
pub fn tightness_report(stats: &ScaleStats) -> AxiomReport {
    let mut report = AxiomReport::new(Axiom::Tightness, CheckMode::Statistical, TIGHTNESS_BAND.1);
    let last = stats.radii.len() - 1;
    let mut worst: f64 = 1.0;
    for (name, col) in [("across", &stats.normalized_across), ("around", &stats.normalized_around)] {
        let ratio = col[last].q50 / col[0].q50;
        worst = if libm::fabs(libm::log(ratio)) > libm::fabs(libm::log(worst)) { ratio } else { worst };
        report.details.push(CaseRecord {
            label: format!("{name} median ratio"),
            error: ratio,
            passed: ratio >= TIGHTNESS_BAND.0 && ratio <= TIGHTNESS_BAND.1,
            skipped: None,
        });
    }
    report.statistic = Some(worst);
    report.worst_error = worst;
    report.checked = 1;
    report.violations = usize::from(report.details.iter().any(|d| !d.passed));
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLipschitzEstimate {
    pub pairs_sampled: usize,
    pub c_hat: f64,
    #[serde(rename = "C_hat")]
    pub big_c_hat: f64,
    /// Pairs with an infinite distance in either metric.
    pub excluded: Vec<(usize, usize)>,
}

/// Empirical extremes of `D_b / D_a` over `pairs`.
pub fn compare_metrics(a: &LatticeMetric, b: &LatticeMetric, pairs: &[(usize, usize)]) -> Result<BiLipschitzEstimate> {
    if a.grid() != b.grid() {
        return Err(Error::InvalidParameter("metrics live on different grids"));
    }
    let ta = fields(a, pairs.iter().map(|p| p.0))?;
    let tb = fields(b, pairs.iter().map(|p| p.0))?;
    let mut out = BiLipschitzEstimate { pairs_sampled: pairs.len(), c_hat: f64::INFINITY, big_c_hat: 0.0, excluded: Vec::new() };
    for &(z, w) in pairs {
        let (da, db) = (ta[&z].dist[w], tb[&z].dist[w]);
        if !da.is_finite() || !db.is_finite() {
            out.excluded.push((z, w));
            continue;
        }
        let r = db / da;
        out.c_hat = out.c_hat.min(r);
        out.big_c_hat = out.big_c_hat.max(r);
    }
    Ok(out)
}

/// Smooth bump of height `height` supported on the annulus `r1 < |x - c| < r2`.
pub fn annulus_bump(grid: &GridSpec, center: Point, r1: f64, r2: f64, height: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|v| {
            let d = grid.torus_distance(center, v);
            if d <= r1 || d >= r2 {
                return 0.0;
            }
            let t = (d - r1) / (r2 - r1) * 2.0 - 1.0;
            height * libm::exp(1.0 - 1.0 / (1.0 - t * t))
        })
        .collect()
}

/// The exact checks on one sampled field: metric axioms, length space,
/// locality in a central block and Weyl scaling by an annulus bump.
pub fn exact_suite(grid: GridSpec, seed: u64, xi: f64, epsilon: f64, pair_count: usize) -> Result<Vec<AxiomReport>> {
    let h = sample_gff(grid, seed)?;
    let phi = mollify(&h, epsilon)?;
    let metric = build_metric(&phi, xi, None)?;
    let pairs = sample_pairs(&grid, pair_count, seed);

    let n = grid.n();
    let block: Vec<usize> = (n / 4..3 * n / 4).flat_map(|j| (n / 4..3 * n / 4).map(move |i| j * n + i)).collect();
    let region = Region::from_vertices(&grid, &block)?;
    let closure = region.closure(&grid);
    let mut r = rng::stream(seed, 1, rng::STREAM_QUERIES);
    let perturbation: Vec<f64> = (0..grid.len())
        .map(|v| {
            let x: f64 = StandardNormal.sample(&mut r);
            if closure.contains(v) {
                0.0
            } else {
                5.0 * x
            }
        })
        .collect();
    let local_pairs = sample_pairs_from(&block, pair_count, seed)?;

    let c = grid.center();
    let l = grid.side_length();
    let bump = annulus_bump(&grid, c, l / 8.0, l / 4.0, 1.0);
    Ok(vec![
        check_metric_axioms(&metric, &pairs)?,
        check_length_space(&metric, &pairs)?,
        check_locality(&phi, xi, &region, &perturbation, &local_pairs)?,
        check_weyl(&phi, xi, &bump, &pairs)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{ConstantSource, Sequential};

    fn setup(n: usize, seed: u64) -> (GridSpec, MollifiedField) {
        let g = GridSpec::new(n, 4.0).unwrap();
        let phi = mollify(&sample_gff(g, seed).unwrap(), 4.0 * g.spacing()).unwrap();
        (g, phi)
    }

    #[test]
    fn weyl_zero_and_doubling() {
        let (g, phi) = setup(32, 1);
        let pairs = sample_pairs(&g, 20, 1);
        let r = check_weyl(&phi, 0.4, &vec![0.0; g.len()], &pairs).unwrap();
        assert!(r.passed() && r.worst_error <= 1e-12, "{}", r.worst_error);
        let m0 = build_metric(&phi, 0.4, None).unwrap();
        let m2 = build_metric(&phi.shifted(&vec![libm::log(2.0) / 0.4; g.len()]).unwrap(), 0.4, None).unwrap();
        let est = compare_metrics(&m0, &m2, &pairs).unwrap();
        assert!((est.c_hat - 2.0).abs() < 2e-10 && (est.big_c_hat - 2.0).abs() < 2e-10);
        let r = check_weyl(&phi, 0.4, &vec![libm::log(2.0) / 0.4; g.len()], &pairs).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn locality_rejects_touching_perturbation() {
        let (g, phi) = setup(32, 2);
        let region = Region::from_vertices(&g, &[g.index(5, 5)]).unwrap();
        let mut p = vec![0.0; g.len()];
        p[g.index(6, 6)] = 1.0;
        assert_eq!(check_locality(&phi, 0.4, &region, &p, &[]).unwrap_err(), Error::PerturbationInRegion(g.index(6, 6)));
        p[g.index(6, 6)] = 0.0;
        p[g.index(7, 7)] = 100.0;
        assert!(check_locality(&phi, 0.4, &region, &p, &[]).unwrap().passed());
    }

    #[test]
    fn compare_is_identity_and_antisymmetric() {
        let (g, phi) = setup(32, 3);
        let pairs = sample_pairs(&g, 30, 3);
        let a = build_metric(&phi, 0.4, None).unwrap();
        let same = compare_metrics(&a, &a, &pairs).unwrap();
        assert_eq!((same.c_hat, same.big_c_hat), (1.0, 1.0));
        let b = build_metric(&mollify(phi.base(), 8.0 * g.spacing()).unwrap(), 0.4, None).unwrap();
        let ab = compare_metrics(&a, &b, &pairs).unwrap();
        let ba = compare_metrics(&b, &a, &pairs).unwrap();
        assert!(ab.c_hat > 0.0 && ab.c_hat <= ab.big_c_hat);
        assert!((ba.c_hat - 1.0 / ab.big_c_hat).abs() < 1e-12 && (ba.big_c_hat - 1.0 / ab.c_hat).abs() < 1e-12);
    }

    #[test]
    fn shift_must_be_lattice() {
        let g = GridSpec::new(32, 4.0).unwrap();
        assert_eq!(lattice_shift(&g, Point::new(0.25, -0.5)).unwrap(), (2, -4));
        assert_eq!(lattice_shift(&g, Point::new(0.1, 0.0)).unwrap_err(), Error::NonLatticeShift);
        let flat = ConstantSource { grid: g, value: 0.0 };
        let r = check_translation(&flat, 0.4, 0.5, Point::new(0.0, 0.0), 5, &Sequential).unwrap();
        assert!(r.passed() && r.statistic == Some(1.0));
    }

    #[test]
    fn flat_scaling_relation_is_exact() {
        let g = GridSpec::new(64, 8.0).unwrap();
        let coarse = g.half().unwrap();
        let pairs = sample_pairs(&coarse, 20, 4);
        for c in [0.0, 1.3] {
            let r = check_scaling_relation(&FieldGrid::constant(g, c), 0.4, 0.5, &pairs).unwrap();
            assert!(r.statistic.unwrap() < 1e-12, "{:?}", r.statistic);
        }
    }

    #[test]
    fn report_merge_and_invariants() {
        let (g, _) = setup(32, 5);
        let reports = exact_suite(g, 5, 0.4, 0.5, 20).unwrap();
        for r in &reports {
            assert!(r.passed(), "{:?} {}", r.axiom, r.worst_error);
            assert!(r.violations <= r.checked && r.worst_error <= r.tolerance);
        }
        let m = reports[0].clone().merge(reports[0].clone()).unwrap();
        assert_eq!(m.checked, 2 * reports[0].checked);
        assert!(reports[0].clone().merge(reports[1].clone()).is_err());
    }
}
