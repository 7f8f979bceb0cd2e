//! Replica campaigns. Each replica is a pure function of `(seed, replica)`;
//! the executor decides where it runs and returns results in replica order.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::exponent::{bracket_q_crossing, check_xi_grid, fit_exponent, validate_eps_grid, ExponentFit, ReplicaTable, XiCritBracket};
use super::stats::{median, ols, variance, QuantileSummary};
use crate::error::{Error, Result};
use crate::field::{
    circle_average, default_circle_samples, sample_gff, sample_gff_raw, sample_gff_replica, thickness_stencils, thickness_with,
    CircleStencil, FieldGrid, FieldSpectrum,
};
use crate::grid::{GridSpec, LatticeField, Point};
use crate::metric::{across, around, build_metric, confluence_fraction, crossing_of, AnnulusSpec, SquareCells};
use crate::rng;

pub trait ReplicaExecutor: Sync {
    fn map_replicas<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs replicas one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ReplicaExecutor for Sequential {
    fn map_replicas<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}

/// Produces the base field `h` of each replica.
pub trait FieldSource: Sync {
    fn grid(&self) -> GridSpec;
    fn field(&self, replica: usize) -> Result<FieldGrid>;
}

/// Torus GFF normalized to zero unit-circle average about the domain center.
#[derive(Debug, Clone, Copy)]
pub struct GffSource {
    pub grid: GridSpec,
    pub seed: u64,
}

impl FieldSource for GffSource {
    fn grid(&self) -> GridSpec {
        self.grid
    }
    fn field(&self, replica: usize) -> Result<FieldGrid> {
        sample_gff_replica(self.grid, self.seed, replica as u64)
    }
}

/// Stationary torus GFF without the unit-circle normalization.
#[derive(Debug, Clone, Copy)]
pub struct RawGffSource {
    pub grid: GridSpec,
    pub seed: u64,
}

impl FieldSource for RawGffSource {
    fn grid(&self) -> GridSpec {
        self.grid
    }
    fn field(&self, replica: usize) -> Result<FieldGrid> {
        Ok(sample_gff_raw(self.grid, self.seed, replica as u64))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantSource {
    pub grid: GridSpec,
    pub value: f64,
}

impl FieldSource for ConstantSource {
    fn grid(&self) -> GridSpec {
        self.grid
    }
    fn field(&self, _replica: usize) -> Result<FieldGrid> {
        Ok(FieldGrid::constant(self.grid, self.value))
    }
}

/// Another source plus a fixed deterministic function.
#[derive(Debug, Clone)]
pub struct WithDrift<S> {
    pub inner: S,
    pub drift: Vec<f64>,
}

impl<S: FieldSource> FieldSource for WithDrift<S> {
    fn grid(&self) -> GridSpec {
        self.inner.grid()
    }
    fn field(&self, replica: usize) -> Result<FieldGrid> {
        crate::field::add_function(&self.inner.field(replica)?, &self.drift)
    }
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

fn check_xis(xis: &[f64]) -> Result<()> {
    match xis.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        Some(&x) => Err(Error::NonPositiveXi(x)),
        None => Ok(()),
    }
}

/// Crossing estimators need `epsilon` of at least four lattice spacings.
pub fn check_crossing_epsilon(grid: &GridSpec, epsilon: f64) -> Result<()> {
    let limit = 4.0 * grid.spacing();
    if !(epsilon >= limit * (1.0 - 1e-12)) {
        return Err(Error::BelowResolution { epsilon, limit });
    }
    Ok(())
}

/// Unit-square crossing distance of one field at each mollification scale.
pub fn crossing_row(field: &FieldGrid, xi: f64, eps: &[f64]) -> Result<Vec<f64>> {
    check_xis(&[xi])?;
    let grid = *field.spec();
    for &e in eps {
        check_crossing_epsilon(&grid, e)?;
    }
    let square = SquareCells::centered(&grid, 1.0, grid.center())?;
    let spectrum = FieldSpectrum::new(field);
    eps.iter().map(|&e| crossing_of(&build_metric(&spectrum.mollify(e)?, xi, None)?, &square)).collect()
}

/// Unit-square crossing distance of every replica at one `epsilon`.
pub fn crossing_samples<S: FieldSource, E: ReplicaExecutor>(
    source: &S,
    xi: f64,
    epsilon: f64,
    replicas: usize,
    exec: &E,
) -> Result<Vec<f64>> {
    check_xis(&[xi])?;
    check_crossing_epsilon(&source.grid(), epsilon)?;
    collect(exec.map_replicas(replicas, |k| crossing_row(&source.field(k)?, xi, &[epsilon]).map(|v| v[0])))
}

/// Sample median of the unit-square crossing distance over `replicas` fields.
pub fn estimate_a_eps<E: ReplicaExecutor>(xi: f64, epsilon: f64, replicas: usize, grid: GridSpec, seed: u64, exec: &E) -> Result<f64> {
    if replicas < 10 {
        return Err(Error::InvalidParameter("at least 10 replicas are required"));
    }
    Ok(median(&crossing_samples(&GffSource { grid, seed }, xi, epsilon, replicas, exec)?))
}

/// Preconditions of [`transfer_row`]: positive `xis`, a valid decreasing
/// `eps_grid` whose first scale is resolved, and a largest square side
/// `eps_grid[0] / eps_grid[last]` of at most `L / 2`.
pub fn check_transfer(grid: &GridSpec, xis: &[f64], eps_grid: &[f64]) -> Result<()> {
    check_xis(xis)?;
    validate_eps_grid(eps_grid)?;
    check_crossing_epsilon(grid, eps_grid[0])?;
    let side = eps_grid[0] / eps_grid[eps_grid.len() - 1];
    if side > grid.side_length() / 2.0 * (1.0 + 1e-12) {
        return Err(Error::SquareOutsideDomain { side });
    }
    Ok(())
}

/// Scale-transfer row of one field: for each `xi` and each `eps` in the
/// grid, an unbiased-in-law sample of the unit-square crossing at `eps`.
///
/// The field is mollified once at `eps_0 = eps_grid[0]`. Crossing the centered
/// square of side `s = eps_0 / eps` and dividing by `s e^{xi h_s(center)}`
/// gives the crossing of `[0,1]^2` under `h(s.) - h_s(center)` mollified at
/// `eps_0 / s`, which has the law of the unit-normalized field. All `eps` values
/// share the same randomness.
pub fn transfer_row(field: &FieldGrid, xis: &[f64], eps_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let grid = *field.spec();
    check_transfer(&grid, xis, eps_grid)?;
    let eps0 = eps_grid[0];
    let center = grid.center();
    let sides: Vec<f64> = eps_grid.iter().map(|e| eps0 / e).collect();
    let squares: Vec<SquareCells> = sides.iter().map(|&s| SquareCells::centered(&grid, s, center)).collect::<Result<_>>()?;
    let offsets: Vec<f64> = sides
        .iter()
        .map(|&s| circle_average(field, center, s, default_circle_samples(s, grid.spacing())).map(|c| c.value))
        .collect::<Result<_>>()?;
    let phi = crate::field::mollify(field, eps0)?;
    xis.iter()
        .map(|&xi| {
            let metric = build_metric(&phi, xi, None)?;
            squares.iter().zip(&sides).zip(&offsets).map(|((sq, &s), &h)| Ok(crossing_of(&metric, sq)? / (s * libm::exp(xi * h)))).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub grid: GridSpec,
    pub eps_grid: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub resamples: usize,
}

/// Replica tables for several `xi` values on common fields.
pub fn transfer_tables<S: FieldSource, E: ReplicaExecutor>(
    source: &S,
    xis: &[f64],
    eps_grid: &[f64],
    replicas: usize,
    exec: &E,
) -> Result<Vec<ReplicaTable>> {
    let rows = collect(exec.map_replicas(replicas, |k| transfer_row(&source.field(k)?, xis, eps_grid)))?;
    Ok((0..xis.len()).map(|x| ReplicaTable { eps_grid: eps_grid.to_vec(), rows: rows.iter().map(|r| r[x].clone()).collect() }).collect())
}

/// Fits `Q` for each `xi` with common random fields across `xi` and `eps`.
pub fn fit_q_many<E: ReplicaExecutor>(xis: &[f64], cfg: &FitConfig, exec: &E) -> Result<Vec<ExponentFit>> {
    check_resamples(cfg.resamples)?;
    let source = GffSource { grid: cfg.grid, seed: cfg.seed };
    let tables = transfer_tables(&source, xis, &cfg.eps_grid, cfg.replicas, exec)?;
    fit_tables(xis, &tables, cfg.resamples, cfg.seed)
}

pub fn check_resamples(resamples: usize) -> Result<()> {
    if resamples < 200 {
        return Err(Error::InvalidParameter("at least 200 bootstrap resamples are required"));
    }
    Ok(())
}

/// One exponent fit per `xi` from its replica table.
pub fn fit_tables(xis: &[f64], tables: &[ReplicaTable], resamples: usize, seed: u64) -> Result<Vec<ExponentFit>> {
    check_resamples(resamples)?;
    if xis.len() != tables.len() {
        return Err(Error::InvalidParameter("one replica table per xi is required"));
    }
    xis.iter().zip(tables).map(|(&xi, t)| fit_exponent(xi, t, resamples, seed)).collect()
}

pub fn fit_q<E: ReplicaExecutor>(xi: f64, cfg: &FitConfig, exec: &E) -> Result<ExponentFit> {
    fit_q_many(&[xi], cfg, exec).map(|mut v| v.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiCritResult {
    pub bracket: Option<XiCritBracket>,
    pub fits: Vec<ExponentFit>,
}

pub fn estimate_xi_crit<E: ReplicaExecutor>(xis: &[f64], cfg: &FitConfig, exec: &E) -> Result<XiCritResult> {
    check_xi_grid(xis)?;
    let fits = fit_q_many(xis, cfg, exec)?;
    let qs: Vec<f64> = fits.iter().map(|f| f.q_hat).collect();
    Ok(XiCritResult { bracket: bracket_q_crossing(xis, &qs)?, fits })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleStats {
    pub xi: f64,
    pub q_used: f64,
    pub radii: Vec<f64>,
    pub normalized_across: Vec<QuantileSummary>,
    pub normalized_around: Vec<QuantileSummary>,
}

/// Fixed geometry of a tightness campaign: annuli `r A` about the domain
/// center and the circle stencils used for the normalization.
#[derive(Debug, Clone)]
pub struct TightnessPlan {
    xi: f64,
    q_used: f64,
    epsilon: f64,
    radii: Vec<f64>,
    shapes: Vec<AnnulusSpec>,
    stencils: Vec<CircleStencil>,
}

impl TightnessPlan {
    pub fn new(grid: &GridSpec, xi: f64, q_used: f64, radii: &[f64], template: &AnnulusSpec, epsilon: f64) -> Result<Self> {
        check_xis(&[xi])?;
        if radii.is_empty() {
            return Err(Error::InvalidParameter("need at least one radius"));
        }
        let center = grid.center();
        let shapes = radii
            .iter()
            .map(|&r| {
                let a = AnnulusSpec { center, ..template.scaled(r) };
                a.validate(grid).map(|_| a)
            })
            .collect::<Result<_>>()?;
        let stencils =
            radii.iter().map(|&r| CircleStencil::new(grid, r, default_circle_samples(r, grid.spacing()))).collect::<Result<_>>()?;
        Ok(Self { xi, q_used, epsilon, radii: radii.to_vec(), shapes, stencils })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Normalized `(across, around)` of one field at each radius.
    pub fn row(&self, h: &FieldGrid) -> Result<Vec<(f64, f64)>> {
        let center = h.spec().center();
        let metric = build_metric(&crate::field::mollify(h, self.epsilon)?, self.xi, None)?;
        self.radii
            .iter()
            .zip(&self.shapes)
            .zip(&self.stencils)
            .map(|((&r, a), st)| {
                let norm = libm::pow(r, -self.xi * self.q_used) * libm::exp(-self.xi * st.average(h, center));
                Ok((norm * across(&metric, a)?, norm * around(&metric, a)?))
            })
            .collect()
    }

    pub fn summarize(&self, rows: &[Vec<(f64, f64)>]) -> Result<ScaleStats> {
        if rows.is_empty() || rows.iter().any(|r| r.len() != self.radii.len()) {
            return Err(Error::InvalidParameter("tightness rows do not match the radii"));
        }
        let column = |i: usize, pick: fn(&(f64, f64)) -> f64| QuantileSummary::of(&rows.iter().map(|r| pick(&r[i])).collect::<Vec<_>>());
        Ok(ScaleStats {
            xi: self.xi,
            q_used: self.q_used,
            radii: self.radii.clone(),
            normalized_across: (0..self.radii.len()).map(|i| column(i, |p| p.0)).collect(),
            normalized_around: (0..self.radii.len()).map(|i| column(i, |p| p.1)).collect(),
        })
    }
}

/// Normalized annulus distances `r^{-xi Q} e^{-xi h_r(c)} D(r A)` about the
/// domain center `c`, summarized by quantiles per radius.
#[allow(clippy::too_many_arguments)]
pub fn tightness_stats<S: FieldSource, E: ReplicaExecutor>(
    source: &S,
    xi: f64,
    q_used: f64,
    radii: &[f64],
    template: &AnnulusSpec,
    epsilon: f64,
    replicas: usize,
    exec: &E,
) -> Result<ScaleStats> {
    let plan = TightnessPlan::new(&source.grid(), xi, q_used, radii, template, epsilon)?;
    if replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica"));
    }
    let rows = collect(exec.map_replicas(replicas, |k| plan.row(&source.field(k)?)))?;
    plan.summarize(&rows)
}

/// Around-versus-across comparison on the shape `around A(d r, 2 d r)` and
/// `across A(3 d r, 4 d r)` for each `d` in `deltas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRatioConfig {
    pub epsilon: f64,
    pub scale: f64,
    pub deltas: Vec<f64>,
    pub centers: Vec<Point>,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRatioReport {
    pub xi: f64,
    pub zeta: f64,
    pub deltas: Vec<f64>,
    /// `ratios[d]` holds `around / across` for every (replica, center) pair.
    pub ratios: Vec<Vec<f64>>,
    pub violation_fraction: Vec<f64>,
}

impl AnnulusRatioReport {
    /// Violation fractions of `around <= delta^{-zeta} across` at another `zeta`.
    pub fn fractions_at(&self, zeta: f64) -> Vec<f64> {
        self.deltas
            .iter()
            .zip(&self.ratios)
            .map(|(&d, rs)| {
                let bound = libm::pow(d, -zeta);
                rs.iter().filter(|&&q| !(q <= bound)).count() as f64 / rs.len() as f64
            })
            .collect()
    }
}

pub const RATIO_SHAPE: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

/// Fixed geometry of an annulus-ratio campaign.
#[derive(Debug, Clone)]
pub struct AnnulusRatioPlan {
    xi: f64,
    zeta: f64,
    epsilon: f64,
    deltas: Vec<f64>,
    per_delta: usize,
    shapes: Vec<(AnnulusSpec, AnnulusSpec)>,
}

impl AnnulusRatioPlan {
    pub fn new(grid: &GridSpec, xi: f64, zeta: f64, cfg: &AnnulusRatioConfig) -> Result<Self> {
        check_xis(&[xi])?;
        if cfg.deltas.iter().any(|d| !(*d > 0.0 && *d <= 0.25)) {
            return Err(Error::InvalidParameter("deltas must lie in (0, 1/4]"));
        }
        if cfg.centers.is_empty() {
            return Err(Error::InvalidParameter("need at least one center"));
        }
        let [a, b, c, d] = RATIO_SHAPE;
        let mut shapes = Vec::new();
        for &delta in &cfg.deltas {
            let u = delta * cfg.scale;
            for &z in &cfg.centers {
                let inner = AnnulusSpec::new(z, a * u, b * u);
                let outer = AnnulusSpec::new(z, c * u, d * u);
                inner.validate(grid)?;
                outer.validate(grid)?;
                shapes.push((inner, outer));
            }
        }
        Ok(Self { xi, zeta, epsilon: cfg.epsilon, deltas: cfg.deltas.clone(), per_delta: cfg.centers.len(), shapes })
    }

    /// `around / across` of one field, delta-major then center.
    pub fn row(&self, h: &FieldGrid) -> Result<Vec<f64>> {
        let metric = build_metric(&crate::field::mollify(h, self.epsilon)?, self.xi, None)?;
        self.shapes.iter().map(|(i, o)| Ok(around(&metric, i)? / across(&metric, o)?)).collect()
    }

    pub fn row_len(&self) -> usize {
        self.shapes.len()
    }

    pub fn report(&self, rows: &[Vec<f64>]) -> Result<AnnulusRatioReport> {
        if rows.is_empty() || rows.iter().any(|r| r.len() != self.shapes.len()) {
            return Err(Error::InvalidParameter("ratio rows do not match the plan"));
        }
        let per = self.per_delta;
        let ratios: Vec<Vec<f64>> =
            (0..self.deltas.len()).map(|di| rows.iter().flat_map(|r| r[di * per..(di + 1) * per].iter().copied()).collect()).collect();
        let mut report =
            AnnulusRatioReport { xi: self.xi, zeta: self.zeta, deltas: self.deltas.clone(), ratios, violation_fraction: Vec::new() };
        report.violation_fraction = report.fractions_at(self.zeta);
        Ok(report)
    }
}

pub fn annulus_ratio_check<S: FieldSource, E: ReplicaExecutor>(
    source: &S,
    xi: f64,
    zeta: f64,
    cfg: &AnnulusRatioConfig,
    exec: &E,
) -> Result<AnnulusRatioReport> {
    let plan = AnnulusRatioPlan::new(&source.grid(), xi, zeta, cfg)?;
    if cfg.replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica"));
    }
    let rows = collect(exec.map_replicas(cfg.replicas, |k| plan.row(&source.field(k)?)))?;
    plan.report(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularCensus {
    pub xi: f64,
    pub q_ref: f64,
    pub r_min: f64,
    pub total_vertices: usize,
    pub exceed_count: usize,
    pub fraction: f64,
}

/// Thickness at every `stride`-th vertex in both directions.
pub fn thickness_map<F: LatticeField + ?Sized>(field: &F, r_min: f64, stride: usize) -> Result<Vec<f64>> {
    if stride < 4 {
        return Err(Error::InvalidParameter("census stride must be at least 4"));
    }
    let grid = *field.spec();
    let stencils = thickness_stencils(&grid, r_min)?;
    let mut out = Vec::new();
    for j in (0..grid.n()).step_by(stride) {
        for i in (0..grid.n()).step_by(stride) {
            out.push(thickness_with(&stencils, field, grid.position(grid.index(i, j))));
        }
    }
    Ok(out)
}

pub fn census_of(xi: f64, q_ref: f64, r_min: f64, thickness: &[f64]) -> SingularCensus {
    let exceed_count = thickness.iter().filter(|&&t| t > q_ref).count();
    SingularCensus {
        xi,
        q_ref,
        r_min,
        total_vertices: thickness.len(),
        exceed_count,
        fraction: exceed_count as f64 / thickness.len() as f64,
    }
}

/// Counts vertices of the stride lattice whose thickness exceeds `q_ref`.
/// `xi` is recorded for bookkeeping; thickness depends on `h` alone.
pub fn singular_census(xi: f64, q_ref: f64, grid: GridSpec, r_min: f64, seed: u64, stride: usize) -> Result<SingularCensus> {
    let h = sample_gff(grid, seed)?;
    Ok(census_of(xi, q_ref, r_min, &thickness_map(&h, r_min, stride)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfluenceConfig {
    pub epsilon: f64,
    /// Targets sit at this Euclidean distance from the domain center.
    pub target_radius: f64,
    pub targets: usize,
    pub k: usize,
    pub replicas: usize,
}

/// Confluence fraction of replica `k`: from the center vertex towards targets
/// evenly spaced on a circle, rotated by a random angle drawn per replica.
pub fn confluence_replica<S: FieldSource>(source: &S, xi: f64, seed: u64, cfg: &ConfluenceConfig, k: usize) -> Result<f64> {
    let grid = source.grid();
    let c = grid.center();
    let z = grid.nearest_vertex(c);
    let mut rng = rng::stream(seed, k as u64, rng::STREAM_QUERIES);
    let turn: f64 = rng.random::<f64>() * 2.0 * core::f64::consts::PI;
    let targets: Vec<usize> = (0..cfg.targets)
        .map(|t| {
            let a = turn + 2.0 * core::f64::consts::PI * t as f64 / cfg.targets as f64;
            grid.nearest_vertex(Point::new(c.x + cfg.target_radius * libm::cos(a), c.y + cfg.target_radius * libm::sin(a)))
        })
        .collect();
    let metric = build_metric(&crate::field::mollify(&source.field(k)?, cfg.epsilon)?, xi, None)?;
    confluence_fraction(&metric, z, &targets, cfg.k)
}

/// Confluence fraction of every replica.
pub fn confluence_samples<S: FieldSource, E: ReplicaExecutor>(
    source: &S,
    xi: f64,
    seed: u64,
    cfg: &ConfluenceConfig,
    exec: &E,
) -> Result<Vec<f64>> {
    collect(exec.map_replicas(cfg.replicas, |k| confluence_replica(source, xi, seed, cfg, k)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceFit {
    pub radii: Vec<f64>,
    pub variances: Vec<f64>,
    /// Slope of `Var(h_r)` against `log(1/r)`.
    pub slope: f64,
    pub intercept: f64,
}

/// Regresses the sample variance of circle averages of the raw field about
/// the domain center on `log(1/r)`. Uses replicas `0..replicas` of `seed`.
pub fn circle_variance<E: ReplicaExecutor>(grid: GridSpec, radii: &[f64], seed: u64, replicas: usize, exec: &E) -> Result<VarianceFit> {
    if radii.len() < 2 || replicas < 2 {
        return Err(Error::InvalidParameter("need at least two radii and two replicas"));
    }
    let stencils: Vec<CircleStencil> =
        radii.iter().map(|&r| CircleStencil::new(&grid, r, default_circle_samples(r, grid.spacing()))).collect::<Result<_>>()?;
    let c = grid.center();
    let rows = exec.map_replicas(replicas, |k| {
        let h = sample_gff_raw(grid, seed, k as u64);
        stencils.iter().map(|s| s.average(&h, c)).collect::<Vec<f64>>()
    });
    let variances: Vec<f64> = (0..radii.len()).map(|i| variance(&rows.iter().map(|r| r[i]).collect::<Vec<_>>())).collect();
    let x: Vec<f64> = radii.iter().map(|r| libm::log(1.0 / r)).collect();
    let (slope, intercept) = ols(&x, &variances);
    Ok(VarianceFit { radii: radii.to_vec(), variances, slope, intercept })
}
