//! Discrete Gaussian free field samples, heat-kernel mollification and
//! circle averages.
//!
//! The whole-plane field is approximated by a stationary log-correlated field
//! on the torus of side `L`: real white noise is filtered in Fourier space by
//! `n / (sqrt(2 pi) |m|)` for each nonzero integer wave vector `m`, which gives
//! mode variances `1 / (2 pi |m|^2)` and hence a covariance `-log|x - y| + O(1)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{signed_frequency, Fft};
use crate::grid::{GridSpec, LatticeField, Point};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Additive constant fixed so the radius-1 circle average about the
    /// domain center vanishes.
    UnitCircleAverageZero,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    spec: GridSpec,
    values: Vec<f64>,
    seed: u64,
    replica: u64,
    normalization: Normalization,
}

impl LatticeField for FieldGrid {
    fn spec(&self) -> &GridSpec {
        &self.spec
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl FieldGrid {
    pub fn from_values(spec: GridSpec, values: Vec<f64>, seed: u64) -> Result<Self> {
        check_shape(&spec, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("field values must be finite"));
        }
        Ok(Self { spec, values, seed, replica: 0, normalization: Normalization::Raw })
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Self { spec, values: vec![c; spec.len()], seed: 0, replica: 0, normalization: Normalization::Raw }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..spec.len()).map(|v| f(spec.position(v))).collect();
        Self::from_values(spec, values, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Circle average of radius 1 about the domain center.
    pub fn unit_circle_average(&self) -> Result<f64> {
        let spacing = self.spec.spacing();
        circle_average(self, self.spec.center(), 1.0, default_circle_samples(1.0, spacing)).map(|s| s.value)
    }

    /// Shifts the field so its unit circle average about the center is zero.
    pub fn normalized(mut self) -> Result<Self> {
        let c = self.unit_circle_average()?;
        for v in &mut self.values {
            *v -= c;
        }
        self.normalization = Normalization::UnitCircleAverageZero;
        Ok(self)
    }

    /// Field on the half-size grid with `g(x) = h(2x)`, i.e. every other vertex.
    pub fn subsample_half(&self) -> Result<FieldGrid> {
        let half = self.spec.half()?;
        let values = (0..half.len())
            .map(|v| {
                let (i, j) = half.coords(v);
                self.values[self.spec.index(2 * i, 2 * j)]
            })
            .collect();
        Ok(FieldGrid { spec: half, values, seed: self.seed, replica: self.replica, normalization: Normalization::Raw })
    }
}

fn check_shape(spec: &GridSpec, len: usize) -> Result<()> {
    if len != spec.len() {
        return Err(Error::ShapeMismatch { expected: spec.len(), got: len });
    }
    Ok(())
}

/// Unnormalized raw field for replica `replica` of campaign `master`.
pub fn sample_gff_raw(spec: GridSpec, master: u64, replica: u64) -> FieldGrid {
    let n = spec.n();
    let mut rng = rng::stream(master, replica, rng::STREAM_FIELD);
    let mut data: Vec<Complex64> = (0..spec.len()).map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0)).collect();
    let fft = Fft::new(n);
    fft.transform_2d(&mut data, false);
    let scale = n as f64 / libm::sqrt(2.0 * PI);
    for (idx, c) in data.iter_mut().enumerate() {
        let mx = signed_frequency(idx % n, n);
        let my = signed_frequency(idx / n, n);
        let m2 = mx * mx + my * my;
        *c = if m2 == 0.0 { Complex64::new(0.0, 0.0) } else { *c * (scale / libm::sqrt(m2)) };
    }
    fft.transform_2d(&mut data, true);
    FieldGrid { spec, values: data.into_iter().map(|c| c.re).collect(), seed: master, replica, normalization: Normalization::Raw }
}

/// Unit-circle-normalized field for replica `replica` of campaign `master`.
pub fn sample_gff_replica(spec: GridSpec, master: u64, replica: u64) -> Result<FieldGrid> {
    sample_gff_raw(spec, master, replica).normalized()
}

pub fn sample_gff(spec: GridSpec, seed: u64) -> Result<FieldGrid> {
    sample_gff_replica(spec, seed, 0)
}

/// Field convolved with the heat kernel `p_{eps^2/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedField {
    base: FieldGrid,
    epsilon: f64,
    values: Vec<f64>,
}

impl LatticeField for MollifiedField {
    fn spec(&self) -> &GridSpec {
        &self.base.spec
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl MollifiedField {
    /// Wraps hand-set smooth values, e.g. for tests or injected fields.
    pub fn from_values(spec: GridSpec, epsilon: f64, values: Vec<f64>) -> Result<Self> {
        check_epsilon(&spec, epsilon)?;
        let base = FieldGrid::from_values(spec, values.clone(), 0)?;
        Ok(Self { base, epsilon, values })
    }

    pub fn base(&self) -> &FieldGrid {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Pointwise `phi + f`, keeping `epsilon`. Used by Weyl-scaling checks.
    pub fn shifted(&self, f: &[f64]) -> Result<Self> {
        check_shape(self.spec(), f.len())?;
        let values: Vec<f64> = self.values.iter().zip(f).map(|(a, b)| a + b).collect();
        Self::from_values(*self.spec(), self.epsilon, values)
    }
}

fn check_epsilon(spec: &GridSpec, epsilon: f64) -> Result<()> {
    if !(epsilon >= spec.spacing()) || !epsilon.is_finite() {
        return Err(Error::BelowResolution { epsilon, limit: spec.spacing() });
    }
    Ok(())
}

/// Cached Fourier transform of a field, for mollifying at several scales.
pub struct FieldSpectrum<'a> {
    field: &'a FieldGrid,
    fft: Fft,
    coefficients: Vec<Complex64>,
}

impl<'a> FieldSpectrum<'a> {
    pub fn new(field: &'a FieldGrid) -> Self {
        let fft = Fft::new(field.spec.n());
        let mut coefficients: Vec<Complex64> = field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.transform_2d(&mut coefficients, false);
        Self { field, fft, coefficients }
    }

    /// Applies the spectral multiplier `exp(-|k|^2 eps^2 / 4)`.
    pub fn mollify(&self, epsilon: f64) -> Result<MollifiedField> {
        let spec = self.field.spec;
        check_epsilon(&spec, epsilon)?;
        let n = spec.n();
        let dk = 2.0 * PI / spec.side_length();
        let c = dk * dk * epsilon * epsilon / 4.0;
        let factors: Vec<f64> = (0..n)
            .map(|m| {
                let f = signed_frequency(m, n);
                libm::exp(-c * f * f)
            })
            .collect();
        let mut data = self.coefficients.clone();
        for (idx, z) in data.iter_mut().enumerate() {
            *z *= factors[idx % n] * factors[idx / n];
        }
        self.fft.transform_2d(&mut data, true);
        Ok(MollifiedField { base: self.field.clone(), epsilon, values: data.into_iter().map(|z| z.re).collect() })
    }
}

pub fn mollify(field: &FieldGrid, epsilon: f64) -> Result<MollifiedField> {
    check_epsilon(&field.spec, epsilon)?;
    FieldSpectrum::new(field).mollify(epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleAverageSample {
    pub center: Point,
    pub radius: f64,
    pub value: f64,
    pub sample_count: usize,
}

/// `max(64, ceil(2 pi r / spacing))`.
pub fn default_circle_samples(r: f64, spacing: f64) -> usize {
    let m = libm::ceil(2.0 * PI * r / spacing);
    if m > 64.0 {
        m as usize
    } else {
        64
    }
}

/// Precomputed unit-circle offsets for repeated circle averages.
#[derive(Debug, Clone)]
pub struct CircleStencil {
    radius: f64,
    offsets: Vec<(f64, f64)>,
}

impl CircleStencil {
    pub fn new(spec: &GridSpec, radius: f64, m: usize) -> Result<Self> {
        let minimum = 2.0 * spec.spacing();
        if !(radius >= minimum) {
            return Err(Error::RadiusTooSmall { radius, minimum });
        }
        if m < 64 {
            return Err(Error::TooFewSamples(m));
        }
        let offsets = (0..m)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / m as f64;
                (radius * libm::cos(t), radius * libm::sin(t))
            })
            .collect();
        Ok(Self { radius, offsets })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn average<F: LatticeField + ?Sized>(&self, field: &F, z: Point) -> f64 {
        let sum: f64 = self.offsets.iter().map(|&(dx, dy)| field.interpolate(Point::new(z.x + dx, z.y + dy))).sum();
        sum / self.offsets.len() as f64
    }
}

/// Mean of bilinearly interpolated values at `m` equally spaced points of the
/// circle of radius `r` about `z`. Circles leaving the fundamental domain wrap
/// periodically.
pub fn circle_average<F: LatticeField + ?Sized>(field: &F, z: Point, r: f64, m: usize) -> Result<CircleAverageSample> {
    let stencil = CircleStencil::new(field.spec(), r, m)?;
    Ok(CircleAverageSample { center: z, radius: r, value: stencil.average(field, z), sample_count: m })
}

/// Dyadic radii `r_min * 2^j <= 1` with `log(1/r) > 0.1`.
pub fn thickness_radii(r_min: f64) -> Vec<f64> {
    let mut radii = Vec::new();
    let mut r = r_min;
    while r <= 1.0 * (1.0 + 1e-12) {
        if libm::log(1.0 / r) > 0.1 {
            radii.push(r);
        }
        r *= 2.0;
    }
    radii
}

/// Finite-resolution thickness `max_r h_r(z) / log(1/r)` over dyadic radii
/// from `r_min` up to 1.
pub fn thickness<F: LatticeField + ?Sized>(field: &F, z: Point, r_min: f64) -> Result<f64> {
    let stencils = thickness_stencils(field.spec(), r_min)?;
    Ok(thickness_with(&stencils, field, z))
}

pub fn thickness_stencils(spec: &GridSpec, r_min: f64) -> Result<Vec<CircleStencil>> {
    let minimum = 2.0 * spec.spacing();
    if !(r_min >= minimum) {
        return Err(Error::RadiusTooSmall { radius: r_min, minimum });
    }
    let radii = thickness_radii(r_min);
    if radii.is_empty() {
        return Err(Error::InvalidParameter("no dyadic radius below 1 with log(1/r) > 0.1"));
    }
    radii.into_iter().map(|r| CircleStencil::new(spec, r, default_circle_samples(r, spec.spacing()))).collect()
}

pub fn thickness_with<F: LatticeField + ?Sized>(stencils: &[CircleStencil], field: &F, z: Point) -> f64 {
    stencils.iter().map(|s| s.average(field, z) / libm::log(1.0 / s.radius())).fold(f64::NEG_INFINITY, f64::max)
}

pub fn add_function(field: &FieldGrid, f: &[f64]) -> Result<FieldGrid> {
    check_shape(&field.spec, f.len())?;
    let values = field.values.iter().zip(f).map(|(a, b)| a + b).collect();
    Ok(FieldGrid { values, normalization: Normalization::Raw, ..field.clone() })
}
