//! Torus discretization of the plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x n` periodic lattice of physical side length `side_length`.
///
/// Vertex `(i, j)` sits at physical position `(i * spacing, j * spacing)` and
/// has linear index `j * n + i` (row-major, rows along `y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    side_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl GridSpec {
    pub fn new(n: usize, side_length: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::GridSize(n));
        }
        if !(side_length > 0.0 && side_length.is_finite()) {
            return Err(Error::SideLength(side_length));
        }
        Ok(Self { n, side_length })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.side_length / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        j * self.n + i
    }

    #[inline]
    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v % self.n, v / self.n)
    }

    /// Index of the vertex at signed lattice offset `(di, dj)` from `v`, with wrap.
    #[inline]
    pub fn offset(&self, v: usize, di: isize, dj: isize) -> usize {
        let n = self.n as isize;
        let (i, j) = self.coords(v);
        let i = (i as isize + di).rem_euclid(n) as usize;
        let j = (j as isize + dj).rem_euclid(n) as usize;
        j * self.n + i
    }

    pub fn position(&self, v: usize) -> Point {
        let (i, j) = self.coords(v);
        let s = self.spacing();
        Point::new(i as f64 * s, j as f64 * s)
    }

    pub fn center(&self) -> Point {
        let h = self.side_length / 2.0;
        Point::new(h, h)
    }

    /// Vertex nearest to a physical point (with wrap).
    pub fn nearest_vertex(&self, p: Point) -> usize {
        let s = self.spacing();
        let n = self.n as i64;
        let i = (libm::round(p.x / s) as i64).rem_euclid(n) as usize;
        let j = (libm::round(p.y / s) as i64).rem_euclid(n) as usize;
        self.index(i, j)
    }

    /// Minimal-image displacement `v - p` in lattice units.
    pub fn displacement_units(&self, p: Point, v: usize) -> (f64, f64) {
        let s = self.spacing();
        let n = self.n as f64;
        let (i, j) = self.coords(v);
        let wrap = |d: f64| d - n * libm::round(d / n);
        (wrap(i as f64 - p.x / s), wrap(j as f64 - p.y / s))
    }

    /// Minimal-image Euclidean distance from `p` to vertex `v`, physical units.
    pub fn torus_distance(&self, p: Point, v: usize) -> f64 {
        let (dx, dy) = self.displacement_units(p, v);
        libm::sqrt(dx * dx + dy * dy) * self.spacing()
    }

    /// Subgrid with half as many vertices per side and the same spacing.
    pub fn half(&self) -> Result<Self> {
        Self::new(self.n / 2, self.side_length / 2.0)
    }
}

/// Values on a grid; implemented by raw and mollified fields.
pub trait LatticeField {
    fn spec(&self) -> &GridSpec;
    fn values(&self) -> &[f64];

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values()[self.spec().index(i, j)]
    }

    /// Periodic bilinear interpolation at a physical point.
    fn interpolate(&self, p: Point) -> f64 {
        let spec = self.spec();
        let n = spec.n();
        let s = spec.spacing();
        let u = p.x / s;
        let w = p.y / s;
        let fu = libm::floor(u);
        let fw = libm::floor(w);
        let tx = u - fu;
        let ty = w - fw;
        let i0 = (fu as i64).rem_euclid(n as i64) as usize;
        let j0 = (fw as i64).rem_euclid(n as i64) as usize;
        let i1 = (i0 + 1) % n;
        let j1 = (j0 + 1) % n;
        let v = self.values();
        let a = v[j0 * n + i0];
        let b = v[j0 * n + i1];
        let c = v[j1 * n + i0];
        let d = v[j1 * n + i1];
        (1.0 - ty) * ((1.0 - tx) * a + tx * b) + ty * ((1.0 - tx) * c + tx * d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(GridSpec::new(8, 1.0), Err(Error::GridSize(8)));
        assert_eq!(GridSpec::new(48, 1.0), Err(Error::GridSize(48)));
        assert!(GridSpec::new(16, 0.0).is_err());
        assert!(GridSpec::new(16, f64::NAN).is_err());
    }

    #[test]
    fn spacing_is_exact_quotient() {
        let g = GridSpec::new(512, 16.0).unwrap();
        assert_eq!(g.spacing(), 16.0 / 512.0);
        assert_eq!(g.spacing(), 0.03125);
    }

    #[test]
    fn offsets_wrap() {
        let g = GridSpec::new(16, 1.0).unwrap();
        let v = g.index(0, 15);
        assert_eq!(g.coords(g.offset(v, -1, 1)), (15, 0));
    }

    #[test]
    fn displacement_uses_minimal_image() {
        let g = GridSpec::new(16, 16.0).unwrap();
        let (dx, dy) = g.displacement_units(Point::new(1.0, 1.0), g.index(15, 2));
        assert_eq!((dx, dy), (-2.0, 1.0));
    }
}
