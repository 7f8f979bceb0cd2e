//! File formats. Every writer takes the run config and embeds it, so an
//! artifact found on disk says exactly how it was produced.
//!
//! Binary field snapshot: the 8-byte magic `LFPPFLD1`, `n` as a little-endian
//! `u32` and the spacing as a little-endian `f64` (20 bytes), then `n * n`
//! little-endian `f64` values in row-major order. The config follows as a
//! trailer: magic `LFPPCFG1`, a `u32` byte length and UTF-8 JSON. Readers that
//! only know the field layout can stop after the values.

use std::io::{Read, Write};

use anyhow::{bail, ensure, Context, Result};
use lfpp_core::GridSpec;
use serde::Serialize;
use serde_json::Value;

pub const FIELD_MAGIC: &[u8; 8] = b"LFPPFLD1";
pub const CONFIG_MAGIC: &[u8; 8] = b"LFPPCFG1";
pub const FIELD_HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub n: usize,
    pub spacing: f64,
    pub values: Vec<f64>,
    pub config: Option<Value>,
}

impl FieldSnapshot {
    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.n, self.spacing * self.n as f64)?)
    }
}

pub fn write_field<W: Write>(mut w: W, grid: &GridSpec, values: &[f64], config: &Value) -> Result<()> {
    ensure!(values.len() == grid.len(), "field has {} values, grid needs {}", values.len(), grid.len());
    let n = u32::try_from(grid.n()).context("grid too large for the field format")?;
    let mut buf = Vec::with_capacity(FIELD_HEADER_LEN + 8 * values.len() + 64);
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&grid.spacing().to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let json = serde_json::to_vec(config)?;
    buf.extend_from_slice(CONFIG_MAGIC);
    buf.extend_from_slice(&u32::try_from(json.len())?.to_le_bytes());
    buf.extend_from_slice(&json);
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<FieldSnapshot> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    ensure!(bytes.len() >= FIELD_HEADER_LEN, "field file shorter than its header");
    ensure!(&bytes[..8] == FIELD_MAGIC, "bad field magic");
    let n = u32::from_le_bytes(bytes[8..12].try_into()?) as usize;
    let spacing = f64::from_le_bytes(bytes[12..20].try_into()?);
    let end =
        n.checked_mul(n).and_then(|m| m.checked_mul(8)).and_then(|b| b.checked_add(FIELD_HEADER_LEN)).context("field size overflows")?;
    ensure!(bytes.len() >= end, "field file truncated: {} of {} bytes", bytes.len(), end);
    let values = bytes[FIELD_HEADER_LEN..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let rest = &bytes[end..];
    let config = if rest.is_empty() {
        None
    } else {
        ensure!(rest.len() >= 12 && &rest[..8] == CONFIG_MAGIC, "unrecognized trailer after field values");
        let len = u32::from_le_bytes(rest[8..12].try_into()?) as usize;
        ensure!(rest.len() == 12 + len, "config trailer length mismatch");
        Some(serde_json::from_slice(&rest[12..])?)
    };
    Ok(FieldSnapshot { n, spacing, values, config })
}

/// Affine map of `values` onto `0..=255`; a constant field maps to 128.
pub fn gray_levels(values: &[f64]) -> Vec<u8> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi <= lo {
        return vec![128; values.len()];
    }
    values.iter().map(|&v| (((v - lo) / (hi - lo)) * 255.0).round() as u8).collect()
}

fn raster_header(magic: &str, n: usize, config: &Value) -> Result<Vec<u8>> {
    Ok(format!("{magic}\n# config {}\n{n} {n}\n255\n", serde_json::to_string(config)?).into_bytes())
}

/// Image row `r` shows lattice row `j = n - 1 - r`, so `y` points up.
fn image_order(n: usize) -> impl Iterator<Item = usize> {
    (0..n).rev().flat_map(move |j| (0..n).map(move |i| j * n + i))
}

/// Binary 8-bit PGM heatmap of a lattice field.
pub fn write_pgm<W: Write>(mut w: W, grid: &GridSpec, values: &[f64], config: &Value) -> Result<()> {
    ensure!(values.len() == grid.len(), "field does not match the grid");
    let levels = gray_levels(values);
    let mut buf = raster_header("P5", grid.n(), config)?;
    buf.extend(image_order(grid.n()).map(|v| levels[v]));
    w.write_all(&buf)?;
    Ok(())
}

/// RGB canvas over a grayscale field for ball and path overlays.
#[derive(Debug, Clone)]
pub struct Overlay {
    n: usize,
    pixels: Vec<[u8; 3]>,
}

pub const BALL_COLOR: [u8; 3] = [220, 40, 40];
pub const PATH_COLORS: [[u8; 3]; 4] = [[255, 215, 0], [0, 200, 255], [60, 220, 60], [255, 120, 0]];

impl Overlay {
    pub fn new(grid: &GridSpec, values: &[f64]) -> Self {
        let pixels = gray_levels(values).into_iter().map(|g| [g, g, g]).collect();
        Self { n: grid.n(), pixels }
    }

    /// Blends `color` into the listed vertices with weight `alpha`.
    pub fn fill(&mut self, vertices: &[usize], color: [u8; 3], alpha: f64) {
        for &v in vertices {
            let p = &mut self.pixels[v];
            for c in 0..3 {
                p[c] = ((1.0 - alpha) * p[c] as f64 + alpha * color[c] as f64).round() as u8;
            }
        }
    }

    pub fn trace(&mut self, vertices: &[usize], color: [u8; 3]) {
        for &v in vertices {
            self.pixels[v] = color;
        }
    }

    pub fn pixel(&self, v: usize) -> [u8; 3] {
        self.pixels[v]
    }

    pub fn write_ppm<W: Write>(&self, mut w: W, config: &Value) -> Result<()> {
        let mut buf = raster_header("P6", self.n, config)?;
        for v in image_order(self.n) {
            buf.extend_from_slice(&self.pixels[v]);
        }
        w.write_all(&buf)?;
        Ok(())
    }
}

/// Vertex list with a running distance per vertex.
pub fn write_vertex_csv<W: Write>(mut w: W, grid: &GridSpec, vertices: &[usize], distance: &[f64], config: &Value) -> Result<()> {
    ensure!(vertices.len() == distance.len(), "one distance per vertex is required");
    let mut out = format!("# config {}\nx_index,y_index,cumulative_distance\n", serde_json::to_string(config)?);
    for (&v, d) in vertices.iter().zip(distance) {
        let (i, j) = grid.coords(v);
        out.push_str(&format!("{i},{j},{d}\n"));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Generic CSV table; `rows` must match `header` in width.
pub fn write_table_csv<W: Write>(mut w: W, header: &[&str], rows: &[Vec<f64>], config: &Value) -> Result<()> {
    let mut out = format!("# config {}\n{}\n", serde_json::to_string(config)?, header.join(","));
    for row in rows {
        if row.len() != header.len() {
            bail!("table row has {} columns, header has {}", row.len(), header.len());
        }
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Single distance query result.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct DistanceRecord {
    pub xi: f64,
    pub epsilon: f64,
    pub query: String,
    pub value: f64,
    pub seed: u64,
}

/// `{"config": ..., "result": ...}` as pretty JSON with a trailing newline.
pub fn envelope<T: Serialize>(config: &Value, result: &T) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        config: &'a Value,
        result: &'a T,
    }
    let mut bytes = serde_json::to_vec_pretty(&Envelope { config, result })?;
    bytes.push(b'\n');
    Ok(bytes)
}
