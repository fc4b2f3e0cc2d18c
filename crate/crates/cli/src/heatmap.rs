//! Grayscale heatmaps of nodal fields as binary PGM (`P5`) images.
//!
//! Values map linearly onto `0..=254`; intensity 255 is reserved for the
//! rings marking `∂Ω` and `∂Ω̃`. Image rows run from `x2 = L` (top) down to
//! `x2 = −L`, columns from `x1 = −L` to `x1 = L`.

use std::path::{Path, PathBuf};

use obstacle_well_core::{Field, GridSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{self, FormatError};

pub const RING: u8 = 255;
const TOP: f64 = 254.0;

#[derive(Debug, Error)]
pub enum HeatmapError {
    #[error("a {0}-dimensional field needs --slice k to pick a plane x3 = const")]
    NeedsSlice(usize),
    #[error("slice {slice} is outside 0..{n}")]
    SliceOutOfRange { slice: usize, n: usize },
    #[error("--slice only applies to 3-dimensional fields")]
    SliceOnPlanar,
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Sidecar of a heatmap: the value range behind the grey scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapScale {
    pub min: f64,
    pub max: f64,
    pub width: usize,
    pub height: usize,
    pub slice: Option<usize>,
    pub ring_radii: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub scale: HeatmapScale,
}

impl Heatmap {
    /// Builds the image of `u` (or of the plane `x3 = slice` for `N = 3`)
    /// with rings at the radii in `rings`.
    pub fn render(u: &Field, slice: Option<usize>, rings: [f64; 2]) -> Result<Self, HeatmapError> {
        let grid = *u.grid();
        let n = grid.nodes_per_axis();
        let plane = match (grid.dimension(), slice) {
            (2, None) => 0,
            (2, Some(_)) => return Err(HeatmapError::SliceOnPlanar),
            (3, Some(k)) if k < n => k,
            (3, Some(k)) => return Err(HeatmapError::SliceOutOfRange { slice: k, n }),
            (d, _) => return Err(HeatmapError::NeedsSlice(d)),
        };
        let node = |i: usize, j: usize| grid.node_at([i, j, plane]);
        let values: Vec<f64> =
            (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| u.values()[node(i, j)]).collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        let mut pixels = vec![0u8; n * n];
        for j in 0..n {
            for i in 0..n {
                let v = values[j * n + i];
                let level = if span > 0.0 { ((v - min) / span * TOP).round() } else { 0.0 };
                pixels[(n - 1 - j) * n + i] = level as u8;
            }
        }
        for &r in &rings {
            draw_ring(&grid, r, &mut pixels);
        }
        Ok(Self {
            width: n,
            height: n,
            pixels,
            scale: HeatmapScale { min, max, width: n, height: n, slice, ring_radii: rings },
        })
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Writes the image and its sidecar `<path>.json`.
    pub fn write(&self, path: &Path) -> Result<PathBuf, HeatmapError> {
        std::fs::write(path, self.to_pgm()).map_err(|source| HeatmapError::Io { path: path.to_path_buf(), source })?;
        let side = formats::sidecar_path(path);
        formats::write_json(&side, &self.scale)?;
        Ok(side)
    }
}

/// Parses a binary PGM into `(width, height, pixels)`.
pub fn parse_pgm(bytes: &[u8]) -> Option<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return None;
    }
    let (w, h): (usize, usize) = (fields[1].parse().ok()?, fields[2].parse().ok()?);
    let body = bytes.get(pos + 1..)?;
    (body.len() == w * h).then(|| (w, h, body.to_vec()))
}

/// Marks the pixels whose cell straddles the circle `|x| = r` in the image
/// plane.
fn draw_ring(grid: &GridSpec, r: f64, pixels: &mut [u8]) {
    let n = grid.nodes_per_axis();
    let h = grid.spacing();
    let coord = |i: usize| grid.axis_coord(i);
    for j in 0..n {
        for i in 0..n {
            let d = (coord(i).powi(2) + coord(j).powi(2)).sqrt();
            if (d - r).abs() <= 0.5 * h {
                pixels[(n - 1 - j) * n + i] = RING;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_uniform_apart_from_rings() {
        let grid = GridSpec::new(2, 33, 4.0).unwrap();
        let map = Heatmap::render(&Field::zeros(grid), None, [1.55, 2.5]).unwrap();
        assert_eq!((map.width, map.height), (33, 33));
        assert!(map.pixels.iter().all(|&p| p == 0 || p == RING));
        assert!(map.pixels.contains(&RING));
        let blank = Heatmap::render(&Field::zeros(grid), None, [10.0, 10.0]).unwrap();
        assert!(blank.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn pgm_round_trip_and_orientation() {
        let grid = GridSpec::new(2, 17, 2.0).unwrap();
        // Increasing in x1 only.
        let u = Field::from_fn(grid, |x| x[0] + 3.0).unwrap();
        let map = Heatmap::render(&u, None, [50.0, 60.0]).unwrap();
        let (w, h, px) = parse_pgm(&map.to_pgm()).unwrap();
        assert_eq!((w, h), (17, 17));
        assert_eq!(px, map.pixels);
        let row = &px[8 * 17..9 * 17];
        assert_eq!(row[0], 0);
        assert!(row[1..16].windows(2).all(|p| p[0] <= p[1]));
        assert_eq!(row[15], 254);
        assert_eq!(map.scale.min, 0.0);
    }

    #[test]
    fn three_dimensional_fields_need_a_slice() {
        let grid = GridSpec::new(3, 9, 2.0).unwrap();
        let u = Field::from_fn(grid, |x| 1.0 - 0.1 * x[2]).unwrap();
        assert!(matches!(Heatmap::render(&u, None, [1.0, 1.5]), Err(HeatmapError::NeedsSlice(3))));
        assert!(matches!(Heatmap::render(&u, Some(9), [1.0, 1.5]), Err(HeatmapError::SliceOutOfRange { .. })));
        let map = Heatmap::render(&u, Some(4), [1.0, 1.5]).unwrap();
        assert_eq!(map.pixels.len(), 81);
        assert_eq!(map.scale.slice, Some(4));
    }
}
