//! Fixed-resolution log-odds occupancy grid, used as the discrete baseline.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::features::Point2;
use crate::model::{sigmoid, ByteReader, LabeledSample};

/// Saturation bound on stored log-odds.
pub const LOGODDS_CLAMP: f64 = 30.0;

pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Per-cell storage used when writing a grid file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellEncoding {
    /// Raw log-odds, 8 bytes per cell.
    F64,
    /// Probability quantized linearly to 0..=255, 1 byte per cell.
    U8,
}

impl CellEncoding {
    pub fn cell_bytes(self) -> usize {
        match self {
            CellEncoding::F64 => 8,
            CellEncoding::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    origin: Point2,
    resolution: f64,
    width: usize,
    height: usize,
    logodds: Vec<f64>,
    prior_p: f64,
}

impl GridMap {
    pub fn new(origin: Point2, resolution: f64, width: usize, height: usize, prior_p: f64) -> Result<Self> {
        if !origin.is_finite() {
            return Err(config_err("grid origin must be finite"));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(config_err(format!("resolution must be > 0, got {resolution}")));
        }
        if width == 0 || height == 0 {
            return Err(config_err(format!("empty {width}x{height} grid")));
        }
        if !(prior_p > 0.0 && prior_p < 1.0) {
            return Err(config_err(format!("prior_p must be in (0,1), got {prior_p}")));
        }
        let len = width
            .checked_mul(height)
            .filter(|&n| u32::try_from(width).is_ok() && u32::try_from(height).is_ok() && n < (1 << 34))
            .ok_or_else(|| config_err("grid too large"))?;
        Ok(Self {
            origin,
            resolution,
            width,
            height,
            logodds: vec![logit(prior_p); len],
            prior_p,
        })
    }

    /// Smallest grid with cells of `resolution` covering the rectangle.
    pub fn covering(xmin: f64, xmax: f64, ymin: f64, ymax: f64, resolution: f64) -> Result<Self> {
        if !(xmax > xmin && ymax > ymin) {
            return Err(config_err("grid extent must have positive area"));
        }
        if !resolution.is_finite() || resolution <= 0.0 {
            return Err(config_err(format!("resolution must be > 0, got {resolution}")));
        }
        let w = ((xmax - xmin) / resolution - 1e-9).ceil().max(1.0) as usize;
        let h = ((ymax - ymin) / resolution - 1e-9).ceil().max(1.0) as usize;
        Self::new(Point2::new(xmin, ymin), resolution, w, h, 0.5)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn prior_p(&self) -> f64 {
        self.prior_p
    }

    pub fn len(&self) -> usize {
        self.logodds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logodds.is_empty()
    }

    pub fn logodds(&self) -> &[f64] {
        &self.logodds
    }

    /// Cell containing `p`; points on the far boundary map to the edge cell.
    pub fn cell_index(&self, p: &Point2) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= self.width as f64 && fy <= self.height as f64) {
            return None;
        }
        let ix = (fx.floor() as usize).min(self.width - 1);
        let iy = (fy.floor() as usize).min(self.height - 1);
        Some(iy * self.width + ix)
    }

    /// Center of the cell with row-major index `cell`.
    pub fn cell_center(&self, cell: usize) -> Result<Point2> {
        if cell >= self.logodds.len() {
            return Err(Error::Index {
                index: cell,
                len: self.logodds.len(),
            });
        }
        let (ix, iy) = (cell % self.width, cell / self.width);
        Ok(Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        ))
    }

    pub fn update_cell(&mut self, cell: usize, p_inverse: f64) -> Result<()> {
        if !(p_inverse > 0.0 && p_inverse < 1.0) {
            return Err(config_err(format!(
                "inverse sensor probability {p_inverse} not in (0,1)"
            )));
        }
        let len = self.logodds.len();
        let l = self.logodds.get_mut(cell).ok_or(Error::Index { index: cell, len })?;
        *l = (*l + logit(p_inverse) - logit(self.prior_p)).clamp(-LOGODDS_CLAMP, LOGODDS_CLAMP);
        Ok(())
    }

    pub fn query_cell(&self, cell: usize) -> Result<f64> {
        self.logodds.get(cell).map(|&l| sigmoid(l)).ok_or(Error::Index {
            index: cell,
            len: self.logodds.len(),
        })
    }

    /// Occupancy probability at `p`, or the prior outside the grid.
    pub fn query_point(&self, p: &Point2) -> f64 {
        self.cell_index(p).map_or(self.prior_p, |c| sigmoid(self.logodds[c]))
    }

    /// Applies `hit_p` at occupied samples and `miss_p` at free ones.
    /// Returns the number of samples skipped for lying outside the grid.
    pub fn ingest_samples(&mut self, batch: &[LabeledSample], hit_p: f64, miss_p: f64) -> Result<usize> {
        if !(hit_p > 0.5 && hit_p < 1.0) {
            return Err(config_err(format!("hit_p must be in (0.5,1), got {hit_p}")));
        }
        if !(miss_p > 0.0 && miss_p < 0.5) {
            return Err(config_err(format!("miss_p must be in (0,0.5), got {miss_p}")));
        }
        let mut skipped = 0;
        for s in batch {
            match self.cell_index(&s.point) {
                Some(c) => self.update_cell(c, if s.occupied { hit_p } else { miss_p })?,
                None => skipped += 1,
            }
        }
        Ok(skipped)
    }

    /// Size of the grid file for the given cell encoding.
    pub fn serialized_size(&self, enc: CellEncoding) -> usize {
        GRID_HEADER_BYTES + enc.cell_bytes() * self.len()
    }

    pub fn serialize(&self, enc: CellEncoding) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_size(enc));
        out.extend_from_slice(GRID_MAGIC);
        out.extend_from_slice(&GRID_VERSION.to_le_bytes());
        out.extend_from_slice(&self.origin.x.to_le_bytes());
        out.extend_from_slice(&self.origin.y.to_le_bytes());
        out.extend_from_slice(&self.resolution.to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&self.prior_p.to_le_bytes());
        match enc {
            CellEncoding::F64 => {
                out.push(0);
                for l in &self.logodds {
                    out.extend_from_slice(&l.to_le_bytes());
                }
            }
            CellEncoding::U8 => {
                out.push(1);
                out.extend(self.logodds.iter().map(|&l| quantize(sigmoid(l))));
            }
        }
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<(Self, CellEncoding)> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != GRID_MAGIC {
            return Err(r.error_at(0, "bad magic, expected FGRD"));
        }
        let version = r.u16()?;
        if version != GRID_VERSION {
            return Err(r.error_at(4, &format!("unsupported grid version {version}")));
        }
        let origin = Point2::new(r.f64()?, r.f64()?);
        let resolution = r.f64()?;
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let prior_p = r.f64()?;
        let mut grid =
            Self::new(origin, resolution, width, height, prior_p).map_err(|e| r.error_at(6, &e.to_string()))?;
        let kind_at = r.offset();
        let enc = match r.u8()? {
            0 => CellEncoding::F64,
            1 => CellEncoding::U8,
            k => return Err(r.error_at(kind_at, &format!("unknown cell encoding {k}"))),
        };
        r.expect_remaining(enc.cell_bytes() * grid.len(), "cells")?;
        for l in grid.logodds.iter_mut() {
            *l = match enc {
                CellEncoding::F64 => r.f64()?,
                CellEncoding::U8 => dequantize_logodds(r.u8()?),
            };
        }
        if r.offset() != bytes.len() {
            return Err(r.error_at(r.offset(), "trailing bytes after cells"));
        }
        Ok((grid, enc))
    }

    /// Same grid after a round trip through the 1-byte encoding.
    pub fn quantized(&self) -> Self {
        let mut g = self.clone();
        for l in g.logodds.iter_mut() {
            *l = dequantize_logodds(quantize(sigmoid(*l)));
        }
        g
    }

    /// Binary PGM of the probability field, top row = largest y.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut rows = Vec::with_capacity(self.len());
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                rows.push(sigmoid(self.logodds[iy * self.width + ix]));
            }
        }
        pgm_bytes(self.width, self.height, &rows)
    }
}

const GRID_MAGIC: &[u8; 4] = b"FGRD";
const GRID_VERSION: u16 = 1;
/// magic, version, origin, resolution, width, height, prior_p, encoding tag.
pub const GRID_HEADER_BYTES: usize = 4 + 2 + 16 + 8 + 4 + 4 + 8 + 1;

fn quantize(p: f64) -> u8 {
    (p * 255.0).round().clamp(0.0, 255.0) as u8
}

fn dequantize_logodds(q: u8) -> f64 {
    logit(f64::from(q) / 255.0).clamp(-LOGODDS_CLAMP, LOGODDS_CLAMP)
}

/// Encodes probabilities (row-major, first row at the top) as a P5 image;
/// free space is white and occupied space black.
pub fn pgm_bytes(width: usize, height: usize, probabilities: &[f64]) -> Vec<u8> {
    debug_assert_eq!(probabilities.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(probabilities.iter().map(|&p| quantize(1.0 - p)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridMap {
        GridMap::new(Point2::new(0.0, 0.0), 0.5, 4, 2, 0.5).unwrap()
    }

    #[test]
    fn update_examples() {
        let mut g = grid();
        g.update_cell(3, 0.5).unwrap();
        assert_eq!(g.logodds()[3], 0.0);
        g.update_cell(3, 0.7).unwrap();
        assert!((g.logodds()[3] - (0.7f64 / 0.3).ln()).abs() < 1e-15);
        assert!((g.logodds()[3] - 0.847_297_860_4).abs() < 1e-9);
        g.update_cell(3, 0.3).unwrap();
        assert!(g.logodds()[3].abs() < 1e-15);
        assert!(matches!(g.update_cell(8, 0.7), Err(Error::Index { index: 8, len: 8 })));
        assert!(g.update_cell(0, 1.0).is_err());
    }

    #[test]
    fn fresh_grid_is_half_and_hits_accumulate() {
        let mut g = grid();
        for c in 0..g.len() {
            assert_eq!(g.query_cell(c).unwrap(), 0.5);
        }
        let k = 4;
        let hits = vec![LabeledSample::new(1.2, 0.3, true); k];
        assert_eq!(g.ingest_samples(&hits, 0.7, 0.3).unwrap(), 0);
        let want = sigmoid(k as f64 * (0.7f64 / 0.3).ln());
        let got = g.query_point(&Point2::new(1.2, 0.3));
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn boundary_and_outside_samples() {
        let g = grid();
        assert_eq!(g.cell_index(&Point2::new(2.0, 1.0)), Some(7));
        assert_eq!(g.cell_index(&Point2::new(0.0, 0.0)), Some(0));
        assert_eq!(g.cell_index(&Point2::new(2.0001, 0.5)), None);
        assert_eq!(g.cell_index(&Point2::new(-1e-9, 0.5)), None);
        let mut g = g;
        let n = g
            .ingest_samples(
                &[LabeledSample::new(5.0, 5.0, true), LabeledSample::new(0.1, 0.1, false)],
                0.7,
                0.3,
            )
            .unwrap();
        assert_eq!(n, 1);
        assert!(g.ingest_samples(&[], 0.5, 0.3).is_err());
        assert!(g.ingest_samples(&[], 0.7, 0.5).is_err());
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(GridMap::new(Point2::new(0.0, 0.0), 0.1, 0, 0, 0.5).is_err());
        assert!(GridMap::new(Point2::new(0.0, 0.0), 0.0, 2, 2, 0.5).is_err());
    }

    #[test]
    fn logit_sigmoid_inverse() {
        // near saturation 1 - p underflows the log-odds resolution, so the
        // round trip is checked on the probability scale
        for i in 0..=2400 {
            let l = -30.0 + i as f64 * 0.025;
            let p = sigmoid(l);
            assert!((sigmoid(logit(p)) - p).abs() <= 1e-12, "l={l}");
            if l.abs() <= 5.0 {
                assert!((logit(p) - l).abs() <= 1e-12, "l={l}");
            }
        }
    }

    #[test]
    fn file_sizes_and_round_trip() {
        let mut g = grid();
        g.update_cell(2, 0.9).unwrap();
        let f = g.serialize(CellEncoding::F64);
        let q = g.serialize(CellEncoding::U8);
        assert_eq!(f.len(), GRID_HEADER_BYTES + 8 * 8);
        assert_eq!(q.len(), GRID_HEADER_BYTES + 8);
        assert_eq!(f.len(), g.serialized_size(CellEncoding::F64));
        assert_eq!(GridMap::deserialize(&f).unwrap(), (g.clone(), CellEncoding::F64));
        let (gq, enc) = GridMap::deserialize(&q).unwrap();
        assert_eq!(enc, CellEncoding::U8);
        assert_eq!(gq, g.quantized());
        assert!((gq.query_cell(2).unwrap() - 0.9).abs() <= 0.5 / 255.0 + 1e-12);
        assert!(matches!(
            GridMap::deserialize(&q[..q.len() - 1]),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn pgm_layout() {
        let g = grid();
        let pgm = g.to_pgm();
        let header = b"P5\n4 2\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(pgm.len(), header.len() + 8);
        assert!(pgm[header.len()..].iter().all(|&v| v == 128));
    }
}
