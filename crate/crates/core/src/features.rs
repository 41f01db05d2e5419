//! Inducing-point basis and squared-exponential ("hinged") feature projection.
//!
//! Every query coordinate is mapped to a dense vector whose entry `i` is
//! `exp(-gamma * |p - x_i|^2)` for inducing point `x_i`, optionally followed
//! by a constant bias entry.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, Result};

/// A coordinate in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dist_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Immutable inducing-point layout plus kernel width.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis {
    points: Vec<Point2>,
    gamma: f64,
    include_bias: bool,
    fingerprint: u64,
}

impl FeatureBasis {
    /// Builds a basis from explicit inducing points.
    pub fn new(points: Vec<Point2>, gamma: f64, include_bias: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(config_err("basis needs at least one inducing point"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(config_err(format!("gamma must be finite and > 0, got {gamma}")));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(config_err(format!("non-finite inducing point {p:?}")));
        }
        let mut sorted: Vec<(u64, u64)> = points.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("duplicate inducing points"));
        }
        let fingerprint = fingerprint_of(&points, gamma, include_bias);
        Ok(Self {
            points,
            gamma,
            include_bias,
            fingerprint,
        })
    }

    pub fn inducing_points(&self) -> &[Point2] {
        &self.points
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn include_bias(&self) -> bool {
        self.include_bias
    }

    /// Feature dimension `m`.
    pub fn dim(&self) -> usize {
        self.points.len() + usize::from(self.include_bias)
    }

    /// Hash binding posteriors to this exact basis.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Axis-aligned bounding box of the inducing points as `(min, max)`.
    pub fn extent(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Single feature value for inducing point `i` (or the bias slot).
    #[inline]
    pub fn feature(&self, i: usize, p: &Point2) -> f64 {
        match self.points.get(i) {
            Some(c) => (-self.gamma * p.dist_sq(c)).exp(),
            None => 1.0,
        }
    }

    /// Writes the feature vector of `p` into `out` (length `dim()`).
    pub fn project_into(&self, p: &Point2, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        for (o, c) in out.iter_mut().zip(&self.points) {
            *o = (-self.gamma * p.dist_sq(c)).exp();
        }
        if self.include_bias {
            out[self.points.len()] = 1.0;
        }
    }

    pub fn project(&self, p: &Point2) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.project_into(p, &mut out);
        out
    }
}

/// Regular lattice of inducing points covering `[xmin, xmax] x [ymin, ymax]`,
/// row-major with x varying fastest.
///
/// Both boundary rows and columns are included; when the extent is not a
/// whole multiple of `spacing` the last row/column is placed on the boundary.
pub fn make_grid_basis(
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
    spacing: f64,
    gamma: f64,
    include_bias: bool,
) -> Result<FeatureBasis> {
    if ![xmin, xmax, ymin, ymax, spacing].iter().all(|v| v.is_finite()) {
        return Err(config_err("lattice bounds and spacing must be finite"));
    }
    if xmax <= xmin || ymax <= ymin {
        return Err(config_err(format!(
            "empty lattice extent [{xmin},{xmax}]x[{ymin},{ymax}]"
        )));
    }
    if spacing <= 0.0 {
        return Err(config_err(format!("spacing must be > 0, got {spacing}")));
    }
    if spacing > xmax - xmin || spacing > ymax - ymin {
        return Err(config_err(format!(
            "spacing {spacing} must not exceed the lattice extent"
        )));
    }
    let xs = axis_ticks(xmin, xmax, spacing);
    let ys = axis_ticks(ymin, ymax, spacing);
    let points = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| Point2::new(x, y)))
        .collect();
    FeatureBasis::new(points, gamma, include_bias)
}

fn axis_ticks(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let span = (hi - lo) / spacing;
    // tolerate representation error so 0..1 step 0.1 yields 11 ticks
    let steps = (span - 1e-9).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|k| if k == steps { hi } else { lo + k as f64 * spacing })
        .collect()
}

fn fingerprint_of(points: &[Point2], gamma: f64, include_bias: bool) -> u64 {
    let mut h = Sha256::new();
    h.update(gamma.to_le_bytes());
    h.update([u8::from(include_bias)]);
    for p in points {
        h.update(p.x.to_le_bytes());
        h.update(p.y.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}
