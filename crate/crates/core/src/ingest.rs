//! Labeled-sample ingestion: beam-to-sample conversion with free-space
//! sampling, scan partitioning, text formats, and a synthetic indoor
//! environment with an exact occupancy oracle.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::features::Point2;
use crate::model::LabeledSample;

/// Samples gathered in one sweep; `scan_id` doubles as the timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub scan_id: u64,
    pub samples: Vec<LabeledSample>,
    mean_point: Point2,
}

impl ScanRecord {
    pub fn new(scan_id: u64, samples: Vec<LabeledSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument(format!("scan {scan_id} has no samples")));
        }
        let n = samples.len() as f64;
        let (sx, sy) = samples
            .iter()
            .fold((0.0, 0.0), |(sx, sy), s| (sx + s.point.x, sy + s.point.y));
        Ok(Self {
            scan_id,
            samples,
            mean_point: Point2::new(sx / n, sy / n),
        })
    }

    /// Centroid of the sample coordinates.
    pub fn mean_point(&self) -> Point2 {
        self.mean_point
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    /// Relative to the robot heading, radians.
    pub bearing: f64,
    pub range: f64,
    /// The beam returned no hit within the sensor's range.
    pub max_range: bool,
}

/// One laser sweep from a known pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamRecord {
    pub pose: Pose,
    pub beams: Vec<Beam>,
}

/// Converts a sweep into labeled samples.
///
/// A beam that hit something yields one occupied sample at its endpoint and
/// free samples every `free_spacing` meters short of it. A max-range beam
/// yields free samples along its full length and no occupied sample.
pub fn beams_to_samples(b: &BeamRecord, free_spacing: f64) -> Result<Vec<LabeledSample>> {
    if !(free_spacing.is_finite() && free_spacing > 0.0) {
        return Err(config_err(format!("free_spacing must be > 0, got {free_spacing}")));
    }
    let mut out = Vec::new();
    for beam in &b.beams {
        if !(beam.range.is_finite() && beam.range >= 0.0 && beam.bearing.is_finite()) {
            return Err(Error::Argument(format!("invalid beam {beam:?}")));
        }
        let angle = b.pose.theta + beam.bearing;
        let (dx, dy) = (angle.cos(), angle.sin());
        let at = |d: f64| Point2::new(b.pose.x + d * dx, b.pose.y + d * dy);
        let tol = 1e-9 * beam.range.max(1.0);
        let mut k = 1u32;
        loop {
            let d = f64::from(k) * free_spacing;
            let inside = if beam.max_range {
                d <= beam.range + tol
            } else {
                d < beam.range - tol
            };
            if !inside {
                break;
            }
            let p = at(d);
            out.push(LabeledSample {
                point: p,
                occupied: false,
            });
            k += 1;
        }
        if !beam.max_range {
            out.push(LabeledSample {
                point: at(beam.range),
                occupied: true,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrant {
    UpperLeft,
    UpperRight,
    LowerLeft,
    LowerRight,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [
        Quadrant::UpperLeft,
        Quadrant::UpperRight,
        Quadrant::LowerLeft,
        Quadrant::LowerRight,
    ];

    /// Points on an axis through `center` go to the positive side.
    pub fn of(p: &Point2, center: &Point2) -> Self {
        match (p.x >= center.x, p.y >= center.y) {
            (false, true) => Quadrant::UpperLeft,
            (true, true) => Quadrant::UpperRight,
            (false, false) => Quadrant::LowerLeft,
            (true, false) => Quadrant::LowerRight,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Splits scans by the quadrant of their mean point, in the order of
/// [`Quadrant::ALL`]. Scans keep their relative order.
pub fn partition_by_quadrant(scans: &[ScanRecord], center: Point2) -> [Vec<ScanRecord>; 4] {
    let mut out: [Vec<ScanRecord>; 4] = Default::default();
    for s in scans {
        out[Quadrant::of(&s.mean_point, &center).index()].push(s.clone());
    }
    out
}

/// Interleaved scan-level `k`-fold split: scan `i` (in time order) is held
/// out in fold `i % k`. Returns `(train, test)`.
pub fn split_scans(scans: &[ScanRecord], k: usize, fold: usize) -> Result<(Vec<ScanRecord>, Vec<ScanRecord>)> {
    if k < 2 || fold >= k {
        return Err(config_err(format!("invalid fold {fold} of {k}")));
    }
    let mut sorted: Vec<&ScanRecord> = scans.iter().collect();
    sorted.sort_by_key(|s| s.scan_id);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, s) in sorted.into_iter().enumerate() {
        if i % k == fold {
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((train, test))
}

/// Flattens scans to samples, in scan order.
pub fn flatten(scans: &[ScanRecord]) -> Vec<LabeledSample> {
    scans.iter().flat_map(|s| s.samples.iter().copied()).collect()
}

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    scan_id: u64,
    x: f64,
    y: f64,
    label: u8,
}

/// Reads `scan_id,x,y,label` rows; scans come back ordered by id.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<ScanRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["scan_id", "x", "y", "label"] {
        return Err(Error::Format(format!(
            "expected header scan_id,x,y,label, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut groups: BTreeMap<u64, Vec<LabeledSample>> = BTreeMap::new();
    for (line, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        if row.label > 1 {
            return Err(Error::Format(format!("row {}: label must be 0 or 1", line + 2)));
        }
        if !(row.x.is_finite() && row.y.is_finite()) {
            return Err(Error::Format(format!("row {}: non-finite coordinate", line + 2)));
        }
        groups
            .entry(row.scan_id)
            .or_default()
            .push(LabeledSample::new(row.x, row.y, row.label == 1));
    }
    groups
        .into_iter()
        .map(|(id, samples)| ScanRecord::new(id, samples))
        .collect()
}

pub fn write_samples_csv<W: Write>(mut w: W, scans: &[ScanRecord]) -> Result<()> {
    writeln!(w, "scan_id,x,y,label")?;
    for s in scans {
        for p in &s.samples {
            writeln!(w, "{},{},{},{}", s.scan_id, sig9(p.point.x), sig9(p.point.y), p.label())?;
        }
    }
    Ok(())
}

/// Formats with 9 significant digits, trailing zeros trimmed.
fn sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    // the exponent after rounding to 9 digits fixes the decimal count
    let sci = format!("{v:.8e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Parses `POSE x y theta` / `BEAM bearing range maxflag` lines. Blank lines
/// and lines starting with `#` are ignored.
pub fn read_beam_log<R: BufRead>(reader: R) -> Result<Vec<BeamRecord>> {
    let mut out: Vec<BeamRecord> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Format(format!("beam log line {}: {msg}", n + 1));
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap_or_default();
        let nums: Vec<&str> = parts.collect();
        if nums.len() != 3 {
            return Err(bad("expected three fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
        match tag {
            "POSE" => out.push(BeamRecord {
                pose: Pose {
                    x: num(nums[0])?,
                    y: num(nums[1])?,
                    theta: num(nums[2])?,
                },
                beams: Vec::new(),
            }),
            "BEAM" => {
                let rec = out.last_mut().ok_or_else(|| bad("BEAM before any POSE"))?;
                let max_range = match nums[2] {
                    "0" => false,
                    "1" => true,
                    other => return Err(bad(&format!("max flag must be 0 or 1, got {other}"))),
                };
                let beam = Beam {
                    bearing: num(nums[0])?,
                    range: num(nums[1])?,
                    max_range,
                };
                if !(beam.range.is_finite() && beam.range >= 0.0) {
                    return Err(bad("range must be finite and >= 0"));
                }
                rec.beams.push(beam);
            }
            other => return Err(bad(&format!("unknown record {other:?}"))),
        }
    }
    Ok(out)
}

pub fn write_beam_log<W: Write>(mut w: W, records: &[BeamRecord]) -> Result<()> {
    for r in records {
        writeln!(w, "POSE {:?} {:?} {:?}", r.pose.x, r.pose.y, r.pose.theta)?;
        for b in &r.beams {
            writeln!(w, "BEAM {:?} {:?} {}", b.bearing, b.range, u8::from(b.max_range))?;
        }
    }
    Ok(())
}

/// Converts sweeps to scans, one scan per sweep, ids in sweep order.
pub fn scans_from_beams(records: &[BeamRecord], free_spacing: f64) -> Result<Vec<ScanRecord>> {
    records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match beams_to_samples(r, free_spacing) {
            Ok(s) if s.is_empty() => None,
            Ok(s) => Some(ScanRecord::new(i as u64, s)),
            Err(e) => Some(Err(e)),
        })
        .collect()
}

/// Axis-aligned solid block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }

    /// Entry distance of the ray `origin + t * dir`, `t >= 0` (slab method).
    fn ray_entry(&self, origin: &Point2, dir: (f64, f64)) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for (o, d, lo, hi) in [
            (origin.x, dir.0, self.min[0], self.max[0]),
            (origin.y, dir.1, self.min[1], self.max[1]),
        ] {
            if d.abs() < 1e-300 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let (a, b) = ((lo - o) / d, (hi - o) / d);
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                t0 = t0.max(a);
                t1 = t1.min(b);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some(t0)
    }
}

/// Laser fan configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamFan {
    /// Field of view in radians, centered on the heading.
    pub fov: f64,
    pub max_range: f64,
}

/// Synthetic world: solid wall blocks, a waypoint path, and a sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub walls: Vec<Rect>,
    pub path: Vec<[f64; 2]>,
    /// Number of sweeps spread evenly along the path.
    pub scans: usize,
    pub fan: BeamFan,
}

impl Layout {
    /// 16 m x 16 m floor split into four 8 m rooms joined by doorways, one
    /// obstacle per room, with a loop path through all rooms.
    pub fn four_rooms() -> Self {
        let r = |x0: f64, y0: f64, x1: f64, y1: f64| Rect {
            min: [x0, y0],
            max: [x1, y1],
        };
        let walls = vec![
            // outer shell
            r(0.0, 0.0, 16.0, 0.2),
            r(0.0, 15.8, 16.0, 16.0),
            r(0.0, 0.0, 0.2, 16.0),
            r(15.8, 0.0, 16.0, 16.0),
            // vertical divider with doors at y 3..4.5 and 11.5..13
            r(7.9, 0.2, 8.1, 3.0),
            r(7.9, 4.5, 8.1, 11.5),
            r(7.9, 13.0, 8.1, 15.8),
            // horizontal divider with doors at x 3..4.5 and 11.5..13
            r(0.2, 7.9, 3.0, 8.1),
            r(4.5, 7.9, 11.5, 8.1),
            r(13.0, 7.9, 15.8, 8.1),
            // furniture
            r(1.5, 5.5, 2.5, 6.5),
            r(13.0, 1.5, 14.0, 2.5),
            r(13.5, 9.5, 14.5, 10.5),
            r(5.0, 13.0, 6.0, 14.0),
        ];
        let path = vec![
            [4.0, 4.0],
            [8.0, 3.75],
            [12.0, 4.0],
            [12.25, 8.0],
            [12.0, 12.0],
            [8.0, 12.25],
            [4.0, 12.0],
            [3.75, 8.0],
            [4.0, 5.0],
        ];
        Self {
            walls,
            path,
            scans: 34,
            fan: BeamFan {
                fov: std::f64::consts::TAU,
                max_range: 6.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.walls.is_empty() {
            return Err(config_err("layout has no walls"));
        }
        for w in &self.walls {
            let finite = w.min.iter().chain(&w.max).all(|v| v.is_finite());
            if !finite || w.max[0] <= w.min[0] || w.max[1] <= w.min[1] {
                return Err(config_err(format!("degenerate wall {w:?}")));
            }
        }
        if self.path.is_empty() {
            return Err(config_err("layout path is empty"));
        }
        if self.scans == 0 {
            return Err(config_err("layout needs at least one scan"));
        }
        if !(self.fan.fov > 0.0 && self.fan.fov <= std::f64::consts::TAU + 1e-12) {
            return Err(config_err("fan fov must be in (0, 2pi]"));
        }
        if !(self.fan.max_range.is_finite() && self.fan.max_range > 0.0) {
            return Err(config_err("fan max_range must be > 0"));
        }
        let truth = GroundTruth {
            walls: self.walls.clone(),
        };
        if let Some(p) = self.path.iter().find(|p| truth.is_occupied(&Point2::new(p[0], p[1]))) {
            return Err(config_err(format!("path waypoint {p:?} lies inside a wall")));
        }
        Ok(())
    }

    /// Bounding box of all walls as `(min, max)`.
    pub fn extent(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for w in &self.walls {
            lo.x = lo.x.min(w.min[0]);
            lo.y = lo.y.min(w.min[1]);
            hi.x = hi.x.max(w.max[0]);
            hi.y = hi.y.max(w.max[1]);
        }
        (lo, hi)
    }

    /// Evenly spaced poses along the path, headed along the direction of travel.
    fn poses(&self) -> Vec<Pose> {
        let pts: Vec<Point2> = self.path.iter().map(|p| Point2::new(p[0], p[1])).collect();
        let seg_len: Vec<f64> = pts.windows(2).map(|w| w[0].dist_sq(&w[1]).sqrt()).collect();
        let total: f64 = seg_len.iter().sum();
        let n = self.scans;
        (0..n)
            .map(|k| {
                if pts.len() == 1 || total == 0.0 {
                    return Pose {
                        x: pts[0].x,
                        y: pts[0].y,
                        theta: 0.0,
                    };
                }
                let mut s = if n == 1 { 0.0 } else { total * k as f64 / (n - 1) as f64 };
                let mut i = 0;
                while i + 1 < seg_len.len() && s > seg_len[i] {
                    s -= seg_len[i];
                    i += 1;
                }
                let (a, b) = (pts[i], pts[i + 1]);
                let f = if seg_len[i] > 0.0 {
                    (s / seg_len[i]).min(1.0)
                } else {
                    0.0
                };
                Pose {
                    x: a.x + f * (b.x - a.x),
                    y: a.y + f * (b.y - a.y),
                    theta: (b.y - a.y).atan2(b.x - a.x),
                }
            })
            .collect()
    }
}

/// Exact occupancy oracle for a layout: a point is occupied iff it lies in
/// (or on the boundary of) a wall block.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    walls: Vec<Rect>,
}

impl GroundTruth {
    pub fn is_occupied(&self, p: &Point2) -> bool {
        self.walls.iter().any(|w| w.contains(p))
    }

    /// Distance to the first wall along a ray, if any.
    pub fn cast(&self, origin: &Point2, angle: f64) -> Option<f64> {
        let dir = (angle.cos(), angle.sin());
        self.walls
            .iter()
            .filter_map(|w| w.ray_entry(origin, dir))
            .min_by(f64::total_cmp)
    }
}

/// Simulated sweeps plus the oracle that generated them.
#[derive(Debug, Clone)]
pub struct SyntheticEnvironment {
    pub layout: Layout,
    pub sweeps: Vec<BeamRecord>,
    pub ground_truth: GroundTruth,
}

/// Simulates `layout.scans` sweeps of `beam_count` beams each.
///
/// Bearings are evenly spaced over the fan with a random per-sweep offset;
/// ranges get zero-mean Gaussian noise of `noise_sd`. All randomness comes
/// from `seed`.
pub fn synth_environment(layout: &Layout, beam_count: usize, noise_sd: f64, seed: u64) -> Result<SyntheticEnvironment> {
    layout.validate()?;
    if beam_count == 0 {
        return Err(config_err("beam_count must be >= 1"));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(config_err("noise_sd must be finite and >= 0"));
    }
    let truth = GroundTruth {
        walls: layout.walls.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| config_err(e.to_string()))?;
    let fan = layout.fan;
    let full_circle = (fan.fov - std::f64::consts::TAU).abs() < 1e-9;
    let step = if full_circle || beam_count == 1 {
        fan.fov / beam_count as f64
    } else {
        fan.fov / (beam_count - 1) as f64
    };
    let sweeps = layout
        .poses()
        .into_iter()
        .map(|pose| {
            let offset: f64 = if full_circle { rng.random::<f64>() * step } else { 0.0 };
            let origin = Point2::new(pose.x, pose.y);
            let beams = (0..beam_count)
                .map(|k| {
                    let bearing = if full_circle {
                        offset + k as f64 * step - std::f64::consts::PI
                    } else if beam_count == 1 {
                        0.0
                    } else {
                        -fan.fov / 2.0 + k as f64 * step
                    };
                    let jitter = if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    match truth.cast(&origin, pose.theta + bearing) {
                        Some(t) if t + jitter <= fan.max_range => Beam {
                            bearing,
                            range: (t + jitter).max(0.0),
                            max_range: false,
                        },
                        _ => Beam {
                            bearing,
                            range: fan.max_range,
                            max_range: true,
                        },
                    }
                })
                .collect();
            BeamRecord { pose, beams }
        })
        .collect();
    Ok(SyntheticEnvironment {
        layout: layout.clone(),
        sweeps,
        ground_truth: truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn sweep(theta: f64, beams: Vec<Beam>) -> BeamRecord {
        BeamRecord {
            pose: Pose { x: 0.0, y: 0.0, theta },
            beams,
        }
    }

    #[test]
    fn hit_beam_sampling() {
        let r = sweep(
            0.0,
            vec![Beam {
                bearing: 0.0,
                range: 1.0,
                max_range: false,
            }],
        );
        let s = beams_to_samples(&r, 0.5).unwrap();
        assert_eq!(
            s,
            vec![LabeledSample::new(0.5, 0.0, false), LabeledSample::new(1.0, 0.0, true)]
        );
    }

    #[test]
    fn max_range_beam_sampling() {
        let r = sweep(
            0.0,
            vec![Beam {
                bearing: 0.0,
                range: 2.0,
                max_range: true,
            }],
        );
        let s = beams_to_samples(&r, 1.0).unwrap();
        assert_eq!(
            s,
            vec![LabeledSample::new(1.0, 0.0, false), LabeledSample::new(2.0, 0.0, false)]
        );
    }

    #[test]
    fn rotated_endpoint() {
        let r = sweep(
            FRAC_PI_2,
            vec![Beam {
                bearing: 0.0,
                range: 1.0,
                max_range: false,
            }],
        );
        let s = beams_to_samples(&r, 5.0).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].occupied);
        assert!(s[0].point.x.abs() < 1e-15 && (s[0].point.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_length_beam_is_endpoint_only() {
        let r = sweep(
            0.0,
            vec![Beam {
                bearing: 0.3,
                range: 0.0,
                max_range: false,
            }],
        );
        assert_eq!(
            beams_to_samples(&r, 0.3).unwrap(),
            vec![LabeledSample::new(0.0, 0.0, true)]
        );
        assert!(beams_to_samples(&r, 0.0).is_err());
    }

    fn scan_at(id: u64, x: f64, y: f64) -> ScanRecord {
        ScanRecord::new(id, vec![LabeledSample::new(x, y, true)]).unwrap()
    }

    #[test]
    fn quadrant_assignment() {
        let c = Point2::new(0.0, 0.0);
        assert_eq!(Quadrant::of(&Point2::new(1.0, 1.0), &c), Quadrant::UpperRight);
        assert_eq!(Quadrant::of(&Point2::new(-1.0, 1.0), &c), Quadrant::UpperLeft);
        assert_eq!(Quadrant::of(&Point2::new(0.0, 2.0), &c), Quadrant::UpperRight);
        assert_eq!(Quadrant::of(&Point2::new(-1.0, -1.0), &c), Quadrant::LowerLeft);
        assert_eq!(Quadrant::of(&Point2::new(1.0, -1.0), &c), Quadrant::LowerRight);
        let scans = vec![scan_at(0, 1.0, 1.0), scan_at(1, -1.0, 1.0), scan_at(2, 0.0, 2.0)];
        let parts = partition_by_quadrant(&scans, c);
        assert_eq!(parts[Quadrant::UpperRight.index()].len(), 2);
        assert_eq!(parts[Quadrant::UpperLeft.index()].len(), 1);
    }

    #[test]
    fn scan_centroid() {
        let s = ScanRecord::new(
            3,
            vec![LabeledSample::new(0.0, 0.0, true), LabeledSample::new(2.0, 4.0, false)],
        )
        .unwrap();
        assert_eq!(s.mean_point(), Point2::new(1.0, 2.0));
        assert!(ScanRecord::new(1, vec![]).is_err());
    }

    #[test]
    fn split_is_interleaved() {
        let scans: Vec<_> = (0..20).map(|i| scan_at(i, 0.0, 0.0)).collect();
        let (train, test) = split_scans(&scans, 10, 3).unwrap();
        assert_eq!(train.len(), 18);
        assert_eq!(test.iter().map(|s| s.scan_id).collect::<Vec<_>>(), vec![3, 13]);
        assert!(split_scans(&scans, 1, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let scans = vec![
            ScanRecord::new(
                2,
                vec![
                    LabeledSample::new(1.0 / 3.0, -2.5, true),
                    LabeledSample::new(12_345.678_912_3, 1e-5, false),
                ],
            )
            .unwrap(),
            scan_at(7, 0.0, 0.1),
        ];
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &scans).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("scan_id,x,y,label\n2,0.333333333,-2.5,1\n2,12345.6789,0.00001,0\n"));
        let back = read_samples_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].samples[0].point.x, 0.333_333_333);
        assert_eq!(back[1].scan_id, 7);
        assert!(read_samples_csv(&b"a,b\n1,2\n"[..]).is_err());
        assert!(read_samples_csv(&b"scan_id,x,y,label\n1,0,0,3\n"[..]).is_err());
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(sig9(9.999_999_999_6), "10");
        assert_eq!(sig9(-0.000_123_456_789_1), "-0.000123456789");
        assert_eq!(sig9(123_456_789_123.0), "123456789123");
    }

    #[test]
    fn beam_log_round_trip() {
        let recs = vec![sweep(
            0.25,
            vec![
                Beam {
                    bearing: -0.1,
                    range: 2.5,
                    max_range: false,
                },
                Beam {
                    bearing: 0.1,
                    range: 6.0,
                    max_range: true,
                },
            ],
        )];
        let mut buf = Vec::new();
        write_beam_log(&mut buf, &recs).unwrap();
        assert_eq!(read_beam_log(&buf[..]).unwrap(), recs);
        assert!(read_beam_log(&b"BEAM 0 1 0\n"[..]).is_err());
        assert!(read_beam_log(&b"POSE 0 0 0\nBEAM 0 1 2\n"[..]).is_err());
    }

    fn square_room() -> Layout {
        let r = |x0: f64, y0: f64, x1: f64, y1: f64| Rect {
            min: [x0, y0],
            max: [x1, y1],
        };
        Layout {
            walls: vec![
                r(0.0, 0.0, 4.0, 0.2),
                r(0.0, 3.8, 4.0, 4.0),
                r(0.0, 0.0, 0.2, 4.0),
                r(3.8, 0.0, 4.0, 4.0),
            ],
            path: vec![[2.0, 2.0]],
            scans: 1,
            fan: BeamFan {
                fov: std::f64::consts::TAU,
                max_range: 10.0,
            },
        }
    }

    #[test]
    fn noiseless_endpoints_lie_on_walls() {
        let env = synth_environment(&square_room(), 64, 0.0, 1).unwrap();
        let samples = beams_to_samples(&env.sweeps[0], 0.3).unwrap();
        let mut hits = 0;
        for s in samples.iter().filter(|s| s.occupied) {
            hits += 1;
            let p = s.point;
            let d = [
                (p.x - 0.2).abs(),
                (p.x - 3.8).abs(),
                (p.y - 0.2).abs(),
                (p.y - 3.8).abs(),
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9, "{p:?}");
        }
        assert_eq!(hits, 64);
        assert!(samples
            .iter()
            .filter(|s| !s.occupied)
            .all(|s| !env.ground_truth.is_occupied(&s.point)));
    }

    #[test]
    fn synthesis_is_seeded() {
        let layout = Layout::four_rooms();
        let a = synth_environment(&layout, 12, 0.02, 9).unwrap();
        let b = synth_environment(&layout, 12, 0.02, 9).unwrap();
        let c = synth_environment(&layout, 12, 0.02, 10).unwrap();
        assert_eq!(a.sweeps, b.sweeps);
        assert_ne!(a.sweeps, c.sweeps);
    }

    #[test]
    fn oracle_and_degenerate_layouts() {
        let env = synth_environment(&square_room(), 4, 0.0, 0).unwrap();
        assert!(!env.ground_truth.is_occupied(&Point2::new(2.0, 2.0)));
        assert!(env.ground_truth.is_occupied(&Point2::new(0.1, 2.0)));
        let mut bad = square_room();
        bad.walls.push(Rect {
            min: [1.0, 1.0],
            max: [1.0, 2.0],
        });
        assert!(synth_environment(&bad, 4, 0.0, 0).is_err());
        let mut inside = square_room();
        inside.path = vec![[0.1, 0.1]];
        assert!(synth_environment(&inside, 4, 0.0, 0).is_err());
        assert!(Layout::four_rooms().validate().is_ok());
    }
}
