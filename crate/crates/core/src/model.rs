//! Fast Bayesian Hilbert Map: a kernel logistic classifier whose weights carry
//! independent Gaussian posteriors, trained scan-by-scan with variational EM.
//!
//! Each weight `t` keeps `(mean_t, variance_t)`. One call to [`em_update`]
//! treats the incoming posterior as the prior for the batch and alternates
//!
//! * E-step: `1/var_t = 1/var0_t + 2 sum_n lambda(z_n) phi_nt^2`,
//!   `mean_t = var_t (mean0_t/var0_t + sum_n (y_n - 1/2) phi_nt)`
//! * M-step: `z_n^2 = sum_t phi_nt^2 (var_t + mean_t^2)`
//!
//! No step touches more than `O(m)` memory per sample, so a batch of `N`
//! samples costs `O(N m)` multiply-adds and no `m x m` matrix is ever built.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, Error, Result};
use crate::features::{FeatureBasis, Point2};

/// Training hyper-parameters; the prior is shared by every weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub prior_mean: f64,
    pub prior_variance: f64,
    pub em_iterations: u16,
    pub z_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            prior_mean: 0.0,
            prior_variance: 1e4,
            em_iterations: 3,
            z_floor: 1e-7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.prior_mean.is_finite() {
            return Err(config_err("prior_mean must be finite"));
        }
        if !(self.prior_variance.is_finite() && self.prior_variance > 0.0) {
            return Err(config_err(format!(
                "prior_variance must be finite and > 0, got {}",
                self.prior_variance
            )));
        }
        if self.em_iterations == 0 {
            return Err(config_err("em_iterations must be >= 1"));
        }
        if !(self.z_floor.is_finite() && self.z_floor > 0.0) {
            return Err(config_err("z_floor must be finite and > 0"));
        }
        Ok(())
    }
}

/// One labeled occupancy observation. `occupied == true` is label 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub point: Point2,
    pub occupied: bool,
}

impl LabeledSample {
    pub fn new(x: f64, y: f64, occupied: bool) -> Self {
        Self {
            point: Point2::new(x, y),
            occupied,
        }
    }

    pub fn label(&self) -> u8 {
        u8::from(self.occupied)
    }
}

/// Mean-field Gaussian posterior over the map weights, bound to one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPosterior {
    means: Vec<f64>,
    variances: Vec<f64>,
    fingerprint: u64,
}

impl WeightPosterior {
    /// Fresh map with every weight at the configured prior.
    pub fn new_map(basis: &FeatureBasis, cfg: &TrainConfig) -> Self {
        let m = basis.dim();
        Self {
            means: vec![cfg.prior_mean; m],
            variances: vec![cfg.prior_variance; m],
            fingerprint: basis.fingerprint(),
        }
    }

    /// Assembles a posterior from raw parts, checking the variance invariant.
    pub fn from_parts(means: Vec<f64>, variances: Vec<f64>, fingerprint: u64) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::Argument(format!(
                "{} means but {} variances",
                means.len(),
                variances.len()
            )));
        }
        if means.is_empty() {
            return Err(Error::Argument("posterior needs at least one weight".into()));
        }
        if let Some(t) = variances.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Argument(format!(
                "variance at weight {t} must be finite and > 0, got {}",
                variances[t]
            )));
        }
        if let Some(t) = means.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite mean at weight {t}")));
        }
        Ok(Self {
            means,
            variances,
            fingerprint,
        })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn basis_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Fails with a binding error unless this posterior belongs to `basis`.
    pub fn check_binding(&self, basis: &FeatureBasis) -> Result<()> {
        if self.fingerprint != basis.fingerprint() || self.dim() != basis.dim() {
            return Err(Error::Binding {
                expected: basis.fingerprint(),
                found: self.fingerprint,
            });
        }
        Ok(())
    }

    /// Stable content hash of the weights (means and variances, bitwise).
    pub fn checksum(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.fingerprint.to_le_bytes());
        for (m, v) in self.means.iter().zip(&self.variances) {
            h.update(m.to_le_bytes());
            h.update(v.to_le_bytes());
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }
}

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Coefficient of the quadratic sigmoid lower bound, `(sigmoid(z) - 1/2) / (2z)`.
pub fn lambda_fn(z: f64) -> f64 {
    lambda_with_floor(z, TrainConfig::default().z_floor)
}

/// [`lambda_fn`] with an explicit switch-over point to the series expansion.
#[inline]
pub fn lambda_with_floor(z: f64, z_floor: f64) -> f64 {
    if z.abs() <= z_floor {
        0.125 - z * z / 96.0
    } else {
        // sigmoid(z) - 1/2 == tanh(z/2)/2, without the cancellation
        (0.5 * z).tanh() / (4.0 * z)
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Runs `cfg.em_iterations` variational EM alternations on one batch, using
/// `map` as the prior, and returns the updated posterior.
///
/// The first local variables `z` come from the M-step formula evaluated at
/// `map` itself. An empty batch returns `map` unchanged.
pub fn em_update(
    map: &WeightPosterior,
    basis: &FeatureBasis,
    batch: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<WeightPosterior> {
    map.check_binding(basis)?;
    cfg.validate()?;
    if batch.is_empty() {
        return Ok(map.clone());
    }
    if let Some(s) = batch.iter().find(|s| !s.point.is_finite()) {
        return Err(Error::Argument(format!("non-finite sample {:?}", s.point)));
    }

    let m = map.dim();
    let prior_prec: Vec<f64> = map.variances.iter().map(|v| 1.0 / v).collect();
    let prior_eta: Vec<f64> = map.means.iter().zip(&prior_prec).map(|(mu, p)| mu * p).collect();

    let mut data_term = vec![CompensatedSum::default(); m];
    let mut curvature = vec![CompensatedSum::default(); m];
    let mut phi = vec![0.0; m];
    let mut means = map.means.clone();
    let mut variances = map.variances.clone();

    for iter in 0..cfg.em_iterations {
        curvature.fill(CompensatedSum::default());
        for s in batch {
            basis.project_into(&s.point, &mut phi);
            // M-step for this sample against the current posterior
            let z_sq: f64 = phi
                .iter()
                .zip(means.iter().zip(&variances))
                .map(|(f, (mu, var))| f * f * (var + mu * mu))
                .sum();
            let lam = lambda_with_floor(z_sq.sqrt(), cfg.z_floor);
            let centered = if s.occupied { 0.5 } else { -0.5 };
            for (t, f) in phi.iter().enumerate() {
                curvature[t].add(lam * f * f);
                if iter == 0 {
                    data_term[t].add(centered * f);
                }
            }
        }
        // E-step. Written as v0 / (1 + 2 v0 S) rather than 1 / (1/v0 + 2 S):
        // the denominator is >= 1, so the variance can never round upwards.
        for t in 0..m {
            let v0 = map.variances[t];
            let var = v0 / (1.0 + 2.0 * v0 * curvature[t].value());
            variances[t] = var;
            means[t] = var * (prior_eta[t] + data_term[t].value());
        }
    }

    Ok(WeightPosterior {
        means,
        variances,
        fingerprint: map.fingerprint,
    })
}

/// Moderated predictive probability of occupancy at `p`:
/// `sigmoid(a / sqrt(1 + pi v / 8))` with `a = sum mean_t phi_t` and
/// `v = sum var_t phi_t^2`.
pub fn predict(map: &WeightPosterior, basis: &FeatureBasis, p: &Point2) -> f64 {
    let (a, v) = activation(map, basis, p);
    moderated(a, v)
}

/// Mean and variance of the latent activation at `p`.
pub fn activation(map: &WeightPosterior, basis: &FeatureBasis, p: &Point2) -> (f64, f64) {
    debug_assert_eq!(map.dim(), basis.dim());
    let mut a = 0.0;
    let mut v = 0.0;
    for t in 0..map.dim() {
        let f = basis.feature(t, p);
        a += map.means[t] * f;
        v += map.variances[t] * f * f;
    }
    (a, v)
}

/// Probit-moderated sigmoid, clamped to the open unit interval.
pub fn moderated(a: f64, v: f64) -> f64 {
    let kappa = if v.is_infinite() {
        0.0
    } else {
        1.0 / (1.0 + PI * v / 8.0).sqrt()
    };
    sigmoid(a * kappa).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Convenience: predictions for many points.
pub fn predict_many(map: &WeightPosterior, basis: &FeatureBasis, points: &[Point2]) -> Vec<f64> {
    points.iter().map(|p| predict(map, basis, p)).collect()
}

// Model file layout (little-endian):
//   "FBHM" | version u16
//   count u32 | gamma f64 | bias u8 | count x (x f64, y f64)
//   prior_mean f64 | prior_variance f64 | em_iterations u16
//   m x (mean f64, variance f64)

pub const MODEL_MAGIC: &[u8; 4] = b"FBHM";
pub const MODEL_VERSION: u16 = 1;
const HEADER_BYTES: usize = 4 + 2;
const CONFIG_BYTES: usize = 8 + 8 + 2;

/// Exact size in bytes of the serialized model for `basis`.
pub fn serialized_size(basis: &FeatureBasis) -> usize {
    let n = basis.inducing_points().len();
    HEADER_BYTES + (4 + 8 + 1 + 16 * n) + CONFIG_BYTES + 16 * basis.dim()
}

pub fn serialize(map: &WeightPosterior, basis: &FeatureBasis, cfg: &TrainConfig) -> Result<Vec<u8>> {
    map.check_binding(basis)?;
    cfg.validate()?;
    let pts = basis.inducing_points();
    if pts.is_empty() {
        return Err(Error::Argument("cannot serialize an empty basis".into()));
    }
    let count = u32::try_from(pts.len()).map_err(|_| Error::Argument("too many inducing points".into()))?;
    let mut out = Vec::with_capacity(serialized_size(basis));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&basis.gamma().to_le_bytes());
    out.push(u8::from(basis.include_bias()));
    for p in pts {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
    }
    out.extend_from_slice(&cfg.prior_mean.to_le_bytes());
    out.extend_from_slice(&cfg.prior_variance.to_le_bytes());
    out.extend_from_slice(&cfg.em_iterations.to_le_bytes());
    for (m, v) in map.means.iter().zip(&map.variances) {
        out.extend_from_slice(&m.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    debug_assert_eq!(out.len(), serialized_size(basis));
    Ok(out)
}

/// Parses a model file. `z_floor` is not stored and comes back at its default.
pub fn deserialize(bytes: &[u8]) -> Result<(WeightPosterior, FeatureBasis, TrainConfig)> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4)?;
    if magic != MODEL_MAGIC {
        return Err(r.error_at(0, "bad magic, expected FBHM"));
    }
    let version = r.u16()?;
    if version != MODEL_VERSION {
        return Err(r.error_at(4, &format!("unsupported model version {version}")));
    }
    let count_at = r.offset();
    let count = r.u32()? as usize;
    if count == 0 {
        return Err(r.error_at(count_at, "basis has no inducing points"));
    }
    let gamma = r.f64()?;
    let bias_at = r.offset();
    let include_bias = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(r.error_at(bias_at, &format!("bias flag must be 0 or 1, got {b}"))),
    };
    r.expect_remaining(16 * count, "inducing points")?;
    let points = (0..count)
        .map(|_| Ok(Point2::new(r.f64()?, r.f64()?)))
        .collect::<Result<Vec<_>>>()?;
    let basis = FeatureBasis::new(points, gamma, include_bias).map_err(|e| r.error_at(count_at, &e.to_string()))?;
    let cfg_at = r.offset();
    let cfg = TrainConfig {
        prior_mean: r.f64()?,
        prior_variance: r.f64()?,
        em_iterations: r.u16()?,
        ..TrainConfig::default()
    };
    cfg.validate().map_err(|e| r.error_at(cfg_at, &e.to_string()))?;
    let m = basis.dim();
    let weights_at = r.offset();
    r.expect_remaining(16 * m, "weights")?;
    let mut means = Vec::with_capacity(m);
    let mut variances = Vec::with_capacity(m);
    for _ in 0..m {
        means.push(r.f64()?);
        variances.push(r.f64()?);
    }
    if r.offset() != bytes.len() {
        return Err(r.error_at(r.offset(), "trailing bytes after weights block"));
    }
    let map = WeightPosterior::from_parts(means, variances, basis.fingerprint())
        .map_err(|e| r.error_at(weights_at, &e.to_string()))?;
    Ok((map, basis, cfg))
}

/// Little-endian cursor that reports the failing byte offset.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.pos
    }

    pub(crate) fn error_at(&self, offset: usize, msg: &str) -> Error {
        Error::Parse {
            offset,
            message: msg.to_string(),
        }
    }

    pub(crate) fn expect_remaining(&self, n: usize, what: &str) -> Result<()> {
        if self.buf.len() - self.pos < n {
            return Err(self.error_at(
                self.buf.len(),
                &format!("truncated {what}: need {n} bytes, have {}", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.error_at(self.buf.len(), "unexpected end of stream"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::make_grid_basis;

    fn bias_only() -> FeatureBasis {
        // one inducing point far away so that only the bias feature matters
        FeatureBasis::new(vec![Point2::new(1e6, 1e6)], 1.0, true).unwrap()
    }

    fn direct_lambda(z: f64) -> f64 {
        (1.0 / (1.0 + (-z).exp()) - 0.5) / (2.0 * z)
    }

    #[test]
    fn new_map_is_prior() {
        let b = make_grid_basis(0.0, 1.0, 0.0, 1.0, 1.0, 1.0, false).unwrap();
        let map = WeightPosterior::new_map(&b, &TrainConfig::default());
        assert_eq!(map.means(), &[0.0; 4]);
        assert_eq!(map.variances(), &[1e4; 4]);
        assert_eq!(map.basis_fingerprint(), b.fingerprint());

        let one = FeatureBasis::new(vec![Point2::new(0.0, 0.0)], 1.0, false).unwrap();
        let cfg = TrainConfig {
            prior_mean: 0.5,
            prior_variance: 2.0,
            ..Default::default()
        };
        let map = WeightPosterior::new_map(&one, &cfg);
        assert_eq!((map.means(), map.variances()), (&[0.5][..], &[2.0][..]));
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_fn(0.0), 0.125);
        assert!((lambda_fn(2.0) - 0.095_199_269_5).abs() < 1e-10);
        assert!((lambda_fn(2.0) - direct_lambda(2.0)).abs() < 1e-15);
        assert_eq!(lambda_fn(-2.0), lambda_fn(2.0));
        // continuity across the series switch-over
        let z = 1e-7;
        assert!((lambda_fn(z) - lambda_fn(z * 1.000_001)).abs() < 1e-15);
    }

    #[test]
    fn lambda_is_even_and_decreasing() {
        let mut prev = lambda_fn(0.0);
        for i in 1..2000 {
            let z = i as f64 * 0.01;
            let l = lambda_fn(z);
            assert!(l > 0.0 && l < prev, "z={z}");
            assert_eq!(l, lambda_fn(-z));
            prev = l;
        }
    }

    #[test]
    fn single_weight_hand_example() {
        let b = bias_only();
        let cfg = TrainConfig {
            prior_mean: 0.0,
            prior_variance: 1.0,
            em_iterations: 1,
            ..Default::default()
        };
        let prior = WeightPosterior::from_parts(vec![0.0, 0.0], vec![1.0, 1.0], b.fingerprint()).unwrap();
        let out = em_update(&prior, &b, &[LabeledSample::new(0.0, 0.0, true)], &cfg).unwrap();
        // oracle, scalar arithmetic: z = 1
        let lam = (1.0 / (1.0 + (-1.0f64).exp()) - 0.5) / 2.0;
        let var = 1.0 / (1.0 + 2.0 * lam);
        let mean = var * 0.5;
        assert!((lam - 0.115_529_289_3).abs() < 1e-10);
        assert!((out.variances()[1] - var).abs() < 1e-12);
        assert!((out.means()[1] - mean).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_noop_and_binding_checked() {
        let b = make_grid_basis(0.0, 1.0, 0.0, 1.0, 1.0, 1.0, false).unwrap();
        let other = make_grid_basis(0.0, 2.0, 0.0, 2.0, 1.0, 1.0, false).unwrap();
        let cfg = TrainConfig::default();
        let map = WeightPosterior::new_map(&b, &cfg);
        assert_eq!(em_update(&map, &b, &[], &cfg).unwrap(), map);
        let err = em_update(&map, &other, &[LabeledSample::new(0.0, 0.0, true)], &cfg);
        assert!(matches!(err, Err(Error::Binding { .. })));
    }

    #[test]
    fn prior_predicts_half() {
        let b = make_grid_basis(0.0, 4.0, 0.0, 4.0, 1.0, 1.0, true).unwrap();
        let map = WeightPosterior::new_map(&b, &TrainConfig::default());
        for p in [Point2::new(0.0, 0.0), Point2::new(2.3, 1.7), Point2::new(-50.0, 9.0)] {
            assert_eq!(predict(&map, &b, &p), 0.5);
        }
        assert_eq!(moderated(0.0, 0.0), 0.5);
        assert_eq!(moderated(3.0, f64::INFINITY), 0.5);
        assert!((moderated(3.0, 1e300) - 0.5).abs() < 1e-100);
    }

    #[test]
    fn zero_variance_reduces_to_sigmoid() {
        assert!((moderated(2.0, 0.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!(moderated(2.0, 1.0) < moderated(2.0, 0.0));
        assert!(moderated(1.0, 4.0) < moderated(1.5, 4.0));
        assert!(moderated(1e6, 0.0) < 1.0 && moderated(-1e6, 0.0) > 0.0);
    }

    #[test]
    fn training_moves_predictions() {
        let b = make_grid_basis(0.0, 2.0, 0.0, 2.0, 0.5, 4.0, false).unwrap();
        let cfg = TrainConfig::default();
        let mut map = WeightPosterior::new_map(&b, &cfg);
        let batch: Vec<_> = (0..20)
            .flat_map(|i| {
                let y = i as f64 * 0.1;
                [LabeledSample::new(0.2, y, false), LabeledSample::new(1.8, y, true)]
            })
            .collect();
        map = em_update(&map, &b, &batch, &cfg).unwrap();
        assert!(predict(&map, &b, &Point2::new(0.2, 1.0)) < 0.3);
        assert!(predict(&map, &b, &Point2::new(1.8, 1.0)) > 0.7);
    }

    #[test]
    fn serialized_size_arithmetic() {
        let b = make_grid_basis(0.0, 1.0, 0.0, 1.0, 0.5, 1.0, true).unwrap();
        let cfg = TrainConfig::default();
        let map = WeightPosterior::new_map(&b, &cfg);
        let bytes = serialize(&map, &b, &cfg).unwrap();
        // 6 header + (4 + 8 + 1 + 9*16) basis + 18 config + 10*16 weights
        assert_eq!(bytes.len(), 6 + 157 + 18 + 160);
        assert_eq!(bytes.len(), serialized_size(&b));
        let (map2, b2, cfg2) = deserialize(&bytes).unwrap();
        assert_eq!((map2, b2, cfg2), (map, b, cfg));
    }

    #[test]
    fn malformed_streams_report_offsets() {
        let b = make_grid_basis(0.0, 1.0, 0.0, 1.0, 1.0, 1.0, false).unwrap();
        let cfg = TrainConfig::default();
        let bytes = serialize(&WeightPosterior::new_map(&b, &cfg), &b, &cfg).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(deserialize(&bad), Err(Error::Parse { offset: 0, .. })));

        for cut in [0, 3, 5, 10, 40, bytes.len() - 1] {
            match deserialize(&bytes[..cut]) {
                Err(Error::Parse { offset, .. }) => assert!(offset <= cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }

        let mut zero = bytes.clone();
        zero[6..10].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(deserialize(&zero), Err(Error::Parse { offset: 6, .. })));

        let mut trailing = bytes;
        trailing.push(0);
        assert!(matches!(deserialize(&trailing), Err(Error::Parse { .. })));
    }

    #[test]
    fn serialize_rejects_mismatched_posterior() {
        let b = make_grid_basis(0.0, 1.0, 0.0, 1.0, 1.0, 1.0, false).unwrap();
        let other = make_grid_basis(0.0, 1.0, 0.0, 1.0, 0.5, 1.0, false).unwrap();
        let cfg = TrainConfig::default();
        let map = WeightPosterior::new_map(&other, &cfg);
        assert!(serialize(&map, &b, &cfg).is_err());
    }
}
