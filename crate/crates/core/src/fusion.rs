//! Decentralized merging of Fast-BHM posteriors by Gaussian conflation.
//!
//! Conflating Gaussians multiplies their densities: precisions add and the
//! mean is the precision-weighted average. After the first merge every agent
//! holds the same global snapshot, so later merges exchange *increments*:
//! the Gaussian factor that, conflated with the snapshot, reproduces the
//! agent's freshly trained local posterior. The snapshot is the only shared
//! information, which keeps repeated merges from double counting it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::features::FeatureBasis;
use crate::ingest::ScanRecord;
use crate::model::{em_update, ByteReader, CompensatedSum, LabeledSample, TrainConfig, WeightPosterior};

/// A univariate normal `N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParam {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianParam {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !(variance.is_finite() && variance > 0.0) {
            return Err(Error::Argument(format!("invalid Gaussian N({mean}, {variance})")));
        }
        Ok(Self { mean, variance })
    }
}

/// Conflation of independent Gaussian estimates of one quantity.
pub fn conflate(estimates: &[GaussianParam]) -> Result<GaussianParam> {
    if estimates.is_empty() {
        return Err(Error::Argument("conflate needs at least one estimate".into()));
    }
    let mut precision = CompensatedSum::default();
    let mut eta = CompensatedSum::default();
    for g in estimates {
        if g.variance.is_nan() || g.variance <= 0.0 {
            return Err(Error::Argument(format!("non-positive variance {}", g.variance)));
        }
        precision.add(1.0 / g.variance);
        eta.add(g.mean / g.variance);
    }
    let variance = 1.0 / precision.value();
    Ok(GaussianParam {
        mean: eta.value() * variance,
        variance,
    })
}

/// Factor `d` with `conflate([prior, d]) == posterior`.
///
/// Returns `None` (no information) when the posterior is not measurably more
/// precise than the prior, i.e. `posterior.variance >= prior.variance * (1 - 1e-12)`.
pub fn get_increment(prior: GaussianParam, posterior: GaussianParam) -> Option<GaussianParam> {
    let eps = 1e-12 * prior.variance;
    if posterior.variance >= prior.variance - eps {
        return None;
    }
    let (var_m, mu_m) = (prior.variance, prior.mean);
    let (var_mn, mu_mn) = (posterior.variance, posterior.mean);
    let variance = var_mn * var_m / (var_m - var_mn);
    let mean = ((var_m + variance) * mu_mn - variance * mu_m) / var_m;
    Some(GaussianParam { mean, variance })
}

/// Per-weight increments between a snapshot and a later posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementMap {
    entries: Vec<Option<GaussianParam>>,
    fingerprint: u64,
}

impl IncrementMap {
    pub fn between(snapshot: &WeightPosterior, local: &WeightPosterior) -> Result<Self> {
        if snapshot.basis_fingerprint() != local.basis_fingerprint() || snapshot.dim() != local.dim() {
            return Err(Error::Binding {
                expected: snapshot.basis_fingerprint(),
                found: local.basis_fingerprint(),
            });
        }
        let entries = (0..snapshot.dim())
            .map(|t| {
                get_increment(
                    GaussianParam {
                        mean: snapshot.means()[t],
                        variance: snapshot.variances()[t],
                    },
                    GaussianParam {
                        mean: local.means()[t],
                        variance: local.variances()[t],
                    },
                )
            })
            .collect();
        Ok(Self {
            entries,
            fingerprint: snapshot.basis_fingerprint(),
        })
    }

    pub fn from_entries(entries: Vec<Option<GaussianParam>>, fingerprint: u64) -> Self {
        Self { entries, fingerprint }
    }

    pub fn entries(&self) -> &[Option<GaussianParam>] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn basis_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Number of weights carrying information.
    pub fn informative(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }
}

/// Variance cut-off separating trained weights from ones still near the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub variance_threshold: f64,
}

impl FilterPolicy {
    /// Default threshold: half the prior variance.
    pub fn for_prior(prior_variance: f64) -> Self {
        Self {
            variance_threshold: 0.5 * prior_variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variance_threshold.is_nan() || self.variance_threshold <= 0.0 {
            return Err(config_err(format!(
                "variance threshold must be > 0, got {}",
                self.variance_threshold
            )));
        }
        Ok(())
    }
}

/// One map entering a merge.
#[derive(Debug, Clone, Copy)]
pub enum Contribution<'a> {
    /// A complete local posterior; weights are kept only where confident.
    Full(&'a WeightPosterior),
    /// Information gained since the last shared snapshot.
    Increment(&'a IncrementMap),
}

impl Contribution<'_> {
    fn fingerprint(&self) -> u64 {
        match self {
            Contribution::Full(m) => m.basis_fingerprint(),
            Contribution::Increment(i) => i.basis_fingerprint(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Contribution::Full(m) => m.dim(),
            Contribution::Increment(i) => i.dim(),
        }
    }
}

/// Merges contributions weight by weight.
///
/// * A lone full map passes through untouched.
/// * Full maps contribute weight `t` only when its variance is below the
///   policy threshold; increments contribute wherever they carry information.
/// * No contribution at `t` leaves the prior. A single full estimate is copied.
///   Increments that are not accompanied by any full estimate at `t` are
///   anchored on the prior, since an increment is a likelihood factor rather
///   than an estimate.
pub fn fuse_maps(
    contributions: &[Contribution<'_>],
    prior_mean: f64,
    prior_variance: f64,
    policy: &FilterPolicy,
) -> Result<WeightPosterior> {
    let first = contributions
        .first()
        .ok_or_else(|| Error::Argument("fuse_maps needs at least one map".into()))?;
    policy.validate()?;
    if prior_variance.is_nan() || prior_variance <= 0.0 {
        return Err(config_err("prior variance must be > 0"));
    }
    let (fp, m) = (first.fingerprint(), first.dim());
    for c in contributions {
        if c.fingerprint() != fp || c.dim() != m {
            return Err(Error::Binding {
                expected: fp,
                found: c.fingerprint(),
            });
        }
    }
    if let [Contribution::Full(only)] = contributions {
        return Ok((*only).clone());
    }

    let mut means = Vec::with_capacity(m);
    let mut variances = Vec::with_capacity(m);
    for t in 0..m {
        let mut acc = WeightAccumulator::default();
        for c in contributions {
            match c {
                Contribution::Full(map) => {
                    let var = map.variances()[t];
                    if var < policy.variance_threshold {
                        acc.add(
                            GaussianParam {
                                mean: map.means()[t],
                                variance: var,
                            },
                            true,
                        );
                    }
                }
                Contribution::Increment(inc) => {
                    if let Some(g) = inc.entries()[t] {
                        acc.add(g, false);
                    }
                }
            }
        }
        if acc.count > 0 && !acc.has_full {
            acc.add(
                GaussianParam {
                    mean: prior_mean,
                    variance: prior_variance,
                },
                false,
            );
        }
        let g = match acc.count {
            0 => GaussianParam {
                mean: prior_mean,
                variance: prior_variance,
            },
            1 => acc.single.expect("one contribution recorded"),
            _ => {
                let variance = 1.0 / acc.precision.value();
                GaussianParam {
                    mean: acc.eta.value() * variance,
                    variance,
                }
            }
        };
        means.push(g.mean);
        variances.push(g.variance);
    }
    WeightPosterior::from_parts(means, variances, fp)
}

#[derive(Default)]
struct WeightAccumulator {
    precision: CompensatedSum,
    eta: CompensatedSum,
    count: usize,
    single: Option<GaussianParam>,
    has_full: bool,
}

impl WeightAccumulator {
    fn add(&mut self, g: GaussianParam, full: bool) {
        self.precision.add(1.0 / g.variance);
        self.eta.add(g.mean / g.variance);
        self.count += 1;
        self.single = Some(g);
        self.has_full |= full;
    }
}

// Contribution wire format (little-endian):
//   "FBHC" | version u16 | basis fingerprint u64 | kind u8 | m u32 | count u32
//   kind 0 (full, dense):        m x (mean f64, variance f64)
//   kind 1 (increment, dense):   m x (mean f64, variance f64), variance = +inf for no information
//   kind 2 (increment, sparse):  count x (index u32, mean f64, variance f64)

const WIRE_MAGIC: &[u8; 4] = b"FBHC";
const WIRE_VERSION: u16 = 1;
pub const WIRE_HEADER_BYTES: usize = 4 + 2 + 8 + 1 + 4 + 4;

/// Encoding of a contribution as sent between agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireKind {
    Full,
    DenseIncrement,
    SparseIncrement,
}

impl WireKind {
    fn tag(self) -> u8 {
        match self {
            WireKind::Full => 0,
            WireKind::DenseIncrement => 1,
            WireKind::SparseIncrement => 2,
        }
    }
}

/// Decoded transmission.
#[derive(Debug, Clone, PartialEq)]
pub enum Transmission {
    Full(WeightPosterior),
    Increment(IncrementMap),
}

pub fn encode_full(map: &WeightPosterior) -> Vec<u8> {
    let m = map.dim();
    let mut out = wire_header(map.basis_fingerprint(), WireKind::Full, m, m);
    for (mu, var) in map.means().iter().zip(map.variances()) {
        out.extend_from_slice(&mu.to_le_bytes());
        out.extend_from_slice(&var.to_le_bytes());
    }
    out
}

/// Encodes an increment with whichever of the dense and sparse layouts is
/// smaller, so an increment never costs more than a full posterior.
pub fn encode_increment(inc: &IncrementMap) -> Vec<u8> {
    let m = inc.dim();
    let k = inc.informative();
    if increment_wire_kind(inc) == WireKind::SparseIncrement {
        let mut out = wire_header(inc.fingerprint, WireKind::SparseIncrement, m, k);
        for (t, g) in inc.entries.iter().enumerate() {
            if let Some(g) = g {
                out.extend_from_slice(&(t as u32).to_le_bytes());
                out.extend_from_slice(&g.mean.to_le_bytes());
                out.extend_from_slice(&g.variance.to_le_bytes());
            }
        }
        out
    } else {
        let mut out = wire_header(inc.fingerprint, WireKind::DenseIncrement, m, m);
        for g in &inc.entries {
            let (mu, var) = g.map_or((0.0, f64::INFINITY), |g| (g.mean, g.variance));
            out.extend_from_slice(&mu.to_le_bytes());
            out.extend_from_slice(&var.to_le_bytes());
        }
        out
    }
}

/// Layout [`encode_increment`] picks for `inc`.
pub fn increment_wire_kind(inc: &IncrementMap) -> WireKind {
    if 20 * inc.informative() < 16 * inc.dim() {
        WireKind::SparseIncrement
    } else {
        WireKind::DenseIncrement
    }
}

fn wire_header(fingerprint: u64, kind: WireKind, m: usize, count: usize) -> Vec<u8> {
    let body = match kind {
        WireKind::SparseIncrement => 20 * count,
        _ => 16 * m,
    };
    let mut out = Vec::with_capacity(WIRE_HEADER_BYTES + body);
    out.extend_from_slice(WIRE_MAGIC);
    out.extend_from_slice(&WIRE_VERSION.to_le_bytes());
    out.extend_from_slice(&fingerprint.to_le_bytes());
    out.push(kind.tag());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&(count as u32).to_le_bytes());
    out
}

pub fn decode_transmission(bytes: &[u8]) -> Result<Transmission> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != WIRE_MAGIC {
        return Err(r.error_at(0, "bad magic, expected FBHC"));
    }
    let version = r.u16()?;
    if version != WIRE_VERSION {
        return Err(r.error_at(4, &format!("unsupported wire version {version}")));
    }
    let fingerprint = r.u64()?;
    let kind_at = r.offset();
    let kind = r.u8()?;
    let m = r.u32()? as usize;
    let count_at = r.offset();
    let count = r.u32()? as usize;
    let out = match kind {
        0 | 1 => {
            if count != m {
                return Err(r.error_at(count_at, "dense payload count must equal m"));
            }
            r.expect_remaining(16 * m, "dense weights")?;
            let mut means = Vec::with_capacity(m);
            let mut vars = Vec::with_capacity(m);
            for _ in 0..m {
                means.push(r.f64()?);
                vars.push(r.f64()?);
            }
            if kind == 0 {
                Transmission::Full(
                    WeightPosterior::from_parts(means, vars, fingerprint)
                        .map_err(|e| r.error_at(WIRE_HEADER_BYTES, &e.to_string()))?,
                )
            } else {
                let entries = means
                    .into_iter()
                    .zip(vars)
                    .map(|(mean, variance)| variance.is_finite().then_some(GaussianParam { mean, variance }))
                    .collect();
                Transmission::Increment(IncrementMap::from_entries(entries, fingerprint))
            }
        }
        2 => {
            if count > m {
                return Err(r.error_at(count_at, "sparse count exceeds m"));
            }
            r.expect_remaining(20 * count, "sparse entries")?;
            let mut entries = vec![None; m];
            for _ in 0..count {
                let at = r.offset();
                let t = r.u32()? as usize;
                let g = GaussianParam {
                    mean: r.f64()?,
                    variance: r.f64()?,
                };
                if t >= m || entries[t].is_some() {
                    return Err(r.error_at(at, &format!("bad or repeated weight index {t}")));
                }
                entries[t] = Some(g);
            }
            Transmission::Increment(IncrementMap::from_entries(entries, fingerprint))
        }
        k => return Err(r.error_at(kind_at, &format!("unknown contribution kind {k}"))),
    };
    if r.offset() != bytes.len() {
        return Err(r.error_at(r.offset(), "trailing bytes after payload"));
    }
    Ok(out)
}

/// Copy of a global posterior an agent keeps until the next merge.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub map: WeightPosterior,
    /// Merge counter at which this global was produced.
    pub version: u64,
}

/// Per-agent state of the repeated-merge protocol.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub agent_id: usize,
    pub local_map: WeightPosterior,
    /// Present once the agent has taken part in a merge.
    pub snapshot: Option<Snapshot>,
    pub scan_queue: Vec<ScanRecord>,
    /// Number of queued scans already trained on.
    pub consumed: usize,
    pub bytes_sent: u64,
}

impl AgentState {
    pub fn new(agent_id: usize, basis: &FeatureBasis, cfg: &TrainConfig, scans: Vec<ScanRecord>) -> Self {
        Self {
            agent_id,
            local_map: WeightPosterior::new_map(basis, cfg),
            snapshot: None,
            scan_queue: scans,
            consumed: 0,
            bytes_sent: 0,
        }
    }

    /// Trains the local map on queued scans up to (excluding) `until`.
    pub fn train_until(&mut self, until: usize, basis: &FeatureBasis, cfg: &TrainConfig) -> Result<()> {
        let until = until.min(self.scan_queue.len());
        while self.consumed < until {
            let scan = &self.scan_queue[self.consumed];
            self.local_map = em_update(&self.local_map, basis, &scan.samples, cfg)?;
            self.consumed += 1;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SendStatus {
    Sent,
    /// Contribution exceeded the per-round bandwidth cap and was withheld.
    Capped,
}

/// Ledger line for one agent in one merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub agent_id: usize,
    pub kind: WireKind,
    pub bytes: u64,
    pub informative_weights: usize,
    pub status: SendStatus,
}

/// Record of one merge.
#[derive(Debug, Clone)]
pub struct FusionRound {
    pub round: usize,
    pub entries: Vec<LedgerEntry>,
    pub global: WeightPosterior,
}

impl FusionRound {
    pub fn transcript(&self) -> TranscriptRecord {
        TranscriptRecord {
            round: self.round,
            agents: self.entries.clone(),
            checksum: format!("{:016x}", self.global.checksum()),
        }
    }
}

/// JSON-lines transcript record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub round: usize,
    pub agents: Vec<LedgerEntry>,
    pub checksum: String,
}

pub fn write_transcript<W: Write>(mut w: W, records: &[TranscriptRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Synchronous merge coordinator holding the latest global posterior.
#[derive(Debug, Clone)]
pub struct FusionSession {
    prior: WeightPosterior,
    prior_mean: f64,
    prior_variance: f64,
    policy: FilterPolicy,
    bandwidth_cap: Option<u64>,
    global: Option<Snapshot>,
    rounds: usize,
}

impl FusionSession {
    pub fn new(
        basis: &FeatureBasis,
        cfg: &TrainConfig,
        policy: FilterPolicy,
        bandwidth_cap: Option<u64>,
    ) -> Result<Self> {
        cfg.validate()?;
        policy.validate()?;
        Ok(Self {
            prior: WeightPosterior::new_map(basis, cfg),
            prior_mean: cfg.prior_mean,
            prior_variance: cfg.prior_variance,
            policy,
            bandwidth_cap,
            global: None,
            rounds: 0,
        })
    }

    pub fn global(&self) -> Option<&WeightPosterior> {
        self.global.as_ref().map(|s| &s.map)
    }

    /// Merges the agents' current local maps and hands the result back.
    ///
    /// Agents that never merged send their full posterior; the others send
    /// the increment over their snapshot. The first sending agent whose
    /// snapshot is the current global acts as host and enters with its full
    /// local map, which already contains that global; without such a host the
    /// previous global itself enters as a full estimate. Agents whose payload
    /// exceeds the bandwidth cap sit the round out and keep their local map.
    pub fn combine(&mut self, agents: &mut [AgentState]) -> Result<FusionRound> {
        self.rounds += 1;
        let current = self.global.as_ref().map(|s| s.version);

        enum Owned {
            Full,
            Inc(IncrementMap),
        }
        let mut prepared = Vec::with_capacity(agents.len());
        let mut entries = Vec::with_capacity(agents.len());
        for agent in agents.iter() {
            let (owned, bytes, kind, informative) = match &agent.snapshot {
                None => {
                    let bytes = encode_full(&agent.local_map).len();
                    (Owned::Full, bytes, WireKind::Full, agent.local_map.dim())
                }
                Some(snap) => {
                    let inc = IncrementMap::between(&snap.map, &agent.local_map)?;
                    let bytes = encode_increment(&inc).len();
                    let kind = increment_wire_kind(&inc);
                    let k = inc.informative();
                    (Owned::Inc(inc), bytes, kind, k)
                }
            };
            let bytes = bytes as u64;
            let status = match self.bandwidth_cap {
                Some(cap) if bytes > cap => SendStatus::Capped,
                _ => SendStatus::Sent,
            };
            entries.push(LedgerEntry {
                agent_id: agent.agent_id,
                kind,
                bytes,
                informative_weights: informative,
                status,
            });
            prepared.push((owned, status));
        }

        let host = agents.iter().zip(&prepared).position(|(a, (_, status))| {
            *status == SendStatus::Sent && current.is_some() && a.snapshot.as_ref().map(|s| s.version) == current
        });

        let mut contributions = Vec::with_capacity(agents.len() + 1);
        if host.is_none() {
            if let Some(g) = &self.global {
                contributions.push(Contribution::Full(&g.map));
            }
        }
        for (i, (agent, (owned, status))) in agents.iter().zip(&prepared).enumerate() {
            if *status != SendStatus::Sent {
                continue;
            }
            if Some(i) == host {
                contributions.push(Contribution::Full(&agent.local_map));
                continue;
            }
            match owned {
                Owned::Full => contributions.push(Contribution::Full(&agent.local_map)),
                Owned::Inc(inc) => contributions.push(Contribution::Increment(inc)),
            }
        }

        let global = if contributions.is_empty() {
            self.prior.clone()
        } else {
            fuse_maps(&contributions, self.prior_mean, self.prior_variance, &self.policy)?
        };
        drop(contributions);
        drop(prepared);

        let version = self.rounds as u64;
        for (agent, entry) in agents.iter_mut().zip(&entries) {
            if entry.status == SendStatus::Sent {
                agent.bytes_sent += entry.bytes;
                agent.local_map = global.clone();
                agent.snapshot = Some(Snapshot {
                    map: global.clone(),
                    version,
                });
            }
        }
        self.global = Some(Snapshot {
            map: global.clone(),
            version,
        });
        Ok(FusionRound {
            round: self.rounds,
            entries,
            global,
        })
    }
}

/// Repeated train-then-merge protocol.
///
/// Each round every agent trains on the batches returned by
/// `batches(agent_index, round)` (rounds count from 1), then all agents merge.
/// Returns the global posterior after every round.
pub fn sequential_fusion<F>(
    agents: &mut [AgentState],
    rounds: usize,
    mut batches: F,
    basis: &FeatureBasis,
    cfg: &TrainConfig,
    policy: FilterPolicy,
) -> Result<Vec<WeightPosterior>>
where
    F: FnMut(usize, usize) -> Vec<Vec<LabeledSample>>,
{
    if rounds == 0 {
        return Err(Error::Argument("sequential fusion needs at least one round".into()));
    }
    if agents.is_empty() {
        return Err(Error::Argument("sequential fusion needs at least one agent".into()));
    }
    let mut session = FusionSession::new(basis, cfg, policy, None)?;
    let mut globals = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        for (i, agent) in agents.iter_mut().enumerate() {
            for batch in batches(i, round) {
                agent.local_map = em_update(&agent.local_map, basis, &batch, cfg)?;
            }
        }
        globals.push(session.combine(agents)?.global);
    }
    Ok(globals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::make_grid_basis;

    fn g(mean: f64, variance: f64) -> GaussianParam {
        GaussianParam { mean, variance }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn conflate_examples() {
        assert_eq!(conflate(&[g(0.0, 1.0), g(0.0, 1.0)]).unwrap(), g(0.0, 0.5));
        assert_eq!(conflate(&[g(1.0, 1.0), g(3.0, 1.0)]).unwrap(), g(2.0, 0.5));
        let c = conflate(&[g(0.0, 1.0), g(2.0, 4.0)]).unwrap();
        // oracle: precision 1 + 1/4, eta 0 + 2/4
        assert!(close(c.variance, 1.0 / 1.25, 1e-15));
        assert!(close(c.mean, 0.5 / 1.25, 1e-15));
        assert!(close(c.mean, 0.4, 1e-15) && close(c.variance, 0.8, 1e-15));
        assert!(conflate(&[]).is_err());
    }

    #[test]
    fn increment_examples() {
        let d = get_increment(g(0.0, 1.0), g(0.4, 0.8)).unwrap();
        assert!(close(d.mean, 2.0, 1e-12) && close(d.variance, 4.0, 1e-12));
        assert_eq!(get_increment(g(0.3, 1.0), g(0.3, 1.0)), None);
        assert_eq!(get_increment(g(0.3, 1.0), g(0.7, 1.5)), None);
        let d = get_increment(g(0.0, 1.0), g(0.0, 0.5)).unwrap();
        assert_eq!(d, g(0.0, 1.0));
        assert_eq!(conflate(&[g(0.0, 1.0), g(0.0, 1.0)]).unwrap(), g(0.0, 0.5));
    }

    fn basis() -> FeatureBasis {
        make_grid_basis(0.0, 3.0, 0.0, 1.0, 1.0, 2.0, false).unwrap()
    }

    #[test]
    fn single_full_map_passes_through() {
        let b = basis();
        let cfg = TrainConfig::default();
        let map =
            WeightPosterior::from_parts((0..8).map(|i| i as f64).collect(), vec![0.5; 8], b.fingerprint()).unwrap();
        let pol = FilterPolicy::for_prior(cfg.prior_variance);
        let out = fuse_maps(&[Contribution::Full(&map)], 0.0, 1e4, &pol).unwrap();
        assert_eq!(out, map);
    }

    #[test]
    fn disjoint_confident_regions() {
        let b = basis();
        let fp = b.fingerprint();
        let left = WeightPosterior::from_parts(
            vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            vec![0.5, 0.5, 1e4, 1e4, 0.5, 0.5, 1e4, 1e4],
            fp,
        )
        .unwrap();
        let right = WeightPosterior::from_parts(
            vec![0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, -2.0],
            vec![1e4, 1e4, 1e4, 0.25, 1e4, 1e4, 1e4 - 1.0, 0.25],
            fp,
        )
        .unwrap();
        let pol = FilterPolicy::for_prior(1e4);
        let out = fuse_maps(&[Contribution::Full(&left), Contribution::Full(&right)], 0.0, 1e4, &pol).unwrap();
        assert_eq!(out.means(), &[1.0, 1.0, 0.0, -2.0, 1.0, 1.0, 0.0, -2.0]);
        assert_eq!(out.variances(), &[0.5, 0.5, 1e4, 0.25, 0.5, 0.5, 1e4, 0.25]);
    }

    #[test]
    fn binding_and_empty_errors() {
        let b = basis();
        let other = make_grid_basis(0.0, 2.0, 0.0, 1.0, 1.0, 2.0, false).unwrap();
        let cfg = TrainConfig::default();
        let a = WeightPosterior::new_map(&b, &cfg);
        let c = WeightPosterior::new_map(&other, &cfg);
        let pol = FilterPolicy::for_prior(1e4);
        assert!(matches!(fuse_maps(&[], 0.0, 1e4, &pol), Err(Error::Argument(_))));
        assert!(matches!(
            fuse_maps(&[Contribution::Full(&a), Contribution::Full(&c)], 0.0, 1e4, &pol),
            Err(Error::Binding { .. })
        ));
    }

    #[test]
    fn lone_increment_is_anchored_on_prior() {
        let b = basis();
        let fp = b.fingerprint();
        let mut entries = vec![None; 8];
        entries[2] = Some(g(1.0, 2.0));
        let inc = IncrementMap::from_entries(entries, fp);
        let prior_map = WeightPosterior::new_map(&b, &TrainConfig::default());
        let pol = FilterPolicy::for_prior(1e4);
        let out = fuse_maps(
            &[Contribution::Full(&prior_map), Contribution::Increment(&inc)],
            0.0,
            1e4,
            &pol,
        )
        .unwrap();
        let want = conflate(&[g(1.0, 2.0), g(0.0, 1e4)]).unwrap();
        assert!(close(out.means()[2], want.mean, 1e-14));
        assert!(close(out.variances()[2], want.variance, 1e-14));
        assert_eq!(out.variances()[0], 1e4);
    }

    #[test]
    fn wire_round_trip_and_sizes() {
        let b = basis();
        let fp = b.fingerprint();
        let cfg = TrainConfig::default();
        let prior = WeightPosterior::new_map(&b, &cfg);
        let full = encode_full(&prior);
        assert_eq!(full.len(), WIRE_HEADER_BYTES + 16 * 8);
        assert_eq!(decode_transmission(&full).unwrap(), Transmission::Full(prior.clone()));

        let mut entries = vec![None; 8];
        entries[5] = Some(g(0.25, 3.0));
        let sparse = IncrementMap::from_entries(entries, fp);
        let bytes = encode_increment(&sparse);
        assert_eq!(bytes.len(), WIRE_HEADER_BYTES + 20);
        assert_eq!(decode_transmission(&bytes).unwrap(), Transmission::Increment(sparse));

        let dense = IncrementMap::from_entries((0..8).map(|i| (i != 3).then_some(g(i as f64, 1.0))).collect(), fp);
        let bytes = encode_increment(&dense);
        assert_eq!(bytes.len(), full.len());
        assert_eq!(decode_transmission(&bytes).unwrap(), Transmission::Increment(dense));

        assert!(matches!(
            decode_transmission(&bytes[..bytes.len() - 3]),
            Err(Error::Parse { .. })
        ));
    }

    fn strip(x: f64) -> Vec<LabeledSample> {
        (0..10)
            .map(|i| LabeledSample::new(x, i as f64 * 0.1, i % 3 == 0))
            .collect()
    }

    #[test]
    fn one_agent_matches_solo_training() {
        let b = basis();
        let cfg = TrainConfig::default();
        let batches = [strip(0.5), strip(1.5), strip(2.5)];
        let mut solo = WeightPosterior::new_map(&b, &cfg);
        for batch in &batches {
            solo = em_update(&solo, &b, batch, &cfg).unwrap();
        }
        let mut agents = vec![AgentState::new(0, &b, &cfg, vec![])];
        let globals = sequential_fusion(
            &mut agents,
            3,
            |_, r| vec![batches[r - 1].clone()],
            &b,
            &cfg,
            FilterPolicy::for_prior(cfg.prior_variance),
        )
        .unwrap();
        assert_eq!(globals.last().unwrap(), &solo);
    }

    #[test]
    fn duplicated_agents_gain_precision() {
        let b = basis();
        let cfg = TrainConfig::default();
        let batch = strip(1.0);
        let solo = em_update(&WeightPosterior::new_map(&b, &cfg), &b, &batch, &cfg).unwrap();
        let mut agents: Vec<_> = (0..2).map(|i| AgentState::new(i, &b, &cfg, vec![])).collect();
        let pol = FilterPolicy::for_prior(cfg.prior_variance);
        let globals = sequential_fusion(&mut agents, 1, |_, _| vec![batch.clone()], &b, &cfg, pol).unwrap();
        let fused = &globals[0];
        for t in 0..b.dim() {
            if solo.variances()[t] < pol.variance_threshold {
                assert!(fused.variances()[t] < solo.variances()[t], "weight {t}");
            }
        }
    }

    #[test]
    fn idle_agent_leaves_global_unchanged() {
        let b = basis();
        let cfg = TrainConfig::default();
        let pol = FilterPolicy::for_prior(cfg.prior_variance);
        let mut agents: Vec<_> = (0..2).map(|i| AgentState::new(i, &b, &cfg, vec![])).collect();
        let globals = sequential_fusion(
            &mut agents,
            3,
            |i, r| if r == 1 { vec![strip(0.5 + i as f64)] } else { vec![] },
            &b,
            &cfg,
            pol,
        )
        .unwrap();
        let first = &globals[0];
        for t in 0..b.dim() {
            let (mu, var) = if first.variances()[t] < pol.variance_threshold {
                (first.means()[t], first.variances()[t])
            } else {
                (cfg.prior_mean, cfg.prior_variance)
            };
            assert_eq!((globals[1].means()[t], globals[1].variances()[t]), (mu, var));
        }
        assert_eq!(globals[2], globals[1]);
        let inc = IncrementMap::between(&globals[1], &globals[1]).unwrap();
        assert_eq!(inc.informative(), 0);
    }

    #[test]
    fn bandwidth_cap_withholds_contribution() {
        let b = basis();
        let cfg = TrainConfig::default();
        let pol = FilterPolicy::for_prior(cfg.prior_variance);
        let full_bytes = (WIRE_HEADER_BYTES + 16 * b.dim()) as u64;
        let mut session = FusionSession::new(&b, &cfg, pol, Some(full_bytes - 1)).unwrap();
        let mut agents = vec![AgentState::new(7, &b, &cfg, vec![])];
        agents[0].local_map = em_update(&agents[0].local_map, &b, &strip(1.0), &cfg).unwrap();
        let before = agents[0].local_map.clone();
        let round = session.combine(&mut agents).unwrap();
        assert_eq!(round.entries[0].status, SendStatus::Capped);
        assert_eq!(round.entries[0].bytes, full_bytes);
        assert_eq!(agents[0].bytes_sent, 0);
        assert!(agents[0].snapshot.is_none());
        assert_eq!(agents[0].local_map, before);
        assert_eq!(round.global, WeightPosterior::new_map(&b, &cfg));
    }
}
