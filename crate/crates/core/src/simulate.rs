//! Multi-agent mapping simulator: agents consume quadrant-partitioned scan
//! streams, merge at scheduled training-progress fractions, and the result is
//! compared against one map trained on the union of all streams.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::eval::{self, Metrics, ScoredLabels};
use crate::features::{make_grid_basis, FeatureBasis, Point2};
use crate::fusion::{encode_full, AgentState, FilterPolicy, FusionSession, LedgerEntry, TranscriptRecord};
use crate::gridmap::{pgm_bytes, CellEncoding, GridMap};
use crate::ingest::{
    flatten, partition_by_quadrant, scans_from_beams, split_scans, synth_environment, Layout, ScanRecord,
};
use crate::model::{self, em_update, predict, TrainConfig, WeightPosterior};

/// When and how agents merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    /// Fractions of each agent's queue after which a merge happens.
    pub fusion_points: Vec<f64>,
    pub policy: FilterPolicy,
    /// Largest contribution (bytes) an agent may send in one round.
    pub bandwidth_cap: Option<u64>,
}

impl SimulationPlan {
    pub fn repeated(cfg: &TrainConfig) -> Self {
        Self {
            fusion_points: vec![0.25, 0.5, 0.75, 1.0],
            policy: FilterPolicy::for_prior(cfg.prior_variance),
            bandwidth_cap: None,
        }
    }

    pub fn fuse_once(cfg: &TrainConfig) -> Self {
        Self {
            fusion_points: vec![1.0],
            ..Self::repeated(cfg)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fusion_points.is_empty() {
            return Err(config_err("plan needs at least one fusion point"));
        }
        let mut prev = 0.0;
        for &f in &self.fusion_points {
            if !(f > prev && f <= 1.0) {
                return Err(config_err(format!(
                    "fusion points must be strictly increasing in (0,1], got {:?}",
                    self.fusion_points
                )));
            }
            prev = f;
        }
        self.policy.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub fraction: f64,
    pub checksum: String,
    pub ledger: Vec<LedgerEntry>,
    pub metrics: Option<Metrics>,
}

impl RoundReport {
    pub fn transcript(&self) -> TranscriptRecord {
        TranscriptRecord {
            round: self.round,
            agents: self.ledger.clone(),
            checksum: self.checksum.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentLedger {
    pub agent_id: usize,
    pub scans: usize,
    pub samples: usize,
    pub bytes_sent: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMetrics {
    pub fused: Option<Metrics>,
    pub joint: Option<Metrics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportSizes {
    pub weights: usize,
    pub model_bytes: usize,
    pub full_contribution_bytes: usize,
}

/// Outcome of [`run_simulation`]. Maps are carried alongside but not serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub rounds: Vec<RoundReport>,
    pub agents: Vec<AgentLedger>,
    pub metrics: ReportMetrics,
    pub sizes: ReportSizes,
    pub joint_checksum: String,
    /// Order-independent checksum of the sample ids the joint map consumed.
    pub consumed_ids: String,
    /// Same checksum over the union of all agent queues.
    pub union_ids: String,
    #[serde(skip)]
    pub globals: Vec<WeightPosterior>,
    #[serde(skip)]
    pub joint: Option<WeightPosterior>,
}

impl SimulationReport {
    pub fn final_global(&self) -> Option<&WeightPosterior> {
        self.globals.last()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn sample_id_hash(scan_id: u64, index: usize) -> u64 {
    splitmix64(scan_id.rotate_left(32) ^ index as u64)
}

/// Order-independent multiset checksum over `(scan_id, sample index)` ids.
pub fn sample_checksum<'a>(scans: impl IntoIterator<Item = &'a ScanRecord>) -> u64 {
    scans
        .into_iter()
        .flat_map(|s| (0..s.samples.len()).map(move |j| sample_id_hash(s.scan_id, j)))
        .fold(0u64, u64::wrapping_add)
}

/// Scores a map against held-out samples.
pub fn score_map(map: &WeightPosterior, basis: &FeatureBasis, test: &[ScanRecord]) -> Result<ScoredLabels> {
    let samples = flatten(test);
    let scores = samples.iter().map(|s| predict(map, basis, &s.point)).collect();
    ScoredLabels::new(scores, samples.iter().map(|s| s.label()).collect())
}

fn metrics_or_none(map: &WeightPosterior, basis: &FeatureBasis, test: &[ScanRecord]) -> Result<Option<Metrics>> {
    if test.is_empty() {
        return Ok(None);
    }
    let sl = score_map(map, basis, test)?;
    match Metrics::compute(&sl, 0.5) {
        Ok(m) => Ok(Some(m)),
        Err(Error::MetricUndefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Trains one map on every scan, in scan-id (time) order.
pub fn train_joint(scans: &[ScanRecord], basis: &FeatureBasis, cfg: &TrainConfig) -> Result<(WeightPosterior, u64)> {
    let mut order: Vec<&ScanRecord> = scans.iter().collect();
    order.sort_by_key(|s| s.scan_id);
    let mut map = WeightPosterior::new_map(basis, cfg);
    let mut consumed = 0u64;
    for s in order {
        map = em_update(&map, basis, &s.samples, cfg)?;
        for j in 0..s.samples.len() {
            consumed = consumed.wrapping_add(sample_id_hash(s.scan_id, j));
        }
    }
    Ok((map, consumed))
}

/// Drives the agents through the plan and evaluates on `test`.
pub fn run_simulation(
    mut agents: Vec<AgentState>,
    plan: &SimulationPlan,
    basis: &FeatureBasis,
    cfg: &TrainConfig,
    test: &[ScanRecord],
) -> Result<SimulationReport> {
    plan.validate()?;
    cfg.validate()?;
    if agents.is_empty() {
        return Err(Error::Argument("simulation needs at least one agent".into()));
    }
    if let Some(a) = agents.iter().find(|a| a.scan_queue.is_empty()) {
        return Err(Error::Argument(format!("agent {} has an empty scan queue", a.agent_id)));
    }
    for a in &agents {
        a.local_map.check_binding(basis)?;
    }

    let mut session = FusionSession::new(basis, cfg, plan.policy, plan.bandwidth_cap)?;
    let mut rounds = Vec::with_capacity(plan.fusion_points.len());
    let mut globals = Vec::with_capacity(plan.fusion_points.len());
    for &fraction in &plan.fusion_points {
        agents.par_iter_mut().try_for_each(|a| {
            let target = (fraction * a.scan_queue.len() as f64).ceil() as usize;
            a.train_until(target, basis, cfg)
        })?;
        let round = session.combine(&mut agents)?;
        rounds.push(RoundReport {
            round: round.round,
            fraction,
            checksum: format!("{:016x}", round.global.checksum()),
            ledger: round.entries,
            metrics: metrics_or_none(&round.global, basis, test)?,
        });
        globals.push(round.global);
    }

    let all: Vec<ScanRecord> = agents.iter().flat_map(|a| a.scan_queue.iter().cloned()).collect();
    let (joint, consumed) = train_joint(&all, basis, cfg)?;
    let union = sample_checksum(&all);

    let final_global = globals.last().expect("plan has at least one round");
    let metrics = ReportMetrics {
        fused: metrics_or_none(final_global, basis, test)?,
        joint: metrics_or_none(&joint, basis, test)?,
    };
    let agents_ledger = agents
        .iter()
        .map(|a| AgentLedger {
            agent_id: a.agent_id,
            scans: a.scan_queue.len(),
            samples: a.scan_queue.iter().map(|s| s.samples.len()).sum(),
            bytes_sent: a.bytes_sent,
        })
        .collect();
    Ok(SimulationReport {
        rounds,
        agents: agents_ledger,
        metrics,
        sizes: ReportSizes {
            weights: basis.dim(),
            model_bytes: model::serialized_size(basis),
            full_contribution_bytes: encode_full(final_global).len(),
        },
        joint_checksum: format!("{:016x}", joint.checksum()),
        consumed_ids: format!("{consumed:016x}"),
        union_ids: format!("{union:016x}"),
        globals,
        joint: Some(joint),
    })
}

/// One agent per non-empty quadrant around `center`; agent id = quadrant index.
pub fn quadrant_agents(
    train: &[ScanRecord],
    center: Point2,
    basis: &FeatureBasis,
    cfg: &TrainConfig,
) -> Vec<AgentState> {
    partition_by_quadrant(train, center)
        .into_iter()
        .enumerate()
        .filter(|(_, q)| !q.is_empty())
        .map(|(i, q)| AgentState::new(i, basis, cfg, q))
        .collect()
}

/// Default kernel width as a multiple of `1 / spacing^2`. Wider kernels
/// (smaller multiples) blur walls into the surrounding free space.
pub const DEFAULT_GAMMA_SCALE: f64 = 6.0;

/// End-to-end synthetic experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub layout: Layout,
    pub beam_count: usize,
    pub noise_sd: f64,
    pub free_spacing: f64,
    pub seed: u64,
    /// Scan-level folds; fold `fold` is held out.
    pub folds: usize,
    pub fold: usize,
    pub spacing: f64,
    /// Kernel width as a multiple of `1 / spacing^2`.
    pub gamma_scale: f64,
    pub train: TrainConfig,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            layout: Layout::four_rooms(),
            beam_count: 8,
            noise_sd: 0.02,
            free_spacing: 0.3,
            seed: 7,
            folds: 10,
            fold: 0,
            spacing: 0.8,
            gamma_scale: DEFAULT_GAMMA_SCALE,
            train: TrainConfig::default(),
        }
    }
}

/// Materialized experiment inputs.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Vec<ScanRecord>,
    pub test: Vec<ScanRecord>,
    pub extent: (Point2, Point2),
    pub center: Point2,
}

impl Experiment {
    pub fn prepare(&self) -> Result<PreparedData> {
        let env = synth_environment(&self.layout, self.beam_count, self.noise_sd, self.seed)?;
        let scans = scans_from_beams(&env.sweeps, self.free_spacing)?;
        let (train, test) = split_scans(&scans, self.folds, self.fold)?;
        let extent = self.layout.extent();
        let center = Point2::new(0.5 * (extent.0.x + extent.1.x), 0.5 * (extent.0.y + extent.1.y));
        Ok(PreparedData {
            train,
            test,
            extent,
            center,
        })
    }

    pub fn basis_with_spacing(&self, extent: (Point2, Point2), spacing: f64) -> Result<FeatureBasis> {
        let (lo, hi) = extent;
        make_grid_basis(
            lo.x,
            hi.x,
            lo.y,
            hi.y,
            spacing,
            self.gamma_scale / (spacing * spacing),
            false,
        )
    }

    pub fn basis(&self, extent: (Point2, Point2)) -> Result<FeatureBasis> {
        self.basis_with_spacing(extent, self.spacing)
    }
}

/// Test AUC for each held-out fold of a jointly trained map.
pub fn kfold_auc(exp: &Experiment) -> Result<Vec<f64>> {
    (0..exp.folds)
        .map(|fold| {
            let e = Experiment { fold, ..exp.clone() };
            let data = e.prepare()?;
            let basis = e.basis(data.extent)?;
            let (map, _) = train_joint(&data.train, &basis, &e.train)?;
            eval::auc(&score_map(&map, &basis, &data.test)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `fast-bhm`, `grid-f64` or `grid-u8`.
    pub representation: String,
    /// Weight count for Fast-BHM, cell size in meters for grids.
    pub parameter: f64,
    pub bytes: usize,
    pub auc: f64,
}

/// Bytes-versus-AUC table over Fast-BHM basis sizes and grid resolutions.
///
/// Fast-BHM rows use a square lattice of about `m` points over the extent,
/// trained by quadrant agents and merged once. Two grid families follow, each
/// in both cell encodings: `grid` ingests the training samples directly, and
/// `bhm-grid` samples each agent's local Fast-BHM (experiment basis) at cell
/// centers and fuses the agents' grids in log-odds.
pub fn size_auc_sweep(
    exp: &Experiment,
    data: &PreparedData,
    basis_sizes: &[usize],
    grid_resolutions: &[f64],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    let (lo, hi) = data.extent;
    let width = (hi.x - lo.x).min(hi.y - lo.y);
    for &m in basis_sizes {
        let side = ((m as f64).sqrt().round() as usize).max(2);
        let spacing = width / (side - 1) as f64;
        let basis = exp.basis_with_spacing(data.extent, spacing)?;
        let agents = quadrant_agents(&data.train, data.center, &basis, &exp.train);
        let report = run_simulation(agents, &SimulationPlan::fuse_once(&exp.train), &basis, &exp.train, &[])?;
        let global = report.final_global().expect("one round");
        rows.push(SweepRow {
            representation: "fast-bhm".into(),
            parameter: basis.dim() as f64,
            bytes: model::serialized_size(&basis),
            auc: eval::auc(&score_map(global, &basis, &data.test)?)?,
        });
    }
    if grid_resolutions.is_empty() {
        return Ok(rows);
    }

    let test = flatten(&data.test);
    let labels: Vec<u8> = test.iter().map(|s| s.label()).collect();
    let push_grid = |rows: &mut Vec<SweepRow>, family: &str, grid: &GridMap, res: f64| -> Result<()> {
        for (enc, g) in [(CellEncoding::F64, grid.clone()), (CellEncoding::U8, grid.quantized())] {
            let scores = test.iter().map(|s| g.query_point(&s.point)).collect();
            let suffix = match enc {
                CellEncoding::F64 => "f64",
                CellEncoding::U8 => "u8",
            };
            rows.push(SweepRow {
                representation: format!("{family}-{suffix}"),
                parameter: res,
                bytes: grid.serialized_size(enc),
                auc: eval::auc(&ScoredLabels::new(scores, labels.clone())?)?,
            });
        }
        Ok(())
    };

    let samples = flatten(&data.train);
    for &res in grid_resolutions {
        let mut grid = GridMap::covering(lo.x, hi.x, lo.y, hi.y, res)?;
        grid.ingest_samples(&samples, 0.7, 0.3)?;
        push_grid(&mut rows, "grid", &grid, res)?;
    }

    let basis = exp.basis(data.extent)?;
    let mut agents = quadrant_agents(&data.train, data.center, &basis, &exp.train);
    agents.par_iter_mut().try_for_each(|a| {
        let n = a.scan_queue.len();
        a.train_until(n, &basis, &exp.train)
    })?;
    let locals: Vec<&WeightPosterior> = agents.iter().map(|a| &a.local_map).collect();
    for &res in grid_resolutions {
        let grid = discretize_models(&locals, &basis, data.extent, res)?;
        push_grid(&mut rows, "bhm-grid", &grid, res)?;
    }
    Ok(rows)
}

/// Samples each model at the cell centers of a grid over `extent` and fuses
/// the samples with the log-odds update rule. A model with no evidence near a
/// cell predicts 0.5 there and leaves the cell unchanged.
pub fn discretize_models(
    models: &[&WeightPosterior],
    basis: &FeatureBasis,
    extent: (Point2, Point2),
    resolution: f64,
) -> Result<GridMap> {
    let (lo, hi) = extent;
    let mut grid = GridMap::covering(lo.x, hi.x, lo.y, hi.y, resolution)?;
    for m in models {
        m.check_binding(basis)?;
    }
    let centers = (0..grid.len())
        .map(|c| grid.cell_center(c))
        .collect::<Result<Vec<_>>>()?;
    let probs: Vec<Vec<f64>> = models
        .par_iter()
        .map(|m| centers.iter().map(|p| predict(m, basis, p)).collect())
        .collect();
    for per_model in &probs {
        for (cell, &p) in per_model.iter().enumerate() {
            grid.update_cell(cell, p)?;
        }
    }
    Ok(grid)
}

/// Raster of predicted occupancy as a binary PGM; cell centers are queried.
pub fn render_model_pgm(
    map: &WeightPosterior,
    basis: &FeatureBasis,
    lo: Point2,
    hi: Point2,
    resolution: f64,
) -> Result<Vec<u8>> {
    if !(resolution > 0.0 && hi.x > lo.x && hi.y > lo.y) {
        return Err(config_err("render needs a positive resolution and extent"));
    }
    map.check_binding(basis)?;
    let w = ((hi.x - lo.x) / resolution - 1e-9).ceil().max(1.0) as usize;
    let h = ((hi.y - lo.y) / resolution - 1e-9).ceil().max(1.0) as usize;
    let mut probs = Vec::with_capacity(w * h);
    for iy in (0..h).rev() {
        for ix in 0..w {
            let p = Point2::new(
                lo.x + (ix as f64 + 0.5) * resolution,
                lo.y + (iy as f64 + 0.5) * resolution,
            );
            probs.push(predict(map, basis, &p));
        }
    }
    Ok(pgm_bytes(w, h, &probs))
}
