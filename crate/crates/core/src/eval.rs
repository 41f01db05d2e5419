//! Evaluation metrics: exact ROC AUC, precision/recall at a threshold, and
//! byte-exact model size accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridmap::GridMap;
use crate::model;

/// Scores paired with binary ground-truth labels (1 = occupied).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabels {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl ScoredLabels {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Argument(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::Argument("no scored samples".into()));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Argument("labels must be 0 or 1".into()));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Argument("NaN score".into()));
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

/// Area under the ROC curve as the normalized Mann-Whitney U statistic,
/// ties counted one half. Runs in `O(n log n)` via mid-ranks.
pub fn auc(sl: &ScoredLabels) -> Result<f64> {
    let n_pos = sl.positives();
    let n_neg = sl.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::MetricUndefined(
            "AUC needs at least one positive and one negative label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..sl.len()).collect();
    order.sort_by(|&a, &b| sl.scores[a].total_cmp(&sl.scores[b]));

    // ranks are 1-based; a tie group spanning [i, j) shares rank (i + j + 1) / 2
    let mut pos_rank_sum2 = 0u128; // twice the rank sum, kept integral
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && sl.scores[order[j]] == sl.scores[order[i]] {
            j += 1;
        }
        let twice_rank = (i + j + 1) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| sl.labels[k] == 1).count() as u128;
        pos_rank_sum2 += twice_rank * pos_in_group;
        i = j;
    }
    let np = n_pos as u128;
    let twice_u = pos_rank_sum2 - np * (np + 1);
    Ok(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Precision and recall with prediction `score >= threshold`.
pub fn precision_recall(sl: &ScoredLabels, threshold: f64) -> Result<(f64, f64)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Argument(format!("threshold {threshold} not in (0,1)")));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&s, &l) in sl.scores.iter().zip(&sl.labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fp == 0 {
        return Err(Error::MetricUndefined("precision: no positive predictions".into()));
    }
    if tp + fneg == 0 {
        return Err(Error::MetricUndefined("recall: no positive labels".into()));
    }
    Ok((tp as f64 / (tp + fp) as f64, tp as f64 / (tp + fneg) as f64))
}

/// Summary metrics for one scored test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub threshold: f64,
    pub samples: usize,
    pub positives: usize,
}

impl Metrics {
    pub fn compute(sl: &ScoredLabels, threshold: f64) -> Result<Self> {
        let auc = auc(sl)?;
        let (precision, recall) = match precision_recall(sl, threshold) {
            Ok((p, r)) => (Some(p), Some(r)),
            Err(Error::MetricUndefined(_)) => (None, None),
            Err(e) => return Err(e),
        };
        Ok(Self {
            auc,
            precision,
            recall,
            threshold,
            samples: sl.len(),
            positives: sl.positives(),
        })
    }

    /// Aligned two-column text rendering.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
        let rows = [
            ("auc", format!("{:.4}", self.auc)),
            ("precision", fmt(self.precision)),
            ("recall", fmt(self.recall)),
            ("threshold", format!("{:.2}", self.threshold)),
            ("samples", self.samples.to_string()),
            ("positives", self.positives.to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k:<10} {v:>10}\n")).collect()
    }
}

/// Mean and (population) standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRow {
    pub artifact: String,
    pub bytes: usize,
}

/// Exact byte counts of serialized artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeTable {
    pub rows: Vec<SizeRow>,
}

impl SizeTable {
    pub fn table(&self) -> String {
        let w = self.rows.iter().map(|r| r.artifact.len()).max().unwrap_or(8).max(8);
        let mut s = format!("{:<w$} {:>12}\n", "artifact", "bytes");
        for r in &self.rows {
            s.push_str(&format!("{:<w$} {:>12}\n", r.artifact, r.bytes));
        }
        s
    }
}

/// Validates each serialization and reports its exact length.
pub fn model_size_report(model_bytes: &[u8], grids: &[(&str, &[u8])]) -> Result<SizeTable> {
    model::deserialize(model_bytes)?;
    let mut rows = vec![SizeRow {
        artifact: "fast-bhm".into(),
        bytes: model_bytes.len(),
    }];
    for (name, bytes) in grids {
        GridMap::deserialize(bytes)?;
        rows.push(SizeRow {
            artifact: (*name).to_string(),
            bytes: bytes.len(),
        });
    }
    Ok(SizeTable { rows })
}
