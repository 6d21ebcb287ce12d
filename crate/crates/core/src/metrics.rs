//! Segmentation evaluation: per-class semantic scores and matched instance scores.
//!
//! Ratios with an empty denominator are `None`, never `0` or `1`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::assignment::{assignment_weight, max_weight_assignment};
use crate::error::{Error, Result};
use crate::model::SegmentationResult;

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class_id: u32,
    /// Points predicted as this class.
    pub predicted: usize,
    /// Points of this class in the ground truth.
    pub truth: usize,
    pub intersection: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemanticReport {
    pub classes: Vec<ClassMetrics>,
}

impl SemanticReport {
    pub fn class(&self, class_id: u32) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }
}

pub fn semantic_metrics(pred: &[u32], truth: &[u32], classes: &[u32]) -> Result<SemanticReport> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let classes = classes
        .iter()
        .map(|&class_id| {
            let mut predicted = 0;
            let mut in_truth = 0;
            let mut intersection = 0;
            for (&p, &t) in pred.iter().zip(truth) {
                predicted += (p == class_id) as usize;
                in_truth += (t == class_id) as usize;
                intersection += (p == class_id && t == class_id) as usize;
            }
            ClassMetrics {
                class_id,
                predicted,
                truth: in_truth,
                intersection,
                precision: ratio(intersection, predicted),
                recall: ratio(intersection, in_truth),
                iou: ratio(intersection, predicted + in_truth - intersection),
            }
        })
        .collect();
    Ok(SemanticReport { classes })
}

/// Borrowed per-point instance and class ids.
#[derive(Debug, Clone, Copy)]
pub struct LabeledPoints<'a> {
    pub instance_ids: &'a [u32],
    pub class_ids: &'a [u32],
}

impl<'a> From<&'a SegmentationResult> for LabeledPoints<'a> {
    fn from(r: &'a SegmentationResult) -> Self {
        Self {
            instance_ids: r.instance_ids(),
            class_ids: r.class_ids(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InstanceSummary {
    pub id: u32,
    pub class_id: u32,
    pub point_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub pred: u32,
    pub truth: u32,
    pub class_id: u32,
    pub intersection: usize,
    pub iou: f64,
}

/// One-to-one pairing of predicted and true instances of the same class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceMatching {
    pub pred: Vec<InstanceSummary>,
    pub truth: Vec<InstanceSummary>,
    /// Sorted by predicted id. Every pair has positive IoU.
    pub pairs: Vec<MatchedPair>,
}

impl InstanceMatching {
    pub fn total_iou(&self) -> f64 {
        self.pairs.iter().map(|p| p.iou).sum()
    }
}

fn collect_instances(points: LabeledPoints<'_>) -> Result<BTreeMap<u32, InstanceSummary>> {
    let mut out: BTreeMap<u32, InstanceSummary> = BTreeMap::new();
    for (&id, &class_id) in points.instance_ids.iter().zip(points.class_ids) {
        if id == 0 {
            continue;
        }
        let entry = out.entry(id).or_insert(InstanceSummary {
            id,
            class_id,
            point_count: 0,
        });
        if entry.class_id != class_id {
            return Err(Error::InconsistentInstanceClass {
                instance: id,
                first: entry.class_id,
                second: class_id,
            });
        }
        entry.point_count += 1;
    }
    Ok(out)
}

/// Matches instances class by class, maximizing the sum of IoUs.
///
/// Among matchings with the same total, the one whose per-prediction truth ids
/// (in ascending prediction order) are lexicographically smallest wins.
pub fn match_instances(pred: LabeledPoints<'_>, truth: LabeledPoints<'_>) -> Result<InstanceMatching> {
    let n = pred.instance_ids.len();
    if truth.instance_ids.len() != n || pred.class_ids.len() != n || truth.class_ids.len() != n {
        return Err(Error::LengthMismatch {
            pred: pred.instance_ids.len(),
            truth: truth.instance_ids.len(),
        });
    }
    let pred_inst = collect_instances(pred)?;
    let truth_inst = collect_instances(truth)?;

    let mut intersections: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for i in 0..n {
        let (p, t) = (pred.instance_ids[i], truth.instance_ids[i]);
        if p != 0 && t != 0 && pred.class_ids[i] == truth.class_ids[i] {
            *intersections.entry((p, t)).or_default() += 1;
        }
    }

    let classes: BTreeSet<u32> = pred_inst
        .values()
        .chain(truth_inst.values())
        .map(|s| s.class_id)
        .collect();
    let mut pairs = Vec::new();
    for class_id in classes {
        let preds: Vec<&InstanceSummary> =
            pred_inst.values().filter(|s| s.class_id == class_id).collect();
        let truths: Vec<&InstanceSummary> =
            truth_inst.values().filter(|s| s.class_id == class_id).collect();
        if preds.is_empty() || truths.is_empty() {
            continue;
        }
        let inter = |p: &InstanceSummary, t: &InstanceSummary| {
            intersections.get(&(p.id, t.id)).copied().unwrap_or(0)
        };
        let weights: Vec<Vec<f64>> = preds
            .iter()
            .map(|p| {
                truths
                    .iter()
                    .map(|t| {
                        let i = inter(p, t);
                        i as f64 / (p.point_count + t.point_count - i) as f64
                    })
                    .collect()
            })
            .collect();
        for (r, c) in lexicographic_optimum(&weights).into_iter().enumerate() {
            if let Some(c) = c {
                pairs.push(MatchedPair {
                    pred: preds[r].id,
                    truth: truths[c].id,
                    class_id,
                    intersection: inter(preds[r], truths[c]),
                    iou: weights[r][c],
                });
            }
        }
    }
    pairs.sort_by_key(|p| p.pred);
    Ok(InstanceMatching {
        pred: pred_inst.into_values().collect(),
        truth: truth_inst.into_values().collect(),
        pairs,
    })
}

/// Best total over the given rows and columns, zero-weight pairs contributing nothing.
fn sub_optimum(weights: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> (f64, Vec<Option<usize>>) {
    if rows.is_empty() || cols.is_empty() {
        return (0.0, vec![None; rows.len()]);
    }
    let sub: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| weights[r][c]).collect())
        .collect();
    let a = max_weight_assignment(&sub);
    let total = assignment_weight(&sub, &a);
    let mapped = a
        .into_iter()
        .enumerate()
        .map(|(k, c)| c.filter(|&c| sub[k][c] > 0.0).map(|c| cols[c]))
        .collect();
    (total, mapped)
}

/// Optimal positive-weight matching, lexicographically smallest per row (unmatched sorts last).
fn lexicographic_optimum(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let all_rows: Vec<usize> = (0..rows).collect();
    let all_cols: Vec<usize> = (0..cols).collect();
    let (total, mut completion) = sub_optimum(weights, &all_rows, &all_cols);
    let eps = 1e-9 * total.max(1.0);

    let mut fixed = 0.0;
    let mut used = vec![false; cols];
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        // `completion[0]` is this row's choice in a known optimal completion.
        let incumbent = completion[0];
        let rest_rows: Vec<usize> = (r + 1..rows).collect();
        let limit = incumbent.unwrap_or(cols);
        let mut chosen = incumbent;
        let mut next_completion = completion[1..].to_vec();
        for c in 0..limit {
            if used[c] || weights[r][c] <= 0.0 {
                continue;
            }
            let rest_cols: Vec<usize> = (0..cols).filter(|&k| !used[k] && k != c).collect();
            let (rest, assignment) = sub_optimum(weights, &rest_rows, &rest_cols);
            if fixed + weights[r][c] + rest >= total - eps {
                chosen = Some(c);
                next_completion = assignment;
                break;
            }
        }
        if let Some(c) = chosen {
            fixed += weights[r][c];
            used[c] = true;
        }
        out.push(chosen);
        completion = next_completion;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRow {
    pub class_id: u32,
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Matched pairs at or above the threshold.
    pub matches: Vec<MatchedPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceReport {
    pub threshold: f64,
    pub rows: Vec<InstanceRow>,
}

impl InstanceReport {
    pub fn class(&self, class_id: u32) -> Option<&InstanceRow> {
        self.rows.iter().find(|r| r.class_id == class_id)
    }
}

/// Instance precision and recall per class at one IoU threshold.
///
/// A matched pair counts as a true positive when its IoU is at least `threshold`.
pub fn instance_pr(matching: &InstanceMatching, threshold: f64) -> Result<InstanceReport> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "IoU threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let classes: BTreeSet<u32> = matching
        .pred
        .iter()
        .chain(&matching.truth)
        .map(|s| s.class_id)
        .collect();
    let rows = classes
        .into_iter()
        .map(|class_id| {
            let n_pred = matching.pred.iter().filter(|s| s.class_id == class_id).count();
            let n_truth = matching.truth.iter().filter(|s| s.class_id == class_id).count();
            let matches: Vec<MatchedPair> = matching
                .pairs
                .iter()
                .filter(|p| p.class_id == class_id && p.iou >= threshold)
                .copied()
                .collect();
            let tp = matches.len();
            InstanceRow {
                class_id,
                threshold,
                tp,
                fp: n_pred - tp,
                fn_count: n_truth - tp,
                precision: ratio(tp, n_pred),
                recall: ratio(tp, n_truth),
                matches,
            }
        })
        .collect();
    Ok(InstanceReport { threshold, rows })
}

/// IoU thresholds reported by default.
pub const DEFAULT_IOU_THRESHOLDS: [f64; 2] = [0.5, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub semantic: SemanticReport,
    pub matching: InstanceMatching,
    pub instance: Vec<InstanceReport>,
}

/// Semantic metrics for `classes` plus instance metrics at every threshold.
pub fn evaluate(
    pred: LabeledPoints<'_>,
    truth: LabeledPoints<'_>,
    classes: &[u32],
    thresholds: &[f64],
) -> Result<Evaluation> {
    let semantic = semantic_metrics(pred.class_ids, truth.class_ids, classes)?;
    let matching = match_instances(pred, truth)?;
    let mut instance = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let mut report = instance_pr(&matching, t)?;
        report.rows.retain(|r| classes.contains(&r.class_id));
        instance.push(report);
    }
    Ok(Evaluation {
        semantic,
        matching,
        instance,
    })
}
