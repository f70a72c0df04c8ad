//! Metrics, threshold sweeps and runtime benchmarks.
//!
//! A matched pair counts as a true positive when both sides share the
//! ground-truth visual category (pair-level counting); absent/new are scored
//! as set membership. The F1 of two empty sets is 1.0 so scenes without
//! additions or removals are not penalized; a nonempty prediction against an
//! empty truth (or vice versa) scores 0.0.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_with_embeddings, node_embeddings, ClusterConfig, ClusterError};
use crate::embedding::EmbeddingModel;
use crate::matching::{detect_changes, greedy_with_embeddings, MatchConfig, MatchError};
use crate::scene::{ChangeReport, SceneSnapshot};
use crate::scenegen::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    React,
    Greedy,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::React => "react",
            Method::Greedy => "greedy",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "react" => Some(Method::React),
            "greedy" => Some(Method::Greedy),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub method: Method,
    pub gamma: f64,
    pub f1_matched: f64,
    pub f1_new: f64,
    pub f1_absent: f64,
    pub sum_distance: f64,
}

impl EvalResult {
    pub fn aggregate_f1(&self) -> f64 {
        self.f1_matched + self.f1_new + self.f1_absent
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub f1_matched: f64,
    pub f1_new: f64,
    pub f1_absent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    UnknownInstance { instance_id: String },
    Cluster(ClusterError),
    Match(MatchError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::UnknownInstance { instance_id } => write!(
                f,
                "instance {instance_id} is not covered by the ground truth (session mismatch?)"
            ),
            EvalError::Cluster(e) => write!(f, "{e}"),
            EvalError::Match(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<ClusterError> for EvalError {
    fn from(e: ClusterError) -> Self {
        EvalError::Cluster(e)
    }
}

impl From<MatchError> for EvalError {
    fn from(e: MatchError) -> Self {
        EvalError::Match(e)
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// F1 of predicted vs truth as plain set membership.
pub fn f1_sets(predicted: &BTreeSet<String>, truth: &BTreeSet<String>) -> f64 {
    if predicted.is_empty() && truth.is_empty() {
        return 1.0;
    }
    if predicted.is_empty() || truth.is_empty() {
        return 0.0;
    }
    let tp = predicted.intersection(truth).count() as f64;
    f1(tp / predicted.len() as f64, tp / truth.len() as f64)
}

/// Scores one change report against ground truth.
pub fn score(report: &ChangeReport, gt: &GroundTruth) -> Result<Scores, EvalError> {
    let ref_labels = &gt.session_labels[0];
    let cur_labels = &gt.session_labels[1];
    let mut tp = 0usize;
    for pair in &report.matched {
        let ref_cat = ref_labels
            .get(&pair.ref_instance_id)
            .ok_or_else(|| EvalError::UnknownInstance {
                instance_id: pair.ref_instance_id.clone(),
            })?;
        let cur_cat = cur_labels
            .get(&pair.cur_instance_id)
            .ok_or_else(|| EvalError::UnknownInstance {
                instance_id: pair.cur_instance_id.clone(),
            })?;
        if ref_cat == cur_cat {
            tp += 1;
        }
    }
    let predicted_pairs = report.matched.len();
    let truth_pairs = gt.matched.len();
    let f1_matched = if predicted_pairs == 0 && truth_pairs == 0 {
        1.0
    } else if predicted_pairs == 0 || truth_pairs == 0 {
        0.0
    } else {
        f1(
            tp as f64 / predicted_pairs as f64,
            tp as f64 / truth_pairs as f64,
        )
    };
    Ok(Scores {
        f1_matched,
        f1_new: f1_sets(&report.new, &gt.new),
        f1_absent: f1_sets(&report.absent, &gt.absent),
    })
}

/// The standard 26-point threshold grid 0.0, 0.2, ..., 5.0.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=25).map(|i| i as f64 / 5.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub best_gamma: f64,
    pub best_aggregate_f1: f64,
    pub best_sum_distance: f64,
    /// Number of grid points within 1% of the method's best aggregate F1.
    pub plateau_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub rows: Vec<EvalResult>,
    pub summaries: Vec<MethodSummary>,
}

/// Runs every method at every gamma. Node embeddings are computed once per
/// snapshot and shared across the whole grid. Rows are ordered by (method,
/// gamma); the optimal gamma per method maximizes the aggregated F1 with
/// ties resolved toward the lower gamma.
pub fn sweep(
    reference: &SceneSnapshot,
    current: &SceneSnapshot,
    gt: &GroundTruth,
    model: &EmbeddingModel,
    methods: &[Method],
    grid: &[f64],
) -> Result<SweepOutput, EvalError> {
    let ref_nodes = node_embeddings(reference, model)?;
    let cur_nodes = node_embeddings(current, model)?;

    let mut rows = Vec::with_capacity(methods.len() * grid.len());
    for &method in methods {
        for &gamma in grid {
            let report = match method {
                Method::React => {
                    let cluster_config = ClusterConfig::new(gamma)?;
                    let ref_clustered =
                        cluster_with_embeddings(reference, &ref_nodes, &cluster_config)?;
                    let cur_clustered =
                        cluster_with_embeddings(current, &cur_nodes, &cluster_config)?;
                    detect_changes(&ref_clustered, &cur_clustered, &MatchConfig::new(gamma)?)?
                }
                Method::Greedy => greedy_with_embeddings(
                    reference,
                    current,
                    &ref_nodes,
                    &cur_nodes,
                    &MatchConfig::new(gamma)?,
                )?,
            };
            let scores = score(&report, gt)?;
            rows.push(EvalResult {
                method,
                gamma,
                f1_matched: scores.f1_matched,
                f1_new: scores.f1_new,
                f1_absent: scores.f1_absent,
                sum_distance: report.total_distance,
            });
        }
    }

    let summaries = methods
        .iter()
        .map(|&method| {
            let method_rows: Vec<&EvalResult> =
                rows.iter().filter(|r| r.method == method).collect();
            // Rows are gamma-ascending; strict > keeps the lowest gamma on ties.
            let mut best = method_rows[0];
            for row in &method_rows[1..] {
                if row.aggregate_f1() > best.aggregate_f1() {
                    best = row;
                }
            }
            let threshold = best.aggregate_f1() * 0.99;
            MethodSummary {
                method,
                best_gamma: best.gamma,
                best_aggregate_f1: best.aggregate_f1(),
                best_sum_distance: best.sum_distance,
                plateau_width: method_rows
                    .iter()
                    .filter(|r| r.aggregate_f1() >= threshold)
                    .count(),
            }
        })
        .collect();

    Ok(SweepOutput { rows, summaries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub masks: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
}

/// Wall-clock embedding latency per frame for each mask count: `reps`
/// repetitions, reporting median and p95 milliseconds.
pub fn bench_embedding(
    model: &EmbeddingModel,
    mask_counts: &[usize],
    reps: usize,
    seed: u64,
) -> Vec<BenchRow> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let reps = reps.max(1);
    let mut rows = Vec::with_capacity(mask_counts.len());
    for &masks in mask_counts {
        let descriptors: Vec<Vec<f64>> = (0..masks)
            .map(|_| {
                (0..model.input_dim())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        // Warmup.
        for d in &descriptors {
            let _ = model.embed(d);
        }
        let mut samples_ms = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            for d in &descriptors {
                let out = model.embed(d).expect("bench descriptors are finite");
                std::hint::black_box(out);
            }
            samples_ms.push(start.elapsed().as_secs_f64() * 1e3);
        }
        samples_ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median_ms = if reps % 2 == 1 {
            samples_ms[reps / 2]
        } else {
            0.5 * (samples_ms[reps / 2 - 1] + samples_ms[reps / 2])
        };
        let p95_idx = ((reps as f64 * 0.95).ceil() as usize).clamp(1, reps) - 1;
        rows.push(BenchRow {
            masks,
            median_ms,
            p95_ms: samples_ms[p95_idx],
        });
    }
    rows
}

/// Rand index between two labelings of the same item set: the fraction of
/// item pairs on which the labelings agree (together vs apart). 1.0 when the
/// partitions are identical; degenerate single-item sets score 1.0.
pub fn rand_index(
    a: &BTreeMap<String, String>,
    b: &BTreeMap<String, String>,
) -> Option<f64> {
    if a.len() != b.len() || a.keys().ne(b.keys()) {
        return None;
    }
    let keys: Vec<&String> = a.keys().collect();
    let n = keys.len();
    if n < 2 {
        return Some(1.0);
    }
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let together_a = a[keys[i]] == a[keys[j]];
            let together_b = b[keys[i]] == b[keys[j]];
            if together_a == together_b {
                agree += 1;
            }
            total += 1;
        }
    }
    Some(agree as f64 / total as f64)
}

/// Cluster partition of a snapshot as an instance -> cluster-id labeling.
pub fn partition_labels(snapshot: &SceneSnapshot) -> BTreeMap<String, String> {
    let mut labels = BTreeMap::new();
    for cluster in &snapshot.clusters {
        for member in &cluster.members {
            labels.insert(member.clone(), cluster.cluster_id.clone());
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::MatchedPair;

    fn gt_fixture() -> GroundTruth {
        GroundTruth {
            schema_version: 1,
            session_labels: vec![
                [
                    ("r1".to_string(), "chair:1".to_string()),
                    ("r2".to_string(), "chair:1".to_string()),
                    ("r3".to_string(), "table:1".to_string()),
                ]
                .into(),
                [
                    ("c1".to_string(), "chair:1".to_string()),
                    ("c2".to_string(), "chair:1".to_string()),
                    ("c3".to_string(), "table:1".to_string()),
                    ("c4".to_string(), "chair:2".to_string()),
                ]
                .into(),
            ],
            matched: vec![
                ("r1".to_string(), "c1".to_string()),
                ("r2".to_string(), "c2".to_string()),
            ],
            absent: ["r3".to_string()].into(),
            new: ["c3".to_string(), "c4".to_string()].into(),
            displacement: BTreeMap::new(),
            view_truth: vec![BTreeMap::new(), BTreeMap::new()],
        }
    }

    fn pair(r: &str, c: &str) -> MatchedPair {
        MatchedPair {
            ref_instance_id: r.to_string(),
            cur_instance_id: c.to_string(),
            travel_distance: 0.0,
        }
    }

    #[test]
    fn perfect_report_scores_ones() {
        let gt = gt_fixture();
        let report = ChangeReport {
            matched: vec![pair("r1", "c1"), pair("r2", "c2")],
            absent: gt.absent.clone(),
            new: gt.new.clone(),
            total_distance: 0.0,
        };
        let s = score(&report, &gt).unwrap();
        assert_eq!((s.f1_matched, s.f1_new, s.f1_absent), (1.0, 1.0, 1.0));
        // Pair identity within a category does not matter: swapping the two
        // identical chairs scores the same.
        let swapped = ChangeReport {
            matched: vec![pair("r1", "c2"), pair("r2", "c1")],
            ..report
        };
        assert_eq!(score(&swapped, &gt).unwrap().f1_matched, 1.0);
    }

    #[test]
    fn empty_sets_on_both_sides_score_one() {
        let mut gt = gt_fixture();
        gt.new.clear();
        let report = ChangeReport {
            matched: vec![pair("r1", "c1"), pair("r2", "c2")],
            absent: gt.absent.clone(),
            new: BTreeSet::new(),
            total_distance: 0.0,
        };
        assert_eq!(score(&report, &gt).unwrap().f1_new, 1.0);
    }

    #[test]
    fn one_sided_empty_scores_zero() {
        let gt = gt_fixture();
        let report = ChangeReport {
            matched: vec![pair("r1", "c1"), pair("r2", "c2")],
            absent: gt.absent.clone(),
            new: BTreeSet::new(), // truth has two
            total_distance: 0.0,
        };
        assert_eq!(score(&report, &gt).unwrap().f1_new, 0.0);
    }

    #[test]
    fn category_crossing_match_drops_f1_per_confusion_oracle() {
        let gt = gt_fixture();
        // One good pair, one category-crossing pair (chair matched to table).
        let report = ChangeReport {
            matched: vec![pair("r1", "c1"), pair("r3", "c2")],
            absent: ["r2".to_string()].into(),
            new: gt.new.clone(),
            total_distance: 0.0,
        };
        let s = score(&report, &gt).unwrap();
        // Hand-counted confusion: TP = 1, predicted = 2, truth pairs = 2.
        // P = 1/2, R = 1/2, F1 = 1/2.
        assert!((s.f1_matched - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_instance_is_session_mismatch() {
        let gt = gt_fixture();
        let report = ChangeReport {
            matched: vec![pair("zzz", "c1")],
            absent: BTreeSet::new(),
            new: BTreeSet::new(),
            total_distance: 0.0,
        };
        assert!(matches!(
            score(&report, &gt).unwrap_err(),
            EvalError::UnknownInstance { .. }
        ));
    }

    #[test]
    fn gamma_grid_has_26_clean_points() {
        let grid = default_gamma_grid();
        assert_eq!(grid.len(), 26);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[1], 0.2);
        assert_eq!(grid[3], 0.6);
        assert_eq!(grid[25], 5.0);
    }

    #[test]
    fn rand_index_perfect_and_degenerate() {
        let a: BTreeMap<String, String> = [
            ("x".to_string(), "1".to_string()),
            ("y".to_string(), "1".to_string()),
            ("z".to_string(), "2".to_string()),
        ]
        .into();
        let b: BTreeMap<String, String> = [
            ("x".to_string(), "a".to_string()),
            ("y".to_string(), "a".to_string()),
            ("z".to_string(), "b".to_string()),
        ]
        .into();
        assert_eq!(rand_index(&a, &b), Some(1.0));
        let mut c = b.clone();
        c.insert("z".to_string(), "a".to_string());
        let ri = rand_index(&a, &c).unwrap();
        assert!(ri < 1.0);
        let single: BTreeMap<String, String> = [("x".to_string(), "1".to_string())].into();
        assert_eq!(rand_index(&single, &single), Some(1.0));
    }

    #[test]
    fn bench_zero_masks_is_near_zero() {
        let model = EmbeddingModel::seeded(&[16, 8], true, 1.0, 1).unwrap();
        let rows = bench_embedding(&model, &[0, 4], 5, 3);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].median_ms < rows[1].median_ms + 1e-9);
        assert!(rows[0].median_ms < 0.5);
    }
}
