//! Cross-session change detection.
//!
//! Clusters are matched per semantic class by visual difference (pairs above
//! gamma are forbidden), then instances inside each matched cluster pair are
//! assigned by minimizing total travel distance. Whatever remains unmatched
//! becomes absent (reference side) or new (current side). A greedy baseline
//! that skips clustering entirely is included for comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assignment::{solve_lsa, AssignError, CostMatrix};
use crate::clustering::{node_embeddings, visual_difference, ClusterError};
use crate::embedding::{squared_distance, EmbeddingModel};
use crate::scene::{euclidean, ChangeReport, MatchedPair, Point3, SceneSnapshot};

/// Spatial distance plugged into the travel-distance objective. Must be
/// non-negative, symmetric and zero at identical positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Euclidean,
}

impl DistanceMetric {
    pub fn between(&self, a: &Point3, b: &Point3) -> f64 {
        match self {
            DistanceMetric::Euclidean => euclidean(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub gamma: f64,
    pub distance: DistanceMetric,
}

impl MatchConfig {
    pub fn new(gamma: f64) -> Result<Self, MatchError> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(MatchError::BadGamma { gamma });
        }
        Ok(Self {
            gamma,
            distance: DistanceMetric::Euclidean,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatchError {
    BadGamma { gamma: f64 },
    NotClustered { session_id: String },
    UnknownCluster { cluster_id: String },
    Cluster(ClusterError),
    Assignment(AssignError),
}

impl fmt::Display for MatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchError::BadGamma { gamma } => {
                write!(f, "gamma must be finite and >= 0, got {gamma}")
            }
            MatchError::NotClustered { session_id } => {
                write!(f, "snapshot {session_id} has not been clustered")
            }
            MatchError::UnknownCluster { cluster_id } => {
                write!(f, "cluster {cluster_id} not found in snapshot")
            }
            MatchError::Cluster(e) => write!(f, "clustering error: {e}"),
            MatchError::Assignment(e) => write!(f, "assignment error: {e}"),
        }
    }
}

impl std::error::Error for MatchError {}

impl From<ClusterError> for MatchError {
    fn from(e: ClusterError) -> Self {
        MatchError::Cluster(e)
    }
}

impl From<AssignError> for MatchError {
    fn from(e: AssignError) -> Self {
        MatchError::Assignment(e)
    }
}

/// Minimum-cost matching over a gated cost table: entries above the gate are
/// forbidden outright, and unmatched rows/columns are allowed. Maximizes the
/// number of admissible pairs first, then minimizes their summed cost, by
/// padding the table with per-element "stay unmatched" slots priced above
/// any real total and handing the square problem to the solver.
fn gated_min_cost_pairs(
    costs: &[Vec<f64>],
    gate: f64,
) -> Result<Vec<(usize, usize)>, MatchError> {
    let r = costs.len();
    let c = costs.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 {
        return Ok(Vec::new());
    }
    let finite_sum: f64 = costs
        .iter()
        .flatten()
        .filter(|v| v.is_finite() && **v <= gate)
        .sum();
    let unmatched_price = finite_sum + 1.0;
    let side = r + c;
    let padded = CostMatrix::from_fn(side, side, |i, j| {
        match (i < r, j < c) {
            (true, true) => {
                let v = costs[i][j];
                if v.is_finite() && v <= gate {
                    v
                } else {
                    f64::INFINITY
                }
            }
            // Row i unmatched: its own dummy column only.
            (true, false) => {
                if j - c == i {
                    unmatched_price
                } else {
                    f64::INFINITY
                }
            }
            // Column j unmatched: its own dummy row only.
            (false, true) => {
                if i - r == j {
                    unmatched_price
                } else {
                    f64::INFINITY
                }
            }
            (false, false) => 0.0,
        }
    })?;
    let solution = solve_lsa(&padded)?;
    Ok(solution
        .pairs
        .into_iter()
        .filter(|&(i, j)| i < r && j < c)
        .collect())
}

/// Pairs up clusters of the same semantic class across two clustered
/// snapshots. Within each class the pairing minimizes summed visual
/// difference; pairs with difference above gamma never match. Clusters left
/// unmatched feed the absent/new sets downstream.
pub fn match_clusters(
    reference: &SceneSnapshot,
    current: &SceneSnapshot,
    config: &MatchConfig,
) -> Result<Vec<(String, String)>, MatchError> {
    let mut by_class_ref: BTreeMap<&str, Vec<&crate::scene::InstanceCluster>> = BTreeMap::new();
    for cluster in &reference.clusters {
        by_class_ref
            .entry(cluster.semantic_class.as_str())
            .or_default()
            .push(cluster);
    }
    let mut by_class_cur: BTreeMap<&str, Vec<&crate::scene::InstanceCluster>> = BTreeMap::new();
    for cluster in &current.clusters {
        by_class_cur
            .entry(cluster.semantic_class.as_str())
            .or_default()
            .push(cluster);
    }

    let mut pairs = Vec::new();
    for (class, ref_clusters) in &mut by_class_ref {
        let Some(cur_clusters) = by_class_cur.get_mut(class) else {
            continue;
        };
        ref_clusters.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));
        cur_clusters.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));
        let mut table = Vec::with_capacity(ref_clusters.len());
        for rc in ref_clusters.iter() {
            let mut row = Vec::with_capacity(cur_clusters.len());
            for cc in cur_clusters.iter() {
                row.push(visual_difference(rc, cc)?);
            }
            table.push(row);
        }
        for (i, j) in gated_min_cost_pairs(&table, config.gamma)? {
            pairs.push((
                ref_clusters[i].cluster_id.clone(),
                cur_clusters[j].cluster_id.clone(),
            ));
        }
    }
    pairs.sort();
    Ok(pairs)
}

/// Instance assignment inside one matched cluster pair: the smaller side is
/// fully assigned by minimizing total travel distance; surplus reference
/// instances become absent, surplus current instances new.
pub fn match_instances(
    reference: &SceneSnapshot,
    current: &SceneSnapshot,
    ref_cluster_id: &str,
    cur_cluster_id: &str,
    config: &MatchConfig,
) -> Result<Vec<MatchedPair>, MatchError> {
    let ref_cluster = reference
        .cluster(ref_cluster_id)
        .ok_or_else(|| MatchError::UnknownCluster {
            cluster_id: ref_cluster_id.to_string(),
        })?;
    let cur_cluster = current
        .cluster(cur_cluster_id)
        .ok_or_else(|| MatchError::UnknownCluster {
            cluster_id: cur_cluster_id.to_string(),
        })?;

    let ref_members: Vec<&str> = ref_cluster.members.iter().map(String::as_str).collect();
    let cur_members: Vec<&str> = cur_cluster.members.iter().map(String::as_str).collect();
    let ref_pos: Vec<Point3> = ref_members
        .iter()
        .map(|id| reference.instance(id).map(|i| i.position))
        .collect::<Option<_>>()
        .ok_or_else(|| MatchError::UnknownCluster {
            cluster_id: ref_cluster_id.to_string(),
        })?;
    let cur_pos: Vec<Point3> = cur_members
        .iter()
        .map(|id| current.instance(id).map(|i| i.position))
        .collect::<Option<_>>()
        .ok_or_else(|| MatchError::UnknownCluster {
            cluster_id: cur_cluster_id.to_string(),
        })?;

    let cost = CostMatrix::from_fn(ref_members.len(), cur_members.len(), |i, j| {
        config.distance.between(&ref_pos[i], &cur_pos[j])
    })?;
    let solution = solve_lsa(&cost)?;
    let mut pairs: Vec<MatchedPair> = solution
        .pairs
        .into_iter()
        .map(|(i, j)| MatchedPair {
            ref_instance_id: ref_members[i].to_string(),
            cur_instance_id: cur_members[j].to_string(),
            travel_distance: cost.at(i, j),
        })
        .collect();
    pairs.sort_by(|a, b| a.ref_instance_id.cmp(&b.ref_instance_id));
    Ok(pairs)
}

/// Full change detection between two clustered snapshots: cluster matching
/// followed by per-pair instance assignment. The report's partition
/// invariants hold by construction.
pub fn detect_changes(
    reference: &SceneSnapshot,
    current: &SceneSnapshot,
    config: &MatchConfig,
) -> Result<ChangeReport, MatchError> {
    for (snapshot, name) in [(reference, "reference"), (current, "current")] {
        if !snapshot.is_clustered() {
            return Err(MatchError::NotClustered {
                session_id: format!("{} ({name})", snapshot.session_id),
            });
        }
    }

    let cluster_pairs = match_clusters(reference, current, config)?;
    let mut matched = Vec::new();
    for (ref_id, cur_id) in &cluster_pairs {
        matched.extend(match_instances(reference, current, ref_id, cur_id, config)?);
    }
    matched.sort_by(|a, b| a.ref_instance_id.cmp(&b.ref_instance_id));
    finish_report(reference, current, matched)
}

/// Baseline without clustering: repeatedly accepts the unmatched same-class
/// node pair with the smallest visual difference until nothing admissible
/// (<= gamma) remains. Ties break on (ref id, cur id).
pub fn greedy_detect_changes(
    reference: &SceneSnapshot,
    current: &SceneSnapshot,
    model: &EmbeddingModel,
    config: &MatchConfig,
) -> Result<ChangeReport, MatchError> {
    let ref_nodes = node_embeddings(reference, model)?;
    let cur_nodes = node_embeddings(current, model)?;
    greedy_with_embeddings(reference, current, &ref_nodes, &cur_nodes, config)
}

/// Greedy baseline over precomputed node embeddings (used by the sweep so
/// views are embedded once).
pub fn greedy_with_embeddings(
    reference: &SceneSnapshot,
    current: &SceneSnapshot,
    ref_nodes: &BTreeMap<String, Vec<f64>>,
    cur_nodes: &BTreeMap<String, Vec<f64>>,
    config: &MatchConfig,
) -> Result<ChangeReport, MatchError> {
    struct Candidate<'a> {
        difference: f64,
        ref_id: &'a str,
        cur_id: &'a str,
        distance: f64,
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    for ref_inst in &reference.instances {
        let Some(f_ref) = ref_nodes.get(&ref_inst.instance_id) else {
            return Err(ClusterError::MissingNodeEmbedding {
                instance_id: ref_inst.instance_id.clone(),
            }
            .into());
        };
        for cur_inst in &current.instances {
            if cur_inst.semantic_class != ref_inst.semantic_class {
                continue;
            }
            let Some(f_cur) = cur_nodes.get(&cur_inst.instance_id) else {
                return Err(ClusterError::MissingNodeEmbedding {
                    instance_id: cur_inst.instance_id.clone(),
                }
                .into());
            };
            candidates.push(Candidate {
                difference: squared_distance(f_ref, f_cur).map_err(ClusterError::from)?,
                ref_id: &ref_inst.instance_id,
                cur_id: &cur_inst.instance_id,
                distance: config.distance.between(&ref_inst.position, &cur_inst.position),
            });
        }
    }
    candidates.sort_by(|a, b| {
        a.difference
            .total_cmp(&b.difference)
            .then_with(|| a.ref_id.cmp(b.ref_id))
            .then_with(|| a.cur_id.cmp(b.cur_id))
    });

    let mut used_ref: BTreeSet<&str> = BTreeSet::new();
    let mut used_cur: BTreeSet<&str> = BTreeSet::new();
    let mut matched = Vec::new();
    for cand in &candidates {
        if cand.difference > config.gamma {
            break;
        }
        if used_ref.contains(cand.ref_id) || used_cur.contains(cand.cur_id) {
            continue;
        }
        used_ref.insert(cand.ref_id);
        used_cur.insert(cand.cur_id);
        matched.push(MatchedPair {
            ref_instance_id: cand.ref_id.to_string(),
            cur_instance_id: cand.cur_id.to_string(),
            travel_distance: cand.distance,
        });
    }
    matched.sort_by(|a, b| a.ref_instance_id.cmp(&b.ref_instance_id));
    finish_report(reference, current, matched)
}

fn finish_report(
    reference: &SceneSnapshot,
    current: &SceneSnapshot,
    matched: Vec<MatchedPair>,
) -> Result<ChangeReport, MatchError> {
    let matched_ref: BTreeSet<&str> = matched.iter().map(|p| p.ref_instance_id.as_str()).collect();
    let matched_cur: BTreeSet<&str> = matched.iter().map(|p| p.cur_instance_id.as_str()).collect();
    let absent = reference
        .instances
        .iter()
        .filter(|i| !matched_ref.contains(i.instance_id.as_str()))
        .map(|i| i.instance_id.clone())
        .collect();
    let new = current
        .instances
        .iter()
        .filter(|i| !matched_cur.contains(i.instance_id.as_str()))
        .map(|i| i.instance_id.clone())
        .collect();
    // fold from +0.0: an empty f64 sum is -0.0, which leaks into reports.
    let total_distance = matched
        .iter()
        .fold(0.0, |acc, p| acc + p.travel_distance);
    Ok(ChangeReport {
        matched,
        absent,
        new,
        total_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::brute_force_lsa;
    use crate::clustering::{cluster_snapshot, ClusterConfig};
    use crate::embedding::{Activation, Layer};
    use crate::scene::{ObjectInstance, ViewDescriptor};

    fn identity_model(dim: usize) -> EmbeddingModel {
        let weights = (0..dim * dim)
            .map(|i| if i % (dim + 1) == 0 { 1.0 } else { 0.0 })
            .collect();
        EmbeddingModel::from_parts(
            vec![dim, dim],
            vec![Layer {
                weights,
                bias: vec![0.0; dim],
            }],
            Activation::Tanh,
            false,
            1.0,
        )
        .unwrap()
    }

    fn instance(id: &str, class: &str, pos: Point3, descriptor: Vec<f64>) -> ObjectInstance {
        ObjectInstance::new(
            id,
            class,
            pos,
            vec![ViewDescriptor {
                view_id: format!("{id}-v0"),
                frame_index: 0,
                data: descriptor,
            }],
        )
    }

    fn clustered(snapshot: &SceneSnapshot, gamma: f64) -> SceneSnapshot {
        cluster_snapshot(snapshot, &identity_model(2), &ClusterConfig::new(gamma).unwrap())
            .unwrap()
    }

    #[test]
    fn disjoint_classes_match_nothing() {
        let mut reference = SceneSnapshot::new("r", 0);
        reference.instances.push(instance("a", "chair", [0.0; 3], vec![0.0, 0.0]));
        let mut current = SceneSnapshot::new("c", 1);
        current.instances.push(instance("x", "table", [0.0; 3], vec![0.0, 0.0]));
        let reference = clustered(&reference, 0.1);
        let current = clustered(&current, 0.1);
        let config = MatchConfig::new(1.0).unwrap();
        assert!(match_clusters(&reference, &current, &config).unwrap().is_empty());
        let report = detect_changes(&reference, &current, &config).unwrap();
        assert!(report.matched.is_empty());
        assert_eq!(report.absent.len(), 1);
        assert_eq!(report.new.len(), 1);
    }

    #[test]
    fn single_pair_within_gamma_matches() {
        let mut reference = SceneSnapshot::new("r", 0);
        reference.instances.push(instance("a", "chair", [0.0; 3], vec![0.0, 0.0]));
        let mut current = SceneSnapshot::new("c", 1);
        current.instances.push(instance("x", "chair", [1.0, 0.0, 0.0], vec![0.1, 0.0]));
        let reference = clustered(&reference, 0.1);
        let current = clustered(&current, 0.1);
        let config = MatchConfig::new(1.0).unwrap();
        let pairs = match_clusters(&reference, &current, &config).unwrap();
        assert_eq!(pairs.len(), 1);
        let report = detect_changes(&reference, &current, &config).unwrap();
        assert_eq!(report.matched.len(), 1);
        assert!((report.total_distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cluster_pairing_minimizes_summed_difference() {
        // Two chair clusters on each side with crossed visual distances;
        // enumerate both pairings by hand: straight = 0.01 + 0.01,
        // crossed = 0.25 + 0.25. Straight wins.
        let mut reference = SceneSnapshot::new("r", 0);
        reference.instances.push(instance("a", "chair", [0.0; 3], vec![0.0, 0.0]));
        reference.instances.push(instance("b", "chair", [1.0, 0.0, 0.0], vec![1.0, 0.0]));
        let mut current = SceneSnapshot::new("c", 1);
        current.instances.push(instance("x", "chair", [0.0; 3], vec![0.1, 0.0]));
        current.instances.push(instance("y", "chair", [1.0, 0.0, 0.0], vec![0.9, 0.0]));
        let reference = clustered(&reference, 0.1);
        let current = clustered(&current, 0.1);
        let config = MatchConfig::new(1.0).unwrap();
        let pairs = match_clusters(&reference, &current, &config).unwrap();
        assert_eq!(pairs.len(), 2);
        let mut total = 0.0;
        for (rid, cid) in &pairs {
            total += visual_difference(
                reference.cluster(rid).unwrap(),
                current.cluster(cid).unwrap(),
            )
            .unwrap();
        }
        assert!((total - 0.02).abs() < 1e-9);
    }

    #[test]
    fn gamma_gate_blocks_cluster_pairs() {
        let mut reference = SceneSnapshot::new("r", 0);
        reference.instances.push(instance("a", "chair", [0.0; 3], vec![0.0, 0.0]));
        let mut current = SceneSnapshot::new("c", 1);
        current.instances.push(instance("x", "chair", [0.0; 3], vec![3.0, 0.0]));
        let reference = clustered(&reference, 0.1);
        let current = clustered(&current, 0.1);
        // Visual difference is 9, gate at 1: nothing matches.
        let config = MatchConfig::new(1.0).unwrap();
        let report = detect_changes(&reference, &current, &config).unwrap();
        assert!(report.matched.is_empty());
    }

    #[test]
    fn swapped_identical_chairs_cost_nothing() {
        // Positions coincide setwise, so the optimal assignment has cost 0.
        let mut reference = SceneSnapshot::new("r", 0);
        reference.instances.push(instance("a", "chair", [0.0, 0.0, 0.0], vec![0.5, 0.5]));
        reference.instances.push(instance("b", "chair", [2.0, 0.0, 0.0], vec![0.5, 0.5]));
        let mut current = SceneSnapshot::new("c", 1);
        current.instances.push(instance("x", "chair", [2.0, 0.0, 0.0], vec![0.5, 0.5]));
        current.instances.push(instance("y", "chair", [0.0, 0.0, 0.0], vec![0.5, 0.5]));
        let reference = clustered(&reference, 0.5);
        let current = clustered(&current, 0.5);
        let report = detect_changes(&reference, &current, &MatchConfig::new(1.0).unwrap()).unwrap();
        assert_eq!(report.matched.len(), 2);
        assert_eq!(report.total_distance, 0.0);
    }

    #[test]
    fn surplus_members_become_absent_and_assignment_is_optimal() {
        let mut rng = {
            use rand::SeedableRng;
            rand_chacha::ChaCha20Rng::seed_from_u64(40)
        };
        use rand::Rng;
        let mut reference = SceneSnapshot::new("r", 0);
        for i in 0..5 {
            reference.instances.push(instance(
                &format!("r{i}"),
                "chair",
                [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), 0.0],
                vec![0.5, 0.5],
            ));
        }
        let mut current = SceneSnapshot::new("c", 1);
        for i in 0..3 {
            current.instances.push(instance(
                &format!("c{i}"),
                "chair",
                [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), 0.0],
                vec![0.5, 0.5],
            ));
        }
        let reference = clustered(&reference, 0.5);
        let current = clustered(&current, 0.5);
        let config = MatchConfig::new(1.0).unwrap();
        let report = detect_changes(&reference, &current, &config).unwrap();
        assert_eq!(report.matched.len(), 3);
        assert_eq!(report.absent.len(), 2);
        assert!(report.new.is_empty());

        // Oracle: brute force over the full 5x3 distance matrix.
        let cost = CostMatrix::from_fn(5, 3, |i, j| {
            euclidean(
                &reference.instance(&format!("r{i}")).unwrap().position,
                &current.instance(&format!("c{j}")).unwrap().position,
            )
        })
        .unwrap();
        let oracle = brute_force_lsa(&cost).unwrap();
        assert!((report.total_distance - oracle.total_cost).abs() < 1e-9);
    }

    #[test]
    fn greedy_equals_clustered_on_identical_distinct_scene() {
        let model = identity_model(2);
        let mut reference = SceneSnapshot::new("r", 0);
        reference.instances.push(instance("a", "chair", [0.0; 3], vec![0.0, 0.0]));
        reference.instances.push(instance("b", "chair", [1.0, 0.0, 0.0], vec![2.0, 0.0]));
        reference.instances.push(instance("c", "table", [2.0, 0.0, 0.0], vec![4.0, 0.0]));
        let clustered_ref = clustered(&reference, 0.1);
        let config = MatchConfig::new(1.0).unwrap();
        let optimal = detect_changes(&clustered_ref, &clustered_ref, &config).unwrap();
        let greedy = greedy_detect_changes(&reference, &reference, &model, &config).unwrap();
        assert_eq!(optimal, greedy);
        assert_eq!(greedy.total_distance, 0.0);
        assert_eq!(greedy.matched.len(), 3);
    }

    #[test]
    fn greedy_total_distance_never_beats_clustered() {
        // Two identical chairs at opposite table ends, one nudged. Both
        // methods fully match; the clustered assignment minimizes travel.
        let mut reference = SceneSnapshot::new("r", 0);
        reference.instances.push(instance("a", "chair", [0.0, 0.0, 0.0], vec![0.50, 0.0]));
        reference.instances.push(instance("b", "chair", [2.0, 0.0, 0.0], vec![0.52, 0.0]));
        let mut current = SceneSnapshot::new("c", 1);
        // The visually-closest cross pair sits across the table.
        current.instances.push(instance("x", "chair", [0.1, 0.0, 0.0], vec![0.52, 0.0]));
        current.instances.push(instance("y", "chair", [2.0, 0.0, 0.0], vec![0.50, 0.0]));
        let model = identity_model(2);
        let config = MatchConfig::new(1.0).unwrap();
        let optimal = detect_changes(&clustered(&reference, 0.5), &clustered(&current, 0.5), &config).unwrap();
        let greedy = greedy_detect_changes(&reference, &current, &model, &config).unwrap();
        assert_eq!(optimal.matched.len(), 2);
        assert_eq!(greedy.matched.len(), 2);
        assert!(greedy.total_distance >= optimal.total_distance);
        assert!((optimal.total_distance - 0.1).abs() < 1e-9);
        // Greedy paired by appearance and walked both chairs across.
        assert!((greedy.total_distance - 3.9).abs() < 1e-9);
    }

    #[test]
    fn raising_gamma_never_unmatches_greedy_pairs() {
        let model = identity_model(2);
        let mut reference = SceneSnapshot::new("r", 0);
        let mut current = SceneSnapshot::new("c", 1);
        for i in 0..4 {
            let d = i as f64 * 0.4;
            reference.instances.push(instance(
                &format!("r{i}"),
                "chair",
                [i as f64, 0.0, 0.0],
                vec![d, 0.0],
            ));
            current.instances.push(instance(
                &format!("c{i}"),
                "chair",
                [i as f64, 0.5, 0.0],
                vec![d + 0.1, 0.0],
            ));
        }
        let mut last = 0;
        for step in 0..=10 {
            let gamma = step as f64 * 0.05;
            let report = greedy_detect_changes(
                &reference,
                &current,
                &model,
                &MatchConfig::new(gamma).unwrap(),
            )
            .unwrap();
            assert!(report.matched.len() >= last);
            last = report.matched.len();
        }
        assert_eq!(last, 4);
    }

    #[test]
    fn reports_partition_both_snapshots() {
        let mut reference = SceneSnapshot::new("r", 0);
        reference.instances.push(instance("a", "chair", [0.0; 3], vec![0.0, 0.0]));
        reference.instances.push(instance("b", "chair", [1.0, 0.0, 0.0], vec![0.05, 0.0]));
        let mut current = SceneSnapshot::new("c", 1);
        current.instances.push(instance("x", "chair", [0.0; 3], vec![0.0, 0.0]));
        current.instances.push(instance("y", "table", [3.0, 0.0, 0.0], vec![5.0, 0.0]));
        let config = MatchConfig::new(0.5).unwrap();
        for report in [
            detect_changes(&clustered(&reference, 0.01), &clustered(&current, 0.01), &config).unwrap(),
            greedy_detect_changes(&reference, &current, &identity_model(2), &config).unwrap(),
        ] {
            let mut ref_side = report.matched_ref_ids();
            ref_side.extend(report.absent.iter().cloned());
            assert_eq!(ref_side, reference.instance_ids());
            let mut cur_side = report.matched_cur_ids();
            cur_side.extend(report.new.iter().cloned());
            assert_eq!(cur_side, current.instance_ids());
            for pair in &report.matched {
                assert_eq!(
                    reference.instance(&pair.ref_instance_id).unwrap().semantic_class,
                    current.instance(&pair.cur_instance_id).unwrap().semantic_class
                );
            }
        }
    }

    #[test]
    fn unclustered_input_is_rejected() {
        let mut reference = SceneSnapshot::new("r", 0);
        reference.instances.push(instance("a", "chair", [0.0; 3], vec![0.0, 0.0]));
        let err = detect_changes(&reference, &reference, &MatchConfig::new(1.0).unwrap())
            .unwrap_err();
        assert!(matches!(err, MatchError::NotClustered { .. }));
    }
}
