//! Object-layer scene model: instances with view memories and position
//! histories, visual clusters, per-session snapshots and the matched /
//! absent / new change report exchanged between sessions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Position in meters. The evaluation scenes are effectively planar but
/// everything is carried as a full 3-vector; generated data sets z = 0.
pub type Point3 = [f64; 3];

pub fn euclidean(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// One appearance observation of an object: a fixed-length descriptor vector
/// standing in for a masked RGB crop, plus the frame it was acquired in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDescriptor {
    pub view_id: String,
    pub frame_index: u64,
    pub data: Vec<f64>,
}

/// A single physical object tracked across a mapping session. The view list
/// is the instance's memory of everything it has been seen as.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub instance_id: String,
    pub semantic_class: String,
    pub position: Point3,
    pub position_history: Vec<Point3>,
    pub views: Vec<ViewDescriptor>,
}

impl ObjectInstance {
    pub fn new(
        instance_id: impl Into<String>,
        semantic_class: impl Into<String>,
        position: Point3,
        views: Vec<ViewDescriptor>,
    ) -> Self {
        Self {
            instance_id: instance_id.into(),
            semantic_class: semantic_class.into(),
            position,
            position_history: vec![position],
            views,
        }
    }
}

/// A group of visually identical instances sharing an averaged embedding and
/// a merged view library. Clusters are derived data: ids are regenerated on
/// every re-clustering pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCluster {
    pub cluster_id: String,
    pub semantic_class: String,
    pub members: BTreeSet<String>,
    pub embedding: Vec<f64>,
    /// View ids pooled from all members, in sorted member order. Not part of
    /// the snapshot wire format; rebuilt from members on load.
    #[serde(skip)]
    pub view_library: Vec<String>,
}

/// The object layer of one mapping session. An empty cluster list marks an
/// unclustered snapshot (freshly generated or just updated); the clustering
/// pass fills it in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub session_id: String,
    pub time_index: i64,
    pub instances: Vec<ObjectInstance>,
    pub clusters: Vec<InstanceCluster>,
}

impl SceneSnapshot {
    pub fn new(session_id: impl Into<String>, time_index: i64) -> Self {
        Self {
            session_id: session_id.into(),
            time_index,
            instances: Vec::new(),
            clusters: Vec::new(),
        }
    }

    pub fn instance(&self, id: &str) -> Option<&ObjectInstance> {
        self.instances.iter().find(|i| i.instance_id == id)
    }

    pub fn instance_ids(&self) -> BTreeSet<String> {
        self.instances
            .iter()
            .map(|i| i.instance_id.clone())
            .collect()
    }

    pub fn cluster(&self, id: &str) -> Option<&InstanceCluster> {
        self.clusters.iter().find(|c| c.cluster_id == id)
    }

    /// True when the cluster list is a partition of the instance set.
    /// An empty snapshot counts as clustered.
    pub fn is_clustered(&self) -> bool {
        if self.instances.is_empty() {
            return true;
        }
        if self.clusters.is_empty() {
            return false;
        }
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for c in &self.clusters {
            for m in &c.members {
                if !seen.insert(m.as_str()) {
                    return false;
                }
            }
        }
        seen.len() == self.instances.len()
            && self
                .instances
                .iter()
                .all(|i| seen.contains(i.instance_id.as_str()))
    }

    /// Rebuilds each cluster's view library from its members' views.
    /// Members are walked in sorted id order so the result is deterministic.
    pub fn rebuild_view_libraries(&mut self) {
        let views: BTreeMap<&str, &ObjectInstance> = self
            .instances
            .iter()
            .map(|i| (i.instance_id.as_str(), i))
            .collect();
        for cluster in &mut self.clusters {
            cluster.view_library.clear();
            for member in &cluster.members {
                if let Some(inst) = views.get(member.as_str()) {
                    cluster
                        .view_library
                        .extend(inst.views.iter().map(|v| v.view_id.clone()));
                }
            }
        }
    }
}

/// One matched instance pair and how far the object traveled between
/// sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub ref_instance_id: String,
    pub cur_instance_id: String,
    pub travel_distance: f64,
}

/// The three-way decomposition of objects between two sessions plus the
/// total travel distance of everything that was matched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub matched: Vec<MatchedPair>,
    pub absent: BTreeSet<String>,
    pub new: BTreeSet<String>,
    pub total_distance: f64,
}

impl ChangeReport {
    pub fn matched_ref_ids(&self) -> BTreeSet<String> {
        self.matched
            .iter()
            .map(|p| p.ref_instance_id.clone())
            .collect()
    }

    pub fn matched_cur_ids(&self) -> BTreeSet<String> {
        self.matched
            .iter()
            .map(|p| p.cur_instance_id.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneError {
    /// The report's id sets do not line up with the given snapshots.
    ReportMismatch { detail: String },
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneError::ReportMismatch { detail } => {
                write!(f, "change report does not match snapshots: {detail}")
            }
        }
    }
}

impl std::error::Error for SceneError {}

/// A single invariant violation found by [`validate_snapshot`]. Violations
/// are data, not errors: a validator run never fails.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateInstanceId { instance_id: String },
    EmptyPositionHistory { instance_id: String },
    PositionHistoryMismatch { instance_id: String },
    NonFiniteCoordinate { instance_id: String },
    NonFiniteDescriptor { view_id: String },
    DescriptorLengthMismatch { view_id: String, expected: usize, got: usize },
    DuplicateViewId { view_id: String },
    PartitionViolated { instance_id: String, detail: String },
    MixedClusterClass { cluster_id: String },
    UnknownClusterMember { cluster_id: String, instance_id: String },
    EmptyCluster { cluster_id: String },
    ViewLibraryCountMismatch { cluster_id: String, expected: usize, got: usize },
    NonFiniteEmbedding { cluster_id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateInstanceId { instance_id } => {
                write!(f, "duplicate instance id {instance_id}")
            }
            Violation::EmptyPositionHistory { instance_id } => {
                write!(f, "instance {instance_id} has an empty position history")
            }
            Violation::PositionHistoryMismatch { instance_id } => write!(
                f,
                "instance {instance_id} position does not equal the last history entry"
            ),
            Violation::NonFiniteCoordinate { instance_id } => {
                write!(f, "non-finite coordinate on instance {instance_id}")
            }
            Violation::NonFiniteDescriptor { view_id } => {
                write!(f, "non-finite descriptor entry in view {view_id}")
            }
            Violation::DescriptorLengthMismatch { view_id, expected, got } => write!(
                f,
                "view {view_id} descriptor length {got} differs from dataset dimension {expected}"
            ),
            Violation::DuplicateViewId { view_id } => {
                write!(f, "duplicate view id {view_id}")
            }
            Violation::PartitionViolated { instance_id, detail } => {
                write!(f, "partition violated for instance {instance_id}: {detail}")
            }
            Violation::MixedClusterClass { cluster_id } => {
                write!(f, "cluster {cluster_id} mixes semantic classes")
            }
            Violation::UnknownClusterMember { cluster_id, instance_id } => write!(
                f,
                "cluster {cluster_id} references unknown instance {instance_id}"
            ),
            Violation::EmptyCluster { cluster_id } => {
                write!(f, "cluster {cluster_id} has no members")
            }
            Violation::ViewLibraryCountMismatch { cluster_id, expected, got } => write!(
                f,
                "cluster {cluster_id} view library has {got} entries, member views total {expected}"
            ),
            Violation::NonFiniteEmbedding { cluster_id } => {
                write!(f, "non-finite embedding on cluster {cluster_id}")
            }
        }
    }
}

/// Checks every snapshot invariant and returns all violations found. An
/// empty list means the snapshot is valid. Never mutates.
pub fn validate_snapshot(s: &SceneSnapshot) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut ids: BTreeSet<&str> = BTreeSet::new();
    let mut view_ids: BTreeSet<&str> = BTreeSet::new();
    let mut descriptor_dim: Option<usize> = None;

    for inst in &s.instances {
        if !ids.insert(inst.instance_id.as_str()) {
            out.push(Violation::DuplicateInstanceId {
                instance_id: inst.instance_id.clone(),
            });
        }
        if inst.position_history.is_empty() {
            out.push(Violation::EmptyPositionHistory {
                instance_id: inst.instance_id.clone(),
            });
        } else if *inst.position_history.last().unwrap() != inst.position {
            out.push(Violation::PositionHistoryMismatch {
                instance_id: inst.instance_id.clone(),
            });
        }
        let finite = inst.position.iter().all(|v| v.is_finite())
            && inst
                .position_history
                .iter()
                .all(|p| p.iter().all(|v| v.is_finite()));
        if !finite {
            out.push(Violation::NonFiniteCoordinate {
                instance_id: inst.instance_id.clone(),
            });
        }
        for view in &inst.views {
            if !view_ids.insert(view.view_id.as_str()) {
                out.push(Violation::DuplicateViewId {
                    view_id: view.view_id.clone(),
                });
            }
            if view.data.iter().any(|v| !v.is_finite()) {
                out.push(Violation::NonFiniteDescriptor {
                    view_id: view.view_id.clone(),
                });
            }
            match descriptor_dim {
                None => descriptor_dim = Some(view.data.len()),
                Some(d) if d != view.data.len() => {
                    out.push(Violation::DescriptorLengthMismatch {
                        view_id: view.view_id.clone(),
                        expected: d,
                        got: view.data.len(),
                    });
                }
                _ => {}
            }
        }
    }

    // Cluster checks apply only when a clustering pass has run.
    if !s.clusters.is_empty() {
        let by_id: BTreeMap<&str, &ObjectInstance> = s
            .instances
            .iter()
            .map(|i| (i.instance_id.as_str(), i))
            .collect();
        let mut clustered: BTreeSet<&str> = BTreeSet::new();
        for cluster in &s.clusters {
            if cluster.members.is_empty() {
                out.push(Violation::EmptyCluster {
                    cluster_id: cluster.cluster_id.clone(),
                });
            }
            if cluster.embedding.iter().any(|v| !v.is_finite()) {
                out.push(Violation::NonFiniteEmbedding {
                    cluster_id: cluster.cluster_id.clone(),
                });
            }
            let mut classes: BTreeSet<&str> = BTreeSet::new();
            let mut member_views = 0usize;
            for member in &cluster.members {
                match by_id.get(member.as_str()) {
                    Some(inst) => {
                        classes.insert(inst.semantic_class.as_str());
                        member_views += inst.views.len();
                    }
                    None => out.push(Violation::UnknownClusterMember {
                        cluster_id: cluster.cluster_id.clone(),
                        instance_id: member.clone(),
                    }),
                }
                if !clustered.insert(member.as_str()) {
                    out.push(Violation::PartitionViolated {
                        instance_id: member.clone(),
                        detail: "appears in more than one cluster".to_string(),
                    });
                }
            }
            if classes.len() > 1
                || classes
                    .iter()
                    .next()
                    .is_some_and(|c| *c != cluster.semantic_class)
            {
                out.push(Violation::MixedClusterClass {
                    cluster_id: cluster.cluster_id.clone(),
                });
            }
            if !cluster.view_library.is_empty() && cluster.view_library.len() != member_views {
                out.push(Violation::ViewLibraryCountMismatch {
                    cluster_id: cluster.cluster_id.clone(),
                    expected: member_views,
                    got: cluster.view_library.len(),
                });
            }
        }
        for inst in &s.instances {
            if !clustered.contains(inst.instance_id.as_str()) {
                out.push(Violation::PartitionViolated {
                    instance_id: inst.instance_id.clone(),
                    detail: "not a member of any cluster".to_string(),
                });
            }
        }
    }

    out
}

/// Applies a change report to the reference snapshot: matched instances keep
/// their identity, merge view libraries and append the current position to
/// their history; absent instances are removed; new instances are taken from
/// the current snapshot verbatim. The result is unclustered — run the
/// clustering pass on it afterwards.
pub fn apply_change_report(
    reference: &SceneSnapshot,
    current: &SceneSnapshot,
    report: &ChangeReport,
) -> Result<SceneSnapshot, SceneError> {
    let ref_ids = reference.instance_ids();
    let cur_ids = current.instance_ids();
    let matched_ref = report.matched_ref_ids();
    let matched_cur = report.matched_cur_ids();

    if matched_ref.len() != report.matched.len() || matched_cur.len() != report.matched.len() {
        return Err(SceneError::ReportMismatch {
            detail: "an instance appears in more than one matched pair".to_string(),
        });
    }
    if !matched_ref.is_disjoint(&report.absent) {
        return Err(SceneError::ReportMismatch {
            detail: "matched and absent sets overlap".to_string(),
        });
    }
    if !matched_cur.is_disjoint(&report.new) {
        return Err(SceneError::ReportMismatch {
            detail: "matched and new sets overlap".to_string(),
        });
    }
    let ref_union: BTreeSet<String> = matched_ref.union(&report.absent).cloned().collect();
    if ref_union != ref_ids {
        return Err(SceneError::ReportMismatch {
            detail: "matched ∪ absent does not equal the reference instance set".to_string(),
        });
    }
    let cur_union: BTreeSet<String> = matched_cur.union(&report.new).cloned().collect();
    if cur_union != cur_ids {
        return Err(SceneError::ReportMismatch {
            detail: "matched ∪ new does not equal the current instance set".to_string(),
        });
    }

    let cur_by_id: BTreeMap<&str, &ObjectInstance> = current
        .instances
        .iter()
        .map(|i| (i.instance_id.as_str(), i))
        .collect();
    let pair_by_ref: BTreeMap<&str, &MatchedPair> = report
        .matched
        .iter()
        .map(|p| (p.ref_instance_id.as_str(), p))
        .collect();

    let mut out = SceneSnapshot::new(current.session_id.clone(), current.time_index);
    for inst in &reference.instances {
        let Some(pair) = pair_by_ref.get(inst.instance_id.as_str()) else {
            continue; // absent: dropped from the live snapshot
        };
        let cur_inst = cur_by_id[pair.cur_instance_id.as_str()];
        let mut merged = inst.clone();
        merged.position = cur_inst.position;
        merged.position_history.push(cur_inst.position);
        let known: BTreeSet<&str> = merged.views.iter().map(|v| v.view_id.as_str()).collect();
        let fresh: Vec<ViewDescriptor> = cur_inst
            .views
            .iter()
            .filter(|v| !known.contains(v.view_id.as_str()))
            .cloned()
            .collect();
        merged.views.extend(fresh);
        out.instances.push(merged);
    }
    for inst in &current.instances {
        if report.new.contains(&inst.instance_id) {
            out.instances.push(inst.clone());
        }
    }
    Ok(out)
}
