//! Node embeddings and visual clustering.
//!
//! Each object node's embedding is the component-wise median over its view
//! embeddings. Within a semantic class, nodes whose embeddings sit within
//! the squared-distance threshold gamma are linked and clusters are the
//! connected components (single link via union-find), so the partition is
//! independent of input order and refines monotonically as gamma shrinks.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::{squared_distance, EmbeddingModel, ModelError};
use crate::scene::{InstanceCluster, ObjectInstance, SceneSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianMode {
    MedianOfEmbeddings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub gamma: f64,
    pub median_mode: MedianMode,
}

impl ClusterConfig {
    pub fn new(gamma: f64) -> Result<Self, ClusterError> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(ClusterError::BadGamma { gamma });
        }
        Ok(Self {
            gamma,
            median_mode: MedianMode::MedianOfEmbeddings,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterError {
    BadGamma { gamma: f64 },
    EmptyViewList { instance_id: String },
    EmptyEmbeddingSet,
    Model(ModelError),
    MissingNodeEmbedding { instance_id: String },
}

impl fmt::Display for ClusterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterError::BadGamma { gamma } => {
                write!(f, "gamma must be finite and >= 0, got {gamma}")
            }
            ClusterError::EmptyViewList { instance_id } => {
                write!(f, "instance {instance_id} has no views to embed")
            }
            ClusterError::EmptyEmbeddingSet => write!(f, "no embeddings to take a median over"),
            ClusterError::Model(e) => write!(f, "embedding failed: {e}"),
            ClusterError::MissingNodeEmbedding { instance_id } => {
                write!(f, "no node embedding provided for instance {instance_id}")
            }
        }
    }
}

impl std::error::Error for ClusterError {}

impl From<ModelError> for ClusterError {
    fn from(e: ModelError) -> Self {
        ClusterError::Model(e)
    }
}

/// Component-wise median; an even count averages the two central values.
pub fn median_embedding(embeddings: &[Vec<f64>]) -> Result<Vec<f64>, ClusterError> {
    let Some(first) = embeddings.first() else {
        return Err(ClusterError::EmptyEmbeddingSet);
    };
    let dim = first.len();
    let mut out = Vec::with_capacity(dim);
    let mut column = Vec::with_capacity(embeddings.len());
    for c in 0..dim {
        column.clear();
        column.extend(embeddings.iter().map(|e| e[c]));
        column.sort_by(|a, b| a.total_cmp(b));
        let mid = column.len() / 2;
        out.push(if column.len() % 2 == 1 {
            column[mid]
        } else {
            0.5 * (column[mid - 1] + column[mid])
        });
    }
    Ok(out)
}

/// Embeds every view in the instance's memory and takes the component-wise
/// median.
pub fn node_embedding(
    instance: &ObjectInstance,
    model: &EmbeddingModel,
) -> Result<Vec<f64>, ClusterError> {
    if instance.views.is_empty() {
        return Err(ClusterError::EmptyViewList {
            instance_id: instance.instance_id.clone(),
        });
    }
    let embeddings: Vec<Vec<f64>> = instance
        .views
        .iter()
        .map(|v| model.embed(&v.data))
        .collect::<Result<_, _>>()?;
    median_embedding(&embeddings)
}

/// Node embeddings for every instance in the snapshot, keyed by instance id.
pub fn node_embeddings(
    snapshot: &SceneSnapshot,
    model: &EmbeddingModel,
) -> Result<BTreeMap<String, Vec<f64>>, ClusterError> {
    snapshot
        .instances
        .iter()
        .map(|i| Ok((i.instance_id.clone(), node_embedding(i, model)?)))
        .collect()
}

/// Squared Euclidean distance between cluster embeddings.
pub fn visual_difference(a: &InstanceCluster, b: &InstanceCluster) -> Result<f64, ClusterError> {
    Ok(squared_distance(&a.embedding, &b.embedding)?)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Anchor on the smaller index so roots are order-independent.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Re-clusters the snapshot using precomputed node embeddings. The returned
/// snapshot carries fresh cluster ids (clusters are derived data); instances
/// are untouched.
pub fn cluster_with_embeddings(
    snapshot: &SceneSnapshot,
    nodes: &BTreeMap<String, Vec<f64>>,
    config: &ClusterConfig,
) -> Result<SceneSnapshot, ClusterError> {
    if !(config.gamma.is_finite() && config.gamma >= 0.0) {
        return Err(ClusterError::BadGamma {
            gamma: config.gamma,
        });
    }
    // Sorted (class, id) ordering decouples the partition from input order.
    let mut order: Vec<&ObjectInstance> = snapshot.instances.iter().collect();
    order.sort_by(|a, b| {
        (&a.semantic_class, &a.instance_id).cmp(&(&b.semantic_class, &b.instance_id))
    });
    for inst in &order {
        if !nodes.contains_key(&inst.instance_id) {
            return Err(ClusterError::MissingNodeEmbedding {
                instance_id: inst.instance_id.clone(),
            });
        }
    }

    let mut uf = UnionFind::new(order.len());
    let mut class_start = 0;
    while class_start < order.len() {
        let class = &order[class_start].semantic_class;
        let mut class_end = class_start;
        while class_end < order.len() && &order[class_end].semantic_class == class {
            class_end += 1;
        }
        for i in class_start..class_end {
            let fi = &nodes[&order[i].instance_id];
            for j in (i + 1)..class_end {
                let fj = &nodes[&order[j].instance_id];
                if squared_distance(fi, fj)? <= config.gamma {
                    uf.union(i, j);
                }
            }
        }
        class_start = class_end;
    }

    let mut components: BTreeMap<usize, Vec<&ObjectInstance>> = BTreeMap::new();
    for (i, inst) in order.iter().enumerate() {
        components.entry(uf.find(i)).or_default().push(inst);
    }

    // Components keyed by the smallest member id give deterministic ids.
    let mut keyed: Vec<(String, Vec<&ObjectInstance>)> = components
        .into_values()
        .map(|members| {
            let key = members
                .iter()
                .map(|m| m.instance_id.clone())
                .min()
                .unwrap();
            (key, members)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));

    let mut out = snapshot.clone();
    out.clusters = keyed
        .into_iter()
        .enumerate()
        .map(|(idx, (_, members))| {
            let member_embeddings: Vec<Vec<f64>> = members
                .iter()
                .map(|m| nodes[&m.instance_id].clone())
                .collect();
            let dim = member_embeddings[0].len();
            let mut mean = vec![0.0; dim];
            for e in &member_embeddings {
                for (m, v) in mean.iter_mut().zip(e) {
                    *m += v;
                }
            }
            mean.iter_mut()
                .for_each(|m| *m /= member_embeddings.len() as f64);
            InstanceCluster {
                cluster_id: format!("c{idx:03}"),
                semantic_class: members[0].semantic_class.clone(),
                members: members.iter().map(|m| m.instance_id.clone()).collect(),
                embedding: mean,
                view_library: Vec::new(),
            }
        })
        .collect();
    out.rebuild_view_libraries();
    Ok(out)
}

/// Embeds all instance views, groups same-class nodes whose embeddings fall
/// within gamma, and returns the re-clustered snapshot.
pub fn cluster_snapshot(
    snapshot: &SceneSnapshot,
    model: &EmbeddingModel,
    config: &ClusterConfig,
) -> Result<SceneSnapshot, ClusterError> {
    let nodes = node_embeddings(snapshot, model)?;
    cluster_with_embeddings(snapshot, &nodes, config)
}
