//! Incremental matching as frames arrive.
//!
//! Each observation is embedded exactly once and stored in an append-only
//! embedding library; node embeddings are medians over library entries, so
//! however many re-clustering passes run, no view is embedded twice. After
//! every frame the current snapshot is re-clustered from scratch and matched
//! against the reference graph, which makes the final report converge to the
//! offline result on the same observations by construction.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_with_embeddings, median_embedding, ClusterConfig, ClusterError};
use crate::embedding::{squared_distance, EmbeddingModel, ModelError};
use crate::matching::{detect_changes, MatchConfig, MatchError};
use crate::scene::{euclidean, ChangeReport, ObjectInstance, Point3, SceneSnapshot};
use crate::scenegen::Frame;

/// Append-only store of view embeddings keyed by view id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingLibrary {
    entries: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingLibrary {
    pub fn insert(&mut self, view_id: &str, embedding: Vec<f64>) -> Result<(), OnlineError> {
        if self.entries.contains_key(view_id) {
            return Err(OnlineError::DuplicateViewId {
                view_id: view_id.to_string(),
            });
        }
        self.entries.insert(view_id.to_string(), embedding);
        Ok(())
    }

    pub fn get(&self, view_id: &str) -> Option<&Vec<f64>> {
        self.entries.get(view_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub gamma: f64,
    /// An observation joins an existing node when it is within this radius
    /// of the node's mean position (same class, descriptor gate permitting).
    pub association_radius: f64,
    /// Upper bound on the squared embedding distance between a view and the
    /// node it joins. Unit-sphere embeddings never exceed 4.
    pub descriptor_gate: f64,
}

impl OnlineConfig {
    pub fn new(gamma: f64) -> Result<Self, OnlineError> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(OnlineError::BadConfig {
                detail: format!("gamma must be finite and >= 0, got {gamma}"),
            });
        }
        Ok(Self {
            gamma,
            association_radius: 0.1,
            descriptor_gate: 4.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OnlineError {
    BadConfig { detail: String },
    UnclusteredReference { session_id: String },
    DuplicateViewId { view_id: String },
    Model(ModelError),
    Cluster(ClusterError),
    Match(MatchError),
}

impl fmt::Display for OnlineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OnlineError::BadConfig { detail } => write!(f, "invalid online config: {detail}"),
            OnlineError::UnclusteredReference { session_id } => {
                write!(f, "reference snapshot {session_id} must be clustered")
            }
            OnlineError::DuplicateViewId { view_id } => {
                write!(f, "view {view_id} was already embedded")
            }
            OnlineError::Model(e) => write!(f, "{e}"),
            OnlineError::Cluster(e) => write!(f, "{e}"),
            OnlineError::Match(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for OnlineError {}

impl From<ModelError> for OnlineError {
    fn from(e: ModelError) -> Self {
        OnlineError::Model(e)
    }
}

impl From<ClusterError> for OnlineError {
    fn from(e: ClusterError) -> Self {
        OnlineError::Cluster(e)
    }
}

impl From<MatchError> for OnlineError {
    fn from(e: MatchError) -> Self {
        OnlineError::Match(e)
    }
}

/// One object node under construction from streamed observations.
#[derive(Debug, Clone, PartialEq)]
struct TrackedInstance {
    instance_id: String,
    semantic_class: String,
    /// Running sum/count of observed positions; the node position is the mean.
    position_sum: Point3,
    observation_count: usize,
    views: Vec<crate::scene::ViewDescriptor>,
}

impl TrackedInstance {
    fn mean_position(&self) -> Point3 {
        let n = self.observation_count.max(1) as f64;
        [
            self.position_sum[0] / n,
            self.position_sum[1] / n,
            self.position_sum[2] / n,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct OnlineState {
    reference: SceneSnapshot,
    model: EmbeddingModel,
    config: OnlineConfig,
    session_id: String,
    time_index: i64,
    library: EmbeddingLibrary,
    current: Vec<TrackedInstance>,
    last_report: Option<ChangeReport>,
    frames_processed: u64,
}

/// Starts an online session against a clustered reference snapshot.
pub fn init(
    reference: &SceneSnapshot,
    model: &EmbeddingModel,
    config: OnlineConfig,
) -> Result<OnlineState, OnlineError> {
    if !reference.is_clustered() {
        return Err(OnlineError::UnclusteredReference {
            session_id: reference.session_id.clone(),
        });
    }
    Ok(OnlineState {
        reference: reference.clone(),
        model: model.clone(),
        config,
        session_id: "online".to_string(),
        time_index: reference.time_index + 1,
        library: EmbeddingLibrary::default(),
        current: Vec::new(),
        last_report: None,
        frames_processed: 0,
    })
}

impl OnlineState {
    pub fn frames_processed(&self) -> u64 {
        self.frames_processed
    }

    pub fn library(&self) -> &EmbeddingLibrary {
        &self.library
    }

    pub fn instance_count(&self) -> usize {
        self.current.len()
    }

    pub fn set_session(&mut self, session_id: impl Into<String>, time_index: i64) {
        self.session_id = session_id.into();
        self.time_index = time_index;
    }

    /// Ingests one frame: associates observations to nodes (creating nodes
    /// as needed), embeds the new views into the library, then re-clusters
    /// and re-matches everything against the reference.
    pub fn process_frame(&mut self, frame: &Frame) -> Result<(), OnlineError> {
        for obs in &frame.observations {
            let embedding = self.model.embed(&obs.view.data)?;
            self.library.insert(&obs.view.view_id, embedding.clone())?;

            let target = self.associate(obs, &embedding);
            match target {
                Some(idx) => {
                    let node = &mut self.current[idx];
                    for (s, p) in node.position_sum.iter_mut().zip(&obs.position) {
                        *s += p;
                    }
                    node.observation_count += 1;
                    node.views.push(obs.view.clone());
                }
                None => {
                    self.current.push(TrackedInstance {
                        instance_id: format!("obs-{:04}", self.current.len()),
                        semantic_class: obs.semantic_class.clone(),
                        position_sum: obs.position,
                        observation_count: 1,
                        views: vec![obs.view.clone()],
                    });
                }
            }
        }
        self.frames_processed += 1;
        if !frame.observations.is_empty() {
            self.last_report = Some(self.rematch()?);
        }
        Ok(())
    }

    /// Nearest same-class node within the association radius whose node
    /// embedding sits inside the descriptor gate.
    fn associate(&self, obs: &crate::scenegen::Observation, embedding: &[f64]) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (idx, node) in self.current.iter().enumerate() {
            if node.semantic_class != obs.semantic_class {
                continue;
            }
            let d = euclidean(&node.mean_position(), &obs.position);
            if d > self.config.association_radius {
                continue;
            }
            let node_embedding = self.node_embedding(node);
            let Ok(visual) = squared_distance(embedding, &node_embedding) else {
                continue;
            };
            if visual > self.config.descriptor_gate {
                continue;
            }
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, idx));
            }
        }
        best.map(|(_, idx)| idx)
    }

    fn node_embedding(&self, node: &TrackedInstance) -> Vec<f64> {
        let embeddings: Vec<Vec<f64>> = node
            .views
            .iter()
            .map(|v| self.library.get(&v.view_id).expect("view embedded on ingest").clone())
            .collect();
        median_embedding(&embeddings).expect("node has at least one view")
    }

    /// The current snapshot as built so far (unclustered).
    pub fn current_snapshot(&self) -> SceneSnapshot {
        let mut snapshot = SceneSnapshot::new(self.session_id.clone(), self.time_index);
        for node in &self.current {
            snapshot.instances.push(ObjectInstance::new(
                node.instance_id.clone(),
                node.semantic_class.clone(),
                node.mean_position(),
                node.views.clone(),
            ));
        }
        snapshot
    }

    fn rematch(&self) -> Result<ChangeReport, OnlineError> {
        let snapshot = self.current_snapshot();
        let nodes: BTreeMap<String, Vec<f64>> = self
            .current
            .iter()
            .map(|n| (n.instance_id.clone(), self.node_embedding(n)))
            .collect();
        let cluster_config = ClusterConfig::new(self.config.gamma)?;
        let clustered = cluster_with_embeddings(&snapshot, &nodes, &cluster_config)?;
        let match_config = MatchConfig::new(self.config.gamma)?;
        Ok(detect_changes(&self.reference, &clustered, &match_config)?)
    }

    /// Latest interim report, computing one if no observation has arrived
    /// yet (everything in the reference reported absent). Idempotent.
    pub fn finalize(&self) -> Result<ChangeReport, OnlineError> {
        match &self.last_report {
            Some(report) => Ok(report.clone()),
            None => self.rematch(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::cluster_snapshot;
    use crate::embedding::{train, TrainConfig};
    use crate::scenegen::{generate, preset};

    fn trained_setup() -> (crate::scenegen::Scenario, EmbeddingModel) {
        let mut spec = preset("coffeeroom").unwrap();
        spec.seed = 21;
        let scenario = generate(&spec).unwrap();
        let split = crate::scenegen::make_training_set(
            &scenario.snapshots[0],
            &scenario.ground_truth.session_labels[0],
            5,
            0.15,
        )
        .unwrap();
        let model = EmbeddingModel::seeded(&[192, 96, 32], true, 1.0, 13).unwrap();
        let config = TrainConfig {
            epochs: 12,
            seed: 5,
            ..TrainConfig::default()
        };
        let (trained, _) = train(&model, &split.train, &config).unwrap();
        (scenario, trained)
    }

    #[test]
    fn zero_frames_reports_everything_absent() {
        let (scenario, model) = trained_setup();
        let gamma = 0.4;
        let reference = cluster_snapshot(
            &scenario.snapshots[0],
            &model,
            &ClusterConfig::new(gamma).unwrap(),
        )
        .unwrap();
        let state = init(&reference, &model, OnlineConfig::new(gamma).unwrap()).unwrap();
        let report = state.finalize().unwrap();
        assert!(report.matched.is_empty());
        assert!(report.new.is_empty());
        assert_eq!(report.absent.len(), reference.instances.len());
        // Idempotent.
        assert_eq!(report, state.finalize().unwrap());
    }

    #[test]
    fn init_requires_clustered_reference() {
        let (scenario, model) = trained_setup();
        let err = init(
            &scenario.snapshots[0],
            &model,
            OnlineConfig::new(0.4).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, OnlineError::UnclusteredReference { .. }));
    }

    #[test]
    fn init_with_empty_reference_marks_everything_new() {
        let (scenario, model) = trained_setup();
        let reference = SceneSnapshot::new("empty", 0);
        let mut state = init(&reference, &model, OnlineConfig::new(0.4).unwrap()).unwrap();
        for frame in &scenario.frames[1] {
            state.process_frame(frame).unwrap();
        }
        let report = state.finalize().unwrap();
        assert!(report.matched.is_empty());
        assert!(report.absent.is_empty());
        assert_eq!(report.new.len(), state.instance_count());
    }

    #[test]
    fn empty_frame_only_bumps_counter() {
        let (scenario, model) = trained_setup();
        let gamma = 0.4;
        let reference = cluster_snapshot(
            &scenario.snapshots[0],
            &model,
            &ClusterConfig::new(gamma).unwrap(),
        )
        .unwrap();
        let mut state = init(&reference, &model, OnlineConfig::new(gamma).unwrap()).unwrap();
        let before = state.current_snapshot();
        state
            .process_frame(&Frame {
                frame_index: 0,
                observations: Vec::new(),
            })
            .unwrap();
        assert_eq!(state.frames_processed(), 1);
        assert_eq!(state.current_snapshot(), before);
    }

    #[test]
    fn duplicate_view_id_rejected() {
        let (scenario, model) = trained_setup();
        let gamma = 0.4;
        let reference = cluster_snapshot(
            &scenario.snapshots[0],
            &model,
            &ClusterConfig::new(gamma).unwrap(),
        )
        .unwrap();
        let mut state = init(&reference, &model, OnlineConfig::new(gamma).unwrap()).unwrap();
        let frame = &scenario.frames[1][0];
        state.process_frame(frame).unwrap();
        let err = state.process_frame(frame).unwrap_err();
        assert!(matches!(err, OnlineError::DuplicateViewId { .. }));
    }

    #[test]
    fn full_stream_converges_to_offline_and_embeds_each_view_once() {
        let (scenario, model) = trained_setup();
        let gamma = 0.4;
        let reference = cluster_snapshot(
            &scenario.snapshots[0],
            &model,
            &ClusterConfig::new(gamma).unwrap(),
        )
        .unwrap();
        let mut state = init(&reference, &model, OnlineConfig::new(gamma).unwrap()).unwrap();
        let mut instance_counts = Vec::new();
        let mut total_observations = 0;
        for frame in &scenario.frames[1] {
            total_observations += frame.observations.len();
            state.process_frame(frame).unwrap();
            instance_counts.push(state.instance_count());
        }
        // Monotone knowledge: the node set never shrinks.
        assert!(instance_counts.windows(2).all(|w| w[0] <= w[1]));
        // Embedding economy: library entries == views ingested.
        assert_eq!(state.library().len(), total_observations);

        let online_report = state.finalize().unwrap();
        // Offline oracle: cluster the aggregated snapshot and match once.
        let aggregated = state.current_snapshot();
        let offline = detect_changes(
            &reference,
            &cluster_snapshot(&aggregated, &model, &ClusterConfig::new(gamma).unwrap()).unwrap(),
            &MatchConfig::new(gamma).unwrap(),
        )
        .unwrap();
        assert_eq!(online_report, offline);
    }
}
