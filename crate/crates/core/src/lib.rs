//! Relocalizes object instances between mapping sessions of a semi-static
//! scene. Views of each object are embedded with a metric model trained on
//! triplet loss; visually identical objects are grouped into clusters;
//! clusters are matched across sessions by visual difference and individual
//! instances are assigned by minimizing total travel distance. The result is
//! a matched / absent / new change report, produced either offline from two
//! snapshots or incrementally from a frame stream.

pub mod assignment;
pub mod clustering;
pub mod embedding;
pub mod evaluation;
pub mod io;
pub mod matching;
pub mod online;
pub mod scene;
pub mod scenegen;

pub use assignment::{brute_force_lsa, solve_lsa, Assignment, CostMatrix};
pub use clustering::{cluster_snapshot, node_embedding, visual_difference, ClusterConfig};
pub use embedding::{train, EmbeddingModel, TrainConfig, TripletDataset};
pub use evaluation::{bench_embedding, score, sweep, Method};
pub use matching::{detect_changes, greedy_detect_changes, MatchConfig};
pub use online::{init as online_init, OnlineConfig, OnlineState};
pub use scene::{apply_change_report, validate_snapshot, ChangeReport, SceneSnapshot};
pub use scenegen::{generate, make_training_set, preset, presets, ScenarioSpec};
