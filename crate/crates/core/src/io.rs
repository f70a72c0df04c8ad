//! File formats: snapshots, change reports, model weights, scenario specs,
//! ground truth, frame streams (newline-delimited JSON), datasets, CSV
//! outputs and per-run manifests. Floats are serialized with full
//! round-trip precision; all writers are deterministic byte-for-byte.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{
    Activation, DatasetItem, EmbeddingModel, EpochStats, Layer, TripletDataset,
};
use crate::evaluation::{BenchRow, EvalResult, SweepOutput};
use crate::scene::{validate_snapshot, ChangeReport, SceneSnapshot};
use crate::scenegen::{Frame, GroundTruth, ScenarioSpec};

#[derive(Debug)]
pub enum IoError {
    Io {
        path: String,
        source: std::io::Error,
    },
    Json {
        path: String,
        source: serde_json::Error,
    },
    Invalid {
        path: String,
        detail: String,
    },
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Io { path, source } => write!(f, "{path}: {source}"),
            IoError::Json { path, source } => write!(f, "{path}: invalid JSON: {source}"),
            IoError::Invalid { path, detail } => write!(f, "{path}: {detail}"),
        }
    }
}

// Display already embeds the underlying error, so no source() chain:
// callers would print the same message twice.
impl std::error::Error for IoError {}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| IoError::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    fs::write(path, bytes).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn to_compact<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec(value).expect("serializable");
    out.push(b'\n');
    out
}

fn to_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

// ---- snapshots ----------------------------------------------------------

pub fn save_snapshot(path: &Path, snapshot: &SceneSnapshot) -> Result<(), IoError> {
    write_bytes(path, &to_compact(snapshot))
}

/// Loads a snapshot, rebuilds derived cluster view libraries and rejects
/// files that violate snapshot invariants.
pub fn load_snapshot(path: &Path) -> Result<SceneSnapshot, IoError> {
    let mut snapshot: SceneSnapshot = parse(path, &read(path)?)?;
    snapshot.rebuild_view_libraries();
    let violations = validate_snapshot(&snapshot);
    if !violations.is_empty() {
        return Err(IoError::Invalid {
            path: path.display().to_string(),
            detail: format!(
                "snapshot violates {} invariant(s); first: {}",
                violations.len(),
                violations[0]
            ),
        });
    }
    Ok(snapshot)
}

// ---- change reports ------------------------------------------------------

pub fn save_report(path: &Path, report: &ChangeReport) -> Result<(), IoError> {
    write_bytes(path, &to_pretty(report))
}

pub fn load_report(path: &Path) -> Result<ChangeReport, IoError> {
    parse(path, &read(path)?)
}

// ---- model weights -------------------------------------------------------

/// Wire format of a model file; mirrors the in-memory model field for field
/// but reloads through the validating constructor.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    layer_dims: Vec<usize>,
    hidden_activation: Activation,
    normalize_output: bool,
    margin_alpha: f64,
    layers: Vec<Layer>,
}

pub fn save_model(path: &Path, model: &EmbeddingModel) -> Result<(), IoError> {
    write_bytes(path, &to_compact(model))
}

pub fn load_model(path: &Path) -> Result<EmbeddingModel, IoError> {
    let file: ModelFile = parse(path, &read(path)?)?;
    EmbeddingModel::from_parts(
        file.layer_dims,
        file.layers,
        file.hidden_activation,
        file.normalize_output,
        file.margin_alpha,
    )
    .map_err(|e| IoError::Invalid {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

// ---- scenarios -----------------------------------------------------------

pub fn save_spec(path: &Path, spec: &ScenarioSpec) -> Result<(), IoError> {
    write_bytes(path, &to_pretty(spec))
}

pub fn load_spec(path: &Path) -> Result<ScenarioSpec, IoError> {
    parse(path, &read(path)?)
}

pub fn save_ground_truth(path: &Path, gt: &GroundTruth) -> Result<(), IoError> {
    write_bytes(path, &to_compact(gt))
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth, IoError> {
    parse(path, &read(path)?)
}

// ---- frame streams -------------------------------------------------------

pub fn save_frames_jsonl(path: &Path, frames: &[Frame]) -> Result<(), IoError> {
    let mut out = Vec::new();
    for frame in frames {
        serde_json::to_writer(&mut out, frame).expect("serializable");
        out.push(b'\n');
    }
    write_bytes(path, &out)
}

pub fn load_frames_jsonl(path: &Path) -> Result<Vec<Frame>, IoError> {
    let text = read(path)?;
    frames_from_lines(text.lines(), &path.display().to_string())
}

pub fn read_frames(reader: impl BufRead, source_name: &str) -> Result<Vec<Frame>, IoError> {
    let mut lines = Vec::new();
    for line in reader.lines() {
        lines.push(line.map_err(|source| IoError::Io {
            path: source_name.to_string(),
            source,
        })?);
    }
    frames_from_lines(lines.iter().map(String::as_str), source_name)
}

fn frames_from_lines<'a>(
    lines: impl Iterator<Item = &'a str>,
    source_name: &str,
) -> Result<Vec<Frame>, IoError> {
    let mut frames = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        frames.push(
            serde_json::from_str(line).map_err(|source| IoError::Json {
                path: source_name.to_string(),
                source,
            })?,
        );
    }
    Ok(frames)
}

// ---- datasets ------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetFile {
    pub schema_version: u32,
    pub descriptor_dim: usize,
    pub label_names: Vec<String>,
    pub items: Vec<DatasetItem>,
}

pub fn save_dataset(path: &Path, file: &DatasetFile) -> Result<(), IoError> {
    write_bytes(path, &to_compact(file))
}

pub fn load_dataset(path: &Path) -> Result<(TripletDataset, Vec<String>), IoError> {
    let file: DatasetFile = parse(path, &read(path)?)?;
    let dataset = TripletDataset::new(file.items).map_err(|e| IoError::Invalid {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    Ok((dataset, file.label_names))
}

// ---- CSV outputs ---------------------------------------------------------

pub fn write_loss_csv(path: &Path, curve: &[EpochStats]) -> Result<(), IoError> {
    let mut out = String::from("epoch,mean_loss,active_triplet_fraction\n");
    for row in curve {
        out.push_str(&format!(
            "{},{},{}\n",
            row.epoch, row.mean_loss, row.active_triplet_fraction
        ));
    }
    write_bytes(path, out.as_bytes())
}

pub fn write_sweep_csv(path: &Path, rows: &[EvalResult]) -> Result<(), IoError> {
    let mut out = String::from("method,gamma,f1_m,f1_n,f1_a,sum_distance\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.method, row.gamma, row.f1_matched, row.f1_new, row.f1_absent, row.sum_distance
        ));
    }
    write_bytes(path, out.as_bytes())
}

pub fn write_sweep_summary(path: &Path, output: &SweepOutput) -> Result<(), IoError> {
    #[derive(Serialize)]
    struct Summary<'a> {
        summaries: &'a [crate::evaluation::MethodSummary],
    }
    write_bytes(
        path,
        &to_pretty(&Summary {
            summaries: &output.summaries,
        }),
    )
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<(), IoError> {
    let mut out = String::from("masks,median_ms,p95_ms\n");
    for row in rows {
        out.push_str(&format!("{},{},{}\n", row.masks, row.median_ms, row.p95_ms));
    }
    write_bytes(path, out.as_bytes())
}

// ---- run manifests -------------------------------------------------------

/// Everything needed to reproduce a run: resolved configuration, seed and
/// content hashes of every input file.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            inputs: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), IoError> {
        let bytes = fs::read(path).map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.inputs.insert(
            path.display().to_string(),
            hex::encode(Sha256::digest(&bytes)),
        );
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        write_bytes(path, &to_pretty(self))
    }
}

/// Writes arbitrary serializable data as pretty JSON (summaries etc.).
pub fn save_pretty_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_bytes(path, &to_pretty(value))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    write_bytes(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::{generate, preset};
    use tempfile::tempdir;

    #[test]
    fn snapshot_round_trip_is_structurally_equal() {
        let scenario = generate(&preset("flat").unwrap()).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.json");
        // Round-trip an unclustered and a clustered snapshot.
        let unclustered = &scenario.snapshots[0];
        save_snapshot(&path, unclustered).unwrap();
        assert_eq!(&load_snapshot(&path).unwrap(), unclustered);

        let model = EmbeddingModel::seeded(&[192, 64, 32], true, 1.0, 2).unwrap();
        let clustered = crate::clustering::cluster_snapshot(
            unclustered,
            &model,
            &crate::clustering::ClusterConfig::new(0.5).unwrap(),
        )
        .unwrap();
        save_snapshot(&path, &clustered).unwrap();
        assert_eq!(load_snapshot(&path).unwrap(), clustered);
    }

    #[test]
    fn corrupt_snapshot_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, b"{\"session_id\":1}").unwrap();
        assert!(matches!(
            load_snapshot(&path).unwrap_err(),
            IoError::Json { .. }
        ));
    }

    #[test]
    fn model_round_trip_validates_shapes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = EmbeddingModel::seeded(&[8, 6, 4], true, 1.0, 5).unwrap();
        save_model(&path, &model).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);

        // Corrupt a shape: drop one bias entry.
        let text = std::fs::read_to_string(&path).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["layers"][0]["bias"] = serde_json::json!([0.0]);
        std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
        assert!(matches!(
            load_model(&path).unwrap_err(),
            IoError::Invalid { .. }
        ));
    }

    #[test]
    fn frames_round_trip_jsonl() {
        let scenario = generate(&preset("flat").unwrap()).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("frames.jsonl");
        save_frames_jsonl(&path, &scenario.frames[1]).unwrap();
        let loaded = load_frames_jsonl(&path).unwrap();
        assert_eq!(loaded, scenario.frames[1]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), scenario.frames[1].len());
    }

    #[test]
    fn manifest_records_input_hashes() {
        let dir = tempdir().unwrap();
        let input = dir.path().join("input.json");
        std::fs::write(&input, b"{}").unwrap();
        let mut manifest = RunManifest::new("test", serde_json::json!({"seed": 7}));
        manifest.record_input(&input).unwrap();
        let out = dir.path().join("manifest.json");
        manifest.write(&out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.contains("seed"));
        // sha256 of "{}"
        assert!(text.contains("44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a"));
    }
}
