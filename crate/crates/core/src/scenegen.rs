//! Synthetic scenario generator: multi-session scenes with groups of
//! visually identical objects, scripted rigid changes (move / remove / add),
//! noisy per-frame observations and complete ground truth. Stands in for a
//! robot's mapping pipeline at desk scale.
//!
//! Every visual category gets a prototype descriptor; views are the
//! prototype plus a structured viewpoint perturbation (a circle in a
//! category-specific 2-D subspace), additive noise and occlusion zeroing a
//! random coordinate subset. Prototypes are resampled until pairwise
//! separation is at least [`MIN_PROTOTYPE_SEPARATION`]. In high dimension
//! the viewpoint subspace is near-orthogonal to prototype differences, so a
//! view at distance ~viewpoint_amplitude from its own prototype sits at
//! ~sqrt(separation^2 + viewpoint_amplitude^2) from every other one: views
//! stay nearest their own prototype (the task is learnable) whenever
//! 1.5 * noise_amplitude + sqrt(occlusion_fraction) stays well below the
//! prototype separation, which the defaults satisfy with a wide margin.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embedding::{DatasetItem, TrainError, TripletDataset};
use crate::scene::{euclidean, ObjectInstance, Point3, SceneSnapshot, ViewDescriptor};

pub const SCHEMA_VERSION: u32 = 1;

/// Minimum Euclidean distance enforced between category prototypes.
/// Random unit vectors in high dimension sit near sqrt(2) apart, so this is
/// cheap to satisfy by resampling.
pub const MIN_PROTOTYPE_SEPARATION: f64 = 1.2;
/// Minimum distance between object placements, meters.
const MIN_PLACEMENT_SEPARATION: f64 = 1.0;
/// Added objects keep this clearance from every first-session position so
/// travel-distance matching cannot confuse them with survivors.
const ADDITION_CLEARANCE: f64 = 1.2;
const OBSERVATIONS_PER_FRAME: usize = 4;
const PLACEMENT_ATTEMPTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub semantic_class: String,
    /// Visual category id, e.g. "chair:1". Instances sharing it are
    /// visually identical.
    pub visual_category: String,
    pub count: usize,
}

/// Picks the first `count` live instances of a visual category (in creation
/// order), skipping the first `offset` of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSelector {
    pub semantic_class: String,
    pub visual_category: String,
    #[serde(default)]
    pub offset: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum ChangeOp {
    Move {
        selector: InstanceSelector,
        displacement: Point3,
    },
    Remove {
        selector: InstanceSelector,
    },
    Add {
        semantic_class: String,
        visual_category: String,
        /// Auto-placed when omitted.
        position: Option<Point3>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DescriptorMode {
    Abstract { dim: usize },
    Patch { height: usize, width: usize, channels: usize },
}

impl DescriptorMode {
    pub fn dim(&self) -> usize {
        match *self {
            DescriptorMode::Abstract { dim } => dim,
            DescriptorMode::Patch { height, width, channels } => height * width * channels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewModel {
    pub views_per_instance: (usize, usize),
    pub mode: DescriptorMode,
    /// Scale of the structured per-category viewpoint component. Views of a
    /// category trace a circle of this radius in a category-specific 2-D
    /// subspace, which is what makes the embedding worth training: raw
    /// views of one category can be as far apart as views of different
    /// categories, but the variation is learnable.
    #[serde(default = "default_viewpoint_amplitude")]
    pub viewpoint_amplitude: f64,
    /// Isotropic descriptor noise (expected norm of the perturbation).
    pub noise_amplitude: f64,
    pub occlusion_fraction: f64,
    /// Std-dev of the additive Gaussian noise on observed positions.
    pub position_noise_sigma: f64,
}

fn default_viewpoint_amplitude() -> f64 {
    0.6
}

impl Default for ViewModel {
    fn default() -> Self {
        Self {
            views_per_instance: (3, 6),
            mode: DescriptorMode::Abstract { dim: 192 },
            viewpoint_amplitude: 0.6,
            noise_amplitude: 0.05,
            occlusion_fraction: 0.05,
            position_noise_sigma: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub min: Point3,
    pub max: Point3,
}

impl Arena {
    pub fn planar(width: f64, depth: f64) -> Self {
        Self {
            min: [0.0, 0.0, 0.0],
            max: [width, depth, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub name: String,
    pub categories: Vec<CategorySpec>,
    pub change_script: Vec<ChangeOp>,
    pub view_model: ViewModel,
    pub arena: Arena,
    pub seed: u64,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// One observation as the pipeline sees it: class and noisy position are
/// observable, the underlying instance identity is not. Ground-truth
/// identities live only in [`GroundTruth::view_truth`], keyed by view id, so
/// matching code cannot consume them by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub semantic_class: String,
    pub position: Point3,
    pub view: ViewDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub frame_index: u64,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Per-session map instance id -> visual category.
    pub session_labels: Vec<BTreeMap<String, String>>,
    /// True matched pairs (ref id, cur id) between sessions 1 and 2.
    pub matched: Vec<(String, String)>,
    pub absent: BTreeSet<String>,
    pub new: BTreeSet<String>,
    /// True travel distance per matched reference instance.
    pub displacement: BTreeMap<String, f64>,
    /// Per-session map view id -> true instance id (generator-only truth).
    pub view_truth: Vec<BTreeMap<String, String>>,
}

impl GroundTruth {
    pub fn total_displacement(&self) -> f64 {
        self.displacement.values().fold(0.0, |acc, d| acc + d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    /// Generator-built session snapshots (unclustered, noiseless positions).
    pub snapshots: Vec<SceneSnapshot>,
    /// Per-session frame streams with observation noise applied.
    pub frames: Vec<Vec<Frame>>,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenError {
    BadSpec { detail: String },
    ArenaCapacity { placed: usize },
    SelectorExhausted { selector: String },
    PrototypeSpacing,
    Train(TrainError),
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::BadSpec { detail } => write!(f, "invalid scenario spec: {detail}"),
            GenError::ArenaCapacity { placed } => write!(
                f,
                "could not place object {placed} without overlap; arena too small"
            ),
            GenError::SelectorExhausted { selector } => {
                write!(f, "change script selects more instances than exist: {selector}")
            }
            GenError::PrototypeSpacing => {
                write!(f, "could not sample sufficiently separated category prototypes")
            }
            GenError::Train(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for GenError {}

impl From<TrainError> for GenError {
    fn from(e: TrainError) -> Self {
        GenError::Train(e)
    }
}

fn validate_spec(spec: &ScenarioSpec) -> Result<(), GenError> {
    if spec.categories.is_empty() {
        return Err(GenError::BadSpec {
            detail: "no categories".to_string(),
        });
    }
    if spec.categories.iter().any(|c| c.count == 0) {
        return Err(GenError::BadSpec {
            detail: "category counts must be >= 1".to_string(),
        });
    }
    let (vmin, vmax) = spec.view_model.views_per_instance;
    if vmin == 0 || vmax < vmin {
        return Err(GenError::BadSpec {
            detail: "views_per_instance range must satisfy 1 <= min <= max".to_string(),
        });
    }
    if !(0.0..1.0).contains(&spec.view_model.occlusion_fraction) {
        return Err(GenError::BadSpec {
            detail: "occlusion_fraction must be in [0, 1)".to_string(),
        });
    }
    if spec.view_model.mode.dim() == 0 {
        return Err(GenError::BadSpec {
            detail: "descriptor dimension must be positive".to_string(),
        });
    }
    for op in &spec.change_script {
        if let ChangeOp::Move { displacement, .. } = op {
            if displacement.iter().any(|v| !v.is_finite()) {
                return Err(GenError::BadSpec {
                    detail: "move displacement must be finite".to_string(),
                });
            }
        }
    }
    Ok(())
}

struct CategoryModel {
    prototype: Vec<f64>,
    axis_a: Vec<f64>,
    axis_b: Vec<f64>,
}

fn unit_gaussian(dim: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn descriptor_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn sample_prototypes(
    spec: &ScenarioSpec,
    categories: &[String],
    rng: &mut ChaCha20Rng,
) -> Result<BTreeMap<String, CategoryModel>, GenError> {
    let dim = spec.view_model.mode.dim();
    let mut out = BTreeMap::new();
    for category in categories {
        let mut prototype = None;
        for _ in 0..1000 {
            let candidate = match spec.view_model.mode {
                DescriptorMode::Abstract { .. } => unit_gaussian(dim, rng),
                DescriptorMode::Patch { .. } => {
                    // Procedural raster in [0, 1], recentred so occlusion
                    // (zeroing) is a bounded perturbation.
                    let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
                    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                    raw.iter().map(|x| x / norm).collect()
                }
            };
            let separated = out.values().all(|m: &CategoryModel| {
                descriptor_distance(&candidate, &m.prototype) >= MIN_PROTOTYPE_SEPARATION
            });
            if separated {
                prototype = Some(candidate);
                break;
            }
        }
        let prototype = prototype.ok_or(GenError::PrototypeSpacing)?;
        out.insert(
            category.clone(),
            CategoryModel {
                prototype,
                axis_a: unit_gaussian(dim, rng),
                axis_b: unit_gaussian(dim, rng),
            },
        );
    }
    Ok(out)
}

fn sample_view(model: &CategoryModel, view_model: &ViewModel, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let dim = model.prototype.len();
    let theta = rng.random_range(0.0..TAU);
    let (s, c) = theta.sin_cos();
    let mut v = model.prototype.clone();
    for ((x, a), b) in v.iter_mut().zip(&model.axis_a).zip(&model.axis_b) {
        *x += view_model.viewpoint_amplitude * (s * a + c * b);
    }
    if view_model.noise_amplitude > 0.0 {
        let per_coord = Normal::new(0.0, view_model.noise_amplitude / (dim as f64).sqrt()).unwrap();
        for x in &mut v {
            *x += per_coord.sample(rng);
        }
    }
    let occluded = (view_model.occlusion_fraction * dim as f64).floor() as usize;
    for _ in 0..occluded {
        v[rng.random_range(0..dim)] = 0.0;
    }
    v
}

fn place(
    arena: &Arena,
    taken: &[Point3],
    avoid: &[Point3],
    avoid_clearance: f64,
    rng: &mut ChaCha20Rng,
    placed_so_far: usize,
) -> Result<Point3, GenError> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let p = [
            rng.random_range(arena.min[0]..=arena.max[0]),
            rng.random_range(arena.min[1]..=arena.max[1]),
            0.0,
        ];
        let clear = taken
            .iter()
            .all(|q| euclidean(&p, q) >= MIN_PLACEMENT_SEPARATION)
            && avoid.iter().all(|q| euclidean(&p, q) >= avoid_clearance);
        if clear {
            return Ok(p);
        }
    }
    Err(GenError::ArenaCapacity {
        placed: placed_so_far,
    })
}

struct WorkingInstance {
    class: String,
    category: String,
    position: Point3,
    removed: bool,
}

fn select<'a>(
    live: impl Iterator<Item = (usize, &'a WorkingInstance)>,
    selector: &InstanceSelector,
) -> Vec<usize> {
    live.filter(|(_, w)| {
        !w.removed && w.class == selector.semantic_class && w.category == selector.visual_category
    })
    .map(|(i, _)| i)
    .skip(selector.offset)
    .take(selector.count)
    .collect()
}

/// Generates the two-session scenario with full ground truth. Deterministic
/// per seed.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, GenError> {
    validate_spec(spec)?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let mut category_order: Vec<String> = Vec::new();
    for c in &spec.categories {
        if !category_order.contains(&c.visual_category) {
            category_order.push(c.visual_category.clone());
        }
    }
    for op in &spec.change_script {
        if let ChangeOp::Add { visual_category, .. } = op {
            if !category_order.contains(visual_category) {
                category_order.push(visual_category.clone());
            }
        }
    }
    let prototypes = sample_prototypes(spec, &category_order, &mut rng)?;

    // Session 1 layout.
    let mut session1: Vec<WorkingInstance> = Vec::new();
    let mut positions: Vec<Point3> = Vec::new();
    for cat in &spec.categories {
        for _ in 0..cat.count {
            let p = place(&spec.arena, &positions, &[], 0.0, &mut rng, positions.len())?;
            positions.push(p);
            session1.push(WorkingInstance {
                class: cat.semantic_class.clone(),
                category: cat.visual_category.clone(),
                position: p,
                removed: false,
            });
        }
    }
    let session1_positions = positions.clone();

    // Apply the change script to derive session 2.
    let mut working: Vec<WorkingInstance> = session1
        .iter()
        .map(|w| WorkingInstance {
            class: w.class.clone(),
            category: w.category.clone(),
            position: w.position,
            removed: false,
        })
        .collect();
    let mut additions: Vec<WorkingInstance> = Vec::new();
    for op in &spec.change_script {
        match op {
            ChangeOp::Move { selector, displacement } => {
                let picked = select(working.iter().enumerate(), selector);
                if picked.len() < selector.count {
                    return Err(GenError::SelectorExhausted {
                        selector: format!("{selector:?}"),
                    });
                }
                for idx in picked {
                    for (axis, d) in working[idx].position.iter_mut().zip(displacement) {
                        *axis += d;
                    }
                }
            }
            ChangeOp::Remove { selector } => {
                let picked = select(working.iter().enumerate(), selector);
                if picked.len() < selector.count {
                    return Err(GenError::SelectorExhausted {
                        selector: format!("{selector:?}"),
                    });
                }
                for idx in picked {
                    working[idx].removed = true;
                }
            }
            ChangeOp::Add {
                semantic_class,
                visual_category,
                position,
            } => {
                let current: Vec<Point3> = working
                    .iter()
                    .filter(|w| !w.removed)
                    .map(|w| w.position)
                    .chain(additions.iter().map(|a| a.position))
                    .collect();
                let p = match position {
                    Some(p) => *p,
                    None => place(
                        &spec.arena,
                        &current,
                        &session1_positions,
                        ADDITION_CLEARANCE,
                        &mut rng,
                        current.len(),
                    )?,
                };
                additions.push(WorkingInstance {
                    class: semantic_class.clone(),
                    category: visual_category.clone(),
                    position: p,
                    removed: false,
                });
            }
        }
    }

    // Materialize both sessions: snapshots, frames and truth maps.
    let s1_ids: Vec<String> = (0..session1.len())
        .map(|i| format!("s1-obj{i:03}"))
        .collect();
    let (snap1, frames1, labels1, truth1) = build_session(
        "s1",
        0,
        &s1_ids,
        &session1,
        &prototypes,
        &spec.view_model,
        &mut rng,
    );

    let mut session2: Vec<&WorkingInstance> = working.iter().filter(|w| !w.removed).collect();
    session2.extend(additions.iter());
    let s2_ids: Vec<String> = (0..session2.len())
        .map(|i| format!("s2-obj{i:03}"))
        .collect();
    let session2_owned: Vec<WorkingInstance> = session2
        .iter()
        .map(|w| WorkingInstance {
            class: w.class.clone(),
            category: w.category.clone(),
            position: w.position,
            removed: false,
        })
        .collect();
    let (snap2, frames2, labels2, truth2) = build_session(
        "s2",
        1,
        &s2_ids,
        &session2_owned,
        &prototypes,
        &spec.view_model,
        &mut rng,
    );

    // Ground-truth associations: survivors keep their slot order.
    let mut matched = Vec::new();
    let mut displacement = BTreeMap::new();
    let mut absent = BTreeSet::new();
    let mut survivor_slot = 0usize;
    for (i, w) in working.iter().enumerate() {
        if w.removed {
            absent.insert(s1_ids[i].clone());
        } else {
            let cur_id = s2_ids[survivor_slot].clone();
            displacement.insert(s1_ids[i].clone(), euclidean(&session1[i].position, &w.position));
            matched.push((s1_ids[i].clone(), cur_id));
            survivor_slot += 1;
        }
    }
    let new: BTreeSet<String> = s2_ids[survivor_slot..].iter().cloned().collect();

    Ok(Scenario {
        spec: spec.clone(),
        snapshots: vec![snap1, snap2],
        frames: vec![frames1, frames2],
        ground_truth: GroundTruth {
            schema_version: SCHEMA_VERSION,
            session_labels: vec![labels1, labels2],
            matched,
            absent,
            new,
            displacement,
            view_truth: vec![truth1, truth2],
        },
    })
}

#[allow(clippy::type_complexity)]
fn build_session(
    session_id: &str,
    time_index: i64,
    ids: &[String],
    instances: &[WorkingInstance],
    prototypes: &BTreeMap<String, CategoryModel>,
    view_model: &ViewModel,
    rng: &mut ChaCha20Rng,
) -> (
    SceneSnapshot,
    Vec<Frame>,
    BTreeMap<String, String>,
    BTreeMap<String, String>,
) {
    let (vmin, vmax) = view_model.views_per_instance;
    let mut pending: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let n_views = rng.random_range(vmin..=vmax);
        let model = &prototypes[&inst.category];
        for _ in 0..n_views {
            pending.push((i, sample_view(model, view_model, rng)));
        }
    }
    pending.shuffle(rng);

    let pos_noise = Normal::new(0.0, view_model.position_noise_sigma.max(0.0)).unwrap();
    let mut frames = Vec::new();
    let mut views_per_instance: Vec<Vec<ViewDescriptor>> = vec![Vec::new(); instances.len()];
    let mut view_truth = BTreeMap::new();
    for (frame_index, chunk) in pending.chunks(OBSERVATIONS_PER_FRAME).enumerate() {
        let mut observations = Vec::with_capacity(chunk.len());
        for (inst_idx, data) in chunk {
            let inst = &instances[*inst_idx];
            let view_id = format!("{}-v{:02}", ids[*inst_idx], views_per_instance[*inst_idx].len());
            let view = ViewDescriptor {
                view_id: view_id.clone(),
                frame_index: frame_index as u64,
                data: data.clone(),
            };
            views_per_instance[*inst_idx].push(view.clone());
            view_truth.insert(view_id, ids[*inst_idx].clone());
            let observed = [
                inst.position[0] + pos_noise.sample(rng),
                inst.position[1] + pos_noise.sample(rng),
                inst.position[2] + pos_noise.sample(rng),
            ];
            observations.push(Observation {
                semantic_class: inst.class.clone(),
                position: observed,
                view,
            });
        }
        frames.push(Frame {
            frame_index: frame_index as u64,
            observations,
        });
    }

    let mut snapshot = SceneSnapshot::new(session_id, time_index);
    let mut labels = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        snapshot.instances.push(ObjectInstance::new(
            ids[i].clone(),
            inst.class.clone(),
            inst.position,
            std::mem::take(&mut views_per_instance[i]),
        ));
        labels.insert(ids[i].clone(), inst.category.clone());
    }
    (snapshot, frames, labels, view_truth)
}

/// Train/validation split of a session's views, labeled by ground-truth
/// visual category. The split is per label (default 85/15), seeded, and the
/// training side keeps at least two items per label.
#[derive(Debug, Clone)]
pub struct TrainValSplit {
    pub train: TripletDataset,
    pub validation: Vec<DatasetItem>,
    /// Category name for each numeric label.
    pub label_names: Vec<String>,
}

pub fn make_training_set(
    snapshot: &SceneSnapshot,
    labels: &BTreeMap<String, String>,
    seed: u64,
    val_fraction: f64,
) -> Result<TrainValSplit, GenError> {
    let mut label_names: Vec<String> = labels.values().cloned().collect();
    label_names.sort();
    label_names.dedup();
    let index_of: BTreeMap<&str, u32> = label_names
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i as u32))
        .collect();

    let mut per_label: BTreeMap<u32, Vec<Vec<f64>>> = BTreeMap::new();
    for inst in &snapshot.instances {
        let Some(category) = labels.get(&inst.instance_id) else {
            return Err(GenError::BadSpec {
                detail: format!("no ground-truth label for instance {}", inst.instance_id),
            });
        };
        let label = index_of[category.as_str()];
        for view in &inst.views {
            per_label.entry(label).or_default().push(view.data.clone());
        }
    }
    for (label, views) in &per_label {
        if views.len() < 2 {
            return Err(GenError::BadSpec {
                detail: format!(
                    "category {} has {} view(s), need at least 2",
                    label_names[*label as usize],
                    views.len()
                ),
            });
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut train_items = Vec::new();
    let mut val_items = Vec::new();
    for (label, mut views) in per_label {
        views.shuffle(&mut rng);
        let n = views.len();
        let n_train = (((n as f64) * (1.0 - val_fraction)).round() as usize).clamp(2.min(n), n);
        for (k, descriptor) in views.into_iter().enumerate() {
            let item = DatasetItem { descriptor, label };
            if k < n_train {
                train_items.push(item);
            } else {
                val_items.push(item);
            }
        }
    }
    Ok(TrainValSplit {
        train: TripletDataset::new(train_items)?,
        validation: val_items,
        label_names,
    })
}

fn selector(class: &str, category: &str, offset: usize, count: usize) -> InstanceSelector {
    InstanceSelector {
        semantic_class: class.to_string(),
        visual_category: category.to_string(),
        offset,
        count,
    }
}

fn category(class: &str, visual: &str, count: usize) -> CategorySpec {
    CategorySpec {
        semantic_class: class.to_string(),
        visual_category: visual.to_string(),
        count,
    }
}

fn add(class: &str, visual: &str) -> ChangeOp {
    ChangeOp::Add {
        semantic_class: class.to_string(),
        visual_category: visual.to_string(),
        position: None,
    }
}

fn mv(class: &str, visual: &str, offset: usize, dx: f64, dy: f64) -> ChangeOp {
    ChangeOp::Move {
        selector: selector(class, visual, offset, 1),
        displacement: [dx, dy, 0.0],
    }
}

/// Named scenario presets. Object compositions and add/remove scripts follow
/// the evaluation scenes; geometry and move amounts are synthesized.
pub fn presets() -> Vec<ScenarioSpec> {
    vec![flat(), labfront(), coffeeroom(), studyhall()]
}

pub fn preset(name: &str) -> Option<ScenarioSpec> {
    presets().into_iter().find(|p| p.name == name)
}

pub fn preset_names() -> Vec<String> {
    presets().into_iter().map(|p| p.name).collect()
}

fn base_spec(name: &str, arena: Arena) -> ScenarioSpec {
    ScenarioSpec {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        categories: Vec::new(),
        change_script: Vec::new(),
        view_model: ViewModel::default(),
        arena,
        seed: 7,
    }
}

fn flat() -> ScenarioSpec {
    let mut spec = base_spec("flat", Arena::planar(8.0, 6.0));
    spec.categories = vec![
        category("chair", "chair:1", 2),
        category("table", "table:1", 1),
        category("table", "table:2", 1),
        category("picture", "picture:1", 2),
        category("picture", "picture:2", 2),
        category("bed", "bed:1", 1),
        category("picture", "picture:3", 1),
        category("picture", "picture:4", 1),
        category("picture", "picture:5", 1),
        category("lamp", "lamp:u1", 1),
        category("journal", "journal:1", 1),
        category("journal", "journal:2", 1),
    ];
    spec.change_script = vec![
        mv("chair", "chair:1", 0, 0.35, 0.2),
        mv("picture", "picture:2", 1, 0.0, 0.4),
        mv("journal", "journal:1", 0, 0.3, -0.25),
        mv("table", "table:1", 0, -0.3, 0.15),
        ChangeOp::Remove {
            selector: selector("journal", "journal:2", 0, 1),
        },
        ChangeOp::Remove {
            selector: selector("bed", "bed:1", 0, 1),
        },
        add("chair", "chair:2"),
        add("journal", "journal:3"),
        add("bed", "bed:2"),
        add("table", "table:3"),
        add("laptop", "laptop:u1"),
        add("coffee_machine", "coffee_machine:u1"),
    ];
    spec
}

fn labfront() -> ScenarioSpec {
    let mut spec = base_spec("labfront", Arena::planar(9.0, 8.0));
    spec.categories = vec![
        category("chair", "chair:1", 15),
        category("table", "table:1", 3),
    ];
    spec.change_script = vec![
        mv("chair", "chair:1", 3, 0.3, 0.15),
        mv("chair", "chair:1", 4, -0.25, 0.3),
        mv("chair", "chair:1", 5, 0.2, -0.35),
        mv("table", "table:1", 0, 0.3, 0.0),
        ChangeOp::Remove {
            selector: selector("chair", "chair:1", 0, 3),
        },
        add("chair", "chair:2"),
        add("chair", "chair:3"),
        add("chair", "chair:4"),
    ];
    spec
}

fn coffeeroom() -> ScenarioSpec {
    let mut spec = base_spec("coffeeroom", Arena::planar(8.0, 6.0));
    spec.categories = vec![
        category("chair", "chair:1", 7),
        category("chair", "chair:2", 1),
        category("chair", "chair:3", 2),
        category("table", "table:1", 1),
        category("table", "table:2", 1),
        category("table", "table:3", 1),
        category("couch", "couch:u1", 1),
        category("couch", "couch:u2", 1),
    ];
    spec.change_script = vec![
        mv("chair", "chair:1", 1, 0.3, 0.2),
        mv("chair", "chair:1", 2, -0.3, 0.2),
        mv("chair", "chair:2", 0, 0.25, -0.3),
        mv("couch", "couch:u2", 0, 0.2, 0.2),
        ChangeOp::Remove {
            selector: selector("chair", "chair:1", 0, 1),
        },
        ChangeOp::Remove {
            selector: selector("chair", "chair:3", 0, 1),
        },
        add("chair", "chair:4"),
        add("chair", "chair:5"),
    ];
    spec
}

fn studyhall() -> ScenarioSpec {
    let mut spec = base_spec("studyhall", Arena::planar(14.0, 10.0));
    spec.categories = vec![
        category("chair", "chair:1", 25),
        category("chair", "chair:2", 3),
        category("chair", "chair:3", 2),
        category("table", "table:1", 10),
        category("table", "table:2", 1),
        category("couch", "couch:u1", 1),
        category("couch", "couch:u2", 1),
    ];
    spec.change_script = vec![
        mv("chair", "chair:1", 2, 0.35, 0.1),
        mv("chair", "chair:1", 3, 0.1, 0.35),
        mv("chair", "chair:1", 4, -0.3, 0.2),
        mv("chair", "chair:1", 5, 0.25, -0.25),
        mv("chair", "chair:2", 1, 0.28, 0.28),
        mv("table", "table:1", 1, 0.3, -0.1),
        ChangeOp::Remove {
            selector: selector("chair", "chair:2", 0, 1),
        },
        ChangeOp::Remove {
            selector: selector("chair", "chair:3", 0, 2),
        },
        ChangeOp::Remove {
            selector: selector("table", "table:1", 0, 1),
        },
        ChangeOp::Remove {
            selector: selector("couch", "couch:u1", 0, 1),
        },
        add("chair", "chair:1"),
        add("chair", "chair:1"),
        add("chair", "chair:4"),
    ];
    spec
}
