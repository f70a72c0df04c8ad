//! End-to-end pipeline tests on generated scenes, plus property tests for
//! the serialization round trip and set-F1 conventions.
//!
//! Scenes here use a trivial view model (no viewpoint component, low noise)
//! so a fresh seeded model is already category-faithful and nothing needs
//! training; the embedding quality itself is covered by the acceptance
//! suite.

use std::collections::BTreeSet;

use proptest::prelude::*;

use rematch::clustering::{cluster_snapshot, ClusterConfig};
use rematch::embedding::EmbeddingModel;
use rematch::evaluation::f1_sets;
use rematch::matching::{detect_changes, greedy_detect_changes, MatchConfig};
use rematch::online::{self, OnlineConfig};
use rematch::scene::{
    apply_change_report, validate_snapshot, ObjectInstance, SceneSnapshot, ViewDescriptor,
};
use rematch::scenegen::{generate, preset, Frame, Scenario, ScenarioSpec};

fn easy_views(spec: &mut ScenarioSpec) {
    spec.view_model.viewpoint_amplitude = 0.0;
    spec.view_model.noise_amplitude = 0.02;
    spec.view_model.occlusion_fraction = 0.0;
}

fn easy_scenario(name: &str, seed: u64) -> (Scenario, EmbeddingModel) {
    let mut spec = preset(name).unwrap();
    easy_views(&mut spec);
    spec.seed = seed;
    let scenario = generate(&spec).unwrap();
    let model = EmbeddingModel::seeded(&[192, 64, 32], true, 1.0, 3).unwrap();
    (scenario, model)
}

const GAMMA: f64 = 0.5;

fn clustered(snapshot: &SceneSnapshot, model: &EmbeddingModel) -> SceneSnapshot {
    cluster_snapshot(snapshot, model, &ClusterConfig::new(GAMMA).unwrap()).unwrap()
}

#[test]
fn flat_scene_changes_detected_in_full() {
    let (scenario, model) = easy_scenario("flat", 7);
    let reference = clustered(&scenario.snapshots[0], &model);
    let current = clustered(&scenario.snapshots[1], &model);
    let report = detect_changes(&reference, &current, &MatchConfig::new(GAMMA).unwrap()).unwrap();

    let gt = &scenario.ground_truth;
    assert_eq!(report.new.len(), 6);
    assert_eq!(report.absent.len(), 2);
    assert_eq!(report.new, gt.new);
    assert_eq!(report.absent, gt.absent);
    assert!((report.total_distance - gt.total_displacement()).abs() < 1e-9);
}

#[test]
fn applying_the_flat_report_grows_the_scene_by_four() {
    let (scenario, model) = easy_scenario("flat", 7);
    let reference = clustered(&scenario.snapshots[0], &model);
    let current = clustered(&scenario.snapshots[1], &model);
    let report = detect_changes(&reference, &current, &MatchConfig::new(GAMMA).unwrap()).unwrap();

    let updated = apply_change_report(&reference, &current, &report).unwrap();
    assert_eq!(
        updated.instances.len(),
        reference.instances.len() - 2 + 6
    );
    assert!(validate_snapshot(&updated).is_empty());
    // Matched survivors keep their identity and gain one history entry.
    for pair in &report.matched {
        let inst = updated.instance(&pair.ref_instance_id).unwrap();
        let before = reference.instance(&pair.ref_instance_id).unwrap();
        assert_eq!(inst.position_history.len(), before.position_history.len() + 1);
        assert!(inst.views.len() >= before.views.len());
    }
    // Re-clustering the updated snapshot restores the partition invariant.
    let reclustered = clustered(&updated, &model);
    assert!(reclustered.is_clustered());
}

#[test]
fn greedy_travel_distance_never_beats_clustered() {
    for seed in [3u64, 11, 29] {
        let (scenario, model) = easy_scenario("coffeeroom", seed);
        let reference = clustered(&scenario.snapshots[0], &model);
        let current = clustered(&scenario.snapshots[1], &model);
        let config = MatchConfig::new(GAMMA).unwrap();
        let optimal = detect_changes(&reference, &current, &config).unwrap();
        let greedy = greedy_detect_changes(
            &scenario.snapshots[0],
            &scenario.snapshots[1],
            &model,
            &config,
        )
        .unwrap();
        if greedy.matched.len() == optimal.matched.len() {
            assert!(
                greedy.total_distance >= optimal.total_distance - 1e-9,
                "seed {seed}: greedy {} < clustered {}",
                greedy.total_distance,
                optimal.total_distance
            );
        }
        // Both reports partition both snapshots whatever happened.
        for report in [&optimal, &greedy] {
            let mut ref_side = report.matched_ref_ids();
            ref_side.extend(report.absent.iter().cloned());
            assert_eq!(ref_side, scenario.snapshots[0].instance_ids());
            let mut cur_side = report.matched_cur_ids();
            cur_side.extend(report.new.iter().cloned());
            assert_eq!(cur_side, scenario.snapshots[1].instance_ids());
        }
    }
}

#[test]
fn online_prefix_marks_unseen_reference_objects_absent() {
    let (scenario, model) = easy_scenario("coffeeroom", 7);
    let reference = clustered(&scenario.snapshots[0], &model);
    let mut state = online::init(&reference, &model, OnlineConfig::new(GAMMA).unwrap()).unwrap();

    // One observation only: at most one current node exists, so all but at
    // most one reference instance must be reported absent for now.
    let first = &scenario.frames[1][0];
    let single = Frame {
        frame_index: 0,
        observations: vec![first.observations[0].clone()],
    };
    state.process_frame(&single).unwrap();
    let interim = state.finalize().unwrap();
    assert!(interim.absent.len() >= reference.instances.len() - 1);
    assert_eq!(
        interim.matched.len() + interim.new.len(),
        state.instance_count()
    );
}

// ---- property tests -------------------------------------------------------

fn view_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0e3..1.0e3f64, dim)
}

fn snapshot_strategy() -> impl Strategy<Value = SceneSnapshot> {
    let instance = (
        0u32..3,
        prop::collection::vec(-10.0..10.0f64, 3),
        prop::collection::vec(view_strategy(4), 1..4),
    );
    prop::collection::vec(instance, 1..6).prop_map(|raw| {
        let mut snapshot = SceneSnapshot::new("prop", 0);
        for (i, (class, pos, views)) in raw.into_iter().enumerate() {
            let position = [pos[0], pos[1], pos[2]];
            let views = views
                .into_iter()
                .enumerate()
                .map(|(k, data)| ViewDescriptor {
                    view_id: format!("i{i}-v{k}"),
                    frame_index: k as u64,
                    data,
                })
                .collect();
            snapshot.instances.push(ObjectInstance::new(
                format!("i{i}"),
                format!("class{class}"),
                position,
                views,
            ));
        }
        snapshot
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Serializing then deserializing a snapshot yields a structurally
    /// equal snapshot, including through a clustering pass.
    #[test]
    fn snapshot_serialization_round_trips(snapshot in snapshot_strategy(), gamma in 0.0..4.0f64) {
        let text = serde_json::to_string(&snapshot).unwrap();
        let mut loaded: SceneSnapshot = serde_json::from_str(&text).unwrap();
        loaded.rebuild_view_libraries();
        prop_assert_eq!(&loaded, &snapshot);
        prop_assert!(validate_snapshot(&snapshot).is_empty());

        let model = EmbeddingModel::seeded(&[4, 3], true, 1.0, 5).unwrap();
        let clustered = cluster_snapshot(&snapshot, &model, &ClusterConfig::new(gamma).unwrap()).unwrap();
        prop_assert!(clustered.is_clustered());
        let text = serde_json::to_string(&clustered).unwrap();
        let mut loaded: SceneSnapshot = serde_json::from_str(&text).unwrap();
        loaded.rebuild_view_libraries();
        prop_assert_eq!(loaded, clustered);
    }

    /// Set F1 is symmetric, bounded and 1.0 exactly on equal sets.
    #[test]
    fn f1_sets_properties(
        a in prop::collection::btree_set("[a-e]", 0..6),
        b in prop::collection::btree_set("[a-e]", 0..6),
    ) {
        let a: BTreeSet<String> = a.into_iter().collect();
        let b: BTreeSet<String> = b.into_iter().collect();
        let forward = f1_sets(&a, &b);
        prop_assert_eq!(forward, f1_sets(&b, &a));
        prop_assert!((0.0..=1.0).contains(&forward));
        prop_assert_eq!(forward == 1.0, a == b);
    }
}
