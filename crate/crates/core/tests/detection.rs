mod common;

use common::*;
use covisloop::detection::{
    coarse_sim3, detect_loop_traced, match_points, match_vertices, min_score_threshold, object_inliers, object_pairs,
    refine_sim3, report_is_consistent, Candidate, ObjectPair, TemporalConsistency, VertexMatch, VertexMatchSet,
};
use covisloop::harness::run_online;
use covisloop::{
    detect_loop, CovisibilityGraph, DetectionParams, KeyframeId, KeyframeRecord, LandmarkId, MapDatabase, Pose,
    Rejection, Scenario, Sim3,
};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const LOOP_ID: u64 = 0;
const CURRENT_ID: u64 = 60;
const LANDMARK_OFFSET: u64 = 100;

fn frame_bow_for(objs: &[Obj], points: &[(u64, Vector3<f64>, u32)]) -> covisloop::BowVector {
    let mut b = covisloop::BowVector::new();
    for o in objs {
        for (w, x) in o.patch.iter() {
            b.add(w, x);
        }
    }
    for &(_, _, w) in points {
        b.add(w, 1.0);
    }
    b
}

/// The loop keyframe, and the same view seen through `drift` by a
/// keyframe sixty ids later.
fn two_views(drift: &Sim3) -> (KeyframeRecord, KeyframeRecord) {
    let objs = scene_objects();
    let points = wall_points();
    let loop_rec = keyframe(LOOP_ID, forward_pose(), &objs, &points, frame_bow_for(&objs, &points));
    let cur_objs = drifted_objects(&objs, drift, LANDMARK_OFFSET);
    let cur_points = drifted_points(&points, drift);
    let cur_pose = drift.inverse().transform_pose(&forward_pose());
    let current = keyframe(
        CURRENT_ID,
        cur_pose,
        &cur_objs,
        &cur_points,
        frame_bow_for(&cur_objs, &cur_points),
    );
    (loop_rec, current)
}

fn database(records: impl IntoIterator<Item = KeyframeRecord>, edge_threshold: u32) -> MapDatabase {
    let mut db = MapDatabase::with_graph(CovisibilityGraph::new(edge_threshold));
    for r in records {
        db.integrate(r).unwrap();
    }
    db
}

fn two_view_db(edge_threshold: u32) -> MapDatabase {
    let (a, b) = two_views(&known_drift());
    database([a, b], edge_threshold)
}

#[test]
fn empty_and_single_keyframe_maps_detect_nothing() {
    let params = DetectionParams::default();
    assert!(detect_loop(&MapDatabase::new(), KeyframeId(0), &params).is_none());
    let (a, _) = two_views(&known_drift());
    let db = database([a], 3);
    assert!(detect_loop(&db, KeyframeId(LOOP_ID), &params).is_none());
}

#[test]
fn known_similarity_is_recovered_by_both_stages() {
    let db = two_view_db(1);
    let params = DetectionParams::default();
    let trace = detect_loop_traced(&db, KeyframeId(CURRENT_ID), &params);
    assert_eq!(trace.s_min, params.s_min_floor);
    let report = trace.report.expect("loop is detected");
    assert_eq!(report.loop_kf, KeyframeId(LOOP_ID));
    assert_eq!(report.match_set.count, 5);
    assert!(report
        .match_set
        .matches
        .iter()
        .all(|m| m.candidate.0 + LANDMARK_OFFSET == m.current.0));
    assert_eq!(report.coarse.inlier_count, 5);
    assert_eq!(report.coarse.inlier_ratio, 1.0);
    assert!(report.coarse.transform.deviation(&known_drift()).max() < 1e-6);
    assert!((report.edge_score - 1.0).abs() < 1e-9);
    assert!(report.refined.deviation(&known_drift()).max() < 1e-9);
    assert!(report.refine_inliers >= 40);
    assert!(report_is_consistent(&report, &params));
}

#[test]
fn edgeless_subgraphs_skip_the_edge_test_only_when_allowed() {
    let db = two_view_db(3);
    let mut params = DetectionParams::default();
    let report = detect_loop(&db, KeyframeId(CURRENT_ID), &params).expect("skip allowed");
    assert_eq!(report.edge_score, 0.0);
    params.skip_edge_test_without_edges = false;
    let trace = detect_loop_traced(&db, KeyframeId(CURRENT_ID), &params);
    assert!(trace.report.is_none());
    assert!(matches!(
        trace.rejections[0].rejection,
        Rejection::LowEdgeSimilarity { .. }
    ));
}

#[test]
fn identical_views_match_themselves() {
    let (loop_rec, _) = two_views(&known_drift());
    let copy = KeyframeRecord {
        id: KeyframeId(CURRENT_ID),
        object_obs: loop_rec
            .object_obs
            .iter()
            .map(|o| covisloop::ObjectObservation {
                landmark: o.landmark.map(|l| LandmarkId(l.0 + LANDMARK_OFFSET)),
                ..o.clone()
            })
            .collect(),
        ..loop_rec.clone()
    };
    let db = database([loop_rec, copy], 1);
    let params = DetectionParams::default();
    let report = detect_loop(&db, KeyframeId(CURRENT_ID), &params).unwrap();
    assert!((report.match_set.average_score - 1.0).abs() < 1e-7);
    assert!((report.edge_score - 1.0).abs() < 1e-9);
    assert!(report.coarse.transform.deviation(&Sim3::identity()).max() < 1e-6);
    assert!(report.refined.deviation(&Sim3::identity()).max() < 1e-9);
}

/// Three objects per side with crafted patches so that matched pairs score
/// `targets` and every cross pair scores zero.
fn crafted_pair_db(targets: [f64; 3]) -> MapDatabase {
    let base = scene_objects();
    let mut loop_objs = Vec::new();
    let mut cur_objs = Vec::new();
    for (i, &t) in targets.iter().enumerate() {
        let w = 10 * i as u32;
        let o = Obj {
            class: 0,
            ..base[i].clone()
        };
        loop_objs.push(Obj {
            patch: bow(&[(w, 1.0)]),
            ..o.clone()
        });
        cur_objs.push(Obj {
            landmark: o.landmark + LANDMARK_OFFSET,
            patch: bow(&[(w, t), (w + 1, 1.0 - t)]),
            ..o
        });
    }
    let fb = bow(&[(5000, 1.0)]);
    let a = keyframe(LOOP_ID, forward_pose(), &loop_objs, &[], fb.clone());
    let b = keyframe(CURRENT_ID, forward_pose(), &cur_objs, &[], fb);
    database([a, b], 3)
}

fn match_crafted(targets: [f64; 3]) -> Result<VertexMatchSet, Rejection> {
    let db = crafted_pair_db(targets);
    let g = db.graph();
    let g_c = g.subgraph_for(KeyframeId(CURRENT_ID)).unwrap();
    let g_l = g.subgraph_for(KeyframeId(LOOP_ID)).unwrap();
    match_vertices(g, &g_c, &g_l, KeyframeId(CURRENT_ID), KeyframeId(LOOP_ID), 0.3, 0.008)
}

#[test]
fn average_similarity_gate_passes_example_scores() {
    let set = match_crafted([0.5, 0.4, 0.3]).unwrap();
    assert_eq!(set.count, 3);
    assert!((set.total_score - 1.2).abs() < 1e-7);
    assert!((set.average_score - 0.4).abs() < 1e-7);
}

#[test]
fn average_similarity_gate_rejects_weak_matchings() {
    match match_crafted([0.01, 0.01, 0.01]) {
        Err(Rejection::LowAverageSimilarity { average }) => assert!((average - 0.01).abs() < 1e-7),
        other => panic!("expected a low average rejection, got {other:?}"),
    }
}

#[test]
fn coarse_needs_three_matches() {
    let db = two_view_db(1);
    let g = db.graph();
    let set = VertexMatchSet::from_matches(
        (0..2)
            .map(|i| VertexMatch {
                current: LandmarkId(i + LANDMARK_OFFSET),
                candidate: LandmarkId(i),
                score: 0.9,
            })
            .collect(),
    );
    let cur = db.keyframe(KeyframeId(CURRENT_ID)).unwrap();
    let cand = db.keyframe(KeyframeId(LOOP_ID)).unwrap();
    let err = coarse_sim3(g, &set, cur, cand, &DetectionParams::default(), 0).unwrap_err();
    assert_eq!(err, Rejection::TooFewMatches { count: 2 });
}

#[test]
fn scale_gap_excludes_mismatched_sizes() {
    let db = two_view_db(1);
    let cur = db.keyframe(KeyframeId(CURRENT_ID)).unwrap();
    let cand = db.keyframe(KeyframeId(LOOP_ID)).unwrap();
    let id = Sim3::identity();
    let center = Vector3::new(4.0, 0.0, 1.5);
    let pair = |current_major, candidate_major| ObjectPair {
        current_center: center,
        candidate_center: center,
        current_major,
        candidate_major,
    };
    let pairs = [pair(1.0, 0.3), pair(1.0, 0.9)];
    // Both poses are near the origin, so reprojection alone would accept both.
    let inliers = object_inliers(&id, &pairs, cur, cand, &DetectionParams::default());
    assert_eq!(inliers, vec![1]);
}

#[test]
fn coarse_pairs_follow_the_match_set() {
    let db = two_view_db(1);
    let g = db.graph();
    let set = VertexMatchSet::from_matches(vec![VertexMatch {
        current: LandmarkId(LANDMARK_OFFSET + 2),
        candidate: LandmarkId(2),
        score: 1.0,
    }]);
    let p = object_pairs(g, &set)[0];
    assert!((known_drift().apply(&p.current_center) - p.candidate_center).norm() < 1e-12);
    assert!((p.current_major * known_drift().scale() - p.candidate_major).abs() < 1e-12);
}

#[test]
fn refinement_needs_shared_point_words() {
    let (loop_rec, mut current) = two_views(&known_drift());
    for p in &mut current.point_obs {
        p.word += 50_000;
    }
    let params = DetectionParams::default();
    assert!(match_points(&current, &loop_rec, &known_drift(), &params).is_empty());
    let err = refine_sim3(&current, &loop_rec, &known_drift(), &params, 0).unwrap_err();
    assert!(matches!(err, Rejection::InsufficientPointInliers { inliers: 0, .. }));
}

/// Gaussian perturbation of every object center and point position in the
/// current view.
fn perturbed(current: &KeyframeRecord, object_sigma: f64, point_sigma: f64, seed: u64) -> KeyframeRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |sigma: f64| {
        let n = Normal::new(0.0, sigma).unwrap();
        Vector3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng))
    };
    let mut out = current.clone();
    for o in &mut out.object_obs {
        o.center += jitter(object_sigma);
    }
    for p in &mut out.point_obs {
        p.position += jitter(point_sigma);
    }
    out
}

#[test]
fn points_refine_a_noisy_object_estimate() {
    let params = DetectionParams::default();
    let (loop_rec, current) = two_views(&known_drift());
    let (mut coarse_err, mut fine_err) = (0.0, 0.0);
    let mut runs = 0;
    for seed in 0..20 {
        let noisy = perturbed(&current, 0.03, 0.003, seed);
        let db = database([loop_rec.clone(), noisy.clone()], 1);
        let g = db.graph();
        let g_c = g.subgraph_for(noisy.id).unwrap();
        let g_l = g.subgraph_for(loop_rec.id).unwrap();
        let set = match_vertices(g, &g_c, &g_l, noisy.id, loop_rec.id, params.tau_as, params.tau_n).unwrap();
        let Ok(coarse) = coarse_sim3(g, &set, &noisy, &loop_rec, &params, seed) else {
            continue;
        };
        let fine = refine_sim3(&noisy, &loop_rec, &coarse.transform, &params, seed).unwrap();
        coarse_err += coarse.transform.deviation(&known_drift()).translation;
        fine_err += fine.transform.deviation(&known_drift()).translation;
        runs += 1;
    }
    assert!(runs >= 15, "coarse stage accepted only {runs} of 20");
    assert!(fine_err < coarse_err, "fine {fine_err} vs coarse {coarse_err}");
}

fn bow_only(id: u64, position: Vector3<f64>, landmark: u64, words: &[(u32, f64)]) -> KeyframeRecord {
    let pose = Pose::new(forward_pose().rotation().to_owned(), position);
    let obj = Obj {
        landmark,
        center: position + Vector3::new(4.0, 0.0, 0.0),
        ..scene_objects()[2].clone()
    };
    keyframe(id, pose, &[obj], &[], bow(words))
}

#[test]
fn min_score_is_lowest_neighbor_score() {
    let origin = Vector3::new(0.0, 0.0, 1.5);
    let db = database(
        [
            bow_only(0, origin, 7, &[(1, 1.0)]),
            bow_only(1, origin, 7, &[(1, 0.4), (2, 0.6)]),
            bow_only(2, origin, 7, &[(1, 0.6), (3, 0.4)]),
        ],
        3,
    );
    assert!((min_score_threshold(&db, KeyframeId(0), 0.05) - 0.4).abs() < 1e-12);

    let db = database(
        [bow_only(0, origin, 7, &[(1, 1.0)]), bow_only(1, origin, 7, &[(1, 2.0)])],
        3,
    );
    assert!((min_score_threshold(&db, KeyframeId(0), 0.05) - 1.0).abs() < 1e-12);

    let db = database(
        [bow_only(0, origin, 7, &[(1, 1.0)]), bow_only(1, origin, 8, &[(1, 1.0)])],
        3,
    );
    assert_eq!(min_score_threshold(&db, KeyframeId(0), 0.05), 0.05);
}

#[test]
fn consistency_emits_on_the_third_consecutive_query() {
    let origin = Vector3::new(0.0, 0.0, 1.5);
    let db = database([bow_only(0, origin, 7, &[(1, 1.0)])], 3);
    let mut tc = TemporalConsistency::new(3);
    let c = Candidate {
        keyframe: KeyframeId(0),
        score: 0.5,
    };
    assert!(tc.update(&db, &[c]).is_empty());
    assert!(tc.update(&db, &[c]).is_empty());
    assert_eq!(tc.update(&db, &[c]), vec![c]);
    assert!(tc.update(&db, &[]).is_empty());
    assert!(tc.update(&db, &[c]).is_empty());
}

#[test]
fn online_runs_are_deterministic_and_reports_consistent() {
    let params = DetectionParams::default();
    let records = Scenario::single_loop().generate(3).unwrap().keyframes().to_vec();
    let a = run_online(&records, &params).unwrap();
    let b = run_online(&records, &params).unwrap();
    let ja = serde_json::to_string(&a.reports()).unwrap();
    let jb = serde_json::to_string(&b.reports()).unwrap();
    assert_eq!(ja, jb);
    assert!(!a.reports().is_empty());
    assert!(a.reports().iter().all(|r| report_is_consistent(r, &params)));
}

#[test]
fn twin_floor_is_never_closed_across_floors() {
    let params = DetectionParams::default();
    let sim = Scenario::two_floor_twin().generate(1).unwrap();
    let records = sim.keyframes();
    let run = run_online(records, &params).unwrap();
    let floor = |id: KeyframeId| records[id.0 as usize].gt_pose.translation().z > 2.0;
    for r in run.reports() {
        assert_eq!(
            floor(r.current_kf),
            floor(r.loop_kf),
            "{} closed with {}",
            r.current_kf,
            r.loop_kf
        );
    }
}
