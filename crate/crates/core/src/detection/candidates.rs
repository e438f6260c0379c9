//! Appearance-based candidate proposal and temporal consistency.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::descriptors::l1_similarity;
use crate::keyframe::KeyframeId;
use crate::map::MapDatabase;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub keyframe: KeyframeId,
    /// Whole-frame BoW score against the query.
    pub score: f64,
}

fn frame_score(db: &MapDatabase, a: KeyframeId, b: KeyframeId) -> f64 {
    match (db.keyframe(a), db.keyframe(b)) {
        (Some(x), Some(y)) => l1_similarity(&x.frame_bow, &y.frame_bow).unwrap_or(0.0),
        _ => 0.0,
    }
}

/// Lowest BoW score between `kf` and any keyframe sharing a landmark with
/// it, or `floor` when there is none.
pub fn min_score_threshold(db: &MapDatabase, kf: KeyframeId, floor: f64) -> f64 {
    db.covisible_neighbors(kf)
        .into_iter()
        .map(|n| frame_score(db, kf, n))
        .min_by(f64::total_cmp)
        .unwrap_or(floor)
}

/// Keyframes at least `min_gap` ids older than `kf`, not covisible with it,
/// with a positive BoW score of at least `s_min`. Sorted by descending score,
/// then ascending id.
pub fn raw_candidates(db: &MapDatabase, kf: KeyframeId, s_min: f64, min_gap: u64) -> Vec<Candidate> {
    let Some(query) = db.keyframe(kf) else {
        return Vec::new();
    };
    let neighbors = db.covisible_neighbors(kf);
    let mut out: Vec<Candidate> = db
        .keyframes()
        .filter(|k| k.id < kf && kf.0 - k.id.0 >= min_gap && !neighbors.contains(&k.id))
        .filter_map(|k| {
            let score = l1_similarity(&query.frame_bow, &k.frame_bow).ok()?;
            (score > 0.0 && score >= s_min).then_some(Candidate { keyframe: k.id, score })
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.keyframe.cmp(&b.keyframe)));
    out
}

/// Tracks groups of candidate keyframes across consecutive queries. A group is
/// a candidate plus its covisible neighbors; it is consistent with a group
/// from the previous query when the two share a keyframe.
#[derive(Debug, Clone, Default)]
pub struct TemporalConsistency {
    required: u32,
    groups: Vec<(BTreeSet<KeyframeId>, u32)>,
}

impl TemporalConsistency {
    pub fn new(required: u32) -> Self {
        Self {
            required: required.max(1),
            groups: Vec::new(),
        }
    }

    pub fn reset(&mut self) {
        self.groups.clear();
    }

    /// Feeds one query's candidates; returns those whose group has now been
    /// seen on `required` consecutive queries, in input order.
    pub fn update(&mut self, db: &MapDatabase, candidates: &[Candidate]) -> Vec<Candidate> {
        let mut next: Vec<(BTreeSet<KeyframeId>, u32)> = Vec::new();
        let mut extended = vec![false; self.groups.len()];
        let mut out = Vec::new();
        for c in candidates {
            let mut group = db.covisible_neighbors(c.keyframe);
            group.insert(c.keyframe);
            let mut consistent = false;
            let mut emitted = false;
            for (k, (prev, count)) in self.groups.iter().enumerate() {
                if prev.is_disjoint(&group) {
                    continue;
                }
                consistent = true;
                let count = count + 1;
                if !extended[k] {
                    next.push((group.clone(), count));
                    extended[k] = true;
                }
                if count >= self.required && !emitted {
                    out.push(*c);
                    emitted = true;
                }
            }
            if !consistent {
                if self.required <= 1 {
                    out.push(*c);
                }
                next.push((group, 1));
            }
        }
        self.groups = next;
        out
    }
}
