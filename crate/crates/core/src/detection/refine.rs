//! Point-level refinement of the coarse similarity.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::DetectionParams;
use super::Rejection;
use crate::geometry::{horn_sim3, project, Sim3};
use crate::keyframe::KeyframeRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    /// Maps current-frame coordinates into the candidate's frame.
    pub transform: Sim3,
    pub inliers: usize,
    pub point_matches: usize,
}

fn words(kf: &KeyframeRecord) -> BTreeMap<u32, Vec<usize>> {
    let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, p) in kf.point_obs.iter().enumerate() {
        out.entry(p.word).or_default().push(i);
    }
    out
}

/// Point correspondences `(current index, candidate index)`.
///
/// Words that occur exactly once in each keyframe match directly. Remaining
/// points are matched by projecting through `coarse` (and its inverse) and
/// taking the nearest unmatched point with the same word inside the search
/// radius.
pub fn match_points(
    current: &KeyframeRecord,
    candidate: &KeyframeRecord,
    coarse: &Sim3,
    params: &DetectionParams,
) -> Vec<(usize, usize)> {
    let cur_words = words(current);
    let cand_words = words(candidate);
    let mut cur_used = vec![false; current.point_obs.len()];
    let mut cand_used = vec![false; candidate.point_obs.len()];
    let mut out = Vec::new();

    for (word, ci) in &cur_words {
        if let Some(li) = cand_words.get(word) {
            if ci.len() == 1 && li.len() == 1 {
                cur_used[ci[0]] = true;
                cand_used[li[0]] = true;
                out.push((ci[0], li[0]));
            }
        }
    }

    let radius = params.refine_search_radius_px;
    let inverse = coarse.inverse();
    for (j, p) in candidate.point_obs.iter().enumerate() {
        if cand_used[j] {
            continue;
        }
        let Ok(px) = project(&current.camera, &current.est_pose, &inverse.apply(&p.position)) else {
            continue;
        };
        let best = cur_words
            .get(&p.word)
            .into_iter()
            .flatten()
            .filter(|&&i| !cur_used[i])
            .map(|&i| ((current.point_obs[i].pixel - px).norm(), i))
            .filter(|(d, _)| *d <= radius)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, i)) = best {
            cur_used[i] = true;
            cand_used[j] = true;
            out.push((i, j));
        }
    }
    for (i, p) in current.point_obs.iter().enumerate() {
        if cur_used[i] {
            continue;
        }
        let Ok(px) = project(&candidate.camera, &candidate.est_pose, &coarse.apply(&p.position)) else {
            continue;
        };
        let best = cand_words
            .get(&p.word)
            .into_iter()
            .flatten()
            .filter(|&&j| !cand_used[j])
            .map(|&j| ((candidate.point_obs[j].pixel - px).norm(), j))
            .filter(|(d, _)| *d <= radius)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, j)) = best {
            cur_used[i] = true;
            cand_used[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

struct Correspondences<'a> {
    current: &'a KeyframeRecord,
    candidate: &'a KeyframeRecord,
    src: Vec<Vector3<f64>>,
    dst: Vec<Vector3<f64>>,
}

impl Correspondences<'_> {
    fn inliers(&self, transform: &Sim3, max_px: f64) -> Vec<usize> {
        let inverse = transform.inverse();
        (0..self.src.len())
            .filter(|&k| {
                let fwd = project(
                    &self.candidate.camera,
                    &self.candidate.est_pose,
                    &transform.apply(&self.src[k]),
                );
                let seen_l = project(&self.candidate.camera, &self.candidate.est_pose, &self.dst[k]);
                let back = project(
                    &self.current.camera,
                    &self.current.est_pose,
                    &inverse.apply(&self.dst[k]),
                );
                let seen_c = project(&self.current.camera, &self.current.est_pose, &self.src[k]);
                match (fwd, seen_l, back, seen_c) {
                    (Ok(a), Ok(b), Ok(c), Ok(d)) => (a - b).norm() < max_px && (c - d).norm() < max_px,
                    _ => false,
                }
            })
            .collect()
    }

    fn fit(&self, idx: &[usize]) -> Option<Sim3> {
        let src: Vec<_> = idx.iter().map(|&k| self.src[k]).collect();
        let dst: Vec<_> = idx.iter().map(|&k| self.dst[k]).collect();
        horn_sim3(&src, &dst).ok()
    }
}

/// Estimates the fine similarity from matched map points: RANSAC over
/// minimal samples, then least-squares refits on the consensus set.
pub fn refine_sim3(
    current: &KeyframeRecord,
    candidate: &KeyframeRecord,
    coarse: &Sim3,
    params: &DetectionParams,
    seed: u64,
) -> Result<RefineResult, Rejection> {
    let matches = match_points(current, candidate, coarse, params);
    let corr = Correspondences {
        current,
        candidate,
        src: matches.iter().map(|&(i, _)| current.point_obs[i].position).collect(),
        dst: matches.iter().map(|&(_, j)| candidate.point_obs[j].position).collect(),
    };
    let n = matches.len();
    let reject = |inliers| Rejection::InsufficientPointInliers {
        inliers,
        point_matches: n,
    };
    if n < 3 {
        return Err(reject(0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Vec<usize> = Vec::new();
    for _ in 0..params.max_ransac_iters {
        let idx = sample(&mut rng, n, 3).into_vec();
        let Some(model) = corr.fit(&idx) else {
            continue;
        };
        let inliers = corr.inliers(&model, params.refine_inlier_px);
        if inliers.len() > best.len() {
            best = inliers;
        }
    }
    if best.len() < 3 {
        return Err(reject(best.len()));
    }

    let mut transform = corr.fit(&best).ok_or_else(|| reject(best.len()))?;
    for _ in 0..2 {
        let inliers = corr.inliers(&transform, params.refine_inlier_px);
        if inliers.len() < 3 || inliers == best {
            break;
        }
        match corr.fit(&inliers) {
            Some(t) => {
                transform = t;
                best = inliers;
            }
            None => break,
        }
    }
    let inliers = corr.inliers(&transform, params.refine_inlier_px).len();
    if inliers < params.refine_min_inliers as usize {
        return Err(reject(inliers));
    }
    Ok(RefineResult {
        transform,
        inliers,
        point_matches: n,
    })
}
