//! Graphviz views of matched subgraphs and per-keyframe error timelines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{apply_correction, LoopClosureReport, VertexMatchSet};
use crate::graph::{to_dot, CovisibilitySubgraph, DotStyle, GraphError};
use crate::keyframe::{KeyframeId, KeyframeRecord, LandmarkId};
use crate::map::MapDatabase;

use super::dataset::DatasetError;
use super::metrics::{aligned_errors, AteError};
use super::runner::estimated_trajectory;

pub const MATCHED_COLOR: &str = "green";
pub const MISMATCHED_COLOR: &str = "red";

/// Colors one side of a matched pair of subgraphs: vertices with a partner
/// and edges whose image is also an edge are green, everything else red.
fn side_style(
    own: &CovisibilitySubgraph,
    other: &CovisibilitySubgraph,
    partner: &BTreeMap<LandmarkId, LandmarkId>,
) -> DotStyle {
    let mut style = DotStyle::default();
    for &v in &own.vertex_ids {
        let color = if partner.contains_key(&v) {
            MATCHED_COLOR
        } else {
            MISMATCHED_COLOR
        };
        style.vertex_colors.insert(v, color.to_string());
    }
    for (a, b) in own.edge_ids() {
        let kept = match (partner.get(&a), partner.get(&b)) {
            (Some(&pa), Some(&pb)) => other.has_edge(pa, pb),
            _ => false,
        };
        style.set_edge_color(a, b, if kept { MATCHED_COLOR } else { MISMATCHED_COLOR });
    }
    style
}

/// Styles for the current and loop subgraphs of a vertex matching.
pub fn match_styles(
    current: &CovisibilitySubgraph,
    candidate: &CovisibilitySubgraph,
    set: &VertexMatchSet,
) -> (DotStyle, DotStyle) {
    let forward: BTreeMap<_, _> = set.matches.iter().map(|m| (m.current, m.candidate)).collect();
    let backward: BTreeMap<_, _> = set.matches.iter().map(|m| (m.candidate, m.current)).collect();
    (
        side_style(current, candidate, &forward),
        side_style(candidate, current, &backward),
    )
}

/// Both subgraphs of an accepted closure as two graphs in one DOT document.
pub fn report_dot(db: &MapDatabase, report: &LoopClosureReport) -> Result<String, GraphError> {
    let graph = db.graph();
    let g_c = graph.subgraph_for(report.current_kf)?;
    let g_l = graph.subgraph_for(report.loop_kf)?;
    let (style_c, style_l) = match_styles(&g_c, &g_l, &report.match_set);
    let mut out = to_dot(graph, &g_c, &format!("current_{}", report.current_kf), &style_c);
    out.push_str(&to_dot(graph, &g_l, &format!("loop_{}", report.loop_kf), &style_l));
    Ok(out)
}

/// Subgraph of one keyframe, or the whole graph when `kf` is `None`.
pub fn graph_dot(db: &MapDatabase, kf: Option<KeyframeId>) -> Result<String, GraphError> {
    let graph = db.graph();
    let (sub, name) = match kf {
        Some(id) => (graph.subgraph_for(id)?, format!("keyframe_{id}")),
        None => (graph.full_subgraph(), "map".to_string()),
    };
    Ok(to_dot(graph, &sub, &name, &DotStyle::default()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub keyframe: KeyframeId,
    /// Aligned position error in meters before and after correction.
    pub error_before: f64,
    pub error_after: f64,
}

/// Per-keyframe aligned position error, with and without `report`'s
/// correction applied.
pub fn ate_timeline(
    records: &[KeyframeRecord],
    report: Option<&LoopClosureReport>,
) -> Result<Vec<TimelineRow>, AteError> {
    let gt: Vec<_> = records.iter().map(|r| r.gt_pose).collect();
    let est = estimated_trajectory(records);
    let before_poses: Vec<_> = est.iter().map(|p| p.1).collect();
    let before = aligned_errors(&before_poses, &gt)?;
    let after = match report {
        None => before.clone(),
        Some(r) => {
            let corrected = apply_correction(&est, r.loop_kf, r.current_kf, &r.refined)
                .expect("report keyframes are in the sequence");
            let poses: Vec<_> = corrected.into_iter().map(|p| p.1).collect();
            aligned_errors(&poses, &gt)?
        }
    };
    Ok(records
        .iter()
        .zip(before.into_iter().zip(after))
        .map(|(r, (error_before, error_after))| TimelineRow {
            keyframe: r.id,
            error_before,
            error_after,
        })
        .collect())
}

pub fn timeline_csv(rows: &[TimelineRow]) -> String {
    let mut out = String::from("keyframe,error_before_m,error_after_m\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.9},{:.9}", r.keyframe, r.error_before, r.error_after);
    }
    out
}

pub fn export_timeline(rows: &[TimelineRow], path: &Path) -> Result<(), DatasetError> {
    std::fs::write(path, timeline_csv(rows)).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::VertexMatch;

    fn sub(ids: &[u64], edges: &[(usize, usize)]) -> CovisibilitySubgraph {
        CovisibilitySubgraph {
            vertex_ids: ids.iter().map(|&i| LandmarkId(i)).collect(),
            edges: edges.iter().copied().collect(),
        }
    }

    #[test]
    fn colors_follow_the_matching() {
        // Current: 0-1, 1-2. Loop: 10-11 only. Matching 0->10, 1->11.
        let g_c = sub(&[0, 1, 2], &[(0, 1), (1, 2)]);
        let g_l = sub(&[10, 11], &[(0, 1)]);
        let set = VertexMatchSet::from_matches(vec![
            VertexMatch {
                current: LandmarkId(0),
                candidate: LandmarkId(10),
                score: 0.9,
            },
            VertexMatch {
                current: LandmarkId(1),
                candidate: LandmarkId(11),
                score: 0.8,
            },
        ]);
        let (c, l) = match_styles(&g_c, &g_l, &set);
        assert_eq!(c.vertex_colors[&LandmarkId(0)], MATCHED_COLOR);
        assert_eq!(c.vertex_colors[&LandmarkId(2)], MISMATCHED_COLOR);
        assert_eq!(c.edge_color(LandmarkId(0), LandmarkId(1)), Some(MATCHED_COLOR));
        assert_eq!(c.edge_color(LandmarkId(1), LandmarkId(2)), Some(MISMATCHED_COLOR));
        assert_eq!(l.edge_color(LandmarkId(10), LandmarkId(11)), Some(MATCHED_COLOR));
        assert!(l.vertex_colors.values().all(|v| v == MATCHED_COLOR));
    }

    #[test]
    fn timeline_header_and_rows() {
        let rows = vec![TimelineRow {
            keyframe: KeyframeId(3),
            error_before: 0.5,
            error_after: 0.25,
        }];
        assert_eq!(
            timeline_csv(&rows),
            "keyframe,error_before_m,error_after_m\n3,0.500000000,0.250000000\n"
        );
    }
}
