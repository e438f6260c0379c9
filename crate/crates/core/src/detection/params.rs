use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default prefix for environment overrides, e.g. `COVISLOOP_TAU_AS=0.4`.
pub const ENV_PREFIX: &str = "COVISLOOP_";

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("parameter {name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("environment variable {var}: {message}")]
    BadOverride { var: String, message: String },
}

/// How the two reprojection directions of the object-level inlier test combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReprojectionCheck {
    #[default]
    Both,
    Either,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    /// Minimum average vertex-pair similarity.
    pub tau_as: f64,
    /// Minimum similarity for a vertex pair to be kept.
    pub tau_n: f64,
    /// Maximum relative major-axis difference for an object inlier.
    pub tau_s: f64,
    /// Inlier count that must be exceeded.
    pub m_inl: u32,
    /// Inlier ratio that must be exceeded.
    pub tau_eps: f64,
    /// Minimum edge correlation.
    pub tau_e: f64,
    pub max_ransac_iters: u32,
    pub max_reproj_error_px: f64,
    pub refine_min_inliers: u32,
    pub refine_search_radius_px: f64,
    /// Reprojection bound for point-level inliers.
    pub refine_inlier_px: f64,
    pub temporal_consistency_len: u32,
    pub min_kf_gap: u64,
    /// Use `>` for the inlier count and ratio tests; `>=` otherwise.
    pub strict_inlier_tests: bool,
    pub reprojection_check: ReprojectionCheck,
    /// Pass the edge test when neither matched subgraph has any edge.
    pub skip_edge_test_without_edges: bool,
    /// BoW threshold used when the query keyframe has no covisible neighbor.
    pub s_min_floor: f64,
    pub ransac_seed: u64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            tau_as: 0.3,
            tau_n: 0.008,
            tau_s: 0.5,
            m_inl: 3,
            tau_eps: 0.59,
            tau_e: 0.5,
            max_ransac_iters: 100,
            max_reproj_error_px: 10.0,
            refine_min_inliers: 12,
            refine_search_radius_px: 8.0,
            refine_inlier_px: 5.0,
            temporal_consistency_len: 3,
            min_kf_gap: 50,
            strict_inlier_tests: true,
            reprojection_check: ReprojectionCheck::Both,
            skip_edge_test_without_edges: true,
            s_min_floor: 0.05,
            ransac_seed: 0,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        fn unit(name: &'static str, v: f64) -> Result<(), ParamsError> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ParamsError::OutOfRange {
                    name,
                    value: v.to_string(),
                    expected: "[0, 1]",
                })
            }
        }
        fn positive(name: &'static str, v: f64) -> Result<(), ParamsError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ParamsError::OutOfRange {
                    name,
                    value: v.to_string(),
                    expected: "> 0",
                })
            }
        }
        fn at_least(name: &'static str, v: u32, min: u32, expected: &'static str) -> Result<(), ParamsError> {
            if v >= min {
                Ok(())
            } else {
                Err(ParamsError::OutOfRange {
                    name,
                    value: v.to_string(),
                    expected,
                })
            }
        }
        unit("tau_as", self.tau_as)?;
        unit("tau_n", self.tau_n)?;
        unit("tau_s", self.tau_s)?;
        unit("tau_eps", self.tau_eps)?;
        unit("tau_e", self.tau_e)?;
        unit("s_min_floor", self.s_min_floor)?;
        at_least("m_inl", self.m_inl, 3, ">= 3")?;
        at_least("max_ransac_iters", self.max_ransac_iters, 1, ">= 1")?;
        at_least("refine_min_inliers", self.refine_min_inliers, 3, ">= 3")?;
        at_least("temporal_consistency_len", self.temporal_consistency_len, 1, ">= 1")?;
        positive("max_reproj_error_px", self.max_reproj_error_px)?;
        positive("refine_search_radius_px", self.refine_search_radius_px)?;
        positive("refine_inlier_px", self.refine_inlier_px)?;
        Ok(())
    }

    /// Overrides fields from `{prefix}{FIELD_NAME}` variables in `vars`.
    ///
    /// Values are parsed as JSON scalars; bare words are taken as strings so
    /// that `COVISLOOP_REPROJECTION_CHECK=either` works.
    pub fn with_overrides<I, K, V>(&self, prefix: &str, vars: I) -> Result<Self, ParamsError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut value = serde_json::to_value(self).expect("params serialize");
        let map = value.as_object_mut().expect("params are a map");
        for (k, v) in vars {
            let Some(field) = k.as_ref().strip_prefix(prefix) else {
                continue;
            };
            let field = field.to_ascii_lowercase();
            if !map.contains_key(&field) {
                continue;
            }
            let raw = v.as_ref().trim();
            let parsed = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            map.insert(field, parsed);
        }
        let out: Self = serde_json::from_value(value).map_err(|e| ParamsError::BadOverride {
            var: prefix.to_string(),
            message: e.to_string(),
        })?;
        out.validate()?;
        Ok(out)
    }

    /// Applies overrides from the process environment.
    pub fn with_env_overrides(&self) -> Result<Self, ParamsError> {
        self.with_overrides(ENV_PREFIX, std::env::vars())
    }

    pub(crate) fn count_passes(&self, inliers: usize) -> bool {
        let m = self.m_inl as usize;
        if self.strict_inlier_tests {
            inliers > m
        } else {
            inliers >= m
        }
    }

    pub(crate) fn ratio_passes(&self, ratio: f64) -> bool {
        if self.strict_inlier_tests {
            ratio > self.tau_eps
        } else {
            ratio >= self.tau_eps
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_table() {
        let p = DetectionParams::default();
        assert_eq!(p.tau_as, 0.3);
        assert_eq!(p.tau_n, 0.008);
        assert_eq!(p.tau_s, 0.5);
        assert_eq!(p.m_inl, 3);
        assert_eq!(p.tau_eps, 0.59);
        assert_eq!(p.tau_e, 0.5);
        p.validate().unwrap();
    }

    #[test]
    fn overrides_by_prefix() {
        let p = DetectionParams::default()
            .with_overrides(
                "X_",
                [
                    ("X_TAU_AS", "0.4"),
                    ("X_REPROJECTION_CHECK", "either"),
                    ("X_STRICT_INLIER_TESTS", "false"),
                    ("OTHER_TAU_E", "0.9"),
                    ("X_NOT_A_FIELD", "1"),
                ],
            )
            .unwrap();
        assert_eq!(p.tau_as, 0.4);
        assert_eq!(p.reprojection_check, ReprojectionCheck::Either);
        assert!(!p.strict_inlier_tests);
        assert_eq!(p.tau_e, 0.5);
    }

    #[test]
    fn bad_override_rejected() {
        assert!(DetectionParams::default()
            .with_overrides("X_", [("X_M_INL", "two")])
            .is_err());
        assert!(matches!(
            DetectionParams::default().with_overrides("X_", [("X_M_INL", "2")]),
            Err(ParamsError::OutOfRange { name: "m_inl", .. })
        ));
    }

    #[test]
    fn strictness() {
        let mut p = DetectionParams::default();
        assert!(!p.count_passes(3) && p.count_passes(4));
        assert!(!p.ratio_passes(0.59));
        p.strict_inlier_tests = false;
        assert!(p.count_passes(3) && p.ratio_passes(0.59));
    }

    #[test]
    fn partial_toml_like_json_uses_defaults() {
        let p: DetectionParams = serde_json::from_str(r#"{"tau_e": 0.6}"#).unwrap();
        assert_eq!(p.tau_e, 0.6);
        assert_eq!(p.min_kf_gap, 50);
    }
}
