//! Named simulator fixtures and their TOML/JSON description.

use serde::{Deserialize, Serialize};

use crate::keyframe::KeyframeRecord;
use crate::sim::{
    generate_world, loop_trajectory, render_sequence, restyle, twin_of, DriftJump, DriftModel, ObservationNoise,
    Rendered, Sensor, TrajectoryKind, World, WorldError, WorldSpec,
};

/// Second floor built from the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwinSpec {
    /// Fraction of objects moved, resized and given new appearance.
    pub perturbation: f64,
    /// Fraction of every object's words replaced (different decoration).
    pub restyle: f64,
}

impl Default for TwinSpec {
    fn default() -> Self {
        Self {
            perturbation: 0.3,
            restyle: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub world: WorldSpec,
    pub twin: Option<TwinSpec>,
    pub trajectory: TrajectoryKind,
    pub keyframes: usize,
    pub sensor: Sensor,
    pub drift: DriftModel,
    pub noise: ObservationNoise,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::single_loop()
    }
}

pub fn moderate_noise() -> ObservationNoise {
    ObservationNoise {
        pixel_sigma: 1.0,
        class_confusion_rate: 0.05,
        bow_word_dropout: 0.2,
        detection_dropout: 0.05,
        depth_sigma: 0.01,
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub worlds: Vec<World>,
    pub rendered: Rendered,
}

impl Simulation {
    pub fn keyframes(&self) -> &[KeyframeRecord] {
        &self.rendered.keyframes
    }
}

impl Scenario {
    /// One room, one closed circle, moderate noise and drift.
    pub fn single_loop() -> Self {
        Self {
            world: WorldSpec {
                object_count: 70,
                background_point_count: 3000,
                ..WorldSpec::default()
            },
            twin: None,
            trajectory: TrajectoryKind::SingleLoop,
            keyframes: 200,
            sensor: Sensor::default(),
            drift: DriftModel {
                translation_rw_sigma: 0.005,
                rotation_rw_sigma: 0.003,
                scale_rw_sigma: 0.002,
                jump: None,
            },
            noise: moderate_noise(),
        }
    }

    /// Two stacked, similar floors visited one after the other.
    pub fn two_floor_twin() -> Self {
        Self {
            twin: Some(TwinSpec::default()),
            trajectory: TrajectoryKind::TwoFloor,
            keyframes: 400,
            ..Self::single_loop()
        }
    }

    /// Exact observations; the drift is one jump halfway round plus a faint
    /// random walk.
    pub fn noise_free_loop() -> Self {
        Self {
            drift: DriftModel {
                translation_rw_sigma: 4e-5,
                rotation_rw_sigma: 2e-5,
                scale_rw_sigma: 2e-5,
                jump: Some(DriftJump {
                    at_fraction: 0.5,
                    scale: 1.03,
                    yaw_deg: 3.0,
                    translation: [0.15, -0.1, 0.02],
                }),
            },
            noise: ObservationNoise::default(),
            ..Self::single_loop()
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "single_loop" => Some(Self::single_loop()),
            "two_floor_twin" => Some(Self::two_floor_twin()),
            "noise_free_loop" => Some(Self::noise_free_loop()),
            _ => None,
        }
    }

    /// Checks the settings that world generation does not cover.
    pub fn validate(&self) -> Result<(), WorldError> {
        let d = &self.drift;
        let n = &self.noise;
        let non_negative = [
            d.translation_rw_sigma,
            d.rotation_rw_sigma,
            d.scale_rw_sigma,
            n.pixel_sigma,
            n.depth_sigma,
            self.sensor.max_range,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(WorldError::InvalidSpec(
                "sigmas and max_range must be finite and non-negative",
            ));
        }
        let mut fractions = vec![n.class_confusion_rate, n.bow_word_dropout, n.detection_dropout];
        if let Some(t) = self.twin {
            fractions.extend([t.perturbation, t.restyle]);
        }
        if let Some(j) = d.jump {
            fractions.push(j.at_fraction);
            if !(j.scale.is_finite() && j.scale > 0.0) {
                return Err(WorldError::InvalidSpec("drift jump scale must be positive"));
            }
            if !(j.yaw_deg.is_finite() && j.translation.iter().all(|v| v.is_finite())) {
                return Err(WorldError::InvalidSpec("drift jump must be finite"));
            }
        }
        if fractions.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(WorldError::InvalidSpec("rates and fractions must lie in [0, 1]"));
        }
        self.world.validate()
    }

    pub fn worlds(&self, seed: u64) -> Result<Vec<World>, WorldError> {
        self.validate()?;
        let spec = WorldSpec {
            seed,
            ..self.world.clone()
        };
        let base = generate_world(&spec)?;
        Ok(match self.twin {
            None => vec![base],
            Some(t) => {
                let upper = restyle(&twin_of(&base, t.perturbation), t.restyle);
                vec![base, upper]
            }
        })
    }

    /// Builds worlds and renders the trajectory; `seed` drives everything.
    pub fn generate(&self, seed: u64) -> Result<Simulation, WorldError> {
        let worlds = self.worlds(seed)?;
        let trajectory = loop_trajectory(&worlds[0], self.trajectory, self.keyframes.max(10));
        let rendered = render_sequence(
            &worlds,
            &trajectory,
            &self.sensor,
            &self.drift,
            &self.noise,
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5,
        );
        Ok(Simulation { worlds, rendered })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_named() {
        for name in ["single_loop", "two_floor_twin", "noise_free_loop"] {
            Scenario::by_name(name).unwrap().validate().unwrap();
        }
        assert!(Scenario::by_name("attic").is_none());
    }

    #[test]
    fn bad_jump_and_rates_are_rejected() {
        let mut s = Scenario::noise_free_loop();
        s.drift.jump.as_mut().unwrap().scale = 0.0;
        assert!(matches!(s.generate(0), Err(WorldError::InvalidSpec(_))));

        let mut s = Scenario::single_loop();
        s.noise.detection_dropout = 1.5;
        assert!(s.validate().is_err());

        let mut s = Scenario::two_floor_twin();
        s.drift.translation_rw_sigma = -1.0;
        assert!(s.validate().is_err());
    }
}
