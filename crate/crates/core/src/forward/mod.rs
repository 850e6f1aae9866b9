//! Synthetic through-wall forward model.

mod dictionary;
mod geometry;
mod synth;

pub use dictionary::{build_dictionary, build_dictionary_with, path_delays, Dictionary};
pub use geometry::{
    refraction_delay, refraction_path, reverb_delays, MirrorPlane, MultipathScheme, PathDelay, Point, RadarConfig,
    RefractionPath, SceneGrid, WallSpec, SPEED_OF_LIGHT,
};
pub use synth::{synthesize_scene, synthesize_wall_returns, SceneTruth, Target, TargetSpec};
