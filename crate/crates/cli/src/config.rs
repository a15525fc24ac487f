//! TOML configuration files. Angles are in degrees, lengths in meters.

use std::path::Path;

use serde::Deserialize;
use vergekit::capture::DEFAULT_ROI_SIZE;
use vergekit::control::{ControlMode, Layer, LayerTable};
use vergekit::geometry::{PinholeCamera, RigidTransform, Vec3};
use vergekit::simulation::{CalibrationSceneConfig, EyeKappa, SubjectModel, DEFAULT_SAMPLE_RATE};

use crate::CliError;

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubjectConfig {
    pub interocular: f64,
    pub eye_height: f64,
    pub eyeball_radius: f64,
    /// `[horizontal, vertical]`
    pub kappa_left: [f64; 2],
    pub kappa_right: [f64; 2],
}

impl Default for SubjectConfig {
    fn default() -> Self {
        Self {
            interocular: vergekit::simulation::DEFAULT_INTEROCULAR,
            eye_height: 0.0,
            eyeball_radius: vergekit::simulation::DEFAULT_EYEBALL_RADIUS,
            kappa_left: [5.0, 0.0],
            kappa_right: [-5.0, 0.0],
        }
    }
}

impl SubjectConfig {
    pub fn model(&self) -> Result<SubjectModel, CliError> {
        if !(self.interocular > 0.0) {
            return Err(CliError::Usage("interocular must be positive".into()));
        }
        let s = SubjectModel::symmetric(
            self.interocular / 2.0,
            self.eye_height,
            self.eyeball_radius,
            EyeKappa::from_degrees(self.kappa_left[0], self.kappa_left[1]),
            EyeKappa::from_degrees(self.kappa_right[0], self.kappa_right[1]),
        );
        s.validate().map_err(|e| CliError::Usage(format!("subject: {e}")))?;
        Ok(s)
    }
}

pub fn subject(path: Option<&Path>) -> Result<SubjectModel, CliError> {
    match path {
        Some(p) => load::<SubjectConfig>(p)?.model(),
        None => SubjectConfig::default().model(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub depths: Vec<f64>,
    pub lateral_angle: f64,
    pub target_visual_angle: f64,
    pub dwell_seconds: f64,
    pub record_seconds: f64,
    pub sample_rate: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let d = CalibrationSceneConfig::default();
        Self {
            depths: d.depths,
            lateral_angle: d.lateral_angle.to_degrees(),
            target_visual_angle: d.target_visual_angle.to_degrees(),
            dwell_seconds: d.dwell_seconds,
            record_seconds: d.record_seconds,
            sample_rate: d.sample_rate,
        }
    }
}

impl SceneConfig {
    pub fn scene(&self) -> Result<CalibrationSceneConfig, CliError> {
        let s = CalibrationSceneConfig {
            depths: self.depths.clone(),
            lateral_angle: self.lateral_angle.to_radians(),
            target_visual_angle: self.target_visual_angle.to_radians(),
            dwell_seconds: self.dwell_seconds,
            record_seconds: self.record_seconds,
            sample_rate: self.sample_rate,
        };
        s.validate().map_err(|e| CliError::Usage(format!("scene: {e}")))?;
        Ok(s)
    }
}

/// Free-form fixation sequence for `simulate --script`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixationScript {
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    pub fixation: Vec<Fixation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixation {
    pub duration: f64,
    pub target: [f64; 3],
}

fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE
}

impl FixationScript {
    pub fn steps(&self) -> Vec<(f64, Vec3)> {
        self.fixation
            .iter()
            .map(|f| (f.duration, Vec3::from(f.target)))
            .collect()
    }
}

/// Scene camera mounted on the headset.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigConfig {
    pub camera: CameraConfig,
    /// Camera center in the head frame.
    #[serde(default)]
    pub position: [f64; 3],
    /// Point the optical axis passes through, head frame.
    #[serde(default = "forward")]
    pub look_at: [f64; 3],
    #[serde(default = "roi_size")]
    pub roi: [f64; 2],
    pub output: [usize; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

fn forward() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn roi_size() -> [f64; 2] {
    [DEFAULT_ROI_SIZE.0, DEFAULT_ROI_SIZE.1]
}

impl RigConfig {
    pub fn camera(&self) -> Result<PinholeCamera, CliError> {
        let c = &self.camera;
        PinholeCamera::new(c.fx, c.fy, c.cx, c.cy, c.width, c.height)
            .map_err(|e| CliError::Usage(format!("rig camera: {e}")))
    }

    /// Head→camera transform with image rows running downward.
    pub fn world_to_camera(&self) -> Result<RigidTransform, CliError> {
        RigidTransform::look_at(
            Vec3::from(self.position),
            Vec3::from(self.look_at),
            Vec3::new(0.0, -1.0, 0.0),
        )
        .map_err(|e| CliError::Usage(format!("rig pose: {e}")))
    }
}

/// Options for `control`; command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<String>,
    pub w: Option<f64>,
    pub delta: Option<f64>,
    pub j: Option<f64>,
    pub filter_window: Option<f64>,
    pub sample_rate: Option<f64>,
    pub stimulus_distance: Option<f64>,
    pub layer: Option<Vec<LayerConfig>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub lo: f64,
    /// Omitted for the open-ended last layer.
    pub hi: Option<f64>,
    pub display_depth: f64,
}

impl RunConfig {
    pub fn mode(&self) -> Result<Option<ControlMode>, CliError> {
        self.mode
            .as_deref()
            .map(|m| m.parse().map_err(|e: String| CliError::Usage(e)))
            .transpose()
    }

    pub fn layers(&self) -> Result<LayerTable, CliError> {
        match &self.layer {
            None => Ok(LayerTable::default()),
            Some(l) => LayerTable::new(
                l.iter()
                    .map(|l| Layer {
                        lo: l.lo,
                        hi: l.hi.unwrap_or(f64::INFINITY),
                        display_depth: l.display_depth,
                    })
                    .collect(),
            )
            .map_err(|e| CliError::Usage(format!("layers: {e}"))),
        }
    }
}
