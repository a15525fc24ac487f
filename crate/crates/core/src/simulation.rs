//! Synthetic binocular eye model used as ground truth in place of a
//! physical eye tracker.
//!
//! Head frame: +x toward the subject's right, +y up, +z forward. A pupil sits
//! on the eyeball sphere along the optical axis; the visual axis is the
//! optical axis rotated by the eye's kappa offsets (see [`EyeKappa`]).
//! Corneal refraction is not modeled.

use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geometry::{GeometryError, PinholeCamera, Pixel, RigidTransform, Vec3};

/// Distance between the eyeball centers.
pub const DEFAULT_INTEROCULAR: f64 = 0.070;
/// Eyeball radius.
pub const DEFAULT_EYEBALL_RADIUS: f64 = 0.01039;
/// Eye-image width and height in pixels.
pub const EYE_IMAGE_WIDTH: u32 = 320;
pub const EYE_IMAGE_HEIGHT: u32 = 240;
/// Eye-camera sample rate, Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("fixation point is not in front of both eyes")]
    FixationBehindEyes,
    #[error("simulated pupil falls outside the {0} eye image at ({1:.2}, {2:.2})")]
    PupilOutsideImage(&'static str, f64, f64),
    #[error("invalid subject model: {0}")]
    InvalidSubject(&'static str),
    #[error("invalid scene configuration: {0}")]
    InvalidScene(&'static str),
    #[error("gaze stream timestamps must be strictly increasing (sample {0})")]
    NonIncreasingTimestamps(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Angular offset between the optical and visual axes of one eye, radians.
///
/// `horizontal` rotates about head +y (positive turns the visual axis toward
/// +x), `vertical` rotates about head −x (positive turns it toward +y).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EyeKappa {
    pub horizontal: f64,
    pub vertical: f64,
}

impl EyeKappa {
    pub fn new(horizontal: f64, vertical: f64) -> Self {
        Self {
            horizontal,
            vertical,
        }
    }

    pub fn from_degrees(horizontal: f64, vertical: f64) -> Self {
        Self::new(horizontal.to_radians(), vertical.to_radians())
    }

    /// Rotation taking the optical axis onto the visual axis.
    pub fn rotation(&self) -> Matrix3<f64> {
        rot_y(self.horizontal) * rot_x(-self.vertical)
    }
}

pub(crate) fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub(crate) fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Intrinsics plus head→eye-camera extrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeCamera {
    pub intrinsics: PinholeCamera,
    pub head_to_camera: RigidTransform,
}

impl EyeCamera {
    /// Camera 30 mm below and 25 mm in front of the eyeball center, aimed at
    /// the primary-position pupil, image +x along head +x.
    pub fn default_for_eye(center: Vec3, radius: f64) -> Self {
        let position = center + Vec3::new(0.0, -0.030, 0.025);
        let aim = center + Vec3::new(0.0, 0.0, radius);
        let head_to_camera = RigidTransform::look_at(position, aim, Vec3::new(0.0, -1.0, 0.0))
            .expect("default eye camera geometry is non-degenerate");
        let intrinsics = PinholeCamera::new(
            250.0,
            250.0,
            EYE_IMAGE_WIDTH as f64 / 2.0,
            EYE_IMAGE_HEIGHT as f64 / 2.0,
            EYE_IMAGE_WIDTH,
            EYE_IMAGE_HEIGHT,
        )
        .expect("default eye camera intrinsics are valid");
        Self {
            intrinsics,
            head_to_camera,
        }
    }

    pub fn project(&self, p: &Vec3) -> Result<Pixel, GeometryError> {
        crate::geometry::project_point(&self.intrinsics, &self.head_to_camera, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eye {
    Left,
    Right,
}

/// Ground-truth binocular geometry of one synthetic subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectModel {
    pub eyeball_center_left: Vec3,
    pub eyeball_center_right: Vec3,
    pub eyeball_radius: f64,
    pub kappa_left: EyeKappa,
    pub kappa_right: EyeKappa,
    pub eye_cam_left: EyeCamera,
    pub eye_cam_right: EyeCamera,
}

impl Default for SubjectModel {
    /// 70 mm interocular distance, 10.39 mm eyeballs, ±5° horizontal kappa
    /// (nasal for both eyes), eyes at head height 0.
    fn default() -> Self {
        let half = DEFAULT_INTEROCULAR / 2.0;
        Self::symmetric(
            half,
            0.0,
            DEFAULT_EYEBALL_RADIUS,
            EyeKappa::from_degrees(5.0, 0.0),
            EyeKappa::from_degrees(-5.0, 0.0),
        )
    }
}

impl SubjectModel {
    /// Eyes at `(∓half_iod, eye_height, 0)` with default eye cameras.
    pub fn symmetric(
        half_iod: f64,
        eye_height: f64,
        radius: f64,
        kappa_left: EyeKappa,
        kappa_right: EyeKappa,
    ) -> Self {
        let left = Vec3::new(-half_iod, eye_height, 0.0);
        let right = Vec3::new(half_iod, eye_height, 0.0);
        Self {
            eyeball_center_left: left,
            eyeball_center_right: right,
            eyeball_radius: radius,
            kappa_left,
            kappa_right,
            eye_cam_left: EyeCamera::default_for_eye(left, radius),
            eye_cam_right: EyeCamera::default_for_eye(right, radius),
        }
    }

    pub fn with_kappa(mut self, left: EyeKappa, right: EyeKappa) -> Self {
        self.kappa_left = left;
        self.kappa_right = right;
        self
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if (self.eyeball_center_left - self.eyeball_center_right).norm() <= 0.0 {
            return Err(SimulationError::InvalidSubject("eyeball centers coincide"));
        }
        if !(self.eyeball_radius > 0.0) {
            return Err(SimulationError::InvalidSubject("eyeball radius must be positive"));
        }
        Ok(())
    }

    pub fn eye_mid(&self) -> Vec3 {
        (self.eyeball_center_left + self.eyeball_center_right) * 0.5
    }

    pub fn center(&self, eye: Eye) -> Vec3 {
        match eye {
            Eye::Left => self.eyeball_center_left,
            Eye::Right => self.eyeball_center_right,
        }
    }

    pub fn camera(&self, eye: Eye) -> &EyeCamera {
        match eye {
            Eye::Left => &self.eye_cam_left,
            Eye::Right => &self.eye_cam_right,
        }
    }

    pub fn kappa(&self, eye: Eye) -> EyeKappa {
        match eye {
            Eye::Left => self.kappa_left,
            Eye::Right => self.kappa_right,
        }
    }

    /// Gaze depth of a fixation point: distance from the eye midpoint.
    pub fn depth_of(&self, fixation: &Vec3) -> f64 {
        (fixation - self.eye_mid()).norm()
    }
}

/// One timestamped binocular observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PupilSamplePair {
    pub timestamp: f64,
    /// 3D pupil centers, rig frame, meters.
    pub p_left: Vec3,
    pub p_right: Vec3,
    /// Pupil centers in each eye image, pixels.
    pub px_left: Pixel,
    pub px_right: Pixel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub pair: PupilSamplePair,
    pub truth_fixation: Option<Vec3>,
    pub truth_depth: Option<f64>,
}

/// Samples with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GazeStream {
    samples: Vec<GazeSample>,
}

impl GazeStream {
    pub fn new(samples: Vec<GazeSample>) -> Result<Self, SimulationError> {
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].pair.timestamp > w[0].pair.timestamp) {
                return Err(SimulationError::NonIncreasingTimestamps(i + 1));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<GazeSample> {
        self.samples
    }

    /// `(pair, fixation)` for every sample carrying ground truth.
    pub fn labelled(&self) -> Vec<(PupilSamplePair, Vec3)> {
        self.samples
            .iter()
            .filter_map(|s| s.truth_fixation.map(|f| (s.pair, f)))
            .collect()
    }
}

/// Layout of the depth calibration scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSceneConfig {
    pub depths: Vec<f64>,
    /// Angle between the peripheral target direction and the z axis, x–z plane.
    pub lateral_angle: f64,
    /// Angular size of each target.
    pub target_visual_angle: f64,
    pub dwell_seconds: f64,
    /// Recording covers the last `record_seconds` of each dwell.
    pub record_seconds: f64,
    pub sample_rate: f64,
}

impl Default for CalibrationSceneConfig {
    fn default() -> Self {
        Self {
            depths: vec![0.5, 1.5, 2.5, 3.5, 4.5, 5.5],
            lateral_angle: 12.5f64.to_radians(),
            target_visual_angle: 2.0f64.to_radians(),
            dwell_seconds: 2.0,
            record_seconds: 1.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

impl CalibrationSceneConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.depths.is_empty() || self.depths.iter().any(|d| !(*d > 0.0)) {
            return Err(SimulationError::InvalidScene("depths must be positive"));
        }
        if self.depths.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SimulationError::InvalidScene("depths must be strictly increasing"));
        }
        if !(self.record_seconds > 0.0 && self.record_seconds <= self.dwell_seconds) {
            return Err(SimulationError::InvalidScene(
                "record_seconds must lie in (0, dwell_seconds]",
            ));
        }
        if !(self.sample_rate > 0.0) {
            return Err(SimulationError::InvalidScene("sample_rate must be positive"));
        }
        Ok(())
    }

    /// Edge length of a target at `depth`, sized to subtend the target angle.
    pub fn target_size(&self, depth: f64) -> f64 {
        2.0 * depth * (self.target_visual_angle / 2.0).tan()
    }
}

/// Central and two peripheral targets per depth, ordered left, center, right.
pub fn generate_calibration_targets(cfg: &CalibrationSceneConfig, head_height: f64) -> Vec<Vec3> {
    let tan = cfg.lateral_angle.tan();
    cfg.depths
        .iter()
        .flat_map(|&z| {
            [-1.0, 0.0, 1.0].map(|side| Vec3::new(side * z * tan, head_height, z))
        })
        .collect()
}

/// Noise-free pupil observation of `fixation`.
pub fn simulate_fixation_exact(
    subject: &SubjectModel,
    timestamp: f64,
    fixation: &Vec3,
) -> Result<PupilSamplePair, SimulationError> {
    simulate_impl(subject, timestamp, fixation, None::<(&mut rand_chacha::ChaCha8Rng, f64)>)
}

/// Pupil observation of `fixation` with optical-axis noise of standard
/// deviation `noise_sigma` radians about a random perpendicular axis.
pub fn simulate_fixation<R: Rng + ?Sized>(
    subject: &SubjectModel,
    timestamp: f64,
    fixation: &Vec3,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<PupilSamplePair, SimulationError> {
    if noise_sigma > 0.0 {
        simulate_impl(subject, timestamp, fixation, Some((rng, noise_sigma)))
    } else {
        simulate_fixation_exact(subject, timestamp, fixation)
    }
}

fn simulate_impl<R: Rng + ?Sized>(
    subject: &SubjectModel,
    timestamp: f64,
    fixation: &Vec3,
    mut noise: Option<(&mut R, f64)>,
) -> Result<PupilSamplePair, SimulationError> {
    let mut pupil = |eye: Eye| -> Result<(Vec3, Pixel), SimulationError> {
        let center = subject.center(eye);
        let to_fix = fixation - center;
        if to_fix.z <= 1e-9 {
            return Err(SimulationError::FixationBehindEyes);
        }
        let visual = to_fix.normalize();
        let mut optical = subject.kappa(eye).rotation().transpose() * visual;
        if let Some((rng, sigma)) = noise.as_mut() {
            optical = perturb_direction(&optical, *sigma, *rng);
        }
        let p = center + optical * subject.eyeball_radius;
        let px = subject.camera(eye).project(&p)?;
        if !subject.camera(eye).intrinsics.contains(px) {
            let name = if eye == Eye::Left { "left" } else { "right" };
            return Err(SimulationError::PupilOutsideImage(name, px[0], px[1]));
        }
        Ok((p, px))
    };
    let (p_left, px_left) = pupil(Eye::Left)?;
    let (p_right, px_right) = pupil(Eye::Right)?;
    Ok(PupilSamplePair {
        timestamp,
        p_left,
        p_right,
        px_left,
        px_right,
    })
}

/// Rotates the unit vector `d` by a N(0, σ²) angle about a uniformly random
/// axis perpendicular to it.
pub fn perturb_direction<R: Rng + ?Sized>(d: &Vec3, sigma: f64, rng: &mut R) -> Vec3 {
    let (e1, e2) = orthonormal_basis(d);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let axis = e1 * phi.cos() + e2 * phi.sin();
    let angle = Normal::new(0.0, sigma)
        .expect("sigma is finite and positive")
        .sample(rng);
    // Rodrigues with axis ⟂ d
    d * angle.cos() + axis.cross(d) * angle.sin()
}

pub(crate) fn orthonormal_basis(d: &Vec3) -> (Vec3, Vec3) {
    let helper = if d.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let e1 = d.cross(&helper).normalize();
    let e2 = d.cross(&e1).normalize();
    (e1, e2)
}

/// Samples each `(duration, fixation)` at `rate` Hz on a common clock
/// starting at t = 0.
pub fn simulate_stream<R: Rng + ?Sized>(
    subject: &SubjectModel,
    script: &[(f64, Vec3)],
    rate: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<GazeStream, SimulationError> {
    if !(rate > 0.0) {
        return Err(SimulationError::InvalidScene("sample rate must be positive"));
    }
    let mut samples = Vec::new();
    let mut k = 0usize;
    for (duration, fixation) in script {
        if !(*duration > 0.0) {
            return Err(SimulationError::InvalidScene("fixation durations must be positive"));
        }
        let count = (duration * rate).round() as usize;
        for _ in 0..count {
            let t = k as f64 / rate;
            let pair = simulate_fixation(subject, t, fixation, noise_sigma, rng)?;
            samples.push(GazeSample {
                pair,
                truth_fixation: Some(*fixation),
                truth_depth: Some(subject.depth_of(fixation)),
            });
            k += 1;
        }
    }
    GazeStream::new(samples)
}

/// Records the calibration scene: every target is shown for `dwell_seconds`
/// and only the final `record_seconds` are kept.
pub fn simulate_calibration<R: Rng + ?Sized>(
    subject: &SubjectModel,
    cfg: &CalibrationSceneConfig,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<GazeStream, SimulationError> {
    cfg.validate()?;
    let targets = generate_calibration_targets(cfg, subject.eye_mid().y);
    let per_target = (cfg.record_seconds * cfg.sample_rate).round() as usize;
    let skipped = ((cfg.dwell_seconds - cfg.record_seconds) * cfg.sample_rate).round() as usize;
    let per_dwell = (cfg.dwell_seconds * cfg.sample_rate).round() as usize;
    let mut samples = Vec::with_capacity(targets.len() * per_target);
    for (i, target) in targets.iter().enumerate() {
        for j in 0..per_target {
            let k = i * per_dwell + skipped + j;
            let t = k as f64 / cfg.sample_rate;
            let pair = simulate_fixation(subject, t, target, noise_sigma, rng)?;
            samples.push(GazeSample {
                pair,
                truth_fixation: Some(*target),
                truth_depth: Some(subject.depth_of(target)),
            });
        }
    }
    GazeStream::new(samples)
}
