//! Gaze-depth estimators: line-of-sight intersection, millimeter and pixel
//! IPD regression, and the piecewise fusion of intersection and pixel IPD.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::calibration::{IpdUnits, KappaModel, SectoredRegression};
use crate::geometry::{closest_point_between_rays, GeometryError, Ray, Vec3};
use crate::simulation::{Eye, PupilSamplePair, SubjectModel, EYE_IMAGE_WIDTH};

/// Largest accepted distance between a pupil and its eyeball sphere.
pub const PUPIL_SPHERE_TOLERANCE: f64 = 0.002;

/// Fused output switches to the intersection estimate when the pixel-IPD
/// estimate lies in `(FUSION_LOW, FUSION_HIGH]`.
pub const FUSION_LOW: f64 = 0.5;
pub const FUSION_HIGH: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepthError {
    #[error("{0:?} pupil is {1:.4} m away from the eyeball sphere")]
    PupilOffSphere(Eye, f64),
    #[error("gaze rays are parallel")]
    ParallelRays,
    #[error("gaze rays diverge (closest approach behind the eyes)")]
    DivergentRays,
    #[error("pupil coordinate {0} lies outside the eye image")]
    OutOfImage(f64),
    #[error("no {0:?} regression model available")]
    ModelMissing(IpdUnits),
    #[error("regression produced a non-finite depth")]
    NonFinite,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    LosI,
    Mipd,
    Pipd,
    Fused,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LosI => "losi",
            Method::Mipd => "mipd",
            Method::Pipd => "pipd",
            Method::Fused => "fused",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "losi" => Ok(Method::LosI),
            "mipd" => Ok(Method::Mipd),
            "pipd" => Ok(Method::Pipd),
            "fused" => Ok(Method::Fused),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Norm used for the millimeter IPD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IpdNorm {
    /// Physical distance between the pupils.
    #[default]
    Euclidean,
    /// Sum of absolute coordinate differences.
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeRayPair {
    pub left: Ray,
    pub right: Ray,
    pub eye_center_mid: Vec3,
}

impl GazeRayPair {
    /// Mid-eye ray along the mean of both visual axes.
    pub fn cyclopean(&self) -> Ray {
        Ray::new(self.eye_center_mid, self.left.direction() + self.right.direction())
            .unwrap_or(self.left)
    }

    /// Horizontal angle of the cyclopean ray in the x–z plane.
    pub fn horizontal_angle(&self) -> f64 {
        let d = self.cyclopean().direction();
        d.x.atan2(d.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthEstimate {
    pub depth: f64,
    pub method: Method,
    /// Estimator that produced `depth`; differs from `method` only for fusion.
    pub source: Method,
    /// 3D point of regard, when the estimator produces one.
    pub por: Option<Vec3>,
    pub horizontal_angle: f64,
    /// Set when fusion fell back to pixel IPD because intersection failed.
    pub fallback: bool,
}

/// Visual-axis rays from pupil centers, eyeball centers and kappa.
pub fn gaze_rays_from_pupils(
    pair: &PupilSamplePair,
    kappa: &KappaModel,
    subject: &SubjectModel,
) -> Result<GazeRayPair, DepthError> {
    let ray = |eye: Eye, pupil: Vec3| -> Result<Ray, DepthError> {
        let center = subject.center(eye);
        let off = ((pupil - center).norm() - subject.eyeball_radius).abs();
        if off > PUPIL_SPHERE_TOLERANCE {
            return Err(DepthError::PupilOffSphere(eye, off));
        }
        let optical = (pupil - center).normalize();
        Ok(Ray::new(center, kappa.eye(eye).rotation() * optical)?)
    };
    let left = ray(Eye::Left, pair.p_left)?;
    let right = ray(Eye::Right, pair.p_right)?;
    Ok(GazeRayPair {
        left,
        right,
        eye_center_mid: (left.origin() + right.origin()) * 0.5,
    })
}

/// Depth of the closest-approach point of the two visual axes.
pub fn depth_losi(rays: &GazeRayPair) -> Result<DepthEstimate, DepthError> {
    let approach = closest_point_between_rays(&rays.left, &rays.right).map_err(|e| match e {
        GeometryError::DegenerateRays => DepthError::ParallelRays,
        other => other.into(),
    })?;
    if approach.s < 0.0 || approach.t < 0.0 {
        return Err(DepthError::DivergentRays);
    }
    Ok(DepthEstimate {
        depth: (approach.midpoint - rays.eye_center_mid).norm(),
        method: Method::LosI,
        source: Method::LosI,
        por: Some(approach.midpoint),
        horizontal_angle: rays.horizontal_angle(),
        fallback: false,
    })
}

/// 3D inter-pupillary distance in millimeters.
pub fn ipd_mm(pair: &PupilSamplePair, norm: IpdNorm) -> f64 {
    let d = pair.p_left - pair.p_right;
    let meters = match norm {
        IpdNorm::Euclidean => d.norm(),
        IpdNorm::L1 => d.abs().sum(),
    };
    meters * 1000.0
}

/// Image-space IPD `W − x_l + x_r` in pixels.
pub fn ipd_px(pair: &PupilSamplePair, image_width: f64) -> Result<f64, DepthError> {
    for x in [pair.px_left[0], pair.px_right[0]] {
        if !(x >= 0.0 && x < image_width) {
            return Err(DepthError::OutOfImage(x));
        }
    }
    Ok(image_width - pair.px_left[0] + pair.px_right[0])
}

/// Evaluates the sector model selected by `horizontal_angle`.
pub fn depth_regress(
    theta: f64,
    reg: &SectoredRegression,
    horizontal_angle: f64,
) -> Result<DepthEstimate, DepthError> {
    let depth = reg.predict(theta, horizontal_angle);
    if !depth.is_finite() {
        return Err(DepthError::NonFinite);
    }
    let method = match reg.units() {
        IpdUnits::Millimeters => Method::Mipd,
        IpdUnits::Pixels => Method::Pipd,
    };
    Ok(DepthEstimate {
        depth,
        method,
        source: method,
        por: None,
        horizontal_angle,
        fallback: false,
    })
}

/// Pixel-IPD gate: intersection depth inside `(0.5, 2]` m, pixel-IPD depth
/// elsewhere. Never blends.
pub fn depth_fused(
    pair: &PupilSamplePair,
    rays: &GazeRayPair,
    pipd: &SectoredRegression,
) -> Result<DepthEstimate, DepthError> {
    let angle = rays.horizontal_angle();
    let theta = pipd.feature().measure(pair)?;
    let gate = depth_regress(theta, pipd, angle)?;
    let fused = |e: DepthEstimate, fallback: bool| DepthEstimate {
        method: Method::Fused,
        fallback,
        ..e
    };
    if gate.depth > FUSION_LOW && gate.depth <= FUSION_HIGH {
        match depth_losi(rays) {
            Ok(losi) => Ok(fused(losi, false)),
            Err(_) => Ok(fused(gate, true)),
        }
    } else {
        Ok(fused(gate, false))
    }
}

/// Everything needed to run any estimator on a pupil sample.
#[derive(Debug, Clone)]
pub struct DepthPipeline {
    pub subject: SubjectModel,
    pub kappa: KappaModel,
    pub mipd: Option<SectoredRegression>,
    pub pipd: Option<SectoredRegression>,
}

impl DepthPipeline {
    pub fn new(subject: SubjectModel, kappa: KappaModel) -> Self {
        Self {
            subject,
            kappa,
            mipd: None,
            pipd: None,
        }
    }

    pub fn rays(&self, pair: &PupilSamplePair) -> Result<GazeRayPair, DepthError> {
        gaze_rays_from_pupils(pair, &self.kappa, &self.subject)
    }

    fn regression(&self, units: IpdUnits) -> Result<&SectoredRegression, DepthError> {
        match units {
            IpdUnits::Millimeters => self.mipd.as_ref(),
            IpdUnits::Pixels => self.pipd.as_ref(),
        }
        .ok_or(DepthError::ModelMissing(units))
    }

    /// Checks that the models `method` needs are present.
    pub fn supports(&self, method: Method) -> Result<(), DepthError> {
        match method {
            Method::LosI => Ok(()),
            Method::Mipd => self.regression(IpdUnits::Millimeters).map(|_| ()),
            Method::Pipd | Method::Fused => self.regression(IpdUnits::Pixels).map(|_| ()),
        }
    }

    pub fn estimate(&self, pair: &PupilSamplePair, method: Method) -> Result<DepthEstimate, DepthError> {
        let rays = self.rays(pair)?;
        match method {
            Method::LosI => depth_losi(&rays),
            Method::Mipd | Method::Pipd => {
                let units = if method == Method::Mipd {
                    IpdUnits::Millimeters
                } else {
                    IpdUnits::Pixels
                };
                let reg = self.regression(units)?;
                let theta = reg.feature().measure(pair)?;
                depth_regress(theta, reg, rays.horizontal_angle())
            }
            Method::Fused => depth_fused(pair, &rays, self.regression(IpdUnits::Pixels)?),
        }
    }
}

/// Default eye-image width for the pixel IPD.
pub const DEFAULT_IMAGE_WIDTH: f64 = EYE_IMAGE_WIDTH as f64;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{IpdFeature, RegressionModel};
    use crate::simulation::{
        generate_calibration_targets, simulate_fixation, simulate_fixation_exact,
        CalibrationSceneConfig, EyeKappa,
    };
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair_at(pl: Vec3, pr: Vec3) -> PupilSamplePair {
        PupilSamplePair {
            timestamp: 0.0,
            p_left: pl,
            p_right: pr,
            px_left: [160.0, 120.0],
            px_right: [160.0, 120.0],
        }
    }

    fn exact_kappa(s: &SubjectModel) -> KappaModel {
        KappaModel::new(s.kappa_left, s.kappa_right).unwrap()
    }

    fn const_sectors(k: [f64; 3], theta_bar: f64, units: IpdUnits) -> SectoredRegression {
        let m = RegressionModel {
            k1: k[0],
            k2: k[1],
            k3: k[2],
            theta_bar,
            units,
        };
        let feature = match units {
            IpdUnits::Pixels => IpdFeature::Pipd { image_width: 320.0 },
            IpdUnits::Millimeters => IpdFeature::Mipd(IpdNorm::Euclidean),
        };
        SectoredRegression::new([-0.1, 0.1], [m, m, m], feature).unwrap()
    }

    #[test]
    fn simulated_rays_pass_through_fixation() {
        let s = SubjectModel::default();
        for t in generate_calibration_targets(&CalibrationSceneConfig::default(), 0.0) {
            let p = simulate_fixation_exact(&s, 0.0, &t).unwrap();
            let rays = gaze_rays_from_pupils(&p, &exact_kappa(&s), &s).unwrap();
            for r in [rays.left, rays.right] {
                let along = (t - r.origin()).dot(&r.direction());
                assert!((r.at(along) - t).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_kappa_keeps_optical_axis() {
        let s = SubjectModel::default();
        let p = simulate_fixation_exact(&s, 0.0, &Vec3::new(0.2, 0.0, 1.0)).unwrap();
        let rays = gaze_rays_from_pupils(&p, &KappaModel::default(), &s).unwrap();
        let optical = (p.p_left - s.eyeball_center_left).normalize();
        assert!((rays.left.direction() - optical).norm() < 1e-15);
    }

    #[test]
    fn pupil_off_sphere() {
        let s = SubjectModel::default();
        let mut p = simulate_fixation_exact(&s, 0.0, &Vec3::new(0.0, 0.0, 1.0)).unwrap();
        p.p_left += (p.p_left - s.eyeball_center_left).normalize() * 0.010;
        assert!(matches!(
            gaze_rays_from_pupils(&p, &KappaModel::default(), &s),
            Err(DepthError::PupilOffSphere(Eye::Left, _))
        ));
    }

    #[test]
    fn losi_on_exact_rays() {
        let target = Vec3::new(0.0, 0.0, 2.0);
        let left = Ray::through(Vec3::new(-0.035, 0.0, 0.0), target).unwrap();
        let right = Ray::through(Vec3::new(0.035, 0.0, 0.0), target).unwrap();
        let rays = GazeRayPair {
            left,
            right,
            eye_center_mid: Vec3::zeros(),
        };
        let est = depth_losi(&rays).unwrap();
        assert!((est.depth - 2.0).abs() < 1e-9);
        assert_eq!(est.method, Method::LosI);
    }

    #[test]
    fn parallel_and_divergent_rays_are_errors() {
        let z = Vec3::new(0.0, 0.0, 1.0);
        let left = Ray::new(Vec3::new(-0.035, 0.0, 0.0), z).unwrap();
        let right = Ray::new(Vec3::new(0.035, 0.0, 0.0), z).unwrap();
        let rays = GazeRayPair {
            left,
            right,
            eye_center_mid: Vec3::zeros(),
        };
        assert_eq!(depth_losi(&rays), Err(DepthError::ParallelRays));
        let rays = GazeRayPair {
            left: Ray::new(left.origin(), Vec3::new(-0.01, 0.0, 1.0)).unwrap(),
            right: Ray::new(right.origin(), Vec3::new(0.01, 0.0, 1.0)).unwrap(),
            eye_center_mid: Vec3::zeros(),
        };
        assert_eq!(depth_losi(&rays), Err(DepthError::DivergentRays));
    }

    #[test]
    fn angular_noise_hurts_far_more_than_near() {
        let s = SubjectModel::default();
        let k = exact_kappa(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sigma = 0.5f64.to_radians();
        let mut median_err = |z: f64| {
            let f = Vec3::new(0.0, 0.0, z);
            let mut errs: Vec<f64> = (0..1000)
                .map(|_| {
                    let p = simulate_fixation(&s, 0.0, &f, sigma, &mut rng).unwrap();
                    let rays = gaze_rays_from_pupils(&p, &k, &s).unwrap();
                    // a divergent pair has no finite depth; count it as unbounded error
                    depth_losi(&rays).map(|e| (e.depth - z).abs()).unwrap_or(f64::INFINITY)
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            errs[errs.len() / 2]
        };
        let near = median_err(1.0);
        let far = median_err(4.0);
        assert!(far > near, "near {near}, far {far}");
    }

    #[test]
    fn ipd_examples() {
        let p = pair_at(Vec3::new(0.01, 0.0, 0.0), Vec3::new(0.01, 0.0, 0.0));
        assert_eq!(ipd_mm(&p, IpdNorm::Euclidean), 0.0);
        let p = pair_at(Vec3::new(-0.033, 0.0, 0.01), Vec3::new(0.033, 0.0, 0.01));
        assert!((ipd_mm(&p, IpdNorm::Euclidean) - 66.0).abs() < 1e-12);
        let p = pair_at(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.003, 0.004, 0.0));
        assert!((ipd_mm(&p, IpdNorm::Euclidean) - 5.0).abs() < 1e-12);
        assert!((ipd_mm(&p, IpdNorm::L1) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn pixel_ipd_formula() {
        let mut p = pair_at(Vec3::zeros(), Vec3::zeros());
        assert_eq!(ipd_px(&p, 320.0).unwrap(), 320.0);
        p.px_left[0] = 200.0;
        p.px_right[0] = 120.0;
        assert_eq!(ipd_px(&p, 320.0).unwrap(), 240.0);
        p.px_left[0] = 400.0;
        assert_eq!(ipd_px(&p, 320.0), Err(DepthError::OutOfImage(400.0)));
    }

    #[test]
    fn ipd_grows_with_depth_in_simulation() {
        let s = SubjectModel::default().with_kappa(EyeKappa::default(), EyeKappa::default());
        let mut prev_mm = 0.0;
        let mut prev_px = 0.0;
        for z in [0.5, 1.5, 2.5, 3.5, 4.5, 5.5] {
            let p = simulate_fixation_exact(&s, 0.0, &Vec3::new(0.0, 0.0, z)).unwrap();
            let mm = ipd_mm(&p, IpdNorm::Euclidean);
            let px = ipd_px(&p, 320.0).unwrap();
            assert!(mm > prev_mm && px > prev_px);
            prev_mm = mm;
            prev_px = px;
        }
    }

    #[test]
    fn regression_examples() {
        let reg = const_sectors([1.0, 0.5, 0.2], 300.0, IpdUnits::Pixels);
        let e = depth_regress(302.0, &reg, 0.0).unwrap();
        assert!((e.depth - (1.0f64.exp() + 0.2)).abs() < 1e-12);
        assert!((e.depth - 2.9183).abs() < 1e-4);
        assert_eq!(e.method, Method::Pipd);
        assert_eq!(depth_regress(300.0, &reg, 0.0).unwrap().depth, 1.2);
    }

    #[test]
    fn missing_models_are_reported() {
        let s = SubjectModel::default();
        let pipe = DepthPipeline::new(s.clone(), exact_kappa(&s));
        let p = simulate_fixation_exact(&s, 0.0, &Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(
            pipe.estimate(&p, Method::Mipd),
            Err(DepthError::ModelMissing(IpdUnits::Millimeters))
        );
        assert_eq!(pipe.supports(Method::Fused), Err(DepthError::ModelMissing(IpdUnits::Pixels)));
        assert!(pipe.estimate(&p, Method::LosI).is_ok());
    }

    /// Rays meeting at `losi_depth` plus a pixel pair whose PIPD regression
    /// yields exactly `pipd_depth` under a linear-in-exp model.
    fn fusion_case(pipd_depth: f64, losi_depth: f64) -> (PupilSamplePair, GazeRayPair, SectoredRegression) {
        // model: d = 1·exp(1·(θ − 320)) + 0 ⇒ θ = 320 + ln d
        let reg = const_sectors([1.0, 1.0, 0.0], 320.0, IpdUnits::Pixels);
        let theta = 320.0 + pipd_depth.ln();
        let mut p = pair_at(Vec3::zeros(), Vec3::zeros());
        p.px_left[0] = 160.0;
        p.px_right[0] = theta - 160.0;
        let target = Vec3::new(0.0, 0.0, losi_depth);
        let rays = GazeRayPair {
            left: Ray::through(Vec3::new(-0.035, 0.0, 0.0), target).unwrap(),
            right: Ray::through(Vec3::new(0.035, 0.0, 0.0), target).unwrap(),
            eye_center_mid: Vec3::zeros(),
        };
        (p, rays, reg)
    }

    #[test]
    fn fusion_rule_examples() {
        let (p, r, reg) = fusion_case(1.5, 1.3);
        let e = depth_fused(&p, &r, &reg).unwrap();
        assert!((e.depth - 1.3).abs() < 1e-9);
        assert_eq!((e.method, e.source), (Method::Fused, Method::LosI));

        let (p, r, reg) = fusion_case(4.0, 3.1);
        let e = depth_fused(&p, &r, &reg).unwrap();
        assert!((e.depth - 4.0).abs() < 1e-9);
        assert_eq!(e.source, Method::Pipd);
    }

    #[test]
    fn fusion_boundary_is_inclusive_at_two_meters() {
        let reg = const_sectors([1.0, 1.0, 0.0], 320.0, IpdUnits::Pixels);
        // θ = 320 gives exactly d = 1 + 1 = 2 with k3 = 1
        let reg = SectoredRegression::new(
            reg.boundaries(),
            [RegressionModel { k3: 1.0, ..reg.models()[0] }; 3],
            reg.feature(),
        )
        .unwrap();
        let (mut p, r, _) = fusion_case(1.0, 3.0);
        p.px_right[0] = 160.0;
        assert_eq!(depth_regress(320.0, &reg, 0.0).unwrap().depth, 2.0);
        let e = depth_fused(&p, &r, &reg).unwrap();
        assert_eq!(e.source, Method::LosI);
        assert!((e.depth - 3.0).abs() < 1e-9);
    }

    #[test]
    fn fusion_falls_back_when_intersection_fails() {
        let (p, mut r, reg) = fusion_case(1.5, 1.3);
        r.left = Ray::new(r.left.origin(), Vec3::new(-0.01, 0.0, 1.0)).unwrap();
        r.right = Ray::new(r.right.origin(), Vec3::new(0.01, 0.0, 1.0)).unwrap();
        let e = depth_fused(&p, &r, &reg).unwrap();
        assert!(e.fallback);
        assert_eq!(e.source, Method::Pipd);
        assert!((e.depth - 1.5).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn fused_equals_one_of_its_inputs(pipd in 0.3..6.0f64, losi in 0.3..6.0f64) {
            let (p, r, reg) = fusion_case(pipd, losi);
            let f = depth_fused(&p, &r, &reg).unwrap();
            let l = depth_losi(&r).unwrap();
            let g = depth_regress(ipd_px(&p, 320.0).unwrap(), &reg, r.horizontal_angle()).unwrap();
            prop_assert!(f.depth == l.depth || f.depth == g.depth);
            prop_assert_eq!(f.source == Method::LosI, g.depth > 0.5 && g.depth <= 2.0);
        }

        #[test]
        fn regression_is_continuous_within_a_sector(theta in 310.0..330.0f64) {
            let reg = const_sectors([0.5, 0.3, 0.4], 320.0, IpdUnits::Pixels);
            let a = reg.predict(theta, 0.0);
            let b = reg.predict(theta + 1e-9, 0.0);
            prop_assert!((a - b).abs() < 1e-6);
        }
    }
}
