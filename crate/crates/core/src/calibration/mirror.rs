//! Scene-camera ↔ eye-camera registration through a mirror.
//!
//! Boards: `E` faces the mirror and is seen by the scene camera `S` only as
//! its virtual image `E′`; `F` lies on the mirror surface; `G` is coplanar
//! with `E` at a known offset and is seen directly by the eye camera `N`.

use nalgebra::Matrix3;

use super::CalibrationError;
use crate::geometry::{reflect_point, Plane, RigidTransform, Vec3};

/// Inner-corner grid of a chessboard lying in its own z = 0 plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChessboardLayout {
    pub cols: usize,
    pub rows: usize,
    /// Square edge, meters.
    pub square: f64,
}

impl ChessboardLayout {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.cols < 2 || self.rows < 2 || !(self.square > 0.0) {
            return Err(CalibrationError::InvalidLayout);
        }
        Ok(())
    }

    pub fn corners(&self) -> Vec<Vec3> {
        (0..self.rows)
            .flat_map(|r| {
                (0..self.cols).map(move |c| Vec3::new(c as f64 * self.square, r as f64 * self.square, 0.0))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigObservation {
    /// Pose of the virtual image `E′` in `S`, as recovered from its corners.
    pub virtual_e_in_s: RigidTransform,
    /// Pose of the mirror board `F` in `S`.
    pub f_in_s: RigidTransform,
    /// Pose of `G` in `N`.
    pub g_in_n: RigidTransform,
    pub layout: ChessboardLayout,
    /// Known placement of `G` in the frame of `E`.
    pub g_in_e: RigidTransform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorCalibration {
    /// Maps eye-camera coordinates into scene-camera coordinates.
    pub n_to_s: RigidTransform,
    pub e_in_s: RigidTransform,
    pub mirror: Plane,
    /// RMS distance between reflected corners and the refitted board, meters.
    pub residual_rms: f64,
}

/// Least-squares proper rigid transform mapping `src[i]` onto `dst[i]`.
///
/// Returns [`CalibrationError::ImproperRotation`] when the optimal orthogonal
/// map is a reflection for a non-planar point set (a mirrored input).
pub fn fit_rigid_transform(src: &[Vec3], dst: &[Vec3]) -> Result<RigidTransform, CalibrationError> {
    assert_eq!(src.len(), dst.len());
    if src.len() < 3 {
        return Err(CalibrationError::InsufficientSamples {
            needed: 3,
            got: src.len(),
        });
    }
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vec3>() / n;
    let cd = dst.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested V"));
    let mut sv = svd.singular_values;
    let v = vt.transpose();
    let det = (v * u.transpose()).determinant();
    let mut correction = Matrix3::identity();
    if det < 0.0 {
        // nalgebra does not sort singular values; flip the weakest direction
        let (mut imin, mut smin) = (0, sv[0]);
        for i in 1..3 {
            if sv[i] < smin {
                imin = i;
                smin = sv[i];
            }
        }
        let smax = sv.max();
        if smin > 1e-9 * smax.max(1e-300) {
            return Err(CalibrationError::ImproperRotation);
        }
        correction[(imin, imin)] = -1.0;
        sv[imin] = -sv[imin];
    }
    let r = v * correction * u.transpose();
    let t = cd - r * cs;
    RigidTransform::new(r, t).map_err(|_| CalibrationError::ImproperRotation)
}

/// Five-step mirror calibration producing the `N → S` transform.
pub fn calibrate_rig_with_mirror(obs: &RigObservation) -> Result<MirrorCalibration, CalibrationError> {
    obs.layout.validate()?;
    let corners = obs.layout.corners();

    // (1) virtual board corners in S
    let virtual_corners: Vec<Vec3> = corners.iter().map(|c| obs.virtual_e_in_s.apply(c)).collect();

    // (2) mirror plane = plane of F
    let normal = obs.f_in_s.apply_vector(&Vec3::new(0.0, 0.0, 1.0));
    let mirror = Plane::from_point_normal(obs.f_in_s.translation(), normal)?;
    let to_mirror = obs.f_in_s.translation();
    if mirror.signed_distance(&Vec3::zeros()).abs() < 1e-3
        || to_mirror.norm() < 1e-9
        || mirror.normal().dot(&to_mirror.normalize()).abs() < 1f64.to_radians().sin()
    {
        return Err(CalibrationError::MirrorDegenerate);
    }

    // (3) reflect to the real board and refit a proper pose
    let real_corners: Vec<Vec3> = virtual_corners.iter().map(|p| reflect_point(&mirror, p)).collect();
    let e_in_s = fit_rigid_transform(&corners, &real_corners)?;
    let sq: f64 = corners
        .iter()
        .zip(&real_corners)
        .map(|(c, p)| (e_in_s.apply(c) - p).norm_squared())
        .sum();
    let residual_rms = (sq / corners.len() as f64).sqrt();

    // (4)+(5) chain S ← E ← G ← N
    let n_to_s = e_in_s.compose(&obs.g_in_e).compose(&obs.g_in_n.inverse());
    if n_to_s.rotation().determinant() < 0.0 {
        return Err(CalibrationError::ImproperRotation);
    }
    Ok(MirrorCalibration {
        n_to_s,
        e_in_s,
        mirror,
        residual_rms,
    })
}

/// Pose whose board-frame corners land on the mirror image of `board_in_s`.
///
/// Reflection flips handedness; composing with a z-flip of the board frame
/// restores a proper rotation without moving any z = 0 corner.
pub fn virtual_image_pose(board_in_s: &RigidTransform, mirror: &Plane) -> RigidTransform {
    let n = mirror.normal();
    let householder = Matrix3::identity() - 2.0 * n * n.transpose();
    let flip = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
    let rotation = householder * board_in_s.rotation() * flip;
    let translation = reflect_point(mirror, &board_in_s.translation());
    RigidTransform::new(rotation, translation).expect("reflected pose with z-flip is proper")
}
