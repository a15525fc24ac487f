//! Hidden-scene capture: register the hidden camera to the headset frame,
//! cut a gaze-anchored ROI out of its image and warp it into the user's view.

mod homography;
mod pnp;
mod roi;
mod warp;

pub use homography::{fit_homography, homography_from_quad, Homography};
pub use pnp::{register_camera, Correspondence, PnpSolution, MIN_CORRESPONDENCES};
pub use roi::{
    quad_area, roi_axes, roi_corners, roi_to_camera_quad, CameraQuad, RoiSpec, DEFAULT_ROI_SIZE,
    GIMBAL_LIMIT, WORLD_UP,
};
pub use warp::{warp_image, RasterImage, FILL};

use thiserror::Error;

use crate::geometry::{GeometryError, PinholeCamera, Ray, RigidTransform, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaptureError {
    #[error("insufficient correspondences: need {needed}, got {got}")]
    InsufficientCorrespondences { needed: usize, got: usize },
    #[error("correspondences are degenerate (collinear)")]
    DegenerateConfiguration,
    #[error("pose refinement did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("non-finite correspondence")]
    NonFinite,
    #[error("gaze is too close to vertical for an upright ROI")]
    GimbalDegenerate,
    #[error("ROI width and height must be positive")]
    InvalidRoi,
    #[error("ROI corner lies behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("quad has three collinear corners")]
    DegenerateQuad,
    #[error("homography is singular")]
    SingularHomography,
    #[error("invalid image: {0}")]
    InvalidImage(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeeThroughFrame {
    pub image: RasterImage,
    pub quad: CameraQuad,
    pub homography: Homography,
}

impl SeeThroughFrame {
    pub fn out_of_frame(&self) -> bool {
        self.quad.out_of_frame
    }
}

/// ROI around the point of regard → camera quad → output rectangle warp.
#[allow(clippy::too_many_arguments)]
pub fn see_through_frame(
    por: Vec3,
    gaze: &Ray,
    size: (f64, f64),
    world_to_camera: &RigidTransform,
    cam: &PinholeCamera,
    frame: &RasterImage,
    out_size: (usize, usize),
) -> Result<SeeThroughFrame, CaptureError> {
    let corners = roi_corners(&RoiSpec {
        center: por,
        gaze: *gaze,
        width: size.0,
        height: size.1,
    })?;
    let quad = roi_to_camera_quad(&corners, world_to_camera, cam)?;
    let (w, h) = (out_size.0 as f64 - 1.0, out_size.1 as f64 - 1.0);
    let target = [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
    let homography = homography_from_quad(&quad.corners, &target)?;
    let image = warp_image(frame, &homography, out_size.0, out_size.1);
    Ok(SeeThroughFrame {
        image,
        quad,
        homography,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> PinholeCamera {
        PinholeCamera::new(400.0, 400.0, 200.0, 150.0, 400, 300).unwrap()
    }

    #[test]
    fn roi_outside_frame_is_all_fill() {
        let frame = RasterImage::filled(400, 300, 1, 200);
        let gaze = Ray::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let pose = RigidTransform::look_at(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, -1.0, 0.0)).unwrap();
        let out = see_through_frame(Vec3::new(5.0, 0.0, 2.0), &gaze, (0.6, 0.45), &pose, &cam(), &frame, (64, 48)).unwrap();
        assert!(out.out_of_frame());
        assert!(out.image.data().iter().all(|&v| v == FILL));
    }

    #[test]
    fn shared_viewpoint_is_crop_and_scale() {
        // camera at the eye looking along the gaze: the ROI is an axis-aligned
        // box in the image, so the warp is a pure crop + scale
        let frame = RasterImage::from_fn(400, 300, 1, |x, y, _| ((x + 2 * y) / 4 % 256) as u8);
        let gaze = Ray::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let pose = RigidTransform::look_at(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, -1.0, 0.0)).unwrap();
        // 0.4 × 0.3 m at 2 m with f = 400 → 80 × 60 px box centered on (200, 150)
        let out = see_through_frame(Vec3::new(0.0, 0.0, 2.0), &gaze, (0.4, 0.3), &pose, &cam(), &frame, (81, 61)).unwrap();
        assert!(!out.out_of_frame());
        let m = out.homography.matrix();
        assert!(m[(0, 1)].abs() < 1e-12 && m[(1, 0)].abs() < 1e-12);
        assert!(m[(2, 0)].abs() < 1e-12 && m[(2, 1)].abs() < 1e-12);
        assert!((m[(0, 0)] - 1.0).abs() < 1e-9 && (m[(1, 1)] - 1.0).abs() < 1e-9);
        for y in 0..61 {
            for x in 0..81 {
                assert_eq!(out.image.get(x, y, 0), frame.get(160 + x, 120 + y, 0));
            }
        }
    }
}
