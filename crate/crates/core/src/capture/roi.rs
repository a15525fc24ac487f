use super::CaptureError;
use crate::geometry::{GeometryError, Pixel, PinholeCamera, Ray, RigidTransform, Vec3};

/// World up in the head/rig frame.
pub const WORLD_UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);

/// Gaze within this angle of `WORLD_UP` leaves the ROI orientation undefined.
pub const GIMBAL_LIMIT: f64 = 0.5 * std::f64::consts::PI / 180.0;

/// Default physical ROI size, meters (4:3 like the hidden camera).
pub const DEFAULT_ROI_SIZE: (f64, f64) = (0.6, 0.45);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiSpec {
    /// 3D point of regard at the rectangle center.
    pub center: Vec3,
    pub gaze: Ray,
    pub width: f64,
    pub height: f64,
}

/// In-plane ROI axes `(horizontal, up)`: `horizontal = gaze × up`, then `up`
/// re-orthogonalized against the gaze.
pub fn roi_axes(gaze: &Vec3) -> Result<(Vec3, Vec3), CaptureError> {
    let g = gaze.normalize();
    if g.dot(&WORLD_UP).abs() >= GIMBAL_LIMIT.cos() {
        return Err(CaptureError::GimbalDegenerate);
    }
    let horizontal = g.cross(&WORLD_UP).normalize();
    let up = horizontal.cross(&g);
    Ok((horizontal, up))
}

/// Rectangle corners in image order (top-left, top-right, bottom-right,
/// bottom-left) for a y-down camera looking along the gaze, whose columns
/// run along `gaze × up`.
pub fn roi_corners(spec: &RoiSpec) -> Result<[Vec3; 4], CaptureError> {
    if !(spec.width > 0.0 && spec.height > 0.0) {
        return Err(CaptureError::InvalidRoi);
    }
    let (right, up) = roi_axes(&spec.gaze.direction())?;
    let hx = right * (spec.width / 2.0);
    let hy = up * (spec.height / 2.0);
    let c = spec.center;
    Ok([c - hx + hy, c + hx + hy, c + hx - hy, c - hx - hy])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraQuad {
    pub corners: [Pixel; 4],
    /// Set when any corner falls outside the image; not an error.
    pub out_of_frame: bool,
}

/// Projects world-frame ROI corners into the hidden camera through `T: H→C`.
pub fn roi_to_camera_quad(
    corners: &[Vec3; 4],
    world_to_camera: &RigidTransform,
    cam: &PinholeCamera,
) -> Result<CameraQuad, CaptureError> {
    let mut px = [[0.0; 2]; 4];
    for (i, c) in corners.iter().enumerate() {
        px[i] = cam
            .project_camera_point(&world_to_camera.apply(c))
            .map_err(|e| match e {
                GeometryError::BehindCamera(z) => CaptureError::BehindCamera(z),
                other => other.into(),
            })?;
    }
    Ok(CameraQuad {
        corners: px,
        out_of_frame: px.iter().any(|p| !cam.contains(*p)),
    })
}

/// Shoelace area of a simple polygon.
pub fn quad_area(q: &[Pixel; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        let a = q[i];
        let b = q[(i + 1) % 4];
        s += a[0] * b[1] - b[0] * a[1];
    }
    s.abs() / 2.0
}
