//! Shared 3D/2D geometry primitives: rays, rigid transforms, pinhole
//! projection, line-line closest approach and plane reflection.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Point or direction in meters.
pub type Vec3 = Vector3<f64>;

/// Pixel coordinates `(u, v)`.
pub type Pixel = [f64; 2];

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rays are parallel; no unique closest point")]
    DegenerateRays,
    #[error("point lies behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("ray is parallel to the plane")]
    ParallelRay,
    #[error("plane intersection lies behind the ray origin (t = {0})")]
    BehindOrigin(f64),
    #[error("invalid direction vector")]
    InvalidDirection,
    #[error("rotation is not a proper orthonormal matrix")]
    ImproperRotation,
    #[error("invalid camera intrinsics: {0}")]
    InvalidCamera(&'static str),
}

/// Half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        let norm = direction.norm();
        if !norm.is_finite() || norm < 1e-15 || !origin.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidDirection);
        }
        Ok(Self {
            origin,
            direction: direction / norm,
        })
    }

    /// Ray from `origin` through `target`.
    pub fn through(origin: Vec3, target: Vec3) -> Result<Self, GeometryError> {
        Self::new(origin, target - origin)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Validates `RᵀR = I` and `det R = +1` within 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeometryError> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(ortho <= UNIT_TOL) || (det - 1.0).abs() > UNIT_TOL {
            return Err(GeometryError::ImproperRotation);
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidDirection);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Rotation about `axis` by `angle` radians followed by `translation`.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let rotation = if axis.norm() > 0.0 {
            *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
                .matrix()
        } else {
            Matrix3::identity()
        };
        Self {
            rotation,
            translation,
        }
    }

    /// Rotation from a rotation vector (axis · angle).
    pub fn from_rotation_vector(rvec: Vec3, translation: Vec3) -> Self {
        Self {
            rotation: *nalgebra::Rotation3::new(rvec).matrix(),
            translation,
        }
    }

    /// Camera-style pose whose +z axis points from `eye` toward `target`,
    /// with +y as close as possible to `down`. Returns the world→camera map.
    pub fn look_at(eye: Vec3, target: Vec3, down: Vec3) -> Result<Self, GeometryError> {
        let z = target - eye;
        if z.norm() < 1e-15 {
            return Err(GeometryError::InvalidDirection);
        }
        let z = z.normalize();
        let y = down - z * down.dot(&z);
        if y.norm() < 1e-12 {
            return Err(GeometryError::InvalidDirection);
        }
        let y = y.normalize();
        let x = y.cross(&z);
        // rows are the camera axes expressed in world coordinates
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Ok(Self {
            rotation,
            translation: -(rotation * eye),
        })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Geodesic angle between two rotations, radians.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let r = self.rotation.transpose() * other.rotation;
        let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        // acos is ill-conditioned near 0; use the skew part for small angles
        let s = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)])
            .norm()
            / 2.0;
        s.atan2(c)
    }
}

/// Distortion-free pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeCamera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidCamera("focal lengths must be positive"));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(GeometryError::InvalidCamera(
                "principal point must lie inside the image",
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Projects a camera-frame point.
    pub fn project_camera_point(&self, p: &Vec3) -> Result<Pixel, GeometryError> {
        if p.z <= 1e-9 {
            return Err(GeometryError::BehindCamera(p.z));
        }
        Ok([self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy])
    }

    /// Camera-frame point at depth `z` along the pixel's ray.
    pub fn back_project(&self, px: Pixel, z: f64) -> Vec3 {
        Vec3::new(
            (px[0] - self.cx) / self.fx * z,
            (px[1] - self.cy) / self.fy * z,
            z,
        )
    }

    pub fn contains(&self, px: Pixel) -> bool {
        px[0] >= 0.0 && px[0] < self.width as f64 && px[1] >= 0.0 && px[1] < self.height as f64
    }
}

/// Plane `{p : n·p = offset}` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    normal: Vec3,
    offset: f64,
}

impl Plane {
    pub fn new(normal: Vec3, offset: f64) -> Result<Self, GeometryError> {
        let norm = normal.norm();
        if !norm.is_finite() || norm < 1e-15 || !offset.is_finite() {
            return Err(GeometryError::InvalidDirection);
        }
        Ok(Self {
            normal: normal / norm,
            offset: offset / norm,
        })
    }

    pub fn from_point_normal(point: Vec3, normal: Vec3) -> Result<Self, GeometryError> {
        let n = Self::new(normal, 0.0)?.normal;
        Ok(Self {
            normal: n,
            offset: n.dot(&point),
        })
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Result of [`closest_point_between_rays`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayApproach {
    /// Midpoint of the shortest segment joining the two lines.
    pub midpoint: Vec3,
    /// Length of that segment.
    pub gap: f64,
    /// Line parameter on the first ray.
    pub s: f64,
    /// Line parameter on the second ray.
    pub t: f64,
}

/// Point minimizing the summed squared distance to two lines.
///
/// Solves the 2×2 normal equations of `‖(a.o + s·a.d) − (b.o + t·b.d)‖²`
/// by Cramer's rule. Line parameters may be negative; callers decide
/// whether that is acceptable.
pub fn closest_point_between_rays(a: &Ray, b: &Ray) -> Result<RayApproach, GeometryError> {
    let w0 = a.origin - b.origin;
    let c = a.direction.dot(&b.direction);
    let denom = 1.0 - c * c;
    if denom.abs() < 1e-12 {
        return Err(GeometryError::DegenerateRays);
    }
    let d = a.direction.dot(&w0);
    let e = b.direction.dot(&w0);
    let s = (c * e - d) / denom;
    let t = (e - c * d) / denom;
    let pa = a.at(s);
    let pb = b.at(t);
    Ok(RayApproach {
        midpoint: (pa + pb) * 0.5,
        gap: (pa - pb).norm(),
        s,
        t,
    })
}

/// Pinhole projection of a world point through `world_to_cam`.
pub fn project_point(
    cam: &PinholeCamera,
    world_to_cam: &RigidTransform,
    p: &Vec3,
) -> Result<Pixel, GeometryError> {
    cam.project_camera_point(&world_to_cam.apply(p))
}

/// Mirror image of `p` across `plane`.
pub fn reflect_point(plane: &Plane, p: &Vec3) -> Vec3 {
    p - plane.normal * (2.0 * plane.signed_distance(p))
}

/// Forward intersection of a ray with a plane.
pub fn ray_plane_intersection(ray: &Ray, plane: &Plane) -> Result<Vec3, GeometryError> {
    let denom = ray.direction.dot(&plane.normal);
    if denom.abs() <= 1e-12 {
        return Err(GeometryError::ParallelRay);
    }
    let t = (plane.offset - plane.normal.dot(&ray.origin)) / denom;
    if t < 0.0 {
        return Err(GeometryError::BehindOrigin(t));
    }
    Ok(ray.at(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn rays_meeting_at_a_common_point() {
        let p = v(0.0, 0.0, 2.0);
        let a = Ray::through(v(-0.035, 0.0, 0.0), p).unwrap();
        let b = Ray::through(v(0.035, 0.0, 0.0), p).unwrap();
        let r = closest_point_between_rays(&a, &b).unwrap();
        assert!((r.midpoint - p).norm() < 1e-12);
        assert!(r.gap < 1e-12);
    }

    #[test]
    fn skew_lines_closed_form() {
        // (s, t) from the hand-solved normal equations: s = 1, t = 0
        let a = Ray::new(Vec3::zeros(), v(0.0, 0.0, 1.0)).unwrap();
        let b = Ray::new(v(0.0, 1.0, 1.0), v(1.0, 0.0, 0.0)).unwrap();
        let r = closest_point_between_rays(&a, &b).unwrap();
        assert!((r.midpoint - v(0.0, 0.5, 1.0)).norm() < 1e-15);
        assert!((r.gap - 1.0).abs() < 1e-15);
        assert!((r.s - 1.0).abs() < 1e-15);
        assert!(r.t.abs() < 1e-15);
    }

    #[test]
    fn parallel_rays_are_degenerate() {
        let a = Ray::new(Vec3::zeros(), v(0.0, 0.0, 1.0)).unwrap();
        let b = Ray::new(v(1.0, 0.0, 0.0), v(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(
            closest_point_between_rays(&a, &b),
            Err(GeometryError::DegenerateRays)
        );
    }

    #[test]
    fn projection_examples() {
        let cam = PinholeCamera::new(100.0, 100.0, 160.0, 120.0, 320, 240).unwrap();
        let id = RigidTransform::identity();
        assert_eq!(project_point(&cam, &id, &v(0.0, 0.0, 1.0)).unwrap(), [160.0, 120.0]);
        let px = project_point(&cam, &id, &v(0.1, 0.0, 1.0)).unwrap();
        assert!((px[0] - 170.0).abs() < 1e-12 && (px[1] - 120.0).abs() < 1e-12);
        assert!(matches!(
            project_point(&cam, &id, &v(0.0, 0.0, -1.0)),
            Err(GeometryError::BehindCamera(_))
        ));
    }

    #[test]
    fn camera_validation() {
        assert!(PinholeCamera::new(0.0, 1.0, 1.0, 1.0, 10, 10).is_err());
        assert!(PinholeCamera::new(1.0, 1.0, 10.0, 1.0, 10, 10).is_err());
    }

    #[test]
    fn reflection_examples() {
        let plane = Plane::new(v(0.0, 0.0, 1.0), 0.0).unwrap();
        assert_eq!(reflect_point(&plane, &v(1.0, 2.0, 3.0)), v(1.0, 2.0, -3.0));
        let on = v(4.0, -1.0, 0.0);
        assert_eq!(reflect_point(&plane, &on), on);
    }

    #[test]
    fn plane_intersection_examples() {
        let plane = Plane::new(v(0.0, 0.0, 1.0), 2.0).unwrap();
        let r = Ray::new(Vec3::zeros(), v(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(ray_plane_intersection(&r, &plane).unwrap(), v(0.0, 0.0, 2.0));
        let r = Ray::new(Vec3::zeros(), v(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(ray_plane_intersection(&r, &plane), Err(GeometryError::ParallelRay));
        let r = Ray::new(v(0.0, 0.0, 3.0), v(0.0, 0.0, 1.0)).unwrap();
        assert!(matches!(
            ray_plane_intersection(&r, &plane),
            Err(GeometryError::BehindOrigin(_))
        ));
    }

    #[test]
    fn transform_validation_rejects_reflections() {
        let m = Matrix3::from_diagonal(&v(1.0, 1.0, -1.0));
        assert_eq!(
            RigidTransform::new(m, Vec3::zeros()),
            Err(GeometryError::ImproperRotation)
        );
    }

    #[test]
    fn look_at_points_z_at_target() {
        let t = RigidTransform::look_at(v(1.0, 2.0, 0.0), v(1.0, 2.0, 5.0), v(0.0, -1.0, 0.0))
            .unwrap();
        let p = t.apply(&v(1.0, 2.0, 5.0));
        assert!((p - v(0.0, 0.0, 5.0)).norm() < 1e-12);
        assert!(RigidTransform::new(*t.rotation(), t.translation()).is_ok());
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| v(x, y, z))
    }

    fn dir() -> impl Strategy<Value = Vec3> {
        vec3().prop_filter("nonzero", |d| d.norm() > 0.1)
    }

    proptest! {
        #[test]
        fn closest_point_is_symmetric(o1 in vec3(), d1 in dir(), o2 in vec3(), d2 in dir()) {
            let a = Ray::new(o1, d1).unwrap();
            let b = Ray::new(o2, d2).unwrap();
            prop_assume!(1.0 - a.direction().dot(&b.direction()).powi(2) > 1e-6);
            let ab = closest_point_between_rays(&a, &b).unwrap();
            let ba = closest_point_between_rays(&b, &a).unwrap();
            prop_assert!((ab.midpoint - ba.midpoint).norm() < 1e-12 * (1.0 + ab.midpoint.norm()) * 100.0);
            prop_assert!((ab.gap - ba.gap).abs() < 1e-12 * 100.0);
        }

        #[test]
        fn rays_through_a_point_recover_it(p in vec3(), o1 in vec3(), o2 in vec3()) {
            prop_assume!((p - o1).norm() > 0.1 && (p - o2).norm() > 0.1);
            let a = Ray::through(o1, p).unwrap();
            let b = Ray::through(o2, p).unwrap();
            prop_assume!(1.0 - a.direction().dot(&b.direction()).powi(2) > 1e-4);
            let r = closest_point_between_rays(&a, &b).unwrap();
            prop_assert!((r.midpoint - p).norm() < 1e-9);
            prop_assert!(r.gap < 1e-9);
        }

        #[test]
        fn reflection_is_an_isometric_involution(n in dir(), off in -3.0..3.0f64, p in vec3(), q in vec3()) {
            let plane = Plane::new(n, off).unwrap();
            let rp = reflect_point(&plane, &p);
            let rq = reflect_point(&plane, &q);
            prop_assert!((reflect_point(&plane, &rp) - p).norm() < 1e-12 * 10.0);
            prop_assert!(((rp - rq).norm() - (p - q).norm()).abs() < 1e-12 * 10.0);
        }

        #[test]
        fn projection_back_projection_round_trip(
            rv in vec3(), t in vec3(), x in -1.0..1.0f64, y in -1.0..1.0f64, z in 0.5..5.0f64
        ) {
            let cam = PinholeCamera::new(400.0, 410.0, 400.0, 300.0, 800, 600).unwrap();
            let pose = RigidTransform::from_rotation_vector(rv * 0.3, t);
            let pc = v(x, y, z);
            let world = pose.inverse().apply(&pc);
            let px = project_point(&cam, &pose, &world).unwrap();
            let back = pose.inverse().apply(&cam.back_project(px, z));
            prop_assert!((back - world).norm() < 1e-9);
        }
    }
}
