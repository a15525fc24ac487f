//! Camera pose from 3D–2D correspondences: linear initialization (DLT for
//! general scenes, a plane homography for coplanar ones) refined by
//! Levenberg-Marquardt on pixel reprojection error.

use nalgebra::{DMatrix, DVector, Matrix3};

use super::homography::fit_homography;
use super::CaptureError;
use crate::geometry::{Pixel, PinholeCamera, RigidTransform, Vec3};
use crate::lm::{self, LmOptions, Problem, Termination};

pub const MIN_CORRESPONDENCES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    /// Point in the world (headset) frame, meters.
    pub world: Vec3,
    /// Its observed pixel in the camera image.
    pub pixel: Pixel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpSolution {
    /// World → camera.
    pub pose: RigidTransform,
    /// RMS reprojection error, pixels.
    pub rms: f64,
    pub iterations: usize,
}

/// Singular values of the centered point cloud, descending.
fn spread(points: &[Vec3]) -> (Vec3, Matrix3<f64>, [f64; 3]) {
    let n = points.len() as f64;
    let c = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        cov += (p - c) * (p - c).transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = Matrix3::from_columns(&idx.map(|i| eig.eigenvectors.column(i).into_owned()));
    if basis.determinant() < 0.0 {
        basis.column_mut(2).neg_mut();
    }
    let sv = idx.map(|i| eig.eigenvalues[i].max(0.0).sqrt());
    (c, basis, sv)
}

fn normalized(cam: &PinholeCamera, px: Pixel) -> [f64; 2] {
    [(px[0] - cam.cx) / cam.fx, (px[1] - cam.cy) / cam.fy]
}

fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

fn dlt_init(corrs: &[Correspondence], cam: &PinholeCamera) -> Option<RigidTransform> {
    let n = corrs.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, c) in corrs.iter().enumerate() {
        let [x, y] = normalized(cam, c.pixel);
        let w = c.world;
        let p = [w.x, w.y, w.z, 1.0];
        for k in 0..4 {
            a[(2 * i, k)] = p[k];
            a[(2 * i, 8 + k)] = -x * p[k];
            a[(2 * i + 1, 4 + k)] = p[k];
            a[(2 * i + 1, 8 + k)] = -y * p[k];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, &s)| if s < b.1 { (i, s) } else { b });
    let v = vt.row(imin);
    let mut m = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
    let mut t = Vec3::new(v[3], v[7], v[11]);
    if m.determinant() < 0.0 {
        m = -m;
        t = -t;
    }
    let scale = m.svd(false, false).singular_values.mean();
    if !(scale > 0.0) {
        return None;
    }
    let r = nearest_rotation(&m);
    RigidTransform::new(r, t / scale).ok()
}

fn planar_init(
    corrs: &[Correspondence],
    cam: &PinholeCamera,
    centroid: Vec3,
    basis: &Matrix3<f64>,
) -> Option<RigidTransform> {
    let local: Vec<Pixel> = corrs
        .iter()
        .map(|c| {
            let q = basis.transpose() * (c.world - centroid);
            [q.x, q.y]
        })
        .collect();
    let img: Vec<Pixel> = corrs.iter().map(|c| normalized(cam, c.pixel)).collect();
    let h = fit_homography(&local, &img).ok()?;
    let hm = *h.matrix();
    let (h1, h2, h3) = (hm.column(0).into_owned(), hm.column(1).into_owned(), hm.column(2).into_owned());
    let mut lambda = (h1.norm() + h2.norm()) / 2.0;
    if h3.z < 0.0 {
        lambda = -lambda;
    }
    if lambda == 0.0 {
        return None;
    }
    let (r1, r2) = (h1 / lambda, h2 / lambda);
    let r_local = nearest_rotation(&Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]));
    let t_local = h3 / lambda;
    // camera = R_l · Bᵀ (p − c) + t_l
    let r = r_local * basis.transpose();
    RigidTransform::new(r, t_local - r * centroid).ok()
}

struct Reprojection<'a> {
    corrs: &'a [Correspondence],
    cam: &'a PinholeCamera,
    base: RigidTransform,
}

impl Reprojection<'_> {
    /// Pose for local update `x = [ω, t]`: rotation `exp(ω)·R₀`.
    fn pose(&self, x: &DVector<f64>) -> RigidTransform {
        let dr = RigidTransform::from_rotation_vector(Vec3::new(x[0], x[1], x[2]), Vec3::zeros());
        RigidTransform::new(dr.rotation() * self.base.rotation(), Vec3::new(x[3], x[4], x[5]))
            .unwrap_or(self.base)
    }
}

impl Problem for Reprojection<'_> {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let pose = self.pose(x);
        let mut r = DVector::zeros(2 * self.corrs.len());
        for (i, c) in self.corrs.iter().enumerate() {
            let p = pose.apply(&c.world);
            // points pushed behind the camera get a large finite penalty
            let z = if p.z > 1e-9 { p.z } else { 1e-9 };
            r[2 * i] = self.cam.fx * p.x / z + self.cam.cx - c.pixel[0];
            r[2 * i + 1] = self.cam.fy * p.y / z + self.cam.cy - c.pixel[1];
        }
        r
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        // at ω = 0, ∂(exp(ω)·R₀p)/∂ωₖ = eₖ × R₀p
        let pose = self.pose(x);
        let mut j = DMatrix::zeros(2 * self.corrs.len(), 6);
        for (i, c) in self.corrs.iter().enumerate() {
            let rp = pose.rotation() * c.world;
            let p = rp + pose.translation();
            let z = p.z.max(1e-9);
            let (fx, fy) = (self.cam.fx, self.cam.fy);
            let du = [fx / z, 0.0, -fx * p.x / (z * z)];
            let dv = [0.0, fy / z, -fy * p.y / (z * z)];
            // columns eₖ × rp
            let cols = [
                Vec3::new(0.0, -rp.z, rp.y),
                Vec3::new(rp.z, 0.0, -rp.x),
                Vec3::new(-rp.y, rp.x, 0.0),
            ];
            for k in 0..3 {
                let d = cols[k];
                j[(2 * i, k)] = du[0] * d.x + du[1] * d.y + du[2] * d.z;
                j[(2 * i + 1, k)] = dv[0] * d.x + dv[1] * d.y + dv[2] * d.z;
                j[(2 * i, 3 + k)] = du[k];
                j[(2 * i + 1, 3 + k)] = dv[k];
            }
        }
        j
    }
}

fn refine(
    corrs: &[Correspondence],
    cam: &PinholeCamera,
    init: RigidTransform,
) -> Result<PnpSolution, CaptureError> {
    // the ω-Jacobian is exact only at ω = 0, so relinearize until the
    // rotation update vanishes
    let mut pose = init;
    let mut iterations = 0;
    let opts = LmOptions {
        max_iterations: 50,
        ..LmOptions::default()
    };
    for _ in 0..30 {
        let problem = Reprojection { corrs, cam, base: pose };
        let t = pose.translation();
        let x0 = DVector::from_vec(vec![0.0, 0.0, 0.0, t.x, t.y, t.z]);
        let rep = lm::minimize(&problem, x0, &opts);
        iterations += rep.iterations;
        pose = problem.pose(&rep.params);
        if rep.params.rows(0, 3).norm() < 1e-12 && rep.termination != Termination::MaxIterations {
            let rms = (2.0 * rep.cost / corrs.len() as f64).sqrt();
            return Ok(PnpSolution { pose, rms, iterations });
        }
    }
    Err(CaptureError::NoConvergence(iterations))
}

/// World → camera pose minimizing pixel reprojection error.
pub fn register_camera(corrs: &[Correspondence], cam: &PinholeCamera) -> Result<PnpSolution, CaptureError> {
    if corrs.iter().any(|c| !c.world.iter().all(|v| v.is_finite()) || !c.pixel.iter().all(|v| v.is_finite())) {
        return Err(CaptureError::NonFinite);
    }
    let pts: Vec<Vec3> = corrs.iter().map(|c| c.world).collect();
    if pts.len() >= 2 {
        let (_, _, sv) = spread(&pts);
        if sv[1] <= 1e-9 * sv[0].max(1e-300) {
            return Err(CaptureError::DegenerateConfiguration);
        }
    }
    if corrs.len() < MIN_CORRESPONDENCES {
        return Err(CaptureError::InsufficientCorrespondences {
            needed: MIN_CORRESPONDENCES,
            got: corrs.len(),
        });
    }
    let (centroid, basis, sv) = spread(&pts);
    let init = if sv[2] <= 1e-6 * sv[0] {
        planar_init(corrs, cam, centroid, &basis)
    } else {
        dlt_init(corrs, cam)
    }
    .ok_or(CaptureError::DegenerateConfiguration)?;
    refine(corrs, cam, init)
}
