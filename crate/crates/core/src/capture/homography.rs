use nalgebra::{DMatrix, Matrix3, Vector3};

use super::CaptureError;
use crate::geometry::Pixel;

/// Projective map between two image planes, scaled so `h33 = 1` when nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    /// Normalizes `m`; rejects matrices that are singular relative to their
    /// own scale.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, CaptureError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(CaptureError::SingularHomography);
        }
        let s = m[(2, 2)];
        let m = if s != 0.0 { m / s } else { m / m.norm() };
        let sv = m.singular_values();
        if !(sv.min() > 1e-14 * sv.max()) {
            return Err(CaptureError::SingularHomography);
        }
        Ok(Self { m })
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            m: Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    pub fn apply(&self, p: Pixel) -> Option<Pixel> {
        let v = self.m * Vector3::new(p[0], p[1], 1.0);
        if v.z.abs() < 1e-15 {
            return None;
        }
        Some([v.x / v.z, v.y / v.z])
    }

    pub fn inverse(&self) -> Self {
        let inv = self.m.try_inverse().expect("homography is invertible by construction");
        Self::from_matrix(inv).unwrap_or(Self { m: inv })
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Self {
        let m = self.m * other.m;
        Self::from_matrix(m).unwrap_or(Self { m })
    }
}

fn cross2(a: Pixel, b: Pixel, c: Pixel) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn has_collinear_triple(q: &[Pixel; 4]) -> bool {
    let scale = q
        .iter()
        .flat_map(|p| q.iter().map(move |r| (p[0] - r[0]).hypot(p[1] - r[1])))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return true;
    }
    let tol = 1e-9 * scale * scale;
    [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
        .iter()
        .any(|&(a, b, c)| cross2(q[a], q[b], q[c]).abs() <= tol)
}

/// Similarity taking points to zero mean and mean distance √2.
fn normalizer(pts: &[Pixel]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0] / n, y + p[1] / n));
    let d = pts.iter().map(|p| (p[0] - mx).hypot(p[1] - my)).sum::<f64>() / n;
    let s = if d > 0.0 { std::f64::consts::SQRT_2 / d } else { 1.0 };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

fn apply_raw(m: &Matrix3<f64>, p: Pixel) -> Pixel {
    let v = m * Vector3::new(p[0], p[1], 1.0);
    [v.x / v.z, v.y / v.z]
}

/// Normalized DLT over `n ≥ 4` correspondences (least squares when `n > 4`).
pub fn fit_homography(src: &[Pixel], dst: &[Pixel]) -> Result<Homography, CaptureError> {
    assert_eq!(src.len(), dst.len());
    if src.len() < 4 {
        return Err(CaptureError::InsufficientCorrespondences { needed: 4, got: src.len() });
    }
    let ts = normalizer(src);
    let td = normalizer(dst);
    let n = src.len();
    let mut a = DMatrix::<f64>::zeros(2 * n.max(5), 9);
    for i in 0..n {
        let [x, y] = apply_raw(&ts, src[i]);
        let [u, v] = apply_raw(&td, dst[i]);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    // rows beyond 2n stay zero so the SVD always yields a full 9×9 V
    let svd = a.svd(false, true);
    let vt = svd.v_t.ok_or(CaptureError::SingularHomography)?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &s)| if s < best.1 { (i, s) } else { best });
    let h = vt.row(imin);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or(CaptureError::SingularHomography)?;
    Homography::from_matrix(td_inv * hn * ts)
}

/// Exact four-point homography taking `src[i]` to `dst[i]`: the 8×8 DLT
/// system with `h33 = 1`, solved in normalized coordinates.
pub fn homography_from_quad(src: &[Pixel; 4], dst: &[Pixel; 4]) -> Result<Homography, CaptureError> {
    if has_collinear_triple(src) || has_collinear_triple(dst) {
        return Err(CaptureError::DegenerateQuad);
    }
    let ts = normalizer(src);
    let td = normalizer(dst);
    let mut a = nalgebra::SMatrix::<f64, 8, 8>::zeros();
    let mut b = nalgebra::SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let [x, y] = apply_raw(&ts, src[i]);
        let [u, v] = apply_raw(&td, dst[i]);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
        b[r] = u;
        b[r + 1] = v;
    }
    let h = a.full_piv_lu().solve(&b).ok_or(CaptureError::DegenerateQuad)?;
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
    let td_inv = td.try_inverse().ok_or(CaptureError::SingularHomography)?;
    Homography::from_matrix(td_inv * hn * ts)
}
