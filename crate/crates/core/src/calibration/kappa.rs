use nalgebra::{DMatrix, DVector, Matrix3};

use super::CalibrationError;
use crate::geometry::Vec3;
use crate::lm::{self, LmOptions, Problem, Termination};
use crate::simulation::{rot_x, rot_y, Eye, EyeKappa, PupilSamplePair, SubjectModel};

/// Largest accepted |kappa| component, radians (≈ 20°).
pub const MAX_KAPPA: f64 = 0.35;

/// Person-specific kappa offsets for both eyes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KappaModel {
    pub left: EyeKappa,
    pub right: EyeKappa,
}

impl KappaModel {
    pub fn new(left: EyeKappa, right: EyeKappa) -> Result<Self, CalibrationError> {
        for a in [left.horizontal, left.vertical, right.horizontal, right.vertical] {
            if !(a.abs() < MAX_KAPPA) {
                return Err(CalibrationError::ImplausibleKappa(a));
            }
        }
        Ok(Self { left, right })
    }

    pub fn eye(&self, eye: Eye) -> EyeKappa {
        match eye {
            Eye::Left => self.left,
            Eye::Right => self.right,
        }
    }

    fn from_params(x: &DVector<f64>) -> Self {
        Self {
            left: EyeKappa::new(x[0], x[1]),
            right: EyeKappa::new(x[2], x[3]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KappaFit {
    pub model: KappaModel,
    /// RMS angle between corrected visual axes and eye→target directions.
    pub rms_angle: f64,
    /// Same metric with zero kappa.
    pub rms_angle_uncorrected: f64,
    /// `½Σ‖residual‖²` after each accepted iteration.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
}

struct Observation {
    eye: Eye,
    optical: Vec3,
    target_dir: Vec3,
}

struct KappaProblem {
    observations: Vec<Observation>,
}

impl KappaProblem {
    fn rotation(x: &DVector<f64>, eye: Eye) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
        let (h, v) = match eye {
            Eye::Left => (x[0], x[1]),
            Eye::Right => (x[2], x[3]),
        };
        let ry = rot_y(h);
        let rx = rot_x(-v);
        let (sh, ch) = h.sin_cos();
        let dry = Matrix3::new(-sh, 0.0, ch, 0.0, 0.0, 0.0, -ch, 0.0, -sh);
        let (sv, cv) = (-v).sin_cos();
        let drx = Matrix3::new(0.0, 0.0, 0.0, 0.0, -sv, -cv, 0.0, cv, -sv);
        // d/dv of Rx(-v) = -Rx'(-v)
        (ry * rx, dry * rx, -(ry * drx))
    }
}

impl Problem for KappaProblem {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let rl = Self::rotation(x, Eye::Left).0;
        let rr = Self::rotation(x, Eye::Right).0;
        let mut out = DVector::zeros(self.observations.len() * 3);
        for (i, o) in self.observations.iter().enumerate() {
            let r = if o.eye == Eye::Left { &rl } else { &rr };
            let d = r * o.optical - o.target_dir;
            out.fixed_rows_mut::<3>(i * 3).copy_from(&d);
        }
        out
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let l = Self::rotation(x, Eye::Left);
        let r = Self::rotation(x, Eye::Right);
        let mut j = DMatrix::zeros(self.observations.len() * 3, 4);
        for (i, o) in self.observations.iter().enumerate() {
            let (col, (_, dh, dv)) = match o.eye {
                Eye::Left => (0, &l),
                Eye::Right => (2, &r),
            };
            j.fixed_view_mut::<3, 1>(i * 3, col).copy_from(&(dh * o.optical));
            j.fixed_view_mut::<3, 1>(i * 3, col + 1).copy_from(&(dv * o.optical));
        }
        j
    }
}

/// Least-squares kappa for both eyes from labelled calibration samples.
pub fn fit_kappa(
    samples: &[(PupilSamplePair, Vec3)],
    subject: &SubjectModel,
) -> Result<KappaFit, CalibrationError> {
    fit_kappa_with(samples, subject, &LmOptions::default())
}

pub fn fit_kappa_with(
    samples: &[(PupilSamplePair, Vec3)],
    subject: &SubjectModel,
    opts: &LmOptions,
) -> Result<KappaFit, CalibrationError> {
    if samples.len() < 4 {
        return Err(CalibrationError::InsufficientSamples {
            needed: 4,
            got: samples.len(),
        });
    }
    let mid = subject.eye_mid();
    // targets share a depth when they lie in one fronto-parallel plane
    let z0 = samples[0].1.z - mid.z;
    if samples.iter().all(|(_, t)| (t.z - mid.z - z0).abs() < 1e-6) {
        return Err(CalibrationError::SingleDepth);
    }

    let mut observations = Vec::with_capacity(samples.len() * 2);
    for (pair, target) in samples {
        for (eye, pupil) in [(Eye::Left, pair.p_left), (Eye::Right, pair.p_right)] {
            let center = subject.center(eye);
            observations.push(Observation {
                eye,
                optical: (pupil - center).normalize(),
                target_dir: (target - center).normalize(),
            });
        }
    }
    let problem = KappaProblem { observations };
    let rep = lm::minimize(&problem, DVector::zeros(4), opts);
    if rep.termination == Termination::MaxIterations {
        return Err(CalibrationError::NoConvergence {
            iterations: rep.iterations,
            gradient: rep.gradient_norm,
        });
    }
    let fitted = KappaModel::from_params(&rep.params);
    let model = KappaModel::new(fitted.left, fitted.right)?;
    Ok(KappaFit {
        rms_angle: rms_angle(&problem, &model),
        rms_angle_uncorrected: rms_angle(&problem, &KappaModel::default()),
        model,
        cost_history: rep.cost_history,
        iterations: rep.iterations,
    })
}

fn rms_angle(problem: &KappaProblem, model: &KappaModel) -> f64 {
    let rl = model.left.rotation();
    let rr = model.right.rotation();
    let sum: f64 = problem
        .observations
        .iter()
        .map(|o| {
            let r = if o.eye == Eye::Left { &rl } else { &rr };
            let v = r * o.optical;
            let a = v.cross(&o.target_dir).norm().atan2(v.dot(&o.target_dir));
            a * a
        })
        .sum();
    (sum / problem.observations.len() as f64).sqrt()
}
