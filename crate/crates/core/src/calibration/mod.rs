//! Fitting procedures: per-eye kappa, sectored exponential IPD→depth
//! regression with RANSAC, activation thresholds and the mirror-based rig
//! calibration.

mod kappa;
mod mirror;
mod regression;
mod threshold;

pub use kappa::{fit_kappa, fit_kappa_with, KappaFit, KappaModel, MAX_KAPPA};
pub use mirror::{
    calibrate_rig_with_mirror, fit_rigid_transform, virtual_image_pose, ChessboardLayout,
    MirrorCalibration, RigObservation,
};
pub use regression::{
    fit_exponential, fit_sectored, least_squares_exponential, ExponentialFit, IpdFeature,
    IpdUnits, RansacConfig, RegressionModel, SectoredFit, SectoredRegression,
    DEFAULT_SECTOR_BOUNDARIES,
};
pub use threshold::{
    build_threshold_table, default_threshold_table, BinStat, ThresholdBin, ThresholdTable,
    FIELD_ERRORS_LOSI, FIELD_ERRORS_MIPD, FIELD_ERRORS_PIPD,
};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("calibration samples must span at least two depths")]
    SingleDepth,
    #[error("optimizer did not converge after {iterations} iterations (gradient {gradient:e})")]
    NoConvergence { iterations: usize, gradient: f64 },
    #[error("fitted kappa {0:.4} rad exceeds the physiological bound")]
    ImplausibleKappa(f64),
    #[error("all IPD values are equal")]
    DegenerateData,
    #[error("no model reached the minimum inlier fraction (best {best} of {total})")]
    RansacFailure { best: usize, total: usize },
    #[error("sectors {0:?} have too few samples")]
    SectorUnderpopulated(Vec<usize>),
    #[error("invalid sector boundaries")]
    InvalidBoundaries,
    #[error("invalid RANSAC configuration: {0}")]
    InvalidRansac(&'static str),
    #[error("no error statistics supplied")]
    EmptyStats,
    #[error("bins must be contiguous and increasing (bin {0})")]
    NonContiguousBins(usize),
    #[error("threshold for bin {0} must be positive")]
    NonPositiveThreshold(usize),
    #[error("mirror-reflected pose is improper (det = -1)")]
    ImproperRotation,
    #[error("mirror plane is degenerate relative to the scene camera")]
    MirrorDegenerate,
    #[error("invalid chessboard layout")]
    InvalidLayout,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Depth(#[from] crate::depth::DepthError),
}
