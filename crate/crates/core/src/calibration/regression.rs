use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CalibrationError;
use crate::depth::{ipd_mm, ipd_px, IpdNorm};
use crate::geometry::Vec3;
use crate::lm::{self, LmOptions, Problem};
use crate::simulation::PupilSamplePair;

/// Horizontal gaze angles (radians) splitting the field of view into three
/// sectors: ±6°.
pub const DEFAULT_SECTOR_BOUNDARIES: [f64; 2] = [-0.104_719_755_119_659_77, 0.104_719_755_119_659_77];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IpdUnits {
    Millimeters,
    Pixels,
}

/// `d̂ = k1·exp(k2·(θ − θ̄)) + k3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionModel {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub theta_bar: f64,
    pub units: IpdUnits,
}

impl RegressionModel {
    pub fn predict(&self, theta: f64) -> f64 {
        self.k1 * (self.k2 * (theta - self.theta_bar)).exp() + self.k3
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    pub min_samples: usize,
    /// Depth residual below which a pair counts as an inlier, meters.
    pub inlier_threshold: f64,
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            min_samples: 3,
            inlier_threshold: 0.5,
            min_inlier_fraction: 0.5,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.min_samples < 3 {
            return Err(CalibrationError::InvalidRansac("min_samples must be at least 3"));
        }
        if !(self.min_inlier_fraction > 0.0 && self.min_inlier_fraction <= 1.0) {
            return Err(CalibrationError::InvalidRansac(
                "min_inlier_fraction must lie in (0, 1]",
            ));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(CalibrationError::InvalidRansac("inlier_threshold must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFit {
    pub model: RegressionModel,
    /// Consensus mask over the input pairs.
    pub inliers: Vec<bool>,
    /// RMS depth residual over the inliers, meters.
    pub rms: f64,
}

impl ExponentialFit {
    pub fn outlier_indices(&self) -> Vec<usize> {
        self.inliers
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| (!m).then_some(i))
            .collect()
    }
}

struct ExpProblem<'a> {
    centered: &'a [f64],
    depths: &'a [f64],
}

impl Problem for ExpProblem<'_> {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.centered.len(),
            self.centered
                .iter()
                .zip(self.depths)
                .map(|(c, d)| x[0] * (x[1] * c).exp() + x[2] - d),
        )
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.centered.len(), 3);
        for (i, c) in self.centered.iter().enumerate() {
            let e = (x[1] * c).exp();
            j[(i, 0)] = e;
            j[(i, 1)] = x[0] * c * e;
            j[(i, 2)] = 1.0;
        }
        j
    }
}

/// Plain least-squares fit of the exponential model with `θ̄ = mean(θ)`.
///
/// Initialized by a log-linear fit on `(θ, d − min d + ε)`, then refined by
/// Levenberg-Marquardt from that start and two rescaled growth rates; the
/// lowest-cost solution wins.
pub fn least_squares_exponential(
    pairs: &[(f64, f64)],
    units: IpdUnits,
) -> Result<RegressionModel, CalibrationError> {
    if pairs.len() < 3 {
        return Err(CalibrationError::InsufficientSamples {
            needed: 3,
            got: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let theta_bar = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let centered: Vec<f64> = pairs.iter().map(|p| p.0 - theta_bar).collect();
    let depths: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let spread = centered.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !(spread > 0.0) {
        return Err(CalibrationError::DegenerateData);
    }

    let d_min = depths.iter().cloned().fold(f64::INFINITY, f64::min);
    let d_max = depths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let eps = 0.05 * (d_max - d_min) + 1e-9;
    let logs: Vec<f64> = depths.iter().map(|d| (d - d_min + eps).ln()).collect();
    let (slope, intercept) = linear_fit(&centered, &logs);
    let init = [intercept.exp(), slope, d_min - eps];

    let problem = ExpProblem {
        centered: &centered,
        depths: &depths,
    };
    let opts = LmOptions {
        max_iterations: 500,
        ..LmOptions::default()
    };
    let mut best: Option<lm::LmReport> = None;
    for scale in [1.0f64, 0.5, 2.0] {
        let x0 = DVector::from_vec(vec![init[0] / scale.max(1.0), init[1] * scale, init[2]]);
        let rep = lm::minimize(&problem, x0, &opts);
        if rep.params.iter().all(|p| p.is_finite())
            && best.as_ref().is_none_or(|b| rep.cost < b.cost)
        {
            best = Some(rep);
        }
    }
    let best = best.ok_or(CalibrationError::DegenerateData)?;
    let p = &best.params;
    if !(p[1].is_finite() && p[1] != 0.0) {
        return Err(CalibrationError::DegenerateData);
    }
    Ok(RegressionModel {
        k1: p[0],
        k2: p[1],
        k3: p[2],
        theta_bar,
        units,
    })
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

fn consensus(model: &RegressionModel, pairs: &[(f64, f64)], threshold: f64) -> (Vec<bool>, f64) {
    let mut sq = 0.0;
    let mask = pairs
        .iter()
        .map(|(t, d)| {
            let r = (model.predict(*t) - d).abs();
            let inlier = r < threshold;
            if inlier {
                sq += r * r;
            }
            inlier
        })
        .collect();
    (mask, sq)
}

fn subset(pairs: &[(f64, f64)], mask: &[bool]) -> Vec<(f64, f64)> {
    pairs
        .iter()
        .zip(mask)
        .filter_map(|(p, &m)| m.then_some(*p))
        .collect()
}

/// RANSAC-wrapped exponential fit of `(θ, depth)` pairs.
///
/// Minimal subsets of `min_samples` pairs with at least three distinct θ are
/// fitted and scored by inlier count (ties broken by inlier residual). The
/// winning consensus set is refitted until it stops changing.
pub fn fit_exponential(
    pairs: &[(f64, f64)],
    ransac: &RansacConfig,
    units: IpdUnits,
) -> Result<ExponentialFit, CalibrationError> {
    ransac.validate()?;
    let n = pairs.len();
    if n < ransac.min_samples {
        return Err(CalibrationError::InsufficientSamples {
            needed: ransac.min_samples,
            got: n,
        });
    }
    if pairs.iter().all(|p| p.0 == pairs[0].0) {
        return Err(CalibrationError::DegenerateData);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(ransac.seed);
    let mut best: Option<(usize, f64, Vec<bool>)> = None;
    for _ in 0..ransac.iterations {
        let idx = sample(&mut rng, n, ransac.min_samples);
        let picked: Vec<(f64, f64)> = idx.iter().map(|i| pairs[i]).collect();
        if distinct_count(&picked) < 3 {
            continue;
        }
        let Ok(model) = least_squares_exponential(&picked, units) else {
            continue;
        };
        let (mask, sq) = consensus(&model, pairs, ransac.inlier_threshold);
        let count = mask.iter().filter(|&&m| m).count();
        let better = match &best {
            None => true,
            Some((c, s, _)) => count > *c || (count == *c && sq < *s),
        };
        if better {
            best = Some((count, sq, mask));
        }
    }

    let needed = (ransac.min_inlier_fraction * n as f64).ceil() as usize;
    let Some((mut count, _, mut mask)) = best else {
        return Err(CalibrationError::RansacFailure { best: 0, total: n });
    };
    if count < needed {
        return Err(CalibrationError::RansacFailure { best: count, total: n });
    }

    let mut model = least_squares_exponential(&subset(pairs, &mask), units)?;
    for _ in 0..10 {
        let (new_mask, _) = consensus(&model, pairs, ransac.inlier_threshold);
        if new_mask == mask {
            break;
        }
        let new_count = new_mask.iter().filter(|&&m| m).count();
        if new_count < needed || distinct_count(&subset(pairs, &new_mask)) < 3 {
            break;
        }
        mask = new_mask;
        count = new_count;
        model = least_squares_exponential(&subset(pairs, &mask), units)?;
    }

    let (_, sq) = consensus(&model, &subset(pairs, &mask), f64::INFINITY);
    Ok(ExponentialFit {
        model,
        rms: (sq / count as f64).sqrt(),
        inliers: mask,
    })
}

fn distinct_count(pairs: &[(f64, f64)]) -> usize {
    let mut thetas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    thetas.len()
}

/// Which IPD measure feeds a regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IpdFeature {
    /// 3D pupil distance in millimeters.
    Mipd(IpdNorm),
    /// Image-space distance `W − x_l + x_r` in pixels.
    Pipd { image_width: f64 },
}

impl IpdFeature {
    pub fn units(&self) -> IpdUnits {
        match self {
            IpdFeature::Mipd(_) => IpdUnits::Millimeters,
            IpdFeature::Pipd { .. } => IpdUnits::Pixels,
        }
    }

    pub fn measure(&self, pair: &PupilSamplePair) -> Result<f64, crate::depth::DepthError> {
        match *self {
            IpdFeature::Mipd(norm) => Ok(ipd_mm(pair, norm)),
            IpdFeature::Pipd { image_width } => ipd_px(pair, image_width),
        }
    }
}

/// Three exponential models, one per horizontal field-of-view sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectoredRegression {
    boundaries: [f64; 2],
    models: [RegressionModel; 3],
    feature: IpdFeature,
}

impl SectoredRegression {
    pub fn new(
        boundaries: [f64; 2],
        models: [RegressionModel; 3],
        feature: IpdFeature,
    ) -> Result<Self, CalibrationError> {
        if !(boundaries[0] < boundaries[1]) {
            return Err(CalibrationError::InvalidBoundaries);
        }
        Ok(Self {
            boundaries,
            models,
            feature,
        })
    }

    pub fn boundaries(&self) -> [f64; 2] {
        self.boundaries
    }

    pub fn models(&self) -> &[RegressionModel; 3] {
        &self.models
    }

    pub fn feature(&self) -> IpdFeature {
        self.feature
    }

    pub fn units(&self) -> IpdUnits {
        self.feature.units()
    }

    /// Sector 0 below the first boundary, 1 in `[b0, b1)`, 2 from `b1` up.
    pub fn sector_of(&self, horizontal_angle: f64) -> usize {
        sector_index(&self.boundaries, horizontal_angle)
    }

    pub fn predict(&self, theta: f64, horizontal_angle: f64) -> f64 {
        self.models[self.sector_of(horizontal_angle)].predict(theta)
    }
}

fn sector_index(boundaries: &[f64; 2], angle: f64) -> usize {
    if angle < boundaries[0] {
        0
    } else if angle < boundaries[1] {
        1
    } else {
        2
    }
}

/// Per-sector fits plus the sectored predictor built from them.
#[derive(Debug, Clone)]
pub struct SectoredFit {
    pub regression: SectoredRegression,
    pub fits: [ExponentialFit; 3],
    /// Number of samples landing in each sector.
    pub counts: [usize; 3],
}

/// Partitions labelled samples by the horizontal angle of their target as
/// seen from `eye_mid` and fits one exponential per sector.
pub fn fit_sectored(
    samples: &[(PupilSamplePair, Vec3)],
    eye_mid: &Vec3,
    feature: IpdFeature,
    boundaries: [f64; 2],
    ransac: &RansacConfig,
) -> Result<SectoredFit, CalibrationError> {
    if !(boundaries[0] < boundaries[1]) {
        return Err(CalibrationError::InvalidBoundaries);
    }
    let mut buckets: [Vec<(f64, f64)>; 3] = Default::default();
    for (pair, target) in samples {
        let rel = target - eye_mid;
        let angle = rel.x.atan2(rel.z);
        let theta = feature.measure(pair)?;
        buckets[sector_index(&boundaries, angle)].push((theta, rel.norm()));
    }
    let sparse: Vec<usize> = (0..3)
        .filter(|&i| buckets[i].len() < ransac.min_samples.max(3))
        .collect();
    if !sparse.is_empty() {
        return Err(CalibrationError::SectorUnderpopulated(sparse));
    }
    let counts = [buckets[0].len(), buckets[1].len(), buckets[2].len()];
    let fit = |i: usize| fit_exponential(&buckets[i], ransac, feature.units());
    let fits = [fit(0)?, fit(1)?, fit(2)?];
    let regression = SectoredRegression::new(
        boundaries,
        [fits[0].model, fits[1].model, fits[2].model],
        feature,
    )?;
    Ok(SectoredFit {
        regression,
        fits,
        counts,
    })
}
