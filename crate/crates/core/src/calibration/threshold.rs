use super::CalibrationError;

/// Error statistics for one distance bin `(lo, hi]`, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub mean: f64,
    pub std: f64,
}

impl BinStat {
    pub const fn new(lo: f64, hi: f64, mean: f64, std: f64) -> Self {
        Self { lo, hi, mean, std }
    }
}

/// Depth-error statistics measured on human subjects (12 participants,
/// mean ± SD per bin), for each estimator.
pub const FIELD_ERRORS_PIPD: [BinStat; 6] = [
    BinStat::new(0.5, 1.0, 0.3, 0.3),
    BinStat::new(1.0, 2.0, 0.7, 0.5),
    BinStat::new(2.0, 3.0, 0.9, 0.4),
    BinStat::new(3.0, 4.0, 1.0, 0.5),
    BinStat::new(4.0, 5.0, 1.2, 0.3),
    BinStat::new(5.0, 6.0, 1.5, 0.5),
];

pub const FIELD_ERRORS_MIPD: [BinStat; 6] = [
    BinStat::new(0.5, 1.0, 0.8, 1.2),
    BinStat::new(1.0, 2.0, 1.1, 0.7),
    BinStat::new(2.0, 3.0, 1.4, 0.8),
    BinStat::new(3.0, 4.0, 1.3, 0.5),
    BinStat::new(4.0, 5.0, 1.4, 0.7),
    BinStat::new(5.0, 6.0, 1.6, 0.6),
];

pub const FIELD_ERRORS_LOSI: [BinStat; 6] = [
    BinStat::new(0.5, 1.0, 0.2, 0.1),
    BinStat::new(1.0, 2.0, 0.6, 0.4),
    BinStat::new(2.0, 3.0, 1.3, 0.9),
    BinStat::new(3.0, 4.0, 1.8, 0.7),
    BinStat::new(4.0, 5.0, 1.9, 0.4),
    BinStat::new(5.0, 6.0, 2.1, 0.4),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdBin {
    pub lo: f64,
    pub hi: f64,
    pub delta: f64,
}

/// Piecewise-constant activation margin δ over contiguous `(lo, hi]` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    bins: Vec<ThresholdBin>,
}

impl ThresholdTable {
    pub fn from_bins(bins: Vec<ThresholdBin>) -> Result<Self, CalibrationError> {
        if bins.is_empty() {
            return Err(CalibrationError::EmptyStats);
        }
        for (i, b) in bins.iter().enumerate() {
            if !(b.lo < b.hi) || (i > 0 && bins[i - 1].hi != b.lo) {
                return Err(CalibrationError::NonContiguousBins(i));
            }
            if !(b.delta > 0.0) {
                return Err(CalibrationError::NonPositiveThreshold(i));
            }
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[ThresholdBin] {
        &self.bins
    }

    /// δ of the bin containing `distance`, if any.
    pub fn lookup(&self, distance: f64) -> Option<f64> {
        self.bins
            .iter()
            .find(|b| distance > b.lo && distance <= b.hi)
            .map(|b| b.delta)
    }
}

/// δ = mean + std per bin.
pub fn build_threshold_table(stats: &[BinStat]) -> Result<ThresholdTable, CalibrationError> {
    ThresholdTable::from_bins(
        stats
            .iter()
            .map(|s| ThresholdBin {
                lo: s.lo,
                hi: s.hi,
                delta: s.mean + s.std,
            })
            .collect(),
    )
}

/// Thresholds for the fused estimator: intersection statistics up to 2 m,
/// pixel-IPD regression statistics beyond.
pub fn default_threshold_table() -> ThresholdTable {
    let stats: Vec<BinStat> = FIELD_ERRORS_LOSI
        .iter()
        .zip(FIELD_ERRORS_PIPD.iter())
        .map(|(l, p)| if l.hi <= 2.0 { *l } else { *p })
        .collect();
    build_threshold_table(&stats).expect("built-in statistics are valid")
}
