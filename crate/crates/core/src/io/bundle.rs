use std::fmt::Write;

use super::{data_lines, expect_header, invalid, parse_err, real, FormatError};
use crate::calibration::{
    IpdFeature, KappaModel, RegressionModel, SectoredRegression, ThresholdBin, ThresholdTable,
};
use crate::depth::{DepthPipeline, IpdNorm};
use crate::simulation::{EyeKappa, SubjectModel};

pub const BUNDLE_HEADER: &str = "# vergekit-bundle v1";

/// Sectored regression as persisted: boundaries in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSection {
    pub feature: IpdFeature,
    pub boundaries_deg: [f64; 2],
    pub models: [RegressionModel; 3],
}

impl RegressionSection {
    pub fn from_regression(r: &SectoredRegression) -> Self {
        let b = r.boundaries();
        Self {
            feature: r.feature(),
            boundaries_deg: [b[0].to_degrees(), b[1].to_degrees()],
            models: *r.models(),
        }
    }

    pub fn to_regression(&self) -> Result<SectoredRegression, crate::calibration::CalibrationError> {
        SectoredRegression::new(
            [self.boundaries_deg[0].to_radians(), self.boundaries_deg[1].to_radians()],
            self.models,
            self.feature,
        )
    }
}

/// Calibration output as persisted. Angles are stored in degrees; this struct
/// is the exact file content, converted to radians only when used.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleFile {
    /// left horizontal, left vertical, right horizontal, right vertical.
    pub kappa_deg: [f64; 4],
    pub mipd: Option<RegressionSection>,
    pub pipd: Option<RegressionSection>,
    pub thresholds: Vec<ThresholdBin>,
}

impl BundleFile {
    pub fn kappa(&self) -> Result<KappaModel, crate::calibration::CalibrationError> {
        let k = self.kappa_deg;
        KappaModel::new(EyeKappa::from_degrees(k[0], k[1]), EyeKappa::from_degrees(k[2], k[3]))
    }

    pub fn kappa_to_degrees(k: &KappaModel) -> [f64; 4] {
        [
            k.left.horizontal.to_degrees(),
            k.left.vertical.to_degrees(),
            k.right.horizontal.to_degrees(),
            k.right.vertical.to_degrees(),
        ]
    }

    pub fn threshold_table(&self) -> Result<ThresholdTable, crate::calibration::CalibrationError> {
        ThresholdTable::from_bins(self.thresholds.clone())
    }

    pub fn pipeline(&self, subject: SubjectModel) -> Result<DepthPipeline, crate::calibration::CalibrationError> {
        let mut p = DepthPipeline::new(subject, self.kappa()?);
        p.mipd = self.mipd.as_ref().map(|s| s.to_regression()).transpose()?;
        p.pipd = self.pipd.as_ref().map(|s| s.to_regression()).transpose()?;
        Ok(p)
    }
}

fn feature_tokens(f: &IpdFeature) -> String {
    match f {
        IpdFeature::Mipd(IpdNorm::Euclidean) => "mipd euclidean".into(),
        IpdFeature::Mipd(IpdNorm::L1) => "mipd l1".into(),
        IpdFeature::Pipd { image_width } => format!("pipd {image_width}"),
    }
}

pub fn format_bundle(b: &BundleFile) -> String {
    let mut out = String::new();
    out.push_str(BUNDLE_HEADER);
    out.push('\n');
    out.push_str("# angles in degrees; depths in meters\n");
    let k = b.kappa_deg;
    writeln!(out, "kappa {} {} {} {}", k[0], k[1], k[2], k[3]).unwrap();
    for sec in [&b.mipd, &b.pipd].into_iter().flatten() {
        writeln!(
            out,
            "regression {} {} {}",
            feature_tokens(&sec.feature),
            sec.boundaries_deg[0],
            sec.boundaries_deg[1]
        )
        .unwrap();
        for m in &sec.models {
            writeln!(out, "sector {} {} {} {}", m.k1, m.k2, m.k3, m.theta_bar).unwrap();
        }
    }
    for t in &b.thresholds {
        writeln!(out, "delta {} {} {}", t.lo, t.hi, t.delta).unwrap();
    }
    out
}

pub fn parse_bundle(text: &str) -> Result<BundleFile, FormatError> {
    expect_header(text, BUNDLE_HEADER)?;
    let mut kappa = None;
    let mut mipd = None;
    let mut pipd = None;
    let mut thresholds = Vec::new();
    let mut lines = data_lines(text).peekable();
    while let Some((line, l)) = lines.next() {
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok[0] {
            "kappa" => {
                if tok.len() != 5 {
                    return Err(parse_err(line, "kappa needs 4 values"));
                }
                kappa = Some([real(tok[1], line)?, real(tok[2], line)?, real(tok[3], line)?, real(tok[4], line)?]);
            }
            "regression" => {
                let (feature, rest) = match (tok.get(1).copied(), tok.get(2).copied()) {
                    (Some("mipd"), Some("euclidean")) => (IpdFeature::Mipd(IpdNorm::Euclidean), 3),
                    (Some("mipd"), Some("l1")) => (IpdFeature::Mipd(IpdNorm::L1), 3),
                    (Some("pipd"), Some(w)) => (IpdFeature::Pipd { image_width: real(w, line)? }, 3),
                    _ => return Err(parse_err(line, "unknown regression feature")),
                };
                if tok.len() != rest + 2 {
                    return Err(parse_err(line, "regression needs two sector boundaries"));
                }
                let boundaries_deg = [real(tok[rest], line)?, real(tok[rest + 1], line)?];
                let mut models = [RegressionModel {
                    k1: 0.0,
                    k2: 0.0,
                    k3: 0.0,
                    theta_bar: 0.0,
                    units: feature.units(),
                }; 3];
                for m in &mut models {
                    let (sl, s) = lines.next().ok_or_else(|| parse_err(line, "missing sector lines"))?;
                    let st: Vec<&str> = s.split_whitespace().collect();
                    if st.len() != 5 || st[0] != "sector" {
                        return Err(parse_err(sl, "expected `sector k1 k2 k3 theta_bar`"));
                    }
                    m.k1 = real(st[1], sl)?;
                    m.k2 = real(st[2], sl)?;
                    m.k3 = real(st[3], sl)?;
                    m.theta_bar = real(st[4], sl)?;
                }
                let sec = RegressionSection {
                    feature,
                    boundaries_deg,
                    models,
                };
                sec.to_regression().map_err(|e| invalid(line, e))?;
                let slot = if matches!(feature, IpdFeature::Mipd(_)) { &mut mipd } else { &mut pipd };
                if slot.replace(sec).is_some() {
                    return Err(parse_err(line, "duplicate regression section"));
                }
            }
            "delta" => {
                if tok.len() != 4 {
                    return Err(parse_err(line, "delta needs lo hi value"));
                }
                thresholds.push(ThresholdBin {
                    lo: real(tok[1], line)?,
                    hi: real(tok[2], line)?,
                    delta: real(tok[3], line)?,
                });
            }
            other => return Err(parse_err(line, format!("unknown record `{other}`"))),
        }
    }
    let kappa_deg = kappa.ok_or_else(|| parse_err(0, "missing kappa record"))?;
    let b = BundleFile {
        kappa_deg,
        mipd,
        pipd,
        thresholds,
    };
    b.kappa().map_err(|e| invalid(0, e))?;
    if !b.thresholds.is_empty() {
        b.threshold_table().map_err(|e| invalid(0, e))?;
    }
    Ok(b)
}
