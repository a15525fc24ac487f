use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vergekit::calibration::{
    build_threshold_table, default_threshold_table, fit_kappa, fit_sectored, BinStat, IpdFeature,
    RansacConfig, SectoredFit, DEFAULT_SECTOR_BOUNDARIES,
};
use vergekit::capture::{see_through_frame, CaptureError};
use vergekit::control::{run_control, run_layers, ControlConfig, ControlInput, ControlMode, EventKind};
use vergekit::depth::{DepthError, DepthPipeline, IpdNorm, Method};
use vergekit::eval::{check_time_base, evaluate_depth, replay_session, DEPTH_BINS};
use vergekit::geometry::{Ray, Vec3};
use vergekit::io::{
    format_bundle, format_error_table, format_estimates, format_events, format_metrics, format_stream,
    parse_bundle, parse_error_table, parse_estimates, parse_events, parse_script, parse_stream, read_pnm,
    write_pnm, BundleFile, EstimateRow, RegressionSection,
};
use vergekit::simulation::{simulate_calibration, simulate_stream, GazeStream, EYE_IMAGE_WIDTH};

use crate::config::{self, FixationScript, RigConfig, RunConfig, SceneConfig};
use crate::CliError;

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Format(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read_bytes(path)?)
        .map_err(|_| CliError::Format(format!("{} is not UTF-8 text", path.display())))
}

fn format_err(path: &Path) -> impl Fn(vergekit::io::FormatError) -> CliError + '_ {
    move |e| CliError::Format(format!("{}: {e}", path.display()))
}

/// Writes to `path`, or stdout when absent.
fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| CliError::Format(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Format(format!("cannot write stdout: {e}"))),
    }
}

fn load_stream(path: &Path) -> Result<GazeStream, CliError> {
    parse_stream(&read_text(path)?).map_err(format_err(path))
}

fn load_pipeline(bundle: &Path, subject: Option<&Path>) -> Result<(BundleFile, DepthPipeline), CliError> {
    let subject = config::subject(subject)?;
    let b = parse_bundle(&read_text(bundle)?).map_err(format_err(bundle))?;
    let p = b
        .pipeline(subject)
        .map_err(|e| CliError::Format(format!("{}: {e}", bundle.display())))?;
    Ok((b, p))
}

fn require_method(p: &DepthPipeline, method: Method, bundle: &Path) -> Result<(), CliError> {
    p.supports(method).map_err(|e| {
        CliError::Numerical(format!("{} cannot serve method {method}: {e}", bundle.display()))
    })
}

pub fn simulate(
    subject: Option<&Path>,
    scene: Option<&Path>,
    script: Option<&Path>,
    noise_deg: f64,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if !(noise_deg >= 0.0 && noise_deg.is_finite()) {
        return Err(CliError::Usage("--noise must be a non-negative number of degrees".into()));
    }
    let subject = config::subject(subject)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = noise_deg.to_radians();
    let stream = match script {
        Some(p) => {
            let s: FixationScript = config::load(p)?;
            simulate_stream(&subject, &s.steps(), s.sample_rate, sigma, &mut rng)
        }
        None => {
            let cfg = match scene {
                Some(p) => config::load::<SceneConfig>(p)?,
                None => SceneConfig::default(),
            };
            simulate_calibration(&subject, &cfg.scene()?, sigma, &mut rng)
        }
    }
    .map_err(|e| CliError::Usage(format!("simulation: {e}")))?;
    write_out(out, format_stream(&stream).as_bytes())
}

fn report_fit(name: &str, fit: &SectoredFit) {
    for (i, f) in fit.fits.iter().enumerate() {
        eprintln!(
            "{name} sector {i}: n={} inliers={} rms={:.4} m",
            fit.counts[i],
            f.inliers.iter().filter(|&&m| m).count(),
            f.rms
        );
    }
}

pub fn calibrate(
    stream: &Path,
    subject: Option<&Path>,
    errors: Option<&Path>,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let subject = config::subject(subject)?;
    let thresholds = match errors {
        Some(p) => {
            let table = parse_error_table(&read_text(p)?).map_err(format_err(p))?;
            let stats: Vec<BinStat> = table
                .bins
                .iter()
                .map(|b| BinStat::new(b.lo, b.hi, b.mean, b.std))
                .collect();
            build_threshold_table(&stats)
                .map_err(|e| CliError::Numerical(format!("threshold table: {e}")))?
        }
        None => default_threshold_table(),
    };
    let labelled = load_stream(stream)?.labelled();
    let kappa = fit_kappa(&labelled, &subject).map_err(|e| CliError::Numerical(format!("kappa fit: {e}")))?;
    eprintln!(
        "kappa residual: {:.6} deg (uncorrected {:.6} deg)",
        kappa.rms_angle.to_degrees(),
        kappa.rms_angle_uncorrected.to_degrees()
    );
    let ransac = RansacConfig {
        seed,
        ..RansacConfig::default()
    };
    let mid = subject.eye_mid();
    let mipd = fit_sectored(&labelled, &mid, IpdFeature::Mipd(IpdNorm::Euclidean), DEFAULT_SECTOR_BOUNDARIES, &ransac)
        .map_err(|e| CliError::Numerical(format!("MIPD regression: {e}")))?;
    report_fit("mipd", &mipd);
    let pipd = fit_sectored(
        &labelled,
        &mid,
        IpdFeature::Pipd {
            image_width: EYE_IMAGE_WIDTH as f64,
        },
        DEFAULT_SECTOR_BOUNDARIES,
        &ransac,
    )
    .map_err(|e| CliError::Numerical(format!("PIPD regression: {e}")))?;
    report_fit("pipd", &pipd);
    let bundle = BundleFile {
        kappa_deg: BundleFile::kappa_to_degrees(&kappa.model),
        mipd: Some(RegressionSection::from_regression(&mipd.regression)),
        pipd: Some(RegressionSection::from_regression(&pipd.regression)),
        thresholds: thresholds.bins().to_vec(),
    };
    write_out(out, format_bundle(&bundle).as_bytes())
}

pub fn estimate(
    stream: &Path,
    bundle: &Path,
    subject: Option<&Path>,
    method: Method,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let (_, pipeline) = load_pipeline(bundle, subject)?;
    require_method(&pipeline, method, bundle)?;
    let stream = load_stream(stream)?;
    let mut rows = Vec::with_capacity(stream.len());
    let mut skipped = 0usize;
    for s in stream.samples() {
        match pipeline.estimate(&s.pair, method) {
            Ok(e) => rows.push(EstimateRow {
                t: s.pair.timestamp,
                depth: e.depth,
                method: e.method.as_str().to_string(),
                source: e.source.as_str().to_string(),
                fallback: e.fallback,
                truth: s.truth_depth,
            }),
            Err(e @ DepthError::ModelMissing(_)) => return Err(CliError::Numerical(e.to_string())),
            Err(_) => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!("skipped {skipped} of {} samples with no computable depth", stream.len());
    }
    write_out(out, format_estimates(&rows).as_bytes())
}

pub struct ControlArgs<'a> {
    pub stream: &'a Path,
    pub bundle: &'a Path,
    pub subject: Option<&'a Path>,
    pub config: Option<&'a Path>,
    pub mode: Option<ControlMode>,
    pub w: Option<f64>,
    pub delta: Option<f64>,
    pub j: Option<f64>,
    pub window: Option<f64>,
    pub method: Method,
    pub layers: bool,
    pub all: bool,
    pub out: Option<&'a Path>,
}

pub fn control(a: ControlArgs) -> Result<(), CliError> {
    let run: RunConfig = match a.config {
        Some(p) => config::load(p)?,
        None => RunConfig::default(),
    };
    let (bundle, pipeline) = load_pipeline(a.bundle, a.subject)?;
    let w = a
        .w
        .or(run.w)
        .ok_or_else(|| CliError::Usage("--w (or `w` in the run config) is required".into()))?;
    if !(w > 0.5 && w <= 3.0) {
        return Err(CliError::Usage(format!("w = {w} lies outside (0.5, 3] m")));
    }
    let table = if bundle.thresholds.is_empty() {
        default_threshold_table()
    } else {
        bundle
            .threshold_table()
            .map_err(|e| CliError::Format(format!("{}: {e}", a.bundle.display())))?
    };
    let delta = match a.delta.or(run.delta) {
        Some(d) => d,
        None => table
            .lookup(w)
            .ok_or_else(|| CliError::Usage(format!("no activation margin covers w = {w}")))?,
    };
    let mut cfg = ControlConfig::new(w, delta).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(m) = a.mode.or(run.mode()?) {
        cfg.mode = m;
    }
    if let Some(j) = a.j.or(run.j) {
        cfg.j = j;
    }
    if let Some(win) = a.window.or(run.filter_window) {
        cfg.filter_window = win;
    }
    if let Some(r) = run.sample_rate {
        cfg.sample_rate = r;
    }
    if let Some(s) = run.stimulus_distance {
        cfg.stimulus_distance = s;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let layers = run.layers()?;
    require_method(&pipeline, a.method, a.bundle)?;

    let stream = load_stream(a.stream)?;
    let mut inputs = Vec::with_capacity(stream.len());
    let mut skipped = 0usize;
    for s in stream.samples() {
        let est = pipeline
            .rays(&s.pair)
            .and_then(|r| pipeline.estimate(&s.pair, a.method).map(|e| (r, e)));
        match est {
            Ok((rays, e)) => inputs.push(ControlInput {
                t: s.pair.timestamp,
                depth: e.depth,
                gaze: rays.cyclopean(),
                eye_mid: rays.eye_center_mid,
            }),
            Err(_) => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!("skipped {skipped} of {} samples with no computable depth", stream.len());
    }
    let log = if a.layers {
        run_layers(&inputs, cfg.filter_window, &layers)
    } else {
        run_control(&inputs, &cfg)
    }
    .map_err(|e| CliError::Numerical(format!("control: {e}")))?;
    let opened = log.iter().filter(|e| e.event.kind == EventKind::Opened).count();
    let closed = log.iter().filter(|e| e.event.kind == EventKind::Closed).count();
    eprintln!("{} samples: {opened} opened, {closed} closed", log.len());
    write_out(a.out, format_events(&log, a.all).as_bytes())
}

pub fn warp(frame: &Path, rig: &Path, por: [f64; 3], gaze: [f64; 3], eye: [f64; 3], out: &Path) -> Result<(), CliError> {
    let rig: RigConfig = config::load(rig)?;
    let cam = rig.camera()?;
    let pose = rig.world_to_camera()?;
    let img = read_pnm(&read_bytes(frame)?).map_err(format_err(frame))?;
    let ray = Ray::new(Vec3::from(eye), Vec3::from(gaze))
        .map_err(|e| CliError::Usage(format!("--gaze: {e}")))?;
    let size = (rig.roi[0], rig.roi[1]);
    let out_size = (rig.output[0], rig.output[1]);
    if out_size.0 < 2 || out_size.1 < 2 {
        return Err(CliError::Usage("output must be at least 2 × 2 pixels".into()));
    }
    let st = see_through_frame(Vec3::from(por), &ray, size, &pose, &cam, &img, out_size).map_err(|e| match e {
        CaptureError::InvalidRoi | CaptureError::GimbalDegenerate => CliError::Usage(format!("roi: {e}")),
        other => CliError::Numerical(format!("see-through frame: {other}")),
    })?;
    if st.out_of_frame() {
        eprintln!("region of interest extends beyond the scene camera frame");
    }
    write_out(Some(out), &write_pnm(&st.image))
}

pub fn evaluate_estimates(path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let rows = parse_estimates(&read_text(path)?).map_err(format_err(path))?;
    let labelled: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.truth.map(|t| (r.depth, t))).collect();
    let pairs: Vec<(f64, f64)> = labelled
        .iter()
        .copied()
        .filter(|&(_, t)| t > DEPTH_BINS[0].0 && t <= DEPTH_BINS[DEPTH_BINS.len() - 1].1)
        .collect();
    if pairs.len() < labelled.len() {
        eprintln!(
            "ignored {} of {} rows with truth outside ({}, {}] m",
            labelled.len() - pairs.len(),
            labelled.len(),
            DEPTH_BINS[0].0,
            DEPTH_BINS[DEPTH_BINS.len() - 1].1
        );
    }
    if pairs.is_empty() {
        return Err(CliError::Usage(format!("{} has no estimates with ground truth", path.display())));
    }
    let table = evaluate_depth(&pairs).map_err(|e| CliError::Usage(e.to_string()))?;
    write_out(out, format_error_table(&table).as_bytes())
}

pub fn evaluate_session(events: &Path, script: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let records = parse_events(&read_text(events)?).map_err(format_err(events))?;
    let script = parse_script(&read_text(script)?).map_err(format_err(script))?;
    let log: Vec<(f64, EventKind)> = records
        .iter()
        .filter_map(|r| r.event())
        .filter(|(_, k)| *k != EventKind::NoChange)
        .collect();
    check_time_base(&log, &script).map_err(|e| CliError::Usage(e.to_string()))?;
    let m = replay_session(&log, &script).map_err(|e| CliError::Usage(e.to_string()))?;
    write_out(out, format_metrics(&m).as_bytes())
}
