mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vergekit::control::ControlMode;
use vergekit::depth::Method;

/// Exit code 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// Exit code 3; the string names the failing stage.
    Numerical(String),
    /// Exit code 4.
    Format(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Format(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Format(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "vergekit", version, about = "Gaze-depth estimation and vergence-controlled see-through toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Losi,
    Mipd,
    Pipd,
    Fused,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Losi => Method::LosI,
            MethodArg::Mipd => Method::Mipd,
            MethodArg::Pipd => Method::Pipd,
            MethodArg::Fused => Method::Fused,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sg,
    Sc,
}

impl From<ModeArg> for ControlMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sg => ControlMode::StimulusGuided,
            ModeArg::Sc => ControlMode::SelfControl,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a pupil stream (the calibration scene unless --script is given).
    Simulate {
        #[arg(long)]
        subject: Option<PathBuf>,
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Fixation sequence (TOML) instead of the calibration scene.
        #[arg(long, conflicts_with = "scene")]
        script: Option<PathBuf>,
        /// Optical-axis noise, degrees.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Overridden by VERGEKIT_SEED.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit kappa and the IPD regressions from a labelled stream.
    Calibrate {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        subject: Option<PathBuf>,
        /// Error table CSV (lo,hi,mean,std,n) for the activation margins.
        #[arg(long)]
        errors: Option<PathBuf>,
        /// RANSAC seed; overridden by VERGEKIT_SEED.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "out-bundle")]
        out_bundle: Option<PathBuf>,
    },
    /// Per-sample gaze depth.
    Estimate {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        subject: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "fused")]
        method: MethodArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the window state machine over a stream.
    Control {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        subject: Option<PathBuf>,
        /// Run options (TOML); flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// User–wall distance, meters.
        #[arg(long)]
        w: Option<f64>,
        /// Activation margin; looked up in the bundle's table when omitted.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        j: Option<f64>,
        #[arg(long)]
        window: Option<f64>,
        #[arg(long, value_enum, default_value = "fused")]
        method: MethodArg,
        /// Select display layers instead of opening a single window.
        #[arg(long)]
        layers: bool,
        /// Also log samples without a transition.
        #[arg(long)]
        all: bool,
        #[arg(long = "out-events")]
        out_events: Option<PathBuf>,
    },
    /// Produce the see-through frame for one point of regard.
    Warp {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        /// x,y,z in the head frame.
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        por: [f64; 3],
        /// Gaze direction x,y,z.
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        gaze: [f64; 3],
        /// Gaze origin; the head origin when omitted.
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        eye: Option<[f64; 3]>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error table from estimates, or session metrics from events + script.
    Evaluate {
        #[arg(long, conflicts_with_all = ["events", "script"])]
        estimates: Option<PathBuf>,
        #[arg(long, requires = "script")]
        events: Option<PathBuf>,
        #[arg(long, requires = "events")]
        script: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok([x, y, z]),
        _ => Err("expected three finite comma-separated numbers".into()),
    }
}

fn seed(flag: u64) -> Result<u64, CliError> {
    match std::env::var("VERGEKIT_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("VERGEKIT_SEED `{s}` is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Simulate {
            subject,
            scene,
            script,
            noise,
            seed: s,
            out,
        } => commands::simulate(subject.as_deref(), scene.as_deref(), script.as_deref(), noise, seed(s)?, out.as_deref()),
        Cmd::Calibrate {
            stream,
            subject,
            errors,
            seed: s,
            out_bundle,
        } => commands::calibrate(&stream, subject.as_deref(), errors.as_deref(), seed(s)?, out_bundle.as_deref()),
        Cmd::Estimate {
            stream,
            bundle,
            subject,
            method,
            out,
        } => commands::estimate(&stream, &bundle, subject.as_deref(), method.into(), out.as_deref()),
        Cmd::Control {
            stream,
            bundle,
            subject,
            config,
            mode,
            w,
            delta,
            j,
            window,
            method,
            layers,
            all,
            out_events,
        } => commands::control(commands::ControlArgs {
            stream: &stream,
            bundle: &bundle,
            subject: subject.as_deref(),
            config: config.as_deref(),
            mode: mode.map(Into::into),
            w,
            delta,
            j,
            window,
            method: method.into(),
            layers,
            all,
            out: out_events.as_deref(),
        }),
        Cmd::Warp {
            frame,
            rig,
            por,
            gaze,
            eye,
            out,
        } => commands::warp(&frame, &rig, por, gaze, eye.unwrap_or([0.0; 3]), &out),
        Cmd::Evaluate {
            estimates,
            events,
            script,
            out,
        } => match (estimates, events, script) {
            (Some(e), None, None) => commands::evaluate_estimates(&e, out.as_deref()),
            (None, Some(ev), Some(sc)) => commands::evaluate_session(&ev, &sc, out.as_deref()),
            _ => Err(CliError::Usage("give either --estimates or --events with --script".into())),
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vergekit: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
