//! Vergence-triggered see-through window: mean filter, open/close rule,
//! window placement, the gaze-attached stimulus and the multi-layer variant.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::geometry::{Ray, Vec3};

/// Tolerance absorbing float drift when comparing timestamps to the window edge.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("timestamp {t} does not follow {last}")]
    NonMonotonicTimestamp { t: f64, last: f64 },
    #[error("invalid control configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("stimulus is only shown in stimulus-guided mode")]
    WrongMode,
    #[error("non-finite filtered depth")]
    NonFinite,
    #[error("invalid layer table: {0}")]
    InvalidLayers(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlMode {
    /// A cube rides the gaze ray at a fixed distance to help the user diverge.
    #[default]
    StimulusGuided,
    /// No stimulus; the user diverges unaided.
    SelfControl,
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlMode::StimulusGuided => "sg",
            ControlMode::SelfControl => "sc",
        })
    }
}

impl std::str::FromStr for ControlMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sg" | "stimulus-guided" | "stimulusguided" => Ok(ControlMode::StimulusGuided),
            "sc" | "self-control" | "selfcontrol" => Ok(ControlMode::SelfControl),
            other => Err(format!("unknown control mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConfig {
    /// User–wall distance, meters.
    pub w: f64,
    /// Activation margin δ at `w`, meters.
    pub delta: f64,
    /// Scale factor placing the open window at `w + j·δ`.
    pub j: f64,
    /// Mean-filter window, seconds.
    pub filter_window: f64,
    pub sample_rate: f64,
    pub mode: ControlMode,
    pub stimulus_distance: f64,
    pub stimulus_edge: f64,
    pub stimulus_alpha: f64,
}

impl ControlConfig {
    /// Defaults for everything except the wall distance and its δ.
    pub fn new(w: f64, delta: f64) -> Result<Self, ControlError> {
        let cfg = Self {
            w,
            delta,
            j: 2.0,
            filter_window: 1.0,
            sample_rate: 30.0,
            mode: ControlMode::StimulusGuided,
            stimulus_distance: 6.0,
            stimulus_edge: 0.10,
            stimulus_alpha: 0.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.w > 0.5 && self.w <= 3.0) {
            return Err(ControlError::InvalidConfig("w must lie in (0.5, 3] m"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(ControlError::InvalidConfig("delta must be positive"));
        }
        if !(self.j > 1.0 && self.j.is_finite()) {
            return Err(ControlError::InvalidConfig("j must exceed 1"));
        }
        if !(self.filter_window > 0.0 && self.filter_window.is_finite()) {
            return Err(ControlError::InvalidConfig("filter window must be positive"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(ControlError::InvalidConfig("sample rate must be positive"));
        }
        if !(self.stimulus_distance > 0.0 && self.stimulus_edge > 0.0) {
            return Err(ControlError::InvalidConfig("stimulus size and distance must be positive"));
        }
        if !(0.0..=1.0).contains(&self.stimulus_alpha) {
            return Err(ControlError::InvalidConfig("stimulus alpha must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Filtered depth above which the window opens.
    pub fn open_threshold(&self) -> f64 {
        self.w + self.delta
    }

    /// Depth at which an open window is presented.
    pub fn open_depth(&self) -> f64 {
        self.w + self.j * self.delta
    }
}

/// Window depth γ; `Closed` stands in for the −∞ of the closed state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WindowDepth {
    #[default]
    Closed,
    Open(f64),
}

impl WindowDepth {
    pub fn value(&self) -> Option<f64> {
        match self {
            WindowDepth::Closed => None,
            WindowDepth::Open(g) => Some(*g),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ControlState {
    buffer: VecDeque<(f64, f64)>,
    pub gamma: WindowDepth,
    pub window_pose: Option<Vec3>,
    pub layer: Option<usize>,
}

impl ControlState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_open(&self) -> bool {
        matches!(self.gamma, WindowDepth::Open(_))
    }

    pub fn buffer(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.buffer.iter()
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }
}

/// Mean filter Φ over the last `window` seconds, the new sample included.
pub fn filter_push(state: &mut ControlState, window: f64, t: f64, depth: f64) -> Result<f64, ControlError> {
    if let Some(&(last, _)) = state.buffer.back() {
        if !(t > last) {
            return Err(ControlError::NonMonotonicTimestamp { t, last });
        }
    }
    if !depth.is_finite() {
        return Err(ControlError::NonFinite);
    }
    while let Some(&(ts, _)) = state.buffer.front() {
        if ts < t - window - TIME_EPS {
            state.buffer.pop_front();
        } else {
            break;
        }
    }
    state.buffer.push_back((t, depth));
    // summed afresh each time so long runs do not accumulate drift
    let sum: f64 = state.buffer.iter().map(|&(_, d)| d).sum();
    Ok(sum / state.buffer.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    NoChange,
    Opened,
    Closed,
    LayerChanged,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::NoChange => "no_change",
            EventKind::Opened => "opened",
            EventKind::Closed => "closed",
            EventKind::LayerChanged => "layer_changed",
        }
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no_change" => Ok(EventKind::NoChange),
            "opened" => Ok(EventKind::Opened),
            "closed" => Ok(EventKind::Closed),
            "layer_changed" => Ok(EventKind::LayerChanged),
            other => Err(format!("unknown event `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlEvent {
    pub kind: EventKind,
    pub gamma: WindowDepth,
    pub window_pose: Option<Vec3>,
    pub layer: Option<usize>,
}

/// Applies the open rule `Φ > w + δ` and places the window along the gaze.
pub fn control_step(
    state: &mut ControlState,
    cfg: &ControlConfig,
    gaze: &Ray,
    eye_mid: Vec3,
    phi: f64,
) -> ControlEvent {
    let was_open = state.is_open();
    if phi > cfg.open_threshold() {
        let gamma = cfg.open_depth();
        let pose = eye_mid + gamma * gaze.direction();
        state.gamma = WindowDepth::Open(gamma);
        state.window_pose = Some(pose);
        ControlEvent {
            kind: if was_open { EventKind::NoChange } else { EventKind::Opened },
            gamma: state.gamma,
            window_pose: Some(pose),
            layer: None,
        }
    } else {
        state.gamma = WindowDepth::Closed;
        state.window_pose = None;
        ControlEvent {
            kind: if was_open { EventKind::Closed } else { EventKind::NoChange },
            gamma: WindowDepth::Closed,
            window_pose: None,
            layer: None,
        }
    }
}

/// Renderer-facing description of the guide cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stimulus {
    pub position: Vec3,
    pub edge: f64,
    pub alpha: f64,
}

pub fn stimulus_pose(gaze: &Ray, eye_mid: Vec3, cfg: &ControlConfig) -> Result<Stimulus, ControlError> {
    if cfg.mode != ControlMode::StimulusGuided {
        return Err(ControlError::WrongMode);
    }
    Ok(Stimulus {
        position: eye_mid + cfg.stimulus_distance * gaze.direction(),
        edge: cfg.stimulus_edge,
        alpha: cfg.stimulus_alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub lo: f64,
    /// Upper bound; `f64::INFINITY` for the last layer.
    pub hi: f64,
    pub display_depth: f64,
}

/// Display layers partitioning `(0, +∞)` into `(lo, hi]` ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTable {
    layers: Vec<Layer>,
}

impl Default for LayerTable {
    fn default() -> Self {
        Self::new(vec![
            Layer { lo: 0.0, hi: 0.6, display_depth: 0.3 },
            Layer { lo: 0.6, hi: 1.4, display_depth: 1.0 },
            Layer { lo: 1.4, hi: 3.0, display_depth: 2.2 },
            Layer { lo: 3.0, hi: f64::INFINITY, display_depth: 4.5 },
        ])
        .expect("built-in layers are valid")
    }
}

impl LayerTable {
    pub fn new(layers: Vec<Layer>) -> Result<Self, ControlError> {
        let first = layers.first().ok_or(ControlError::InvalidLayers("empty"))?;
        if first.lo != 0.0 {
            return Err(ControlError::InvalidLayers("first layer must start at 0"));
        }
        if layers.last().map(|l| l.hi) != Some(f64::INFINITY) {
            return Err(ControlError::InvalidLayers("last layer must be unbounded"));
        }
        for (i, l) in layers.iter().enumerate() {
            if !(l.lo < l.hi) || (i > 0 && layers[i - 1].hi != l.lo) {
                return Err(ControlError::InvalidLayers("ranges must be contiguous and increasing"));
            }
            if !(l.display_depth > l.lo && l.display_depth <= l.hi) {
                return Err(ControlError::InvalidLayers("display depth outside its range"));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }
}

/// Index of the layer whose `(lo, hi]` contains `phi`; non-positive depths map
/// to the nearest layer.
pub fn layer_select(phi: f64, table: &LayerTable) -> usize {
    table
        .layers
        .iter()
        .position(|l| phi <= l.hi)
        .unwrap_or(table.layers.len() - 1)
}

/// One sample fed to the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub t: f64,
    pub depth: f64,
    pub gaze: Ray,
    pub eye_mid: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedEvent {
    pub t: f64,
    pub phi: f64,
    pub event: ControlEvent,
    /// Present in stimulus-guided mode while the window is closed.
    pub stimulus: Option<Stimulus>,
}

/// Runs the filter and open/close rule over a whole stream, one record per
/// input sample.
pub fn run_control(inputs: &[ControlInput], cfg: &ControlConfig) -> Result<Vec<TimedEvent>, ControlError> {
    cfg.validate()?;
    let mut state = ControlState::new();
    let mut out = Vec::with_capacity(inputs.len());
    for inp in inputs {
        let phi = filter_push(&mut state, cfg.filter_window, inp.t, inp.depth)?;
        let event = control_step(&mut state, cfg, &inp.gaze, inp.eye_mid, phi);
        let stimulus = if cfg.mode == ControlMode::StimulusGuided && !state.is_open() {
            Some(stimulus_pose(&inp.gaze, inp.eye_mid, cfg)?)
        } else {
            None
        };
        out.push(TimedEvent {
            t: inp.t,
            phi,
            event,
            stimulus,
        });
    }
    Ok(out)
}

/// Multi-layer variant: the display snaps to the layer containing Φ.
pub fn run_layers(
    inputs: &[ControlInput],
    filter_window: f64,
    table: &LayerTable,
) -> Result<Vec<TimedEvent>, ControlError> {
    let mut state = ControlState::new();
    let mut out = Vec::with_capacity(inputs.len());
    for inp in inputs {
        let phi = filter_push(&mut state, filter_window, inp.t, inp.depth)?;
        let idx = layer_select(phi, table);
        let kind = if state.layer == Some(idx) {
            EventKind::NoChange
        } else {
            EventKind::LayerChanged
        };
        state.layer = Some(idx);
        let depth = table.layers[idx].display_depth;
        out.push(TimedEvent {
            t: inp.t,
            phi,
            event: ControlEvent {
                kind,
                gamma: WindowDepth::Open(depth),
                window_pose: Some(inp.eye_mid + depth * inp.gaze.direction()),
                layer: Some(idx),
            },
            stimulus: None,
        });
    }
    Ok(out)
}

/// Records whose event is a state change.
pub fn transitions(log: &[TimedEvent]) -> impl Iterator<Item = &TimedEvent> {
    log.iter().filter(|e| e.event.kind != EventKind::NoChange)
}
