//! Binocular gaze-depth estimation, vergence-driven display control and
//! see-through scene capture for head-mounted displays.

pub mod calibration;
pub mod depth;
pub mod geometry;
pub mod lm;
pub mod simulation;
pub mod control;
pub mod capture;
pub mod eval;
pub mod io;
