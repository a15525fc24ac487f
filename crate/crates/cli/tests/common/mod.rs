#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn vergekit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vergekit"))
        .args(args)
        .current_dir(dir)
        .env_remove("VERGEKIT_SEED")
        .output()
        .expect("binary runs")
}

/// Runs and requires exit code 0.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = vergekit(dir, args);
    assert!(
        out.status.success(),
        "vergekit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

pub fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

/// Fixation at 1.0 m, a step to 1.6 m at t = 3 s, back to 1.0 m at t = 6 s.
pub const STEP_SCRIPT: &str = "\
[[fixation]]
duration = 3.0
target = [0.1, 0.0, 1.0]

[[fixation]]
duration = 3.0
target = [0.16, 0.0, 1.6]

[[fixation]]
duration = 3.0
target = [0.1, 0.0, 1.0]
";

/// Scene camera sharing the head origin and looking along +z.
pub const RIG: &str = "\
output = [81, 61]
roi = [0.4, 0.3]

[camera]
fx = 400.0
fy = 400.0
cx = 200.0
cy = 150.0
width = 400
height = 300
";

/// Smooth binary PPM, 400 × 300.
pub fn smooth_ppm() -> Vec<u8> {
    let (w, h) = (400usize, 300usize);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            let fx = x as f64 / w as f64;
            let fy = y as f64 / h as f64;
            out.push((127.5 + 100.0 * (6.0 * fx).sin() * (5.0 * fy).sin()).round() as u8);
            out.push((40.0 + 180.0 * fx).round() as u8);
            out.push((40.0 + 180.0 * fy).round() as u8);
        }
    }
    out
}

/// Calibration stream + bundle from the default subject, noiseless.
pub fn calibrated(dir: &Path) {
    ok(dir, &["simulate", "--out", "calib.txt"]);
    ok(dir, &["calibrate", "--stream", "calib.txt", "--out-bundle", "bundle.txt"]);
}
