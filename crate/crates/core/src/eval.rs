//! Depth-error tables per distance bin and session metrics replayed from
//! control event logs.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::control::EventKind;
use crate::depth::{DepthPipeline, Method};
use crate::geometry::Vec3;
use crate::simulation::{simulate_fixation, SubjectModel};

/// Distance bins `(lo, hi]`, meters.
pub const DEPTH_BINS: [(f64, f64); 6] = [(0.5, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, 4.0), (4.0, 5.0), (5.0, 6.0)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("truth depth {0} lies outside (0.5, 6] m")]
    OutOfRangeTruth(f64),
    #[error("no estimates to evaluate")]
    Empty,
    #[error("event log is not time-ordered at record {0}")]
    MisorderedLog(usize),
    #[error("script issue times must be strictly increasing")]
    InvalidScript,
    #[error("event log and script do not share a time base")]
    TimeBaseMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBin {
    pub lo: f64,
    pub hi: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

/// Mean ± SD of absolute depth error per occupied bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub bins: Vec<ErrorBin>,
}

impl ErrorTable {
    pub fn bin(&self, lo: f64, hi: f64) -> Option<&ErrorBin> {
        self.bins.iter().find(|b| b.lo == lo && b.hi == hi)
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.n).sum()
    }
}

fn bin_index(truth: f64) -> Option<usize> {
    DEPTH_BINS.iter().position(|&(lo, hi)| truth > lo && truth <= hi)
}

/// Bins `(estimate, truth)` pairs by truth.
pub fn evaluate_depth(pairs: &[(f64, f64)]) -> Result<ErrorTable, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); DEPTH_BINS.len()];
    for &(est, truth) in pairs {
        let i = bin_index(truth).ok_or(EvalError::OutOfRangeTruth(truth))?;
        errors[i].push((est - truth).abs());
    }
    let bins = DEPTH_BINS
        .iter()
        .zip(&errors)
        .filter(|(_, e)| !e.is_empty())
        .map(|(&(lo, hi), e)| {
            let n = e.len() as f64;
            let mean = e.iter().sum::<f64>() / n;
            let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            ErrorBin {
                lo,
                hi,
                mean,
                std: var.sqrt(),
                n: e.len(),
            }
        })
        .collect();
    Ok(ErrorTable { bins })
}

/// Result of a simulated accuracy run.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRun {
    pub table: ErrorTable,
    /// Samples the estimator could not handle (e.g. diverging rays), per bin.
    pub failures: [usize; 6],
}

/// Simulates `per_bin` noisy fixations with uniform depth inside each bin and
/// uniform horizontal angle in `±max_angle`, and tabulates the estimator's
/// error. Failed estimates are counted, not tabulated.
pub fn simulate_error_table<R: Rng + ?Sized>(
    pipeline: &DepthPipeline,
    subject: &SubjectModel,
    method: Method,
    noise_sigma: f64,
    per_bin: usize,
    max_angle: f64,
    rng: &mut R,
) -> MonteCarloRun {
    let mid = subject.eye_mid();
    let mut pairs = Vec::with_capacity(per_bin * DEPTH_BINS.len());
    let mut failures = [0usize; 6];
    for (b, &(lo, hi)) in DEPTH_BINS.iter().enumerate() {
        for _ in 0..per_bin {
            // (lo, hi]: draw from [lo, hi) and reflect
            let d = hi - rng.random_range(0.0..(hi - lo));
            let a = if max_angle > 0.0 {
                rng.random_range(-max_angle..max_angle)
            } else {
                0.0
            };
            let fix = mid + d * Vec3::new(a.sin(), 0.0, a.cos());
            let est = simulate_fixation(subject, 0.0, &fix, noise_sigma, rng)
                .ok()
                .and_then(|p| pipeline.estimate(&p, method).ok());
            match est {
                Some(e) if e.depth.is_finite() => pairs.push((e.depth, d)),
                _ => failures[b] += 1,
            }
        }
    }
    let table = evaluate_depth(&pairs).unwrap_or(ErrorTable { bins: Vec::new() });
    MonteCarloRun { table, failures }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SeeThroughWall,
    SeeWall,
}

impl Command {
    /// Transition that carries the command out.
    pub fn expected(&self) -> EventKind {
        match self {
            Command::SeeThroughWall => EventKind::Opened,
            Command::SeeWall => EventKind::Closed,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::SeeThroughWall => "see_through_wall",
            Command::SeeWall => "see_wall",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "see_through_wall" => Ok(Command::SeeThroughWall),
            "see_wall" => Ok(Command::SeeWall),
            other => Err(format!("unknown command `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionScript {
    pub commands: Vec<(f64, Command)>,
    pub timeout: f64,
    pub waiting_duration: f64,
}

impl SessionScript {
    pub fn new(commands: Vec<(f64, Command)>) -> Result<Self, EvalError> {
        let s = Self {
            commands,
            timeout: 10.0,
            waiting_duration: 5.0,
        };
        s.validate()?;
        Ok(s)
    }

    /// `repetitions` rounds of see-through then see-wall, one command every
    /// `interval` seconds from `start`.
    pub fn alternating(start: f64, interval: f64, repetitions: usize) -> Result<Self, EvalError> {
        let commands = (0..2 * repetitions)
            .map(|k| {
                let c = if k % 2 == 0 { Command::SeeThroughWall } else { Command::SeeWall };
                (start + k as f64 * interval, c)
            })
            .collect();
        Self::new(commands)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.commands.windows(2).any(|w| !(w[1].0 > w[0].0))
            || self.commands.iter().any(|c| !c.0.is_finite())
            || !(self.timeout > 0.0)
            || !(self.waiting_duration >= 0.0)
        {
            return Err(EvalError::InvalidScript);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandOutcome {
    pub issue_time: f64,
    pub command: Command,
    /// Seconds from issue to the correct transition, when within the timeout.
    pub completion: Option<f64>,
    pub mistakes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionMetrics {
    pub completion_times: Vec<f64>,
    pub successes: usize,
    pub mistakes: usize,
    pub outcomes: Vec<CommandOutcome>,
}

/// Scores a control run against the command script.
///
/// A command's window runs from its issue time to the next command's issue
/// time. The first matching transition in it counts as a success when it
/// comes within `timeout`. A success starts a waiting state of
/// `waiting_duration` (also cut at the next issue time) in which every
/// open/close transition is a mistake.
pub fn replay_session(events: &[(f64, EventKind)], script: &SessionScript) -> Result<SessionMetrics, EvalError> {
    script.validate()?;
    if let Some(i) = events.windows(2).position(|w| w[1].0 < w[0].0) {
        return Err(EvalError::MisorderedLog(i + 1));
    }
    let transitions: Vec<(f64, EventKind)> = events
        .iter()
        .copied()
        .filter(|(_, k)| matches!(k, EventKind::Opened | EventKind::Closed))
        .collect();

    let mut outcomes = Vec::with_capacity(script.commands.len());
    for (i, &(issue, command)) in script.commands.iter().enumerate() {
        let end = script.commands.get(i + 1).map_or(f64::INFINITY, |c| c.0);
        let hit = transitions
            .iter()
            .find(|(t, k)| *t >= issue && *t < end && *k == command.expected());
        let mut outcome = CommandOutcome {
            issue_time: issue,
            command,
            completion: None,
            mistakes: 0,
        };
        if let Some(&(t, _)) = hit {
            let elapsed = t - issue;
            if elapsed <= script.timeout {
                outcome.completion = Some(elapsed);
                let wait_end = (t + script.waiting_duration).min(end);
                outcome.mistakes = transitions
                    .iter()
                    .filter(|(te, _)| *te > t && *te <= wait_end)
                    .count();
            }
        }
        outcomes.push(outcome);
    }
    Ok(SessionMetrics {
        completion_times: outcomes.iter().filter_map(|o| o.completion).collect(),
        successes: outcomes.iter().filter(|o| o.completion.is_some()).count(),
        mistakes: outcomes.iter().map(|o| o.mistakes).sum(),
        outcomes,
    })
}

/// Rejects logs that cannot belong to the script: events present but none
/// inside the span the script can score.
pub fn check_time_base(events: &[(f64, EventKind)], script: &SessionScript) -> Result<(), EvalError> {
    let (Some(first), Some(last)) = (script.commands.first(), script.commands.last()) else {
        return Ok(());
    };
    let span_end = last.0 + script.timeout + script.waiting_duration;
    let relevant = events
        .iter()
        .filter(|(_, k)| matches!(k, EventKind::Opened | EventKind::Closed));
    let mut any = false;
    for (t, _) in relevant {
        any = true;
        if *t >= first.0 && *t <= span_end {
            return Ok(());
        }
    }
    if any {
        Err(EvalError::TimeBaseMismatch)
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::KappaModel;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn upper_edge_goes_to_lower_bin() {
        let t = evaluate_depth(&[(0.9, 1.0), (1.1, 1.0)]).unwrap();
        assert_eq!(t.bins.len(), 1);
        let b = t.bins[0];
        assert_eq!((b.lo, b.hi, b.n), (0.5, 1.0, 2));
        assert!((b.mean - 0.1).abs() < 1e-12);
        assert!(b.std < 1e-12);
    }

    #[test]
    fn perfect_estimates_have_zero_error() {
        let pairs: Vec<_> = (1..=55).map(|i| (0.5 + i as f64 * 0.1, 0.5 + i as f64 * 0.1)).collect();
        let t = evaluate_depth(&pairs).unwrap();
        assert_eq!(t.bins.len(), 6);
        assert!(t.bins.iter().all(|b| b.mean == 0.0 && b.std == 0.0));
    }

    #[test]
    fn out_of_range_and_empty() {
        assert_eq!(evaluate_depth(&[(1.0, 0.5)]), Err(EvalError::OutOfRangeTruth(0.5)));
        assert_eq!(evaluate_depth(&[(1.0, 6.5)]), Err(EvalError::OutOfRangeTruth(6.5)));
        assert_eq!(evaluate_depth(&[]), Err(EvalError::Empty));
    }

    #[test]
    fn population_std() {
        let t = evaluate_depth(&[(2.0, 2.5), (3.0, 2.5)]).unwrap();
        assert!((t.bins[0].std - 0.0).abs() < 1e-12);
        let t = evaluate_depth(&[(2.5, 2.5), (3.5, 2.5)]).unwrap();
        assert!((t.bins[0].mean - 0.5).abs() < 1e-12);
        assert!((t.bins[0].std - 0.5).abs() < 1e-12);
    }

    #[test]
    fn noisy_intersection_is_worse_far_than_near() {
        let s = SubjectModel::default();
        let pipe = DepthPipeline::new(s.clone(), KappaModel::new(s.kappa_left, s.kappa_right).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let run = simulate_error_table(&pipe, &s, Method::LosI, 0.5f64.to_radians(), 300, 0.0, &mut rng);
        let near = run.table.bin(0.5, 1.0).unwrap().mean;
        let far = run.table.bin(5.0, 6.0).unwrap().mean;
        assert!(far > near);
    }

    fn script() -> SessionScript {
        SessionScript::new(vec![(0.0, Command::SeeThroughWall), (20.0, Command::SeeWall)]).unwrap()
    }

    #[test]
    fn completion_time_is_measured_from_issue() {
        let m = replay_session(&[(1.2, EventKind::Opened)], &script()).unwrap();
        assert_eq!(m.successes, 1);
        assert!((m.completion_times[0] - 1.2).abs() < 1e-12);
        assert_eq!(m.mistakes, 0);
    }

    #[test]
    fn late_transition_is_neither_success_nor_mistake() {
        let m = replay_session(&[(10.5, EventKind::Opened)], &script()).unwrap();
        assert_eq!(m.successes, 0);
        assert!(m.completion_times.is_empty());
        assert_eq!(m.mistakes, 0);
    }

    #[test]
    fn transition_in_waiting_state_is_a_mistake() {
        let events = [(1.0, EventKind::Opened), (3.0, EventKind::Closed), (3.5, EventKind::Opened)];
        let m = replay_session(&events, &script()).unwrap();
        assert_eq!(m.successes, 1);
        assert_eq!(m.mistakes, 2);
        // after the waiting state the same transition is not penalized
        let m = replay_session(&[(1.0, EventKind::Opened), (6.5, EventKind::Closed)], &script()).unwrap();
        assert_eq!(m.mistakes, 0);
    }

    #[test]
    fn misordered_log() {
        let events = [(2.0, EventKind::Opened), (1.0, EventKind::Closed)];
        assert_eq!(replay_session(&events, &script()), Err(EvalError::MisorderedLog(1)));
    }

    #[test]
    fn alternating_script() {
        let s = SessionScript::alternating(5.0, 20.0, 5).unwrap();
        assert_eq!(s.commands.len(), 10);
        assert_eq!(s.commands[1], (25.0, Command::SeeWall));
        assert!(SessionScript::new(vec![(1.0, Command::SeeWall), (1.0, Command::SeeWall)]).is_err());
    }

    #[test]
    fn time_base_check() {
        let s = script();
        assert!(check_time_base(&[(1.0, EventKind::Opened)], &s).is_ok());
        assert_eq!(
            check_time_base(&[(1000.0, EventKind::Opened)], &s),
            Err(EvalError::TimeBaseMismatch)
        );
        assert!(check_time_base(&[], &s).is_ok());
    }

    proptest! {
        #[test]
        fn bins_are_permutation_invariant(mut pairs in proptest::collection::vec((0.0..8.0f64, 0.51..6.0f64), 1..60), seed in 0u64..1000) {
            let a = evaluate_depth(&pairs).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::seq::SliceRandom;
            pairs.shuffle(&mut rng);
            let b = evaluate_depth(&pairs).unwrap();
            prop_assert_eq!(a.total(), pairs.len());
            for (x, y) in a.bins.iter().zip(&b.bins) {
                prop_assert!((x.mean - y.mean).abs() < 1e-12);
                prop_assert_eq!(x.n, y.n);
            }
        }

        #[test]
        fn spurious_waiting_transition_never_reduces_mistakes(
            open_at in 0.0..9.0f64, extra in 0.01..5.0f64, closes in proptest::collection::vec(0.0..40.0f64, 0..6)
        ) {
            let s = script();
            let mut events: Vec<(f64, EventKind)> = vec![(open_at, EventKind::Opened)];
            events.extend(closes.iter().map(|&t| (t, EventKind::Closed)));
            events.sort_by(|a, b| a.0.total_cmp(&b.0));
            let base = replay_session(&events, &s).unwrap();
            let mut more = events.clone();
            more.push((open_at + extra, EventKind::Closed));
            more.sort_by(|a, b| a.0.total_cmp(&b.0));
            let after = replay_session(&more, &s).unwrap();
            prop_assert!(after.mistakes >= base.mistakes);
            prop_assert_eq!(replay_session(&events, &s).unwrap(), base);
        }
    }
}
