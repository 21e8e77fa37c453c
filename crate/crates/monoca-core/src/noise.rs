//! Reproducible Monte Carlo simulation of ε-perturbations: noisy
//! trajectories, density curves, island survival, and ergodicity probes.
//!
//! All randomness comes from a counter-based pure function of
//! `(seed, trial, t, i)`, so every trajectory is bit-reproducible across
//! platforms and thread counts; trials are embarrassingly parallel and are
//! always aggregated in trial order.

use crate::rule::{Configuration, LocalRule, RuleError, State};
use crate::step::{rate, RateParams};
use rayon::prelude::*;
use std::fmt;
use thiserror::Error;

/// Seed salt of the second PRF draw used by [`NoiseModel::Custom`] to pick a
/// replacement state, keeping it independent of the error-site draw.
pub const CUSTOM_DRAW_SALT: u64 = 0xD6E8_FEB8_6659_FD93;

/// Multiplier folding the time index into the PRF counter.
const TIME_MIX: u64 = 2_654_435_769;

/// Normal quantile for two-sided 95% confidence intervals.
const WILSON_Z: f64 = 1.96;

/// The splitmix64 finalizer: a 64-bit bijective mixer.
pub fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// Counter-based PRF behind all noise decisions: a pure function of the
/// seed, the trial index, the transition index `t` (source row), and the
/// column `i`.
pub fn prf(seed: u64, trial: u64, t: u64, i: u64) -> u64 {
    mix(seed ^ mix(trial) ^ mix(t.wrapping_mul(TIME_MIX).wrapping_add(i)))
}

/// Error-site threshold `⌊ε·2^64⌋` (computed in double precision), compared
/// against the PRF output as an unsigned integer.
fn error_threshold(epsilon: f64) -> u128 {
    if epsilon <= 0.0 {
        0
    } else if epsilon >= 1.0 {
        1u128 << 64
    } else {
        (epsilon * 18_446_744_073_709_551_616.0) as u128
    }
}

/// Errors of the noise module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    /// The error probability must be a probability.
    #[error("epsilon must be a probability in [0,1], got {0}")]
    BadEpsilon(f64),
    /// The noise target state must belong to the alphabet.
    #[error("noise target state {0} is outside the alphabet (max state {1})")]
    BadState(State, State),
    /// Custom distribution weights were rejected.
    #[error("custom weights invalid: {0}")]
    BadWeights(String),
    /// The window must hold at least one full neighborhood.
    #[error("width {width} cannot hold the rule neighborhood (need at least {min})")]
    BadWidth {
        /// Requested window width.
        width: usize,
        /// Minimal admissible width `2r+1`.
        min: usize,
    },
    /// Horizon and trial counts must be positive.
    #[error("horizon and trials must both be at least 1")]
    BadCounts,
    /// The initial configuration's explicit cells spill out of the window.
    #[error("initial configuration cells [{lo},{hi}] do not fit the {width}-cell window")]
    WidthMismatch {
        /// Leftmost explicit cell.
        lo: i64,
        /// Rightmost explicit cell.
        hi: i64,
        /// Window width.
        width: usize,
    },
    /// The initial configuration's background disagrees with the fixed
    /// boundary state.
    #[error("initial boundary states ({left},{right}) conflict with the fixed boundary state {expected}")]
    BoundaryMismatch {
        /// Left background state of the initial configuration.
        left: State,
        /// Right background state of the initial configuration.
        right: State,
        /// The fixed boundary state.
        expected: State,
    },
    /// Trajectory dumps encode states as base-36 digits.
    #[error("trajectory dump supports at most 36 states, rule has {0}")]
    DumpStates(usize),
    /// A trajectory dump failed to parse.
    #[error("trajectory parse error at line {line}: {message}")]
    Parse {
        /// 1-based line number.
        line: usize,
        /// What went wrong.
        message: String,
    },
    /// Island tracking needs exact edge rates for the background/island pair.
    #[error("island tracking needs exact rates for the pair ({0},{1})")]
    RateUnavailable(State, State),
    /// Underlying rule error.
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// Perturbation law applied at error sites.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    /// Error cells become `max(state, noiseless image)`.
    IndependentMax {
        /// The raising state.
        state: State,
        /// Per-cell error probability.
        epsilon: f64,
    },
    /// Error cells are overwritten with `state`.
    IndependentSet {
        /// The replacement state.
        state: State,
        /// Per-cell error probability.
        epsilon: f64,
    },
    /// Error cells are overwritten with a state drawn from a fixed
    /// distribution (an independent second PRF draw).
    Custom {
        /// Unnormalized weights, one per state.
        weights: Vec<f64>,
        /// Per-cell error probability.
        epsilon: f64,
    },
}

impl NoiseModel {
    /// `max(state, ·)` noise with probability `epsilon`.
    pub fn independent_max(state: State, epsilon: f64) -> Self {
        NoiseModel::IndependentMax { state, epsilon }
    }

    /// Overwrite-with-`state` noise with probability `epsilon`.
    pub fn independent_set(state: State, epsilon: f64) -> Self {
        NoiseModel::IndependentSet { state, epsilon }
    }

    /// Overwrite-with-a-draw noise with probability `epsilon`.
    pub fn custom(weights: Vec<f64>, epsilon: f64) -> Self {
        NoiseModel::Custom { weights, epsilon }
    }

    /// The per-cell error probability.
    pub fn epsilon(&self) -> f64 {
        match self {
            NoiseModel::IndependentMax { epsilon, .. }
            | NoiseModel::IndependentSet { epsilon, .. }
            | NoiseModel::Custom { epsilon, .. } => *epsilon,
        }
    }

    /// Checks the model against a rule's alphabet.
    pub fn validate(&self, rule: &LocalRule) -> Result<(), NoiseError> {
        let eps = self.epsilon();
        if !(0.0..=1.0).contains(&eps) {
            return Err(NoiseError::BadEpsilon(eps));
        }
        match self {
            NoiseModel::IndependentMax { state, .. } | NoiseModel::IndependentSet { state, .. } => {
                if *state > rule.max_state() {
                    return Err(NoiseError::BadState(*state, rule.max_state()));
                }
            }
            NoiseModel::Custom { weights, .. } => {
                if weights.len() != rule.state_count() {
                    return Err(NoiseError::BadWeights(format!(
                        "expected {} weights, got {}",
                        rule.state_count(),
                        weights.len()
                    )));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(NoiseError::BadWeights(
                        "weights must be finite and non-negative".into(),
                    ));
                }
                if weights.iter().sum::<f64>() <= 0.0 {
                    return Err(NoiseError::BadWeights(
                        "weights must not all be zero".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// How neighborhoods read past the window edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// The window wraps around (a circle of `width` cells).
    Periodic,
    /// Cells beyond the window hold a fixed quiescent state.
    FixedQuiescent(State),
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => write!(f, "periodic"),
            Boundary::FixedQuiescent(s) => write!(f, "fixed {s}"),
        }
    }
}

/// Shared simulation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    /// Window width in cells.
    pub width: usize,
    /// Boundary handling.
    pub boundary: Boundary,
    /// Number of transitions to simulate.
    pub horizon: usize,
    /// PRF seed shared by all trials.
    pub seed: u64,
    /// Number of independent trials for ensemble experiments.
    pub trials: usize,
}

impl SimConfig {
    /// Index of the origin cell (coordinate 0) inside the window.
    pub fn origin(&self) -> usize {
        self.width / 2
    }

    fn validate(&self, rule: &LocalRule) -> Result<(), NoiseError> {
        let min = 2 * rule.radius() + 1;
        if self.width < min {
            return Err(NoiseError::BadWidth {
                width: self.width,
                min,
            });
        }
        if self.horizon < 1 || self.trials < 1 {
            return Err(NoiseError::BadCounts);
        }
        if let Boundary::FixedQuiescent(s) = self.boundary {
            if s > rule.max_state() {
                return Err(NoiseError::BadState(s, rule.max_state()));
            }
            if !rule.is_quiescent(s) {
                return Err(NoiseError::Rule(RuleError::NotQuiescent(s)));
            }
        }
        Ok(())
    }
}

/// One simulated space-time grid together with its realized error set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoisyTrajectory {
    /// Alphabet size of the generating rule.
    pub state_count: usize,
    /// Window width.
    pub width: usize,
    /// Number of transitions.
    pub horizon: usize,
    /// PRF seed.
    pub seed: u64,
    /// Trial index.
    pub trial: u64,
    /// Boundary handling used by the run.
    pub boundary: Boundary,
    /// `horizon + 1` rows of `width` states; row 0 is the initial window.
    pub rows: Vec<Vec<State>>,
    /// `horizon` rows of realized-error flags: `errors[t][i]` is set iff
    /// `rows[t+1][i]` differs from the noiseless image of row `t` at `i`.
    pub errors: Vec<Vec<bool>>,
}

impl NoisyTrajectory {
    /// Index of the origin cell inside the window.
    pub fn origin(&self) -> usize {
        self.width / 2
    }

    /// Total number of realized-error cells.
    pub fn error_count(&self) -> usize {
        self.errors
            .iter()
            .map(|row| row.iter().filter(|&&e| e).count())
            .sum()
    }

    /// Serializes the trajectory: a `ca-traj v1` header, one base-36 digit
    /// row per time step, then the error set as 0/1 rows.
    pub fn dump(&self) -> Result<String, NoiseError> {
        if self.state_count > 36 {
            return Err(NoiseError::DumpStates(self.state_count));
        }
        let mut out = String::new();
        out.push_str("ca-traj v1\n");
        out.push_str(&format!("states {}\n", self.state_count));
        out.push_str(&format!("width {}\n", self.width));
        out.push_str(&format!("horizon {}\n", self.horizon));
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("trial {}\n", self.trial));
        out.push_str(&format!("boundary {}\n", self.boundary));
        out.push_str("rows\n");
        for row in &self.rows {
            for &s in row {
                out.push(char::from_digit(s as u32, 36).expect("state fits base 36"));
            }
            out.push('\n');
        }
        out.push_str("errors\n");
        for row in &self.errors {
            for &e in row {
                out.push(if e { '1' } else { '0' });
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses a `ca-traj v1` dump produced by [`NoisyTrajectory::dump`].
    pub fn parse(text: &str) -> Result<Self, NoiseError> {
        let err = |line: usize, message: &str| NoiseError::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let mut expect = |want: Option<&str>| -> Result<(usize, String), NoiseError> {
            match lines.next() {
                Some((idx, line)) => {
                    if let Some(key) = want {
                        let rest = line
                            .strip_prefix(key)
                            .and_then(|r| {
                                r.strip_prefix(' ')
                                    .or(if r.is_empty() { Some("") } else { None })
                            })
                            .ok_or_else(|| {
                                err(idx + 1, &format!("expected `{key}` line, got `{line}`"))
                            })?;
                        Ok((idx + 1, rest.to_string()))
                    } else {
                        Ok((idx + 1, line.to_string()))
                    }
                }
                None => Err(err(0, "unexpected end of dump")),
            }
        };
        let (line_no, header) = expect(None)?;
        if header != "ca-traj v1" {
            return Err(err(line_no, "missing `ca-traj v1` header"));
        }
        let parse_usize = |s: &str, l: usize| {
            s.parse::<usize>()
                .map_err(|_| err(l, &format!("bad integer `{s}`")))
        };
        let parse_u64 = |s: &str, l: usize| {
            s.parse::<u64>()
                .map_err(|_| err(l, &format!("bad integer `{s}`")))
        };
        let (l, v) = expect(Some("states"))?;
        let state_count = parse_usize(&v, l)?;
        if state_count == 0 || state_count > 36 {
            return Err(err(l, "states must be in 1..=36"));
        }
        let (l, v) = expect(Some("width"))?;
        let width = parse_usize(&v, l)?;
        let (l, v) = expect(Some("horizon"))?;
        let horizon = parse_usize(&v, l)?;
        let (l, v) = expect(Some("seed"))?;
        let seed = parse_u64(&v, l)?;
        let (l, v) = expect(Some("trial"))?;
        let trial = parse_u64(&v, l)?;
        let (l, v) = expect(Some("boundary"))?;
        let boundary = if v == "periodic" {
            Boundary::Periodic
        } else if let Some(s) = v.strip_prefix("fixed ") {
            Boundary::FixedQuiescent(
                s.parse::<State>()
                    .map_err(|_| err(l, &format!("bad boundary state `{s}`")))?,
            )
        } else {
            return Err(err(l, &format!("bad boundary `{v}`")));
        };
        let (l, v) = expect(Some("rows"))?;
        if !v.is_empty() {
            return Err(err(l, "unexpected text after `rows`"));
        }
        let mut rows = Vec::with_capacity(horizon + 1);
        for _ in 0..=horizon {
            let (l, v) = expect(None)?;
            if v.len() != width {
                return Err(err(
                    l,
                    &format!("row has {} cells, expected {width}", v.len()),
                ));
            }
            let mut row = Vec::with_capacity(width);
            for c in v.chars() {
                let d = c
                    .to_digit(36)
                    .ok_or_else(|| err(l, &format!("bad state digit `{c}`")))?;
                if d as usize >= state_count {
                    return Err(err(l, &format!("state {d} out of range")));
                }
                row.push(d as State);
            }
            rows.push(row);
        }
        let (l, v) = expect(Some("errors"))?;
        if !v.is_empty() {
            return Err(err(l, "unexpected text after `errors`"));
        }
        let mut errors = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let (l, v) = expect(None)?;
            if v.len() != width {
                return Err(err(
                    l,
                    &format!("error row has {} cells, expected {width}", v.len()),
                ));
            }
            let mut row = Vec::with_capacity(width);
            for c in v.chars() {
                match c {
                    '0' => row.push(false),
                    '1' => row.push(true),
                    _ => return Err(err(l, &format!("bad error digit `{c}`"))),
                }
            }
            errors.push(row);
        }
        if let Some((idx, line)) = lines.next() {
            if !line.is_empty() {
                return Err(err(idx + 1, "trailing content after error rows"));
            }
        }
        Ok(NoisyTrajectory {
            state_count,
            width,
            horizon,
            seed,
            trial,
            boundary,
            rows,
            errors,
        })
    }
}

/// Realization of a noise model at error sites.
enum Sampler {
    Max(State),
    Set(State),
    /// Cumulative `⌊2^64 · Σ_{l≤j} w_l / Σ w⌋` thresholds; the last entry is
    /// pinned to `2^64` so a draw always lands.
    Custom(Vec<u128>),
}

impl Sampler {
    fn new(model: &NoiseModel) -> Sampler {
        match model {
            NoiseModel::IndependentMax { state, .. } => Sampler::Max(*state),
            NoiseModel::IndependentSet { state, .. } => Sampler::Set(*state),
            NoiseModel::Custom { weights, .. } => {
                let total: f64 = weights.iter().sum();
                let mut acc = 0.0;
                let mut cum: Vec<u128> = weights
                    .iter()
                    .map(|w| {
                        acc += w;
                        ((acc / total) * 18_446_744_073_709_551_616.0) as u128
                    })
                    .collect();
                *cum.last_mut().expect("weights nonempty") = 1u128 << 64;
                Sampler::Custom(cum)
            }
        }
    }

    fn realize(&self, noiseless: State, seed: u64, trial: u64, t: u64, i: u64) -> State {
        match self {
            Sampler::Max(a) => noiseless.max(*a),
            Sampler::Set(a) => *a,
            Sampler::Custom(cum) => {
                let draw = prf(seed ^ CUSTOM_DRAW_SALT, trial, t, i) as u128;
                cum.iter().position(|&c| draw < c).unwrap_or(cum.len() - 1) as State
            }
        }
    }
}

/// Validated per-run simulation state shared by all drivers.
struct Runner<'a> {
    rule: &'a LocalRule,
    sampler: Sampler,
    threshold: u128,
    boundary: Boundary,
    width: usize,
    seed: u64,
}

impl Runner<'_> {
    fn new<'a>(
        rule: &'a LocalRule,
        model: &NoiseModel,
        config: &SimConfig,
        boundary: Boundary,
        width: usize,
    ) -> Result<Runner<'a>, NoiseError> {
        rule.is_monotone()?;
        model.validate(rule)?;
        let checked = SimConfig {
            width,
            boundary,
            ..*config
        };
        checked.validate(rule)?;
        Ok(Runner {
            rule,
            sampler: Sampler::new(model),
            threshold: error_threshold(model.epsilon()),
            boundary,
            width,
            seed: config.seed,
        })
    }

    /// Extracts the window row of an initial configuration, checking fit.
    fn initial_row(&self, initial: &Configuration) -> Result<Vec<State>, NoiseError> {
        let origin = (self.width / 2) as i64;
        let lo = -origin;
        let hi = self.width as i64 - 1 - origin;
        if initial.lo() < lo || initial.hi() > hi {
            return Err(NoiseError::WidthMismatch {
                lo: initial.lo(),
                hi: initial.hi(),
                width: self.width,
            });
        }
        if let Boundary::FixedQuiescent(s) = self.boundary {
            if initial.left_boundary() != s || initial.right_boundary() != s {
                return Err(NoiseError::BoundaryMismatch {
                    left: initial.left_boundary(),
                    right: initial.right_boundary(),
                    expected: s,
                });
            }
        }
        let mut row = Vec::with_capacity(self.width);
        for w in 0..self.width as i64 {
            let s = initial.get(w - origin);
            if s > self.rule.max_state() {
                return Err(NoiseError::BadState(s, self.rule.max_state()));
            }
            row.push(s);
        }
        Ok(row)
    }

    fn pad(&self, row: &[State], padded: &mut Vec<State>) {
        let r = self.rule.radius();
        padded.clear();
        match self.boundary {
            Boundary::Periodic => {
                padded.extend_from_slice(&row[self.width - r..]);
                padded.extend_from_slice(row);
                padded.extend_from_slice(&row[..r]);
            }
            Boundary::FixedQuiescent(s) => {
                padded.extend(std::iter::repeat_n(s, r));
                padded.extend_from_slice(row);
                padded.extend(std::iter::repeat_n(s, r));
            }
        }
    }

    /// One noisy transition from `padded` (row `t` with boundary context)
    /// into `next`, recording realized errors when asked.
    fn step(
        &self,
        trial: u64,
        t: usize,
        padded: &[State],
        next: &mut [State],
        mut errors: Option<&mut [bool]>,
    ) {
        let w = self.rule.width();
        for i in 0..self.width {
            let noiseless = self.rule.apply_local(&padded[i..i + w]);
            let site = (prf(self.seed, trial, t as u64, i as u64) as u128) < self.threshold;
            let value = if site {
                self.sampler
                    .realize(noiseless, self.seed, trial, t as u64, i as u64)
            } else {
                noiseless
            };
            next[i] = value;
            if let Some(e) = errors.as_deref_mut() {
                e[i] = value != noiseless;
            }
        }
    }

    /// Streams rows `0..=horizon` to `visit`; stops early when `visit`
    /// returns `false`.
    fn stream(
        &self,
        trial: u64,
        init: &[State],
        horizon: usize,
        mut visit: impl FnMut(usize, &[State]) -> bool,
    ) {
        let mut cur = init.to_vec();
        if !visit(0, &cur) {
            return;
        }
        let mut next = vec![0; self.width];
        let mut padded = Vec::with_capacity(self.width + 2 * self.rule.radius());
        for t in 0..horizon {
            self.pad(&cur, &mut padded);
            self.step(trial, t, &padded, &mut next, None);
            std::mem::swap(&mut cur, &mut next);
            if !visit(t + 1, &cur) {
                return;
            }
        }
    }

    /// Full trajectory with its realized error set.
    fn trajectory(&self, trial: u64, init: Vec<State>, horizon: usize) -> NoisyTrajectory {
        let mut rows = Vec::with_capacity(horizon + 1);
        rows.push(init);
        let mut errors = Vec::with_capacity(horizon);
        let mut padded = Vec::with_capacity(self.width + 2 * self.rule.radius());
        for t in 0..horizon {
            let mut next = vec![0; self.width];
            let mut err = vec![false; self.width];
            self.pad(&rows[t], &mut padded);
            self.step(trial, t, &padded, &mut next, Some(&mut err));
            rows.push(next);
            errors.push(err);
        }
        NoisyTrajectory {
            state_count: self.rule.state_count(),
            width: self.width,
            horizon,
            seed: self.seed,
            trial,
            boundary: self.boundary,
            rows,
            errors,
        }
    }
}

/// Simulates one noisy trajectory for an explicit trial index.
///
/// Cell `(i, t)` is an error site iff `prf(seed, trial, t, i) < ⌊ε·2^64⌋`;
/// the recorded error set contains the realized differences from the
/// noiseless image, which for value-preserving hits (such as `max`-noise on
/// an already-high cell) is a strict subset of the sites.
pub fn run_noisy_trial(
    rule: &LocalRule,
    model: &NoiseModel,
    config: &SimConfig,
    initial: &Configuration,
    trial: u64,
) -> Result<NoisyTrajectory, NoiseError> {
    let runner = Runner::new(rule, model, config, config.boundary, config.width)?;
    let init = runner.initial_row(initial)?;
    Ok(runner.trajectory(trial, init, config.horizon))
}

/// Simulates the trial-0 noisy trajectory (see [`run_noisy_trial`]).
pub fn run_noisy(
    rule: &LocalRule,
    model: &NoiseModel,
    config: &SimConfig,
    initial: &Configuration,
) -> Result<NoisyTrajectory, NoiseError> {
    run_noisy_trial(rule, model, config, initial, 0)
}

/// A binomial point estimate with a Wilson 95% confidence interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinomialEstimate {
    /// Number of successes.
    pub successes: u64,
    /// Number of samples.
    pub total: u64,
    /// Point estimate `successes/total`.
    pub estimate: f64,
    /// Lower 95% confidence bound.
    pub ci_low: f64,
    /// Upper 95% confidence bound.
    pub ci_high: f64,
}

impl BinomialEstimate {
    /// Wilson score interval at 95% confidence.
    pub fn wilson(successes: u64, total: u64) -> BinomialEstimate {
        assert!(total > 0, "empty sample");
        let n = total as f64;
        let p = successes as f64 / n;
        let z = WILSON_Z;
        let denom = 1.0 + z * z / n;
        let center = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        BinomialEstimate {
            successes,
            total,
            estimate: p,
            ci_low: (center - half).max(0.0),
            ci_high: (center + half).min(1.0),
        }
    }

    /// Whether two intervals do not overlap.
    pub fn disjoint_from(&self, other: &BinomialEstimate) -> bool {
        self.ci_high < other.ci_low || other.ci_high < self.ci_low
    }
}

/// One point of the zero-density time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityPoint {
    /// Time step.
    pub t: usize,
    /// Frequency of state 0 at the origin across trials.
    pub estimate: BinomialEstimate,
}

impl DensityPoint {
    /// Tab-separated `t, estimate, ci_low, ci_high`.
    pub fn report_line(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}",
            self.t, self.estimate.estimate, self.estimate.ci_low, self.estimate.ci_high
        )
    }
}

/// Empirical `Pr[origin cell = 0]` per time step, starting from the all-zero
/// window.
pub fn density_zero(
    rule: &LocalRule,
    model: &NoiseModel,
    config: &SimConfig,
) -> Result<Vec<DensityPoint>, NoiseError> {
    let runner = Runner::new(rule, model, config, config.boundary, config.width)?;
    let origin = config.origin() as i64;
    let init = runner.initial_row(&Configuration::constant(
        0,
        -origin,
        config.width as i64 - 1 - origin,
    ))?;
    let columns: Vec<Vec<State>> = (0..config.trials)
        .into_par_iter()
        .map(|k| {
            let mut column = Vec::with_capacity(config.horizon + 1);
            runner.stream(k as u64, &init, config.horizon, |_, row| {
                column.push(row[origin as usize]);
                true
            });
            column
        })
        .collect();
    Ok((0..=config.horizon)
        .map(|t| {
            let zeros = columns.iter().filter(|c| c[t] == 0).count() as u64;
            DensityPoint {
                t,
                estimate: BinomialEstimate::wilson(zeros, config.trials as u64),
            }
        })
        .collect())
}

/// Pools the final row of every trial (cells × trials, starting from the
/// all-zero window) into one estimate of the nonzero density.
pub fn tail_nonzero_density(
    rule: &LocalRule,
    model: &NoiseModel,
    config: &SimConfig,
) -> Result<BinomialEstimate, NoiseError> {
    let runner = Runner::new(rule, model, config, config.boundary, config.width)?;
    let origin = config.origin() as i64;
    let init = runner.initial_row(&Configuration::constant(
        0,
        -origin,
        config.width as i64 - 1 - origin,
    ))?;
    let nonzero: Vec<u64> = (0..config.trials)
        .into_par_iter()
        .map(|k| {
            let mut count = 0u64;
            runner.stream(k as u64, &init, config.horizon, |t, row| {
                if t == config.horizon {
                    count = row.iter().filter(|&&s| s != 0).count() as u64;
                }
                true
            });
            count
        })
        .collect();
    let successes = nonzero.iter().sum();
    Ok(BinomialEstimate::wilson(
        successes,
        (config.trials * config.width) as u64,
    ))
}

/// One island-survival estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurvivalPoint {
    /// Island half-width `N` (the island spans `2N` cells).
    pub n: usize,
    /// Fraction of trials whose tracked cell held the island state through
    /// the whole horizon.
    pub estimate: BinomialEstimate,
}

impl SurvivalPoint {
    /// Tab-separated `N, estimate, ci_low, ci_high`.
    pub fn report_line(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}",
            self.n, self.estimate.estimate, self.estimate.ci_low, self.estimate.ci_high
        )
    }
}

/// Island-survival experiment: for each `N`, starts from the `2N`-cell
/// island of `omega` on the all-zero background and reports the fraction of
/// trials in which the tracked cell `⌊t(L+R)/2⌋` (edge rates of the pair
/// `(0, omega)`) holds `omega` for every `t ≤ horizon`.
///
/// The window is auto-sized to `2(N + r·horizon) + 4` cells with a fixed
/// quiescent-0 boundary, overriding `config.width` and `config.boundary`, so
/// the run approximates the infinite line regardless of the configured
/// window. Requires exact edge rates for the pair `(0, omega)`.
pub fn island_survival(
    rule: &LocalRule,
    omega: State,
    n_list: &[usize],
    model: &NoiseModel,
    config: &SimConfig,
) -> Result<Vec<SurvivalPoint>, NoiseError> {
    if omega > rule.max_state() {
        return Err(NoiseError::BadState(omega, rule.max_state()));
    }
    let pair_rates = rate(rule, 0, omega, &RateParams::default())?;
    let (l, r) = match (pair_rates.l.value(), pair_rates.r.value()) {
        (Some(l), Some(r)) => (l, r),
        _ => return Err(NoiseError::RateUnavailable(0, omega)),
    };
    let center = (l + r) / 2;
    let tracked: Vec<i64> = (0..=config.horizon)
        .map(|t| {
            (center * crate::Rational::from_integer(t as i64))
                .floor()
                .to_integer()
        })
        .collect();
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let width = 2 * (n + rule.radius() * config.horizon) + 4;
        let runner = Runner::new(rule, model, config, Boundary::FixedQuiescent(0), width)?;
        let origin = (width / 2) as i64;
        let init = runner.initial_row(&Configuration::island(
            omega,
            n as i64,
            -origin,
            width as i64 - 1 - origin,
        ))?;
        let survived: Vec<bool> = (0..config.trials)
            .into_par_iter()
            .map(|k| {
                let mut alive = true;
                runner.stream(k as u64, &init, config.horizon, |t, row| {
                    alive = row[(tracked[t] + origin) as usize] == omega;
                    alive
                });
                alive
            })
            .collect();
        let successes = survived.iter().filter(|&&s| s).count() as u64;
        out.push(SurvivalPoint {
            n,
            estimate: BinomialEstimate::wilson(successes, config.trials as u64),
        });
    }
    Ok(out)
}

/// One point of the ergodicity-probe distance series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbePoint {
    /// Time step.
    pub t: usize,
    /// Total-variation distance between the two origin marginals.
    pub distance: f64,
}

impl ProbePoint {
    /// Tab-separated `t, distance`.
    pub fn report_line(&self) -> String {
        format!("{}\t{:.6}", self.t, self.distance)
    }
}

/// Ergodicity probe: runs paired ensembles from the all-zero and all-max
/// windows with independent error sets (trial indices `2k` and `2k+1`) and
/// reports the total-variation distance between the empirical origin-cell
/// marginals per time step.
///
/// Always uses the periodic boundary (overriding `config.boundary`), so
/// neither ensemble is dragged toward a wall state.
pub fn ergodicity_probe(
    rule: &LocalRule,
    model: &NoiseModel,
    config: &SimConfig,
) -> Result<Vec<ProbePoint>, NoiseError> {
    let runner = Runner::new(rule, model, config, Boundary::Periodic, config.width)?;
    let origin = config.origin() as i64;
    let lo = -origin;
    let hi = config.width as i64 - 1 - origin;
    let bottom = runner.initial_row(&Configuration::constant(0, lo, hi))?;
    let top = runner.initial_row(&Configuration::constant(rule.max_state(), lo, hi))?;
    let column = |init: &[State], trial: u64| {
        let mut col = Vec::with_capacity(config.horizon + 1);
        runner.stream(trial, init, config.horizon, |_, row| {
            col.push(row[origin as usize]);
            true
        });
        col
    };
    let pairs: Vec<(Vec<State>, Vec<State>)> = (0..config.trials)
        .into_par_iter()
        .map(|k| {
            (
                column(&bottom, 2 * k as u64),
                column(&top, 2 * k as u64 + 1),
            )
        })
        .collect();
    let m = rule.state_count();
    Ok((0..=config.horizon)
        .map(|t| {
            let mut low_counts = vec![0u64; m];
            let mut high_counts = vec![0u64; m];
            for (b, h) in &pairs {
                low_counts[b[t] as usize] += 1;
                high_counts[h[t] as usize] += 1;
            }
            let n = config.trials as f64;
            let distance = 0.5
                * (0..m)
                    .map(|s| (low_counts[s] as f64 / n - high_counts[s] as f64 / n).abs())
                    .sum::<f64>();
            ProbePoint { t, distance }
        })
        .collect())
}
