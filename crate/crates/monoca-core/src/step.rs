//! Step-configuration dynamics and edge-rate computation.
//!
//! For a monotone rule with distinct quiescent states `a`, `b`, the step
//! configuration of type `(a,b)` holds `a` at every negative coordinate and
//! `b` everywhere else. Monotonicity keeps every image a ladder (cellwise
//! monotone along the line), so each image is described by the edge
//! coordinates `L^t` (largest coordinate holding `a`) and `R^t` (smallest
//! holding `b`) plus the interface word strictly between them. The limits
//! `L = lim L^t/t` and `R = lim R^t/t` exist and are rational; this module
//! evolves steps exactly on a finite window, detects eventual periodicity of
//! the interface, and produces certified rational brackets
//! `max_t (L^t+1)/t ≤ L ≤ R ≤ min_t R^t/t` (see `docs/theory.md` for proofs).

use crate::rule::{LocalRule, RuleError, State};
use crate::Rational;
use num_traits::Signed;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

/// Which edge of the step a rate estimate describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeSide {
    /// The `a`-region edge `L^t = max{i : f^t(x)_i = a}`.
    L,
    /// The `b`-region edge `R^t = min{i : f^t(x)_i = b}`.
    R,
}

impl fmt::Display for EdgeSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeSide::L => write!(f, "L"),
            EdgeSide::R => write!(f, "R"),
        }
    }
}

/// Certification level of a rate estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateStatus {
    /// The interface word recurred; the tail dynamics are exactly periodic,
    /// so the value is proven.
    ExactCycle,
    /// The value was pinned by bracket pinch, by a unique in-bracket
    /// candidate, or by denominator-bounded increment stabilization, each
    /// confirmed over a trailing window.
    ExactStabilized,
    /// Only the certified bracket is known.
    Bounded,
}

impl fmt::Display for RateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateStatus::ExactCycle => write!(f, "exact-cycle"),
            RateStatus::ExactStabilized => write!(f, "exact-stabilized"),
            RateStatus::Bounded => write!(f, "bounded"),
        }
    }
}

/// How an exact value (or the lack of one) was established.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RateEvidence {
    /// Identical interface words at `t1 < t2` with edge shift `shift`.
    Cycle {
        /// Earlier time of the repeated word.
        t1: usize,
        /// Later time of the repeated word.
        t2: usize,
        /// Common edge displacement over the period.
        shift: i64,
    },
    /// The certified lower and upper bounds coincide.
    BracketPinch {
        /// Time achieving the lower bound.
        lower_t: usize,
        /// Time achieving the upper bound.
        upper_t: usize,
    },
    /// Edge increments over period `period` were the constant `shift`
    /// throughout the trailing window `window`.
    Stabilized {
        /// Displacement per period.
        shift: i64,
        /// Period length (denominator of the accepted value).
        period: usize,
        /// Inclusive time range over which increments were confirmed.
        window: (usize, usize),
        /// Whether the value was proposed by a narrower pair's exact rate
        /// (as opposed to discovered by minimal-period search).
        via_candidate: bool,
    },
    /// No exactness evidence; only the bracket holds.
    BracketOnly,
}

/// A certified estimate of one edge rate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateEstimate {
    /// Which edge this estimate describes.
    pub side: EdgeSide,
    /// The step pair `(a, b)`.
    pub pair: (State, State),
    /// Certified lower bound (equals `upper` when exact).
    pub lower: Rational,
    /// Certified upper bound (equals `lower` when exact).
    pub upper: Rational,
    /// Certification level.
    pub status: RateStatus,
    /// Supporting evidence for the status.
    pub evidence: RateEvidence,
    /// Time achieving the best one-sided certificate: the maximizer of
    /// `(L^t+1)/t` for the `L` side, the minimizer of `R^t/t` for `R`.
    pub best_bound_t: usize,
    /// Empirical deviation bound `max_t |edge^t − t·value|`, present only
    /// when the estimate is exact.
    pub khat: Option<Rational>,
}

impl RateEstimate {
    /// The exact value, when certified.
    pub fn value(&self) -> Option<Rational> {
        if self.is_exact() {
            Some(self.lower)
        } else {
            None
        }
    }

    /// Whether the status certifies an exact value.
    pub fn is_exact(&self) -> bool {
        !matches!(self.status, RateStatus::Bounded)
    }

    /// The certified interval (degenerate when exact).
    pub fn bracket(&self) -> (Rational, Rational) {
        (self.lower, self.upper)
    }

    /// Renders the value column of a report line: `p/q` when exact,
    /// `[p1/q1,p2/q2]` otherwise.
    pub fn render_value(&self) -> String {
        match self.value() {
            Some(v) => format_rational(v),
            None => format!(
                "[{},{}]",
                format_rational(self.lower),
                format_rational(self.upper)
            ),
        }
    }
}

fn format_rational(v: Rational) -> String {
    format!("{}/{}", v.numer(), v.denom())
}

/// The two rate estimates of one ordered pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairRates {
    /// Estimate for `L_{a,b}`.
    pub l: RateEstimate,
    /// Estimate for `R_{a,b}`.
    pub r: RateEstimate,
}

/// Parameters of the rate engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RateParams {
    /// Evolution horizon when no cycle is found.
    pub t_max: usize,
    /// Largest denominator tried by increment stabilization.
    pub denominator_bound: usize,
    /// Length of the trailing window over which increments must be constant.
    pub confirm_window: usize,
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            t_max: 4096,
            denominator_bound: 64,
            confirm_window: 128,
        }
    }
}

/// Record of an exact step evolution: edges and interface words per time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepTrace {
    pair: (State, State),
    radius: usize,
    l: Vec<i64>,
    r: Vec<i64>,
    words: Vec<Vec<State>>,
}

impl StepTrace {
    /// The ordered pair `(a, b)`.
    pub fn pair(&self) -> (State, State) {
        self.pair
    }

    /// Radius of the rule that produced the trace.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Largest recorded time.
    pub fn horizon(&self) -> usize {
        self.l.len() - 1
    }

    /// `L^t` for `t = 0..=horizon`.
    pub fn l(&self) -> &[i64] {
        &self.l
    }

    /// `R^t` for `t = 0..=horizon`.
    pub fn r(&self) -> &[i64] {
        &self.r
    }

    /// Interface word at time `t` (cells at coordinates `L^t+1 ..= R^t−1`).
    pub fn word(&self, t: usize) -> &[State] {
        &self.words[t]
    }

    /// First violation of `L^{t+s} ≥ L^t + L^s + 1` with `t, s ≤ cap`.
    pub fn superadditivity_violation(&self, cap: usize) -> Option<(usize, usize)> {
        let h = self.horizon();
        for t in 1..=cap.min(h) {
            for s in t..=cap.min(h) {
                if t + s > h {
                    break;
                }
                if self.l[t + s] < self.l[t] + self.l[s] + 1 {
                    return Some((t, s));
                }
            }
        }
        None
    }

    /// First violation of `R^{t+s} ≤ R^t + R^s` with `t, s ≤ cap`.
    pub fn subadditivity_violation(&self, cap: usize) -> Option<(usize, usize)> {
        let h = self.horizon();
        for t in 1..=cap.min(h) {
            for s in t..=cap.min(h) {
                if t + s > h {
                    break;
                }
                if self.r[t + s] > self.r[t] + self.r[s] {
                    return Some((t, s));
                }
            }
        }
        None
    }

    /// Best certified lower bound for `L` and the earliest time achieving it.
    pub fn lower_bound_l(&self) -> (Rational, usize) {
        let mut best = Rational::new(self.l[1] + 1, 1);
        let mut best_t = 1;
        for t in 2..=self.horizon() {
            let v = Rational::new(self.l[t] + 1, t as i64);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        (best, best_t)
    }

    /// Best certified upper bound for `R` and the earliest time achieving it.
    pub fn upper_bound_r(&self) -> (Rational, usize) {
        let mut best = Rational::new(self.r[1], 1);
        let mut best_t = 1;
        for t in 2..=self.horizon() {
            let v = Rational::new(self.r[t], t as i64);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        (best, best_t)
    }

    /// `max |edge^t − t·value|` over `t` in `range` for the chosen side.
    pub fn deviation_bound(
        &self,
        side: EdgeSide,
        value: Rational,
        range: std::ops::RangeInclusive<usize>,
    ) -> Rational {
        let series = match side {
            EdgeSide::L => &self.l,
            EdgeSide::R => &self.r,
        };
        let mut max = Rational::new(0, 1);
        for t in range {
            let dev = (Rational::new(series[t], 1) - Rational::new(t as i64, 1) * value).abs();
            if dev > max {
                max = dev;
            }
        }
        max
    }
}

/// Exactly evolves the step of type `(a,b)` for `T` steps.
///
/// The window `[−rT−r−2, rT+r+2]` with boundary states `a` (left) and `b`
/// (right) is wide enough that every recorded quantity matches the
/// infinite-line evolution: at time `t ≤ T` all cells at coordinates
/// `≤ −rt−1` hold `a` and all cells `≥ rt` hold `b`, because their dependence
/// cones lie in one quiescent half of the initial step.
pub fn evolve_step(
    rule: &LocalRule,
    a: State,
    b: State,
    t_len: usize,
) -> Result<StepTrace, RuleError> {
    Ok(evolve_internal(rule, a, b, t_len, false)?.0)
}

type CycleHit = (usize, usize);

fn evolve_internal(
    rule: &LocalRule,
    a: State,
    b: State,
    t_len: usize,
    stop_on_cycle: bool,
) -> Result<(StepTrace, Option<CycleHit>), RuleError> {
    rule.is_monotone()?;
    if a == b || !rule.is_quiescent(a) {
        return Err(RuleError::NotQuiescent(a));
    }
    if !rule.is_quiescent(b) {
        return Err(RuleError::NotQuiescent(b));
    }
    let r = rule.radius() as i64;
    let span = r * t_len as i64 + r + 2;
    let lo = -span;
    let hi = span;
    let width = (hi - lo + 1) as usize;
    let idx = |i: i64| -> usize { (i - lo) as usize };

    let mut row: Vec<State> = (lo..=hi).map(|i| if i < 0 { a } else { b }).collect();
    let get = |row: &[State], i: i64| -> State {
        if i < lo {
            a
        } else if i > hi {
            b
        } else {
            row[idx(i)]
        }
    };

    let mut trace = StepTrace {
        pair: (a, b),
        radius: rule.radius(),
        l: vec![-1],
        r: vec![0],
        words: vec![Vec::new()],
    };
    let mut seen: HashMap<Vec<State>, usize> = HashMap::new();
    seen.insert(Vec::new(), 0);
    let mut cycle: Option<CycleHit> = None;

    let w = rule.width();
    let mut scratch: Vec<State> = Vec::with_capacity(width);
    let mut neigh: Vec<State> = vec![0; w];
    for t in 1..=t_len {
        // Only cells within the light cone of the interface can change.
        let alo = (-r * t as i64 - r - 2).max(lo);
        let ahi = (r * t as i64 + r + 2).min(hi);
        scratch.clear();
        for i in alo..=ahi {
            for (j, slot) in neigh.iter_mut().enumerate() {
                *slot = get(&row, i - r + j as i64);
            }
            scratch.push(rule.apply_local(&neigh));
        }
        row[idx(alo)..=idx(ahi)].copy_from_slice(&scratch);

        // The ladder structure localizes both edges near their last position.
        let prev_l = trace.l[t - 1];
        let prev_r = trace.r[t - 1];
        let mut i = (prev_l - r).max(lo);
        debug_assert_eq!(get(&row, i), a);
        while get(&row, i) == a {
            i += 1;
        }
        let cur_l = i - 1;
        let mut j = (prev_r + r).min(hi);
        debug_assert_eq!(get(&row, j), b);
        while get(&row, j) == b {
            j -= 1;
        }
        let cur_r = j + 1;
        debug_assert!(cur_l < cur_r);

        let word: Vec<State> = row[idx(cur_l + 1)..idx(cur_r)].to_vec();
        trace.l.push(cur_l);
        trace.r.push(cur_r);
        if let Some(&t1) = seen.get(&word) {
            if cycle.is_none() {
                cycle = Some((t1, t));
            }
        } else {
            seen.insert(word.clone(), t);
        }
        trace.words.push(word);
        if stop_on_cycle && cycle.is_some() {
            break;
        }
    }
    Ok((trace, cycle))
}

/// Looks for a repeated interface word in a recorded trace.
///
/// A repetition at `t1 < t2` proves the configuration at `t2` is a translate
/// of the one at `t1`; determinism and translation invariance then make the
/// whole tail periodic, so both rates equal `shift/(t2−t1)` exactly.
pub fn rate_by_cycle(trace: &StepTrace) -> Option<PairRates> {
    let mut seen: HashMap<&[State], usize> = HashMap::new();
    for t in 0..=trace.horizon() {
        let word = trace.word(t);
        if let Some(&t1) = seen.get(word) {
            return Some(estimates_from_cycle(trace, t1, t));
        }
        seen.insert(word, t);
    }
    None
}

fn estimates_from_cycle(trace: &StepTrace, t1: usize, t2: usize) -> PairRates {
    let shift = trace.l[t2] - trace.l[t1];
    debug_assert_eq!(shift, trace.r[t2] - trace.r[t1]);
    let value = Rational::new(shift, (t2 - t1) as i64);
    let evidence = RateEvidence::Cycle { t1, t2, shift };
    let (lo, lo_t) = trace.lower_bound_l();
    let (hi, hi_t) = trace.upper_bound_r();
    debug_assert!(lo <= value && value <= hi);
    let horizon = trace.horizon();
    let make = |side: EdgeSide, best_bound_t: usize| RateEstimate {
        side,
        pair: trace.pair(),
        lower: value,
        upper: value,
        status: RateStatus::ExactCycle,
        evidence: evidence.clone(),
        best_bound_t,
        khat: Some(trace.deviation_bound(side, value, 0..=horizon)),
    };
    PairRates {
        l: make(EdgeSide::L, lo_t),
        r: make(EdgeSide::R, hi_t),
    }
}

/// Certified bracket from one trace: `(lower bound for L, upper bound for R)`.
///
/// Soundness: `L^{t+s} ≥ L^t + L^s + 1` makes `t ↦ L^t + 1` superadditive, so
/// `(L^t+1)/t ≤ lim L^t/t = L` for every `t`; dually `R^{t+s} ≤ R^t + R^s`
/// gives `R ≤ R^t/t`.
pub fn rate_bounds(trace: &StepTrace) -> (Rational, Rational) {
    (trace.lower_bound_l().0, trace.upper_bound_r().0)
}

/// Checks that edge increments over period `q` equal `p` throughout the
/// trailing `window` times of the series.
fn increments_confirmed(series: &[i64], p: i64, q: usize, window: usize) -> Option<(usize, usize)> {
    let horizon = series.len() - 1;
    if q == 0 || q + window > horizon {
        return None;
    }
    let from = horizon - window + 1;
    for t in from..=horizon {
        if series[t] - series[t - q] != p {
            return None;
        }
    }
    Some((from, horizon))
}

/// Minimal-period increment stabilization: the smallest `q ≤ bound` whose
/// increments are constant over the trailing window, with the implied value.
fn stabilize(
    series: &[i64],
    bound: usize,
    window: usize,
    bracket: (Rational, Rational),
) -> Option<(i64, usize, (usize, usize))> {
    let horizon = series.len() - 1;
    for q in 1..=bound {
        if q + window > horizon {
            return None;
        }
        let p = series[horizon] - series[horizon - q];
        if let Some(w) = increments_confirmed(series, p, q, window) {
            let v = Rational::new(p, q as i64);
            if bracket.0 <= v && v <= bracket.1 {
                return Some((p, q, w));
            }
            // A confirmed slope outside the certified bracket would
            // contradict the bound proofs; treat it as not stabilized.
            return None;
        }
    }
    None
}

/// Tries each candidate value against the trace: the candidate must lie in
/// the certified bracket and its slope must be confirmed over the trailing
/// window. Accepts only a unique surviving value.
fn match_candidates(
    series: &[i64],
    candidates: &[Rational],
    window: usize,
    bracket: (Rational, Rational),
) -> Option<(Rational, (usize, usize))> {
    let mut surviving: Vec<(Rational, (usize, usize))> = Vec::new();
    let mut values: Vec<Rational> = candidates.to_vec();
    values.sort();
    values.dedup();
    for v in values {
        if v < bracket.0 || v > bracket.1 {
            continue;
        }
        let q = *v.denom() as usize;
        let p = *v.numer();
        if let Some(w) = increments_confirmed(series, p, q, window) {
            surviving.push((v, w));
        }
    }
    if surviving.len() == 1 {
        Some(surviving[0])
    } else {
        None
    }
}

/// Computes certified rate estimates for one ordered quiescent pair.
///
/// Pipeline, in order: interface-cycle detection (proof); bracket pinch
/// (proof); candidate matching against exact rates of strictly narrower
/// pairs (edge-guard candidates, confirmed on the trace); minimal-period
/// increment stabilization bounded by `denominator_bound`; adjacent-pair
/// equality propagation; otherwise an honest bracket.
pub fn rate(
    rule: &LocalRule,
    a: State,
    b: State,
    params: &RateParams,
) -> Result<PairRates, RuleError> {
    let mut memo = BTreeMap::new();
    rate_with_memo(rule, a, b, params, &mut memo)
}

fn quiescent_between(rule: &LocalRule, a: State, b: State) -> Vec<State> {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    rule.quiescent_states()
        .into_iter()
        .filter(|&s| s > lo && s < hi)
        .collect()
}

fn rate_with_memo(
    rule: &LocalRule,
    a: State,
    b: State,
    params: &RateParams,
    memo: &mut BTreeMap<(State, State), PairRates>,
) -> Result<PairRates, RuleError> {
    if let Some(cached) = memo.get(&(a, b)) {
        return Ok(cached.clone());
    }
    let (trace, cycle) = evolve_internal(rule, a, b, params.t_max, true)?;
    if let Some((t1, t2)) = cycle {
        let rates = estimates_from_cycle(&trace, t1, t2);
        memo.insert((a, b), rates.clone());
        return Ok(rates);
    }

    let (lo, lo_t) = trace.lower_bound_l();
    let (hi, hi_t) = trace.upper_bound_r();
    let horizon = trace.horizon();
    let finish = |side: EdgeSide, value: Rational, status, evidence, best_t| RateEstimate {
        side,
        pair: (a, b),
        lower: value,
        upper: value,
        status,
        evidence,
        best_bound_t: best_t,
        khat: Some(trace.deviation_bound(side, value, 0..=horizon)),
    };

    if lo == hi {
        // Lower bound for L meets upper bound for R: since L ≤ R, both rates
        // are pinned exactly.
        let evidence = RateEvidence::BracketPinch {
            lower_t: lo_t,
            upper_t: hi_t,
        };
        let rates = PairRates {
            l: finish(
                EdgeSide::L,
                lo,
                RateStatus::ExactStabilized,
                evidence.clone(),
                lo_t,
            ),
            r: finish(EdgeSide::R, hi, RateStatus::ExactStabilized, evidence, hi_t),
        };
        memo.insert((a, b), rates.clone());
        return Ok(rates);
    }

    // Exact rates of strictly narrower pairs are the candidate values for
    // this pair's edges (each edge rate is known to coincide with some
    // narrower pair's opposite-edge rate; the remaining possibility is the
    // sibling edge of this same pair, handled in a second pass).
    // In both pair orientations, L of this pair matches R of some pair
    // (a, c) and R of this pair matches L of some pair (c, b), where c
    // ranges over the interior quiescent states (narrower pairs) or the
    // far endpoint (the sibling edge, handled in a second pass below).
    let interior = quiescent_between(rule, a, b);
    let mut cand_l: Vec<Rational> = Vec::new();
    let mut cand_r: Vec<Rational> = Vec::new();
    for &c in &interior {
        let sub = rate_with_memo(rule, a, c, params, memo)?;
        if let Some(v) = sub.r.value() {
            cand_l.push(v);
        }
        let sub = rate_with_memo(rule, c, b, params, memo)?;
        if let Some(v) = sub.l.value() {
            cand_r.push(v);
        }
    }

    let bracket = (lo, hi);
    let window = params.confirm_window;
    let mut l_est: Option<RateEstimate> = None;
    let mut r_est: Option<RateEstimate> = None;

    let stab_evidence =
        |shift: i64, period: usize, w: (usize, usize), via: bool| RateEvidence::Stabilized {
            shift,
            period,
            window: w,
            via_candidate: via,
        };

    if let Some((v, w)) = match_candidates(&trace.l, &cand_l, window, bracket) {
        l_est = Some(finish(
            EdgeSide::L,
            v,
            RateStatus::ExactStabilized,
            stab_evidence(*v.numer(), *v.denom() as usize, w, true),
            lo_t,
        ));
    }
    if let Some((v, w)) = match_candidates(&trace.r, &cand_r, window, bracket) {
        r_est = Some(finish(
            EdgeSide::R,
            v,
            RateStatus::ExactStabilized,
            stab_evidence(*v.numer(), *v.denom() as usize, w, true),
            hi_t,
        ));
    }

    // Second candidate pass with the sibling edge's fresh exact value.
    if l_est.is_some() != r_est.is_some() {
        if let Some(le) = &l_est {
            let mut extended = cand_r.clone();
            extended.push(le.lower);
            if let Some((v, w)) = match_candidates(&trace.r, &extended, window, bracket) {
                r_est = Some(finish(
                    EdgeSide::R,
                    v,
                    RateStatus::ExactStabilized,
                    stab_evidence(*v.numer(), *v.denom() as usize, w, true),
                    hi_t,
                ));
            }
        } else if let Some(re) = &r_est {
            let mut extended = cand_l.clone();
            extended.push(re.lower);
            if let Some((v, w)) = match_candidates(&trace.l, &extended, window, bracket) {
                l_est = Some(finish(
                    EdgeSide::L,
                    v,
                    RateStatus::ExactStabilized,
                    stab_evidence(*v.numer(), *v.denom() as usize, w, true),
                    lo_t,
                ));
            }
        }
    }

    if l_est.is_none() {
        if let Some((p, q, w)) = stabilize(&trace.l, params.denominator_bound, window, bracket) {
            l_est = Some(finish(
                EdgeSide::L,
                Rational::new(p, q as i64),
                RateStatus::ExactStabilized,
                stab_evidence(p, q, w, false),
                lo_t,
            ));
        }
    }
    if r_est.is_none() {
        if let Some((p, q, w)) = stabilize(&trace.r, params.denominator_bound, window, bracket) {
            r_est = Some(finish(
                EdgeSide::R,
                Rational::new(p, q as i64),
                RateStatus::ExactStabilized,
                stab_evidence(p, q, w, false),
                hi_t,
            ));
        }
    }

    // With no quiescent state strictly between a and b the two rates are
    // equal, so exactness propagates across the pair.
    if interior.is_empty() && l_est.is_some() != r_est.is_some() {
        if let Some(le) = &l_est {
            let v = le.lower;
            if v <= hi {
                r_est = Some(finish(
                    EdgeSide::R,
                    v,
                    RateStatus::ExactStabilized,
                    le.evidence.clone(),
                    hi_t,
                ));
            }
        } else if let Some(re) = &r_est {
            let v = re.lower;
            if v >= lo {
                l_est = Some(finish(
                    EdgeSide::L,
                    v,
                    RateStatus::ExactStabilized,
                    re.evidence.clone(),
                    lo_t,
                ));
            }
        }
    }

    let bounded = |side: EdgeSide, best_t: usize| RateEstimate {
        side,
        pair: (a, b),
        lower: lo,
        upper: hi,
        status: RateStatus::Bounded,
        evidence: RateEvidence::BracketOnly,
        best_bound_t: best_t,
        khat: None,
    };
    let rates = PairRates {
        l: l_est.unwrap_or_else(|| bounded(EdgeSide::L, lo_t)),
        r: r_est.unwrap_or_else(|| bounded(EdgeSide::R, hi_t)),
    };
    memo.insert((a, b), rates.clone());
    Ok(rates)
}

/// Rate estimates for every ordered pair of distinct quiescent states.
#[derive(Clone, Debug)]
pub struct RateTable {
    entries: BTreeMap<(State, State), PairRates>,
}

impl RateTable {
    /// Estimates for the ordered pair `(a, b)`.
    pub fn get(&self, a: State, b: State) -> Option<&PairRates> {
        self.entries.get(&(a, b))
    }

    /// The exact value of one edge, when certified.
    pub fn exact(&self, side: EdgeSide, a: State, b: State) -> Option<Rational> {
        let pair = self.entries.get(&(a, b))?;
        match side {
            EdgeSide::L => pair.l.value(),
            EdgeSide::R => pair.r.value(),
        }
    }

    /// Iterates entries in lexicographic pair order.
    pub fn iter(&self) -> impl Iterator<Item = (&(State, State), &PairRates)> {
        self.entries.iter()
    }

    /// Whether every entry of the table is exact.
    pub fn all_exact(&self) -> bool {
        self.entries
            .values()
            .all(|p| p.l.is_exact() && p.r.is_exact())
    }

    /// Tab-separated report, one line per edge:
    /// `rate\t<a>\t<b>\t<L|R>\t<p>/<q>\t<status>`.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for ((a, b), pair) in &self.entries {
            for est in [&pair.l, &pair.r] {
                out.push_str(&format!(
                    "rate\t{a}\t{b}\t{}\t{}\t{}\n",
                    est.side,
                    est.render_value(),
                    est.status
                ));
            }
        }
        out
    }

    /// Violations of adjacent-pair equality: exact pairs with no quiescent
    /// state strictly between whose `L` and `R` differ.
    pub fn adjacent_equality_violations(&self, rule: &LocalRule) -> Vec<(State, State)> {
        let mut bad = Vec::new();
        for (&(a, b), pair) in &self.entries {
            if !quiescent_between(rule, a, b).is_empty() {
                continue;
            }
            if let (Some(l), Some(r)) = (pair.l.value(), pair.r.value()) {
                if l != r {
                    bad.push((a, b));
                }
            }
        }
        bad
    }

    /// Violations of the ordering `L_{a,b} ≤ R_{a,b}` among exact entries.
    pub fn order_violations(&self) -> Vec<(State, State)> {
        let mut bad = Vec::new();
        for (&(a, b), pair) in &self.entries {
            if let (Some(l), Some(r)) = (pair.l.value(), pair.r.value()) {
                if l > r {
                    bad.push((a, b));
                }
            }
        }
        bad
    }

    /// Violations of edge-rate monotonicity in the pair width among exact
    /// entries: widening the far endpoint of the pair never increases `L`
    /// (`L_{a,b} ≥ L_{a,b+1}`, `L_{b,a} ≤ L_{b,a+1}`) and never decreases the
    /// reach of `R` in the mirrored sense (`R_{b,a} ≤ R_{b+1,a}`,
    /// `R_{a,b} ≥ R_{a+1,b}`).
    pub fn width_monotonicity_violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let exact = |side, a, b| self.exact(side, a, b);
        for &(a, b) in self.entries.keys() {
            let (a_up, b_up) = (a.checked_add(1), b.checked_add(1));
            if a < b {
                // Ascending pairs: compare with (a, b+1) and (a+1, b).
                if let (Some(x), Some(y), Some(b1)) = (
                    exact(EdgeSide::L, a, b),
                    b_up.and_then(|b1| exact(EdgeSide::L, a, b1)),
                    b_up,
                ) {
                    if x < y {
                        bad.push(format!("L_{{{a},{b}}} < L_{{{a},{b1}}}"));
                    }
                }
                if let (Some(x), Some(y), Some(a1)) = (
                    exact(EdgeSide::R, a, b),
                    a_up.and_then(|a1| exact(EdgeSide::R, a1, b)),
                    a_up,
                ) {
                    if x < y {
                        bad.push(format!("R_{{{a},{b}}} < R_{{{a1},{b}}}"));
                    }
                }
            } else {
                // Descending pairs: compare with (a+1, b) and (a, b+1).
                if let (Some(x), Some(y), Some(a1)) = (
                    exact(EdgeSide::R, a, b),
                    a_up.and_then(|a1| exact(EdgeSide::R, a1, b)),
                    a_up,
                ) {
                    if x > y {
                        bad.push(format!("R_{{{a},{b}}} > R_{{{a1},{b}}}"));
                    }
                }
                if let (Some(x), Some(y), Some(b1)) = (
                    exact(EdgeSide::L, a, b),
                    b_up.and_then(|b1| exact(EdgeSide::L, a, b1)),
                    b_up,
                ) {
                    if x > y {
                        bad.push(format!("L_{{{a},{b}}} > L_{{{a},{b1}}}"));
                    }
                }
            }
        }
        bad
    }

    /// For a fully exact table: ordered quiescent pairs `a < b` for which no
    /// quiescent `c` with `a < c ≤ b` satisfies `L_{c,a} = R_{b,a}`.
    pub fn edge_guard_violations(&self, rule: &LocalRule) -> Vec<(State, State)> {
        let quiescent = rule.quiescent_states();
        let mut bad = Vec::new();
        for (qi, &a) in quiescent.iter().enumerate() {
            for &b in &quiescent[qi + 1..] {
                let Some(target) = self.exact(EdgeSide::R, b, a) else {
                    continue;
                };
                let covered = quiescent
                    .iter()
                    .any(|&c| c > a && c <= b && self.exact(EdgeSide::L, c, a) == Some(target));
                if !covered {
                    bad.push((a, b));
                }
            }
        }
        bad
    }
}

/// Runs [`rate`] for every ordered pair of distinct quiescent states,
/// sharing narrower-pair results across the table.
pub fn rate_table(rule: &LocalRule, params: &RateParams) -> Result<RateTable, RuleError> {
    let quiescent = rule.quiescent_states();
    let mut memo = BTreeMap::new();
    let mut entries = BTreeMap::new();
    // Narrow pairs first so candidate propagation sees exact values.
    let mut pairs: Vec<(State, State)> = Vec::new();
    for &a in &quiescent {
        for &b in &quiescent {
            if a != b {
                pairs.push((a, b));
            }
        }
    }
    pairs.sort_by_key(|&(a, b)| ((a as i16 - b as i16).unsigned_abs(), a, b));
    for (a, b) in pairs {
        let rates = rate_with_memo(rule, a, b, params, &mut memo)?;
        entries.insert((a, b), rates);
    }
    Ok(RateTable { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::parse_rule;

    fn identity_rule() -> LocalRule {
        parse_rule("ca-rule v1\nstates 3\nradius 1\nbuiltin galperin3\n")
            .map(|_| LocalRule::from_fn(3, 1, |w| w[1]).unwrap())
            .unwrap()
    }

    #[test]
    fn identity_trace_is_static() {
        let rule = identity_rule();
        let trace = evolve_step(&rule, 0, 1, 8).unwrap();
        assert_eq!(trace.l(), &[-1; 9][..]);
        assert_eq!(trace.r(), &[0; 9][..]);
    }

    #[test]
    fn identity_cycles_at_zero_one() {
        let rule = identity_rule();
        let trace = evolve_step(&rule, 2, 0, 4).unwrap();
        let rates = rate_by_cycle(&trace).unwrap();
        assert_eq!(
            rates.l.evidence,
            RateEvidence::Cycle {
                t1: 0,
                t2: 1,
                shift: 0
            }
        );
        assert_eq!(rates.l.value(), Some(Rational::new(0, 1)));
        assert_eq!(rates.r.value(), Some(Rational::new(0, 1)));
    }

    #[test]
    fn galperin3_zero_one_edges() {
        let rule = LocalRule::builtin("galperin3", None).unwrap();
        let trace = evolve_step(&rule, 0, 1, 5).unwrap();
        for t in 0..=5usize {
            assert_eq!(trace.r()[t], t as i64, "R^{t}");
            assert_eq!(trace.l()[t], t as i64 - 1, "L^{t}");
        }
    }

    #[test]
    fn min2_descending_edges_move_left() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let trace = evolve_step(&rule, 1, 0, 10).unwrap();
        for t in 0..=10usize {
            assert_eq!(trace.r()[t], -(t as i64));
        }
        let rates = rate_by_cycle(&trace).unwrap();
        assert_eq!(rates.l.value(), Some(Rational::new(-1, 1)));
    }

    #[test]
    fn bounds_are_certified_directions() {
        let rule = LocalRule::builtin("galperin3", None).unwrap();
        let trace = evolve_step(&rule, 2, 0, 64).unwrap();
        let (lo, hi) = rate_bounds(&trace);
        assert_eq!(lo, Rational::new(-1, 1));
        assert_eq!(hi, Rational::new(0, 1));
        assert!(trace.superadditivity_violation(32).is_none());
        assert!(trace.subadditivity_violation(32).is_none());
    }

    #[test]
    fn galperin3_full_table_matches_known_values() {
        let rule = LocalRule::builtin("galperin3", None).unwrap();
        let table = rate_table(&rule, &RateParams::default()).unwrap();
        let expect = [
            ((0u8, 1u8), 1i64, 1i64),
            ((1, 0), 0, 0),
            ((0, 2), 0, 0),
            ((2, 0), -1, 0),
            ((1, 2), -1, -1),
            ((2, 1), -1, -1),
        ];
        for ((a, b), l, r) in expect {
            let pair = table.get(a, b).unwrap();
            assert_eq!(pair.l.value(), Some(Rational::new(l, 1)), "L_{{{a},{b}}}");
            assert_eq!(pair.r.value(), Some(Rational::new(r, 1)), "R_{{{a},{b}}}");
        }
        assert!(table.all_exact());
        assert!(table.order_violations().is_empty());
        assert!(table.adjacent_equality_violations(&rule).is_empty());
        assert!(table.width_monotonicity_violations().is_empty());
        assert!(table.edge_guard_violations(&rule).is_empty());
    }

    #[test]
    fn report_line_format() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let table = rate_table(&rule, &RateParams::default()).unwrap();
        let report = table.report();
        assert!(report.contains("rate\t0\t1\tL\t0/1\texact-cycle"));
        assert!(report.contains("rate\t1\t0\tR\t-1/1\texact-cycle"));
    }
}
