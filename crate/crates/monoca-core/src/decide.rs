//! Eroder, shrinking, and stability-condition deciders.
//!
//! All deciders return three-valued verdicts: `yes` and `no` always carry a
//! certificate that re-validates by independent recomputation (exact rate
//! citations, a forcing certificate, or a chain of quiescent states), while
//! `unknown` reports honest budget exhaustion instead of forcing an answer.

use crate::forcing::{self, ForcingError, ShrinkingCertificate};
use crate::rule::{LocalRule, RuleError, State};
use crate::step::{rate, rate_table, RateEstimate, RateParams};
use crate::Rational;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Three-valued decision outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    /// The property holds, with a certificate.
    Yes,
    /// The property fails, with a certificate.
    No,
    /// Budgets were exhausted before either certificate was found.
    Unknown,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Yes => write!(f, "yes"),
            Answer::No => write!(f, "no"),
            Answer::Unknown => write!(f, "unknown"),
        }
    }
}

/// Errors of the decision procedures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecideError {
    /// Shrinking queries need an ordered quiescent pair.
    #[error("pair ({0},{1}) must be ordered (a < b) with both states quiescent")]
    BadPair(State, State),
    /// The equivalence check applies to binary rules only.
    #[error("rule must be binary for the equivalence check; it has {0} states")]
    NotBinary(usize),
    /// Underlying rule error.
    #[error(transparent)]
    Rule(#[from] RuleError),
    /// Underlying forcing error.
    #[error(transparent)]
    Forcing(#[from] ForcingError),
}

/// Budgets shared by the deciders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecideParams {
    /// Parameters of the rate engine.
    pub rate: RateParams,
    /// Largest forcing level searched for certificates.
    pub k_max: usize,
    /// Per-level subset budget of forcing enumeration.
    pub forcing_budget: u64,
    /// Whether rate-certified `yes` answers also search for an independent
    /// forcing certificate.
    pub cross_validate: bool,
}

impl Default for DecideParams {
    fn default() -> Self {
        Self {
            rate: RateParams::default(),
            k_max: forcing::DEFAULT_K_MAX,
            forcing_budget: forcing::DEFAULT_SUBSET_BUDGET,
            cross_validate: true,
        }
    }
}

/// Verdict of a shrinking query for an ordered pair `a < b`.
#[derive(Clone, Debug)]
pub struct ShrinkVerdict {
    /// The pair `(a, b)`.
    pub pair: (State, State),
    /// The decision.
    pub answer: Answer,
    /// Certified lower bound for `L_{a,b}`.
    pub rate_lower_l: Rational,
    /// Certified upper bound for `R_{b,a}`.
    pub rate_upper_r: Rational,
    /// Exact `L_{a,b}` when the rate engine certified it.
    pub exact_l: Option<Rational>,
    /// Exact `R_{b,a}` when the rate engine certified it.
    pub exact_r: Option<Rational>,
    /// Forcing certificate, when one was searched for and found.
    pub certificate: Option<ShrinkingCertificate>,
    /// Largest level searched for a certificate (0 when the search was
    /// skipped).
    pub searched_k_max: usize,
}

impl ShrinkVerdict {
    /// Re-validates whichever certificates the verdict carries.
    pub fn revalidate(&self, rule: &LocalRule) -> Result<bool, DecideError> {
        let (a, b) = self.pair;
        match self.answer {
            Answer::Yes => {
                if let Some(cert) = &self.certificate {
                    return Ok(cert.validate(rule, a, b)?);
                }
                Ok(self.rate_lower_l > self.rate_upper_r)
            }
            Answer::No => match (self.exact_l, self.exact_r) {
                (Some(l), Some(r)) => Ok(l <= r),
                _ => Ok(false),
            },
            Answer::Unknown => Ok(true),
        }
    }
}

/// Decides whether the ordered quiescent pair `(a, b)` is shrinking:
/// `L_{a,b} > R_{b,a}`, equivalently the existence of level-`k` forcing sets
/// `U`, `V` with `max U < min V`.
///
/// `yes` comes from the certified rate bounds (`lower(L_{a,b}) >
/// upper(R_{b,a})`) or from a forcing certificate; `no` from exact rates with
/// `L_{a,b} ≤ R_{b,a}`.
pub fn is_shrinking(
    rule: &LocalRule,
    a: State,
    b: State,
    params: &DecideParams,
) -> Result<ShrinkVerdict, DecideError> {
    if a >= b || !rule.is_quiescent(a) || !rule.is_quiescent(b) {
        return Err(DecideError::BadPair(a, b));
    }
    let ab = rate(rule, a, b, &params.rate)?;
    let ba = rate(rule, b, a, &params.rate)?;
    shrink_from_estimates(rule, a, b, &ab.l, &ba.r, params)
}

fn shrink_from_estimates(
    rule: &LocalRule,
    a: State,
    b: State,
    l_ab: &RateEstimate,
    r_ba: &RateEstimate,
    params: &DecideParams,
) -> Result<ShrinkVerdict, DecideError> {
    let rate_lower_l = l_ab.lower;
    let rate_upper_r = r_ba.upper;
    let exact_l = l_ab.value();
    let exact_r = r_ba.value();
    let rate_yes = rate_lower_l > rate_upper_r;
    let exact_no = matches!((exact_l, exact_r), (Some(l), Some(r)) if l <= r);

    let mut certificate = None;
    let mut searched_k_max = 0;
    let need_search = (rate_yes && params.cross_validate) || (!rate_yes && !exact_no);
    if need_search {
        searched_k_max = params.k_max;
        certificate =
            forcing::shrinking_certificate(rule, a, b, params.k_max, params.forcing_budget)?;
    }
    // A forcing certificate proves L_{a,b} > R_{b,a}; exact rates saying
    // otherwise would mean one of the two engines is wrong.
    assert!(
        !(exact_no && certificate.is_some()),
        "shrinking certificate contradicts exact rates for pair ({a},{b})"
    );

    let answer = if rate_yes || certificate.is_some() {
        Answer::Yes
    } else if exact_no {
        Answer::No
    } else {
        Answer::Unknown
    };
    Ok(ShrinkVerdict {
        pair: (a, b),
        answer,
        rate_lower_l,
        rate_upper_r,
        exact_l,
        exact_r,
        certificate,
        searched_k_max,
    })
}

/// One per-state check of the eroder condition.
#[derive(Clone, Debug)]
pub struct EroderCheck {
    /// The quiescent state `a ≠ 0` under test.
    pub state: State,
    /// Estimate of `R_{0,a}`.
    pub r_zero_a: RateEstimate,
    /// Estimate of `L_{a,0}`.
    pub l_a_zero: RateEstimate,
    /// Whether `R_{0,a} > L_{a,0}` holds for this state.
    pub outcome: Answer,
}

/// Verdict of the eroder decider.
#[derive(Clone, Debug)]
pub struct EroderVerdict {
    /// The decision: `yes` iff every check passed with exact rates.
    pub answer: Answer,
    /// Per-state evidence.
    pub checks: Vec<EroderCheck>,
}

/// Decides whether the rule erodes every finite perturbation of the all-zero
/// configuration: `R_{0,a} > L_{a,0}` for every quiescent `a ≠ 0`.
///
/// `yes` uses exact rates; a single state with certified
/// `lower(L_{a,0}) ≥ upper(R_{0,a})` certifies `no`.
pub fn is_eroder(rule: &LocalRule, params: &DecideParams) -> Result<EroderVerdict, DecideError> {
    if !rule.is_quiescent(0) {
        return Err(DecideError::Rule(RuleError::NotQuiescent(0)));
    }
    let table = rate_table(rule, &params.rate)?;
    let mut checks = Vec::new();
    for a in rule.quiescent_states() {
        if a == 0 {
            continue;
        }
        let r_zero_a = table.get(0, a).expect("pair in table").r.clone();
        let l_a_zero = table.get(a, 0).expect("pair in table").l.clone();
        let outcome = match (r_zero_a.value(), l_a_zero.value()) {
            (Some(r), Some(l)) if r > l => Answer::Yes,
            // Exact rates with r ≤ l also land here: the exact values are
            // their own certified bounds.
            _ if l_a_zero.lower >= r_zero_a.upper => Answer::No,
            _ => Answer::Unknown,
        };
        checks.push(EroderCheck {
            state: a,
            r_zero_a,
            l_a_zero,
            outcome,
        });
    }
    let answer = if checks.iter().any(|c| c.outcome == Answer::No) {
        Answer::No
    } else if checks.iter().all(|c| c.outcome == Answer::Yes) {
        Answer::Yes
    } else {
        Answer::Unknown
    };
    Ok(EroderVerdict { answer, checks })
}

/// Verdict of the stability-condition decider.
#[derive(Clone, Debug)]
pub struct StableVerdict {
    /// The decision (chain formulation first, then the per-state one).
    pub answer: Answer,
    /// A shortest (then lexicographically smallest) chain of quiescent
    /// states `0 = c_1 < … < c_j = m` whose consecutive pairs are all
    /// certified shrinking, when one exists.
    pub chain: Option<Vec<State>>,
    /// A quiescent state `a > 0` for which every quiescent `b < a` has exact
    /// `L_{b,a} ≤ R_{a,b}`, certifying `no`.
    pub alt_witness: Option<State>,
    /// Quiescent states reachable from 0 by non-`no` edges, recorded when
    /// even this optimistic graph cannot reach `m` (also certifying `no`).
    pub unreachable_cut: Option<Vec<State>>,
    /// Per-edge shrinking verdicts for all ordered quiescent pairs.
    pub edges: BTreeMap<(State, State), ShrinkVerdict>,
    /// Decision of the chain formulation alone.
    pub chain_answer: Answer,
    /// Decision of the per-state formulation alone.
    pub alt_answer: Answer,
}

impl StableVerdict {
    /// Renders the chain as `0<1<3`.
    pub fn chain_string(&self) -> Option<String> {
        self.chain.as_ref().map(|chain| {
            chain
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join("<")
        })
    }
}

/// Lexicographically smallest shortest path from `0` to `m` in the yes-edge
/// graph, as index lists into `nodes`.
fn lex_shortest_path(nodes: &[State], yes: &dyn Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    let n = nodes.len();
    let start = 0usize;
    let goal = n - 1;
    let mut dist_from = vec![usize::MAX; n];
    dist_from[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for v in u + 1..n {
            if yes(u, v) && dist_from[v] == usize::MAX {
                dist_from[v] = dist_from[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if dist_from[goal] == usize::MAX {
        return None;
    }
    let mut dist_to = vec![usize::MAX; n];
    dist_to[goal] = 0;
    let mut queue = std::collections::VecDeque::from([goal]);
    while let Some(u) = queue.pop_front() {
        for v in 0..u {
            if yes(v, u) && dist_to[v] == usize::MAX {
                dist_to[v] = dist_to[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let total = dist_from[goal];
    let mut path = vec![start];
    let mut cur = start;
    while cur != goal {
        let next = (cur + 1..n)
            .find(|&v| {
                yes(cur, v)
                    && dist_from[v] == dist_from[cur] + 1
                    && dist_to[v] != usize::MAX
                    && dist_from[v] + dist_to[v] == total
            })
            .expect("a shortest path exists");
        path.push(next);
        cur = next;
    }
    Some(path)
}

/// Decides the stability condition: the existence of a chain of quiescent
/// states `0 = a_1 < … < a_j = m` with every consecutive pair shrinking.
///
/// `yes` returns the chain (shortest, then lexicographically smallest); `no`
/// is certified either by a quiescent `a > 0` whose every lower quiescent
/// neighbor fails to shrink onto it (exact rates), or by `m` being
/// unreachable from `0` even when undecided pairs are optimistically treated
/// as edges. Both formulations are computed and must agree when both decide.
pub fn is_stable_eroder(
    rule: &LocalRule,
    params: &DecideParams,
) -> Result<StableVerdict, DecideError> {
    let m = rule.max_state();
    if !rule.is_quiescent(0) {
        return Err(DecideError::Rule(RuleError::NotQuiescent(0)));
    }
    if !rule.is_quiescent(m) {
        return Err(DecideError::Rule(RuleError::NotQuiescent(m)));
    }
    let table = rate_table(rule, &params.rate)?;
    let quiescent = rule.quiescent_states();
    let mut edges: BTreeMap<(State, State), ShrinkVerdict> = BTreeMap::new();
    for (i, &a) in quiescent.iter().enumerate() {
        for &b in &quiescent[i + 1..] {
            let l_ab = table.get(a, b).expect("pair in table").l.clone();
            let r_ba = table.get(b, a).expect("pair in table").r.clone();
            let verdict = shrink_from_estimates(rule, a, b, &l_ab, &r_ba, params)?;
            edges.insert((a, b), verdict);
        }
    }

    let idx_of = |s: State| quiescent.iter().position(|&q| q == s).expect("quiescent");
    let answer_of = |i: usize, j: usize| edges[&(quiescent[i], quiescent[j])].answer;
    let yes_edge = |i: usize, j: usize| answer_of(i, j) == Answer::Yes;
    let maybe_edge = |i: usize, j: usize| answer_of(i, j) != Answer::No;

    let chain = lex_shortest_path(&quiescent, &yes_edge)
        .map(|path| path.into_iter().map(|i| quiescent[i]).collect::<Vec<_>>());

    // Optimistic reachability: if even yes∪unknown edges cannot connect 0 to
    // m, no chain can exist.
    let n = quiescent.len();
    let mut reach = vec![false; n];
    reach[0] = true;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for (v, reached) in reach.iter_mut().enumerate().skip(u + 1) {
            if !*reached && maybe_edge(u, v) {
                *reached = true;
                queue.push_back(v);
            }
        }
    }
    let disconnected = !reach[idx_of(m)];
    let unreachable_cut = if disconnected {
        Some(
            quiescent
                .iter()
                .enumerate()
                .filter(|&(i, _)| reach[i])
                .map(|(_, &s)| s)
                .collect(),
        )
    } else {
        None
    };
    let chain_answer = if chain.is_some() {
        Answer::Yes
    } else if disconnected {
        Answer::No
    } else {
        Answer::Unknown
    };

    // Per-state formulation: every quiescent a > 0 needs some quiescent
    // b < a with the pair (b, a) shrinking.
    let mut alt_answer = Answer::Yes;
    let mut alt_witness = None;
    for (i, &a) in quiescent.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let mut has_yes = false;
        let mut all_no = true;
        for &b in &quiescent[..i] {
            match edges[&(b, a)].answer {
                Answer::Yes => {
                    has_yes = true;
                    all_no = false;
                }
                Answer::Unknown => all_no = false,
                Answer::No => {}
            }
        }
        if all_no {
            alt_answer = Answer::No;
            alt_witness = Some(a);
            break;
        }
        if !has_yes && alt_answer == Answer::Yes {
            alt_answer = Answer::Unknown;
        }
    }

    assert!(
        !(chain_answer != Answer::Unknown
            && alt_answer != Answer::Unknown
            && chain_answer != alt_answer),
        "chain and per-state stability formulations disagree"
    );
    let answer = if chain_answer != Answer::Unknown {
        chain_answer
    } else {
        alt_answer
    };
    Ok(StableVerdict {
        answer,
        chain,
        alt_witness,
        unreachable_cut,
        edges,
        chain_answer,
        alt_answer,
    })
}

/// Agreement report of the four equivalent conditions for binary rules.
#[derive(Clone, Debug)]
pub struct BinaryReport {
    /// Eroder decision via rates.
    pub eroder: Answer,
    /// Stability-condition decision via the chain search.
    pub stable: Answer,
    /// Direct `0,1`-shrinking decision.
    pub shrinking: Answer,
    /// Whether the level-1 hull intersection is empty.
    pub tau_empty: Answer,
}

impl BinaryReport {
    /// The four answers in report order.
    pub fn answers(&self) -> [Answer; 4] {
        [self.eroder, self.stable, self.shrinking, self.tau_empty]
    }

    /// Whether all decided answers coincide.
    pub fn agree(&self) -> bool {
        let decided: Vec<Answer> = self
            .answers()
            .into_iter()
            .filter(|a| *a != Answer::Unknown)
            .collect();
        decided.windows(2).all(|w| w[0] == w[1])
    }
}

/// Evaluates the four equivalent characterizations of binary eroders:
/// eroder via rates, stability chain, `0,1`-shrinking, and emptiness of the
/// level-1 hull intersection.
///
/// Requires a binary monotone rule with both states quiescent.
pub fn binary_equivalence_check(
    rule: &LocalRule,
    params: &DecideParams,
) -> Result<BinaryReport, DecideError> {
    if rule.state_count() != 2 {
        return Err(DecideError::NotBinary(rule.state_count()));
    }
    rule.is_monotone()?;
    if !rule.is_quiescent(0) || !rule.is_quiescent(1) {
        return Err(DecideError::BadPair(0, 1));
    }
    let eroder = is_eroder(rule, params)?.answer;
    let stable = is_stable_eroder(rule, params)?.answer;
    let shrinking = is_shrinking(rule, 0, 1, params)?.answer;
    let t = forcing::tau(rule, 0, 1, 1, params.forcing_budget)?;
    let tau_empty = match (t.interval, t.complete) {
        (None, _) => Answer::Yes,
        (Some(_), true) => Answer::No,
        (Some(_), false) => Answer::Unknown,
    };
    Ok(BinaryReport {
        eroder,
        stable,
        shrinking,
        tau_empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min2_is_shrinking_with_certificate() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let v = is_shrinking(&rule, 0, 1, &DecideParams::default()).unwrap();
        assert_eq!(v.answer, Answer::Yes);
        let cert = v.certificate.clone().unwrap();
        assert_eq!((cert.k, cert.u, cert.v), (1, vec![0], vec![1]));
        assert!(v.revalidate(&rule).unwrap());
    }

    #[test]
    fn galperin3_wide_pair_is_not_shrinking() {
        let rule = LocalRule::builtin("galperin3", None).unwrap();
        let v = is_shrinking(&rule, 0, 2, &DecideParams::default()).unwrap();
        assert_eq!(v.answer, Answer::No);
        assert_eq!(v.exact_l, Some(Rational::new(0, 1)));
        assert_eq!(v.exact_r, Some(Rational::new(0, 1)));
        let v12 = is_shrinking(&rule, 1, 2, &DecideParams::default()).unwrap();
        assert_eq!(v12.answer, Answer::No);
    }

    #[test]
    fn galperin3_erodes_but_is_not_stable() {
        let rule = LocalRule::builtin("galperin3", None).unwrap();
        let params = DecideParams::default();
        assert_eq!(is_eroder(&rule, &params).unwrap().answer, Answer::Yes);
        let stable = is_stable_eroder(&rule, &params).unwrap();
        assert_eq!(stable.answer, Answer::No);
        assert_eq!(stable.alt_witness, Some(2));
        assert_eq!(stable.chain, None);
    }

    #[test]
    fn min2_is_stable_with_unit_chain() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let stable = is_stable_eroder(&rule, &DecideParams::default()).unwrap();
        assert_eq!(stable.answer, Answer::Yes);
        assert_eq!(stable.chain, Some(vec![0, 1]));
        assert_eq!(stable.chain_string().unwrap(), "0<1");
        assert_eq!(stable.alt_answer, Answer::Yes);
    }

    #[test]
    fn identity_rule_is_no_eroder() {
        let rule = LocalRule::from_fn(2, 1, |w| w[1]).unwrap();
        let params = DecideParams::default();
        assert_eq!(is_eroder(&rule, &params).unwrap().answer, Answer::No);
        let report = binary_equivalence_check(&rule, &params).unwrap();
        assert_eq!(report.answers(), [Answer::No; 4]);
        assert!(report.agree());
    }

    #[test]
    fn min2_binary_report_all_yes() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let report = binary_equivalence_check(&rule, &DecideParams::default()).unwrap();
        assert_eq!(
            report.answers(),
            [Answer::Yes, Answer::Yes, Answer::Yes, Answer::Yes]
        );
        assert!(report.agree());
    }

    #[test]
    fn stable_rules_invert_to_non_eroders() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let params = DecideParams::default();
        assert_eq!(
            is_stable_eroder(&rule, &params).unwrap().answer,
            Answer::Yes
        );
        assert_eq!(
            is_eroder(&rule.invert(), &params).unwrap().answer,
            Answer::No
        );
    }
}
