//! Forcing sets: membership, minimal-family enumeration, hull
//! intersections, and shrinking certificates.
//!
//! For quiescent states `a < b`, a finite set `V ⊆ [−kr, kr]` is `a,b`-forcing
//! at level `k` when every configuration that is `≤ a` on `V` and `≤ b`
//! elsewhere satisfies `f^k(x)_0 ≤ a`. By monotonicity it suffices to test
//! the single extremal configuration `x*` that equals `a` exactly on `V` and
//! `b` everywhere else: every admissible `x` is cellwise `≤ x*`, so
//! `f^k(x)_0 ≤ f^k(x*)_0`, and `x*` itself is admissible (`docs/theory.md`).

use crate::rule::{LocalRule, RuleError, State};
use thiserror::Error;

/// Default per-level cap on enumerated candidate subsets.
pub const DEFAULT_SUBSET_BUDGET: u64 = 1 << 22;

/// Default largest level tried by certificate searches.
pub const DEFAULT_K_MAX: usize = 8;

/// Errors of the forcing operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForcingError {
    /// The pair must be ordered and quiescent.
    #[error("pair ({0},{1}) must satisfy a < b with both states quiescent")]
    BadPair(State, State),
    /// A candidate cell lies outside the level window.
    #[error("cell {cell} outside the level-{k} window [{lo},{hi}]")]
    OutOfWindow {
        /// Offending cell.
        cell: i64,
        /// Level.
        k: usize,
        /// Window lower end.
        lo: i64,
        /// Window upper end.
        hi: i64,
    },
    /// The level window exceeds the enumerator's 127-cell capacity.
    #[error("level-{k} window has {cells} cells; enumeration supports at most 127")]
    WindowTooWide {
        /// Level.
        k: usize,
        /// Window size `2kr+1`.
        cells: usize,
    },
    /// Underlying rule error (non-monotone rule).
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// The antichain of minimal `a,b`-forcing sets found at one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForcingFamily {
    pair: (State, State),
    level: usize,
    radius: usize,
    sets: Vec<Vec<i64>>,
    complete: bool,
}

impl ForcingFamily {
    /// The ordered pair `(a, b)`.
    pub fn pair(&self) -> (State, State) {
        self.pair
    }

    /// The level `k`.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Member sets, each ascending, ordered by (size, lexicographic).
    pub fn sets(&self) -> &[Vec<i64>] {
        &self.sets
    }

    /// Whether enumeration covered the whole level window within budget.
    pub fn complete(&self) -> bool {
        self.complete
    }

    /// Tab-separated report, one line per member:
    /// `forcing\t<a>\t<b>\t<k>\t{v1,v2,…}`.
    pub fn report(&self) -> String {
        let (a, b) = self.pair;
        let mut out = String::new();
        for set in &self.sets {
            let cells: Vec<String> = set.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "forcing\t{a}\t{b}\t{}\t{{{}}}\n",
                self.level,
                cells.join(",")
            ));
        }
        out
    }
}

/// A proof that the pair `(a, b)` is shrinking: forcing sets at one level
/// whose hulls are disjoint, `max U < min V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShrinkingCertificate {
    /// The level at which both sets force.
    pub k: usize,
    /// Forcing set with the smaller hull (ascending).
    pub u: Vec<i64>,
    /// Forcing set with the larger hull (ascending).
    pub v: Vec<i64>,
}

impl ShrinkingCertificate {
    /// Re-validates the certificate from scratch.
    pub fn validate(&self, rule: &LocalRule, a: State, b: State) -> Result<bool, ForcingError> {
        let u_max = *self.u.last().ok_or(ForcingError::BadPair(a, b))?;
        let v_min = *self.v.first().ok_or(ForcingError::BadPair(a, b))?;
        Ok(u_max < v_min
            && is_forcing(rule, &self.u, a, b, self.k)?
            && is_forcing(rule, &self.v, a, b, self.k)?)
    }
}

/// Result of a hull-intersection query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TauResult {
    /// The intersection interval, `None` when provably empty.
    pub interval: Option<(i64, i64)>,
    /// Whether the family behind it was enumerated exhaustively. When
    /// `false` and the interval is present, it is an upper approximation
    /// (a superset of the true intersection); an empty result is decisive
    /// either way.
    pub complete: bool,
}

fn check_pair(rule: &LocalRule, a: State, b: State) -> Result<(), ForcingError> {
    if a >= b || !rule.is_quiescent(a) || !rule.is_quiescent(b) {
        return Err(ForcingError::BadPair(a, b));
    }
    Ok(())
}

/// Evaluates forcing membership on bitmask-encoded subsets of the level
/// window without re-validating rule preconditions.
struct Evaluator<'a> {
    rule: &'a LocalRule,
    a: State,
    b: State,
    k: usize,
    half: usize,
    row: Vec<State>,
    next: Vec<State>,
}

impl<'a> Evaluator<'a> {
    fn new(rule: &'a LocalRule, a: State, b: State, k: usize) -> Self {
        let half = k * rule.radius();
        Self {
            rule,
            a,
            b,
            k,
            half,
            row: vec![0; 2 * half + 1],
            next: vec![0; 2 * half + 1],
        }
    }

    fn cells(&self) -> usize {
        2 * self.half + 1
    }

    /// Whether the subset encoded by `mask` (bit `j` = cell `−kr + j`) forces.
    fn forces(&mut self, mask: u128) -> bool {
        let width = self.cells();
        for (j, slot) in self.row.iter_mut().enumerate() {
            *slot = if mask >> j & 1 == 1 { self.a } else { self.b };
        }
        // After step s only the middle 2(k−s)r+1 cells matter; the cell 0
        // value after k steps depends on exactly the initial window.
        let r = self.rule.radius();
        let w = 2 * r + 1;
        let mut cur_width = width;
        for _ in 0..self.k {
            cur_width -= 2 * r;
            for i in 0..cur_width {
                self.next[i] = self.rule.apply_local(&self.row[i..i + w]);
            }
            std::mem::swap(&mut self.row, &mut self.next);
        }
        debug_assert_eq!(cur_width, 1);
        self.row[0] <= self.a
    }
}

/// Whether `v` is an `a,b`-forcing set at level `k`.
pub fn is_forcing(
    rule: &LocalRule,
    v: &[i64],
    a: State,
    b: State,
    k: usize,
) -> Result<bool, ForcingError> {
    rule.is_monotone()?;
    check_pair(rule, a, b)?;
    let half = (k * rule.radius()) as i64;
    if 2 * half + 1 > 127 {
        return Err(ForcingError::WindowTooWide {
            k,
            cells: (2 * half + 1) as usize,
        });
    }
    let mut mask: u128 = 0;
    for &cell in v {
        if cell < -half || cell > half {
            return Err(ForcingError::OutOfWindow {
                cell,
                k,
                lo: -half,
                hi: half,
            });
        }
        mask |= 1 << (cell + half) as u32;
    }
    Ok(Evaluator::new(rule, a, b, k).forces(mask))
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let c = idx.len();
    let mut i = c;
    loop {
        if i == 0 {
            return false;
        }
        i -= 1;
        if idx[i] != i + n - c {
            break;
        }
    }
    idx[i] += 1;
    for j in i + 1..c {
        idx[j] = idx[j - 1] + 1;
    }
    true
}

/// Enumerates the antichain of minimal `a,b`-forcing sets at level `k`.
///
/// Candidates are generated by cardinality, then lexicographically; any
/// candidate containing an already-found minimal set is skipped, which is
/// sound because forcing is upward closed (lowering cells of the extremal
/// configuration only lowers the result, by monotonicity). Each generated
/// candidate counts against `budget`; when the budget runs out the family is
/// returned with `complete = false`. Members found are always genuinely
/// minimal because all smaller cardinalities were enumerated first.
pub fn minimal_forcing_sets(
    rule: &LocalRule,
    a: State,
    b: State,
    k: usize,
    budget: u64,
) -> Result<ForcingFamily, ForcingError> {
    rule.is_monotone()?;
    check_pair(rule, a, b)?;
    let half = k * rule.radius();
    let cells = 2 * half + 1;
    if cells > 127 {
        return Err(ForcingError::WindowTooWide { k, cells });
    }
    let mut eval = Evaluator::new(rule, a, b, k);
    let mut minimal_masks: Vec<u128> = Vec::new();
    let mut sets: Vec<Vec<i64>> = Vec::new();
    let mut generated: u64 = 0;
    let mut complete = true;

    'outer: for card in 0..=cells {
        let mut idx: Vec<usize> = (0..card).collect();
        let mut any_open = false;
        loop {
            generated += 1;
            if generated > budget {
                complete = false;
                break 'outer;
            }
            let mut mask: u128 = 0;
            for &j in &idx {
                mask |= 1 << j;
            }
            let covered = minimal_masks.iter().any(|&m| m | mask == mask);
            if !covered {
                any_open = true;
                if eval.forces(mask) {
                    minimal_masks.push(mask);
                    sets.push(
                        idx.iter()
                            .map(|&j| j as i64 - half as i64)
                            .collect::<Vec<i64>>(),
                    );
                }
            }
            if card == 0 || !next_combination(&mut idx, cells) {
                break;
            }
        }
        // Every candidate of this cardinality contained a found minimal set,
        // so every larger candidate does too.
        if !any_open && card > 0 {
            break;
        }
    }

    Ok(ForcingFamily {
        pair: (a, b),
        level: k,
        radius: rule.radius(),
        sets,
        complete,
    })
}

/// The intersection of the convex hulls of all minimal forcing sets at one
/// level. In one dimension each hull is an interval, so the intersection is
/// `[max over sets of min V, min over sets of max V]`, `None` when empty.
pub fn tau(
    rule: &LocalRule,
    a: State,
    b: State,
    k: usize,
    budget: u64,
) -> Result<TauResult, ForcingError> {
    let family = minimal_forcing_sets(rule, a, b, k, budget)?;
    let half = (k * rule.radius()) as i64;
    if family.sets.is_empty() {
        // The full window always forces (the whole dependence cone of the
        // center is then quiescent at a), so a truly empty family cannot
        // happen under complete enumeration; report the vacuous upper
        // approximation.
        debug_assert!(!family.complete);
        return Ok(TauResult {
            interval: Some((-half, half)),
            complete: family.complete,
        });
    }
    let lo = family
        .sets
        .iter()
        .map(|s| *s.first().expect("sets are non-empty"))
        .max()
        .expect("family is non-empty");
    let hi = family
        .sets
        .iter()
        .map(|s| *s.last().expect("sets are non-empty"))
        .min()
        .expect("family is non-empty");
    Ok(TauResult {
        interval: if lo <= hi { Some((lo, hi)) } else { None },
        complete: family.complete,
    })
}

/// Searches levels `1..=k_max` for the smallest one admitting forcing sets
/// `U`, `V` with `max U < min V`; such a pair proves the pair `(a,b)` is
/// shrinking. Within a level, `U` minimizes its maximum (ties: smallest
/// lexicographically) and `V` maximizes its minimum (same tie-break).
pub fn shrinking_certificate(
    rule: &LocalRule,
    a: State,
    b: State,
    k_max: usize,
    budget: u64,
) -> Result<Option<ShrinkingCertificate>, ForcingError> {
    for k in 1..=k_max {
        let family = minimal_forcing_sets(rule, a, b, k, budget)?;
        if family.sets.is_empty() {
            continue;
        }
        let u = family
            .sets
            .iter()
            .min_by(|x, y| x.last().cmp(&y.last()).then_with(|| x.cmp(y)))
            .expect("non-empty family");
        let v = family
            .sets
            .iter()
            .min_by(|x, y| y.first().cmp(&x.first()).then_with(|| x.cmp(y)))
            .expect("non-empty family");
        let u_max = *u.last().expect("forcing sets are non-empty");
        let v_min = *v.first().expect("forcing sets are non-empty");
        if u_max < v_min {
            return Ok(Some(ShrinkingCertificate {
                k,
                u: u.clone(),
                v: v.clone(),
            }));
        }
    }
    Ok(None)
}

/// Minkowski sum of two forcing sets; the sum forces at the summed levels.
pub fn sum_forcing(u: &[i64], v: &[i64]) -> Vec<i64> {
    let mut out: Vec<i64> = u
        .iter()
        .flat_map(|&x| v.iter().map(move |&y| x + y))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decrement_center_cell_forces_at_every_level() {
        let rule = LocalRule::builtin("decrement", Some(3)).unwrap();
        for k in 1..=4 {
            assert!(is_forcing(&rule, &[0], 0, 3, k).unwrap(), "k={k}");
        }
    }

    #[test]
    fn decrement_offset_cell_needs_level_three() {
        let rule = LocalRule::builtin("decrement", Some(3)).unwrap();
        assert!(!is_forcing(&rule, &[1], 0, 3, 2).unwrap());
        assert!(is_forcing(&rule, &[1], 0, 3, 3).unwrap());
    }

    #[test]
    fn empty_set_never_forces() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        assert!(!is_forcing(&rule, &[], 0, 1, 1).unwrap());
        assert!(!is_forcing(&rule, &[], 0, 1, 3).unwrap());
    }

    #[test]
    fn out_of_window_cell_is_an_error() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        assert!(matches!(
            is_forcing(&rule, &[2], 0, 1, 1),
            Err(ForcingError::OutOfWindow { cell: 2, .. })
        ));
    }

    #[test]
    fn min2_level_one_family() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let family = minimal_forcing_sets(&rule, 0, 1, 1, DEFAULT_SUBSET_BUDGET).unwrap();
        assert!(family.complete());
        assert_eq!(family.sets(), &[vec![0], vec![1]]);
        let t = tau(&rule, 0, 1, 1, DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(t.interval, None);
        assert!(t.complete);
    }

    #[test]
    fn decrement_families_and_tau() {
        let rule = LocalRule::builtin("decrement", Some(3)).unwrap();
        for k in 1..=2 {
            let family = minimal_forcing_sets(&rule, 0, 3, k, DEFAULT_SUBSET_BUDGET).unwrap();
            assert_eq!(family.sets(), &[vec![0]], "k={k}");
            let t = tau(&rule, 0, 3, k, DEFAULT_SUBSET_BUDGET).unwrap();
            assert_eq!(t.interval, Some((0, 0)), "k={k}");
        }
        let family = minimal_forcing_sets(&rule, 0, 3, 3, DEFAULT_SUBSET_BUDGET).unwrap();
        assert!(family.sets().contains(&vec![0]));
        assert!(family.sets().contains(&vec![1]));
        let t = tau(&rule, 0, 3, 3, DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(t.interval, None);
    }

    #[test]
    fn certificates() {
        let min2 = LocalRule::builtin("min2", None).unwrap();
        let cert = shrinking_certificate(&min2, 0, 1, 4, DEFAULT_SUBSET_BUDGET)
            .unwrap()
            .unwrap();
        assert_eq!(
            (cert.k, cert.u.clone(), cert.v.clone()),
            (1, vec![0], vec![1])
        );
        assert!(cert.validate(&min2, 0, 1).unwrap());

        let decrement = LocalRule::builtin("decrement", Some(3)).unwrap();
        let cert = shrinking_certificate(&decrement, 0, 3, 4, DEFAULT_SUBSET_BUDGET)
            .unwrap()
            .unwrap();
        assert_eq!(
            (cert.k, cert.u.clone(), cert.v.clone()),
            (3, vec![0], vec![1])
        );

        let galperin3 = LocalRule::builtin("galperin3", None).unwrap();
        assert_eq!(
            shrinking_certificate(&galperin3, 0, 2, 6, DEFAULT_SUBSET_BUDGET).unwrap(),
            None
        );
    }

    #[test]
    fn family_members_are_an_antichain_and_upward_closed() {
        let rule = LocalRule::builtin("galperin3", None).unwrap();
        let family = minimal_forcing_sets(&rule, 0, 1, 2, DEFAULT_SUBSET_BUDGET).unwrap();
        assert!(family.complete());
        let sets = family.sets();
        assert!(!sets.is_empty());
        for (i, s) in sets.iter().enumerate() {
            for (j, t) in sets.iter().enumerate() {
                if i != j {
                    assert!(!s.iter().all(|x| t.contains(x)), "{s:?} ⊆ {t:?}");
                }
            }
            // Supersets within the window still force.
            let mut sup = s.clone();
            for extra in [-2i64, 2] {
                if !sup.contains(&extra) {
                    sup.push(extra);
                }
            }
            sup.sort_unstable();
            assert!(is_forcing(&rule, &sup, 0, 1, 2).unwrap());
        }
    }

    #[test]
    fn minkowski_sum_forces_at_summed_level() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let sum = sum_forcing(&[0], &[1]);
        assert_eq!(sum, vec![1]);
        assert!(is_forcing(&rule, &sum, 0, 1, 2).unwrap());
        let decrement = LocalRule::builtin("decrement", Some(3)).unwrap();
        let sum3 = sum_forcing(&sum_forcing(&[0], &[0]), &[0]);
        assert_eq!(sum3, vec![0]);
        assert!(is_forcing(&decrement, &sum3, 0, 3, 3).unwrap());
    }
}
