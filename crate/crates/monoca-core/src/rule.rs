//! Local rules and finite-window configurations.
//!
//! A [`LocalRule`] is a dense lookup table over all neighborhood words of
//! length `2r + 1` on the alphabet `{0..m}`, with the leftmost cell most
//! significant in the index. A [`Configuration`] is a finite window of cells
//! together with two constant boundary states; when the boundary states are
//! quiescent, evolving the window equals evolving the corresponding
//! infinite line, restricted to the window.

use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Cell state. Alphabets are small intervals `{0..m}` with `m ≤ 255`.
pub type State = u8;

/// Default cap on dense table sizes (entries), used by [`LocalRule::compose_power`].
pub const DEFAULT_TABLE_CAP: usize = 1 << 24;

/// Errors produced when constructing or transforming rules.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    /// Alphabet has fewer than two states or more than 256.
    #[error("state count {0} out of supported range 2..=256")]
    BadStateCount(usize),
    /// Table length does not equal `(m+1)^(2r+1)`.
    #[error("table has {got} entries, expected {expected}")]
    BadTableLength {
        /// Entries provided.
        got: usize,
        /// Entries required for this alphabet and radius.
        expected: usize,
    },
    /// A table entry is not a valid state.
    #[error("table entry {entry} at index {index} exceeds maximum state {max}")]
    BadTableEntry {
        /// Offending table index.
        index: usize,
        /// Offending value.
        entry: State,
        /// Largest valid state.
        max: State,
    },
    /// The requested dense table would exceed the size cap.
    #[error("dense table of {required} entries exceeds cap {cap}")]
    TableCapExceeded {
        /// Entries the operation would allocate.
        required: usize,
        /// Configured cap.
        cap: usize,
    },
    /// A state-interval restriction is not closed under the rule.
    #[error("restriction to [{lo},{hi}] not closed: F{neighborhood:?} = {image}")]
    NotClosed {
        /// Lower end of the interval.
        lo: State,
        /// Upper end of the interval.
        hi: State,
        /// Witness neighborhood drawn from the interval.
        neighborhood: Vec<State>,
        /// Its image outside the interval.
        image: State,
    },
    /// Unknown builtin name.
    #[error("unknown builtin rule `{0}`")]
    UnknownBuiltin(String),
    /// Builtin parameter missing or invalid.
    #[error("builtin `{name}`: {message}")]
    BadBuiltinParam {
        /// Builtin name.
        name: String,
        /// Explanation.
        message: String,
    },
    /// Rule file text could not be parsed.
    #[error("rule file, line {line}: {message}")]
    Parse {
        /// 1-based line number.
        line: usize,
        /// Explanation.
        message: String,
    },
    /// An operation required a quiescent state and got a non-quiescent one.
    #[error("state {0} is not quiescent for this rule")]
    NotQuiescent(State),
    /// An operation required a monotone rule.
    #[error("rule is not monotone: F{lower:?} = {lower_image} > F{upper:?} = {upper_image}")]
    NotMonotone {
        /// Smaller neighborhood (cellwise).
        lower: Vec<State>,
        /// Its image.
        lower_image: State,
        /// Larger neighborhood (differs in one cell by +1).
        upper: Vec<State>,
        /// Its image.
        upper_image: State,
    },
}

/// A dense local rule on the alphabet `{0..m}` with a fixed radius.
///
/// The table is indexed by the neighborhood word `(x_{-r}, …, x_r)` read as a
/// base-`(m+1)` number with the leftmost cell most significant.
#[derive(Clone, PartialEq, Eq)]
pub struct LocalRule {
    state_count: usize,
    radius: usize,
    table: Arc<[State]>,
}

impl fmt::Debug for LocalRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalRule")
            .field("state_count", &self.state_count)
            .field("radius", &self.radius)
            .field("table_len", &self.table.len())
            .finish()
    }
}

fn checked_table_len(state_count: usize, radius: usize) -> Option<usize> {
    let mut len: usize = 1;
    for _ in 0..2 * radius + 1 {
        len = len.checked_mul(state_count)?;
    }
    Some(len)
}

impl LocalRule {
    /// Builds a rule from an explicit table, validating all invariants.
    pub fn new(state_count: usize, radius: usize, table: Vec<State>) -> Result<Self, RuleError> {
        if !(2..=256).contains(&state_count) {
            return Err(RuleError::BadStateCount(state_count));
        }
        let expected =
            checked_table_len(state_count, radius).ok_or(RuleError::TableCapExceeded {
                required: usize::MAX,
                cap: DEFAULT_TABLE_CAP,
            })?;
        if table.len() != expected {
            return Err(RuleError::BadTableLength {
                got: table.len(),
                expected,
            });
        }
        let max = (state_count - 1) as State;
        for (index, &entry) in table.iter().enumerate() {
            if entry > max {
                return Err(RuleError::BadTableEntry { index, entry, max });
            }
        }
        Ok(Self {
            state_count,
            radius,
            table: table.into(),
        })
    }

    /// Builds a rule by tabulating a function of the neighborhood word.
    ///
    /// The function receives the word `(x_{-r}, …, x_r)`.
    pub fn from_fn(
        state_count: usize,
        radius: usize,
        f: impl Fn(&[State]) -> State,
    ) -> Result<Self, RuleError> {
        if !(2..=256).contains(&state_count) {
            return Err(RuleError::BadStateCount(state_count));
        }
        let width = 2 * radius + 1;
        let len = checked_table_len(state_count, radius).ok_or(RuleError::TableCapExceeded {
            required: usize::MAX,
            cap: DEFAULT_TABLE_CAP,
        })?;
        let mut word = vec![0 as State; width];
        let mut table = Vec::with_capacity(len);
        loop {
            table.push(f(&word));
            // Advance the word as a base-(m+1) counter, rightmost digit fastest.
            let mut pos = width;
            loop {
                if pos == 0 {
                    return LocalRule::new(state_count, radius, table);
                }
                pos -= 1;
                if (word[pos] as usize) + 1 < state_count {
                    word[pos] += 1;
                    break;
                }
                word[pos] = 0;
            }
        }
    }

    /// Number of states `m + 1`.
    pub fn state_count(&self) -> usize {
        self.state_count
    }

    /// Largest state `m`.
    pub fn max_state(&self) -> State {
        (self.state_count - 1) as State
    }

    /// Neighborhood radius `r`.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Neighborhood width `2r + 1`.
    pub fn width(&self) -> usize {
        2 * self.radius + 1
    }

    /// Raw table access (lexicographic neighborhood order).
    pub fn table(&self) -> &[State] {
        &self.table
    }

    /// Applies the rule to one neighborhood word of length `2r + 1`.
    ///
    /// # Panics
    /// Panics if the slice length differs from [`Self::width`] or a state is
    /// out of range.
    pub fn apply_local(&self, neighborhood: &[State]) -> State {
        assert_eq!(neighborhood.len(), self.width(), "neighborhood width");
        let mut index = 0usize;
        for &s in neighborhood {
            debug_assert!((s as usize) < self.state_count);
            index = index * self.state_count + s as usize;
        }
        self.table[index]
    }

    /// Decodes a table index back into its neighborhood word.
    pub fn word_of_index(&self, mut index: usize) -> Vec<State> {
        let mut word = vec![0 as State; self.width()];
        for slot in word.iter_mut().rev() {
            *slot = (index % self.state_count) as State;
            index /= self.state_count;
        }
        word
    }

    /// Checks monotonicity: incrementing any single cell of a neighborhood
    /// never decreases the image. Single-coordinate increments suffice
    /// because any cellwise-larger word is reached from a smaller one by a
    /// chain of such increments, and `≤` is transitive along the chain.
    ///
    /// Returns a witness pair on failure.
    pub fn is_monotone(&self) -> Result<(), RuleError> {
        let width = self.width();
        let m = self.state_count;
        // Stride of cell j in the index: m^(width-1-j).
        let mut strides = vec![1usize; width];
        for j in (0..width - 1).rev() {
            strides[j] = strides[j + 1] * m;
        }
        for index in 0..self.table.len() {
            let base = self.table[index];
            let mut rem = index;
            for &stride in &strides {
                let digit = rem / stride % m;
                rem %= stride;
                if digit + 1 < m {
                    let upper_index = index + stride;
                    let upper = self.table[upper_index];
                    if upper < base {
                        return Err(RuleError::NotMonotone {
                            lower: self.word_of_index(index),
                            lower_image: base,
                            upper: self.word_of_index(upper_index),
                            upper_image: upper,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// States `a` with `F(a,…,a) = a`, in increasing order.
    pub fn quiescent_states(&self) -> Vec<State> {
        (0..self.state_count)
            .map(|s| s as State)
            .filter(|&s| self.is_quiescent(s))
            .collect()
    }

    /// Whether `F(a,…,a) = a`.
    pub fn is_quiescent(&self, a: State) -> bool {
        let word = vec![a; self.width()];
        self.apply_local(&word) == a
    }

    /// The left-right mirror: reads its neighborhood in reversed order.
    ///
    /// Evolving the reflected rule equals evolving the original on spatially
    /// reversed configurations.
    pub fn reflect(&self) -> LocalRule {
        LocalRule::from_fn(self.state_count, self.radius, |word| {
            let reversed: Vec<State> = word.iter().rev().copied().collect();
            self.apply_local(&reversed)
        })
        .expect("reflection preserves table validity")
    }

    /// Conjugation by the state flip `a ↦ m − a`.
    ///
    /// Monotonicity is preserved: the flip reverses the order on both sides.
    pub fn invert(&self) -> LocalRule {
        let m = self.max_state();
        LocalRule::from_fn(self.state_count, self.radius, |word| {
            let flipped: Vec<State> = word.iter().map(|&s| m - s).collect();
            m - self.apply_local(&flipped)
        })
        .expect("inversion preserves table validity")
    }

    /// Restriction to a state interval `[lo, hi]`, relabeled to `{0..hi−lo}`.
    ///
    /// Fails unless every neighborhood drawn from the interval maps back into
    /// the interval.
    pub fn restrict(&self, lo: State, hi: State) -> Result<LocalRule, RuleError> {
        assert!(lo < hi && hi <= self.max_state(), "invalid interval");
        let sub_count = (hi - lo + 1) as usize;
        let width = self.width();
        // Pre-scan for closure so `from_fn` cannot observe a violation.
        let mut word = vec![lo; width];
        loop {
            let image = self.apply_local(&word);
            if image < lo || image > hi {
                return Err(RuleError::NotClosed {
                    lo,
                    hi,
                    neighborhood: word,
                    image,
                });
            }
            let mut pos = width;
            loop {
                if pos == 0 {
                    return LocalRule::from_fn(sub_count, self.radius, |sub_word| {
                        let full: Vec<State> = sub_word.iter().map(|&s| s + lo).collect();
                        self.apply_local(&full) - lo
                    });
                }
                pos -= 1;
                if word[pos] < hi {
                    word[pos] += 1;
                    break;
                }
                word[pos] = lo;
            }
        }
    }

    /// The `p`-fold composition as a dense rule of radius `p·r`.
    ///
    /// Fails when the dense table would exceed `table_cap` entries; callers
    /// can then fall back to iterated application.
    pub fn compose_power(&self, p: usize, table_cap: usize) -> Result<LocalRule, RuleError> {
        assert!(p >= 1, "power must be positive");
        let new_radius = p * self.radius;
        let required = checked_table_len(self.state_count, new_radius)
            .filter(|&len| len <= table_cap)
            .ok_or(RuleError::TableCapExceeded {
                required: usize::MAX,
                cap: table_cap,
            })?;
        let _ = required;
        let r = self.radius;
        LocalRule::from_fn(self.state_count, new_radius, |word| {
            let mut row = word.to_vec();
            for _ in 0..p {
                let next: Vec<State> = (0..row.len() - 2 * r)
                    .map(|i| self.apply_local(&row[i..i + 2 * r + 1]))
                    .collect();
                row = next;
            }
            debug_assert_eq!(row.len(), 1);
            row[0]
        })
    }

    /// Looks up a builtin rule by name, with an optional numeric parameter.
    ///
    /// Catalogue: `galperin3`, `min2`, `bidir3`, `wrapped4`, and
    /// `decrement` (which requires the maximum state as its parameter).
    pub fn builtin(name: &str, param: Option<u32>) -> Result<LocalRule, RuleError> {
        let reject_param = |rule: Result<LocalRule, RuleError>| {
            if param.is_some() {
                Err(RuleError::BadBuiltinParam {
                    name: name.to_string(),
                    message: "takes no parameter".to_string(),
                })
            } else {
                rule
            }
        };
        match name {
            "galperin3" => reject_param(LocalRule::from_fn(3, 1, |w| galperin3(w[0], w[1], w[2]))),
            "min2" => reject_param(LocalRule::from_fn(2, 1, |w| w[1].min(w[2]))),
            "bidir3" => reject_param(LocalRule::from_fn(3, 2, |w| {
                bidir3(w[0], w[1], w[2], w[3], w[4])
            })),
            "wrapped4" => reject_param(LocalRule::from_fn(4, 1, |w| wrapped4(w[0], w[1], w[2]))),
            "decrement" => {
                let m = param.ok_or_else(|| RuleError::BadBuiltinParam {
                    name: name.to_string(),
                    message: "requires the maximum state, e.g. `decrement 3`".to_string(),
                })?;
                if !(1..=255).contains(&m) {
                    return Err(RuleError::BadBuiltinParam {
                        name: name.to_string(),
                        message: format!("maximum state {m} out of range 1..=255"),
                    });
                }
                LocalRule::from_fn(m as usize + 1, 1, |w| {
                    if w[1] > 0 && w[2] == 0 {
                        w[1] - 1
                    } else {
                        w[1]
                    }
                })
            }
            _ => Err(RuleError::UnknownBuiltin(name.to_string())),
        }
    }
}

/// Ternary radius-1 rule with one-directional erosion of 2-islands.
///
/// The four cases are mutually exclusive.
fn galperin3(a: State, b: State, c: State) -> State {
    if a == 0 && b <= 1 && c <= 1 {
        0
    } else if b == 2 && c <= 1 {
        1
    } else if c == 2 && a + b >= 2 {
        2
    } else {
        b
    }
}

/// Ternary radius-2 rule that erodes islands in both directions; invariant
/// under the composition of state flip and spatial reflection.
fn bidir3(a: State, b: State, c: State, d: State, e: State) -> State {
    if a.max(b).max(c).max(d) <= 1 && e == 0 {
        0
    } else if (c == 0 && d.min(e) >= 1) || (a.max(b) <= 1 && c == 2) {
        1
    } else if a == 2 && b.min(c).min(d).min(e) >= 1 {
        2
    } else {
        c
    }
}

/// Four-state radius-1 rule: behaves like [`galperin3`] on `{0,1,2}` (with
/// state 3 clamped to 2 on the flanks) and keeps a 3 only inside solid
/// 3-blocks.
fn wrapped4(a: State, b: State, c: State) -> State {
    if b <= 2 {
        galperin3(a.min(2), b.min(2), c.min(2))
    } else if a == 3 && c == 3 {
        3
    } else {
        b.min(2)
    }
}

/// A finite window of cells with constant boundary states on both sides.
///
/// Cell `i` holds `cells[i - lo]` for `lo ≤ i ≤ hi`, `left` for `i < lo`, and
/// `right` for `i > hi`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Configuration {
    lo: i64,
    cells: Vec<State>,
    left: State,
    right: State,
}

impl Configuration {
    /// Builds a configuration from explicit parts.
    pub fn new(lo: i64, cells: Vec<State>, left: State, right: State) -> Self {
        assert!(!cells.is_empty(), "window must be non-empty");
        Self {
            lo,
            cells,
            left,
            right,
        }
    }

    /// Constant configuration `a` everywhere on the window, boundaries `a`.
    pub fn constant(a: State, lo: i64, hi: i64) -> Self {
        assert!(lo <= hi);
        Self::new(lo, vec![a; (hi - lo + 1) as usize], a, a)
    }

    /// Two-sided step: state `a` at all `i < 0`, state `b` at all `i ≥ 0`.
    pub fn step(a: State, b: State, lo: i64, hi: i64) -> Self {
        assert!(lo < 0 && hi >= 0);
        let cells = (lo..=hi).map(|i| if i < 0 { a } else { b }).collect();
        Self::new(lo, cells, a, b)
    }

    /// Island of state `omega` on `[-n, n-1]` in a zero background.
    pub fn island(omega: State, n: i64, lo: i64, hi: i64) -> Self {
        assert!(n >= 1 && lo <= -n && hi >= n - 1);
        let cells = (lo..=hi)
            .map(|i| if (-n..n).contains(&i) { omega } else { 0 })
            .collect();
        Self::new(lo, cells, 0, 0)
    }

    /// Window lower end.
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Window upper end (inclusive).
    pub fn hi(&self) -> i64 {
        self.lo + self.cells.len() as i64 - 1
    }

    /// Left boundary state.
    pub fn left_boundary(&self) -> State {
        self.left
    }

    /// Right boundary state.
    pub fn right_boundary(&self) -> State {
        self.right
    }

    /// Cells of the window in order.
    pub fn cells(&self) -> &[State] {
        &self.cells
    }

    /// State at coordinate `i`, applying the boundary convention.
    pub fn get(&self, i: i64) -> State {
        if i < self.lo {
            self.left
        } else if i > self.hi() {
            self.right
        } else {
            self.cells[(i - self.lo) as usize]
        }
    }

    /// One evolution step on the same window.
    ///
    /// Requires both boundary states to be quiescent, which makes the
    /// constant-outside-window convention exact: the result equals the
    /// infinite-line image restricted to the window.
    pub fn apply(&self, rule: &LocalRule) -> Result<Configuration, RuleError> {
        for side in [self.left, self.right] {
            if !rule.is_quiescent(side) {
                return Err(RuleError::NotQuiescent(side));
            }
        }
        let r = rule.radius() as i64;
        let width = rule.width();
        let mut padded = Vec::with_capacity(self.cells.len() + 2 * r as usize);
        padded.extend(std::iter::repeat_n(self.left, r as usize));
        padded.extend_from_slice(&self.cells);
        padded.extend(std::iter::repeat_n(self.right, r as usize));
        let cells: Vec<State> = (0..self.cells.len())
            .map(|i| rule.apply_local(&padded[i..i + width]))
            .collect();
        Ok(Configuration {
            lo: self.lo,
            cells,
            left: self.left,
            right: self.right,
        })
    }

    /// `n`-fold [`Self::apply`].
    pub fn apply_power(&self, rule: &LocalRule, n: usize) -> Result<Configuration, RuleError> {
        let mut cfg = self.clone();
        for _ in 0..n {
            cfg = cfg.apply(rule)?;
        }
        Ok(cfg)
    }
}

/// Parses rule-file text (see `docs/formats.md` for the grammar).
///
/// ```text
/// ca-rule v1
/// states 3
/// radius 1
/// builtin galperin3
/// ```
pub fn parse_rule(text: &str) -> Result<LocalRule, RuleError> {
    let mut states: Option<usize> = None;
    let mut radius: Option<usize> = None;
    let mut table: Option<Vec<State>> = None;
    let mut builtin: Option<(String, Option<u32>)> = None;
    let mut saw_header = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| RuleError::Parse {
            line: line_no,
            message,
        };
        if !saw_header {
            if line != "ca-rule v1" {
                return Err(err(format!("expected header `ca-rule v1`, found `{line}`")));
            }
            saw_header = true;
            continue;
        }
        let mut parts = line.split_whitespace();
        let keyword = parts.next().expect("non-empty line has a first token");
        match keyword {
            "states" => {
                let value = parts
                    .next()
                    .ok_or_else(|| err("`states` needs a value".into()))?;
                states = Some(
                    value
                        .parse()
                        .map_err(|_| err(format!("invalid state count `{value}`")))?,
                );
            }
            "radius" => {
                let value = parts
                    .next()
                    .ok_or_else(|| err("`radius` needs a value".into()))?;
                radius = Some(
                    value
                        .parse()
                        .map_err(|_| err(format!("invalid radius `{value}`")))?,
                );
            }
            "table" => {
                let mut entries = Vec::new();
                for token in parts.by_ref() {
                    let entry: u16 = token
                        .parse()
                        .map_err(|_| err(format!("invalid table entry `{token}`")))?;
                    if entry > 255 {
                        return Err(err(format!("table entry {entry} exceeds 255")));
                    }
                    entries.push(entry as State);
                }
                table = Some(entries);
            }
            "builtin" => {
                let name = parts
                    .next()
                    .ok_or_else(|| err("`builtin` needs a name".into()))?;
                let param = match parts.next() {
                    Some(token) => Some(
                        token
                            .parse()
                            .map_err(|_| err(format!("invalid builtin parameter `{token}`")))?,
                    ),
                    None => None,
                };
                builtin = Some((name.to_string(), param));
            }
            _ => return Err(err(format!("unknown keyword `{keyword}`"))),
        }
        if let Some(extra) = parts.next() {
            return Err(err(format!("unexpected trailing token `{extra}`")));
        }
    }

    if !saw_header {
        return Err(RuleError::Parse {
            line: 1,
            message: "missing header `ca-rule v1`".into(),
        });
    }

    let rule = match (builtin, table) {
        (Some(_), Some(_)) => {
            return Err(RuleError::Parse {
                line: 0,
                message: "both `builtin` and `table` present".into(),
            })
        }
        (Some((name, param)), None) => LocalRule::builtin(&name, param)?,
        (None, Some(entries)) => {
            let states = states.ok_or(RuleError::Parse {
                line: 0,
                message: "`states` required with an explicit table".into(),
            })?;
            let radius = radius.ok_or(RuleError::Parse {
                line: 0,
                message: "`radius` required with an explicit table".into(),
            })?;
            LocalRule::new(states, radius, entries)?
        }
        (None, None) => {
            return Err(RuleError::Parse {
                line: 0,
                message: "need either `builtin` or `table`".into(),
            })
        }
    };

    // When states/radius accompany a builtin, they must agree with it.
    if let Some(s) = states {
        if s != rule.state_count() {
            return Err(RuleError::Parse {
                line: 0,
                message: format!(
                    "declared states {s} disagree with rule's {}",
                    rule.state_count()
                ),
            });
        }
    }
    if let Some(r) = radius {
        if r != rule.radius() {
            return Err(RuleError::Parse {
                line: 0,
                message: format!(
                    "declared radius {r} disagrees with rule's {}",
                    rule.radius()
                ),
            });
        }
    }
    Ok(rule)
}

/// Renders a rule as rule-file text that [`parse_rule`] round-trips.
pub fn format_rule(rule: &LocalRule) -> String {
    use fmt::Write;
    let mut out = String::new();
    writeln!(out, "ca-rule v1").unwrap();
    writeln!(out, "states {}", rule.state_count()).unwrap();
    writeln!(out, "radius {}", rule.radius()).unwrap();
    write!(out, "table").unwrap();
    for &entry in rule.table() {
        write!(out, " {entry}").unwrap();
    }
    writeln!(out).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tables_are_monotone() {
        for (name, param) in [
            ("galperin3", None),
            ("min2", None),
            ("bidir3", None),
            ("wrapped4", None),
            ("decrement", Some(3)),
            ("decrement", Some(7)),
        ] {
            let rule = LocalRule::builtin(name, param).unwrap();
            assert!(rule.is_monotone().is_ok(), "{name} should be monotone");
        }
    }

    #[test]
    fn galperin3_spot_values() {
        let rule = LocalRule::builtin("galperin3", None).unwrap();
        assert_eq!(rule.apply_local(&[0, 1, 1]), 0);
        assert_eq!(rule.apply_local(&[2, 2, 0]), 1);
        assert_eq!(rule.apply_local(&[0, 2, 2]), 2);
        assert_eq!(rule.apply_local(&[1, 1, 2]), 2);
        assert_eq!(rule.apply_local(&[0, 0, 2]), 0);
        assert_eq!(rule.apply_local(&[1, 0, 0]), 0);
        assert_eq!(rule.apply_local(&[2, 1, 0]), 1);
    }

    #[test]
    fn bidir3_symmetry_under_flip_reflect() {
        let rule = LocalRule::builtin("bidir3", None).unwrap();
        let transformed = rule.invert().reflect();
        assert_eq!(rule, transformed);
    }

    #[test]
    fn quiescent_sets() {
        let galperin3 = LocalRule::builtin("galperin3", None).unwrap();
        assert_eq!(galperin3.quiescent_states(), vec![0, 1, 2]);
        let decrement = LocalRule::builtin("decrement", Some(3)).unwrap();
        assert_eq!(decrement.quiescent_states(), vec![0, 1, 2, 3]);
        let min2 = LocalRule::builtin("min2", None).unwrap();
        assert_eq!(min2.quiescent_states(), vec![0, 1]);
    }

    #[test]
    fn reflect_is_involutive_and_mirrors_simulation() {
        let rule = LocalRule::builtin("galperin3", None).unwrap();
        assert_eq!(rule.reflect().reflect(), rule);
        // Evolving the reflection equals reflecting, evolving, reflecting back.
        let cfg = Configuration::new(-3, vec![0, 1, 2, 2, 1, 0, 2], 0, 0);
        let reversed = Configuration::new(
            -3,
            cfg.cells().iter().rev().copied().collect(),
            cfg.right_boundary(),
            cfg.left_boundary(),
        );
        let a = cfg.apply(&rule.reflect()).unwrap();
        let b = reversed.apply(&rule).unwrap();
        let b_reversed: Vec<State> = b.cells().iter().rev().copied().collect();
        assert_eq!(a.cells(), &b_reversed[..]);
    }

    #[test]
    fn invert_is_involutive_and_maps_min_to_max() {
        let min2 = LocalRule::builtin("min2", None).unwrap();
        assert_eq!(min2.invert().invert(), min2);
        let max2 = min2.invert();
        assert_eq!(max2.apply_local(&[0, 0, 1]), 1);
        assert_eq!(max2.apply_local(&[1, 0, 0]), 0);
        assert_eq!(max2.apply_local(&[0, 1, 0]), 1);
    }

    #[test]
    fn restrict_full_range_is_identity_transform() {
        let rule = LocalRule::builtin("wrapped4", None).unwrap();
        let same = rule.restrict(0, 3).unwrap();
        assert_eq!(rule, same);
    }

    #[test]
    fn restrict_closure_violation_reports_witness() {
        // A radius-0 rule whose image of 1 escapes the interval [0,1].
        let rule = LocalRule::from_fn(3, 0, |w| match w[0] {
            0 => 1,
            _ => 2,
        })
        .unwrap();
        match rule.restrict(0, 1) {
            Err(RuleError::NotClosed {
                neighborhood,
                image,
                ..
            }) => {
                assert_eq!(neighborhood, vec![1]);
                assert_eq!(image, 2);
            }
            other => panic!("expected closure violation, got {other:?}"),
        }
    }

    #[test]
    fn compose_power_matches_iterated_apply() {
        let rule = LocalRule::builtin("galperin3", None).unwrap();
        let squared = rule.compose_power(2, DEFAULT_TABLE_CAP).unwrap();
        assert_eq!(squared.radius(), 2);
        assert_eq!(squared.table().len(), 3usize.pow(5));
        // Deterministic pseudo-random windows.
        let mut state = 0x9E3779B97F4A7C15u64;
        for _ in 0..200 {
            let cells: Vec<State> = (0..9)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    ((state >> 33) % 3) as State
                })
                .collect();
            let cfg = Configuration::new(-4, cells, 0, 0);
            let direct = cfg.apply_power(&rule, 2).unwrap();
            let via_power = cfg.apply(&squared).unwrap();
            assert_eq!(direct.cells(), via_power.cells());
        }
    }

    #[test]
    fn island_erosion_two_phases() {
        let rule = LocalRule::builtin("galperin3", None).unwrap();
        // The island spans 2n cells, so each erosion phase takes 2n steps.
        let n = 5i64;
        let cfg = Configuration::island(2, n, -12, 12);
        let mut cur = cfg;
        // Phase 1: the 2-block shrinks from the right while 1s pile up.
        for t in 1..=2 * n {
            cur = cur.apply(&rule).unwrap();
            for i in -12..=12i64 {
                let expected = if (-n..n - t).contains(&i) {
                    2
                } else if (n - t..n).contains(&i) {
                    1
                } else {
                    0
                };
                assert_eq!(cur.get(i), expected, "t={t} i={i}");
            }
        }
        // Phase 2: the 1-block erodes from the left.
        for s in 1..=2 * n {
            cur = cur.apply(&rule).unwrap();
            for i in -12..=12i64 {
                let expected = if (-n + s..n).contains(&i) { 1 } else { 0 };
                assert_eq!(cur.get(i), expected, "s={s} i={i}");
            }
        }
        assert!(cur.cells().iter().all(|&c| c == 0));
    }

    #[test]
    fn parse_format_round_trip() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let text = format_rule(&rule);
        let parsed = parse_rule(&text).unwrap();
        assert_eq!(rule, parsed);
    }

    #[test]
    fn parse_builtin_with_comment_and_validation() {
        let text = "ca-rule v1\n# a comment\nstates 4 # inline\nradius 1\nbuiltin decrement 3\n";
        let rule = parse_rule(text).unwrap();
        assert_eq!(rule.state_count(), 4);
        let bad = "ca-rule v1\nstates 5\nbuiltin decrement 3\n";
        assert!(parse_rule(bad).is_err());
    }

    #[test]
    fn parse_identity_table() {
        let rule = parse_rule("ca-rule v1\nstates 2\nradius 0\ntable 0 1\n").unwrap();
        assert_eq!(rule.radius(), 0);
        assert_eq!(rule.apply_local(&[0]), 0);
        assert_eq!(rule.apply_local(&[1]), 1);
    }

    #[test]
    fn apply_requires_quiescent_boundary() {
        // For decrement(3), every state is quiescent, so craft a rule where 1
        // is not: the always-zero rule.
        let zero = LocalRule::from_fn(2, 1, |_| 0).unwrap();
        let cfg = Configuration::new(0, vec![0, 0], 1, 0);
        assert!(matches!(cfg.apply(&zero), Err(RuleError::NotQuiescent(1))));
    }
}
