//! Exact planar geometry for space-time polygons.
//!
//! Every polygon in this module is represented by its cyclic border list: a
//! sequence of lattice points whose consecutive segments (including the wrap
//! from last to first) trace the border counterclockwise.  The enclosed
//! region is the set of points with nonzero winding number, together with the
//! border itself.  Degenerate cycles are meaningful: a one-point cycle is a
//! single lattice cell, a two-point cycle is a segment traversed out and
//! back.
//!
//! All border segments connect adjacent or equal time rows (the vertical
//! component of every edge is -1, 0, or +1), so the region decomposes into
//! per-row interval sets and per-band trapezoid sets with integer corners.
//! Every predicate below works on that decomposition or on exact rational
//! coordinates; no floating point is used anywhere.

use num_rational::Ratio;
use std::collections::{BTreeMap, BTreeSet};

/// Exact scalar used for in-band sections and arrangement vertices.
pub(crate) type Rat = Ratio<i128>;

/// Lattice point `(i, t)`: spatial coordinate first, time second.
pub(crate) type Pt = (i64, i64);

/// Rational point used for arrangement vertices and interior probes.
pub(crate) type RPt = (Rat, Rat);

fn rat(v: i64) -> Rat {
    Rat::from_integer(i128::from(v))
}

fn rpt(p: Pt) -> RPt {
    (rat(p.0), rat(p.1))
}

/// Sign of the cross product `(b - a) x (c - a)`.
fn orient(a: RPt, b: RPt, c: RPt) -> i32 {
    let v = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    match v.cmp(&Rat::from_integer(0)) {
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
        std::cmp::Ordering::Greater => 1,
    }
}

fn min_max<T: Ord + Copy>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Does the closed segment `a..b` contain `p`, assuming `p` is collinear with it?
fn collinear_on(a: RPt, b: RPt, p: RPt) -> bool {
    let (lo_x, hi_x) = if a.0 <= b.0 { (a.0, b.0) } else { (b.0, a.0) };
    let (lo_y, hi_y) = if a.1 <= b.1 { (a.1, b.1) } else { (b.1, a.1) };
    lo_x <= p.0 && p.0 <= hi_x && lo_y <= p.1 && p.1 <= hi_y
}

/// Does the closed segment `a..b` contain point `p`?
pub(crate) fn segment_contains(a: RPt, b: RPt, p: RPt) -> bool {
    orient(a, b, p) == 0 && collinear_on(a, b, p)
}

/// Do closed segments `a..b` and `c..d` share at least one point?
pub(crate) fn segments_touch(a: RPt, b: RPt, c: RPt, d: RPt) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true; // proper crossing
    }
    // Every remaining contact involves an endpoint on the other segment.
    segment_contains(a, b, c)
        || segment_contains(a, b, d)
        || segment_contains(c, d, a)
        || segment_contains(c, d, b)
}

/// Do closed segments cross transversally (shared point interior to both)?
pub(crate) fn segments_cross_properly(a: RPt, b: RPt, c: RPt, d: RPt) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0 && o3 * o4 < 0
}

/// All intersection points of two closed segments (0, 1, or the 2 endpoints of
/// a collinear overlap).
pub(crate) fn segment_intersections(a: RPt, b: RPt, c: RPt, d: RPt) -> Vec<RPt> {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 == 0 && o2 == 0 {
        // Collinear: the overlap is an interval on the shared line.
        let mut pts: Vec<RPt> = Vec::new();
        for p in [a, b] {
            if collinear_on(c, d, p) {
                pts.push(p);
            }
        }
        for p in [c, d] {
            if collinear_on(a, b, p) {
                pts.push(p);
            }
        }
        pts.sort();
        pts.dedup();
        return pts;
    }
    if o1 * o2 <= 0 && o3 * o4 <= 0 {
        // Single intersection point: solve a + s(b-a) = c + u(d-c).
        let r = (b.0 - a.0, b.1 - a.1);
        let s = (d.0 - c.0, d.1 - c.1);
        let denom = r.0 * s.1 - r.1 * s.0;
        if denom == Rat::from_integer(0) {
            // One segment degenerate; the orientation tests already confirmed
            // contact, so return whichever endpoint lies on the other segment.
            for p in [a, b] {
                if segment_contains(c, d, p) {
                    return vec![p];
                }
            }
            for p in [c, d] {
                if segment_contains(a, b, p) {
                    return vec![p];
                }
            }
            return Vec::new();
        }
        let tnum = (c.0 - a.0) * s.1 - (c.1 - a.1) * s.0;
        let t = tnum / denom;
        let zero = Rat::from_integer(0);
        let one = Rat::from_integer(1);
        if t < zero || t > one {
            return Vec::new();
        }
        let p = (a.0 + t * r.0, a.1 + t * r.1);
        if segment_contains(c, d, p) {
            return vec![p];
        }
        return Vec::new();
    }
    Vec::new()
}

/// One border edge crossing the open band between rows `t` and `t+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct BandEdge {
    /// Spatial coordinate where the edge meets row `t`.
    pub x_bot: i64,
    /// Spatial coordinate where the edge meets row `t+1`.
    pub x_top: i64,
    /// `+1` when the cycle traverses the edge upward (from `t` to `t+1`).
    pub dir: i32,
}

impl BandEdge {
    fn x_at(&self, s: Rat) -> Rat {
        rat(self.x_bot) + s * (rat(self.x_top) - rat(self.x_bot))
    }
}

/// Closed integer interval `[lo, hi]`.
pub(crate) type Interval = (i64, i64);

fn merge_intervals(mut v: Vec<Interval>) -> Vec<Interval> {
    v.sort();
    let mut out: Vec<Interval> = Vec::new();
    for (lo, hi) in v {
        debug_assert!(lo <= hi);
        match out.last_mut() {
            // Closed intervals over continuous space merge when they overlap
            // or share an endpoint; a unit gap stays a gap.
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn intervals_contain(v: &[Interval], lo: i64, hi: i64) -> bool {
    v.iter().any(|&(a, b)| a <= lo && hi <= b)
}

/// Rational closed interval set helper used for in-band sections.
fn rat_intervals_contain(v: &[(Rat, Rat)], lo: Rat, hi: Rat) -> bool {
    // Merge touching intervals first: a zero-width slit between two region
    // pieces is itself part of the region, so containment may span it.
    let mut merged: Vec<(Rat, Rat)> = Vec::new();
    for &(a, b) in v {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = if b > last.1 { b } else { last.1 },
            _ => merged.push((a, b)),
        }
    }
    merged.iter().any(|&(a, b)| a <= lo && hi <= b)
}

/// A border cycle together with its derived exact region.
///
/// The region is the filled cycle: border points plus points of nonzero
/// winding number.  Vertices are lattice points and every edge moves by at
/// most one row vertically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Cycle {
    pts: Vec<Pt>,
}

impl Cycle {
    pub(crate) fn new(pts: Vec<Pt>) -> Self {
        assert!(!pts.is_empty(), "a border cycle needs at least one vertex");
        for w in 0..pts.len() {
            let a = pts[w];
            let b = pts[(w + 1) % pts.len()];
            assert!(
                (a.1 - b.1).abs() <= 1,
                "border edges connect adjacent or equal rows: {a:?} -> {b:?}"
            );
        }
        Cycle { pts }
    }

    pub(crate) fn points(&self) -> &[Pt] {
        &self.pts
    }

    /// Consecutive border segments, skipping zero-length wraps.
    pub(crate) fn edges(&self) -> Vec<(Pt, Pt)> {
        let n = self.pts.len();
        if n == 1 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(n);
        for w in 0..n {
            let a = self.pts[w];
            let b = self.pts[(w + 1) % n];
            if a != b {
                out.push((a, b));
            }
        }
        out
    }

    /// Twice the signed area of the cycle (shoelace); nonnegative for
    /// counterclockwise traversal.
    pub(crate) fn signed_area2(&self) -> i128 {
        let n = self.pts.len();
        let mut acc: i128 = 0;
        for w in 0..n {
            let a = self.pts[w];
            let b = self.pts[(w + 1) % n];
            acc += i128::from(a.0) * i128::from(b.1) - i128::from(b.0) * i128::from(a.1);
        }
        acc
    }

    /// Border edges crossing the open band between rows `t` and `t+1`, in
    /// left-to-right order.  Requires a non-self-crossing border.
    pub(crate) fn band_edges(&self, t: i64) -> Vec<BandEdge> {
        let mut edges: Vec<BandEdge> = Vec::new();
        for (a, b) in self.edges() {
            if a.1 == t && b.1 == t + 1 {
                edges.push(BandEdge {
                    x_bot: a.0,
                    x_top: b.0,
                    dir: 1,
                });
            } else if a.1 == t + 1 && b.1 == t {
                edges.push(BandEdge {
                    x_bot: b.0,
                    x_top: a.0,
                    dir: -1,
                });
            }
        }
        // Non-crossing borders have a constant left-to-right order inside the
        // open band; sorting by the pair of row coordinates realizes it.  A
        // doubled edge (an up/down slit) sorts the upward copy first so the
        // running crossing sum stays in {-1, 0}.
        edges.sort_by_key(|e| (e.x_bot + e.x_top, e.x_bot, -e.dir));
        edges
    }

    /// Region intervals of the open-band section at height `t + s`, `0<s<1`.
    pub(crate) fn band_section(&self, t: i64, s: Rat) -> Vec<(Rat, Rat)> {
        let edges = self.band_edges(t);
        let mut out = Vec::new();
        let mut winding = 0i32;
        for w in 0..edges.len() {
            winding += edges[w].dir;
            if winding != 0 && w + 1 < edges.len() {
                out.push((edges[w].x_at(s), edges[w + 1].x_at(s)));
            }
        }
        debug_assert_eq!(winding, 0, "band crossings of a closed cycle must balance");
        out
    }

    /// True when every partial crossing count across every band is -1 or 0.
    ///
    /// Scanning a band left to right, a counterclockwise border is crossed
    /// downward when entering the region and upward when leaving it, so the
    /// running sum of edge directions is -1 on interior slabs and 0 outside.
    /// Any other value signals a wrapped-around sheet or a clockwise loop;
    /// together with a non-self-crossing border this guarantees the filled
    /// cycle is a plain region.
    ///
    /// Coincident edges (an out-and-back slit) have no defined left-to-right
    /// order; such a group is fine when its directions can be interleaved
    /// without leaving {-1, 0}, which holds exactly when ups and downs
    /// alternate starting with the direction the current sum allows.
    pub(crate) fn winding_values_ok(&self) -> bool {
        let (t_lo, t_hi) = match self.row_range() {
            Some(r) => r,
            None => return true,
        };
        for t in t_lo..t_hi {
            let edges = self.band_edges(t);
            let mut crossing = 0i32;
            let mut idx = 0;
            while idx < edges.len() {
                let key = (edges[idx].x_bot, edges[idx].x_top);
                let mut ups = 0i32;
                let mut downs = 0i32;
                while idx < edges.len() && (edges[idx].x_bot, edges[idx].x_top) == key {
                    if edges[idx].dir == 1 {
                        ups += 1;
                    } else {
                        downs += 1;
                    }
                    idx += 1;
                }
                let ok = if crossing == 0 {
                    // Outside the region: must enter first (down), and may
                    // exceed the entries by at most the final exit.
                    ups <= downs && downs <= ups + 1
                } else {
                    // Inside: must leave first (up).
                    downs <= ups && ups <= downs + 1
                };
                if !ok {
                    return false;
                }
                crossing += ups - downs;
            }
            if crossing != 0 {
                return false;
            }
        }
        true
    }

    fn row_range(&self) -> Option<(i64, i64)> {
        let lo = self.pts.iter().map(|p| p.1).min()?;
        let hi = self.pts.iter().map(|p| p.1).max()?;
        Some((lo, hi))
    }

    /// The region's intersection with row `t`, as disjoint closed integer
    /// intervals (single points appear as degenerate intervals).
    pub(crate) fn row_section(&self, t: i64) -> Vec<Interval> {
        let mut parts: Vec<Interval> = Vec::new();
        for &p in &self.pts {
            if p.1 == t {
                parts.push((p.0, p.0));
            }
        }
        for (a, b) in self.edges() {
            if a.1 == t && b.1 == t {
                let (lo, hi) = min_max(a.0, b.0);
                parts.push((lo, hi));
            }
        }
        // Closures of the bands above and below this row.
        let mut winding = 0i32;
        let below = self.band_edges(t - 1);
        for w in 0..below.len() {
            winding += below[w].dir;
            if winding != 0 && w + 1 < below.len() {
                let (lo, hi) = min_max(below[w].x_top, below[w + 1].x_top);
                parts.push((lo, hi));
            }
        }
        winding = 0;
        let above = self.band_edges(t);
        for w in 0..above.len() {
            winding += above[w].dir;
            if winding != 0 && w + 1 < above.len() {
                let (lo, hi) = min_max(above[w].x_bot, above[w + 1].x_bot);
                parts.push((lo, hi));
            }
        }
        merge_intervals(parts)
    }

    /// Is the rational point on some border segment (or equal to a vertex)?
    pub(crate) fn on_border(&self, p: RPt) -> bool {
        if self.pts.len() == 1 {
            return rpt(self.pts[0]) == p;
        }
        self.edges()
            .into_iter()
            .any(|(a, b)| segment_contains(rpt(a), rpt(b), p))
    }

    /// Winding number of the cycle around `p`; meaningful only off the border.
    pub(crate) fn winding(&self, p: RPt) -> i32 {
        let mut w = 0i32;
        for (a, b) in self.edges() {
            let (a, b) = (rpt(a), rpt(b));
            let upward = a.1 <= p.1 && p.1 < b.1;
            let downward = b.1 <= p.1 && p.1 < a.1;
            if !upward && !downward {
                continue;
            }
            let side = orient(a, b, p);
            if upward && side > 0 {
                w += 1;
            } else if downward && side < 0 {
                w -= 1;
            }
        }
        w
    }

    /// Is `p` in the closed region (border or nonzero winding)?
    pub(crate) fn contains_point(&self, p: RPt) -> bool {
        self.on_border(p) || self.winding(p) != 0
    }

    /// Is the horizontal lattice segment from `(x1, t)` to `(x2, t)` inside
    /// the closed region?
    pub(crate) fn contains_row_segment(&self, t: i64, x1: i64, x2: i64) -> bool {
        let (lo, hi) = min_max(x1, x2);
        intervals_contain(&self.row_section(t), lo, hi)
    }

    /// Is the closed triangle with apex `(i, t)` and base corners
    /// `(bl, t-1)`, `(br, t-1)` (with `bl <= br`) inside the region?
    pub(crate) fn contains_triangle(&self, apex: Pt, bl: Pt, br: Pt) -> bool {
        assert_eq!(bl.1, br.1);
        assert_eq!(apex.1, bl.1 + 1);
        assert!(bl.0 <= br.0);
        let t = bl.1;
        if !self.contains_row_segment(t, bl.0, br.0) {
            return false;
        }
        if !self.contains_row_segment(apex.1, apex.0, apex.0) {
            return false;
        }
        // In-band check: at height t + s the triangle section is the interval
        // [bl + s(apex-bl), br + s(apex-br)].  Its endpoints and the region's
        // band-edge positions are all linear in s, so containment can only
        // change where two of those lines meet; probing the midpoint of every
        // gap between such events decides the whole band exactly.
        let tri_lines: [(i64, i64); 2] = [(bl.0, apex.0), (br.0, apex.0)];
        let mut events: Vec<Rat> = vec![Rat::from_integer(0), Rat::from_integer(1)];
        for e in self.band_edges(t) {
            for &(b0, b1) in &tri_lines {
                // Solve b0 + s(b1-b0) = x_bot + s(x_top-x_bot).
                let denom = rat(b1 - b0) - rat(e.x_top - e.x_bot);
                if denom != Rat::from_integer(0) {
                    let s = (rat(e.x_bot) - rat(b0)) / denom;
                    if s > Rat::from_integer(0) && s < Rat::from_integer(1) {
                        events.push(s);
                    }
                }
            }
        }
        events.sort();
        events.dedup();
        for w in 0..events.len() - 1 {
            let s = (events[w] + events[w + 1]) / Rat::from_integer(2);
            let lo = rat(bl.0) + s * (rat(apex.0) - rat(bl.0));
            let hi = rat(br.0) + s * (rat(apex.0) - rat(br.0));
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            if !rat_intervals_contain(&self.band_section(t, s), lo, hi) {
                return false;
            }
        }
        true
    }

    /// Do the closed regions of two cycles share at least one point?
    pub(crate) fn intersects(&self, other: &Cycle) -> bool {
        if self.pts.len() == 1 {
            return other.contains_point(rpt(self.pts[0]));
        }
        if other.pts.len() == 1 {
            return self.contains_point(rpt(other.pts[0]));
        }
        for (a, b) in self.edges() {
            for (c, d) in other.edges() {
                if segments_touch(rpt(a), rpt(b), rpt(c), rpt(d)) {
                    return true;
                }
            }
        }
        // No border contact: one region may still swallow the other whole.
        self.contains_point(rpt(other.pts[0])) || other.contains_point(rpt(self.pts[0]))
    }

    /// True when no two border segments cross transversally.
    pub(crate) fn border_non_crossing(&self) -> bool {
        let edges = self.edges();
        for w in 0..edges.len() {
            for v in w + 1..edges.len() {
                let (a, b) = (rpt(edges[w].0), rpt(edges[w].1));
                let (c, d) = (rpt(edges[v].0), rpt(edges[v].1));
                if segments_cross_properly(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

/// Clockwise angular order key for exact direction comparison.
///
/// Directions are compared by the clockwise angle swept from a reference
/// direction; `cw_less(reference, a, b)` says whether `a` comes strictly
/// before `b` when rotating clockwise starting just after `reference`.
fn cw_less(reference: RPt, a: RPt, b: RPt) -> bool {
    // With y pointing up, rotating the reference clockwise first sweeps
    // directions whose cross product against the reference is negative
    // (e.g. from west=(-1,0) the first quarter turn reaches north=(0,1) and
    // cross(west, north) = -1).  Directions are bucketed by sweep class and
    // compared within a class by their mutual cross product.
    fn sweep_class(reference: RPt, d: RPt) -> u8 {
        let zero = Rat::from_integer(0);
        let cross = reference.0 * d.1 - reference.1 * d.0;
        let dot = reference.0 * d.0 + reference.1 * d.1;
        if cross == zero && dot > zero {
            return 6; // same direction: full turn, sorts last
        }
        if cross < zero {
            return if dot > zero {
                1
            } else if dot == zero {
                2
            } else {
                3
            };
        }
        if cross == zero {
            return 4; // opposite direction: half turn
        }
        5 // cross > 0: second half of the clockwise sweep
    }
    let ca = sweep_class(reference, a);
    let cb = sweep_class(reference, b);
    if ca != cb {
        return ca < cb;
    }
    // Same sweep class: within a half-plane the clockwise order matches the
    // sign of the cross product between the two candidates.
    let cross = a.0 * b.1 - a.1 * b.0;
    cross < Rat::from_integer(0)
}

/// Compute the counterclockwise outer-border encounter order of marked
/// lattice points on the filled union of two cycles.
///
/// `keep` is the set of coordinates to report (the vertex lists of both
/// polygons).  The result lists every border encounter in traversal order,
/// starting from the bottommost-then-leftmost arrangement vertex; holes of
/// the union are ignored (the walk follows the outer border only), which
/// realizes hole filling.  Marked points that end up strictly inside the
/// union are dropped.
pub(crate) fn merge_cycles(a: &Cycle, b: &Cycle, keep: &BTreeSet<Pt>) -> Vec<Pt> {
    let mut segments: Vec<(RPt, RPt)> = Vec::new();
    for (p, q) in a.edges().into_iter().chain(b.edges()) {
        segments.push((rpt(p), rpt(q)));
    }
    if segments.is_empty() {
        // Two point-cycles: they intersect only when equal.
        let mut pts: Vec<Pt> = a.pts.iter().chain(b.pts.iter()).copied().collect();
        pts.sort();
        pts.dedup();
        assert_eq!(pts.len(), 1, "point cycles merge only when coincident");
        return pts;
    }

    // Point-cycles contribute split points so an isolated vertex lying on the
    // other border is encountered by the walk.
    let mut split_points: Vec<RPt> = keep.iter().map(|&p| rpt(p)).collect();
    for w in 0..segments.len() {
        for v in w + 1..segments.len() {
            let (p, q) = segments[w];
            let (r, s) = segments[v];
            split_points.extend(segment_intersections(p, q, r, s));
        }
    }
    split_points.sort();
    split_points.dedup();

    // Split every segment at every split point on it and collect unique
    // undirected fragments.
    let mut fragments: BTreeSet<(RPt, RPt)> = BTreeSet::new();
    for &(p, q) in &segments {
        let mut cuts: Vec<RPt> = vec![p, q];
        for &c in &split_points {
            if segment_contains(p, q, c) {
                cuts.push(c);
            }
        }
        cuts.sort();
        cuts.dedup();
        for w in 0..cuts.len() - 1 {
            let (u, v) = (cuts[w], cuts[w + 1]);
            if u != v {
                fragments.insert((u.min(v), u.max(v)));
            }
        }
    }

    // Adjacency over arrangement vertices.
    let mut adj: BTreeMap<RPt, Vec<RPt>> = BTreeMap::new();
    for &(u, v) in &fragments {
        adj.entry(u).or_default().push(v);
        adj.entry(v).or_default().push(u);
    }

    // Bottommost-then-leftmost vertex is necessarily on the outer border.
    let start = *adj
        .keys()
        .min_by(|p, q| (p.1, p.0).cmp(&(q.1, q.0)))
        .expect("nonempty arrangement");

    let keep_rat: BTreeSet<RPt> = keep.iter().map(|&p| rpt(p)).collect();
    let to_lattice = |p: RPt| -> Pt {
        debug_assert!(p.0.is_integer() && p.1.is_integer());
        (p.0.to_integer() as i64, p.1.to_integer() as i64)
    };

    // Walk the outer face counterclockwise: from each vertex take the edge
    // with the largest clockwise angle from the reversed incoming direction
    // (the incoming edge itself is allowed only at dead ends).  Before any
    // edge is traversed the virtual incoming direction points east, so its
    // reverse is west, which makes the walk leave the extreme vertex along
    // its most-eastward/downward edge.
    let mut order: Vec<Pt> = Vec::new();
    let mut cur = start;
    let mut rev_dir: RPt = (rat(-1), rat(0));
    let mut first_step: Option<(RPt, RPt)> = None;
    let guard = 4 * fragments.len() + 8;
    for _ in 0..=guard {
        let neighbors = &adj[&cur];
        let mut best: Option<RPt> = None;
        for &nb in neighbors {
            let dir = (nb.0 - cur.0, nb.1 - cur.1);
            if dir == rev_dir && neighbors.len() > 1 {
                continue;
            }
            best = match best {
                None => Some(nb),
                Some(cand) => {
                    let cdir = (cand.0 - cur.0, cand.1 - cur.1);
                    if cw_less(rev_dir, cdir, dir) {
                        Some(nb)
                    } else {
                        Some(cand)
                    }
                }
            };
        }
        let next = best.expect("walk vertex with no outgoing edge");
        match first_step {
            // Arriving back on the initial directed edge closes the outer
            // cycle; that final visit of the start vertex is not re-recorded.
            Some(step) if step == (cur, next) => return order,
            Some(_) => {}
            None => first_step = Some((cur, next)),
        }
        if keep_rat.contains(&cur) {
            order.push(to_lattice(cur));
        }
        rev_dir = (cur.0 - next.0, cur.1 - next.1);
        cur = next;
    }
    panic!("outer border walk failed to close; border arrangement is inconsistent");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyc(pts: &[Pt]) -> Cycle {
        Cycle::new(pts.to_vec())
    }

    #[test]
    fn square_region_predicates() {
        // A 2x2 square traversed counterclockwise, one row per edge.
        let c = cyc(&[(0, 0), (2, 0), (2, 1), (2, 2), (0, 2), (0, 1)]);
        assert!(c.signed_area2() > 0);
        assert!(c.winding_values_ok());
        assert!(c.border_non_crossing());
        assert!(c.contains_point((rat(1), rat(1))));
        assert!(c.contains_point((rat(2), rat(1))));
        assert!(!c.contains_point((rat(3), rat(1))));
        assert_eq!(c.row_section(0), vec![(0, 2)]);
        assert_eq!(c.row_section(1), vec![(0, 2)]);
        assert_eq!(c.row_section(3), Vec::<Interval>::new());
        assert!(c.contains_row_segment(1, 0, 2));
        assert!(!c.contains_row_segment(1, 0, 3));
    }

    #[test]
    fn degenerate_cycles_behave_like_points_and_segments() {
        let p = cyc(&[(5, 7)]);
        assert!(p.contains_point((rat(5), rat(7))));
        assert!(!p.contains_point((rat(5), rat(8))));
        assert_eq!(p.row_section(7), vec![(5, 5)]);
        assert_eq!(p.signed_area2(), 0);

        let s = cyc(&[(1, 4), (3, 4)]);
        assert!(s.contains_row_segment(4, 1, 3));
        assert!(!s.contains_row_segment(4, 1, 4));
        assert!(s.winding_values_ok());
        assert_eq!(s.signed_area2(), 0);

        let slanted = cyc(&[(0, 0), (1, 1)]);
        assert!(slanted.contains_point((rat(1) / rat(2), rat(1) / rat(2))));
        assert!(slanted.winding_values_ok());
    }

    #[test]
    fn triangle_containment_is_exact() {
        // Triangle with apex (1,1), base [0,2] at row 0, inside a square.
        let sq = cyc(&[(0, 0), (2, 0), (2, 1), (0, 1)]);
        assert!(sq.contains_triangle((1, 1), (0, 0), (2, 0)));
        // The same triangle pokes out of a narrower region.
        let narrow = cyc(&[(0, 0), (1, 0), (1, 1), (0, 1)]);
        assert!(!narrow.contains_triangle((1, 1), (0, 0), (2, 0)));
        // A triangle is contained in itself.
        let tri = cyc(&[(0, 0), (2, 0), (1, 1)]);
        assert!(tri.contains_triangle((1, 1), (0, 0), (2, 0)));
        assert!(tri.signed_area2() > 0);
    }

    #[test]
    fn intersection_detection_covers_nesting_and_touching() {
        let big = cyc(&[(0, 0), (4, 0), (4, 1), (4, 2), (0, 2), (0, 1)]);
        let inside = cyc(&[(1, 1), (2, 1)]);
        let touching = cyc(&[(4, 1), (6, 1)]);
        let outside = cyc(&[(6, 0), (7, 0), (7, 1)]);
        assert!(big.intersects(&inside));
        assert!(inside.intersects(&big));
        assert!(big.intersects(&touching));
        assert!(!big.intersects(&outside));
        let pt_in = cyc(&[(2, 1)]);
        let pt_out = cyc(&[(9, 9)]);
        assert!(big.intersects(&pt_in));
        assert!(!big.intersects(&pt_out));
    }

    #[test]
    fn merge_walk_orders_union_border_counterclockwise() {
        // Two unit-height squares sharing the edge x=2.
        let a = cyc(&[(0, 0), (2, 0), (2, 1), (0, 1)]);
        let b = cyc(&[(2, 0), (4, 0), (4, 1), (2, 1)]);
        let keep: BTreeSet<Pt> = a.points().iter().chain(b.points()).copied().collect();
        let order = merge_cycles(&a, &b, &keep);
        assert_eq!(order, vec![(0, 0), (2, 0), (4, 0), (4, 1), (2, 1), (0, 1)]);
    }

    #[test]
    fn merge_walk_skips_engulfed_vertices_and_fills_pockets() {
        // A point polygon strictly inside a triangle disappears from the
        // union border.
        let tri = cyc(&[(0, 0), (4, 0), (2, 1)]);
        let pt = cyc(&[(2, 0), (2, 1)]);
        // pt's top vertex (2,1) coincides with the triangle apex; its bottom
        // vertex sits on the triangle base.
        let keep: BTreeSet<Pt> = tri.points().iter().chain(pt.points()).copied().collect();
        let order = merge_cycles(&tri, &pt, &keep);
        assert_eq!(order, vec![(0, 0), (2, 0), (4, 0), (2, 1)]);
    }

    #[test]
    fn merge_walk_traverses_spurs_twice() {
        // A segment sticking out of a square to the right: the walk goes out
        // and back, encountering the interior attachment point twice.
        let sq = cyc(&[(0, 0), (2, 0), (2, 1), (0, 1)]);
        let spur = cyc(&[(2, 0), (4, 0)]);
        let keep: BTreeSet<Pt> = sq.points().iter().chain(spur.points()).copied().collect();
        let order = merge_cycles(&sq, &spur, &keep);
        assert_eq!(order, vec![(0, 0), (2, 0), (4, 0), (2, 0), (2, 1), (0, 1)]);
    }

    #[test]
    fn merge_of_point_on_vertex_keeps_single_point() {
        let p = cyc(&[(3, 3)]);
        let q = cyc(&[(3, 3)]);
        let keep: BTreeSet<Pt> = [(3, 3)].into_iter().collect();
        assert_eq!(merge_cycles(&p, &q, &keep), vec![(3, 3)]);
    }

    #[test]
    fn merge_point_with_triangle_attaches_at_apex() {
        // A single-vertex polygon at the triangle apex: the union border is
        // the triangle itself and the point is encountered exactly once.
        let tri = cyc(&[(5, 10), (6, 10), (5, 11)]);
        let pt = cyc(&[(5, 11)]);
        let keep: BTreeSet<Pt> = tri.points().iter().chain(pt.points()).copied().collect();
        let order = merge_cycles(&tri, &pt, &keep);
        assert_eq!(order, vec![(5, 10), (6, 10), (5, 11)]);
    }

    #[test]
    fn winding_flags_doubled_same_direction_edges() {
        // Traversing the same square twice winds twice around the interior.
        let c = cyc(&[
            (0, 0),
            (2, 0),
            (2, 1),
            (0, 1),
            (0, 0),
            (2, 0),
            (2, 1),
            (0, 1),
        ]);
        assert!(!c.winding_values_ok());
    }

    #[test]
    fn slit_cycles_keep_winding_in_range() {
        // An upward slit: out-and-back vertical segment hanging off a square
        // border.  The doubled edge must not push winding counts negative.
        let c = cyc(&[(0, 0), (2, 0), (2, 1), (1, 1), (1, 0), (1, 1), (0, 1)]);
        assert!(c.winding_values_ok());
        assert!(c.border_non_crossing());
    }

    #[test]
    fn band_section_tracks_slanted_edges() {
        let tri = cyc(&[(0, 0), (4, 0), (2, 1)]);
        let mid = tri.band_section(0, rat(1) / rat(2));
        assert_eq!(mid.len(), 1);
        assert_eq!(mid[0].0, rat(1));
        assert_eq!(mid[0].1, rat(3));
    }
}
