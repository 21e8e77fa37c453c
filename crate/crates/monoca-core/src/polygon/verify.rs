//! Independent re-verification of a polygon system against its trajectory.
//!
//! Every check re-derives the claimed property from the raw system, the
//! recorded trajectory, and the band data — nothing is trusted from the
//! construction.  The report lists one named pass/fail line per property, so
//! a failed invariant pinpoints what broke.

use super::geom::{segments_touch, Cycle, Pt};
use super::level::LevelData;
use super::{PolygonSystem, SpaceTimePolygon, VertexType};
use crate::noise::NoisyTrajectory;
use crate::rule::State;
use num_rational::Ratio;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// One named verification result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyCheck {
    /// Stable kebab-case name of the property.
    pub name: &'static str,
    /// Did every instance of the property hold?
    pub pass: bool,
    /// First counterexample, when failing.
    pub detail: Option<String>,
}

/// The full verification report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    /// All checks, in a fixed order.
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    /// Did every check pass?
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Tab-separated report, one `check` line per property.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str("check\t");
            out.push_str(c.name);
            out.push_str(if c.pass { "\tpass" } else { "\tfail" });
            if let Some(d) = &c.detail {
                out.push('\t');
                out.push_str(d);
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

struct Checker<'a> {
    system: &'a PolygonSystem,
    traj: &'a NoisyTrajectory,
    data: &'a LevelData,
    radius: i64,
    checks: Vec<VerifyCheck>,
}

/// Re-checks a polygon system against the trajectory it claims to explain.
///
/// The report covers the per-polygon shape conditions (region shape, border
/// edge classes, same-row segment containment, vertex states and types, the
/// guaranteed type-1/2 border fraction), the cross-band separation lemmas,
/// seed coverage, and the system-wide error-citation fraction.
pub fn verify_system(
    system: &PolygonSystem,
    trajectory: &NoisyTrajectory,
    data: &LevelData,
) -> VerifyReport {
    let mut checker = Checker {
        system,
        traj: trajectory,
        data,
        radius: data.radius as i64,
        checks: Vec::new(),
    };
    checker.run();
    VerifyReport {
        checks: checker.checks,
    }
}

impl Checker<'_> {
    fn add(&mut self, name: &'static str, failure: Option<String>) {
        self.checks.push(VerifyCheck {
            name,
            pass: failure.is_none(),
            detail: failure,
        });
    }

    fn polygons(&self) -> impl Iterator<Item = &SpaceTimePolygon> {
        self.system.levels.iter().flat_map(|ls| ls.polygons.iter())
    }

    fn state_of(&self, at: Pt) -> Option<State> {
        let (i, t) = at;
        if t < 0 || i < 0 {
            return None;
        }
        self.traj
            .rows
            .get(t as usize)
            .and_then(|row| row.get(i as usize))
            .copied()
    }

    fn error_below(&self, at: Pt) -> bool {
        let (i, t) = at;
        if t < 1 || i < 0 {
            return false;
        }
        self.traj
            .errors
            .get((t - 1) as usize)
            .and_then(|row| row.get(i as usize))
            .copied()
            .unwrap_or(false)
    }

    fn in_cone(&self, at: Pt) -> bool {
        let (i, t) = at;
        let (ri, rt) = self.system.root;
        t >= 0 && t <= rt && (i - ri).abs() <= self.radius * (rt - t)
    }

    /// The highest band strictly above `n` present one row below `at` within
    /// that band's reach, if any.
    fn best_support_band(&self, at: Pt, n: usize) -> Option<usize> {
        let (i, t) = at;
        if t < 1 {
            return None;
        }
        for band in (n + 1..=self.data.level_count()).rev() {
            let reach = band as i64 * self.radius;
            for j in -reach..=reach {
                let cand = (i + j, t - 1);
                if self.in_cone(cand)
                    && self.state_of(cand).and_then(|s| self.data.band_of(s)) == Some(band)
                {
                    return Some(band);
                }
            }
        }
        None
    }

    /// A polygon's border cycle, when its vertex list is geometrically sane.
    fn try_cycle(poly: &SpaceTimePolygon) -> Option<Cycle> {
        if poly.vertices.is_empty() {
            return None;
        }
        let pts: Vec<Pt> = poly.vertices.iter().map(|v| v.at).collect();
        let n = pts.len();
        for w in 0..n {
            let (a, b) = (pts[w], pts[(w + 1) % n]);
            if (a.1 - b.1).abs() > 1 {
                return None;
            }
        }
        Some(Cycle::new(pts))
    }

    fn run(&mut self) {
        // Guard: every referenced band must exist before anything else can
        // be interpreted.
        let bands_ok = self.system.base_level >= 1
            && self.system.base_level <= self.data.level_count()
            && self.system.levels.iter().all(|ls| {
                ls.level >= 1
                    && ls.level <= self.data.level_count()
                    && ls.polygons.iter().all(|p| p.level == ls.level)
            });
        if !bands_ok {
            self.add(
                "levels-known",
                Some("system references a band outside the chain".to_string()),
            );
            return;
        }
        self.add("levels-known", None);

        self.check_region_shape();
        self.check_cone();
        self.check_edge_shapes();
        self.check_same_row_pairs();
        self.check_vertex_states();
        self.check_vertex_consistency();
        self.check_vertex_types();
        self.check_type_priority();
        self.check_border_size();
        self.check_level_disjoint();
        self.check_seeds_covered();
        self.check_max_time_vertices();
        self.check_vertex_separation();
        self.check_border_disjoint();
        self.check_not_inside();
        self.check_close_to_border();
        self.check_type2_fraction();
        self.check_error_citations();
    }

    fn check_region_shape(&mut self) {
        let mut failure = None;
        for poly in self.polygons() {
            let Some(cycle) = Self::try_cycle(poly) else {
                failure = Some(format!("band {} polygon has a broken border", poly.level));
                break;
            };
            if !cycle.border_non_crossing() {
                failure = Some(format!("band {} polygon border crosses itself", poly.level));
                break;
            }
            if !cycle.winding_values_ok() {
                failure = Some(format!(
                    "band {} polygon border wraps or leaves a hole",
                    poly.level
                ));
                break;
            }
            if cycle.signed_area2() < 0 {
                failure = Some(format!("band {} polygon border runs clockwise", poly.level));
                break;
            }
        }
        self.add("region-shape", failure);
    }

    fn check_cone(&mut self) {
        let mut failure = None;
        'outer: for poly in self.polygons() {
            for v in &poly.vertices {
                if !self.in_cone(v.at) {
                    failure = Some(format!("vertex {:?} leaves the target's light cone", v.at));
                    break 'outer;
                }
            }
        }
        self.add("vertices-in-cone", failure);
    }

    fn check_edge_shapes(&mut self) {
        let mut failure = None;
        'outer: for poly in self.polygons() {
            let pts: Vec<Pt> = poly.vertices.iter().map(|v| v.at).collect();
            if pts.len() < 2 {
                continue;
            }
            let info = self.data.level(poly.level);
            for w in 0..pts.len() {
                let (a, b) = (pts[w], pts[(w + 1) % pts.len()]);
                let d = (b.0 - a.0, b.1 - a.1);
                if info.classify_edge(self.data.radius, d).is_none() {
                    failure = Some(format!(
                        "band {} border step {d:?} at {a:?} fits no edge shape",
                        poly.level
                    ));
                    break 'outer;
                }
            }
        }
        self.add("edge-shapes", failure);
    }

    fn check_same_row_pairs(&mut self) {
        let mut failure = None;
        'outer: for poly in self.polygons() {
            let Some(cycle) = Self::try_cycle(poly) else {
                continue;
            };
            let mut rows: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
            for v in &poly.vertices {
                rows.entry(v.at.1).or_default().push(v.at.0);
            }
            for (&t, xs) in &mut rows {
                xs.sort_unstable();
                xs.dedup();
                for a in 0..xs.len() {
                    for b in a + 1..xs.len() {
                        if xs[b] - xs[a] > 2 * self.radius {
                            break;
                        }
                        if !cycle.contains_row_segment(t, xs[a], xs[b]) {
                            failure = Some(format!(
                                "vertices ({},{t}) and ({},{t}) are close but their segment leaves the polygon",
                                xs[a], xs[b]
                            ));
                            break 'outer;
                        }
                    }
                }
            }
        }
        self.add("same-row-pairs", failure);
    }

    fn check_vertex_states(&mut self) {
        let mut failure = None;
        'outer: for poly in self.polygons() {
            for v in &poly.vertices {
                let band = self.state_of(v.at).and_then(|s| self.data.band_of(s));
                if band != Some(poly.level) {
                    failure = Some(format!(
                        "vertex {:?} holds a state outside band {}",
                        v.at, poly.level
                    ));
                    break 'outer;
                }
            }
        }
        self.add("vertex-states", failure);
    }

    fn check_vertex_consistency(&mut self) {
        let mut seen: BTreeMap<Pt, (usize, VertexType)> = BTreeMap::new();
        let mut failure = None;
        'outer: for poly in self.polygons() {
            for v in &poly.vertices {
                match seen.get(&v.at) {
                    None => {
                        seen.insert(v.at, (poly.level, v.vtype));
                    }
                    Some(&(level, vtype)) => {
                        if level != poly.level || vtype != v.vtype {
                            failure = Some(format!(
                                "vertex {:?} appears with two different bands or types",
                                v.at
                            ));
                            break 'outer;
                        }
                    }
                }
            }
        }
        self.add("vertex-consistency", failure);
    }

    fn check_vertex_types(&mut self) {
        let mut failure = None;
        'outer: for poly in self.polygons() {
            let cycle = Self::try_cycle(poly);
            let n = poly.level;
            let info = self.data.level(n);
            for v in &poly.vertices {
                let (i, t) = v.at;
                match v.vtype {
                    VertexType::Support { level, offset } => {
                        let support = (i + offset, t - 1);
                        let valid = level > n
                            && level <= self.data.level_count()
                            && offset.abs() <= level as i64 * self.radius
                            && self.in_cone(support)
                            && self.state_of(support).and_then(|s| self.data.band_of(s))
                                == Some(level)
                            && self.best_support_band(v.at, n) == Some(level);
                        if !valid {
                            failure = Some(format!(
                                "support claim at {:?} (band {level}, offset {offset}) does not hold",
                                v.at
                            ));
                            break 'outer;
                        }
                    }
                    VertexType::Error => {
                        if !self.error_below(v.at) {
                            failure = Some(format!(
                                "vertex {:?} cites an error that is not recorded",
                                v.at
                            ));
                            break 'outer;
                        }
                    }
                    VertexType::Forced { left, right } => {
                        let in_sets =
                            info.forcing_u.contains(&left) && info.forcing_v.contains(&right);
                        let triangle_ok = in_sets
                            && t >= 1
                            && cycle.as_ref().is_some_and(|c| {
                                c.contains_triangle(v.at, (i + left, t - 1), (i + right, t - 1))
                            });
                        if !triangle_ok {
                            failure = Some(format!(
                                "forcing triangle at {:?} (offsets {left},{right}) is invalid or escapes the polygon",
                                v.at
                            ));
                            break 'outer;
                        }
                    }
                }
            }
        }
        self.add("vertex-types", failure);
    }

    fn check_type_priority(&mut self) {
        let mut failure = None;
        'outer: for poly in self.polygons() {
            for v in &poly.vertices {
                let kind = v.vtype.kind();
                let support = self.best_support_band(v.at, poly.level).is_some();
                let error = self.error_below(v.at);
                let expected = if support {
                    1
                } else if error {
                    2
                } else {
                    3
                };
                if kind != expected {
                    failure = Some(format!(
                        "vertex {:?} has type {kind} but priority demands type {expected}",
                        v.at
                    ));
                    break 'outer;
                }
            }
        }
        self.add("type-priority", failure);
    }

    fn check_border_size(&mut self) {
        let mut failure = None;
        for poly in self.polygons() {
            let counts = poly.type_counts();
            let supported = counts[0] + counts[1];
            let total = poly.vertices.len();
            let delta_n = self.data.level(poly.level).delta_n;
            // supported >= delta_n * total, in exact arithmetic.
            let lhs = i128::from(supported as u64) * i128::from(*delta_n.denom());
            let rhs = i128::from(*delta_n.numer()) * i128::from(total as u64);
            if lhs < rhs {
                failure = Some(format!(
                    "band {} polygon has {supported}/{total} supported or error vertices, below its guaranteed fraction",
                    poly.level
                ));
                break;
            }
        }
        self.add("border-size", failure);
    }

    fn check_level_disjoint(&mut self) {
        let mut failure = None;
        'outer: for ls in &self.system.levels {
            let cycles: Vec<Option<Cycle>> = ls.polygons.iter().map(Self::try_cycle).collect();
            for a in 0..cycles.len() {
                for b in a + 1..cycles.len() {
                    if let (Some(ca), Some(cb)) = (&cycles[a], &cycles[b]) {
                        if ca.intersects(cb) {
                            failure =
                                Some(format!("band {} polygons {a} and {b} overlap", ls.level));
                            break 'outer;
                        }
                    }
                }
            }
        }
        self.add("level-disjoint", failure);
    }

    fn check_seeds_covered(&mut self) {
        let mut failure = None;
        'outer: for ls in &self.system.levels {
            let cycles: Vec<Cycle> = ls.polygons.iter().filter_map(Self::try_cycle).collect();
            for &seed in &ls.seeds {
                let p = (
                    Ratio::from_integer(i128::from(seed.0)),
                    Ratio::from_integer(i128::from(seed.1)),
                );
                if !cycles.iter().any(|c| c.contains_point(p)) {
                    failure = Some(format!(
                        "seed {seed:?} of band {} is not covered by any polygon",
                        ls.level
                    ));
                    break 'outer;
                }
            }
        }
        self.add("seeds-covered", failure);
    }

    fn check_max_time_vertices(&mut self) {
        let mut failure = None;
        'outer: for ls in &self.system.levels {
            let seeds: BTreeSet<Pt> = ls.seeds.iter().copied().collect();
            for poly in &ls.polygons {
                let Some(max_t) = poly.vertices.iter().map(|v| v.at.1).max() else {
                    continue;
                };
                for v in &poly.vertices {
                    if v.at.1 == max_t && !seeds.contains(&v.at) {
                        failure = Some(format!(
                            "latest vertex {:?} of a band-{} polygon is not a seed",
                            v.at, ls.level
                        ));
                        break 'outer;
                    }
                }
            }
        }
        self.add("max-time-vertices-seeded", failure);
    }

    fn check_vertex_separation(&mut self) {
        // Vertices of polygons from different bands must stay farther than
        // the rule radius apart within each row.
        let mut by_row: BTreeMap<i64, Vec<(i64, usize)>> = BTreeMap::new();
        for ls in &self.system.levels {
            for poly in &ls.polygons {
                for v in &poly.vertices {
                    by_row.entry(v.at.1).or_default().push((v.at.0, ls.level));
                }
            }
        }
        let mut failure = None;
        'outer: for (&t, entries) in &mut by_row {
            entries.sort_unstable();
            entries.dedup();
            for a in 0..entries.len() {
                for b in a + 1..entries.len() {
                    let (xa, la) = entries[a];
                    let (xb, lb) = entries[b];
                    if xb - xa > self.radius {
                        break;
                    }
                    if la != lb {
                        failure = Some(format!(
                            "vertices ({xa},{t}) band {la} and ({xb},{t}) band {lb} are within the rule radius"
                        ));
                        break 'outer;
                    }
                }
            }
        }
        self.add("vertex-separation", failure);
    }

    fn all_cycles_with_levels(&self) -> Vec<(usize, Cycle)> {
        self.system
            .levels
            .iter()
            .flat_map(|ls| {
                ls.polygons
                    .iter()
                    .filter_map(|p| Self::try_cycle(p).map(|c| (ls.level, c)))
            })
            .collect()
    }

    fn borders_touch(a: &Cycle, b: &Cycle) -> bool {
        let ea = a.edges();
        let eb = b.edges();
        if ea.is_empty() && eb.is_empty() {
            return a.points()[0] == b.points()[0];
        }
        if ea.is_empty() {
            return b.on_border(rpt_of(a.points()[0]));
        }
        if eb.is_empty() {
            return a.on_border(rpt_of(b.points()[0]));
        }
        for &(p, q) in &ea {
            for &(r, s) in &eb {
                if segments_touch(rpt_of(p), rpt_of(q), rpt_of(r), rpt_of(s)) {
                    return true;
                }
            }
        }
        false
    }

    fn check_border_disjoint(&mut self) {
        let cycles = self.all_cycles_with_levels();
        let mut failure = None;
        'outer: for a in 0..cycles.len() {
            for b in a + 1..cycles.len() {
                if cycles[a].0 == cycles[b].0 {
                    continue;
                }
                if Self::borders_touch(&cycles[a].1, &cycles[b].1) {
                    failure = Some(format!(
                        "borders of a band-{} and a band-{} polygon touch",
                        cycles[a].0, cycles[b].0
                    ));
                    break 'outer;
                }
            }
        }
        self.add("border-disjoint", failure);
    }

    fn check_not_inside(&mut self) {
        let cycles = self.all_cycles_with_levels();
        let mut failure = None;
        'outer: for &(lo_level, ref lo) in &cycles {
            for &(hi_level, ref hi) in &cycles {
                if lo_level >= hi_level {
                    continue;
                }
                for &p in lo.points() {
                    if hi.contains_point(rpt_of(p)) {
                        failure = Some(format!(
                            "band-{lo_level} vertex {p:?} lies inside a band-{hi_level} polygon"
                        ));
                        break 'outer;
                    }
                }
            }
        }
        self.add("not-inside", failure);
    }

    fn check_close_to_border(&mut self) {
        let mut failure = None;
        'outer: for ls in &self.system.levels {
            let reach = ls.level as i64 * self.radius;
            for &seed in &ls.seeds {
                let p = (
                    Ratio::from_integer(i128::from(seed.0)),
                    Ratio::from_integer(i128::from(seed.1)),
                );
                let Some(poly) = ls
                    .polygons
                    .iter()
                    .find(|poly| Self::try_cycle(poly).is_some_and(|c| c.contains_point(p)))
                else {
                    continue; // seeds-covered already reports this
                };
                let near = poly
                    .vertices
                    .iter()
                    .any(|v| (v.at.0 - seed.0).abs() <= reach && (v.at.1 - seed.1).abs() <= 1);
                if !near {
                    failure = Some(format!(
                        "seed {seed:?} of band {} sits deep inside its polygon, away from the border",
                        ls.level
                    ));
                    break 'outer;
                }
            }
        }
        self.add("close-to-border", failure);
    }

    fn check_type2_fraction(&mut self) {
        let counts = self.system.distinct_type_counts();
        let total = counts.iter().sum::<usize>();
        let beta = self.data.beta[self.system.base_level - 1];
        let lhs = i128::from(counts[1] as u64) * i128::from(*beta.denom());
        let rhs = i128::from(*beta.numer()) * i128::from(total as u64);
        let failure = if lhs < rhs {
            Some(format!(
                "{} of {} distinct vertices cite errors, below the guaranteed fraction {}",
                counts[1], total, beta
            ))
        } else {
            None
        };
        self.add("type2-fraction", failure);
    }

    fn check_error_citations(&mut self) {
        let mut failure = None;
        'outer: for poly in self.polygons() {
            for v in &poly.vertices {
                if v.vtype == VertexType::Error && !self.error_below(v.at) {
                    failure = Some(format!(
                        "vertex {:?} is typed as an error but none is recorded below it",
                        v.at
                    ));
                    break 'outer;
                }
            }
        }
        self.add("error-citations", failure);
    }
}

fn rpt_of(p: Pt) -> (Ratio<i128>, Ratio<i128>) {
    (
        Ratio::from_integer(i128::from(p.0)),
        Ratio::from_integer(i128::from(p.1)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::testutil::synthetic_trajectory;
    use crate::polygon::{
        build_level_data, construct_system, LevelSystem, PolygonVertex, SpaceTimePolygon,
    };
    use crate::rule::LocalRule;

    fn check<'a>(report: &'a VerifyReport, name: &str) -> &'a VerifyCheck {
        report
            .checks
            .iter()
            .find(|c| c.name == name)
            .unwrap_or_else(|| panic!("missing check {name}"))
    }

    #[test]
    fn forged_error_vertex_fails_the_error_citation_check() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let data = build_level_data(&rule, &[0, 1], 1 << 16).unwrap();
        let traj = synthetic_trajectory(&rule, 32, 11, &[(10, 15, 1), (10, 16, 1)]);
        let system = construct_system(&rule, &data, &traj, (15, 11)).unwrap();
        assert!(verify_system(&system, &traj, &data).all_pass());

        // Claim the root (which has no error below it) is an error vertex.
        let mut forged = system.clone();
        forged.levels[0].polygons[0].vertices[2].vtype = VertexType::Error;
        let report = verify_system(&forged, &traj, &data);
        assert!(!report.all_pass());
        assert!(!check(&report, "error-citations").pass);
        assert!(!check(&report, "vertex-types").pass);
        // The untampered geometry still passes its checks.
        assert!(check(&report, "region-shape").pass);
        assert!(check(&report, "same-row-pairs").pass);
    }

    #[test]
    fn close_vertices_with_an_escaping_segment_fail_row_pair_check() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let data = build_level_data(&rule, &[0, 1], 1 << 16).unwrap();
        let traj = synthetic_trajectory(&rule, 12, 6, &[]);
        // A U-shaped border: two one-cell towers on a common base.  Its top
        // row holds vertices at x = 0..3, and the segment from (0,5) to (2,5)
        // leaves the region through the notch.
        let u_shape = SpaceTimePolygon {
            level: 1,
            vertices: [
                (0, 4),
                (3, 4),
                (3, 5),
                (2, 5),
                (2, 4),
                (1, 4),
                (1, 5),
                (0, 5),
            ]
            .into_iter()
            .map(|at| PolygonVertex {
                at,
                vtype: VertexType::Error,
            })
            .collect(),
        };
        let system = super::super::PolygonSystem {
            root: (2, 6),
            base_level: 1,
            levels: vec![LevelSystem {
                level: 1,
                seeds: vec![],
                polygons: vec![u_shape],
            }],
            links: vec![],
        };
        let report = verify_system(&system, &traj, &data);
        // The shape itself is a legitimate region…
        assert!(check(&report, "region-shape").pass);
        // …but the notch separates close same-row vertices.
        let pairs = check(&report, "same-row-pairs");
        assert!(!pairs.pass);
        let detail = pairs.detail.as_deref().unwrap();
        assert!(
            detail.contains("(0,5)") && detail.contains("(2,5)"),
            "{detail}"
        );
    }
}
