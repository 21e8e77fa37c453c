//! Fixed-point construction of a polygon system over a recorded trajectory.
//!
//! Each band starts from singleton polygons at its seed coordinates.  Three
//! kinds of defects are then resolved in a fixed priority order until none
//! remain: intersecting polygons are merged along the outer border of their
//! union (highest priority), a border vertex with no justification gains a
//! forcing triangle, and a close same-row vertex pair whose connecting
//! segment escapes its polygon gains a segment polygon.  Merging only grows
//! the covered region, every coordinate is typed at most once, and every
//! close pair is resolved at most once, so the loop reaches a fixed point;
//! a generous iteration cap converts any broken invariant into an error
//! instead of a hang.

use super::geom::{merge_cycles, Cycle, Pt};
use super::level::LevelData;
use super::{
    LevelSystem, PolygonError, PolygonSystem, PolygonVertex, SpaceTimePolygon, SupportLink,
    VertexType,
};
use crate::noise::NoisyTrajectory;
use crate::rule::{LocalRule, State};
use std::collections::{BTreeMap, BTreeSet};

/// Builds the polygon system explaining the nonzero cell `target` of a
/// trajectory.
///
/// `rule` must be the rule that produced `trajectory` — the powered rule from
/// `data` when `data.power > 1`.  The target's backward light cone must fit
/// inside the recorded window, and the initial row must be zero there; the
/// system's polygons then live entirely on recorded cells.
pub fn construct_system(
    rule: &LocalRule,
    data: &LevelData,
    trajectory: &NoisyTrajectory,
    target: (i64, i64),
) -> Result<PolygonSystem, PolygonError> {
    if rule.radius() != data.radius {
        return Err(PolygonError::ChainInvalid(format!(
            "rule radius {} does not match the level data's powered radius {}",
            rule.radius(),
            data.radius
        )));
    }
    if rule.max_state() != *data.chain.last().expect("chains are non-empty") {
        return Err(PolygonError::ChainInvalid(
            "rule state range does not match the level data's chain".to_string(),
        ));
    }
    if trajectory.state_count != rule.state_count() {
        return Err(PolygonError::ChainInvalid(format!(
            "trajectory has {} states, rule has {}",
            trajectory.state_count,
            rule.state_count()
        )));
    }

    let (i0, t0) = target;
    let width = trajectory.width;
    let horizon = trajectory.horizon;
    if t0 < 0 || t0 > horizon as i64 || i0 < 0 || i0 >= width as i64 {
        return Err(PolygonError::TargetOutOfRange {
            at: target,
            width,
            horizon,
        });
    }
    let r = data.radius as i64;
    let needed_lo = i0 - r * t0;
    let needed_hi = i0 + r * t0;
    if needed_lo < 0 || needed_hi >= width as i64 {
        return Err(PolygonError::ConeOutOfWindow {
            needed_lo,
            needed_hi,
            width,
        });
    }
    for j in needed_lo..=needed_hi {
        if trajectory.rows[0][j as usize] != 0 {
            return Err(PolygonError::InitialRowNotZero);
        }
    }

    let mut builder = Builder {
        data,
        traj: trajectory,
        root: target,
        radius: r,
        types: BTreeMap::new(),
        seeds_by_level: BTreeMap::new(),
        links: Vec::new(),
    };
    let root_state = builder.state(target);
    let base_level = data
        .band_of(root_state)
        .ok_or(PolygonError::TargetZero { at: target })?;

    builder
        .seeds_by_level
        .insert(base_level, [target].into_iter().collect());

    let mut levels = Vec::new();
    for n in base_level..=data.level_count() {
        let seeds = builder.seeds_by_level.remove(&n).unwrap_or_default();
        if seeds.is_empty() {
            continue;
        }
        let polygons = builder.run_level(n, &seeds)?;
        builder.collect_supports(n, &polygons);
        levels.push(LevelSystem {
            level: n,
            seeds: seeds.into_iter().collect(),
            polygons,
        });
    }

    Ok(PolygonSystem {
        root: target,
        base_level,
        levels,
        links: builder.links,
    })
}

struct Builder<'a> {
    data: &'a LevelData,
    traj: &'a NoisyTrajectory,
    root: Pt,
    radius: i64,
    /// Justification per coordinate; a missing entry means the coordinate
    /// still awaits a forcing triangle.
    types: BTreeMap<Pt, VertexType>,
    seeds_by_level: BTreeMap<usize, BTreeSet<Pt>>,
    links: Vec<SupportLink>,
}

impl Builder<'_> {
    fn state(&self, at: Pt) -> State {
        self.traj.rows[at.1 as usize][at.0 as usize]
    }

    /// Is the coordinate inside the target's backward light cone?
    fn in_cone(&self, at: Pt) -> bool {
        let (i, t) = at;
        t >= 0 && t <= self.root.1 && (i - self.root.0).abs() <= self.radius * (self.root.1 - t)
    }

    fn error_below(&self, at: Pt) -> bool {
        at.1 >= 1 && self.traj.errors[(at.1 - 1) as usize][at.0 as usize]
    }

    /// The support/error justification of a band-`n` coordinate, if any.
    ///
    /// Support search: the highest band `m > n` present one row down within
    /// `m·r` cells and inside the cone wins; ties prefer the smallest offset
    /// magnitude, then the leftward one.
    fn intrinsic_type(&self, at: Pt, n: usize) -> Option<VertexType> {
        let (i, t) = at;
        if t >= 1 {
            for band in (n + 1..=self.data.level_count()).rev() {
                let reach = band as i64 * self.radius;
                for dist in 0..=reach {
                    for j in [-dist, dist] {
                        let cand = (i + j, t - 1);
                        if !self.in_cone(cand) {
                            continue;
                        }
                        if self.data.band_of(self.state(cand)) == Some(band) {
                            return Some(VertexType::Support {
                                level: band,
                                offset: j,
                            });
                        }
                        if dist == 0 {
                            break;
                        }
                    }
                }
            }
        }
        if self.error_below(at) {
            return Some(VertexType::Error);
        }
        None
    }

    /// Records the coordinate's intrinsic justification if it has one.
    fn ensure_typed(&mut self, at: Pt, n: usize) {
        if !self.types.contains_key(&at) {
            if let Some(ty) = self.intrinsic_type(at, n) {
                self.types.insert(at, ty);
            }
        }
    }

    /// Chooses the forcing-triangle corners for an otherwise untypable
    /// vertex: the rightmost usable `U` offset and leftmost usable `V`
    /// offset, giving the narrowest triangle.
    fn forced_type(&self, at: Pt, n: usize) -> Result<VertexType, PolygonError> {
        let (i, t) = at;
        if t < 1 {
            return Err(PolygonError::UntypableVertex { at });
        }
        let info = self.data.level(n);
        let left = info
            .forcing_u
            .iter()
            .rev()
            .copied()
            .find(|&j| self.data.band_of(self.state((i + j, t - 1))) == Some(n));
        let right = info
            .forcing_v
            .iter()
            .copied()
            .find(|&j| self.data.band_of(self.state((i + j, t - 1))) == Some(n));
        match (left, right) {
            (Some(left), Some(right)) => Ok(VertexType::Forced { left, right }),
            _ => Err(PolygonError::UntypableVertex { at }),
        }
    }

    fn iteration_cap(&self) -> usize {
        let t = self.root.1.unsigned_abs() as usize;
        let cone_cells = (t + 1) * (2 * self.radius.unsigned_abs() as usize * t + 1);
        10_000 + 20 * cone_cells
    }

    /// Runs one band to its fixed point and returns its final polygons.
    fn run_level(
        &mut self,
        n: usize,
        seeds: &BTreeSet<Pt>,
    ) -> Result<Vec<SpaceTimePolygon>, PolygonError> {
        let mut polys: Vec<Option<Cycle>> = Vec::new();
        for &seed in seeds {
            debug_assert_eq!(self.data.band_of(self.state(seed)), Some(n));
            self.ensure_typed(seed, n);
            polys.push(Some(Cycle::new(vec![seed])));
        }
        let mut resolved_pairs: BTreeSet<(Pt, Pt)> = BTreeSet::new();
        let cap = self.iteration_cap();
        for _ in 0..cap {
            if self.merge_step(n, &mut polys) {
                continue;
            }
            if self.forcing_step(n, &mut polys)? {
                continue;
            }
            if self.segment_step(n, &mut polys, &mut resolved_pairs) {
                continue;
            }
            return Ok(self.materialize(n, &polys));
        }
        Err(PolygonError::IterationCap { cap })
    }

    /// Merges the first intersecting pair of polygons, if any.
    fn merge_step(&mut self, n: usize, polys: &mut Vec<Option<Cycle>>) -> bool {
        for a_id in 0..polys.len() {
            let Some(a) = polys[a_id].clone() else {
                continue;
            };
            for b_id in a_id + 1..polys.len() {
                let Some(b) = &polys[b_id] else { continue };
                if !a.intersects(b) {
                    continue;
                }
                let keep: BTreeSet<Pt> = a.points().iter().chain(b.points()).copied().collect();
                let merged_pts = merge_cycles(&a, b, &keep);
                let area_before = a.signed_area2().max(b.signed_area2());
                let merged = Cycle::new(merged_pts);
                // The merged border must keep the allowed edge shapes and the
                // covered area must not shrink; both are theorems of the
                // construction, checked here because later verification
                // depends on them.
                self.assert_good_border(n, &merged);
                assert!(
                    merged.signed_area2() >= area_before,
                    "merging two polygons must not shrink the covered area"
                );
                polys[a_id] = None;
                polys[b_id] = None;
                polys.push(Some(merged));
                return true;
            }
        }
        false
    }

    fn assert_good_border(&self, n: usize, cycle: &Cycle) {
        let pts = cycle.points();
        if pts.len() < 2 {
            return;
        }
        let info = self.data.level(n);
        for w in 0..pts.len() {
            let a = pts[w];
            let b = pts[(w + 1) % pts.len()];
            let d = (b.0 - a.0, b.1 - a.1);
            assert!(
                info.classify_edge(self.data.radius, d).is_some(),
                "merged border takes a step {d:?} outside the allowed edge shapes"
            );
        }
    }

    /// Types the first pending vertex by adding its forcing triangle.
    fn forcing_step(
        &mut self,
        n: usize,
        polys: &mut Vec<Option<Cycle>>,
    ) -> Result<bool, PolygonError> {
        for id in 0..polys.len() {
            let Some(cycle) = &polys[id] else { continue };
            let pending = cycle
                .points()
                .iter()
                .copied()
                .find(|at| !self.types.contains_key(at));
            let Some(at) = pending else { continue };
            let ty = self.forced_type(at, n)?;
            let VertexType::Forced { left, right } = ty else {
                unreachable!("forced_type returns forcing triangles")
            };
            self.types.insert(at, ty);
            let bl = (at.0 + left, at.1 - 1);
            let br = (at.0 + right, at.1 - 1);
            self.ensure_typed(bl, n);
            self.ensure_typed(br, n);
            polys.push(Some(Cycle::new(vec![at, bl, br])));
            return Ok(true);
        }
        Ok(false)
    }

    /// Adds a segment polygon for the first close same-row vertex pair whose
    /// connecting segment escapes its polygon.
    fn segment_step(
        &mut self,
        _n: usize,
        polys: &mut Vec<Option<Cycle>>,
        resolved: &mut BTreeSet<(Pt, Pt)>,
    ) -> bool {
        for id in 0..polys.len() {
            let Some(cycle) = &polys[id] else { continue };
            let mut rows: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
            for &(i, t) in cycle.points() {
                rows.entry(t).or_default().push(i);
            }
            for (&t, xs) in &mut rows {
                xs.sort_unstable();
                xs.dedup();
                for a_idx in 0..xs.len() {
                    for b_idx in a_idx + 1..xs.len() {
                        let (xa, xb) = (xs[a_idx], xs[b_idx]);
                        if xb - xa > 2 * self.radius {
                            break;
                        }
                        if cycle.contains_row_segment(t, xa, xb) {
                            continue;
                        }
                        let pair = ((xa, t), (xb, t));
                        assert!(
                            resolved.insert(pair),
                            "segment violation for {pair:?} recurred after resolution"
                        );
                        polys.push(Some(Cycle::new(vec![pair.0, pair.1])));
                        return true;
                    }
                }
            }
        }
        false
    }

    fn materialize(&self, n: usize, polys: &[Option<Cycle>]) -> Vec<SpaceTimePolygon> {
        polys
            .iter()
            .flatten()
            .map(|cycle| SpaceTimePolygon {
                level: n,
                vertices: cycle
                    .points()
                    .iter()
                    .map(|&at| PolygonVertex {
                        at,
                        vtype: *self
                            .types
                            .get(&at)
                            .expect("fixed point leaves no pending vertex"),
                    })
                    .collect(),
            })
            .collect()
    }

    /// Harvests support links from a finished band and seeds higher bands.
    fn collect_supports(&mut self, n: usize, polygons: &[SpaceTimePolygon]) {
        let mut seen: BTreeSet<(Pt, Pt)> = BTreeSet::new();
        for poly in polygons {
            for v in &poly.vertices {
                if let VertexType::Support { level, offset } = v.vtype {
                    let support = (v.at.0 + offset, v.at.1 - 1);
                    if seen.insert((v.at, support)) {
                        self.links.push(SupportLink {
                            vertex: v.at,
                            vertex_level: n,
                            support,
                            support_level: level,
                        });
                        self.seeds_by_level
                            .entry(level)
                            .or_default()
                            .insert(support);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::testutil::synthetic_trajectory;
    use crate::polygon::{build_level_data, encode_system, verify_system};
    use crate::polygon::{decode_system, PolygonSystem};

    fn min2() -> (LocalRule, LevelData) {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let data = build_level_data(&rule, &[0, 1], 1 << 16).unwrap();
        (rule, data)
    }

    fn min3() -> (LocalRule, LevelData) {
        let rule = LocalRule::from_fn(3, 1, |w| w[1].min(w[2])).unwrap();
        let data = build_level_data(&rule, &[0, 1, 2], 1 << 16).unwrap();
        (rule, data)
    }

    #[test]
    fn single_error_yields_a_singleton_error_polygon() {
        let (rule, data) = min2();
        let traj = synthetic_trajectory(&rule, 25, 10, &[(10, 12, 1)]);
        let system = construct_system(&rule, &data, &traj, (12, 10)).unwrap();
        assert_eq!(system.base_level, 1);
        assert_eq!(system.levels.len(), 1);
        assert_eq!(system.links, vec![]);
        let poly = &system.levels[0].polygons[0];
        assert_eq!(
            poly.vertices,
            vec![PolygonVertex {
                at: (12, 10),
                vtype: VertexType::Error,
            }]
        );
        let report = verify_system(&system, &traj, &data);
        assert!(report.all_pass(), "{}", report.render());
        let walk = encode_system(&system, &data).unwrap();
        assert_eq!(walk.len(), 1);
        assert_eq!(
            decode_system(&walk).unwrap().vertices,
            system.vertex_levels()
        );
    }

    #[test]
    fn surviving_cell_above_two_errors_gets_a_forcing_triangle() {
        let (rule, data) = min2();
        // Two planted cells at row 10; their min survives to (15, 11) with no
        // error of its own, so the root needs a forcing triangle.
        let traj = synthetic_trajectory(&rule, 32, 11, &[(10, 15, 1), (10, 16, 1)]);
        assert_eq!(traj.rows[11][15], 1);
        assert!(!traj.errors[10][15]);
        let system = construct_system(&rule, &data, &traj, (15, 11)).unwrap();
        assert_eq!(system.levels.len(), 1);
        assert_eq!(system.levels[0].polygons.len(), 1);
        let poly = &system.levels[0].polygons[0];
        assert_eq!(
            poly.vertices,
            vec![
                PolygonVertex {
                    at: (15, 10),
                    vtype: VertexType::Error,
                },
                PolygonVertex {
                    at: (16, 10),
                    vtype: VertexType::Error,
                },
                PolygonVertex {
                    at: (15, 11),
                    vtype: VertexType::Forced { left: 0, right: 1 },
                },
            ]
        );
        let report = verify_system(&system, &traj, &data);
        assert!(report.all_pass(), "{}", report.render());

        let walk = encode_system(&system, &data).unwrap();
        let coords: Vec<Pt> = walk.entries.iter().map(|e| e.at).collect();
        assert_eq!(coords, vec![(15, 11), (15, 10), (16, 10)]);
        assert_eq!(
            decode_system(&walk).unwrap().vertices,
            system.vertex_levels()
        );

        // The dump round-trips and the parsed system verifies identically.
        let parsed = PolygonSystem::parse(&system.dump()).unwrap();
        assert_eq!(parsed, system);
        assert!(verify_system(&parsed, &traj, &data).all_pass());
    }

    #[test]
    fn higher_band_state_spawns_a_second_level() {
        let (rule, data) = min3();
        // (15,10) holds 1 and (16,10) holds 2; their min keeps (15,11) at 1,
        // which is then supported by the band-2 state below-right.
        let traj = synthetic_trajectory(&rule, 32, 11, &[(10, 15, 1), (10, 16, 2)]);
        assert_eq!(traj.rows[11][15], 1);
        let system = construct_system(&rule, &data, &traj, (15, 11)).unwrap();
        assert_eq!(system.base_level, 1);
        assert_eq!(system.levels.len(), 2);
        assert_eq!(
            system.levels[0].polygons[0].vertices,
            vec![PolygonVertex {
                at: (15, 11),
                vtype: VertexType::Support {
                    level: 2,
                    offset: 1,
                },
            }]
        );
        assert_eq!(system.levels[1].level, 2);
        assert_eq!(system.levels[1].seeds, vec![(16, 10)]);
        assert_eq!(
            system.levels[1].polygons[0].vertices,
            vec![PolygonVertex {
                at: (16, 10),
                vtype: VertexType::Error,
            }]
        );
        assert_eq!(
            system.links,
            vec![SupportLink {
                vertex: (15, 11),
                vertex_level: 1,
                support: (16, 10),
                support_level: 2,
            }]
        );
        let report = verify_system(&system, &traj, &data);
        assert!(report.all_pass(), "{}", report.render());

        let walk = encode_system(&system, &data).unwrap();
        let entries: Vec<(Pt, usize)> = walk.entries.iter().map(|e| (e.at, e.level)).collect();
        assert_eq!(
            entries,
            vec![((15, 11), 1), ((16, 10), 2), ((16, 10), 2), ((15, 11), 1),]
        );
        assert_eq!(
            decode_system(&walk).unwrap().vertices,
            system.vertex_levels()
        );
    }

    #[test]
    fn construction_rejects_bad_targets() {
        let (rule, data) = min2();
        let traj = synthetic_trajectory(&rule, 25, 10, &[(10, 12, 1)]);
        assert!(matches!(
            construct_system(&rule, &data, &traj, (12, 99)),
            Err(PolygonError::TargetOutOfRange { .. })
        ));
        assert!(matches!(
            construct_system(&rule, &data, &traj, (1, 10)),
            Err(PolygonError::ConeOutOfWindow { .. })
        ));
        assert!(matches!(
            construct_system(&rule, &data, &traj, (13, 10)),
            Err(PolygonError::TargetZero { at: (13, 10) })
        ));
    }
}
