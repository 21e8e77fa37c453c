//! Serialization of a polygon system as a single short walk.
//!
//! The whole system collapses into one list of coordinates: the base polygon's
//! border cycle, into which every higher-band polygon is spliced at the vertex
//! it supports.  Consecutive entries stay within one row and `k·r` columns of
//! each other, and the list length is at most `2·k·r` per distinct vertex, so
//! the number of possible systems with `H` vertices is exponentially bounded —
//! the counting step behind the low-noise stability argument.

use super::level::LevelData;
use super::{PolygonError, PolygonSystem, SpaceTimePolygon};
use std::collections::BTreeMap;
use std::fmt;

/// One step of an encoded walk: a coordinate and its band index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkEntry {
    /// Coordinate `(i, t)`.
    pub at: (i64, i64),
    /// Band index of the polygon this entry belongs to.
    pub level: usize,
}

/// A serialized polygon system: the spliced border walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedWalk {
    /// Walk entries in traversal order.
    pub entries: Vec<WalkEntry>,
    /// Bound on horizontal steps: consecutive entries differ by at most this
    /// many columns (`k·r` for a length-`k` chain of radius `r`).
    pub step_bound: i64,
}

impl EncodedWalk {
    /// Number of entries `|L|`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Is the walk empty?  (Never true for a walk produced by the encoder.)
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Line-oriented rendering of the walk.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("ca-walk v1\n");
        out.push_str(&format!("step-bound {}\n", self.step_bound));
        out.push_str(&format!("entries {}\n", self.entries.len()));
        for e in &self.entries {
            out.push_str(&format!("w {} {} {}\n", e.at.0, e.at.1, e.level));
        }
        out.push_str("end\n");
        out
    }
}

impl fmt::Display for EncodedWalk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// The vertex skeleton recovered from a walk: every distinct coordinate with
/// its band index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemSkeleton {
    /// Distinct walk coordinates mapped to their band index.
    pub vertices: BTreeMap<(i64, i64), usize>,
}

/// The vertex of `poly` serving as its base: among the polygon's vertices
/// that are seeds of its band, the one with maximal time, ties broken by
/// minimal column.
fn base_vertex(poly: &SpaceTimePolygon, seeds: &[(i64, i64)]) -> Result<(i64, i64), PolygonError> {
    poly.vertices
        .iter()
        .map(|v| v.at)
        .filter(|at| seeds.contains(at))
        .max_by_key(|&(i, t)| (t, -i))
        .ok_or_else(|| {
            PolygonError::Inconsistent(format!(
                "a band-{} polygon contains none of its band's seeds",
                poly.level
            ))
        })
}

/// Serializes a polygon system as a single spliced walk.
///
/// The base polygon's cyclic border list, rotated to start at the root,
/// becomes the initial walk.  Then, band by band upward, each polygon is
/// spliced in at the vertex its base supports: the walk entry `a` for that
/// vertex expands to `a, b, x_1, …, x_q, b, a` where `b, x_1, …, x_q` is the
/// polygon's border list rotated to start at its base `b`.  Every hop stays
/// within one row and `step_bound` columns, and the total length is at most
/// `2·k·r` times the number of distinct vertices.
pub fn encode_system(
    system: &PolygonSystem,
    data: &LevelData,
) -> Result<EncodedWalk, PolygonError> {
    let step_bound = (data.chain_length() * data.radius) as i64;
    let mut level_systems = system.levels.iter();
    let base_system = level_systems
        .next()
        .ok_or_else(|| PolygonError::Inconsistent("system has no bands".to_string()))?;
    if base_system.level != system.base_level {
        return Err(PolygonError::Inconsistent(
            "first band of the system is not the base band".to_string(),
        ));
    }
    let [base_polygon] = base_system.polygons.as_slice() else {
        return Err(PolygonError::Inconsistent(format!(
            "base band must hold exactly one polygon, found {}",
            base_system.polygons.len()
        )));
    };

    let rotate_to = |poly: &SpaceTimePolygon, start: (i64, i64)| -> Vec<WalkEntry> {
        let pos = poly
            .vertices
            .iter()
            .position(|v| v.at == start)
            .expect("rotation start is a polygon vertex");
        (0..poly.vertices.len())
            .map(|w| WalkEntry {
                at: poly.vertices[(pos + w) % poly.vertices.len()].at,
                level: poly.level,
            })
            .collect()
    };

    if !base_polygon.vertices.iter().any(|v| v.at == system.root) {
        return Err(PolygonError::Inconsistent(
            "base polygon does not contain the root vertex".to_string(),
        ));
    }
    let mut walk = rotate_to(base_polygon, system.root);

    for ls in level_systems {
        // Deterministic splice order within a band: latest base first, then
        // leftmost, then polygon index.
        let mut order: Vec<(usize, (i64, i64))> = Vec::with_capacity(ls.polygons.len());
        for (idx, poly) in ls.polygons.iter().enumerate() {
            if poly.vertices.is_empty() {
                return Err(PolygonError::Inconsistent(format!(
                    "band-{} polygon {idx} has no vertices",
                    ls.level
                )));
            }
            order.push((idx, base_vertex(poly, &ls.seeds)?));
        }
        order.sort_by_key(|&(idx, (i, t))| (-t, i, idx));

        for (idx, base) in order {
            let poly = &ls.polygons[idx];
            // The splice anchor: the supported vertex whose support point is
            // this base, lowest band first, then leftmost, then earliest.
            let anchor = system
                .links
                .iter()
                .filter(|l| l.support == base && l.support_level == ls.level)
                .map(|l| (l.vertex_level, l.vertex.0, l.vertex.1))
                .min()
                .map(|(_, i, t)| (i, t))
                .ok_or_else(|| {
                    PolygonError::Inconsistent(format!(
                        "no support link leads to the base {base:?} of a band-{} polygon",
                        ls.level
                    ))
                })?;
            let pos = walk.iter().position(|e| e.at == anchor).ok_or_else(|| {
                PolygonError::Inconsistent(format!(
                    "splice anchor {anchor:?} does not occur on the walk"
                ))
            })?;
            let anchor_entry = walk[pos];
            let mut block = Vec::with_capacity(poly.vertices.len() + 4);
            block.push(anchor_entry);
            block.extend(rotate_to(poly, base));
            block.push(WalkEntry {
                at: base,
                level: ls.level,
            });
            block.push(anchor_entry);
            walk.splice(pos..=pos, block);
        }
    }

    let encoded = EncodedWalk {
        entries: walk,
        step_bound,
    };
    validate_walk(&encoded)
        .map_err(|e| PolygonError::Inconsistent(format!("system produces an invalid walk: {e}")))?;
    let bound = 2 * data.chain_length() * data.radius * system.vertex_count();
    if encoded.len() > bound {
        return Err(PolygonError::Inconsistent(format!(
            "walk length {} exceeds its guaranteed bound {bound}",
            encoded.len()
        )));
    }
    Ok(encoded)
}

fn validate_walk(walk: &EncodedWalk) -> Result<(), PolygonError> {
    if walk.step_bound < 1 {
        return Err(PolygonError::MalformedWalk {
            index: 0,
            message: format!("step bound {} is not positive", walk.step_bound),
        });
    }
    if walk.entries.is_empty() {
        return Err(PolygonError::MalformedWalk {
            index: 0,
            message: "walk has no entries".to_string(),
        });
    }
    for index in 1..walk.entries.len() {
        let a = walk.entries[index - 1].at;
        let b = walk.entries[index].at;
        if (b.0 - a.0).abs() > walk.step_bound {
            return Err(PolygonError::MalformedWalk {
                index,
                message: format!(
                    "horizontal step from {a:?} to {b:?} exceeds the bound {}",
                    walk.step_bound
                ),
            });
        }
        if (b.1 - a.1).abs() > 1 {
            return Err(PolygonError::MalformedWalk {
                index,
                message: format!("vertical step from {a:?} to {b:?} skips a row"),
            });
        }
    }
    Ok(())
}

/// Rebuilds the vertex skeleton from an encoded walk.
///
/// Validates the step bounds and the consistency of band labels: the same
/// coordinate must carry the same band everywhere it appears.
pub fn decode_system(walk: &EncodedWalk) -> Result<SystemSkeleton, PolygonError> {
    validate_walk(walk)?;
    let mut vertices: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for (index, e) in walk.entries.iter().enumerate() {
        match vertices.get(&e.at) {
            None => {
                vertices.insert(e.at, e.level);
            }
            Some(&level) if level == e.level => {}
            Some(&level) => {
                return Err(PolygonError::MalformedWalk {
                    index,
                    message: format!(
                        "coordinate {:?} appears with bands {level} and {}",
                        e.at, e.level
                    ),
                });
            }
        }
    }
    Ok(SystemSkeleton { vertices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::{build_level_data, LevelSystem, PolygonVertex, SupportLink, VertexType};
    use crate::rule::LocalRule;

    fn min3_data() -> LevelData {
        let rule = LocalRule::from_fn(3, 1, |w| w[1].min(w[2])).unwrap();
        build_level_data(&rule, &[0, 1, 2], 1 << 16).unwrap()
    }

    fn min2_data() -> LevelData {
        let rule = LocalRule::builtin("min2", None).unwrap();
        build_level_data(&rule, &[0, 1], 1 << 16).unwrap()
    }

    #[test]
    fn single_polygon_walk_is_the_border_list_itself() {
        let system = PolygonSystem {
            root: (5, 11),
            base_level: 1,
            levels: vec![LevelSystem {
                level: 1,
                seeds: vec![(5, 11)],
                polygons: vec![SpaceTimePolygon {
                    level: 1,
                    vertices: vec![
                        PolygonVertex {
                            at: (5, 10),
                            vtype: VertexType::Error,
                        },
                        PolygonVertex {
                            at: (6, 10),
                            vtype: VertexType::Error,
                        },
                        PolygonVertex {
                            at: (5, 11),
                            vtype: VertexType::Forced { left: 0, right: 1 },
                        },
                    ],
                }],
            }],
            links: vec![],
        };
        let walk = encode_system(&system, &min2_data()).unwrap();
        assert_eq!(walk.step_bound, 2);
        let coords: Vec<(i64, i64)> = walk.entries.iter().map(|e| e.at).collect();
        // The border list rotated to start at the root.
        assert_eq!(coords, vec![(5, 11), (5, 10), (6, 10)]);
        assert!(walk.entries.iter().all(|e| e.level == 1));
        let skeleton = decode_system(&walk).unwrap();
        assert_eq!(skeleton.vertices, system.vertex_levels());
        // At most 2·k·r entries per distinct vertex; min2's chain has
        // k = 2 and r = 1.
        assert!(walk.len() <= 4 * system.vertex_count());
    }

    #[test]
    fn two_band_system_splices_at_the_supported_vertex() {
        let system = PolygonSystem {
            root: (5, 11),
            base_level: 1,
            levels: vec![
                LevelSystem {
                    level: 1,
                    seeds: vec![(5, 11)],
                    polygons: vec![SpaceTimePolygon {
                        level: 1,
                        vertices: vec![PolygonVertex {
                            at: (5, 11),
                            vtype: VertexType::Support {
                                level: 2,
                                offset: 0,
                            },
                        }],
                    }],
                },
                LevelSystem {
                    level: 2,
                    seeds: vec![(5, 10)],
                    polygons: vec![SpaceTimePolygon {
                        level: 2,
                        vertices: vec![PolygonVertex {
                            at: (5, 10),
                            vtype: VertexType::Error,
                        }],
                    }],
                },
            ],
            links: vec![SupportLink {
                vertex: (5, 11),
                vertex_level: 1,
                support: (5, 10),
                support_level: 2,
            }],
        };
        let data = min3_data();
        let walk = encode_system(&system, &data).unwrap();
        assert_eq!(walk.step_bound, 3);
        let entries: Vec<((i64, i64), usize)> =
            walk.entries.iter().map(|e| (e.at, e.level)).collect();
        assert_eq!(
            entries,
            vec![((5, 11), 1), ((5, 10), 2), ((5, 10), 2), ((5, 11), 1),]
        );
        let skeleton = decode_system(&walk).unwrap();
        assert_eq!(skeleton.vertices, system.vertex_levels());

        // Removing the support link leaves the splice with no anchor.
        let mut broken = system.clone();
        broken.links.clear();
        assert!(matches!(
            encode_system(&broken, &data),
            Err(PolygonError::Inconsistent(_))
        ));
    }

    #[test]
    fn decode_rejects_malformed_walks() {
        let empty = EncodedWalk {
            entries: vec![],
            step_bound: 2,
        };
        assert!(matches!(
            decode_system(&empty),
            Err(PolygonError::MalformedWalk { index: 0, .. })
        ));

        let wide = EncodedWalk {
            entries: vec![
                WalkEntry {
                    at: (0, 0),
                    level: 1,
                },
                WalkEntry {
                    at: (5, 0),
                    level: 1,
                },
            ],
            step_bound: 2,
        };
        assert!(matches!(
            decode_system(&wide),
            Err(PolygonError::MalformedWalk { index: 1, .. })
        ));

        let tall = EncodedWalk {
            entries: vec![
                WalkEntry {
                    at: (0, 0),
                    level: 1,
                },
                WalkEntry {
                    at: (0, 2),
                    level: 1,
                },
            ],
            step_bound: 2,
        };
        assert!(matches!(
            decode_system(&tall),
            Err(PolygonError::MalformedWalk { index: 1, .. })
        ));

        let conflicted = EncodedWalk {
            entries: vec![
                WalkEntry {
                    at: (0, 0),
                    level: 1,
                },
                WalkEntry {
                    at: (1, 0),
                    level: 2,
                },
                WalkEntry {
                    at: (0, 0),
                    level: 2,
                },
            ],
            step_bound: 2,
        };
        assert!(matches!(
            decode_system(&conflicted),
            Err(PolygonError::MalformedWalk { index: 2, .. })
        ));

        let renders = EncodedWalk {
            entries: vec![WalkEntry {
                at: (3, 4),
                level: 1,
            }],
            step_bound: 2,
        };
        assert_eq!(
            renders.render(),
            "ca-walk v1\nstep-bound 2\nentries 1\nw 3 4 1\nend\n"
        );
    }
}
