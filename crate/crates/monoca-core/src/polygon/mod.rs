//! Space-time polygon systems over noisy trajectories.
//!
//! Given a rule whose quiescent chain `0 = a_1 < … < a_k = m` has every
//! consecutive pair shrinking, a nonzero cell in a noisy trajectory can be
//! *explained*: its past light cone is covered by a system of polygons whose
//! border vertices each carry one of three justifications — a higher-band
//! state nearby one row earlier (type 1), a recorded noise error (type 2), or
//! a forcing triangle contained in the polygon (type 3).  A guaranteed
//! fraction of border vertices are then of types 1 or 2, and a guaranteed
//! fraction of the whole system cites real errors, which is what makes
//! nonzero islands exponentially unlikely at low noise.
//!
//! The module builds the per-band data ([`build_level_data`]), constructs the
//! system for a concrete trajectory ([`construct_system`]), re-checks every
//! required property from scratch ([`verify_system`]), and serializes the
//! vertex skeleton as a short walk ([`encode_system`] / [`decode_system`]).

mod construct;
mod encode;
pub(crate) mod geom;
mod level;
mod verify;

pub use construct::construct_system;
pub use encode::{decode_system, encode_system, EncodedWalk, SystemSkeleton, WalkEntry};
pub use level::{build_level_data, EdgeClass, LevelData, LevelInfo};
pub use verify::{verify_system, VerifyCheck, VerifyReport};

use crate::forcing::ForcingError;
use crate::rule::{RuleError, State};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Errors from level-data construction, system construction, and parsing.
#[derive(Debug, Error)]
pub enum PolygonError {
    /// The quiescent chain is malformed for this rule.
    #[error("invalid chain: {0}")]
    ChainInvalid(String),
    /// A chain edge admits no shrinking certificate within the search limits.
    #[error("no shrinking certificate found for chain edge ({lower},{upper})")]
    MissingCertificate {
        /// Lower state of the failing edge.
        lower: State,
        /// Upper state of the failing edge.
        upper: State,
    },
    /// The target cell holds state zero, so there is nothing to explain.
    #[error("target cell {at:?} is zero")]
    TargetZero {
        /// The offending coordinate.
        at: (i64, i64),
    },
    /// The target's backward light cone leaves the recorded window.
    #[error("light cone of target needs columns {needed_lo}..={needed_hi}, window has 0..{width}")]
    ConeOutOfWindow {
        /// Leftmost column the cone reads.
        needed_lo: i64,
        /// Rightmost column the cone reads.
        needed_hi: i64,
        /// Recorded window width.
        width: usize,
    },
    /// The target coordinate lies outside the recorded trajectory.
    #[error("target {at:?} outside recorded trajectory (width {width}, horizon {horizon})")]
    TargetOutOfRange {
        /// The offending coordinate.
        at: (i64, i64),
        /// Recorded window width.
        width: usize,
        /// Recorded horizon.
        horizon: usize,
    },
    /// The initial row is not quiescent zero inside the light cone.
    #[error("initial row is not all zero inside the target's light cone")]
    InitialRowNotZero,
    /// A border vertex admits no type: the trajectory is inconsistent with
    /// the supplied level data (wrong rule, wrong power, or corrupted rows).
    #[error("vertex {at:?} admits no type; level data and trajectory disagree")]
    UntypableVertex {
        /// The offending coordinate.
        at: (i64, i64),
    },
    /// Construction failed to reach a fixed point within the iteration cap.
    #[error("construction exceeded the iteration cap of {cap}")]
    IterationCap {
        /// The cap that was hit.
        cap: usize,
    },
    /// An encoded walk violates the step bounds or is internally inconsistent.
    #[error("walk entry {index}: {message}")]
    MalformedWalk {
        /// Index of the offending entry.
        index: usize,
        /// What went wrong.
        message: String,
    },
    /// A system handed to the encoder is internally inconsistent.
    #[error("cannot encode system: {0}")]
    Inconsistent(String),
    /// A system dump failed to parse.
    #[error("system dump, line {line}: {message}")]
    Parse {
        /// 1-based line number.
        line: usize,
        /// What went wrong.
        message: String,
    },
    /// An underlying rule error.
    #[error(transparent)]
    Rule(#[from] RuleError),
    /// An underlying forcing-set error.
    #[error(transparent)]
    Forcing(#[from] ForcingError),
}

/// The justification a border vertex carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexType {
    /// A strictly higher band was present nearby one row earlier.
    Support {
        /// Band index of the supporting state (greater than the vertex's own).
        level: usize,
        /// Spatial offset of the support point one row down.
        offset: i64,
    },
    /// The cell below this vertex is a recorded noise error.
    Error,
    /// A forcing triangle contained in the polygon explains the vertex.
    Forced {
        /// Offset of the left triangle corner (a member of the band's `U` set).
        left: i64,
        /// Offset of the right triangle corner (a member of the band's `V` set).
        right: i64,
    },
}

impl VertexType {
    /// The numeric kind: 1 for support, 2 for error, 3 for forced.
    pub fn kind(&self) -> u8 {
        match self {
            VertexType::Support { .. } => 1,
            VertexType::Error => 2,
            VertexType::Forced { .. } => 3,
        }
    }
}

/// One entry of a polygon's cyclic border list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolygonVertex {
    /// Coordinate `(i, t)` of the vertex.
    pub at: (i64, i64),
    /// The vertex's justification.
    pub vtype: VertexType,
}

/// A single space-time polygon: a counterclockwise cyclic border list.
///
/// The polygon's region is the filled border cycle; coordinates may repeat in
/// the list when the border traverses a spur twice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceTimePolygon {
    /// Band index this polygon explains.
    pub level: usize,
    /// Cyclic border list in counterclockwise order.
    pub vertices: Vec<PolygonVertex>,
}

impl SpaceTimePolygon {
    /// Counts of type-1, type-2, and type-3 entries in the border list.
    pub fn type_counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        for v in &self.vertices {
            counts[usize::from(v.vtype.kind()) - 1] += 1;
        }
        counts
    }
}

/// A recorded link from a type-1 vertex to its support point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportLink {
    /// The supported vertex.
    pub vertex: (i64, i64),
    /// Band index of the supported vertex's polygon.
    pub vertex_level: usize,
    /// The support point one row below the vertex.
    pub support: (i64, i64),
    /// Band index of the support point's state.
    pub support_level: usize,
}

/// All polygons of one band, together with the seeds they explain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSystem {
    /// Band index.
    pub level: usize,
    /// Seed coordinates this band's polygons must cover.
    pub seeds: Vec<(i64, i64)>,
    /// Disjoint polygons covering the seeds.
    pub polygons: Vec<SpaceTimePolygon>,
}

/// A complete polygon system explaining one nonzero target cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolygonSystem {
    /// The explained cell `(i, T)`.
    pub root: (i64, i64),
    /// Band index of the root state.
    pub base_level: usize,
    /// Per-band systems, ascending by band index (starting at `base_level`).
    pub levels: Vec<LevelSystem>,
    /// All support links discovered during construction.
    pub links: Vec<SupportLink>,
}

impl PolygonSystem {
    /// Every border vertex coordinate mapped to its band index.
    pub fn vertex_levels(&self) -> BTreeMap<(i64, i64), usize> {
        let mut map = BTreeMap::new();
        for ls in &self.levels {
            for poly in &ls.polygons {
                for v in &poly.vertices {
                    map.insert(v.at, ls.level);
                }
            }
        }
        map
    }

    /// Number of distinct border vertices across the whole system.
    pub fn vertex_count(&self) -> usize {
        self.vertex_levels().len()
    }

    /// Counts of distinct vertices of each type across the whole system.
    pub fn distinct_type_counts(&self) -> [usize; 3] {
        let mut seen: BTreeMap<(i64, i64), u8> = BTreeMap::new();
        for ls in &self.levels {
            for poly in &ls.polygons {
                for v in &poly.vertices {
                    seen.insert(v.at, v.vtype.kind());
                }
            }
        }
        let mut counts = [0usize; 3];
        for kind in seen.values() {
            counts[usize::from(*kind) - 1] += 1;
        }
        counts
    }

    /// Total number of polygons across all bands.
    pub fn polygon_count(&self) -> usize {
        self.levels.iter().map(|ls| ls.polygons.len()).sum()
    }

    /// Serializes the system in the line-oriented dump format.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("ca-polysys v1\n");
        out.push_str(&format!("root {} {}\n", self.root.0, self.root.1));
        out.push_str(&format!("base-level {}\n", self.base_level));
        out.push_str(&format!("levels {}\n", self.levels.len()));
        for ls in &self.levels {
            out.push_str(&format!("level {}\n", ls.level));
            out.push_str(&format!("seeds {}\n", ls.seeds.len()));
            for s in &ls.seeds {
                out.push_str(&format!("s {} {}\n", s.0, s.1));
            }
            out.push_str(&format!("polygons {}\n", ls.polygons.len()));
            for (id, poly) in ls.polygons.iter().enumerate() {
                out.push_str(&format!("polygon {} {}\n", poly.level, id));
                out.push_str(&format!("vertices {}\n", poly.vertices.len()));
                for v in &poly.vertices {
                    match v.vtype {
                        VertexType::Support { level, offset } => out.push_str(&format!(
                            "v {} {} 1 s {} {}\n",
                            v.at.0, v.at.1, level, offset
                        )),
                        VertexType::Error => out.push_str(&format!("v {} {} 2\n", v.at.0, v.at.1)),
                        VertexType::Forced { left, right } => out
                            .push_str(&format!("v {} {} 3 p {} {}\n", v.at.0, v.at.1, left, right)),
                    }
                }
            }
        }
        out.push_str(&format!("links {}\n", self.links.len()));
        for l in &self.links {
            out.push_str(&format!(
                "l {} {} {} {} {} {}\n",
                l.vertex.0, l.vertex.1, l.vertex_level, l.support.0, l.support.1, l.support_level
            ));
        }
        out.push_str("end\n");
        out
    }

    /// Parses a dump produced by [`PolygonSystem::dump`].
    pub fn parse(text: &str) -> Result<PolygonSystem, PolygonError> {
        Parser::new(text).system()
    }
}

impl fmt::Display for PolygonSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            lines: text.lines().enumerate(),
        }
    }

    fn fail<T>(line: usize, message: impl Into<String>) -> Result<T, PolygonError> {
        Err(PolygonError::Parse {
            line: line + 1,
            message: message.into(),
        })
    }

    fn next_line(&mut self) -> Result<(usize, &'a str), PolygonError> {
        self.lines
            .next()
            .ok_or(PolygonError::Parse {
                line: 0,
                message: "unexpected end of dump".to_string(),
            })
            .map(|(n, l)| (n, l.trim_end()))
    }

    fn keyword_line(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>), PolygonError> {
        let (n, line) = self.next_line()?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == keyword => Ok((n, parts.collect())),
            Some(k) => Self::fail(n, format!("expected `{keyword}`, found `{k}`")),
            None => Self::fail(n, format!("expected `{keyword}`, found blank line")),
        }
    }

    fn int<T: std::str::FromStr>(line: usize, token: Option<&str>) -> Result<T, PolygonError> {
        let token = token.ok_or(PolygonError::Parse {
            line: line + 1,
            message: "missing field".to_string(),
        })?;
        token.parse().map_err(|_| PolygonError::Parse {
            line: line + 1,
            message: format!("bad integer `{token}`"),
        })
    }

    fn system(&mut self) -> Result<PolygonSystem, PolygonError> {
        let (n, header) = self.next_line()?;
        if header != "ca-polysys v1" {
            return Self::fail(n, "expected header `ca-polysys v1`");
        }
        let (n, args) = self.keyword_line("root")?;
        let root = (
            Self::int(n, args.first().copied())?,
            Self::int(n, args.get(1).copied())?,
        );
        let (n, args) = self.keyword_line("base-level")?;
        let base_level: usize = Self::int(n, args.first().copied())?;
        let (n, args) = self.keyword_line("levels")?;
        let level_count: usize = Self::int(n, args.first().copied())?;
        let mut levels = Vec::with_capacity(level_count);
        for _ in 0..level_count {
            let (n, args) = self.keyword_line("level")?;
            let level: usize = Self::int(n, args.first().copied())?;
            let (n, args) = self.keyword_line("seeds")?;
            let seed_count: usize = Self::int(n, args.first().copied())?;
            let mut seeds = Vec::with_capacity(seed_count);
            for _ in 0..seed_count {
                let (n, args) = self.keyword_line("s")?;
                seeds.push((
                    Self::int(n, args.first().copied())?,
                    Self::int(n, args.get(1).copied())?,
                ));
            }
            let (n, args) = self.keyword_line("polygons")?;
            let poly_count: usize = Self::int(n, args.first().copied())?;
            let mut polygons = Vec::with_capacity(poly_count);
            for expected_id in 0..poly_count {
                let (n, args) = self.keyword_line("polygon")?;
                let plevel: usize = Self::int(n, args.first().copied())?;
                let id: usize = Self::int(n, args.get(1).copied())?;
                if id != expected_id {
                    return Self::fail(n, format!("expected polygon id {expected_id}, found {id}"));
                }
                let (n, args) = self.keyword_line("vertices")?;
                let vcount: usize = Self::int(n, args.first().copied())?;
                let mut vertices = Vec::with_capacity(vcount);
                for _ in 0..vcount {
                    let (n, args) = self.keyword_line("v")?;
                    let at = (
                        Self::int(n, args.first().copied())?,
                        Self::int(n, args.get(1).copied())?,
                    );
                    let kind: u8 = Self::int(n, args.get(2).copied())?;
                    let vtype = match kind {
                        1 => {
                            if args.get(3) != Some(&"s") {
                                return Self::fail(n, "type-1 vertex needs `s <level> <offset>`");
                            }
                            VertexType::Support {
                                level: Self::int(n, args.get(4).copied())?,
                                offset: Self::int(n, args.get(5).copied())?,
                            }
                        }
                        2 => VertexType::Error,
                        3 => {
                            if args.get(3) != Some(&"p") {
                                return Self::fail(n, "type-3 vertex needs `p <left> <right>`");
                            }
                            VertexType::Forced {
                                left: Self::int(n, args.get(4).copied())?,
                                right: Self::int(n, args.get(5).copied())?,
                            }
                        }
                        other => return Self::fail(n, format!("unknown vertex type `{other}`")),
                    };
                    vertices.push(PolygonVertex { at, vtype });
                }
                polygons.push(SpaceTimePolygon {
                    level: plevel,
                    vertices,
                });
            }
            levels.push(LevelSystem {
                level,
                seeds,
                polygons,
            });
        }
        let (n, args) = self.keyword_line("links")?;
        let link_count: usize = Self::int(n, args.first().copied())?;
        let mut links = Vec::with_capacity(link_count);
        for _ in 0..link_count {
            let (n, args) = self.keyword_line("l")?;
            links.push(SupportLink {
                vertex: (
                    Self::int(n, args.first().copied())?,
                    Self::int(n, args.get(1).copied())?,
                ),
                vertex_level: Self::int(n, args.get(2).copied())?,
                support: (
                    Self::int(n, args.get(3).copied())?,
                    Self::int(n, args.get(4).copied())?,
                ),
                support_level: Self::int(n, args.get(5).copied())?,
            });
        }
        let (n, line) = self.next_line()?;
        if line != "end" {
            return Self::fail(n, "expected `end`");
        }
        Ok(PolygonSystem {
            root,
            base_level,
            levels,
            links,
        })
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::noise::{Boundary, NoisyTrajectory};
    use crate::rule::{LocalRule, State};

    /// Evolves an all-zero window under `rule` with a zero boundary, planting
    /// the given `(row, column, state)` cells and recording each plant that
    /// changes the noiseless image as an error.
    pub(crate) fn synthetic_trajectory(
        rule: &LocalRule,
        width: usize,
        horizon: usize,
        plants: &[(usize, usize, State)],
    ) -> NoisyTrajectory {
        let r = rule.radius() as i64;
        let mut rows = vec![vec![0 as State; width]];
        let mut errors: Vec<Vec<bool>> = Vec::new();
        for t in 1..=horizon {
            let prev = rows.last().expect("rows start non-empty");
            let mut next = Vec::with_capacity(width);
            for i in 0..width {
                let nb: Vec<State> = (-r..=r)
                    .map(|d| {
                        let j = i as i64 + d;
                        if j < 0 || j >= width as i64 {
                            0
                        } else {
                            prev[j as usize]
                        }
                    })
                    .collect();
                next.push(rule.apply_local(&nb));
            }
            let mut err = vec![false; width];
            for &(pt, pi, s) in plants {
                if pt == t && next[pi] != s {
                    next[pi] = s;
                    err[pi] = true;
                }
            }
            rows.push(next);
            errors.push(err);
        }
        NoisyTrajectory {
            state_count: rule.state_count(),
            width,
            horizon,
            seed: 0,
            trial: 0,
            boundary: Boundary::FixedQuiescent(0),
            rows,
            errors,
        }
    }
}
