//! Analysis toolkit for one-dimensional monotone cellular automata.
//!
//! The crate is organized around a dense [`LocalRule`] table and a small set of
//! analysis engines built on top of it:
//!
//! - [`rule`]: rules, configurations, builtin catalogue, table transforms
//!   (reflect / invert / restrict / power composition).
//! - [`step`]: exact evolution of two-sided step configurations and
//!   computation of the left/right edge speeds ("rates") with certification.
//! - [`forcing`]: enumeration of minimal forcing sets, hull intersections τ,
//!   and shrinking certificates.
//! - [`decide`]: eroder / shrinking / stable-eroder deciders returning
//!   three-valued verdicts with machine-checkable certificates.
//! - [`noise`]: reproducible Monte Carlo simulation of ε-perturbed
//!   trajectories (density curves, island survival, ergodicity probes).
//! - [`polygon`]: construction and verification of space-time witness systems
//!   that trace a nonzero cell of a noisy trajectory back to recorded errors.
//!
//! All types are immutable after construction and safe to share across
//! threads; every simulation is bit-reproducible for a fixed seed regardless
//! of worker count.

#![deny(missing_docs)]
#![forbid(unsafe_code)]

pub mod decide;
pub mod forcing;
pub mod noise;
pub mod polygon;
pub mod rule;
pub mod step;

pub use decide::{
    binary_equivalence_check, is_eroder, is_shrinking, is_stable_eroder, Answer, BinaryReport,
    DecideError, DecideParams, EroderCheck, EroderVerdict, ShrinkVerdict, StableVerdict,
};
pub use forcing::{
    is_forcing, minimal_forcing_sets, shrinking_certificate, sum_forcing, tau, ForcingError,
    ForcingFamily, ShrinkingCertificate, TauResult,
};
pub use noise::{
    density_zero, ergodicity_probe, island_survival, run_noisy, run_noisy_trial,
    tail_nonzero_density, BinomialEstimate, Boundary, DensityPoint, NoiseError, NoiseModel,
    NoisyTrajectory, ProbePoint, SimConfig, SurvivalPoint,
};
pub use polygon::{
    build_level_data, construct_system, decode_system, encode_system, verify_system, EdgeClass,
    EncodedWalk, LevelData, LevelInfo, LevelSystem, PolygonError, PolygonSystem, PolygonVertex,
    SpaceTimePolygon, SupportLink, SystemSkeleton, VerifyCheck, VerifyReport, VertexType,
    WalkEntry,
};
pub use rule::{format_rule, parse_rule, Configuration, LocalRule, RuleError, State};
pub use step::{
    evolve_step, rate, rate_bounds, rate_by_cycle, rate_table, EdgeSide, PairRates, RateEstimate,
    RateEvidence, RateParams, RateStatus, RateTable, StepTrace,
};

/// Exact rational number used for rates and geometric predicates.
pub type Rational = num_rational::Ratio<i64>;
