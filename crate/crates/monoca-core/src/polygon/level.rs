//! Per-band data derived from a quiescent chain: normalized forcing sets,
//! border edge shapes, and the guaranteed border-vertex fractions.

use super::PolygonError;
use crate::forcing::{shrinking_certificate, sum_forcing, ShrinkingCertificate, DEFAULT_K_MAX};
use crate::rule::{LocalRule, RuleError, State, DEFAULT_TABLE_CAP};
use crate::Rational;
use num_integer::Integer;
use num_rational::Ratio;

/// Classification of a border edge displacement for one band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    /// Down-and-left moves `(j, -1)` with `-r <= j <= u_n`.
    Left,
    /// Up-and-left moves `(j, +1)` with `-r <= j <= -v_n`.
    Right,
    /// Rightward moves `(j, 0)` with `0 < j <= 2r`.
    Across,
    /// Leftward moves `(j, 0)` with `-2r <= j < 0`.
    Back,
}

/// Data for one band `(a_n, a_{n+1}]` of the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelInfo {
    /// 1-based band index `n`.
    pub level: usize,
    /// The band bounds `(a_n, a_{n+1})`.
    pub band: (State, State),
    /// The certificate found for the chain edge, at its own level.
    pub certificate: ShrinkingCertificate,
    /// Forcing set `U_n`, normalized to level 1 of the powered rule.
    pub forcing_u: Vec<i64>,
    /// Forcing set `V_n`, normalized to level 1 of the powered rule.
    pub forcing_v: Vec<i64>,
    /// `u_n = max U_n`.
    pub u: i64,
    /// `v_n = min V_n`.
    pub v: i64,
    /// Minimum drift margin of the band's edge shapes.
    pub delta: Rational,
    /// Guaranteed fraction of type-1/2 vertices on any border: `1/(2+2δ^-2)`.
    pub delta_n: Rational,
}

impl LevelInfo {
    /// Classifies a border displacement, or `None` when it fits no shape.
    pub fn classify_edge(&self, radius: usize, d: (i64, i64)) -> Option<EdgeClass> {
        let r = radius as i64;
        match d.1 {
            -1 if -r <= d.0 && d.0 <= self.u => Some(EdgeClass::Left),
            1 if -r <= d.0 && d.0 <= -self.v => Some(EdgeClass::Right),
            0 if 0 < d.0 && d.0 <= 2 * r => Some(EdgeClass::Across),
            0 if -2 * r <= d.0 && d.0 < 0 => Some(EdgeClass::Back),
            _ => None,
        }
    }

    /// All displacements allowed on a border of this band.
    pub fn edge_shapes(&self, radius: usize) -> Vec<(i64, i64)> {
        let r = radius as i64;
        let mut out = Vec::new();
        for j in -r..=self.u {
            out.push((j, -1));
        }
        for j in -r..=-self.v {
            out.push((j, 1));
        }
        for j in 1..=2 * r {
            out.push((j, 0));
            out.push((-j, 0));
        }
        out
    }
}

/// Everything the polygon machinery needs about a chain on a rule.
#[derive(Debug, Clone)]
pub struct LevelData {
    /// The quiescent chain `0 = a_1 < … < a_k = m`.
    pub chain: Vec<State>,
    /// The common certificate level `p` (least common multiple).
    pub power: usize,
    /// Radius of the powered rule (`p` times the base radius).
    pub radius: usize,
    /// The powered rule as a dense table, when it fits the table cap.
    ///
    /// `None` means the table would be too large; callers must then produce
    /// trajectories by applying the base rule `p` times per step, which is
    /// slower but exact.
    pub rule: Option<LocalRule>,
    /// Per-band data, index `n-1` for band `n`.
    pub levels: Vec<LevelInfo>,
    /// Guaranteed system-wide error-citation fractions, `beta[n-1]` for
    /// polygons rooted at band `n`.
    pub beta: Vec<Rational>,
}

impl LevelData {
    /// Number of chain states `k`.
    pub fn chain_length(&self) -> usize {
        self.chain.len()
    }

    /// Number of bands (`k - 1`).
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// The band index `n` with `a_n < state <= a_{n+1}`, if any.
    pub fn band_of(&self, state: State) -> Option<usize> {
        if state == 0 {
            return None;
        }
        (1..self.chain.len()).find(|&n| self.chain[n - 1] < state && state <= self.chain[n])
    }

    /// Per-band data for band `n` (1-based).
    pub fn level(&self, n: usize) -> &LevelInfo {
        &self.levels[n - 1]
    }
}

fn delta_for(u: i64, v: i64, radius: usize) -> Rational {
    // Drift margin: for each edge displacement (i, t), the drift value is
    // i + t(u+v)/2.  The margin is min(min |drift|, 1/max |drift|), taken
    // non-strictly over all four edge shapes.
    let r = radius as i64;
    let center = Ratio::new(u + v, 2);
    let mut min_abs: Option<Rational> = None;
    let mut max_abs: Option<Rational> = None;
    let mut feed = |i: i64, t: i64| {
        let m = Ratio::from_integer(i) + Ratio::from_integer(t) * center;
        let a = if m < Ratio::from_integer(0) { -m } else { m };
        min_abs = Some(match min_abs {
            None => a,
            Some(cur) => cur.min(a),
        });
        max_abs = Some(match max_abs {
            None => a,
            Some(cur) => cur.max(a),
        });
    };
    for j in -r..=u {
        feed(j, -1);
    }
    for j in -r..=-v {
        feed(j, 1);
    }
    for j in 1..=2 * r {
        feed(j, 0);
        feed(-j, 0);
    }
    let min_abs = min_abs.expect("edge shapes are never empty for positive radius");
    let max_abs = max_abs.expect("edge shapes are never empty for positive radius");
    min_abs.min(Ratio::from_integer(1) / max_abs)
}

/// Lifts a certificate at level `k` to the common power `p` (a multiple of
/// `k`) by `p/k`-fold Minkowski self-sums: a set forcing across `k` steps,
/// summed with itself `p/k` times, forces across `p` steps, i.e. across one
/// step of `f^p`.
pub(crate) fn normalize_certificate(
    cert: &ShrinkingCertificate,
    power: usize,
) -> (Vec<i64>, Vec<i64>) {
    assert_eq!(power % cert.k, 0, "power must be a multiple of the level");
    let times = power / cert.k;
    let mut forcing_u = cert.u.clone();
    let mut forcing_v = cert.v.clone();
    for _ in 1..times {
        forcing_u = sum_forcing(&forcing_u, &cert.u);
        forcing_v = sum_forcing(&forcing_v, &cert.v);
    }
    (forcing_u, forcing_v)
}

fn to_i64_ratio(x: Ratio<i128>) -> Result<Rational, PolygonError> {
    let numer = i64::try_from(*x.numer());
    let denom = i64::try_from(*x.denom());
    match (numer, denom) {
        (Ok(n), Ok(d)) => Ok(Ratio::new(n, d)),
        _ => Err(PolygonError::ChainInvalid(
            "error-fraction recursion exceeds 64-bit rationals; chain too long".to_string(),
        )),
    }
}

/// Builds per-band polygon data for a quiescent chain.
///
/// Every consecutive chain pair must be shrinking; its certificate is found
/// by the forcing-set search with the given subset budget.  Certificates at
/// different levels are normalized to a common power `p` (their least common
/// multiple) by Minkowski self-sums, so all bands share one rule `f^p` whose
/// forcing sets act over a single step.
pub fn build_level_data(
    rule: &LocalRule,
    chain: &[State],
    budget: u64,
) -> Result<LevelData, PolygonError> {
    let m = rule.max_state();
    if chain.len() < 2 {
        return Err(PolygonError::ChainInvalid(
            "chain needs at least two states".to_string(),
        ));
    }
    if chain[0] != 0 || *chain.last().expect("non-empty") != m {
        return Err(PolygonError::ChainInvalid(format!(
            "chain must run from 0 to the maximum state {m}"
        )));
    }
    if !chain.windows(2).all(|w| w[0] < w[1]) {
        return Err(PolygonError::ChainInvalid(
            "chain must be strictly increasing".to_string(),
        ));
    }
    for &a in chain {
        if !rule.is_quiescent(a) {
            return Err(PolygonError::ChainInvalid(format!(
                "chain state {a} is not quiescent"
            )));
        }
    }

    let mut certificates = Vec::with_capacity(chain.len() - 1);
    for w in chain.windows(2) {
        let (a, b) = (w[0], w[1]);
        match shrinking_certificate(rule, a, b, DEFAULT_K_MAX, budget)? {
            Some(cert) => certificates.push(cert),
            None => return Err(PolygonError::MissingCertificate { lower: a, upper: b }),
        }
    }

    let power = certificates.iter().fold(1usize, |acc, c| acc.lcm(&c.k));
    let radius = power * rule.radius();

    let powered = if power == 1 {
        Some(rule.clone())
    } else {
        match rule.compose_power(power, DEFAULT_TABLE_CAP) {
            Ok(r) => Some(r),
            Err(RuleError::TableCapExceeded { .. }) => None,
            Err(other) => return Err(other.into()),
        }
    };

    let mut levels = Vec::with_capacity(certificates.len());
    for (idx, cert) in certificates.iter().enumerate() {
        let (forcing_u, forcing_v) = normalize_certificate(cert, power);
        let u = *forcing_u.last().expect("certificate sets are non-empty");
        let v = *forcing_v.first().expect("certificate sets are non-empty");
        assert!(u < v, "normalized forcing sets must stay separated");
        let delta = delta_for(u, v, radius);
        let two = Ratio::from_integer(2);
        let delta_n = Ratio::from_integer(1) / (two + two / (delta * delta));
        levels.push(LevelInfo {
            level: idx + 1,
            band: (chain[idx], chain[idx + 1]),
            certificate: cert.clone(),
            forcing_u,
            forcing_v,
            u,
            v,
            delta,
            delta_n,
        });
    }

    // Error-citation fractions, from the top band downward.  With K bands the
    // fraction for a system rooted at band n is
    // beta_n = delta_n * beta_{n+1} / (2 r K + 2), with beta_{K+1} = 1.
    let band_count = levels.len();
    let divisor = Ratio::<i128>::from_integer(2 * radius as i128 * band_count as i128 + 2);
    let mut beta_wide = vec![Ratio::<i128>::from_integer(1); band_count + 1];
    for n in (0..band_count).rev() {
        let d = levels[n].delta_n;
        let d_wide = Ratio::<i128>::new((*d.numer()).into(), (*d.denom()).into());
        beta_wide[n] = d_wide * beta_wide[n + 1] / divisor;
    }
    let beta = beta_wide[..band_count]
        .iter()
        .map(|&b| to_i64_ratio(b))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(LevelData {
        chain: chain.to_vec(),
        power,
        radius,
        rule: powered,
        levels,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::DEFAULT_SUBSET_BUDGET;

    fn ratio(n: i64, d: i64) -> Rational {
        Ratio::new(n, d)
    }

    #[test]
    fn two_state_min_rule_level_data() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        let data = build_level_data(&rule, &[0, 1], DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(data.power, 1);
        assert_eq!(data.radius, 1);
        assert!(data.rule.is_some());
        assert_eq!(data.level_count(), 1);
        let info = data.level(1);
        assert_eq!(info.forcing_u, vec![0]);
        assert_eq!(info.forcing_v, vec![1]);
        assert_eq!((info.u, info.v), (0, 1));
        assert_eq!(info.delta, ratio(1, 2));
        assert_eq!(info.delta_n, ratio(1, 10));
        assert_eq!(data.beta, vec![ratio(1, 40)]);

        // Edge shapes for the single band.
        assert_eq!(info.classify_edge(1, (-1, -1)), Some(EdgeClass::Left));
        assert_eq!(info.classify_edge(1, (0, -1)), Some(EdgeClass::Left));
        assert_eq!(info.classify_edge(1, (1, -1)), None);
        assert_eq!(info.classify_edge(1, (-1, 1)), Some(EdgeClass::Right));
        assert_eq!(info.classify_edge(1, (0, 1)), None);
        assert_eq!(info.classify_edge(1, (1, 0)), Some(EdgeClass::Across));
        assert_eq!(info.classify_edge(1, (2, 0)), Some(EdgeClass::Across));
        assert_eq!(info.classify_edge(1, (3, 0)), None);
        assert_eq!(info.classify_edge(1, (-2, 0)), Some(EdgeClass::Back));
        assert_eq!(info.classify_edge(1, (0, 0)), None);

        assert_eq!(data.band_of(0), None);
        assert_eq!(data.band_of(1), Some(1));
    }

    #[test]
    fn three_state_min_rule_has_two_bands() {
        let rule = LocalRule::from_fn(3, 1, |w| w[1].min(w[2])).unwrap();
        let data = build_level_data(&rule, &[0, 1, 2], DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(data.level_count(), 2);
        assert_eq!(data.power, 1);
        for info in &data.levels {
            assert_eq!((info.u, info.v), (0, 1));
            assert_eq!(info.delta_n, ratio(1, 10));
        }
        // Two bands: divisor 2*1*2 + 2 = 6 on each recursion step.
        assert_eq!(data.beta, vec![ratio(1, 3600), ratio(1, 60)]);
        assert_eq!(data.band_of(1), Some(1));
        assert_eq!(data.band_of(2), Some(2));
    }

    #[test]
    fn chain_validation_rejects_bad_chains() {
        let rule = LocalRule::builtin("min2", None).unwrap();
        assert!(matches!(
            build_level_data(&rule, &[0], 1 << 12),
            Err(PolygonError::ChainInvalid(_))
        ));
        assert!(matches!(
            build_level_data(&rule, &[1, 0], 1 << 12),
            Err(PolygonError::ChainInvalid(_))
        ));
        let galperin = LocalRule::builtin("galperin3", None).unwrap();
        // galperin3's pair (0,2) is not shrinking, so the one-band chain
        // [0, 2] has no certificate.
        assert!(matches!(
            build_level_data(&galperin, &[0, 2], 1 << 16),
            Err(PolygonError::MissingCertificate { lower: 0, upper: 2 })
        ));
    }

    #[test]
    fn level_three_certificate_powers_the_rule() {
        // decrement(3): the wide pair (0,3) forces only at level 3, so the
        // single-band chain [0,3] runs on the cubed rule with radius 3.
        let rule = LocalRule::builtin("decrement", Some(3)).unwrap();
        let data = build_level_data(&rule, &[0, 3], DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(data.power, 3);
        assert_eq!(data.radius, 3);
        let powered = data.rule.as_ref().expect("4^7 entries fit the cap");
        assert_eq!(powered.radius(), 3);
        let info = data.level(1);
        assert_eq!(info.certificate.k, 3);
        assert_eq!(info.forcing_u, vec![0]);
        assert_eq!(info.forcing_v, vec![1]);
        // Drift margin over the radius-3 edge shapes with (u+v)/2 = 1/2:
        // smallest |drift| is 1/2, largest is 6, so delta = 1/6.
        assert_eq!(info.delta, ratio(1, 6));
        assert_eq!(info.delta_n, ratio(1, 74));
        // One band: divisor 2*3*1 + 2 = 8.
        assert_eq!(data.beta, vec![ratio(1, 592)]);
        // The normalized sets force over a single powered step.
        assert!(crate::forcing::is_forcing(powered, &info.forcing_u, 0, 3, 1).unwrap());
        assert!(crate::forcing::is_forcing(powered, &info.forcing_v, 0, 3, 1).unwrap());
    }

    #[test]
    fn minkowski_normalization_forces_at_the_common_power() {
        // Scale min2's level-1 certificate to a hypothetical power 3: the
        // 3-fold self-sums {0} and {3} must force across one step of f^3.
        let rule = LocalRule::builtin("min2", None).unwrap();
        let cert = shrinking_certificate(&rule, 0, 1, 2, 1 << 12)
            .unwrap()
            .expect("min2 is shrinking");
        assert_eq!(cert.k, 1);
        let (u3, v3) = normalize_certificate(&cert, 3);
        assert_eq!(u3, vec![0]);
        assert_eq!(v3, vec![3]);
        let cubed = rule.compose_power(3, 1 << 20).unwrap();
        assert!(crate::forcing::is_forcing(&cubed, &u3, 0, 1, 1).unwrap());
        assert!(crate::forcing::is_forcing(&cubed, &v3, 0, 1, 1).unwrap());
    }
}
