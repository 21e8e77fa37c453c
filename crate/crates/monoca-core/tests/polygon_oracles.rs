//! End-to-end polygon-system checks on real noisy trajectories.

use monoca_core::{
    build_level_data, construct_system, decode_system, encode_system, run_noisy_trial,
    verify_system, Boundary, Configuration, LevelData, LocalRule, NoiseModel, NoisyTrajectory,
    PolygonSystem, SimConfig, VertexType,
};

/// The row-`horizon` nonzero cell nearest the window center whose backward
/// light cone stays inside the window, if any.
fn conditioned_root(traj: &NoisyTrajectory, radius: usize) -> Option<(i64, i64)> {
    let t = traj.horizon as i64;
    let reach = radius as i64 * t;
    let lo = reach;
    let hi = traj.width as i64 - 1 - reach;
    let center = traj.width as i64 / 2;
    let row = &traj.rows[traj.horizon];
    (lo..=hi)
        .filter(|&i| row[i as usize] != 0)
        .min_by_key(|&i| ((i - center).abs(), i))
        .map(|i| (i, t))
}

fn verified_system(
    rule: &LocalRule,
    data: &LevelData,
    traj: &NoisyTrajectory,
    root: (i64, i64),
) -> PolygonSystem {
    let system = construct_system(rule, data, traj, root).unwrap();
    let report = verify_system(&system, traj, data);
    assert!(
        report.all_pass(),
        "seed {} trial {} root {root:?}:\n{}",
        traj.seed,
        traj.trial,
        report.render()
    );

    // Fraction guarantees, re-checked directly against the level data.
    for ls in &system.levels {
        let delta_n = data.level(ls.level).delta_n;
        for poly in &ls.polygons {
            let counts = poly.type_counts();
            let supported = (counts[0] + counts[1]) as i64;
            let total = poly.vertices.len() as i64;
            assert!(
                supported * delta_n.denom() >= delta_n.numer() * total,
                "band {} polygon fraction {supported}/{total} below {delta_n}",
                ls.level
            );
        }
    }
    let beta = data.beta[system.base_level - 1];
    let counts = system.distinct_type_counts();
    let total: usize = counts.iter().sum();
    assert!(
        counts[1] as i64 * beta.denom() >= beta.numer() * total as i64,
        "type-2 fraction {}/{total} below {beta}",
        counts[1]
    );

    // Every error vertex cites a recorded error.
    for ls in &system.levels {
        for poly in &ls.polygons {
            for v in &poly.vertices {
                if v.vtype == VertexType::Error {
                    assert!(traj.errors[(v.at.1 - 1) as usize][v.at.0 as usize]);
                }
            }
        }
    }

    // Encode/decode round-trip with the guaranteed length bound.
    let walk = encode_system(&system, data).unwrap();
    assert!(walk.len() <= 2 * data.chain_length() * data.radius * system.vertex_count());
    assert_eq!(
        decode_system(&walk).unwrap().vertices,
        system.vertex_levels()
    );
    system
}

#[test]
fn noisy_min2_systems_construct_verify_and_round_trip() {
    let rule = LocalRule::builtin("min2", None).unwrap();
    let data = build_level_data(&rule, &[0, 1], 1 << 16).unwrap();
    let config = SimConfig {
        width: 160,
        boundary: Boundary::FixedQuiescent(0),
        horizon: 40,
        seed: 0x5eed_0010,
        trials: 1,
    };
    let model = NoiseModel::IndependentMax {
        state: 1,
        epsilon: 0.1,
    };
    let initial = Configuration::constant(0, 0, 0);

    let mut built = 0usize;
    for trial in 0..20 {
        let traj = run_noisy_trial(&rule, &model, &config, &initial, trial).unwrap();
        let Some(root) = conditioned_root(&traj, data.radius) else {
            continue;
        };
        let system = verified_system(&rule, &data, &traj, root);
        assert_eq!(system.base_level, 1);
        built += 1;
    }
    assert!(built >= 15, "only {built} of 20 trials had a nonzero root");
}

#[test]
fn set_noise_on_a_three_state_rule_builds_multi_band_systems() {
    let rule = LocalRule::from_fn(3, 1, |w| w[1].min(w[2])).unwrap();
    let data = build_level_data(&rule, &[0, 1, 2], 1 << 16).unwrap();
    let config = SimConfig {
        width: 120,
        boundary: Boundary::FixedQuiescent(0),
        horizon: 30,
        seed: 0x5eed_0011,
        trials: 1,
    };
    // Noise that writes both 1s and 2s puts band-1 vertices above band-2
    // states, so support links and second-band polygons must appear
    // somewhere in the sample.
    let model = NoiseModel::Custom {
        weights: vec![0.0, 1.0, 1.0],
        epsilon: 0.1,
    };
    let initial = Configuration::constant(0, 0, 0);

    let mut built = 0usize;
    let mut multi_band = 0usize;
    let mut type1 = 0usize;
    for trial in 0..30 {
        let traj = run_noisy_trial(&rule, &model, &config, &initial, trial).unwrap();
        let Some(root) = conditioned_root(&traj, data.radius) else {
            continue;
        };
        let system = verified_system(&rule, &data, &traj, root);
        built += 1;
        if system.levels.len() > 1 {
            multi_band += 1;
            assert!(!system.links.is_empty());
        }
        type1 += system.distinct_type_counts()[0];
    }
    assert!(built >= 20, "only {built} of 30 trials had a nonzero root");
    assert!(multi_band > 0, "no trial produced a second-band polygon");
    assert!(type1 > 0, "no supported vertices were ever recorded");
}
