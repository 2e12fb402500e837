mod common;

use gridrisk::filter::FilterConfig;
use gridrisk::risk::{
    ego_occupancy, instantaneous_risk, EgoState, Footprint, LossConfig, LossMode, RiskProfile, RiskSample,
};
use gridrisk::sensor::diagonal_covariance;
use gridrisk::{BetaState, CellIndex, DynamicGridFilter, GridSpec, Particle, Pose, Vec2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn noisy_occupancy_matches_brute_force() {
    let spec = GridSpec::new(Vec2::ZERO, 0.5, 12, 12, 0.1).unwrap();
    let center = Vec2::new(3.1, 2.95);
    let (heading, length, width) = (0.4, 2.0, 1.0);
    let ego = EgoState {
        pose: Pose::with_covariance(center, heading, diagonal_covariance(spec.cell_size, 0.0)).unwrap(),
        velocity: Vec2::ZERO,
        footprint: Footprint { length, width },
        mass: 1500.0,
    };
    let occ = ego_occupancy(&ego, &spec, 200_000, 3).unwrap();
    let cells: Vec<_> = (-2..14).flat_map(|c| (-2..14).map(move |r| (c, r))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let oracle = common::brute_force_occupancy(
        &spec,
        center,
        heading,
        length,
        width,
        spec.cell_size,
        1_000_000,
        &cells,
        &mut rng,
    );
    let mut worst: f64 = 0.0;
    for (cell, want) in cells.iter().zip(oracle) {
        worst = worst.max((occ.get(*cell) - want).abs());
    }
    assert!(worst < 0.01, "worst per-cell difference {worst}");
}

fn state(seed: u64) -> (DynamicGridFilter, EgoState) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = GridSpec::new(Vec2::ZERO, 1.0, 4, 4, 0.1).unwrap();
    let mut filter = DynamicGridFilter::new(spec, FilterConfig::default()).unwrap();
    for row in 0..4 {
        for col in 0..4 {
            let beta = BetaState::new(rng.random_range(0.5..6.0), rng.random_range(0.5..6.0)).unwrap();
            let p = Particle {
                position: Vec2::new(col as f64 + 0.5, row as f64 + 0.5),
                velocity: Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
                weight: beta.mean(),
            };
            filter.set_cell(CellIndex::new(col, row), beta, vec![p]).unwrap();
        }
    }
    let ego = EgoState {
        pose: Pose::with_covariance(Vec2::new(2.0, 2.2), 0.3, diagonal_covariance(0.4, 0.05)).unwrap(),
        velocity: Vec2::new(4.0, 1.0),
        footprint: Footprint {
            length: 1.5,
            width: 1.0,
        },
        mass: 1500.0,
    };
    (filter, ego)
}

proptest! {
    #[test]
    fn risk_scales_linearly_with_loss(seed in 0u64..1000, lambda in 0.01f64..50.0) {
        let (filter, ego) = state(seed);
        let occ = ego_occupancy(&ego, filter.spec(), 50, seed).unwrap();
        let (c1, c2) = LossConfig::default().constants(ego.mass);
        let base = LossConfig { cell_mass: 80.0, mode: LossMode::Explicit { c1, c2 } };
        let scaled = LossConfig { cell_mass: 80.0, mode: LossMode::Explicit { c1: lambda * c1, c2: lambda * c2 } };
        let a = instantaneous_risk(&filter, &ego, &occ, &base).unwrap();
        let b = instantaneous_risk(&filter, &ego, &occ, &scaled).unwrap();
        let k = instantaneous_risk(&filter, &ego, &occ, &LossConfig::default()).unwrap();
        prop_assert!((a.mean - k.mean).abs() <= 1e-12 * k.mean);
        prop_assert!((b.mean - lambda * a.mean).abs() <= 1e-10 * b.mean);
        prop_assert!((b.variance - lambda * lambda * a.variance).abs() <= 1e-10 * b.variance);
    }

    #[test]
    fn accumulation_is_a_prefix_sum(samples in proptest::collection::vec((0.0f64..100.0, 0.0f64..50.0), 1..60)) {
        let mut p = RiskProfile::new();
        for (i, (m, v)) in samples.iter().enumerate() {
            p.accumulate(i as f64 * 0.1, RiskSample { mean: *m, variance: *v });
        }
        let (mut am, mut av) = (0.0, 0.0);
        for (row, (m, v)) in p.rows.iter().zip(&samples) {
            am += m;
            av += v;
            prop_assert_eq!(row.acc_mean, am);
            prop_assert_eq!(row.acc_var, av);
            prop_assert_eq!(row.acc_plus_2sigma, am + 2.0 * av.sqrt());
        }
        prop_assert!(p.rows.windows(2).all(|w| w[1].acc_mean >= w[0].acc_mean));
    }
}

#[test]
fn small_state_matches_monte_carlo() {
    let (filter, ego) = state(9);
    let loss = LossConfig::default();
    let occ = ego_occupancy(&ego, filter.spec(), 100, 9).unwrap();
    let risk = instantaneous_risk(&filter, &ego, &occ, &loss).unwrap();
    let terms = common::exposures(
        filter.spec(),
        |c| filter.cells()[c].beta,
        |c| filter.particles()[c].clone(),
        &occ,
        ego.velocity,
        ego.mass,
        loss.cell_mass,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mc = common::monte_carlo_risk(&terms, 200_000, 50, &mut rng);
    assert!((mc.mean - risk.mean).abs() <= 3.0 * mc.mean_se, "{mc:?} vs {risk:?}");
    assert!(
        (mc.variance - risk.variance).abs() <= 3.0 * mc.variance_se,
        "{mc:?} vs {risk:?}"
    );
}

#[test]
fn profile_csv_round_trips() {
    let mut p = RiskProfile::new();
    for i in 0..10 {
        p.accumulate(
            i as f64 * 0.1,
            RiskSample {
                mean: 1.0 / (i + 3) as f64,
                variance: 0.01 * i as f64,
            },
        );
    }
    let mut first = Vec::new();
    p.write_csv(&mut first).unwrap();
    let back = RiskProfile::read_csv(first.as_slice()).unwrap();
    assert_eq!(back, p);
    let mut second = Vec::new();
    back.write_csv(&mut second).unwrap();
    assert_eq!(first, second);
}
