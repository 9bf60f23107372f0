//! Sampling frequencies of the scenario generator and the sensor model.

use row_pomdp::domain::{ApproachDirection, Intent, VehicleState, WorldState};
use row_pomdp::rng::stream;
use row_pomdp::scenario::{adversarial_count, generate_scenario, generate_suite, AdversarialFeature, ScenarioConfig};
use row_pomdp::sim::{observe, ObservationNoise};

const N: usize = 20_000;

/// |hits - n p| within 3 binomial standard deviations.
fn within_3_sigma(hits: usize, n: usize, p: f64) -> bool {
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (hits as f64 - n as f64 * p).abs() <= 3.0 * sd
}

#[test]
fn ordinary_scenarios_follow_the_priors() {
    let cfg = ScenarioConfig::default();
    let mut intents = [0usize; 3];
    let mut vehicles = 0;
    let mut noncompliant = 0;
    let mut pedestrians = 0;
    let mut slippery = 0;
    for seed in 0..N as u64 {
        let scn = generate_scenario(seed, &cfg, false).unwrap();
        intents[scn.ego.intent.index()] += 1;
        for o in &scn.others {
            intents[o.intent.index()] += 1;
            vehicles += 1;
            noncompliant += !o.compliant as usize;
        }
        pedestrians += scn.pedestrian_schedule.len();
        slippery += scn.slippery as usize;
    }
    let total: usize = intents.iter().sum();
    for (i, &w) in Intent::ALL.iter().zip(&cfg.intent_weights) {
        assert!(within_3_sigma(intents[i.index()], total, w), "{i:?}: {intents:?}");
    }
    assert!(within_3_sigma(noncompliant, vehicles, cfg.noncompliance_prob), "{noncompliant}/{vehicles}");
    // Each crosswalk draws its rate uniformly from the range, so the
    // marginal is the midpoint.
    let [lo, hi] = cfg.pedestrian_prob_range;
    assert!(within_3_sigma(pedestrians, 4 * N, (lo + hi) / 2.0), "{pedestrians}");
    assert!(within_3_sigma(slippery, N, cfg.slippery_prob), "{slippery}");
    // 1..=3 other vehicles, uniformly.
    assert!(within_3_sigma(vehicles - N, 2 * N, 0.5), "{vehicles}");
}

#[test]
fn adversarial_scenarios_always_carry_a_feature() {
    let cfg = ScenarioConfig::default();
    let mut stop_runners = 0;
    for seed in 0..2_000 {
        let scn = generate_scenario(seed, &cfg, true).unwrap();
        let f = scn.features();
        assert!(!f.is_empty(), "seed {seed}");
        stop_runners += f.contains(&AdversarialFeature::StopRunner) as usize;
        for o in &scn.others {
            let [lo, hi] = cfg.speed_range(o.compliant);
            assert!((lo..=hi).contains(&o.speed));
        }
    }
    // A third are forced stop-runners; the rest still draw at 30% per car.
    assert!(stop_runners > 2_000 / 3, "{stop_runners}");
}

#[test]
fn suites_put_one_third_adversarial_first_and_are_deterministic() {
    let cfg = ScenarioConfig::default();
    assert_eq!(adversarial_count(60, cfg.adversarial_fraction), 20);
    assert_eq!(adversarial_count(6, cfg.adversarial_fraction), 2);
    assert_eq!(adversarial_count(1, cfg.adversarial_fraction), 1);
    assert_eq!(adversarial_count(0, cfg.adversarial_fraction), 0);

    let suite = generate_suite(7, 60, &cfg).unwrap();
    let flags: Vec<bool> = suite.iter().map(|s| s.adversarial).collect();
    assert_eq!(flags, [vec![true; 20], vec![false; 40]].concat());
    assert!(suite.iter().enumerate().all(|(i, s)| s.id == i as u32));
    assert_eq!(suite, generate_suite(7, 60, &cfg).unwrap());
    assert_ne!(suite, generate_suite(8, 60, &cfg).unwrap());
    for s in &suite {
        assert_eq!(s.initial_state().validate(cfg.horizon), Ok(()));
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        ScenarioConfig { intent_weights: [0.5, 0.5, 0.5], ..Default::default() },
        ScenarioConfig { pedestrian_prob_range: [0.3, 0.1], ..Default::default() },
        ScenarioConfig { slippery_prob: 1.5, ..Default::default() },
        ScenarioConfig { max_other_vehicles: 0, ..Default::default() },
        ScenarioConfig { horizon: 0, ..Default::default() },
        ScenarioConfig { compliant_speed_range: [5.0, 2.0], ..Default::default() },
    ];
    for cfg in bad {
        assert!(generate_scenario(0, &cfg, false).is_err(), "{cfg:?}");
        assert!(generate_suite(0, 3, &cfg).is_err());
    }
}

#[test]
fn sensor_noise_has_the_configured_moments() {
    let noise = ObservationNoise::default();
    let ego = VehicleState::approaching(0, ApproachDirection::North, Intent::Straight, 2, 20.0, 4.0);
    let car = VehicleState::approaching(1, ApproachDirection::East, Intent::Left, 1, 15.0, 5.0);
    let s = WorldState::new(ego, vec![car]);
    let mut rng = stream(11, &[]);

    let (mut dropped, mut hidden, mut frames) = (0, 0, 0);
    let mut z: [Vec<f64>; 3] = Default::default();
    let mut rank_errors = [0usize; 3];
    for _ in 0..N {
        let o = observe(&s, &noise, &mut rng);
        if o.frame_dropped {
            dropped += 1;
            continue;
        }
        frames += 1;
        match o.vehicles[0].measurement {
            None => hidden += 1,
            Some(m) => {
                z[0].push((m.distance - 15.0) / noise.position_sigma);
                z[1].push((m.speed - 5.0) / noise.speed_sigma);
                z[2].push((m.lateral_offset + noise.lateral_shift) / noise.lateral_sigma);
                // True rank 1 of 2: an error of -1 clamps back to 1.
                rank_errors[m.arrival_rank as usize - 1] += 1;
            }
        }
    }
    assert!(within_3_sigma(dropped, N, noise.dropout_prob), "{dropped}");
    assert!(within_3_sigma(hidden, frames, noise.occlusion_prob), "{hidden}/{frames}");
    for (k, zs) in z.iter().enumerate() {
        let n = zs.len() as f64;
        let mean = zs.iter().sum::<f64>() / n;
        let var = zs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 / n.sqrt(), "channel {k}: mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "channel {k}: variance {var}");
    }
    let seen = rank_errors[0] + rank_errors[1];
    assert!(within_3_sigma(rank_errors[0], seen, 2.0 / 3.0), "{rank_errors:?}");
}

#[test]
fn noiseless_sensor_reports_the_truth() {
    let noise = ObservationNoise::noiseless();
    let ego = VehicleState::approaching(0, ApproachDirection::South, Intent::Right, 1, 12.0, 3.0);
    let car = VehicleState::approaching(1, ApproachDirection::West, Intent::Right, 2, 9.0, 4.0);
    let s = WorldState::new(ego, vec![car]);
    let o = observe(&s, &noise, &mut stream(0, &[]));
    let m = o.vehicles[0].measurement.unwrap();
    assert_eq!((m.distance, m.speed, m.lateral_offset, m.arrival_rank), (9.0, 4.0, noise.lateral_shift, 2));
    assert_eq!(o.ego.arrival_rank, Some(1));
}
