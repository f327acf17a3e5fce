use nalgebra::Vector2;
use proptest::prelude::*;
use selfaware_core::eval::roc_auc;
use selfaware_core::mjpf::{
    effective_sample_size, median, run, systematic_resample, MjpfConfig, MjpfState,
};
use selfaware_core::pipeline::{train_shared_level, TrainConfig, TrainedModel};
use selfaware_core::scenario::{generate_perimeter, generate_uturn, ScenarioParams};
use selfaware_core::unmotivated::NoiseConfig;
use selfaware_core::vocabulary::{Superstate, TransitionMatrix, Vocabulary};
use selfaware_core::{GeneralizedState, Observation, SuperstateLabel, Trajectory, WeightedMetric};

fn line_vocabulary(u: [f64; 2], dt: f64) -> Vocabulary {
    Vocabulary::new(
        vec![Superstate {
            id: 0,
            centroid: GeneralizedState::new(0.0, 0.0, u[0], u[1]).unwrap(),
            control_velocity: Vector2::from(u),
            acceptance_radius: 1e9,
            member_count: 1,
        }],
        Some(TransitionMatrix::uniform(1).unwrap()),
        WeightedMetric::default(),
        dt,
        1.5e9,
    )
    .unwrap()
}

fn tiny_noise() -> MjpfConfig {
    let eps = 1e-6;
    MjpfConfig {
        noise: NoiseConfig::diagonal(eps, eps, eps).unwrap(),
        ..MjpfConfig::default()
    }
}

fn line(n: usize, slope: f64, dt: f64) -> Trajectory {
    let samples = (0..n)
        .map(|k| Observation::new(k as u64, k as f64 * dt, slope * k as f64 * dt, 0.0))
        .collect();
    Trajectory::with_dt(samples, dt).unwrap()
}

fn trained() -> TrainedModel {
    let p = ScenarioParams::default();
    train_shared_level(&[generate_perimeter(&p).unwrap().trajectory], &TrainConfig::default()).unwrap()
}

#[test]
fn model_matched_line_has_vanishing_anomaly() {
    let v = line_vocabulary([1.0, 0.0], 1.0);
    let r = run(&v, &tiny_noise(), &line(20, 1.0, 1.0)).unwrap();
    for s in &r.steps[4..] {
        assert!(s.anomaly < 1e-3, "anomaly {} at k={}", s.anomaly, s.k);
    }
}

#[test]
fn reversed_line_diverges_by_two_metres() {
    let dt = 1.0;
    let v = line_vocabulary([1.0, 0.0], dt);
    let r = run(&v, &tiny_noise(), &line(5, -1.0, dt)).unwrap();
    assert!(r.steps[0].anomaly >= 2.0 * dt - 1e-6, "got {}", r.steps[0].anomaly);
}

#[test]
fn dummy_particles_predict_no_motion() {
    let v = line_vocabulary([1.0, 0.0], 1.0);
    let z0 = Observation::new(0, 0.0, 3.0, 4.0);
    let mut f = MjpfState::init(&v, &tiny_noise(), &z0).unwrap();
    for p in f.particles_mut() {
        p.superstate = SuperstateLabel::Dummy;
    }
    let r = f.step(&Observation::new(1, 1.0, 3.0, 4.5)).unwrap();
    assert!((r.anomaly - 0.5).abs() < 1e-9);
    for n in &r.per_particle_innovation_norms {
        assert!((n - 0.5).abs() < 1e-9);
    }
    assert_eq!(r.dummy_fraction, 1.0);
}

#[test]
fn single_superstate_vocabulary_shares_label() {
    let v = line_vocabulary([1.0, 0.0], 1.0);
    let f = MjpfState::init(&v, &MjpfConfig::default(), &Observation::new(0, 0.0, 0.0, 0.0)).unwrap();
    assert!(f.particles().iter().all(|p| p.superstate == SuperstateLabel::Id(0)));
}

#[test]
fn rejects_single_particle() {
    let v = line_vocabulary([1.0, 0.0], 1.0);
    let cfg = MjpfConfig {
        n_particles: 1,
        ..MjpfConfig::default()
    };
    assert!(MjpfState::init(&v, &cfg, &Observation::new(0, 0.0, 0.0, 0.0)).is_err());
    assert!(Trajectory::with_dt(vec![Observation::new(0, 0.0, 0.0, 0.0)], 0.1).is_err());
}

#[test]
fn same_seed_same_series() {
    let m = trained();
    let t = generate_perimeter(&ScenarioParams { laps: 1, seed: 4, ..ScenarioParams::default() })
        .unwrap()
        .trajectory;
    let a = run(&m.vocabulary, &MjpfConfig::default(), &t).unwrap();
    let b = run(&m.vocabulary, &MjpfConfig::default(), &t).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.steps, b.steps);
}

#[test]
fn anomaly_is_median_and_weights_normalized() {
    let m = trained();
    let t = generate_uturn(&ScenarioParams { laps: 1, seed: 4, ..ScenarioParams::default() }, 0.3)
        .unwrap()
        .trajectory;
    let mut f = MjpfState::init(&m.vocabulary, &MjpfConfig::default(), &t.samples()[0]).unwrap();
    for z in &t.samples()[1..] {
        let r = f.step(z).unwrap();
        assert_eq!(r.anomaly, median(&r.per_particle_innovation_norms));
        assert_eq!(f.particles().len(), 100);
        let total: f64 = f.weights().iter().sum();
        assert!((total - 1.0).abs() <= 1e-9);
        assert!((0.0..=1.0).contains(&r.dummy_fraction));
    }
}

#[test]
fn anomaly_grows_with_injected_offset() {
    let m = trained();
    let t = generate_perimeter(&ScenarioParams { laps: 1, seed: 8, ..ScenarioParams::default() })
        .unwrap()
        .trajectory;
    let (z0, z1) = (t.samples()[0], t.samples()[1]);
    let mut last = -1.0;
    for delta in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let mut f = MjpfState::init(&m.vocabulary, &MjpfConfig::default(), &z0).unwrap();
        let shifted = Observation::new(z1.k, z1.t, z1.position.x + delta, z1.position.y);
        let a = f.step(&shifted).unwrap().anomaly;
        assert!(a >= last, "anomaly {a} at offset {delta} below {last}");
        last = a;
    }
}

#[test]
fn normal_lap_stays_out_of_dummy() {
    let m = trained();
    let t = generate_perimeter(&ScenarioParams { laps: 1, seed: 21, ..ScenarioParams::default() })
        .unwrap()
        .trajectory;
    let r = run(&m.vocabulary, &MjpfConfig::default(), &t).unwrap();
    let mean = r.steps.iter().map(|s| s.dummy_fraction).sum::<f64>() / r.steps.len() as f64;
    assert!(mean < 0.05, "mean dummy fraction {mean}");
}

#[test]
fn training_lap_scores_below_held_out_baseline() {
    let p = ScenarioParams::default();
    let train = generate_perimeter(&p).unwrap().trajectory;
    let m = train_shared_level(&[train.clone()], &TrainConfig::default()).unwrap();
    let mean = |t: &Trajectory| {
        let s = run(&m.vocabulary, &MjpfConfig::default(), t).unwrap().series.scores();
        s.iter().sum::<f64>() / s.len() as f64
    };
    let held_out = generate_perimeter(&ScenarioParams { seed: 1000, ..p }).unwrap().trajectory;
    // Baseline: held-out normal mean with 10% slack for noise realisation.
    let b = 1.1 * mean(&held_out);
    assert!(mean(&train) < b);
}

#[test]
fn uturn_window_scores_above_normal_median() {
    let m = trained();
    let lt = generate_uturn(&ScenarioParams { laps: 2, seed: 99, ..ScenarioParams::default() }, 0.3).unwrap();
    let r = run(&m.vocabulary, &MjpfConfig::default(), &lt.trajectory).unwrap();
    let scores = r.series.scores();
    let mask = lt.abnormal_mask();
    let pick = |want: bool| -> Vec<f64> {
        scores.iter().zip(&mask).filter(|(_, &a)| a == want).map(|(s, _)| *s).collect()
    };
    assert!(median(&pick(true)) > median(&pick(false)));
    assert!(roc_auc(&scores, &mask).unwrap() > 0.5);
}

proptest! {
    #[test]
    fn resampling_preserves_count_and_raises_ess(
        raw in prop::collection::vec(0.0f64..1.0, 2..200),
        u0 in 0.0f64..1.0,
    ) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 0.0);
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let picks = systematic_resample(&w, u0);
        prop_assert_eq!(picks.len(), w.len());
        prop_assert!(picks.iter().all(|&i| w[i] > 0.0));
        let uniform = vec![1.0 / w.len() as f64; w.len()];
        prop_assert!(effective_sample_size(&uniform) + 1e-9 >= effective_sample_size(&w));
    }
}
