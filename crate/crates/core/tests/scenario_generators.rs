use std::f64::consts::PI;

use nalgebra::Vector2;
use selfaware_core::scenario::{
    generate_perimeter, generate_stop, generate_stop_with_ramp, generate_uturn, load_labeled,
    load_trajectory, save_labeled, SampleLabel, ScenarioParams, UTURN_LEAD_IN,
};
use selfaware_core::{Error, Trajectory};

fn clean(laps: usize) -> ScenarioParams {
    ScenarioParams {
        laps,
        noise_sigma: 0.0,
        ..ScenarioParams::default()
    }
}

fn step(t: &Trajectory, i: usize) -> Vector2<f64> {
    t.samples()[i + 1].position - t.samples()[i].position
}

fn first_abnormal(labels: &[SampleLabel]) -> usize {
    labels.iter().position(|l| *l == SampleLabel::Abnormal).unwrap()
}

#[test]
fn uturn_reverses_heading() {
    let p = clean(1);
    let lt = generate_uturn(&p, 0.3).unwrap();
    let a = first_abnormal(&lt.labels);
    let before = step(&lt.trajectory, a - 2);
    let n = lt.trajectory.len();
    let after = step(&lt.trajectory, n - 2);
    let angle = before.angle(&after);
    assert!((angle - PI).abs() < 1e-6, "heading change {angle}");
    // Retrace velocity is the negated normal-lap velocity at the same place.
    let normal = generate_perimeter(&p).unwrap();
    let v_normal = step(&normal.trajectory, a);
    assert!((after + v_normal).norm() < 1e-6);
}

#[test]
fn uturn_abnormal_count_matches_arc_length() {
    let p = clean(2);
    let lt = generate_uturn(&p, 0.55).unwrap();
    let count = lt.labels.iter().filter(|l| **l == SampleLabel::Abnormal).count() as f64;
    let r_u = p.corner_radius / 2.0;
    let expected = ((UTURN_LEAD_IN + PI * r_u) / (p.speed * p.dt)).ceil();
    assert!((count - expected).abs() <= 1.0, "{count} vs {expected}");
    // Abnormal samples form one contiguous block.
    let a = first_abnormal(&lt.labels);
    assert!(lt.labels[a..a + count as usize].iter().all(|l| *l == SampleLabel::Abnormal));
}

#[test]
fn uturn_on_curve_is_rejected() {
    let p = clean(1);
    // Just past the start of the first corner.
    let f = (p.width / 2.0 - p.corner_radius + 0.5) / p.lap_length();
    assert!(matches!(generate_uturn(&p, f), Err(Error::InvalidInput(_))));
}

#[test]
fn stop_holds_position() {
    let p = ScenarioParams { laps: 1, ..ScenarioParams::default() };
    let lt = generate_stop_with_ramp(&p, 0.3, 3.0, 1.0).unwrap();
    let a = first_abnormal(&lt.labels);
    let hold_start = a + 10 + 1;
    let hold_end = a + 10 + 30 - 1;
    for i in hold_start..hold_end {
        let d = step(&lt.trajectory, i);
        assert!(d.x.abs() <= 4.0 * p.noise_sigma * 2f64.sqrt());
        assert!(d.y.abs() <= 4.0 * p.noise_sigma * 2f64.sqrt());
    }
}

#[test]
fn stop_adds_hold_and_ramp_time() {
    let p = clean(1);
    let normal = generate_perimeter(&p).unwrap().trajectory.len() as f64;
    for (duration, ramp) in [(2.0, 1.0), (5.0, 1.0), (3.0, 0.5)] {
        let stopped = generate_stop_with_ramp(&p, 0.3, duration, ramp).unwrap().trajectory.len() as f64;
        // Two ramps at half the cruise speed cost one ramp duration overall.
        let expected = (duration + ramp) / p.dt;
        assert!((stopped - normal - expected).abs() <= 2.0, "{duration},{ramp}: {}", stopped - normal);
    }
}

#[test]
fn stop_labels_cover_ramps_and_hold() {
    let p = clean(1);
    let lt = generate_stop(&p, 0.3, 4.0).unwrap();
    let count = lt.labels.iter().filter(|l| **l == SampleLabel::Abnormal).count() as f64;
    assert!((count - (4.0 + 2.0) / p.dt).abs() <= 1.0);
}

#[test]
fn zero_noise_laps_are_periodic() {
    let mut p = ScenarioParams {
        width: 16.0,
        height: 6.0,
        corner_radius: 1.0,
        laps: 3,
        noise_sigma: 0.0,
        ..ScenarioParams::default()
    };
    let steps = (p.lap_length() / (p.speed * p.dt)).round();
    p.speed = p.lap_length() / (steps * p.dt);
    let n = p.samples_per_lap().unwrap();
    let t = generate_perimeter(&p).unwrap().trajectory;
    for i in 0..t.len() - n {
        let d = (t.samples()[i].position - t.samples()[i + n].position).norm();
        assert!(d < 1e-9, "sample {i} differs by {d}");
    }
}

#[test]
fn perimeter_labels_curves_only() {
    let lt = generate_perimeter(&clean(1)).unwrap();
    assert!(lt.labels.iter().all(|l| *l != SampleLabel::Abnormal));
    let curves = lt.labels.iter().filter(|l| **l == SampleLabel::Curve).count() as f64;
    let p = clean(1);
    let expected = 2.0 * PI * p.corner_radius / (p.speed * p.dt);
    assert!((curves - expected).abs() <= 4.0);
}

#[test]
fn abnormal_variants_agree_before_the_window() {
    let p = ScenarioParams { laps: 2, seed: 17, ..ScenarioParams::default() };
    let normal = generate_perimeter(&p).unwrap().trajectory;
    let guard = (2.0 / (p.speed * p.dt)).ceil() as usize;
    for lt in [generate_uturn(&p, 0.3).unwrap(), generate_stop(&p, 0.3, 5.0).unwrap()] {
        let a = first_abnormal(&lt.labels);
        for i in 0..a.saturating_sub(guard) {
            assert_eq!(lt.trajectory.samples()[i], normal.samples()[i]);
        }
    }
}

#[test]
fn labeled_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("uturn.csv");
    let lt = generate_uturn(&ScenarioParams { laps: 1, ..ScenarioParams::default() }, 0.3).unwrap();
    save_labeled(&path, &lt).unwrap();
    let back = load_labeled(&path).unwrap();
    assert_eq!(back.labels, lt.labels);
    for (a, b) in back.trajectory.samples().iter().zip(lt.trajectory.samples()) {
        assert_eq!(a.k, b.k);
        assert!((a.position - b.position).norm() < 1e-9);
        assert!((a.t - b.t).abs() < 1e-9);
    }
    let plain = load_trajectory(&path).unwrap();
    assert_eq!(plain.len(), lt.trajectory.len());
}

#[test]
fn malformed_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let no_header = write("a.csv", "0,0,1,1\n1,0.1,1,1\n");
    assert!(matches!(load_trajectory(&no_header), Err(Error::Parse { .. })));
    let bad_row = write("b.csv", "k,t,x,y\n0,0,1,1\n1,0.1,x,1\n");
    assert!(matches!(load_trajectory(&bad_row), Err(Error::Parse { line: 3, .. })));
    let backwards = write("c.csv", "k,t,x,y\n1,0,1,1\n0,0.1,1,1\n");
    assert!(matches!(load_trajectory(&backwards), Err(Error::InvalidInput(_))));
    let bad_label = write("d.csv", "k,t,x,y,label\n0,0,1,1,S\n1,0.1,1,1,Q\n");
    assert!(matches!(load_labeled(&bad_label), Err(Error::Parse { line: 3, .. })));
}

#[test]
fn invalid_geometry_names_the_invariant() {
    let p = ScenarioParams { corner_radius: 15.0, ..ScenarioParams::default() };
    let msg = generate_perimeter(&p).unwrap_err().to_string();
    assert!(msg.contains("corner_radius"), "{msg}");
}
