use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfaware_core::fusion::{
    align, changepoint_correlation, joint_verdict, Confusion, FusionConfig, FusionRule, JointEntry,
    JointSeries,
};
use selfaware_core::{AnomalyEntry, AnomalySeries, Error, SuperstateLabel};

fn series_from(points: &[(u64, i64, f64)]) -> AnomalySeries {
    AnomalySeries::new(
        points
            .iter()
            .map(|&(k, l, s)| AnomalyEntry {
                k,
                superstate: SuperstateLabel::from_wire(l).unwrap(),
                score: s,
            })
            .collect(),
    )
    .unwrap()
}

/// Piecewise-constant labels with random dwell times.
fn random_series(rng: &mut ChaCha8Rng, n: usize) -> AnomalySeries {
    let mut label = 0i64;
    let pts: Vec<(u64, i64, f64)> = (0..n as u64)
        .map(|k| {
            if rng.random::<f64>() < 0.15 {
                label = rng.random_range(-1..6);
            }
            (k, label, rng.random::<f64>())
        })
        .collect();
    series_from(&pts)
}

fn shift(s: &AnomalySeries, lag: u64) -> AnomalySeries {
    series_from(
        &s.entries()
            .iter()
            .map(|e| (e.k + lag, e.superstate.to_wire(), e.score))
            .collect::<Vec<_>>(),
    )
}

/// Independent lag scan over dense indicator vectors.
fn oracle_lag(sl: &AnomalySeries, pl: &AnomalySeries, max_lag: i64) -> i64 {
    let indicator = |s: &AnomalySeries| -> Vec<(u64, f64)> {
        let e = s.entries();
        (0..e.len())
            .map(|i| (e[i].k, if i > 0 && e[i].superstate != e[i - 1].superstate { 1.0 } else { 0.0 }))
            .collect()
    };
    let a = indicator(sl);
    let b = indicator(pl);
    let mut best = (0i64, f64::NEG_INFINITY);
    for lag in -max_lag..=max_lag {
        let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
        let mut overlap = false;
        for &(k, x) in &a {
            let target = k as i64 + lag;
            if let Some(&(_, y)) = b.iter().find(|(kb, _)| *kb as i64 == target) {
                overlap = true;
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
        }
        if !overlap {
            continue;
        }
        let score = if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb).sqrt() };
        let better = score > best.1 || (score == best.1 && (lag.abs(), lag) < (best.0.abs(), best.0));
        if better {
            best = (lag, score);
        }
    }
    best.0
}

#[test]
fn recovers_plus_three_lag() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let sl = random_series(&mut rng, 300);
        let pl = shift(&sl, 3);
        let cfg = FusionConfig { max_lag: 5, ..FusionConfig::default() };
        let (j, lag) = align(&sl, &pl, &cfg).unwrap();
        assert_eq!(lag, 3);
        assert_eq!(lag, oracle_lag(&sl, &pl, 5));
        assert_eq!(j.len(), 300);
        for e in j.entries() {
            assert_eq!(e.sl_superstate, e.pl_superstate);
        }
    }
}

#[test]
fn identical_series_correlate_fully() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_series(&mut rng, 200);
    let (j, lag) = align(&s, &s, &FusionConfig::default()).unwrap();
    assert_eq!((lag, j.len()), (0, 200));
    assert_eq!(changepoint_correlation(&j, 1).unwrap(), 1.0);
}

#[test]
fn jittered_changepoints_within_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 400u64;
    let mut sl_cps = BTreeSet::new();
    let mut k = 10;
    while k < n - 10 {
        sl_cps.insert(k);
        k += rng.random_range(8..20);
    }
    let pl_cps: BTreeSet<u64> = sl_cps
        .iter()
        .map(|&c| (c as i64 + rng.random_range(-2..=2)) as u64)
        .collect();
    let labels = |cps: &BTreeSet<u64>| -> Vec<SuperstateLabel> {
        let mut l = 0;
        (0..n)
            .map(|k| {
                if cps.contains(&k) {
                    l += 1;
                }
                SuperstateLabel::Id(l)
            })
            .collect()
    };
    let (a, b) = (labels(&sl_cps), labels(&pl_cps));
    let entries = (0..n as usize)
        .map(|i| JointEntry {
            k: i as u64,
            sl_superstate: a[i],
            sl_score: 0.0,
            pl_superstate: b[i],
            pl_score: 0.0,
        })
        .collect();
    let j = JointSeries::new(entries).unwrap();
    // Brute force: every change-point on either side has a partner within 2.
    let near = |x: &BTreeSet<u64>, y: &BTreeSet<u64>| x.iter().all(|&c| y.iter().any(|&d| c.abs_diff(d) <= 2));
    assert!(near(&sl_cps, &pl_cps) && near(&pl_cps, &sl_cps));
    assert_eq!(changepoint_correlation(&j, 2).unwrap(), 1.0);
}

#[test]
fn disjoint_series_fail_to_align() {
    let a = series_from(&[(0, 0, 0.0), (1, 1, 0.0)]);
    let b = series_from(&[(50, 0, 0.0), (51, 1, 0.0)]);
    let cfg = FusionConfig { max_lag: 5, ..FusionConfig::default() };
    assert!(matches!(align(&a, &b, &cfg), Err(Error::Alignment(_))));
}

#[test]
fn or_verdict_reproduces_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 300;
    let truth: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.2).collect();
    // Mostly separable scores with a few deliberate misses and false alarms.
    let sl: Vec<(u64, i64, f64)> = truth
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let flip = rng.random::<f64>() < 0.05;
            let s = if t ^ flip { 2.0 + rng.random::<f64>() } else { rng.random::<f64>() };
            (k as u64, 0, s)
        })
        .collect();
    let pl: Vec<(u64, i64, f64)> = (0..n as u64).map(|k| (k, 1, 0.0)).collect();
    let cfg = FusionConfig { sl_threshold: 1.5, pl_threshold: 1.0, ..FusionConfig::default() };
    let (j, _) = align(&series_from(&sl), &series_from(&pl), &cfg).unwrap();
    let flags = joint_verdict(&j, &cfg);
    let c = Confusion::from_flags(&flags, &truth).unwrap();

    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let flagged = sl[i].2 > 1.5;
        match (flagged, truth[i]) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fneg += 1.0,
            _ => {}
        }
    }
    assert_eq!(c.precision(), tp / (tp + fp));
    assert_eq!(c.recall(), tp / (tp + fneg));
    assert!(c.precision() > 0.7 && c.recall() > 0.7);
}

fn arb_series() -> impl Strategy<Value = AnomalySeries> {
    prop::collection::btree_map(0u64..60, (-1i64..4, 0.0f64..3.0), 1..40).prop_map(|m| {
        series_from(&m.into_iter().map(|(k, (l, s))| (k, l, s)).collect::<Vec<_>>())
    })
}

proptest! {
    #[test]
    fn and_flags_subset_of_or_flags(
        sl in arb_series(),
        pl in arb_series(),
        th in (0.0f64..3.0, 0.0f64..3.0),
    ) {
        let or_cfg = FusionConfig { sl_threshold: th.0, pl_threshold: th.1, rule: FusionRule::Or, max_lag: 0 };
        let and_cfg = FusionConfig { rule: FusionRule::And, ..or_cfg };
        if let Ok((j, _)) = align(&sl, &pl, &or_cfg) {
            let or = joint_verdict(&j, &or_cfg);
            let and = joint_verdict(&j, &and_cfg);
            for (a, o) in and.iter().zip(&or) {
                prop_assert!(!a || *o);
            }
        }
    }

    #[test]
    fn zero_lag_is_inner_join(sl in arb_series(), pl in arb_series()) {
        let a: BTreeSet<u64> = sl.entries().iter().map(|e| e.k).collect();
        let b: BTreeSet<u64> = pl.entries().iter().map(|e| e.k).collect();
        let common: Vec<u64> = a.intersection(&b).copied().collect();
        match align(&sl, &pl, &FusionConfig::default()) {
            Ok((j, lag)) => {
                prop_assert_eq!(lag, 0);
                prop_assert_eq!(j.entries().iter().map(|e| e.k).collect::<Vec<_>>(), common);
            }
            Err(_) => prop_assert!(common.is_empty()),
        }
    }

    #[test]
    fn changepoint_correlation_symmetric_and_bounded(sl in arb_series(), w in 1usize..4) {
        let swapped = series_from(&sl.entries().iter().rev().enumerate()
            .map(|(i, e)| (sl.entries()[i].k, e.superstate.to_wire(), e.score)).collect::<Vec<_>>());
        if let (Ok((j, _)), Ok((r, _))) = (align(&sl, &swapped, &FusionConfig::default()), align(&swapped, &sl, &FusionConfig::default())) {
            if w < j.len() {
                let x = changepoint_correlation(&j, w).unwrap();
                let y = changepoint_correlation(&r, w).unwrap();
                prop_assert!((0.0..=1.0).contains(&x));
                prop_assert_eq!(x, y);
            }
        }
    }
}
