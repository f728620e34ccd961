mod common;

use common::{continuous_dataset, params, Mix};
use conviction_core::evaluation::suite::structured_suite_sized;
use conviction_core::residuals::{bootstrap_deviations, holdout_residuals, iterate_residuals};
use conviction_core::Model;
use proptest::prelude::*;

#[test]
fn bootstrap_is_the_smallest_gap() {
    let ds = continuous_dataset(&["a", "b"], &[vec![1.0, 0.1], vec![2.0, 0.25], vec![4.0, 0.3]]);
    let boot = bootstrap_deviations(&ds);
    assert!((boot.deviations.values[0] - 1.0).abs() < 1e-12);
    assert!((boot.deviations.values[1] - 0.05).abs() < 1e-12);
    assert_eq!(boot.fallback, vec![false, false]);
    let flat = continuous_dataset(&["c"], &[vec![5.0], vec![5.0], vec![5.0]]);
    let boot = bootstrap_deviations(&flat);
    assert_eq!(boot.fallback, vec![true]);
    assert!(boot.deviations.values[0] > 0.0);
}

#[test]
fn infinite_tolerance_stops_after_one_pass() {
    let ds = structured_suite_sized(3, 60).remove(0).dataset;
    let mut m = Model::new(ds, params(6, 0.0, true)).unwrap();
    let out = iterate_residuals(&mut m, 8, f64::INFINITY).unwrap();
    assert_eq!(out.iterations, 1);
    assert_eq!(out.trace.len(), 1);
}

#[test]
fn converged_deviations_are_a_fixed_point() {
    let ds = structured_suite_sized(4, 80).remove(1).dataset;
    let mut m = Model::new(ds, params(6, 0.0, true)).unwrap();
    let out = iterate_residuals(&mut m, 20, 0.01).unwrap();
    assert!(out.converged, "trace {:?}", out.trace);
    let again = holdout_residuals(&m).unwrap();
    for (new, old) in again.values.iter().zip(&m.deviations().values) {
        assert!((new - old).abs() / old < 0.01, "{new} vs {old}");
    }
}

#[test]
fn most_structured_sets_settle_within_four_passes() {
    let suite = structured_suite_sized(11, 120);
    let settled = suite
        .into_iter()
        .filter(|b| {
            let mut m = Model::new(b.dataset.clone(), params(8, 0.0, true)).unwrap();
            let out = iterate_residuals(&mut m, 4, 0.05).unwrap();
            out.converged
        })
        .count();
    assert!(settled >= 6, "{settled}/10");
}

#[test]
fn noise_residual_is_near_mean_absolute_deviation() {
    let mut rng = Mix(77);
    let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.range(0.0, 1.0), rng.range(0.0, 1.0)]).collect();
    let ds = continuous_dataset(&["signal", "noise"], &rows);
    let mean = rows.iter().map(|r| r[1]).sum::<f64>() / rows.len() as f64;
    let mad = rows.iter().map(|r| (r[1] - mean).abs()).sum::<f64>() / rows.len() as f64;
    let m = Model::new(ds, params(8, 0.0, true)).unwrap();
    let r = holdout_residuals(&m).unwrap().values[1];
    assert!((r - mad).abs() / mad < 0.25, "{r} vs {mad}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn deviations_stay_strictly_positive(
        rows in prop::collection::vec(prop::collection::vec(prop::sample::select(vec![0.0, 1.0, 1.5, 3.0]), 2), 6..20),
    ) {
        let ds = continuous_dataset(&["x", "y"], &rows);
        let mut m = Model::new(ds, params(3, 0.0, true)).unwrap();
        let out = iterate_residuals(&mut m, 3, 0.05).unwrap();
        prop_assert!(out.deviations.values.iter().all(|r| *r > 0.0 && r.is_finite()));
        prop_assert_eq!(out.trace.len(), out.iterations);
    }
}
