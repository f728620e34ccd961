mod common;

use common::{continuous_dataset, csv_dataset, fitted, params, Mix};
use conviction_core::engine::react;
use conviction_core::evaluation::stats::mann_whitney_u;
use conviction_core::synthesis::{
    resample_continuous, resample_nominal, scale_factor, scales_from, synthesize, SynthesisRequest,
};
use conviction_core::{FeatureSchema, Model, Origin};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn scale_examples() {
    assert!((scales_from(&[2.0], 1.0, 0.5).unwrap()[0] - 4.0).abs() < 1e-15);
    let r = [0.3, 1.7, 4.0];
    let at_expected = scales_from(&r, 2.5, 2.5).unwrap();
    assert_eq!(at_expected, r.to_vec());
    let base = scales_from(&r, 2.5, 1.1).unwrap();
    let doubled = scales_from(&r, 2.5, 2.2).unwrap();
    for (a, b) in base.iter().zip(&doubled) {
        assert!((b / a - 0.125).abs() < 1e-12);
    }
    assert!(scale_factor(1.0, 0.0, 2).is_err());
}

#[test]
fn laplace_draws_have_the_right_centre_and_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let (t, b) = (3.0, 0.7);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| resample_continuous(t, b, None, &mut rng)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let mae = draws.iter().map(|d| (d - t).abs()).sum::<f64>() / n as f64;
    assert!((mean - t).abs() < 4.0 * b / (n as f64).sqrt(), "{mean}");
    assert!((mae - b).abs() < 0.05 * b, "{mae}");
    assert_eq!(resample_continuous(t, 0.0, None, &mut rng), t);
}

#[test]
fn nominal_frequencies_follow_the_row() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let mut counts = [0usize; 4];
    for _ in 0..10_000 {
        counts[resample_nominal(&[0.25; 4], &mut rng).unwrap()] += 1;
    }
    assert!(counts.iter().all(|c| (*c as f64 / 1e4 - 0.25).abs() < 0.02), "{counts:?}");
    let a = (0..10_000).filter(|_| resample_nominal(&[0.9, 0.1], &mut rng).unwrap() == 0).count();
    assert!((a as f64 / 1e4 - 0.9).abs() < 0.02);
    assert!((0..100).all(|_| resample_nominal(&[0.0, 1.0, 0.0], &mut rng).unwrap() == 1));
}

fn mixed_model() -> Model {
    let mut rng = Mix(53);
    let mut text = String::from("x,y,colour\n");
    for _ in 0..60 {
        let x = rng.range(0.0, 4.0);
        let colour = if x < 2.0 { "red" } else { "blue" };
        text.push_str(&format!("{x},{},{colour}\n", x * x + 0.1 * rng.normal()));
    }
    let schema = vec![
        FeatureSchema::continuous("x"),
        FeatureSchema::continuous("y"),
        FeatureSchema::nominal("colour"),
    ];
    fitted(csv_dataset(&text, schema), params(6, 0.0, true))
}

#[test]
fn full_conditions_pass_through() {
    let m = mixed_model();
    let mut req = SynthesisRequest::new(1.0, 3, 1);
    req.conditions = vec![(0, 1.25), (1, -3.5), (2, 1.0)];
    for c in synthesize(&m, &req).unwrap() {
        assert_eq!(c.values, vec![Some(1.25), Some(-3.5), Some(1.0)]);
        assert_eq!(c.origin, Origin::Synthesized);
    }
}

#[test]
fn high_conviction_stays_near_training_cases() {
    let mut rows = Vec::new();
    for i in 0..10 {
        for _ in 0..8 {
            rows.push(vec![i as f64, (i * i) as f64 * 0.5]);
        }
    }
    let m = fitted(continuous_dataset(&["a", "b"], &rows), params(6, 0.0, true));
    let r = m.deviations().values.clone();
    let cases = synthesize(&m, &SynthesisRequest::new(1e6, 100, 3)).unwrap();
    let near = cases
        .iter()
        .filter(|c| {
            m.dataset().cases().iter().any(|t| {
                (0..2).all(|f| (t.values[f].unwrap() - c.values[f].unwrap()).abs() <= r[f])
            })
        })
        .count();
    assert!(near >= 95, "{near}/100");
}

fn gaussian_model(seed: u64) -> (Model, Vec<f64>) {
    let mut rng = Mix(seed);
    let values: Vec<f64> = (0..200).map(|_| 10.0 + 2.0 * rng.normal()).collect();
    let rows: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
    (fitted(continuous_dataset(&["v"], &rows), params(8, 0.0, true)), values)
}

#[test]
fn unit_conviction_matches_the_training_distribution() {
    let mut kept = 0;
    for seed in 0..20 {
        let (m, train) = gaussian_model(100 + seed);
        let synth: Vec<f64> = synthesize(&m, &SynthesisRequest::new(1.0, 200, seed))
            .unwrap()
            .iter()
            .map(|c| c.values[0].unwrap())
            .collect();
        if mann_whitney_u(&synth, &train).unwrap().p_value >= 0.05 {
            kept += 1;
        }
    }
    assert!(kept >= 18, "{kept}/20");
}

#[test]
fn deviation_from_prediction_shrinks_with_conviction() {
    let m = mixed_model();
    let mut last = f64::INFINITY;
    for nu in [0.5, 1.0, 2.0, 4.0] {
        let mut total = 0.0;
        let mut count = 0;
        for x in [0.5, 1.5, 2.5, 3.5] {
            let colour = if x < 2.0 { 0.0 } else { 1.0 };
            let centre = react(&m, &[(0, x), (2, colour)], &[1], m.params().k).unwrap().predictions[0].1;
            let mut req = SynthesisRequest::new(nu, 100, 7);
            req.conditions = vec![(0, x), (2, colour)];
            for c in synthesize(&m, &req).unwrap() {
                total += (c.values[1].unwrap() - centre).abs();
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!(mean <= last, "nu {nu}: {mean} > {last}");
        last = mean;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn same_seed_same_cases(seed in any::<u64>(), nu in 0.2f64..5.0) {
        let m = mixed_model();
        let req = SynthesisRequest::new(nu, 4, seed);
        prop_assert_eq!(synthesize(&m, &req).unwrap(), synthesize(&m, &req).unwrap());
    }
}
