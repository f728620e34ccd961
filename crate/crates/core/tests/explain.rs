mod common;

use common::{continuous_dataset, fitted, params, Mix};
use conviction_core::data::Case;
use conviction_core::engine::{local_model, LocalSize, Neighbor};
use conviction_core::explain::{
    action_probability, archetype, conviction_ratios, counterfactuals, explain_react, less_similar_distance,
    regional_residuals, CounterfactualRank, Exclusion, ExplainOptions,
};
use conviction_core::residuals::{holdout_residuals_with, ResidualOptions};
use conviction_core::{Dataset, FeatureSchema, Model};

/// Two labelled groups on a line split at zero.
fn split_line(xs: &[f64]) -> Model {
    let mut ds = Dataset::new(vec![FeatureSchema::continuous("x"), FeatureSchema::nominal("label")]).unwrap();
    let neg = ds.intern(1, "neg") as f64;
    let pos = ds.intern(1, "pos") as f64;
    for (i, x) in xs.iter().enumerate() {
        let l = if *x < 0.0 { neg } else { pos };
        ds.push(Case::new(i as u64, vec![Some(*x), Some(l)])).unwrap();
    }
    Model::new(ds, params(3, 1.0, false)).unwrap()
}

#[test]
fn counterfactual_crosses_the_split() {
    let xs: Vec<f64> = (-10..=10).filter(|i| *i != 0).map(|i| i as f64 * 0.3).collect();
    let m = split_line(&xs);
    let q = vec![Some(-0.1), None];
    let cf = counterfactuals(&m, &q, &[(1, 0.0)], 1, CounterfactualRank::Nearest).unwrap();
    let x = m.dataset().case(cf[0].id).unwrap().values[0].unwrap();
    assert!((x - 0.3).abs() < 1e-12);
    let all = counterfactuals(&m, &q, &[(1, 0.0)], 100, CounterfactualRank::Ratio).unwrap();
    assert_eq!(all.len(), 10);
}

#[test]
fn archetype_separation_is_maximal() {
    let mut rng = Mix(61);
    let xs: Vec<f64> = (0..40)
        .map(|i| if i % 2 == 0 { -5.0 + rng.normal() } else { 5.0 + rng.normal() })
        .collect();
    let m = split_line(&xs);
    let a = archetype(&m, &[Some(-4.0), None], &[(1, 0.0)]).unwrap();
    let positives: Vec<f64> = xs.iter().copied().filter(|x| *x >= 0.0).collect();
    let separation = |x: f64| positives.iter().map(|p| (p - x).abs()).fold(f64::INFINITY, f64::min);
    let best = xs.iter().copied().filter(|x| *x < 0.0).map(separation).fold(0.0, f64::max);
    assert!((a.separation - best).abs() < 1e-12);
    let deepest = xs.iter().copied().filter(|x| *x < 0.0).fold(f64::INFINITY, f64::min);
    assert_eq!(m.dataset().case(a.id).unwrap().values[0], Some(deepest));

    let lone = split_line(&[-1.0, 1.0, 2.0, 3.0]);
    assert_eq!(archetype(&lone, &[Some(-0.5), None], &[(1, 0.0)]).unwrap().id, 0);
}

#[test]
fn weighted_share_within_tolerance() {
    let rows: Vec<Vec<f64>> = [250.0, 253.0, 262.0].iter().map(|v| vec![*v]).collect();
    let m = Model::new(continuous_dataset(&["v"], &rows), params(2, 1.0, false)).unwrap();
    let local = [
        Neighbor { id: 0, distance: 0.0, weight: 0.4 },
        Neighbor { id: 1, distance: 1.0, weight: 0.27 },
        Neighbor { id: 2, distance: 2.0, weight: 0.33 },
    ];
    assert!((action_probability(&m, &local, 0, 250.0, 5.0).unwrap() - 0.67).abs() < 1e-12);
    assert_eq!(action_probability(&m, &local, 0, 251.0, 0.0).unwrap(), 0.0);
}

#[test]
fn less_similar_grows_with_exclusion_and_sparsity() {
    let mut rng = Mix(62);
    let mut rows: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.range(0.0, 1.0), rng.range(0.0, 1.0)]).collect();
    rows.extend((0..6).map(|i| vec![5.0 + i as f64, 5.0]));
    let m = Model::new(continuous_dataset(&["x", "y"], &rows), params(4, 2.0, false)).unwrap();
    let dense = [Some(0.5), Some(0.5)];
    let sparse = [Some(7.5), Some(5.2)];
    let nearest = local_model(&m, &dense, LocalSize::Count(1), &[]).unwrap()[0].distance;
    assert_eq!(less_similar_distance(&m, &dense, Exclusion::Count(0), &[]).unwrap(), nearest);
    let mut last = 0.0;
    for c in 0..20 {
        let d = less_similar_distance(&m, &dense, Exclusion::Count(c), &[]).unwrap();
        assert!(d >= last);
        last = d;
    }
    let d_dense = less_similar_distance(&m, &dense, Exclusion::Count(3), &[]).unwrap();
    let d_sparse = less_similar_distance(&m, &sparse, Exclusion::Count(3), &[]).unwrap();
    assert!(d_sparse > d_dense);
    assert!(less_similar_distance(&m, &dense, Exclusion::Count(86), &[]).is_err());
}

#[test]
fn whole_model_ratios_are_one() {
    let mut rng = Mix(63);
    let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.normal(), rng.normal()]).collect();
    let m = fitted(continuous_dataset(&["x", "y"], &rows), params(5, 0.0, true));
    let ids: Vec<u64> = (0..30).collect();
    for r in conviction_ratios(&m, &ids).unwrap() {
        assert_eq!(r.prediction_ratio(), 1.0);
        assert_eq!(r.familiarity_ratio(), 1.0);
    }
}

#[test]
fn noisy_pocket_is_flagged() {
    let mut rng = Mix(64);
    let mut rows: Vec<Vec<f64>> = (0..120)
        .map(|i| {
            let x = i as f64 / 12.0;
            vec![x, x]
        })
        .collect();
    for r in rows.iter_mut().filter(|r| (4.0..5.0).contains(&r[0])) {
        r[1] += rng.range(-3.0, 3.0);
    }
    let m = fitted(continuous_dataset(&["x", "y"], &rows), params(5, 0.0, true));
    let local = local_model(&m, &[Some(4.5), None], LocalSize::Count(30), &[]).unwrap();
    let ids: Vec<u64> = local.iter().map(|n| n.id).collect();
    let ratios = conviction_ratios(&m, &ids).unwrap();
    assert!(ratios.iter().all(|r| r.prediction_ratio().is_finite() && r.prediction_ratio() > 0.0));
    let pocket: Vec<u64> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| (4.0..5.0).contains(&r[0]))
        .map(|(i, _)| i as u64)
        .collect();
    let flagged: Vec<u64> = ratios.iter().filter(|r| r.noise).map(|r| r.id).collect();
    assert!(flagged.iter().any(|id| pocket.contains(id)), "flagged {flagged:?}");
}

#[test]
fn regional_residuals_follow_local_noise() {
    let mut rng = Mix(65);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let x = rng.range(0.0, 10.0);
            vec![x, x + 0.1 * x * rng.normal()]
        })
        .collect();
    let m = fitted(continuous_dataset(&["x", "y"], &rows), params(6, 0.0, true));
    let low = regional_residuals(&m, &[Some(1.0), None], 40).unwrap().values[1];
    let high = regional_residuals(&m, &[Some(9.0), None], 40).unwrap().values[1];
    assert!(high > low, "{high} vs {low}");
    let all = regional_residuals(&m, &[Some(5.0), None], 200).unwrap();
    let opts = ResidualOptions {
        cap: usize::MAX,
        ..Default::default()
    };
    assert_eq!(all.values, holdout_residuals_with(&m, &opts).unwrap().values);
    assert!(regional_residuals(&m, &[Some(5.0), None], 1).is_err());
}

#[test]
fn bundle_is_consistent_with_its_parts() {
    let mut rng = Mix(66);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|_| {
            let x = rng.range(0.0, 10.0);
            vec![x, 3.0 - x + 0.2 * rng.normal()]
        })
        .collect();
    let m = fitted(continuous_dataset(&["x", "y"], &rows), params(6, 0.0, true));
    let train = m.dataset().cases()[10].values[0].unwrap();
    let b = explain_react(&m, &[(0, train)], &[1], 6, &ExplainOptions::default()).unwrap();
    assert_eq!(b.neighbors[0].id, 10);
    assert!(b.outside_range.iter().all(|f| !f.outside));
    let far = explain_react(&m, &[(0, 25.0)], &[1], 6, &ExplainOptions::default()).unwrap();
    assert!(far.outside_range[0].outside);
    for flag in &far.outside_range {
        let vals: Vec<f64> = far
            .neighbors
            .iter()
            .map(|n| m.dataset().case(n.id).unwrap().values[flag.feature].unwrap())
            .collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        assert_eq!(flag.outside, flag.value < lo || flag.value > hi);
    }
}
