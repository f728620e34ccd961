mod common;

use common::{mann_whitney_enumerated, wilcoxon_enumerated, Mix};
use conviction_core::evaluation::stats::{mann_whitney_u, wilcoxon_signed_rank};
use proptest::prelude::*;

#[test]
fn uniform_shift_of_ten_pairs() {
    let b: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 + 0.1).collect();
    let a: Vec<f64> = b.iter().map(|v| v + 1e-3).collect();
    let got = wilcoxon_signed_rank(&a, &b).unwrap();
    assert!(got.exact);
    // Only the all-positive and all-negative assignments are as extreme.
    assert!((got.p_value - 2.0 / 1024.0).abs() < 1e-15);
    assert!((wilcoxon_enumerated(&a, &b) - got.p_value).abs() < 1e-15);
}

#[test]
fn signed_rank_matches_enumeration_with_ties() {
    let mut rng = Mix(44);
    for n in 6..=12 {
        for _ in 0..15 {
            let a: Vec<f64> = (0..n).map(|_| (rng.range(0.0, 6.0) * 2.0).round() / 2.0).collect();
            let b: Vec<f64> = (0..n).map(|_| (rng.range(0.0, 6.0) * 2.0).round() / 2.0).collect();
            let nonzero = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            if (1..6).contains(&nonzero) {
                continue;
            }
            let got = wilcoxon_signed_rank(&a, &b).unwrap().p_value;
            let want = wilcoxon_enumerated(&a, &b);
            assert!((got - want).abs() < 1e-12, "n={n}: {got} vs {want}");
        }
    }
}

#[test]
fn rank_sum_matches_enumeration_with_ties() {
    let mut rng = Mix(45);
    for m in 1..=8 {
        for n in 1..=8 {
            let a: Vec<f64> = (0..m).map(|_| rng.range(0.0, 5.0).round()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.range(0.5, 5.5).round()).collect();
            let got = mann_whitney_u(&a, &b).unwrap().p_value;
            let want = mann_whitney_enumerated(&a, &b);
            assert!((got - want).abs() < 1e-12, "{m}x{n}: {got} vs {want}");
        }
    }
}

#[test]
fn disjoint_samples_of_twenty() {
    let a: Vec<f64> = (0..20).map(f64::from).collect();
    let b: Vec<f64> = (100..120).map(f64::from).collect();
    assert!(mann_whitney_u(&a, &b).unwrap().p_value < 1e-3);
    assert!(mann_whitney_u(&a, &a).unwrap().p_value > 0.99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn signed_rank_p_is_a_probability(a in prop::collection::vec(-5.0f64..5.0, 6..40)) {
        let b: Vec<f64> = a.iter().map(|v| v * 0.5 + 0.3).collect();
        let r = wilcoxon_signed_rank(&a, &b);
        if let Ok(r) = r {
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }

    #[test]
    fn rank_sum_is_symmetric(
        a in prop::collection::vec(-5.0f64..5.0, 1..30),
        b in prop::collection::vec(-5.0f64..5.0, 1..30),
    ) {
        let ab = mann_whitney_u(&a, &b).unwrap().p_value;
        let ba = mann_whitney_u(&b, &a).unwrap().p_value;
        prop_assert!((ab - ba).abs() < 1e-9);
    }
}
