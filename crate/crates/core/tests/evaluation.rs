use conviction_core::evaluation::suite::{classification_suite_sized, regression_suite_sized};
use conviction_core::evaluation::{evaluate, r_squared, BenchDataset, Configuration, Split, Task};
use conviction_core::{Dataset, FeatureSchema};

#[test]
fn memorizable_labels_score_perfectly() {
    let mut ds = Dataset::new(vec![FeatureSchema::continuous("x"), FeatureSchema::nominal("label")]).unwrap();
    let codes = [ds.intern(1, "a"), ds.intern(1, "b"), ds.intern(1, "c")];
    let mut id = 0;
    for (i, code) in codes.iter().enumerate() {
        for _ in 0..12 {
            ds.push(conviction_core::Case::new(id, vec![Some(i as f64 * 10.0), Some(f64::from(*code))]))
                .unwrap();
            id += 1;
        }
    }
    let bench = BenchDataset {
        name: "copies".into(),
        dataset: ds,
        target: 1,
        task: Task::Classification,
    };
    let result = evaluate(&[bench], &Configuration::bundled(), Split::KFold(4), 2).unwrap();
    for cell in &result.cells {
        assert_eq!(cell.score, 1.0, "{}", cell.configuration);
    }
}

#[test]
fn mean_prediction_has_zero_r_squared() {
    assert_eq!(r_squared(&[3.0, 3.0, 3.0], &[3.0, 3.0, 3.0]), 0.0);
    assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]), 0.0);
    assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
}

#[test]
fn harness_is_deterministic_under_seed() {
    let mut data = regression_suite_sized(5, 40);
    data.truncate(2);
    data.extend(classification_suite_sized(5, 40).into_iter().take(2));
    let configs = Configuration::bundled();
    let a = evaluate(&data, &configs, Split::KFold(3), 9).unwrap();
    let b = evaluate(&data, &configs, Split::KFold(3), 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cells.len(), 4 * 3);
    let holdout = evaluate(&data, &configs, Split::Holdout(0.7), 9).unwrap();
    assert!(holdout.cells.iter().all(|c| c.fold_scores.len() == 1));
}

#[test]
fn only_classic_standardizes() {
    for c in Configuration::bundled() {
        assert_eq!(c.standardize, c.label == "classic");
    }
}
