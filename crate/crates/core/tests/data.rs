use conviction_core::data::{infer_schema, mask_values, normalize_weights, parse_table, write_table};
use conviction_core::{Dataset, FeatureKind, FeatureSchema};
use proptest::prelude::*;

#[test]
fn table_examples() {
    let schema = vec![FeatureSchema::continuous("a"), FeatureSchema::nominal("b")];
    let ds = parse_table("a,b\n1.5,x\n2.0,\n", schema.clone(), b',').unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.cases()[1].values[1], None);
    assert!(parse_table("a,b\n", schema, b',').unwrap().is_empty());
    let ord = vec![FeatureSchema::ordinal("g", ["low", "mid", "high"])];
    assert_eq!(parse_table("g\nmid\n", ord, b',').unwrap().cases()[0].values[0], Some(1.0));
}

#[test]
fn inferred_kinds() {
    let kinds: Vec<FeatureKind> = infer_schema("n,c,m\n1,red,1\n2.5,blue,red\n,red,\n", b',')
        .unwrap()
        .into_iter()
        .map(|f| f.kind)
        .collect();
    assert_eq!(kinds, vec![FeatureKind::Continuous, FeatureKind::Nominal, FeatureKind::Nominal]);
}

#[test]
fn masking_counts_and_determinism() {
    let rows = (0..10).map(|i| (0..10).map(|j| Some((i * 10 + j) as f64)).collect()).collect();
    let schema = (0..10).map(|j| FeatureSchema::continuous(format!("f{j}"))).collect();
    let ds = Dataset::from_rows(schema, rows).unwrap();
    let (masked, cells) = mask_values(&ds, 0.1, 3).unwrap();
    assert_eq!(cells.len(), 10);
    assert_eq!(masked.missing_count(), 10);
    assert_eq!(mask_values(&ds, 0.1, 3).unwrap().1, cells);
    assert_eq!(mask_values(&ds, 1e-6, 3).unwrap().1.len(), 1);
}

proptest! {
    #[test]
    fn weight_normalization_is_idempotent(w in prop::collection::vec(1e-3f64..1e3, 1..10)) {
        let mut schema: Vec<FeatureSchema> = w
            .iter()
            .enumerate()
            .map(|(i, w)| FeatureSchema::continuous(format!("f{i}")).with_weight(*w))
            .collect();
        normalize_weights(&mut schema);
        let once: Vec<f64> = schema.iter().map(|f| f.weight).collect();
        prop_assert!((once.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        normalize_weights(&mut schema);
        for (a, b) in once.iter().zip(schema.iter().map(|f| f.weight)) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn written_tables_parse_back(values in prop::collection::vec((-1e9f64..1e9, 0usize..3), 1..30)) {
        let schema = vec![FeatureSchema::continuous("v"), FeatureSchema::nominal("s")];
        let mut text = String::from("v,s\n");
        for (v, s) in &values {
            text.push_str(&format!("{v},{}\n", ["a", "b b", "c,d"][*s].replace("c,d", "\"c,d\"")));
        }
        let ds = parse_table(&text, schema.clone(), b',').unwrap();
        let again = parse_table(&write_table(&ds, b',', false), schema, b',').unwrap();
        prop_assert_eq!(again, ds);
    }
}
