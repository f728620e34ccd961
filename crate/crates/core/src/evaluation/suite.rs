//! Bundled synthetic benchmark datasets and suite directories on disk.

use std::f64::consts::PI;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::data::{parse_schema_file, parse_table, Case, Dataset, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification,
}

/// A dataset with the feature the harness scores.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchDataset {
    pub name: String,
    pub dataset: Dataset,
    pub target: usize,
    pub task: Task,
}

impl BenchDataset {
    fn from_columns(name: &str, schema: Vec<FeatureSchema>, rows: Vec<Vec<f64>>, task: Task) -> Self {
        let target = schema.len() - 1;
        let rows = rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
        Self {
            name: name.to_string(),
            dataset: Dataset::from_rows(schema, rows).expect("generated rows fit their schema"),
            target,
            task,
        }
    }
}

fn continuous(names: &[&str]) -> Vec<FeatureSchema> {
    names.iter().map(|n| FeatureSchema::continuous(*n)).collect()
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Default number of cases per bundled dataset.
pub const SUITE_SIZE: usize = 150;

/// Twelve regression datasets; the target is the last feature.
pub fn regression_suite(seed: u64) -> Vec<BenchDataset> {
    regression_suite_sized(seed, SUITE_SIZE)
}

pub fn regression_suite_sized(seed: u64, n: usize) -> Vec<BenchDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let rows = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
            let y = 10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4] + gauss(&mut rng, 1.0);
            x.into_iter().chain([y]).collect()
        })
        .collect();
    let names = ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9", "x10", "y"];
    out.push(BenchDataset::from_columns("friedman1", continuous(&names), rows, Task::Regression));

    let f2: Vec<[f64; 4]> = (0..n)
        .map(|_| {
            [
                uniform(&mut rng, 0.0, 100.0),
                uniform(&mut rng, 40.0 * PI, 560.0 * PI),
                rng.random::<f64>(),
                uniform(&mut rng, 1.0, 11.0),
            ]
        })
        .collect();
    let rows = f2
        .iter()
        .map(|x| {
            let y = (x[0].powi(2) + (x[1] * x[2] - 1.0 / (x[1] * x[3])).powi(2)).sqrt() + gauss(&mut rng, 30.0);
            vec![x[0], x[1], x[2], x[3], y]
        })
        .collect();
    out.push(BenchDataset::from_columns("friedman2", continuous(&["a", "b", "c", "d", "y"]), rows, Task::Regression));

    let rows = f2
        .iter()
        .map(|x| {
            let y = ((x[1] * x[2] - 1.0 / (x[1] * x[3])) / x[0]).atan() + gauss(&mut rng, 0.1);
            vec![x[0], x[1], x[2], x[3], y]
        })
        .collect();
    out.push(BenchDataset::from_columns("friedman3", continuous(&["a", "b", "c", "d", "y"]), rows, Task::Regression));

    let rows = (0..n)
        .map(|_| {
            let a = rng.random::<f64>();
            let b = uniform(&mut rng, 0.0, 100.0);
            let c = uniform(&mut rng, 0.0, 0.01);
            let noise: Vec<f64> = (0..4).map(|_| uniform(&mut rng, 0.0, 1000.0)).collect();
            let y = a + b / 100.0 + 100.0 * c + gauss(&mut rng, 0.1);
            [a, b, c].into_iter().chain(noise).chain([y]).collect()
        })
        .collect();
    out.push(BenchDataset::from_columns(
        "mixed_scales",
        continuous(&["a", "b", "c", "n1", "n2", "n3", "n4", "y"]),
        rows,
        Task::Regression,
    ));

    let rows = (0..n)
        .map(|_| {
            let x = uniform(&mut rng, 0.0, 10.0);
            let noise: Vec<f64> = (0..3).map(|_| gauss(&mut rng, 5.0)).collect();
            let y = x.sin() + gauss(&mut rng, 0.1);
            [x].into_iter().chain(noise).chain([y]).collect()
        })
        .collect();
    out.push(BenchDataset::from_columns("sine", continuous(&["x", "n1", "n2", "n3", "y"]), rows, Task::Regression));

    let rows = (0..n)
        .map(|_| {
            let a = uniform(&mut rng, -2.0, 2.0);
            let b = uniform(&mut rng, -2.0, 2.0);
            let noise: Vec<f64> = (0..2).map(|_| uniform(&mut rng, -50.0, 50.0)).collect();
            let y = a * b + gauss(&mut rng, 0.2);
            [a, b].into_iter().chain(noise).chain([y]).collect()
        })
        .collect();
    out.push(BenchDataset::from_columns("interaction", continuous(&["a", "b", "n1", "n2", "y"]), rows, Task::Regression));

    let rows = (0..n)
        .map(|_| {
            let x = rng.random::<f64>();
            let z = uniform(&mut rng, 0.0, 20.0);
            let noise: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 3.0).collect();
            let y = (x * 4.0).floor() * 3.0 + z / 10.0 + gauss(&mut rng, 0.3);
            [x, z].into_iter().chain(noise).chain([y]).collect()
        })
        .collect();
    out.push(BenchDataset::from_columns("steps", continuous(&["x", "z", "n1", "n2", "n3", "y"]), rows, Task::Regression));

    let rows = (0..n)
        .map(|_| {
            let p: Vec<f64> = (0..3).map(|_| uniform(&mut rng, -1.5, 1.5)).collect();
            let noise: Vec<f64> = (0..3).map(|_| gauss(&mut rng, 1.0)).collect();
            let y = (-p.iter().map(|v| v * v).sum::<f64>()).exp() + gauss(&mut rng, 0.02);
            p.into_iter().chain(noise).chain([y]).collect()
        })
        .collect();
    out.push(BenchDataset::from_columns(
        "radial",
        continuous(&["p1", "p2", "p3", "n1", "n2", "n3", "y"]),
        rows,
        Task::Regression,
    ));

    let rows = (0..n)
        .map(|_| {
            let x = uniform(&mut rng, 0.0, 5.0);
            let w = uniform(&mut rng, 0.0, 1.0);
            let noise: Vec<f64> = (0..3).map(|_| uniform(&mut rng, 0.0, 10.0)).collect();
            let y = 2.0 * x + 3.0 * w * w + gauss(&mut rng, 0.1 + 0.2 * x);
            [x, w].into_iter().chain(noise).chain([y]).collect()
        })
        .collect();
    out.push(BenchDataset::from_columns(
        "heteroscedastic",
        continuous(&["x", "w", "n1", "n2", "n3", "y"]),
        rows,
        Task::Regression,
    ));

    let mut schema = vec![FeatureSchema::nominal("group")];
    schema.extend(continuous(&["x", "n1", "n2", "y"]));
    let mut ds = Dataset::new(schema).expect("valid schema");
    let groups = ["north", "south", "east", "west"];
    let effects = [0.0, 4.0, -3.0, 1.5];
    for g in groups {
        ds.intern(0, g);
    }
    for i in 0..n {
        let g = rng.random_range(0..4usize);
        let x = uniform(&mut rng, -2.0, 2.0);
        let n1 = gauss(&mut rng, 10.0);
        let n2 = uniform(&mut rng, 0.0, 100.0);
        let y = effects[g] + x * x + gauss(&mut rng, 0.3);
        ds.push(Case::new(i as u64, vec![Some(g as f64), Some(x), Some(n1), Some(n2), Some(y)]))
            .expect("valid case");
    }
    out.push(BenchDataset {
        name: "grouped".into(),
        dataset: ds,
        target: 4,
        task: Task::Regression,
    });

    let mut schema = vec![FeatureSchema::cyclic("hour", 24.0)];
    schema.extend(continuous(&["load", "n1", "n2", "y"]));
    let rows = (0..n)
        .map(|_| {
            let h = uniform(&mut rng, 0.0, 24.0);
            let load = rng.random::<f64>();
            let y = 5.0 * (2.0 * PI * h / 24.0).cos() + 2.0 * load + gauss(&mut rng, 0.3);
            vec![h, load, gauss(&mut rng, 3.0), uniform(&mut rng, 0.0, 1.0), y]
        })
        .collect();
    out.push(BenchDataset::from_columns("daily_cycle", schema, rows, Task::Regression));

    let rows = (0..n)
        .map(|_| {
            let a = uniform(&mut rng, 0.0, 3.0);
            let b = uniform(&mut rng, 0.0, 1000.0);
            let noise: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
            let y = a.exp() + b / 200.0 + gauss(&mut rng, 0.5);
            [a, b].into_iter().chain(noise).chain([y]).collect()
        })
        .collect();
    out.push(BenchDataset::from_columns("growth", continuous(&["a", "b", "n1", "n2", "y"]), rows, Task::Regression));

    out
}

fn labeled(name: &str, features: &[&str], rows: Vec<(Vec<f64>, usize)>, labels: &[&str]) -> BenchDataset {
    let mut schema = continuous(features);
    schema.push(FeatureSchema::nominal("class"));
    let target = features.len();
    let mut ds = Dataset::new(schema).expect("valid schema");
    for l in labels {
        ds.intern(target, l);
    }
    for (i, (x, c)) in rows.into_iter().enumerate() {
        let values = x.into_iter().map(Some).chain([Some(c as f64)]).collect();
        ds.push(Case::new(i as u64, values)).expect("valid case");
    }
    BenchDataset {
        name: name.to_string(),
        dataset: ds,
        target,
        task: Task::Classification,
    }
}

/// Ten classification datasets; the target is the last (nominal) feature.
pub fn classification_suite(seed: u64) -> Vec<BenchDataset> {
    classification_suite_sized(seed, SUITE_SIZE)
}

pub fn classification_suite_sized(seed: u64, n: usize) -> Vec<BenchDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let rows = (0..n)
        .map(|i| {
            let c = i % 2;
            let t = uniform(&mut rng, 0.0, PI);
            let (x, y) = if c == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
            (vec![x + gauss(&mut rng, 0.1), y + gauss(&mut rng, 0.1), gauss(&mut rng, 1.0)], c)
        })
        .collect();
    out.push(labeled("moons", &["x", "y", "n1"], rows, &["upper", "lower"]));

    let rows = (0..n)
        .map(|i| {
            let c = i % 2;
            let r = if c == 0 { 1.0 } else { 2.0 } + gauss(&mut rng, 0.15);
            let t = uniform(&mut rng, 0.0, 2.0 * PI);
            (vec![r * t.cos(), r * t.sin()], c)
        })
        .collect();
    out.push(labeled("circles", &["x", "y"], rows, &["inner", "outer"]));

    let centres = [[0.0, 0.0], [3.0, 3.0], [0.0, 4.0]];
    let rows = (0..n)
        .map(|i| {
            let c = i % 3;
            (
                vec![
                    centres[c][0] + gauss(&mut rng, 1.0),
                    centres[c][1] + gauss(&mut rng, 1.0),
                    uniform(&mut rng, 0.0, 50.0),
                ],
                c,
            )
        })
        .collect();
    out.push(labeled("blobs", &["x", "y", "n1"], rows, &["a", "b", "c"]));

    let rows = (0..n)
        .map(|_| {
            let x = uniform(&mut rng, -1.0, 1.0);
            let y = uniform(&mut rng, -1.0, 1.0);
            (vec![x, y, rng.random::<f64>()], usize::from((x > 0.0) != (y > 0.0)))
        })
        .collect();
    out.push(labeled("xor", &["x", "y", "n1"], rows, &["same", "diff"]));

    let rows = (0..n)
        .map(|_| {
            let a = uniform(&mut rng, 0.0, 10.0);
            let b = uniform(&mut rng, 0.0, 0.1);
            let noise: Vec<f64> = (0..3).map(|_| gauss(&mut rng, 100.0)).collect();
            let c = usize::from(a / 10.0 + b * 10.0 + gauss(&mut rng, 0.05) > 1.0);
            ([a, b].into_iter().chain(noise).collect(), c)
        })
        .collect();
    out.push(labeled("linear", &["a", "b", "n1", "n2", "n3"], rows, &["low", "high"]));

    let rows = (0..n)
        .map(|i| {
            let c = i % 2;
            let t = uniform(&mut rng, 0.5, 3.0 * PI);
            let phase = if c == 0 { 0.0 } else { PI };
            let r = t / (3.0 * PI);
            (
                vec![r * (t + phase).cos() + gauss(&mut rng, 0.02), r * (t + phase).sin() + gauss(&mut rng, 0.02)],
                c,
            )
        })
        .collect();
    out.push(labeled("spiral", &["x", "y"], rows, &["arm0", "arm1"]));

    let rows = (0..n)
        .map(|_| {
            let x = rng.random::<f64>();
            let y = rng.random::<f64>();
            let c = ((x * 3.0).floor() as usize + (y * 3.0).floor() as usize) % 2;
            (vec![x, y, uniform(&mut rng, 0.0, 5.0)], c)
        })
        .collect();
    out.push(labeled("checkerboard", &["x", "y", "n1"], rows, &["white", "black"]));

    let rows = (0..n)
        .map(|_| {
            let x = gauss(&mut rng, 1.0);
            let c = usize::from(x > 1.2);
            (vec![x, gauss(&mut rng, 1.0), gauss(&mut rng, 1.0)], c)
        })
        .collect();
    out.push(labeled("imbalanced", &["x", "n1", "n2"], rows, &["common", "rare"]));

    let rows = (0..n)
        .map(|_| {
            let p: Vec<f64> = (0..3).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
            let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            let c = usize::from(r > 0.9);
            (p.into_iter().chain([gauss(&mut rng, 2.0)]).collect(), c)
        })
        .collect();
    out.push(labeled("sphere", &["p1", "p2", "p3", "n1"], rows, &["in", "out"]));

    let rows = (0..n)
        .map(|_| {
            let x = uniform(&mut rng, 0.0, 100.0);
            let z = uniform(&mut rng, 0.0, 1.0);
            let c = if x < 33.0 { 0 } else if z < 0.5 { 1 } else { 2 };
            (vec![x, z, uniform(&mut rng, 0.0, 1.0)], c)
        })
        .collect();
    out.push(labeled("tree", &["x", "z", "n1"], rows, &["left", "mid", "right"]));

    out
}

/// Ten complete datasets whose features all depend on shared latent
/// factors, so every feature is predictable from the others.
pub fn structured_suite(seed: u64) -> Vec<BenchDataset> {
    structured_suite_sized(seed, SUITE_SIZE)
}

pub fn structured_suite_sized(seed: u64, n: usize) -> Vec<BenchDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families: [(&str, usize, fn(&[f64], usize) -> f64); 10] = [
        ("line", 1, |z, j| z[0] * (j as f64 + 1.0)),
        ("curve", 1, |z, j| (z[0] * (j as f64 + 1.0) * 0.7).sin() + z[0]),
        ("plane", 2, |z, j| z[0] * (j as f64 - 1.5) + z[1] * (2.0 - j as f64 * 0.5)),
        ("bowl", 2, |z, j| if j == 0 { z[0] } else if j == 1 { z[1] } else { z[0] * z[0] + z[1] * z[1] * j as f64 }),
        ("scaled", 1, |z, j| z[0] * 10f64.powi(j as i32 - 2)),
        ("helix", 1, |z, j| match j % 3 {
            0 => (3.0 * z[0]).cos(),
            1 => (3.0 * z[0]).sin(),
            _ => z[0],
        }),
        ("exp", 1, |z, j| (z[0] * (0.5 + j as f64 * 0.3)).exp()),
        ("mixture", 2, |z, j| z[j % 2] * 3.0 + z[(j + 1) % 2]),
        ("log", 1, |z, j| (1.5 + z[0]).ln() * (j as f64 + 1.0) + z[0]),
        ("ring", 1, |z, j| match j % 2 {
            0 => (2.0 * z[0]).cos() * (1.0 + j as f64),
            _ => (2.0 * z[0]).sin() * (1.0 + j as f64),
        }),
    ];
    let noise = Normal::new(0.0, 0.03).expect("valid sd");
    families
        .iter()
        .map(|(name, latent, f)| {
            let features = 5;
            let rows = (0..n)
                .map(|_| {
                    let z: Vec<f64> = (0..*latent).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
                    (0..features)
                        .map(|j| {
                            let v = f(&z, j);
                            v + noise.sample(&mut rng) * v.abs().max(0.1)
                        })
                        .collect()
                })
                .collect();
            let names: Vec<String> = (0..features).map(|j| format!("f{j}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            BenchDataset::from_columns(name, continuous(&refs), rows, Task::Regression)
        })
        .collect()
}

/// Loads every `*.csv` in `dir` (sorted by name). The last column is the
/// target; a sibling `<stem>.schema` file overrides schema inference.
/// Nominal targets are scored as classification.
pub fn load_suite_dir(dir: &Path) -> Result<Vec<BenchDataset>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!("no .csv files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|path| {
            let text = std::fs::read_to_string(path)?;
            let schema_path = path.with_extension("schema");
            let schema = if schema_path.exists() {
                parse_schema_file(&std::fs::read_to_string(&schema_path)?)?
            } else {
                crate::data::infer_schema(&text, b',')?
            };
            let dataset = parse_table(&text, schema, b',')?;
            let target = dataset.feature_count() - 1;
            let task = match dataset.schema()[target].kind {
                FeatureKind::Nominal => Task::Classification,
                _ => Task::Regression,
            };
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(BenchDataset {
                name,
                dataset,
                target,
                task,
            })
        })
        .collect()
}
