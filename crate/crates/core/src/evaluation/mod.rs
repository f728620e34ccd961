//! Benchmark harness comparing metric configurations on scored datasets.

pub mod stats;
pub mod suite;

use std::fmt::Write as _;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, FeatureKind};
use crate::engine::{react, FitOptions, Hyperparameters, Model};
use crate::error::{Error, Result};
use crate::metric::{DeviationMode, MetricConfig};

pub use suite::{BenchDataset, Task};

/// Neighbor count used by the bundled configurations.
pub const EVAL_K: usize = 8;

/// A metric setup under comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub label: String,
    pub params: Hyperparameters,
    /// z-score non-target continuous features using train-split moments.
    pub standardize: bool,
    /// Iterate hold-one-out residuals before scoring.
    pub fit: bool,
}

impl Configuration {
    /// Euclidean distance over standardized features.
    pub fn classic() -> Self {
        Self {
            label: "classic".into(),
            params: Hyperparameters {
                k: EVAL_K,
                metric: MetricConfig {
                    p: 2.0,
                    mode: DeviationMode::None,
                },
                alpha: 1.0,
            },
            standardize: true,
            fit: false,
        }
    }

    /// p = 0.1 with expected distances and fitted residuals, unstandardized.
    pub fn fractional() -> Self {
        Self {
            label: "fractional".into(),
            params: Hyperparameters {
                k: EVAL_K,
                metric: MetricConfig {
                    p: 0.1,
                    mode: DeviationMode::LkNormal,
                },
                alpha: 1.0,
            },
            standardize: false,
            fit: true,
        }
    }

    /// Geometric-mean limit with expected distances and fitted residuals.
    pub fn zero_lk() -> Self {
        Self {
            label: "zero-lk".into(),
            params: Hyperparameters {
                k: EVAL_K,
                metric: MetricConfig {
                    p: 0.0,
                    mode: DeviationMode::LkNormal,
                },
                alpha: 1.0,
            },
            standardize: false,
            fit: true,
        }
    }

    pub fn bundled() -> Vec<Self> {
        vec![Self::classic(), Self::fractional(), Self::zero_lk()]
    }

    /// Parses `classic`, `fractional`, `zero-lk`, or a custom
    /// `p=<p>[:mode=<none|lk-normal>][:std][:fit][:k=<k>][:alpha=<a>]` spec.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "classic" => return Ok(Self::classic()),
            "fractional" => return Ok(Self::fractional()),
            "zero-lk" => return Ok(Self::zero_lk()),
            _ => {}
        }
        let mut config = Self {
            label: text.to_string(),
            params: Hyperparameters {
                k: EVAL_K,
                metric: MetricConfig {
                    p: 2.0,
                    mode: DeviationMode::None,
                },
                alpha: 1.0,
            },
            standardize: false,
            fit: false,
        };
        let bad = || Error::invalid(format!("unrecognized configuration `{text}`"));
        let mut saw_p = false;
        for part in text.split(':') {
            match part.split_once('=') {
                Some(("p", v)) => {
                    config.params.metric.p = v.parse().map_err(|_| bad())?;
                    saw_p = true;
                }
                Some(("mode", v)) => config.params.metric.mode = DeviationMode::parse(v).ok_or_else(bad)?,
                Some(("k", v)) => config.params.k = v.parse().map_err(|_| bad())?,
                Some(("alpha", v)) => config.params.alpha = v.parse().map_err(|_| bad())?,
                None if part == "std" => config.standardize = true,
                None if part == "fit" => config.fit = true,
                _ => return Err(bad()),
            }
        }
        if !saw_p {
            return Err(bad());
        }
        config.params.validate()?;
        Ok(config)
    }

    /// Label with p, deviation mode and standardization flag.
    pub fn describe(&self) -> String {
        format!(
            "{} (p={}, mode={}, std={})",
            self.label,
            self.params.metric.p,
            self.params.metric.mode.as_str(),
            self.standardize
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split {
    /// Single split; the given fraction of (shuffled) cases trains.
    Holdout(f64),
    /// Cross-validation; fold `i` holds shuffled positions `i, i+K, ...`.
    KFold(usize),
}

impl Default for Split {
    fn default() -> Self {
        Split::KFold(5)
    }
}

/// Score of one configuration on one dataset, averaged over folds.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCell {
    pub dataset: String,
    pub task: Task,
    pub configuration: String,
    /// Accuracy for classification, r² for regression.
    pub score: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTest {
    pub first: String,
    pub second: String,
    /// Two-sided signed-rank p-value over per-dataset scores; `None` when
    /// too few datasets differ.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub configurations: Vec<Configuration>,
    pub datasets: Vec<(String, Task)>,
    /// Row-major: dataset, then configuration.
    pub cells: Vec<EvalCell>,
    /// Mean score per configuration, in configuration order.
    pub means: Vec<f64>,
    pub pairwise: Vec<PairwiseTest>,
}

impl EvalResult {
    pub fn cell(&self, dataset: usize, configuration: usize) -> &EvalCell {
        &self.cells[dataset * self.configurations.len() + configuration]
    }

    /// Per-dataset scores of one configuration.
    pub fn scores(&self, configuration: usize) -> Vec<f64> {
        (0..self.datasets.len()).map(|d| self.cell(d, configuration).score).collect()
    }

    pub fn mean_of(&self, label: &str) -> Option<f64> {
        self.configurations.iter().position(|c| c.label == label).map(|i| self.means[i])
    }

    pub fn p_value(&self, first: &str, second: &str) -> Option<f64> {
        self.pairwise
            .iter()
            .find(|t| (t.first == first && t.second == second) || (t.first == second && t.second == first))
            .and_then(|t| t.p_value)
    }

    /// One line per cell: dataset, task, configuration, metric name, score.
    pub fn to_table(&self, delimiter: char) -> String {
        let d = delimiter;
        let mut out = format!("dataset{d}task{d}configuration{d}p{d}mode{d}standardized{d}metric{d}score\n");
        for cell in &self.cells {
            let config = self
                .configurations
                .iter()
                .find(|c| c.label == cell.configuration)
                .expect("cell configuration exists");
            let (task, metric) = match cell.task {
                Task::Regression => ("regression", "r2"),
                Task::Classification => ("classification", "accuracy"),
            };
            let _ = writeln!(
                out,
                "{}{d}{task}{d}{}{d}{}{d}{}{d}{}{d}{metric}{d}{}",
                cell.dataset,
                cell.configuration,
                config.params.metric.p,
                config.params.metric.mode.as_str(),
                config.standardize,
                cell.score
            );
        }
        out
    }

    /// Fixed-width summary: per-dataset scores, means and pairwise p-values.
    pub fn summary(&self) -> String {
        let width = self.configurations.iter().map(|c| c.label.len()).max().unwrap_or(0).max(10);
        let name_width = self.datasets.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
        let mut out = format!("{:<name_width$}", "dataset");
        for c in &self.configurations {
            let _ = write!(out, "  {:>width$}", c.label);
        }
        out.push('\n');
        for (d, (name, _)) in self.datasets.iter().enumerate() {
            let _ = write!(out, "{name:<name_width$}");
            for c in 0..self.configurations.len() {
                let _ = write!(out, "  {:>width$.4}", self.cell(d, c).score);
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<name_width$}", "mean");
        for m in &self.means {
            let _ = write!(out, "  {m:>width$.4}");
        }
        out.push('\n');
        if !self.pairwise.is_empty() {
            out.push_str("\nsigned-rank tests\n");
            for t in &self.pairwise {
                let p = t.p_value.map_or_else(|| "n/a".to_string(), |p| format!("{p:.4}"));
                let _ = writeln!(out, "{} vs {}: p = {p}", t.first, t.second);
            }
        }
        out
    }
}

fn fold_assignment(n: usize, split: Split, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    match split {
        Split::Holdout(fraction) => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::invalid(format!("train fraction must lie in (0, 1), got {fraction}")));
            }
            let cut = (fraction * n as f64).round() as usize;
            if cut == 0 || cut == n {
                return Err(Error::Infeasible(format!("{n} cases cannot be split at fraction {fraction}")));
            }
            let (train, test) = order.split_at(cut);
            Ok(vec![(train.to_vec(), test.to_vec())])
        }
        Split::KFold(k) => {
            if k < 2 {
                return Err(Error::invalid("cross-validation needs at least 2 folds"));
            }
            if n < k {
                return Err(Error::Infeasible(format!("{n} cases cannot fill {k} folds")));
            }
            Ok((0..k)
                .map(|fold| {
                    let mut train = Vec::new();
                    let mut test = Vec::new();
                    for (pos, &idx) in order.iter().enumerate() {
                        if pos % k == fold {
                            test.push(idx);
                        } else {
                            train.push(idx);
                        }
                    }
                    (train, test)
                })
                .collect())
        }
    }
}

fn standardize(train: &mut Dataset, test: &mut Dataset, target: usize) {
    for f in 0..train.feature_count() {
        if f == target || train.schema()[f].kind != FeatureKind::Continuous {
            continue;
        }
        let values: Vec<f64> = train.cases().iter().filter_map(|c| c.values[f]).collect();
        if values.len() < 2 {
            continue;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        let sd = var.sqrt();
        if sd > 0.0 && sd.is_finite() {
            // A shift never changes differences, so scaling alone z-scores.
            train.scale_feature(f, 1.0 / sd);
            test.scale_feature(f, 1.0 / sd);
        }
    }
}

/// r² with the test-split mean as baseline; zero when the test target is
/// constant.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> f64 {
    if actual.is_empty() {
        return 0.0;
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let sst: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if sst == 0.0 {
        return 0.0;
    }
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    1.0 - sse / sst
}

pub fn accuracy(actual: &[f64], predicted: &[f64]) -> f64 {
    if actual.is_empty() {
        return 0.0;
    }
    actual.iter().zip(predicted).filter(|(a, p)| a == p).count() as f64 / actual.len() as f64
}

fn score_fold(
    bench: &BenchDataset,
    config: &Configuration,
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<f64> {
    let cases = bench.dataset.cases();
    let ids = |idx: &[usize]| idx.iter().map(|&i| cases[i].id).collect::<Vec<u64>>();
    let mut train = bench.dataset.subset(&ids(train_idx));
    let mut test = bench.dataset.subset(&ids(test_idx));
    if train.len() <= config.params.k.min(2) {
        return Err(Error::Infeasible(format!(
            "dataset `{}` has too few training cases for the split",
            bench.name
        )));
    }
    if config.standardize {
        standardize(&mut train, &mut test, bench.target);
    }
    let model = if config.fit {
        Model::fit(train, config.params, FitOptions::default())?.0
    } else {
        Model::new(train, config.params)?
    };
    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    for case in test.cases() {
        let Some(truth) = case.values[bench.target] else {
            continue;
        };
        let context: Vec<(usize, f64)> = case
            .values
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != bench.target)
            .filter_map(|(f, v)| v.map(|v| (f, v)))
            .collect();
        let reaction = react(&model, &context, &[bench.target], config.params.k)?;
        actual.push(truth);
        predicted.push(reaction.predictions[0].1);
    }
    Ok(match bench.task {
        Task::Regression => r_squared(&actual, &predicted),
        Task::Classification => accuracy(&actual, &predicted),
    })
}

/// Scores every dataset × configuration cell (in parallel) and compares
/// configurations pairwise with the signed-rank test over datasets.
pub fn evaluate(datasets: &[BenchDataset], configurations: &[Configuration], split: Split, seed: u64) -> Result<EvalResult> {
    if datasets.is_empty() || configurations.is_empty() {
        return Err(Error::invalid("evaluation needs at least one dataset and one configuration"));
    }
    for c in configurations {
        c.params.validate()?;
    }
    let folds: Vec<_> = datasets
        .iter()
        .enumerate()
        .map(|(i, d)| fold_assignment(d.dataset.len(), split, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..datasets.len())
        .flat_map(|d| {
            let nf = folds[d].len();
            (0..configurations.len()).flat_map(move |c| (0..nf).map(move |f| (d, c, f)))
        })
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(d, c, f)| {
            let (train, test) = &folds[d][f];
            score_fold(&datasets[d], &configurations[c], train, test)
        })
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    let mut pos = 0;
    for (d, bench) in datasets.iter().enumerate() {
        for config in configurations {
            let fold_scores = scores[pos..pos + folds[d].len()].to_vec();
            pos += folds[d].len();
            cells.push(EvalCell {
                dataset: bench.name.clone(),
                task: bench.task,
                configuration: config.label.clone(),
                score: fold_scores.iter().sum::<f64>() / fold_scores.len() as f64,
                fold_scores,
            });
        }
    }
    let mut result = EvalResult {
        configurations: configurations.to_vec(),
        datasets: datasets.iter().map(|d| (d.name.clone(), d.task)).collect(),
        cells,
        means: Vec::new(),
        pairwise: Vec::new(),
    };
    result.means = (0..configurations.len())
        .map(|c| {
            let s = result.scores(c);
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect();
    for a in 0..configurations.len() {
        for b in a + 1..configurations.len() {
            let p_value = stats::wilcoxon_signed_rank(&result.scores(a), &result.scores(b))
                .ok()
                .map(|t| t.p_value);
            result.pairwise.push(PairwiseTest {
                first: configurations[a].label.clone(),
                second: configurations[b].label.clone(),
                p_value,
            });
        }
    }
    Ok(result)
}
