//! Deviation bootstrapping and hold-one-out residuals.
//!
//! The bootstrap value of a feature is the smallest nonzero gap between its
//! observed values. Hold-one-out residuals remove each case, predict each of
//! its known features from the rest of its known features, and aggregate
//! the errors. Feeding the residuals back in as deviations and repeating
//! converges in a handful of rounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, FeatureKind};
use crate::engine::Model;
use crate::error::{Error, Result};
use crate::metric::{ConfusionMatrix, DeviationVector, ResidualStatistic, NOMINAL_EPSILON};

/// Fallback scale for features without two distinct values.
pub const FALLBACK_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Bootstrap {
    pub deviations: DeviationVector,
    /// Features that took the degenerate fallback path.
    pub fallback: Vec<bool>,
}

/// Smallest nonzero pairwise gap per feature; nominal features get a
/// smoothed identity confusion matrix.
pub fn bootstrap_deviations(ds: &Dataset) -> Bootstrap {
    let xi = ds.feature_count();
    let mut values = Vec::with_capacity(xi);
    let mut confusion = Vec::with_capacity(xi);
    let mut fallback = Vec::with_capacity(xi);
    for (f, schema) in ds.schema().iter().enumerate() {
        if schema.kind.is_nominal() {
            let m = ConfusionMatrix::identity(ds.symbols(f).len(), NOMINAL_EPSILON);
            values.push(m.mismatch_rate().max(NOMINAL_EPSILON));
            confusion.push(Some(m));
            fallback.push(false);
            continue;
        }
        let mut known: Vec<f64> = ds.cases().iter().filter_map(|c| c.values[f]).collect();
        known.sort_by(f64::total_cmp);
        let mut gap = known
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|g| *g > 0.0)
            .fold(f64::INFINITY, f64::min);
        if let FeatureKind::Cyclic { period } = schema.kind {
            if let (Some(lo), Some(hi)) = (known.first(), known.last()) {
                let wrap = period - (hi - lo);
                if wrap > 0.0 && hi > lo {
                    gap = gap.min(wrap);
                }
            }
        }
        if gap.is_finite() {
            values.push(gap);
            fallback.push(false);
        } else {
            let magnitude = known.first().map_or(0.0, |v| v.abs());
            values.push(if magnitude > 0.0 {
                FALLBACK_SCALE * magnitude
            } else {
                FALLBACK_SCALE
            });
            fallback.push(true);
        }
        confusion.push(None);
    }
    Bootstrap {
        deviations: DeviationVector {
            values,
            statistic: ResidualStatistic::Bootstrap,
            confusion,
        },
        fallback,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualOptions {
    pub statistic: ResidualStatistic,
    /// Above this many cases, residuals are estimated on a seeded subsample.
    pub cap: usize,
    pub seed: u64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self {
            statistic: ResidualStatistic::MeanAbsolute,
            cap: 2000,
            seed: 0,
        }
    }
}

/// Absolute hold-one-out errors of one case (`None` where not predicted).
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResiduals {
    pub id: u64,
    pub errors: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Per-feature residual, floored at the bootstrap value.
    pub values: Vec<f64>,
    /// Unfloored aggregate error; `None` where the feature was never predicted.
    pub raw: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub confusion: Vec<Option<ConfusionMatrix>>,
    pub per_case: Vec<CaseResiduals>,
    pub statistic: ResidualStatistic,
    /// Max relative change per iteration, filled by [`iterate_residuals`].
    pub trace: Vec<f64>,
}

impl ResidualReport {
    pub fn deviations(&self) -> DeviationVector {
        DeviationVector {
            values: self.values.clone(),
            statistic: self.statistic,
            confusion: self.confusion.clone(),
        }
    }

    /// Features that no case could predict.
    pub fn unpredictable(&self) -> Vec<usize> {
        self.raw.iter().enumerate().filter_map(|(f, r)| r.is_none().then_some(f)).collect()
    }

    pub fn to_table(&self, ds: &Dataset, delimiter: char) -> String {
        let d = delimiter;
        let mut out = format!("feature{d}kind{d}residual{d}raw{d}count\n");
        for (f, schema) in ds.schema().iter().enumerate() {
            let raw = self.raw[f].map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{}{d}{}{d}{}{d}{}{d}{}\n",
                schema.name,
                schema.kind.label(),
                self.values[f],
                raw,
                self.counts[f]
            ));
        }
        out
    }
}

/// Case indices evaluated under the subsampling cap, in model order.
pub(crate) fn evaluation_indices(n: usize, opts: &ResidualOptions) -> Vec<usize> {
    if n <= opts.cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, opts.cap).into_vec();
    idx.sort_unstable();
    idx
}

fn signed_error(kind: &FeatureKind, actual: f64, predicted: f64) -> f64 {
    match kind {
        FeatureKind::Cyclic { period } => {
            let d = (actual - predicted).abs() % period;
            d.min(period - d)
        }
        FeatureKind::Nominal => f64::from(u8::from(actual != predicted)),
        FeatureKind::Continuous | FeatureKind::Ordinal { .. } => (actual - predicted).abs(),
    }
}

/// Hold-one-out report that keeps the previous deviation for features
/// nothing could predict.
pub(crate) fn report(model: &Model, opts: &ResidualOptions) -> ResidualReport {
    let ds = model.dataset();
    let xi = ds.feature_count();
    let k = model.effective_k();
    let schema = ds.schema();
    let indices = evaluation_indices(ds.len(), opts);

    let per_case: Vec<(CaseResiduals, Vec<Option<(f64, f64)>>)> = indices
        .par_iter()
        .map(|&i| {
            let case = &ds.cases()[i];
            let known = case.known_features();
            let mut errors = vec![None; xi];
            let mut pairs = vec![None; xi];
            for &f in &known {
                let context: Vec<usize> = known.iter().copied().filter(|&g| g != f).collect();
                if context.is_empty() {
                    continue;
                }
                let Ok((predicted, _)) = model.predict(&case.values, &context, f, k, &[case.id]) else {
                    continue;
                };
                let actual = case.values[f].expect("known feature");
                errors[f] = Some(signed_error(&schema[f].kind, actual, predicted));
                pairs[f] = Some((actual, predicted));
            }
            (CaseResiduals { id: case.id, errors }, pairs)
        })
        .collect();

    let mut sums = vec![0.0; xi];
    let mut counts = vec![0usize; xi];
    let mut confusion_counts: Vec<Option<Vec<f64>>> = schema
        .iter()
        .enumerate()
        .map(|(f, s)| s.kind.is_nominal().then(|| vec![0.0; ds.symbols(f).len().pow(2)]))
        .collect();
    for (residuals, pairs) in &per_case {
        for f in 0..xi {
            let Some(e) = residuals.errors[f] else { continue };
            counts[f] += 1;
            sums[f] += match (schema[f].kind.is_nominal(), opts.statistic) {
                (false, ResidualStatistic::StandardDeviation) => e * e,
                _ => e,
            };
            if let (Some(cm), Some((a, p))) = (confusion_counts[f].as_mut(), pairs[f]) {
                let m = ds.symbols(f).len();
                let (a, p) = (a as usize, p as usize);
                if a < m && p < m {
                    cm[a * m + p] += 1.0;
                }
            }
        }
    }

    let floors = model.floors();
    let previous = model.deviations();
    let mut values = Vec::with_capacity(xi);
    let mut raw = Vec::with_capacity(xi);
    let mut confusion = Vec::with_capacity(xi);
    for f in 0..xi {
        let stat = (counts[f] > 0).then(|| {
            let mean = sums[f] / counts[f] as f64;
            if !schema[f].kind.is_nominal() && opts.statistic == ResidualStatistic::StandardDeviation {
                mean.sqrt()
            } else {
                mean
            }
        });
        raw.push(stat);
        values.push(match stat {
            Some(s) => s.max(floors[f]),
            None => previous.values[f],
        });
        confusion.push(match &confusion_counts[f] {
            Some(cm) if counts[f] > 0 => Some(ConfusionMatrix::from_counts(ds.symbols(f).len(), cm, NOMINAL_EPSILON)),
            Some(_) => previous.confusion[f].clone(),
            None => None,
        });
    }

    ResidualReport {
        values,
        raw,
        counts,
        confusion,
        per_case: per_case.into_iter().map(|(r, _)| r).collect(),
        statistic: opts.statistic,
        trace: Vec::new(),
    }
}

/// Hold-one-out residuals under the model's current Ω and deviations.
///
/// Fails if some feature with known values cannot be predicted for any case.
pub fn holdout_residuals(model: &Model) -> Result<ResidualReport> {
    holdout_residuals_with(model, &ResidualOptions::default())
}

pub fn holdout_residuals_with(model: &Model, opts: &ResidualOptions) -> Result<ResidualReport> {
    if model.len() < 2 {
        return Err(Error::Infeasible("hold-one-out residuals need at least two cases".into()));
    }
    let report = report(model, opts);
    let ds = model.dataset();
    for f in report.unpredictable() {
        if ds.cases().iter().any(|c| c.values[f].is_some()) {
            return Err(Error::Unpredictable(ds.schema()[f].name.clone()));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub deviations: DeviationVector,
    /// Max relative change of rᵢ at each iteration, starting from the
    /// deviations the model held on entry.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Features that kept their previous deviation because nothing could
    /// predict them.
    pub unpredictable: Vec<usize>,
    pub report: Option<ResidualReport>,
}

/// Repeats hold-one-out residuals, feeding each result back into the
/// metric, until max |Δrᵢ|/rᵢ < `tol` or `max_iters` is reached.
pub fn iterate_residuals(model: &mut Model, max_iters: usize, tol: f64) -> Result<IterationOutcome> {
    iterate_residuals_with(model, max_iters, tol, &ResidualOptions::default())
}

pub fn iterate_residuals_with(
    model: &mut Model,
    max_iters: usize,
    tol: f64,
    opts: &ResidualOptions,
) -> Result<IterationOutcome> {
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if model.len() < 2 {
        return Ok(IterationOutcome {
            deviations: model.deviations().clone(),
            trace: vec![0.0],
            iterations: 0,
            converged: true,
            unpredictable: model.all_features(),
            report: None,
        });
    }
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last = None;
    for _ in 0..max_iters {
        let report = report(model, opts);
        let old = &model.deviations().values;
        let change = report
            .values
            .iter()
            .zip(old)
            .zip(&report.raw)
            .filter(|(_, raw)| raw.is_some())
            .map(|((new, old), _)| (new - old).abs() / old)
            .fold(0.0, f64::max);
        model.set_deviations(report.deviations())?;
        trace.push(change);
        last = Some(report);
        if change < tol {
            converged = true;
            break;
        }
    }
    let mut report = last.expect("at least one iteration");
    report.trace = trace.clone();
    Ok(IterationOutcome {
        deviations: model.deviations().clone(),
        iterations: trace.len(),
        trace,
        converged,
        unpredictable: report.unpredictable(),
        report: Some(report),
    })
}
