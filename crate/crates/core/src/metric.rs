//! Per-feature differences and their combination into Lebesgue-space
//! distances, including the p → 0 (weighted geometric mean) limit and the
//! Łukaszyk–Karmowski expected distance between two normal observations.

use std::f64::consts::PI;

use statrs::function::erf::{erf, erfc};

use crate::data::{CaseValue, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// Floor applied to per-feature differences on the logarithmic path so a
/// tiny nonzero difference cannot underflow the product to zero.
pub const DIFFERENCE_FLOOR: f64 = 1e-300;

/// Smallest mismatch probability assigned to equal nominal values.
pub const NOMINAL_EPSILON: f64 = 1e-6;

/// Below this |p| the power mean is evaluated through `expm1`/`ln_1p`,
/// which stays accurate as p approaches the geometric-mean limit.
const SMALL_P: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationMode {
    /// Plain absolute differences.
    None,
    /// Expected difference of two normal observations with the feature
    /// deviation as their scale.
    LkNormal,
}

impl DeviationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviationMode::None => "none",
            DeviationMode::LkNormal => "lk-normal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(DeviationMode::None),
            "lk-normal" | "lk" => Some(DeviationMode::LkNormal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub p: f64,
    pub mode: DeviationMode,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            p: 0.0,
            mode: DeviationMode::LkNormal,
        }
    }
}

/// How per-feature deviations were aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualStatistic {
    /// Minimum nonzero gap between observed values.
    Bootstrap,
    MeanAbsolute,
    StandardDeviation,
}

impl ResidualStatistic {
    pub fn as_str(self) -> &'static str {
        match self {
            ResidualStatistic::Bootstrap => "bootstrap",
            ResidualStatistic::MeanAbsolute => "mae",
            ResidualStatistic::StandardDeviation => "sd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bootstrap" => Some(ResidualStatistic::Bootstrap),
            "mae" => Some(ResidualStatistic::MeanAbsolute),
            "sd" => Some(ResidualStatistic::StandardDeviation),
            _ => None,
        }
    }
}

/// Row-stochastic matrix over nominal codes: row = actual, column = predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    size: usize,
    probs: Vec<f64>,
}

impl ConfusionMatrix {
    /// Identity with every cell smoothed by `epsilon` before normalization.
    pub fn identity(size: usize, epsilon: f64) -> Self {
        let mut counts = vec![0.0; size * size];
        for i in 0..size {
            counts[i * size + i] = 1.0;
        }
        Self::from_counts(size, &counts, epsilon)
    }

    /// Normalizes a row-major count matrix, adding `epsilon` to every cell.
    /// Rows without counts become the smoothed identity row.
    pub fn from_counts(size: usize, counts: &[f64], epsilon: f64) -> Self {
        assert_eq!(counts.len(), size * size);
        let mut probs = vec![0.0; size * size];
        for i in 0..size {
            let row = &counts[i * size..(i + 1) * size];
            let total: f64 = row.iter().sum();
            for j in 0..size {
                let c = if total > 0.0 {
                    row[j]
                } else if i == j {
                    1.0
                } else {
                    0.0
                };
                probs[i * size + j] = c + epsilon;
            }
            let z: f64 = probs[i * size..(i + 1) * size].iter().sum();
            for p in &mut probs[i * size..(i + 1) * size] {
                *p /= z;
            }
        }
        Self { size, probs }
    }

    pub(crate) fn from_probs(size: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), size * size);
        Self { size, probs }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Row for `code`; `None` when the code postdates the matrix.
    pub fn row(&self, code: usize) -> Option<&[f64]> {
        (code < self.size).then(|| &self.probs[code * self.size..(code + 1) * self.size])
    }

    /// Probability that an observation of `code` is reported as `code`.
    pub fn diagonal(&self, code: usize) -> f64 {
        self.row(code).map_or(1.0, |r| r[code])
    }

    /// Mean off-diagonal mass over rows, i.e. the misclassification rate of
    /// a uniform mix of actual symbols.
    pub fn mismatch_rate(&self) -> f64 {
        if self.size == 0 {
            return 0.0;
        }
        (0..self.size).map(|i| 1.0 - self.diagonal(i)).sum::<f64>() / self.size as f64
    }
}

/// Per-feature deviations (rᵢ) plus nominal confusion matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationVector {
    pub values: Vec<f64>,
    pub statistic: ResidualStatistic,
    pub confusion: Vec<Option<ConfusionMatrix>>,
}

impl DeviationVector {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.confusion.len() {
            return Err(Error::invalid("deviation and confusion lengths differ"));
        }
        if let Some(bad) = self.values.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::invalid(format!("deviation {bad} is not strictly positive")));
        }
        for m in self.confusion.iter().flatten() {
            for i in 0..m.size() {
                let s: f64 = m.row(i).unwrap().iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid("confusion row does not sum to one"));
                }
            }
        }
        Ok(())
    }

    pub fn remove_feature(&mut self, feature: usize) {
        self.values.remove(feature);
        self.confusion.remove(feature);
    }
}

/// Expected |X − Y| for X ~ N(a, σ²), Y ~ N(b, σ²) with μ = |a − b|:
/// μ + (2σ/√π)·exp(−μ²/4σ²) − μ·erfc(μ/2σ).
pub fn lk_expected_distance_normal(mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(mu >= 0.0) {
        return Err(Error::invalid(format!("mean difference must be non-negative, got {mu}")));
    }
    Ok(lk_normal(mu, sigma))
}

#[inline]
pub(crate) fn lk_normal(mu: f64, sigma: f64) -> f64 {
    let x = mu / (2.0 * sigma);
    if x < 1.0 {
        // μ − μ·erfc(x) is written as μ·erf(x) to avoid cancellation near μ = 0.
        mu * erf(x) + 2.0 * sigma / PI.sqrt() * (-x * x).exp()
    } else {
        // The excess over μ is non-negative; clamping absorbs rounding in the tail.
        let excess = (-x * x).exp() / PI.sqrt() - x * erfc(x);
        mu + 2.0 * sigma * excess.max(0.0)
    }
}

/// Streaming weighted power mean; weights are normalized by their sum.
#[derive(Debug, Clone, Copy)]
pub struct PowerMean {
    p: f64,
    weight_sum: f64,
    acc: f64,
    zero: bool,
    lo: f64,
    hi: f64,
}

impl PowerMean {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            weight_sum: 0.0,
            acc: 0.0,
            zero: false,
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64, w: f64) {
        self.weight_sum += w;
        if w > 0.0 {
            self.lo = self.lo.min(x);
            self.hi = self.hi.max(x);
        }
        if x == 0.0 {
            if self.p <= 0.0 {
                self.zero = true;
            } else if self.p.abs() < SMALL_P {
                self.acc -= w;
            }
            return;
        }
        if self.p == 0.0 {
            self.acc += w * x.max(DIFFERENCE_FLOOR).ln();
        } else if self.p.abs() < SMALL_P {
            self.acc += w * (self.p * x.max(DIFFERENCE_FLOOR).ln()).exp_m1();
        } else {
            self.acc += w * x.powf(self.p);
        }
    }

    pub fn finish(&self) -> f64 {
        if self.zero || self.weight_sum <= 0.0 {
            return 0.0;
        }
        if self.lo == self.hi {
            return self.lo;
        }
        let mean = self.acc / self.weight_sum;
        if self.p == 0.0 {
            mean.exp()
        } else if self.p.abs() < SMALL_P {
            (mean.ln_1p() / self.p).exp()
        } else {
            mean.powf(1.0 / self.p)
        }
    }
}

/// (Σ wᵢ xᵢᵖ)^{1/p}, or Π xᵢ^{wᵢ} at p = 0. Weights are normalized.
pub fn generalized_mean(values: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::invalid("values and weights differ in length"));
    }
    if values.is_empty() {
        return Err(Error::invalid("generalized mean of no values"));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::invalid(format!("generalized mean needs non-negative values, got {v}")));
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::invalid("weights must be positive"));
    }
    let mut pm = PowerMean::new(p);
    for (x, w) in values.iter().zip(weights) {
        pm.push(*x, *w);
    }
    Ok(pm.finish())
}

/// Difference between two known values of one feature.
pub fn feature_difference(
    feature: &FeatureSchema,
    a: f64,
    b: f64,
    deviation: f64,
    confusion: Option<&ConfusionMatrix>,
    mode: DeviationMode,
) -> f64 {
    let raw = match &feature.kind {
        FeatureKind::Nominal => {
            return if a != b {
                1.0
            } else {
                match mode {
                    DeviationMode::None => 0.0,
                    DeviationMode::LkNormal => {
                        let diag = confusion.map_or(1.0, |m| m.diagonal(a as usize));
                        (1.0 - diag).max(NOMINAL_EPSILON)
                    }
                }
            };
        }
        FeatureKind::Continuous | FeatureKind::Ordinal { .. } => (a - b).abs(),
        FeatureKind::Cyclic { period } => {
            let d = (a - b).abs() % period;
            d.min(period - d)
        }
    };
    match mode {
        DeviationMode::None => raw,
        DeviationMode::LkNormal => lk_normal(raw, deviation),
    }
}

/// Borrowed view bundling everything needed to compare two cases.
#[derive(Debug, Clone, Copy)]
pub struct Metric<'a> {
    pub schema: &'a [FeatureSchema],
    pub config: MetricConfig,
    pub deviations: &'a DeviationVector,
}

impl<'a> Metric<'a> {
    #[inline]
    pub fn feature_difference(&self, feature: usize, a: f64, b: f64) -> f64 {
        feature_difference(
            &self.schema[feature],
            a,
            b,
            self.deviations.values[feature],
            self.deviations.confusion[feature].as_ref(),
            self.config.mode,
        )
    }

    /// Distance over the features in `features` known in both cases, with
    /// weights renormalized over that intersection. `None` when empty.
    #[inline]
    pub fn distance(&self, x: &[CaseValue], y: &[CaseValue], features: &[usize]) -> Option<f64> {
        let mut pm = PowerMean::new(self.config.p);
        let mut any = false;
        for &f in features {
            if let (Some(a), Some(b)) = (x[f], y[f]) {
                pm.push(self.feature_difference(f, a, b), self.schema[f].weight);
                any = true;
            }
        }
        any.then(|| pm.finish())
    }

    /// ‖r‖ at the configured p over `features`.
    pub fn residual_norm(&self, features: &[usize]) -> f64 {
        let mut pm = PowerMean::new(self.config.p);
        for &f in features {
            pm.push(self.deviations.values[f], self.schema[f].weight);
        }
        pm.finish()
    }
}

/// Distance between two cases over a feature subset.
pub fn case_distance(
    x: &[CaseValue],
    y: &[CaseValue],
    schema: &[FeatureSchema],
    config: MetricConfig,
    deviations: &DeviationVector,
    features: &[usize],
) -> Result<f64> {
    Metric {
        schema,
        config,
        deviations,
    }
    .distance(x, y, features)
    .ok_or(Error::NoComparableCases)
}
