//! Surprisal and conviction measures.
//!
//! The distance contribution φ(x) is the harmonic mean of d^α over the k
//! nearest neighbors. Self-information is I(x) = φ(x)/‖r(x)‖_p in nats,
//! and prediction conviction is 𝔼I/I(x). Familiarity conviction compares
//! the KL divergence caused by flattening one point probability to the
//! mean such divergence.

use rayon::prelude::*;

use crate::data::{CaseValue, Dataset, FeatureKind};
use crate::engine::{Model, Query, SurprisalCache};
use crate::error::{Error, Result};
use crate::metric::PowerMean;

/// How exact zero distances are treated when computing φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Duplicates {
    /// Identical points share one contribution, measured against the
    /// nearest distinct neighbors and divided equally among them.
    #[default]
    Split,
    /// Zero distances enter the harmonic mean, giving φ = 0.
    Keep,
}

/// Harmonic mean of `d^α`; zero if any distance is zero.
pub fn harmonic_contribution(distances: &[f64], alpha: f64) -> f64 {
    let mut pm = PowerMean::new(-1.0);
    for d in distances {
        pm.push(d.powf(alpha), 1.0);
    }
    pm.finish()
}

/// Resolves a query into its values and the case id to hold out.
fn resolve<'a>(model: &'a Model, query: Query<'a>) -> Result<(&'a [CaseValue], Option<u64>)> {
    match query {
        Query::Case(id) => model
            .dataset()
            .case(id)
            .map(|c| (c.values.as_slice(), Some(id)))
            .ok_or_else(|| Error::invalid(format!("no case with id {id}"))),
        Query::Values(values) => {
            if values.len() != model.feature_count() {
                return Err(Error::invalid(format!(
                    "query has {} values, schema has {} features",
                    values.len(),
                    model.feature_count()
                )));
            }
            Ok((values, None))
        }
    }
}

fn phi_at(
    model: &Model,
    values: &[CaseValue],
    features: &[usize],
    exclude: Option<u64>,
    k: usize,
    alpha: f64,
    duplicates: Duplicates,
) -> Result<f64> {
    let known: Vec<usize> = features.iter().copied().filter(|&f| values[f].is_some()).collect();
    let exclude: Vec<u64> = exclude.into_iter().collect();
    let candidates = model.scan(values, &known, &exclude, &[]);
    if candidates.is_empty() {
        return Err(Error::NoComparableCases);
    }
    let zeros = candidates.iter().filter(|(d, _)| *d == 0.0).count();
    if duplicates == Duplicates::Split && zeros > 0 {
        let distinct: Vec<_> = candidates.into_iter().filter(|(d, _)| *d > 0.0).collect();
        if distinct.is_empty() {
            return Ok(0.0);
        }
        let nearest = model.take_nearest(distinct, k);
        let d: Vec<f64> = nearest.iter().map(|(d, _)| *d).collect();
        return Ok(harmonic_contribution(&d, alpha) / (zeros + 1) as f64);
    }
    let nearest = model.take_nearest(candidates, k);
    let d: Vec<f64> = nearest.iter().map(|(d, _)| *d).collect();
    Ok(harmonic_contribution(&d, alpha))
}

/// φ(x) over all features. In-model cases are held out of their own
/// neighborhood.
pub fn distance_contribution(model: &Model, query: Query<'_>, k: usize, alpha: f64) -> Result<f64> {
    distance_contribution_over(model, query, &model.all_features(), k, alpha, Duplicates::Split)
}

pub fn distance_contribution_over(
    model: &Model,
    query: Query<'_>,
    features: &[usize],
    k: usize,
    alpha: f64,
    duplicates: Duplicates,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    check_features(model, features)?;
    let (values, exclude) = resolve(model, query)?;
    phi_at(model, values, features, exclude, k, alpha, duplicates)
}

fn check_features(model: &Model, features: &[usize]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::invalid("feature subset is empty"));
    }
    if let Some(f) = features.iter().find(|&&f| f >= model.feature_count()) {
        return Err(Error::invalid(format!("feature index {f} out of range")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfInformation {
    pub phi: f64,
    /// ‖r(x)‖_p over the query's known features in the subset.
    pub residual_norm: f64,
    /// I(x) in nats.
    pub information: f64,
}

impl SelfInformation {
    /// P(φ ≥ ‖r‖) = e^{−I}.
    pub fn probability(&self) -> f64 {
        (-self.information).exp()
    }
}

fn information_at(
    model: &Model,
    values: &[CaseValue],
    features: &[usize],
    exclude: Option<u64>,
    duplicates: Duplicates,
) -> Result<SelfInformation> {
    let params = model.params();
    let phi = phi_at(model, values, features, exclude, model.effective_k(), params.alpha, duplicates)?;
    let known: Vec<usize> = features.iter().copied().filter(|&f| values[f].is_some()).collect();
    let residual_norm = model.metric().residual_norm(&known);
    if !(residual_norm > 0.0) {
        return Err(Error::Infeasible("residual norm is zero".into()));
    }
    Ok(SelfInformation {
        phi,
        residual_norm,
        information: phi / residual_norm,
    })
}

/// I(x) = φ(x)/‖r(x)‖_p over a feature subset, with the model's k and α.
pub fn self_information(model: &Model, query: Query<'_>, features: &[usize]) -> Result<SelfInformation> {
    self_information_with(model, query, features, Duplicates::Split)
}

pub fn self_information_with(
    model: &Model,
    query: Query<'_>,
    features: &[usize],
    duplicates: Duplicates,
) -> Result<SelfInformation> {
    check_features(model, features)?;
    let (values, exclude) = resolve(model, query)?;
    information_at(model, values, features, exclude, duplicates)
}

/// Hold-one-out self-information of every case over `features`, in case
/// order. Cases with nothing comparable in the subset yield `None`.
pub fn case_information(model: &Model, features: &[usize]) -> Result<Vec<Option<SelfInformation>>> {
    check_features(model, features)?;
    if model.len() < 2 {
        return Err(Error::Infeasible("self-information needs at least two cases".into()));
    }
    model
        .dataset()
        .cases()
        .par_iter()
        .map(|c| match information_at(model, &c.values, features, Some(c.id), Duplicates::Split) {
            Ok(info) => Ok(Some(info)),
            Err(Error::NoComparableCases) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

fn mean_information(per_case: &[Option<SelfInformation>]) -> Result<f64> {
    let known: Vec<f64> = per_case.iter().flatten().map(|s| s.information).collect();
    if known.is_empty() {
        return Err(Error::NoComparableCases);
    }
    Ok(known.iter().sum::<f64>() / known.len() as f64)
}

fn compute_cache(model: &Model) -> Result<SurprisalCache> {
    let per_case = case_information(model, &model.all_features())?;
    let mean = mean_information(&per_case)?;
    Ok(SurprisalCache {
        per_case: per_case.iter().map(|s| s.map_or(f64::NAN, |s| s.information)).collect(),
        mean,
    })
}

/// Computes and stores the per-case self-information cache if stale.
pub fn refresh_cache(model: &mut Model) -> Result<&SurprisalCache> {
    if model.surprisal_cache().is_none() {
        let cache = compute_cache(model)?;
        model.set_cache(Some(cache));
    }
    Ok(model.surprisal_cache().expect("cache just set"))
}

/// 𝔼I: mean hold-one-out self-information over all cases.
pub fn expected_self_information(model: &Model) -> Result<f64> {
    match model.surprisal_cache() {
        Some(c) => Ok(c.mean),
        None => Ok(compute_cache(model)?.mean),
    }
}

/// 𝔼I/I, with the +∞ sentinel when I = 0.
pub fn conviction_ratio(expected: f64, information: f64) -> f64 {
    if information == 0.0 {
        f64::INFINITY
    } else {
        expected / information
    }
}

/// π_p(x) = 𝔼I/I(x). Uses the cached 𝔼I when present.
pub fn prediction_conviction(model: &Model, query: Query<'_>) -> Result<f64> {
    let expected = expected_self_information(model)?;
    let info = self_information(model, query, &model.all_features())?;
    Ok(conviction_ratio(expected, info.information))
}

/// Point probabilities l(i) = φᵢ/Σφ over all cases, in case order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointProbabilities {
    pub ids: Vec<u64>,
    pub probs: Vec<f64>,
}

impl PointProbabilities {
    pub fn get(&self, id: u64) -> Option<f64> {
        self.ids.iter().position(|&i| i == id).map(|i| self.probs[i])
    }
}

fn case_phis(model: &Model) -> Result<Vec<f64>> {
    let features = model.all_features();
    let k = model.effective_k();
    let alpha = model.params().alpha;
    model
        .dataset()
        .cases()
        .par_iter()
        .map(|c| phi_at(model, &c.values, &features, Some(c.id), k, alpha, Duplicates::Split))
        .collect()
}

pub fn point_probabilities(model: &Model) -> Result<PointProbabilities> {
    if model.len() < 2 {
        return Err(Error::Infeasible("point probabilities need at least two cases".into()));
    }
    let phis = case_phis(model)?;
    let total: f64 = phis.iter().sum();
    let n = phis.len() as f64;
    let probs = if total > 0.0 && total.is_finite() {
        phis.iter().map(|p| p / total).collect()
    } else {
        vec![1.0 / n; phis.len()]
    };
    Ok(PointProbabilities {
        ids: model.dataset().cases().iter().map(|c| c.id).collect(),
        probs,
    })
}

/// KL(p ‖ q) in nats; terms with pᵢ = 0 contribute nothing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

/// KL(L ‖ L′) where L′ replaces lᵢ by 1/n and renormalizes.
///
/// With S = 1 − lᵢ + 1/n the sum collapses to ln S + lᵢ ln(n lᵢ).
pub fn replacement_divergence(probs: &[f64], i: usize) -> f64 {
    let n = probs.len() as f64;
    let li = probs[i];
    let s = 1.0 - li + 1.0 / n;
    let tail = if li > 0.0 { li * (n * li).ln() } else { 0.0 };
    (s.ln() + tail).max(0.0)
}

/// π_f for every case, in case order.
pub fn familiarity_convictions(model: &Model) -> Result<Vec<f64>> {
    let l = point_probabilities(model)?;
    Ok(familiarity_from_probabilities(&l.probs))
}

pub fn familiarity_from_probabilities(probs: &[f64]) -> Vec<f64> {
    let kl: Vec<f64> = (0..probs.len()).map(|i| replacement_divergence(probs, i)).collect();
    let mean = kl.iter().sum::<f64>() / kl.len() as f64;
    kl.iter()
        .map(|&d| match (mean == 0.0, d == 0.0) {
            (true, _) => 1.0,
            (false, true) => f64::INFINITY,
            (false, false) => mean / d,
        })
        .collect()
}

pub fn familiarity_conviction(model: &Model, id: u64) -> Result<f64> {
    let i = model
        .dataset()
        .case_index(id)
        .ok_or_else(|| Error::invalid(format!("no case with id {id}")))?;
    Ok(familiarity_convictions(model)?[i])
}

/// 𝔼I(M₋ᵢ) for each feature i, holding the other features' residuals fixed.
pub fn expected_information_without(model: &Model) -> Result<Vec<f64>> {
    let xi = model.feature_count();
    if xi < 2 {
        return Err(Error::invalid("feature measures need at least two features"));
    }
    (0..xi)
        .map(|i| {
            let rest: Vec<usize> = (0..xi).filter(|&f| f != i).collect();
            mean_information(&case_information(model, &rest)?)
        })
        .collect()
}

/// π_c(i) = (𝔼I(M) − 𝔼I(M₋ᵢ))/𝔼I(M) for every feature.
pub fn feature_prediction_contributions(model: &Model) -> Result<Vec<f64>> {
    let full = expected_self_information(model)?;
    Ok(expected_information_without(model)?.iter().map(|e| (full - e) / full).collect())
}

/// π_p(i) = mean_j 𝔼I(M₋ⱼ) / 𝔼I(M₋ᵢ) for every feature.
pub fn feature_prediction_convictions(model: &Model) -> Result<Vec<f64>> {
    Ok(convictions_from_expectations(&expected_information_without(model)?))
}

fn convictions_from_expectations(without: &[f64]) -> Vec<f64> {
    let mean = without.iter().sum::<f64>() / without.len() as f64;
    without.iter().map(|&e| conviction_ratio(mean, e)).collect()
}

pub fn feature_prediction_contribution(model: &Model, feature: usize) -> Result<f64> {
    check_features(model, &[feature])?;
    Ok(feature_prediction_contributions(model)?[feature])
}

pub fn feature_prediction_conviction(model: &Model, feature: usize) -> Result<f64> {
    check_features(model, &[feature])?;
    Ok(feature_prediction_convictions(model)?[feature])
}

/// Re-expresses a case of `from` in the nominal codes of `to`. Symbols
/// unknown to `to` map to a fresh code that matches nothing.
pub(crate) fn translate_values(from: &Dataset, to: &Dataset, values: &[CaseValue]) -> Vec<CaseValue> {
    values
        .iter()
        .enumerate()
        .map(|(f, v)| match (v, &to.schema()[f].kind) {
            (Some(code), FeatureKind::Nominal) => {
                let symbol = from.symbols(f).get(*code as usize);
                Some(match symbol.and_then(|s| to.lookup_symbol(f, s)) {
                    Some(c) => f64::from(c),
                    None => to.symbols(f).len() as f64,
                })
            }
            _ => *v,
        })
        .collect()
}

/// Mean self-information of `other`'s cases against `reference`, without
/// inserting them. A case that is already in the reference (same id and
/// identical values) is held out of its own neighborhood.
pub fn model_surprisal(reference: &Model, other: &Dataset) -> Result<f64> {
    if !reference.dataset().is_compatible(other) {
        return Err(Error::Schema("datasets have incompatible schemas".into()));
    }
    if other.is_empty() {
        return Err(Error::invalid("no cases to evaluate"));
    }
    let features = reference.all_features();
    let per_case: Vec<Option<f64>> = other
        .cases()
        .par_iter()
        .map(|c| {
            let values = translate_values(other, reference.dataset(), &c.values);
            let exclude = reference
                .dataset()
                .case(c.id)
                .filter(|r| r.values == values)
                .map(|r| r.id);
            match information_at(reference, &values, &features, exclude, Duplicates::Split) {
                Ok(s) => Ok(Some(s.information)),
                Err(Error::NoComparableCases) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let known: Vec<f64> = per_case.into_iter().flatten().collect();
    if known.is_empty() {
        return Err(Error::NoComparableCases);
    }
    Ok(known.iter().sum::<f64>() / known.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseConviction {
    pub id: u64,
    pub phi: f64,
    pub information: f64,
    pub prediction: f64,
    pub familiarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConviction {
    pub name: String,
    pub expected_without: f64,
    pub contribution: f64,
    pub conviction: f64,
}

/// Model-level, per-case and (optionally) per-feature measures.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvictionReport {
    pub expected_information: f64,
    pub cases: Vec<CaseConviction>,
    pub features: Vec<FeatureConviction>,
}

pub fn analyze(model: &Model, with_features: bool) -> Result<ConvictionReport> {
    let per_case = case_information(model, &model.all_features())?;
    let expected = mean_information(&per_case)?;
    let familiarity = familiarity_convictions(model)?;
    let cases = model
        .dataset()
        .cases()
        .iter()
        .zip(&per_case)
        .zip(familiarity)
        .map(|((c, info), familiarity)| {
            let (phi, information) = info.map_or((f64::NAN, f64::NAN), |s| (s.phi, s.information));
            CaseConviction {
                id: c.id,
                phi,
                information,
                prediction: conviction_ratio(expected, information),
                familiarity,
            }
        })
        .collect();
    let features = if with_features && model.feature_count() >= 2 {
        let without = expected_information_without(model)?;
        let convictions = convictions_from_expectations(&without);
        model
            .dataset()
            .schema()
            .iter()
            .zip(without.iter().zip(convictions))
            .map(|(s, (&e, conviction))| FeatureConviction {
                name: s.name.clone(),
                expected_without: e,
                contribution: (expected - e) / expected,
                conviction,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ConvictionReport {
        expected_information: expected,
        cases,
        features,
    })
}

impl ConvictionReport {
    /// Columns: id, phi, surprisal, probability, prediction_conviction,
    /// familiarity_conviction.
    pub fn cases_table(&self, delimiter: char) -> String {
        let d = delimiter;
        let mut out =
            format!("id{d}phi{d}surprisal{d}probability{d}prediction_conviction{d}familiarity_conviction\n");
        for c in &self.cases {
            out.push_str(&format!(
                "{}{d}{}{d}{}{d}{}{d}{}{d}{}\n",
                c.id,
                c.phi,
                c.information,
                (-c.information).exp(),
                c.prediction,
                c.familiarity
            ));
        }
        out
    }

    /// Columns: feature, expected_surprisal_without, contribution, conviction.
    pub fn features_table(&self, delimiter: char) -> String {
        let d = delimiter;
        let mut out = format!("feature{d}expected_surprisal_without{d}contribution{d}conviction\n");
        for f in &self.features {
            out.push_str(&format!(
                "{}{d}{}{d}{}{d}{}\n",
                f.name, f.expected_without, f.contribution, f.conviction
            ));
        }
        out
    }
}
