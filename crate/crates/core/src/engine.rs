//! Exhaustive kNN queries, inverse-distance-weighted prediction, and local
//! models over a [`Model`].
//!
//! Every query is a linear scan. Low and zero p break the triangle
//! inequality that tree indexes rely on, so there is no index.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use crate::data::{Case, CaseValue, Dataset, FeatureKind, Origin};
use crate::error::{Error, Result};
use crate::metric::{DeviationVector, Metric, MetricConfig};
use crate::residuals::{self, IterationOutcome};

pub const DEFAULT_K: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub k: usize,
    pub metric: MetricConfig,
    /// Distance exponent used by weighting and distance contribution.
    pub alpha: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            metric: MetricConfig::default(),
            alpha: 1.0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.metric.p >= 0.0 && self.metric.p.is_finite()) {
            return Err(Error::invalid(format!("p must be non-negative, got {}", self.metric.p)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Cached hold-one-out self-information of every case, in case order.
#[derive(Debug, Clone, PartialEq)]
pub struct SurprisalCache {
    pub per_case: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    dataset: Dataset,
    params: Hyperparameters,
    deviations: DeviationVector,
    floors: Vec<f64>,
    cache: Option<SurprisalCache>,
}

/// Options for [`Model::fit`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub residuals: residuals::ResidualOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 8,
            tol: 0.05,
            residuals: residuals::ResidualOptions::default(),
        }
    }
}

impl Model {
    /// Wraps a dataset with bootstrapped deviations.
    pub fn new(dataset: Dataset, params: Hyperparameters) -> Result<Self> {
        params.validate()?;
        let boot = residuals::bootstrap_deviations(&dataset);
        let floors = boot.deviations.values.clone();
        Ok(Self {
            dataset,
            params,
            deviations: boot.deviations,
            floors,
            cache: None,
        })
    }

    /// Bootstraps deviations, then iterates hold-one-out residuals.
    pub fn fit(dataset: Dataset, params: Hyperparameters, opts: FitOptions) -> Result<(Self, IterationOutcome)> {
        let mut model = Self::new(dataset, params)?;
        let outcome = residuals::iterate_residuals_with(&mut model, opts.max_iters, opts.tol, &opts.residuals)?;
        Ok((model, outcome))
    }

    pub(crate) fn from_parts(
        dataset: Dataset,
        params: Hyperparameters,
        deviations: DeviationVector,
        floors: Vec<f64>,
        cache: Option<SurprisalCache>,
    ) -> Result<Self> {
        params.validate()?;
        deviations.validate()?;
        if deviations.values.len() != dataset.feature_count() || floors.len() != dataset.feature_count() {
            return Err(Error::invalid("deviation vector does not match schema"));
        }
        Ok(Self {
            dataset,
            params,
            deviations,
            floors,
            cache,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn params(&self) -> &Hyperparameters {
        &self.params
    }

    pub fn set_params(&mut self, params: Hyperparameters) -> Result<()> {
        params.validate()?;
        self.params = params;
        self.cache = None;
        Ok(())
    }

    pub fn deviations(&self) -> &DeviationVector {
        &self.deviations
    }

    pub fn set_deviations(&mut self, deviations: DeviationVector) -> Result<()> {
        deviations.validate()?;
        if deviations.values.len() != self.dataset.feature_count() {
            return Err(Error::invalid("deviation vector does not match schema"));
        }
        self.deviations = deviations;
        self.cache = None;
        Ok(())
    }

    /// Bootstrap lower bounds for each feature's residual.
    pub fn floors(&self) -> &[f64] {
        &self.floors
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.dataset.feature_count()
    }

    pub fn all_features(&self) -> Vec<usize> {
        (0..self.feature_count()).collect()
    }

    /// k clamped so that 1 ≤ k < n.
    pub fn effective_k(&self) -> usize {
        self.params.k.min(self.len().saturating_sub(1)).max(1)
    }

    pub fn metric(&self) -> Metric<'_> {
        Metric {
            schema: self.dataset.schema(),
            config: self.params.metric,
            deviations: &self.deviations,
        }
    }

    pub fn surprisal_cache(&self) -> Option<&SurprisalCache> {
        self.cache.as_ref()
    }

    pub(crate) fn set_cache(&mut self, cache: Option<SurprisalCache>) {
        self.cache = cache;
    }

    pub fn invalidate_cache(&mut self) {
        self.cache = None;
    }

    pub fn add_case(&mut self, case: Case) -> Result<()> {
        self.dataset.push(case)?;
        self.cache = None;
        Ok(())
    }

    pub fn remove_case(&mut self, id: u64) -> Option<Case> {
        let removed = self.dataset.remove(id);
        if removed.is_some() {
            self.cache = None;
        }
        removed
    }

    pub fn set_value(&mut self, id: u64, feature: usize, value: CaseValue) -> Result<()> {
        let idx = self
            .dataset
            .case_index(id)
            .ok_or_else(|| Error::invalid(format!("no case with id {id}")))?;
        let mut case = self.dataset.cases()[idx].clone();
        case.values[feature] = value;
        self.dataset.check_case(&case)?;
        self.dataset.cases_mut()[idx] = case;
        self.cache = None;
        Ok(())
    }

    pub fn set_origin(&mut self, id: u64, origin: Origin) -> Result<()> {
        let idx = self
            .dataset
            .case_index(id)
            .ok_or_else(|| Error::invalid(format!("no case with id {id}")))?;
        self.dataset.cases_mut()[idx].origin = origin;
        Ok(())
    }

    /// Drops a feature from data, deviations, and floors.
    pub fn drop_feature(&mut self, feature: usize) -> Result<()> {
        self.dataset.drop_feature(feature)?;
        self.deviations.remove_feature(feature);
        self.floors.remove(feature);
        self.cache = None;
        Ok(())
    }

    /// Model over a subset of cases sharing this model's Ω and deviations.
    pub fn submodel(&self, ids: &[u64]) -> Model {
        Model {
            dataset: self.dataset.subset(ids),
            params: self.params,
            deviations: self.deviations.clone(),
            floors: self.floors.clone(),
            cache: None,
        }
    }

    /// All comparable candidates as (distance, case index), unsorted.
    pub(crate) fn scan(
        &self,
        query: &[CaseValue],
        features: &[usize],
        exclude: &[u64],
        require: &[usize],
    ) -> Vec<(f64, usize)> {
        let metric = self.metric();
        self.dataset
            .cases()
            .iter()
            .enumerate()
            .filter(|(_, c)| !exclude.contains(&c.id) && require.iter().all(|&f| c.values[f].is_some()))
            .filter_map(|(i, c)| metric.distance(query, &c.values, features).map(|d| (d, i)))
            .collect()
    }

    /// Orders candidates by (distance, id) and keeps the first `k`.
    pub(crate) fn take_nearest(&self, mut candidates: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
        let cases = self.dataset.cases();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.total_cmp(&b.0).then_with(|| cases[a.1].id.cmp(&cases[b.1].id))
        };
        if k < candidates.len() {
            candidates.select_nth_unstable_by(k, cmp);
            candidates.truncate(k);
        }
        candidates.sort_unstable_by(cmp);
        candidates
    }

    pub(crate) fn neighbors_from(&self, nearest: &[(f64, usize)]) -> Vec<Neighbor> {
        let distances: Vec<f64> = nearest.iter().map(|(d, _)| *d).collect();
        let weights = inverse_distance_weights(&distances, self.params.alpha);
        nearest
            .iter()
            .zip(weights)
            .map(|(&(distance, idx), weight)| Neighbor {
                id: self.dataset.cases()[idx].id,
                distance,
                weight,
            })
            .collect()
    }

    /// Predicts `action` for a query from the `k` nearest cases that know it.
    pub(crate) fn predict(
        &self,
        query: &[CaseValue],
        context: &[usize],
        action: usize,
        k: usize,
        exclude: &[u64],
    ) -> Result<(f64, Vec<Neighbor>)> {
        let candidates = self.scan(query, context, exclude, &[action]);
        if candidates.is_empty() {
            return Err(Error::ActionUnavailable(self.dataset.schema()[action].name.clone()));
        }
        let nearest = self.take_nearest(candidates, k);
        let neighbors = self.neighbors_from(&nearest);
        let indexed: Vec<(usize, f64)> = nearest.iter().zip(&neighbors).map(|((_, i), n)| (*i, n.weight)).collect();
        let value = self.aggregate_at(action, &indexed);
        Ok((value, neighbors))
    }

    /// Weighted aggregate of one feature over (case index, weight) pairs.
    pub(crate) fn aggregate_at(&self, feature: usize, weighted: &[(usize, f64)]) -> f64 {
        let schema = &self.dataset.schema()[feature];
        let cases = self.dataset.cases();
        let values: Vec<(f64, f64)> = weighted
            .iter()
            .filter_map(|&(i, w)| cases[i].values[feature].map(|v| (v, w)))
            .collect();
        let total: f64 = values.iter().map(|(_, w)| w).sum();
        if let Some(&(first, _)) = values.first() {
            if values.iter().all(|(v, _)| *v == first) {
                return first;
            }
        }
        let offset = values[0].0;
        let mean = || offset + values.iter().map(|(v, w)| (v - offset) * w).sum::<f64>() / total;
        match &schema.kind {
            FeatureKind::Continuous => mean(),
            FeatureKind::Ordinal { levels } => {
                let mean = mean();
                mean.round().clamp(0.0, (levels.len() - 1) as f64)
            }
            FeatureKind::Cyclic { period } => {
                let (s, c) = values.iter().fold((0.0, 0.0), |(s, c), (v, w)| {
                    let a = v / period * TAU;
                    (s + w * a.sin(), c + w * a.cos())
                });
                let mean = s.atan2(c).rem_euclid(TAU) / TAU * period;
                if mean >= *period {
                    0.0
                } else {
                    mean
                }
            }
            FeatureKind::Nominal => {
                let mut tally: Vec<(f64, f64)> = Vec::new();
                for (v, w) in &values {
                    match tally.iter_mut().find(|(code, _)| code == v) {
                        Some(entry) => entry.1 += w,
                        None => tally.push((*v, *w)),
                    }
                }
                let symbols = self.dataset.symbols(feature);
                let label = |code: f64| symbols.get(code as usize).map(String::as_str).unwrap_or("");
                tally
                    .into_iter()
                    .max_by(|a, b| {
                        a.1.partial_cmp(&b.1)
                            .unwrap_or(Ordering::Equal)
                            .then_with(|| label(b.0).cmp(label(a.0)))
                    })
                    .map(|(code, _)| code)
                    .expect("at least one vote")
            }
        }
    }
}

/// How a query reaches the model.
#[derive(Debug, Clone, Copy)]
pub enum Query<'a> {
    /// A stored case, evaluated with itself held out.
    Case(u64),
    /// External values; every stored case is a candidate.
    Values(&'a [CaseValue]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    pub distance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub query: Vec<CaseValue>,
    pub neighbors: Vec<Neighbor>,
}

impl Neighborhood {
    pub fn ids(&self) -> Vec<u64> {
        self.neighbors.iter().map(|n| n.id).collect()
    }
}

/// Inverse-distance weights 1/d^α normalized to sum to one. Zero-distance
/// neighbors, if any, split the full weight equally.
pub fn inverse_distance_weights(distances: &[f64], alpha: f64) -> Vec<f64> {
    if distances.is_empty() {
        return Vec::new();
    }
    let zeros = distances.iter().filter(|d| **d == 0.0).count();
    if zeros > 0 {
        let w = 1.0 / zeros as f64;
        return distances.iter().map(|d| if *d == 0.0 { w } else { 0.0 }).collect();
    }
    let raw: Vec<f64> = distances.iter().map(|d| d.powf(-alpha)).collect();
    let total: f64 = raw.iter().sum();
    if !total.is_finite() {
        // Subnormal distances overflow 1/d^α; fall back to the smallest ones.
        let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
        let ties = distances.iter().filter(|d| **d == min).count() as f64;
        return distances.iter().map(|d| if *d == min { 1.0 / ties } else { 0.0 }).collect();
    }
    raw.into_iter().map(|w| w / total).collect()
}

fn context_query(model: &Model, context: &[(usize, f64)]) -> Result<(Vec<CaseValue>, Vec<usize>)> {
    if context.is_empty() {
        return Err(Error::invalid("query context is empty"));
    }
    let mut query = vec![None; model.feature_count()];
    let mut features = Vec::with_capacity(context.len());
    for &(f, v) in context {
        if f >= model.feature_count() {
            return Err(Error::invalid(format!("feature index {f} out of range")));
        }
        if query[f].is_some() {
            return Err(Error::invalid(format!(
                "feature `{}` appears twice in the context",
                model.dataset.schema()[f].name
            )));
        }
        query[f] = Some(v);
        features.push(f);
    }
    Ok((query, features))
}

/// The `k` nearest non-excluded cases to `context`, compared over the
/// context features each candidate knows. Ties go to the lower id.
pub fn knn_query(model: &Model, context: &[(usize, f64)], k: usize, exclude: &[u64]) -> Result<Neighborhood> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let (query, features) = context_query(model, context)?;
    let candidates = model.scan(&query, &features, exclude, &[]);
    if candidates.is_empty() {
        return Err(Error::NoComparableCases);
    }
    let nearest = model.take_nearest(candidates, k);
    Ok(Neighborhood {
        neighbors: model.neighbors_from(&nearest),
        query,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    /// (action feature, predicted value) in request order.
    pub predictions: Vec<(usize, f64)>,
    pub neighborhood: Neighborhood,
}

/// Predicts every action feature from the `k` nearest cases that know all
/// of them. Nominal actions use a weighted plurality vote.
pub fn react(model: &Model, context: &[(usize, f64)], actions: &[usize], k: usize) -> Result<Reaction> {
    react_excluding(model, context, actions, k, &[])
}

pub fn react_excluding(
    model: &Model,
    context: &[(usize, f64)],
    actions: &[usize],
    k: usize,
    exclude: &[u64],
) -> Result<Reaction> {
    if actions.is_empty() {
        return Err(Error::invalid("no action features requested"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let (query, features) = context_query(model, context)?;
    for &a in actions {
        if a >= model.feature_count() {
            return Err(Error::invalid(format!("feature index {a} out of range")));
        }
        if features.contains(&a) {
            return Err(Error::invalid(format!(
                "feature `{}` is both context and action",
                model.dataset.schema()[a].name
            )));
        }
    }
    let candidates = model.scan(&query, &features, exclude, actions);
    if candidates.is_empty() {
        let missing = &model.dataset.schema()[actions[0]].name;
        return Err(if model.scan(&query, &features, exclude, &[]).is_empty() {
            Error::NoComparableCases
        } else {
            Error::ActionUnavailable(missing.clone())
        });
    }
    let nearest = model.take_nearest(candidates, k);
    let neighbors = model.neighbors_from(&nearest);
    let indexed: Vec<(usize, f64)> = nearest.iter().zip(&neighbors).map(|((_, i), n)| (*i, n.weight)).collect();
    let predictions = actions.iter().map(|&a| (a, model.aggregate_at(a, &indexed))).collect();
    Ok(Reaction {
        predictions,
        neighborhood: Neighborhood { query, neighbors },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalSize {
    Count(usize),
    Radius(f64),
}

/// Cases nearest to `query` under the model metric, nearest first.
pub fn local_model(model: &Model, query: &[CaseValue], size: LocalSize, exclude: &[u64]) -> Result<Vec<Neighbor>> {
    if model.is_empty() {
        return Err(Error::invalid("local model of an empty model"));
    }
    let features: Vec<usize> = (0..model.feature_count()).filter(|&f| query[f].is_some()).collect();
    let candidates = model.scan(query, &features, exclude, &[]);
    let nearest = match size {
        LocalSize::Count(0) => return Err(Error::invalid("local model size must be positive")),
        LocalSize::Count(n) => model.take_nearest(candidates, n),
        LocalSize::Radius(r) if !(r > 0.0) => return Err(Error::invalid("local model radius must be positive")),
        LocalSize::Radius(r) => {
            let inside: Vec<_> = candidates.into_iter().filter(|(d, _)| *d <= r).collect();
            let n = inside.len();
            model.take_nearest(inside, n)
        }
    };
    Ok(model.neighbors_from(&nearest))
}
