//! Audit artifacts for a single react decision.
//!
//! Every artifact is recomputable from the model, the query and Ω, and
//! every case it names is a case of the model.

use std::fmt::Write as _;

use crate::conviction::{self, conviction_ratio};
use crate::data::{CaseValue, FeatureKind};
use crate::engine::{inverse_distance_weights, local_model, react, LocalSize, Model, Neighbor};
use crate::error::{Error, Result};
use crate::residuals::{self, ResidualOptions, ResidualReport};

/// Action-feature difference: 0/1 for nominal, |Δ|/r otherwise.
fn action_difference(model: &Model, feature: usize, a: f64, b: f64) -> f64 {
    let schema = &model.dataset().schema()[feature];
    let r = model.deviations().values[feature];
    match &schema.kind {
        FeatureKind::Nominal => f64::from(u8::from(a != b)),
        FeatureKind::Cyclic { period } => {
            let d = (a - b).abs() % period;
            d.min(period - d) / r
        }
        _ => (a - b).abs() / r,
    }
}

/// Same action: equal symbols, or numeric values within one residual.
fn same_action(model: &Model, actions: &[(usize, f64)], values: &[CaseValue]) -> Option<bool> {
    let mut same = true;
    for &(f, suggested) in actions {
        let v = values[f]?;
        let nominal = model.dataset().schema()[f].kind.is_nominal();
        let diff = action_difference(model, f, v, suggested);
        same &= if nominal { diff == 0.0 } else { diff <= 1.0 };
    }
    Some(same)
}

fn with_actions(query: &[CaseValue], actions: &[(usize, f64)]) -> Vec<CaseValue> {
    let mut full = query.to_vec();
    for &(f, v) in actions {
        full[f] = Some(v);
    }
    full
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CounterfactualRank {
    /// Action difference over total distance, descending.
    #[default]
    Ratio,
    /// Plain nearest-first.
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counterfactual {
    pub id: u64,
    pub distance: f64,
    pub action_difference: f64,
    pub ratio: f64,
}

/// The `count` nearest cases whose action differs from the suggestion.
///
/// `query` holds the context values; `actions` the suggested action
/// values. Distances are taken over every feature.
pub fn counterfactuals(
    model: &Model,
    query: &[CaseValue],
    actions: &[(usize, f64)],
    count: usize,
    rank: CounterfactualRank,
) -> Result<Vec<Counterfactual>> {
    if actions.is_empty() {
        return Err(Error::invalid("no suggested action"));
    }
    if count == 0 {
        return Err(Error::invalid("count must be positive"));
    }
    let full = with_actions(query, actions);
    let features = model.all_features();
    let metric = model.metric();
    let mut out: Vec<Counterfactual> = model
        .dataset()
        .cases()
        .iter()
        .filter(|c| same_action(model, actions, &c.values) == Some(false))
        .filter_map(|c| {
            let distance = metric.distance(&full, &c.values, &features)?;
            let diff: f64 = actions
                .iter()
                .map(|&(f, v)| action_difference(model, f, c.values[f].expect("known"), v))
                .sum();
            Some(Counterfactual {
                id: c.id,
                distance,
                action_difference: diff,
                ratio: if distance > 0.0 { diff / distance } else { f64::INFINITY },
            })
        })
        .collect();
    if out.is_empty() {
        return Err(Error::NoCounterfactual);
    }
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    out.truncate(count);
    if rank == CounterfactualRank::Ratio {
        out.sort_by(|a, b| {
            b.ratio
                .total_cmp(&a.ratio)
                .then(a.distance.total_cmp(&b.distance))
                .then(a.id.cmp(&b.id))
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Archetype {
    pub id: u64,
    /// Distance to the archetype's nearest differing-action case.
    pub separation: f64,
    /// Distance from the query to the archetype.
    pub distance: f64,
}

/// The same-action case furthest from every differing-action case.
/// Distances use the non-action features.
pub fn archetype(model: &Model, query: &[CaseValue], actions: &[(usize, f64)]) -> Result<Archetype> {
    if actions.is_empty() {
        return Err(Error::invalid("no suggested action"));
    }
    let context: Vec<usize> = (0..model.feature_count())
        .filter(|f| !actions.iter().any(|(a, _)| a == f))
        .collect();
    if context.is_empty() {
        return Err(Error::NoArchetype("no non-action features".into()));
    }
    let cases = model.dataset().cases();
    let mut same = Vec::new();
    let mut different = Vec::new();
    for c in cases {
        match same_action(model, actions, &c.values) {
            Some(true) => same.push(c),
            Some(false) => different.push(c),
            None => {}
        }
    }
    if same.is_empty() {
        return Err(Error::NoArchetype("no case shares the suggested action".into()));
    }
    if different.is_empty() {
        return Err(Error::NoArchetype("every case shares the suggested action".into()));
    }
    let metric = model.metric();
    let mut best: Option<(f64, u64)> = None;
    for s in &same {
        let separation = different
            .iter()
            .filter_map(|d| metric.distance(&s.values, &d.values, &context))
            .fold(f64::INFINITY, f64::min);
        if !separation.is_finite() {
            continue;
        }
        if best.is_none_or(|(b, id)| separation > b || (separation == b && s.id < id)) {
            best = Some((separation, s.id));
        }
    }
    let (separation, id) = best.ok_or_else(|| Error::NoArchetype("no comparable cases".into()))?;
    let archetype = model.dataset().case(id).expect("archetype is a model case");
    let full = with_actions(query, actions);
    let distance = metric.distance(&full, &archetype.values, &model.all_features()).unwrap_or(f64::NAN);
    Ok(Archetype {
        id,
        separation,
        distance,
    })
}

/// Share of the local model agreeing with a suggested action value.
///
/// Nominal features count cases with the same symbol; other features sum
/// the neighbor weights of cases within ±`tolerance`.
pub fn action_probability(
    model: &Model,
    local: &[Neighbor],
    feature: usize,
    suggested: f64,
    tolerance: f64,
) -> Result<f64> {
    if local.is_empty() {
        return Err(Error::invalid("local model is empty"));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let kind = &model.dataset().schema()[feature].kind;
    let value = |n: &Neighbor| model.dataset().case(n.id).and_then(|c| c.values[feature]);
    if kind.is_nominal() {
        let known: Vec<f64> = local.iter().filter_map(value).collect();
        if known.is_empty() {
            return Ok(0.0);
        }
        return Ok(known.iter().filter(|v| **v == suggested).count() as f64 / known.len() as f64);
    }
    let mut total = 0.0;
    let mut inside = 0.0;
    for n in local {
        let Some(v) = value(n) else { continue };
        total += n.weight;
        let gap = match kind {
            FeatureKind::Cyclic { period } => {
                let d = (v - suggested).abs() % period;
                d.min(period - d)
            }
            _ => (v - suggested).abs(),
        };
        if gap <= tolerance {
            inside += n.weight;
        }
    }
    Ok(if total > 0.0 { inside / total } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exclusion {
    /// Skip this many nearest cases.
    Count(usize),
    /// Skip cases within this distance.
    Radius(f64),
    /// Skip the nearest cases until they hold this share of the
    /// inverse-distance weight.
    Density(f64),
}

/// Distance to the nearest case left after excluding the closest ones.
pub fn less_similar_distance(model: &Model, query: &[CaseValue], exclusion: Exclusion, exclude: &[u64]) -> Result<f64> {
    let mut all = local_model(model, query, LocalSize::Count(model.len().max(1)), exclude)?;
    all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    let skip = match exclusion {
        Exclusion::Count(c) => c,
        Exclusion::Radius(r) if r >= 0.0 => all.iter().take_while(|n| n.distance <= r).count(),
        Exclusion::Density(q) if q > 0.0 && q <= 1.0 => {
            let d: Vec<f64> = all.iter().map(|n| n.distance).collect();
            let w = inverse_distance_weights(&d, model.params().alpha);
            let mut mass = 0.0;
            let mut skip = 0;
            for wi in w {
                if mass >= q {
                    break;
                }
                mass += wi;
                skip += 1;
            }
            skip
        }
        _ => return Err(Error::invalid("invalid exclusion parameter")),
    };
    all.get(skip)
        .map(|n| n.distance)
        .ok_or_else(|| Error::Infeasible("exclusion leaves no cases".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvictionRatio {
    pub id: u64,
    pub local_prediction: f64,
    pub global_prediction: f64,
    pub local_familiarity: f64,
    pub global_familiarity: f64,
    /// Low conviction locally, but at least average in the whole model.
    pub noise: bool,
}

fn ratio(local: f64, global: f64) -> f64 {
    if local == global {
        1.0
    } else {
        local / global
    }
}

impl ConvictionRatio {
    pub fn prediction_ratio(&self) -> f64 {
        ratio(self.local_prediction, self.global_prediction)
    }

    pub fn familiarity_ratio(&self) -> f64 {
        ratio(self.local_familiarity, self.global_familiarity)
    }
}

/// Local-scope over global-scope π_p and π_f for each case of the local
/// model given by `ids`.
pub fn conviction_ratios(model: &Model, ids: &[u64]) -> Result<Vec<ConvictionRatio>> {
    let global = conviction::analyze(model, false)?;
    conviction_ratios_with(model, &global, ids)
}

fn conviction_ratios_with(
    model: &Model,
    global: &conviction::ConvictionReport,
    ids: &[u64],
) -> Result<Vec<ConvictionRatio>> {
    let sub = model.submodel(ids);
    if sub.len() < 2 {
        return Err(Error::Infeasible("local model needs at least two cases".into()));
    }
    let local = conviction::analyze(&sub, false)?;
    Ok(local
        .cases
        .iter()
        .map(|l| {
            let g = global.cases.iter().find(|g| g.id == l.id).expect("local cases are model cases");
            ConvictionRatio {
                id: l.id,
                local_prediction: l.prediction,
                global_prediction: g.prediction,
                local_familiarity: l.familiarity,
                global_familiarity: g.familiarity,
                noise: l.prediction < 1.0 && g.prediction >= 1.0,
            }
        })
        .collect())
}

/// Hold-one-out residuals over the `size` cases nearest to `query`.
pub fn regional_residuals(model: &Model, query: &[CaseValue], size: usize) -> Result<ResidualReport> {
    if size < 2 {
        return Err(Error::invalid("regional model needs at least two cases"));
    }
    if size > model.len() {
        return Err(Error::invalid(format!("regional size {size} exceeds model size {}", model.len())));
    }
    let local = local_model(model, query, LocalSize::Count(size), &[])?;
    let ids: Vec<u64> = local.iter().map(|n| n.id).collect();
    let sub = model.submodel(&ids);
    let opts = ResidualOptions {
        cap: usize::MAX,
        ..Default::default()
    };
    Ok(residuals::report(&sub, &opts))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplainOptions {
    pub counterfactual_count: usize,
    pub counterfactual_rank: CounterfactualRank,
    /// Regional residual size; `None` means 2k (at least 2, at most n).
    pub regional_size: Option<usize>,
    /// Tolerance for numeric action probability; `None` uses the
    /// action's residual.
    pub tolerance: Option<f64>,
    /// `None` excludes the k nearest cases.
    pub less_similar: Option<Exclusion>,
    pub feature_contributions: bool,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        Self {
            counterfactual_count: 3,
            counterfactual_rank: CounterfactualRank::Ratio,
            regional_size: None,
            tolerance: None,
            less_similar: None,
            feature_contributions: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeFlag {
    pub feature: usize,
    pub value: f64,
    pub min: f64,
    pub max: f64,
    pub outside: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionProbability {
    pub feature: usize,
    pub value: f64,
    pub tolerance: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationBundle {
    pub context: Vec<(usize, f64)>,
    pub decision: Vec<(usize, f64)>,
    pub neighbors: Vec<Neighbor>,
    /// `None` when every case shares the suggested action.
    pub counterfactuals: Option<Vec<Counterfactual>>,
    pub archetype: Option<Archetype>,
    pub outside_range: Vec<RangeFlag>,
    pub local_residuals: Vec<(usize, f64)>,
    pub action_probabilities: Vec<ActionProbability>,
    pub conviction_ratios: Vec<ConvictionRatio>,
    pub less_similar: Exclusion,
    pub less_similar_distance: Option<f64>,
    pub feature_contributions: Vec<(usize, f64)>,
}

fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if matches!(e.class(), crate::error::ErrorClass::Infeasible) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Reacts to `context` and assembles every audit artifact for the result.
pub fn explain_react(
    model: &Model,
    context: &[(usize, f64)],
    actions: &[usize],
    k: usize,
    opts: &ExplainOptions,
) -> Result<ExplanationBundle> {
    let reaction = react(model, context, actions, k)?;
    let query = reaction.neighborhood.query.clone();
    let neighbors = reaction.neighborhood.neighbors.clone();
    let decision = reaction.predictions.clone();
    let local_ids: Vec<u64> = neighbors.iter().map(|n| n.id).collect();

    let counterfactuals = optional(counterfactuals(
        model,
        &query,
        &decision,
        opts.counterfactual_count,
        opts.counterfactual_rank,
    ))?;
    let archetype = optional(archetype(model, &query, &decision))?;

    let outside_range = context
        .iter()
        .filter_map(|&(f, value)| {
            let local: Vec<f64> = local_ids
                .iter()
                .filter_map(|id| model.dataset().case(*id).and_then(|c| c.values[f]))
                .collect();
            if local.is_empty() {
                return None;
            }
            let min = local.iter().copied().fold(f64::INFINITY, f64::min);
            let max = local.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some(RangeFlag {
                feature: f,
                value,
                min,
                max,
                outside: value < min || value > max,
            })
        })
        .collect();

    let size = opts.regional_size.unwrap_or(2 * k).max(2).min(model.len());
    let local_residuals = if size >= 2 {
        let report = regional_residuals(model, &query, size)?;
        report.values.iter().copied().enumerate().collect()
    } else {
        Vec::new()
    };

    let action_probabilities = decision
        .iter()
        .map(|&(f, value)| {
            let tolerance = if model.dataset().schema()[f].kind.is_nominal() {
                0.0
            } else {
                opts.tolerance.unwrap_or(model.deviations().values[f])
            };
            Ok(ActionProbability {
                feature: f,
                value,
                tolerance,
                probability: action_probability(model, &neighbors, f, value, tolerance)?,
            })
        })
        .collect::<Result<_>>()?;

    let conviction_ratios = if local_ids.len() >= 2 && model.len() >= 2 {
        conviction_ratios(model, &local_ids)?
    } else {
        Vec::new()
    };

    let less_similar = opts.less_similar.unwrap_or(Exclusion::Count(k));
    let less_similar_distance = optional(less_similar_distance(model, &query, less_similar, &[]))?;

    let feature_contributions = if opts.feature_contributions && model.feature_count() >= 2 && model.len() >= 2 {
        conviction::feature_prediction_contributions(model)?.into_iter().enumerate().collect()
    } else {
        Vec::new()
    };

    Ok(ExplanationBundle {
        context: context.to_vec(),
        decision,
        neighbors,
        counterfactuals,
        archetype,
        outside_range,
        local_residuals,
        action_probabilities,
        conviction_ratios,
        less_similar,
        less_similar_distance,
        feature_contributions,
    })
}

impl ExplanationBundle {
    /// Every case id the bundle references.
    pub fn referenced_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.neighbors.iter().map(|n| n.id).collect();
        ids.extend(self.counterfactuals.iter().flatten().map(|c| c.id));
        ids.extend(self.archetype.map(|a| a.id));
        ids.extend(self.conviction_ratios.iter().map(|c| c.id));
        ids
    }

    /// Sectioned text with a fixed key order; floats use shortest
    /// round-trip formatting so equal bundles render identically.
    pub fn render(&self, model: &Model) -> String {
        let ds = model.dataset();
        let name = |f: usize| ds.schema()[f].name.as_str();
        let val = |f: usize, v: f64| ds.format_value(f, Some(v));
        let mut s = String::new();
        let _ = writeln!(s, "[context]");
        for &(f, v) in &self.context {
            let _ = writeln!(s, "{}\t{}", name(f), val(f, v));
        }
        let _ = writeln!(s, "\n[decision]");
        for &(f, v) in &self.decision {
            let _ = writeln!(s, "{}\t{}", name(f), val(f, v));
        }
        let _ = writeln!(s, "\n[neighbors]\nid\tdistance\tweight");
        for n in &self.neighbors {
            let _ = writeln!(s, "{}\t{}\t{}", n.id, n.distance, n.weight);
        }
        let _ = writeln!(s, "\n[counterfactuals]");
        match &self.counterfactuals {
            Some(cf) => {
                let _ = writeln!(s, "id\tdistance\taction_difference\tratio");
                for c in cf {
                    let _ = writeln!(s, "{}\t{}\t{}\t{}", c.id, c.distance, c.action_difference, c.ratio);
                }
            }
            None => {
                let _ = writeln!(s, "none");
            }
        }
        let _ = writeln!(s, "\n[archetype]");
        match &self.archetype {
            Some(a) => {
                let _ = writeln!(s, "id\tseparation\tdistance\n{}\t{}\t{}", a.id, a.separation, a.distance);
            }
            None => {
                let _ = writeln!(s, "none");
            }
        }
        let _ = writeln!(s, "\n[outside_range]\nfeature\tvalue\tmin\tmax\toutside");
        for r in &self.outside_range {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                name(r.feature),
                val(r.feature, r.value),
                val(r.feature, r.min),
                val(r.feature, r.max),
                r.outside
            );
        }
        let _ = writeln!(s, "\n[local_residuals]\nfeature\tresidual");
        for &(f, r) in &self.local_residuals {
            let _ = writeln!(s, "{}\t{}", name(f), r);
        }
        let _ = writeln!(s, "\n[action_probability]\nfeature\tvalue\ttolerance\tprobability");
        for a in &self.action_probabilities {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}",
                name(a.feature),
                val(a.feature, a.value),
                a.tolerance,
                a.probability
            );
        }
        let _ = writeln!(
            s,
            "\n[conviction_ratios]\nid\tlocal_prediction\tglobal_prediction\tprediction_ratio\tlocal_familiarity\tglobal_familiarity\tfamiliarity_ratio\tnoise"
        );
        for c in &self.conviction_ratios {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.id,
                c.local_prediction,
                c.global_prediction,
                c.prediction_ratio(),
                c.local_familiarity,
                c.global_familiarity,
                c.familiarity_ratio(),
                c.noise
            );
        }
        let _ = writeln!(s, "\n[less_similar]");
        let policy = match self.less_similar {
            Exclusion::Count(c) => format!("count {c}"),
            Exclusion::Radius(r) => format!("radius {r}"),
            Exclusion::Density(q) => format!("density {q}"),
        };
        match self.less_similar_distance {
            Some(d) => {
                let _ = writeln!(s, "exclusion\t{policy}\ndistance\t{d}");
            }
            None => {
                let _ = writeln!(s, "exclusion\t{policy}\ndistance\tnone");
            }
        }
        let _ = writeln!(s, "\n[feature_contributions]\nfeature\tcontribution");
        for &(f, c) in &self.feature_contributions {
            let _ = writeln!(s, "{}\t{}", name(f), c);
        }
        s
    }
}

/// π_p of a prediction relative to the model, for reporting alongside a
/// decision.
pub fn decision_conviction(model: &Model, values: &[CaseValue]) -> Result<f64> {
    let expected = conviction::expected_self_information(model)?;
    let info = conviction::self_information(model, crate::engine::Query::Values(values), &model.all_features())?;
    Ok(conviction_ratio(expected, info.information))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, FeatureSchema};
    use crate::engine::Hyperparameters;
    use crate::metric::{DeviationMode, MetricConfig};

    fn labeled() -> Model {
        let mut ds = Dataset::new(vec![FeatureSchema::continuous("x"), FeatureSchema::nominal("label")]).unwrap();
        let neg = ds.intern(1, "neg") as f64;
        let pos = ds.intern(1, "pos") as f64;
        for (i, x) in [-3.0, -2.0, -1.0, -0.5, 0.4, 1.0, 2.0, 3.0].iter().enumerate() {
            let l = if *x < 0.0 { neg } else { pos };
            ds.push(crate::data::Case::new(i as u64, vec![Some(*x), Some(l)])).unwrap();
        }
        let params = Hyperparameters {
            k: 2,
            metric: MetricConfig {
                p: 1.0,
                mode: DeviationMode::None,
            },
            alpha: 1.0,
        };
        Model::new(ds, params).unwrap()
    }

    #[test]
    fn counterfactual_is_nearest_other_label() {
        let m = labeled();
        let q = vec![Some(-0.1), None];
        let cf = counterfactuals(&m, &q, &[(1, 0.0)], 1, CounterfactualRank::Ratio).unwrap();
        assert_eq!(cf[0].id, 4);
        let all = counterfactuals(&m, &q, &[(1, 0.0)], 100, CounterfactualRank::Nearest).unwrap();
        assert_eq!(all.iter().map(|c| c.id).collect::<Vec<_>>(), vec![4, 5, 6, 7]);
    }

    #[test]
    fn homogeneous_actions_have_no_counterfactual() {
        let rows = (0..5).map(|i| vec![Some(i as f64), Some(1.0)]).collect();
        let schema = vec![FeatureSchema::continuous("x"), FeatureSchema::continuous("y")];
        let m = Model::new(Dataset::from_rows(schema, rows).unwrap(), Hyperparameters::default()).unwrap();
        let q = vec![Some(0.0), None];
        assert!(matches!(
            counterfactuals(&m, &q, &[(1, 1.0)], 2, CounterfactualRank::Ratio),
            Err(Error::NoCounterfactual)
        ));
        assert!(matches!(archetype(&m, &q, &[(1, 1.0)]), Err(Error::NoArchetype(_))));
    }

    #[test]
    fn archetype_is_deepest_same_label_case() {
        let m = labeled();
        let a = archetype(&m, &[Some(-0.1), None], &[(1, 0.0)]).unwrap();
        assert_eq!(a.id, 0);
        assert!((a.separation - 3.4).abs() < 1e-12);
    }

    #[test]
    fn action_probability_weighted_share() {
        let rows = [250.0, 252.0, 260.0, 246.0, 300.0, 270.0].iter().map(|v| vec![Some(*v)]).collect();
        let m = Model::new(
            Dataset::from_rows(vec![FeatureSchema::continuous("a")], rows).unwrap(),
            Hyperparameters::default(),
        )
        .unwrap();
        let weights = [0.3, 0.17, 0.1, 0.2, 0.13, 0.1];
        let local: Vec<Neighbor> = weights
            .iter()
            .enumerate()
            .map(|(i, w)| Neighbor {
                id: i as u64,
                distance: 1.0,
                weight: *w,
            })
            .collect();
        let p = action_probability(&m, &local, 0, 250.0, 5.0).unwrap();
        assert!((p - 0.67).abs() < 1e-12);
        assert_eq!(action_probability(&m, &local, 0, 251.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn less_similar_is_monotone() {
        let m = labeled();
        let q = vec![Some(0.0), None];
        let mut last = 0.0;
        for c in 0..m.len() {
            let d = less_similar_distance(&m, &q, Exclusion::Count(c), &[]).unwrap();
            assert!(d >= last);
            last = d;
        }
        assert!(less_similar_distance(&m, &q, Exclusion::Count(m.len()), &[]).is_err());
        let nearest = less_similar_distance(&m, &q, Exclusion::Count(0), &[]).unwrap();
        assert!((nearest - 0.4).abs() < 1e-12);
        assert_eq!(less_similar_distance(&m, &q, Exclusion::Radius(0.45), &[]).unwrap(), 0.5);
    }

    #[test]
    fn full_local_model_has_unit_ratios() {
        let m = labeled();
        let ids: Vec<u64> = m.dataset().cases().iter().map(|c| c.id).collect();
        for r in conviction_ratios(&m, &ids).unwrap() {
            assert_eq!(r.prediction_ratio(), 1.0);
            assert_eq!(r.familiarity_ratio(), 1.0);
        }
    }

    #[test]
    fn bundle_references_model_cases() {
        let m = labeled();
        let b = explain_react(&m, &[(0, -1.0)], &[1], 2, &ExplainOptions::default()).unwrap();
        assert_eq!(b.neighbors[0].id, 2);
        for id in b.referenced_ids() {
            assert!(m.dataset().case(id).is_some());
        }
        assert!(b.outside_range.iter().all(|r| !r.outside));
        let text = b.render(&m);
        assert!(text.starts_with("[context]\nx\t-1\n"));
        assert_eq!(text, b.render(&m));
    }
}
