//! Anomaly detection and greedy surprisal-driven pruning of cases and
//! features.

use crate::conviction::{self, conviction_ratio, familiarity_from_probabilities};
use crate::engine::Model;
use crate::error::{Error, Result};

pub const DEFAULT_ANOMALY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyOptions {
    /// Cases with π_p strictly below this are anomalous.
    pub threshold: f64,
    /// When set, also require π_f below this value.
    pub familiarity_threshold: Option<f64>,
}

impl Default for AnomalyOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_ANOMALY_THRESHOLD,
            familiarity_threshold: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anomaly {
    pub id: u64,
    pub prediction: f64,
    pub familiarity: f64,
}

/// Per-case (id, I, π_p, π_f) snapshot of the current model.
#[derive(Debug, Clone)]
struct Scores {
    ids: Vec<u64>,
    information: Vec<f64>,
    prediction: Vec<f64>,
    familiarity: Vec<f64>,
}

fn score(model: &Model) -> Result<Scores> {
    let per_case = conviction::case_information(model, &model.all_features())?;
    let known: Vec<f64> = per_case.iter().flatten().map(|s| s.information).collect();
    if known.is_empty() {
        return Err(Error::NoComparableCases);
    }
    let expected = known.iter().sum::<f64>() / known.len() as f64;
    let information: Vec<f64> = per_case.iter().map(|s| s.map_or(f64::INFINITY, |s| s.information)).collect();
    let phis: Vec<f64> = per_case.iter().map(|s| s.map_or(0.0, |s| s.phi)).collect();
    let total: f64 = phis.iter().sum();
    let probs: Vec<f64> = if total > 0.0 {
        phis.iter().map(|p| p / total).collect()
    } else {
        vec![1.0 / phis.len() as f64; phis.len()]
    };
    Ok(Scores {
        ids: model.dataset().cases().iter().map(|c| c.id).collect(),
        prediction: information.iter().map(|&i| conviction_ratio(expected, i)).collect(),
        familiarity: familiarity_from_probabilities(&probs),
        information,
    })
}

/// Ids of cases with π_p below `threshold`, most anomalous first.
pub fn detect_anomalies(model: &Model, threshold: f64) -> Result<Vec<u64>> {
    let opts = AnomalyOptions {
        threshold,
        ..Default::default()
    };
    Ok(detect_anomalies_with(model, &opts)?.into_iter().map(|a| a.id).collect())
}

pub fn detect_anomalies_with(model: &Model, opts: &AnomalyOptions) -> Result<Vec<Anomaly>> {
    if !(opts.threshold > 0.0 && opts.threshold <= 1.0) {
        return Err(Error::invalid(format!("anomaly threshold must be in (0, 1], got {}", opts.threshold)));
    }
    let s = score(model)?;
    let mut out: Vec<Anomaly> = (0..s.ids.len())
        .filter(|&i| s.prediction[i] < opts.threshold)
        .filter(|&i| opts.familiarity_threshold.is_none_or(|t| s.familiarity[i] < t))
        .map(|i| Anomaly {
            id: s.ids[i],
            prediction: s.prediction[i],
            familiarity: s.familiarity[i],
        })
        .collect();
    out.sort_by(|a, b| a.prediction.total_cmp(&b.prediction).then(a.id.cmp(&b.id)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CasePolicy {
    /// Remove lowest-surprisal cases while any has I below the floor.
    SurprisalFloor(f64),
    /// Keep at most this many cases.
    Cap(usize),
    /// Remove exactly this many cases.
    RemoveCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Removal {
    pub id: u64,
    pub information: f64,
    pub prediction: f64,
    pub familiarity: f64,
    pub batch: usize,
}

pub fn removal_table(log: &[Removal], delimiter: char) -> String {
    let d = delimiter;
    let mut out = format!("id{d}surprisal{d}prediction_conviction{d}familiarity_conviction{d}batch\n");
    for r in log {
        out.push_str(&format!(
            "{}{d}{}{d}{}{d}{}{d}{}\n",
            r.id, r.information, r.prediction, r.familiarity, r.batch
        ));
    }
    out
}

/// Removals per recompute; `None` means 10% of the planned removals.
fn batch_size(batch: Option<usize>, planned: usize) -> usize {
    batch.unwrap_or_else(|| (planned as f64 * 0.1).round() as usize).max(1)
}

/// Greedily removes the lowest-surprisal cases, recomputing I after every
/// batch. Returns the pruned model and the removal log.
pub fn prune_cases(model: &Model, policy: CasePolicy, batch: Option<usize>) -> Result<(Model, Vec<Removal>)> {
    let n = model.len();
    let min_cases = model.params().k + 1;
    let target = match policy {
        CasePolicy::Cap(m) => {
            if m >= n {
                return Ok((model.clone(), Vec::new()));
            }
            Some(m)
        }
        CasePolicy::RemoveCount(q) => Some(n.checked_sub(q).ok_or_else(|| {
            Error::Infeasible(format!("cannot remove {q} cases from a model of {n}"))
        })?),
        CasePolicy::SurprisalFloor(t) if !t.is_finite() => return Err(Error::invalid("surprisal floor must be finite")),
        CasePolicy::SurprisalFloor(_) => None,
    };
    if let Some(t) = target {
        if t < min_cases && t < n {
            return Err(Error::Infeasible(format!(
                "pruning to {t} cases leaves fewer than k + 1 = {min_cases}"
            )));
        }
    }
    if batch == Some(0) {
        return Err(Error::invalid("batch size must be positive"));
    }

    let mut model = model.clone();
    let mut log = Vec::new();
    let mut step = None;
    let mut round = 0;
    loop {
        let remaining = match (policy, target) {
            (_, Some(t)) => model.len() - t,
            (CasePolicy::SurprisalFloor(_), None) => model.len().saturating_sub(min_cases),
            _ => unreachable!(),
        };
        if remaining == 0 {
            break;
        }
        let s = score(&model)?;
        let mut order: Vec<usize> = (0..s.ids.len()).collect();
        order.sort_by(|&a, &b| s.information[a].total_cmp(&s.information[b]).then(s.ids[a].cmp(&s.ids[b])));
        if let CasePolicy::SurprisalFloor(t) = policy {
            order.retain(|&i| s.information[i] < t);
            if order.is_empty() {
                break;
            }
        }
        let step = *step.get_or_insert_with(|| batch_size(batch, order.len().min(remaining)));
        round += 1;
        for &i in order.iter().take(step.min(remaining)) {
            model.remove_case(s.ids[i]);
            log.push(Removal {
                id: s.ids[i],
                information: s.information[i],
                prediction: s.prediction[i],
                familiarity: s.familiarity[i],
                batch: round,
            });
        }
    }
    Ok((model, log))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeaturePolicy {
    /// Drop the lowest-ranked feature while its score is below the floor.
    ConvictionFloor(f64),
    /// Keep this many features.
    KeepTop(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureRanking {
    #[default]
    Conviction,
    Contribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRemoval {
    pub name: String,
    pub conviction: f64,
    pub contribution: f64,
}

pub fn feature_removal_table(log: &[FeatureRemoval], delimiter: char) -> String {
    let d = delimiter;
    let mut out = format!("feature{d}conviction{d}contribution\n");
    for r in log {
        out.push_str(&format!("{}{d}{}{d}{}\n", r.name, r.conviction, r.contribution));
    }
    out
}

/// Drops features in ascending order of feature prediction conviction (or
/// contribution), recomputing after every drop. Weights are renormalized.
pub fn prune_features(
    model: &Model,
    policy: FeaturePolicy,
    ranking: FeatureRanking,
) -> Result<(Model, Vec<FeatureRemoval>)> {
    let xi = model.feature_count();
    if let FeaturePolicy::KeepTop(j) = policy {
        if j == 0 || j > xi {
            return Err(Error::Infeasible(format!("cannot keep {j} of {xi} features")));
        }
        if j == xi {
            return Ok((model.clone(), Vec::new()));
        }
    }
    if xi < 2 {
        return Err(Error::Infeasible("feature pruning needs at least two features".into()));
    }
    let mut model = model.clone();
    let mut log = Vec::new();
    while model.feature_count() > 1 {
        if let FeaturePolicy::KeepTop(j) = policy {
            if model.feature_count() <= j {
                break;
            }
        }
        let full = conviction::expected_self_information(&model)?;
        let without = conviction::expected_information_without(&model)?;
        let mean = without.iter().sum::<f64>() / without.len() as f64;
        let convictions: Vec<f64> = without.iter().map(|&e| conviction_ratio(mean, e)).collect();
        let contributions: Vec<f64> = without.iter().map(|e| (full - e) / full).collect();
        let scores = match ranking {
            FeatureRanking::Conviction => &convictions,
            FeatureRanking::Contribution => &contributions,
        };
        let worst = (0..scores.len())
            .min_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)))
            .expect("at least two features");
        if let FeaturePolicy::ConvictionFloor(t) = policy {
            if scores[worst] >= t {
                break;
            }
        }
        log.push(FeatureRemoval {
            name: model.dataset().schema()[worst].name.clone(),
            conviction: convictions[worst],
            contribution: contributions[worst],
        });
        model.drop_feature(worst)?;
    }
    Ok((model, log))
}

/// Anomaly removal, then case pruning, then feature pruning; each stage
/// optional.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReducePlan {
    pub anomalies: Option<AnomalyOptions>,
    pub cases: Option<CasePolicy>,
    pub batch: Option<usize>,
    pub features: Option<(FeaturePolicy, FeatureRanking)>,
}

#[derive(Debug, Clone)]
pub struct ReduceOutcome {
    pub model: Model,
    pub anomalies: Vec<Anomaly>,
    pub removals: Vec<Removal>,
    pub feature_removals: Vec<FeatureRemoval>,
}

pub fn reduce(model: &Model, plan: &ReducePlan) -> Result<ReduceOutcome> {
    let mut current = model.clone();
    let mut anomalies = Vec::new();
    if let Some(opts) = &plan.anomalies {
        anomalies = detect_anomalies_with(&current, opts)?;
        let keep = current.len().saturating_sub(current.params().k + 1);
        anomalies.truncate(keep);
        for a in &anomalies {
            current.remove_case(a.id);
        }
    }
    let mut removals = Vec::new();
    if let Some(policy) = plan.cases {
        let (m, log) = prune_cases(&current, policy, plan.batch)?;
        current = m;
        removals = log;
    }
    let mut feature_removals = Vec::new();
    if let Some((policy, ranking)) = plan.features {
        let (m, log) = prune_features(&current, policy, ranking)?;
        current = m;
        feature_removals = log;
    }
    Ok(ReduceOutcome {
        model: current,
        anomalies,
        removals,
        feature_removals,
    })
}
