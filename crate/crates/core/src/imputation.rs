//! Least-surprising-first imputation.
//!
//! Incomplete cases are ranked by null count, then by self-information
//! over their known features. The first `batch` cases get every missing
//! feature predicted from their known ones, the values are written back
//! and the ranking is recomputed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conviction::{self, Duplicates};
use crate::data::Origin;
use crate::engine::{Model, Query};
use crate::error::{Error, Result};
use crate::synthesis;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Fill every fillable cell.
    Complete,
    /// Stop once the lowest-ranked case's surprisal exceeds the ceiling.
    /// `None` means 2·𝔼I of the input model.
    SurprisalCeiling(Option<f64>),
    /// Stop once the missing fraction is at or below the target.
    SparsityTarget(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputeOptions {
    pub batch: usize,
    pub termination: Termination,
    /// Draw from the synthesis resampler (at ν = 1) with this seed instead
    /// of taking the point prediction.
    pub stochastic: Option<u64>,
    /// Impute the lowest-entropy feature first, then rank cases missing it.
    pub feature_entropy_first: bool,
}

impl Default for ImputeOptions {
    fn default() -> Self {
        Self {
            batch: 1,
            termination: Termination::Complete,
            stochastic: None,
            feature_entropy_first: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Complete,
    SurprisalCeiling,
    SparsityTarget,
    /// No remaining cell could be predicted.
    Stalled,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Complete => "complete",
            StopReason::SurprisalCeiling => "surprisal_ceiling",
            StopReason::SparsityTarget => "sparsity_target",
            StopReason::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputedCell {
    pub id: u64,
    pub feature: usize,
    pub value: f64,
    /// Self-information of the case over its known features when ranked.
    pub information: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationLog {
    pub cells: Vec<ImputedCell>,
    /// Cases with every feature missing; never imputed.
    pub skipped: Vec<u64>,
    pub iterations: usize,
    pub stop: StopReason,
    pub ceiling: Option<f64>,
}

impl ImputationLog {
    pub fn to_table(&self, model: &Model, delimiter: char) -> String {
        let d = delimiter;
        let mut out = format!("id{d}feature{d}value{d}surprisal{d}iteration\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{}{d}{}{d}{}{d}{}{d}{}\n",
                c.id,
                model.dataset().schema()[c.feature].name,
                model.dataset().format_value(c.feature, Some(c.value)),
                c.information,
                c.iteration
            ));
        }
        out
    }
}

fn missing_fraction(model: &Model) -> f64 {
    let cells = model.len() * model.feature_count();
    if cells == 0 {
        0.0
    } else {
        model.dataset().missing_count() as f64 / cells as f64
    }
}

/// Mean self-information of each feature over the cases that know it.
fn feature_entropies(model: &Model) -> Result<Vec<f64>> {
    (0..model.feature_count())
        .map(|f| {
            let per_case = conviction::case_information(model, &[f])?;
            let known: Vec<f64> = per_case.iter().flatten().map(|s| s.information).collect();
            Ok(if known.is_empty() {
                f64::INFINITY
            } else {
                known.iter().sum::<f64>() / known.len() as f64
            })
        })
        .collect()
}

/// A ranked incomplete case.
struct Ranked {
    idx: usize,
    missing: usize,
    information: f64,
}

fn rank(model: &Model, candidates: &[usize]) -> Result<Vec<Ranked>> {
    let cases = model.dataset().cases();
    let mut ranked: Vec<Ranked> = candidates
        .par_iter()
        .map(|&idx| {
            let c = &cases[idx];
            let known = c.known_features();
            let information =
                match conviction::self_information_with(model, Query::Case(c.id), &known, Duplicates::Split) {
                    Ok(s) => s.information,
                    Err(Error::NoComparableCases) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
            Ok(Ranked {
                idx,
                missing: c.missing_count(),
                information,
            })
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| {
        a.missing
            .cmp(&b.missing)
            .then(a.information.total_cmp(&b.information))
            .then(cases[a.idx].id.cmp(&cases[b.idx].id))
    });
    Ok(ranked)
}

/// Imputes missing values in place order of least surprisal. Returns the
/// filled model and a log that [`replay`] can reapply.
pub fn impute(model: &Model, opts: &ImputeOptions) -> Result<(Model, ImputationLog)> {
    if opts.batch == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if let Termination::SparsityTarget(f) = opts.termination {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::invalid(format!("sparsity target must be in [0, 1], got {f}")));
        }
    }
    for (f, s) in model.dataset().schema().iter().enumerate() {
        if model.dataset().cases().iter().all(|c| c.values[f].is_none()) && !model.is_empty() {
            return Err(Error::Infeasible(format!("feature `{}` has no known value", s.name)));
        }
    }
    let ceiling = match opts.termination {
        Termination::SurprisalCeiling(Some(s)) => Some(s),
        Termination::SurprisalCeiling(None) => Some(2.0 * conviction::expected_self_information(model)?),
        _ => None,
    };
    let factor = match opts.stochastic {
        Some(_) => {
            let expected = conviction::expected_self_information(model)?;
            synthesis::scale_factor(expected, 1.0, model.feature_count())?
        }
        None => 1.0,
    };
    let mut rng = opts.stochastic.map(ChaCha8Rng::seed_from_u64);

    let mut model = model.clone();
    let skipped: Vec<u64> = model
        .dataset()
        .cases()
        .iter()
        .filter(|c| c.values.iter().all(Option::is_none))
        .map(|c| c.id)
        .collect();
    let mut cells = Vec::new();
    let mut iteration = 0;
    let stop = loop {
        let cases = model.dataset().cases();
        let incomplete: Vec<usize> = (0..cases.len())
            .filter(|&i| {
                let m = cases[i].missing_count();
                m > 0 && m < model.feature_count()
            })
            .collect();
        if incomplete.is_empty() {
            break StopReason::Complete;
        }
        if let Termination::SparsityTarget(f) = opts.termination {
            if missing_fraction(&model) <= f {
                break StopReason::SparsityTarget;
            }
        }
        let (candidates, only_feature) = if opts.feature_entropy_first {
            let entropy = feature_entropies(&model)?;
            let target = (0..model.feature_count())
                .filter(|&f| incomplete.iter().any(|&i| cases[i].values[f].is_none()))
                .min_by(|&a, &b| entropy[a].total_cmp(&entropy[b]).then(a.cmp(&b)))
                .expect("some feature is missing");
            let c: Vec<usize> = incomplete.iter().copied().filter(|&i| cases[i].values[target].is_none()).collect();
            (c, Some(target))
        } else {
            (incomplete, None)
        };
        let ranked = rank(&model, &candidates)?;
        if let Some(s) = ceiling {
            if ranked[0].information > s {
                break StopReason::SurprisalCeiling;
            }
        }
        iteration += 1;

        let chosen = &ranked[..opts.batch.min(ranked.len())];
        let predictions: Vec<Vec<(usize, f64, f64)>> = chosen
            .par_iter()
            .map(|r| {
                let case = &model.dataset().cases()[r.idx];
                let known = case.known_features();
                (0..model.feature_count())
                    .filter(|&f| case.values[f].is_none() && only_feature.is_none_or(|t| t == f))
                    .filter_map(|f| {
                        model
                            .predict(&case.values, &known, f, model.effective_k(), &[case.id])
                            .ok()
                            .map(|(v, _)| (f, v, r.information))
                    })
                    .collect()
            })
            .collect();

        let mut filled = 0;
        for (r, preds) in chosen.iter().zip(predictions) {
            let id = model.dataset().cases()[r.idx].id;
            for (feature, point, information) in preds {
                let value = match rng.as_mut() {
                    Some(rng) => synthesis::resample_global(&model, feature, point, factor, rng)?,
                    None => point,
                };
                model.set_value(id, feature, Some(value))?;
                model.set_origin(id, Origin::Imputed)?;
                cells.push(ImputedCell {
                    id,
                    feature,
                    value,
                    information,
                    iteration,
                });
                filled += 1;
            }
        }
        if filled == 0 {
            break StopReason::Stalled;
        }
    };
    Ok((
        model,
        ImputationLog {
            cells,
            skipped,
            iterations: iteration,
            stop,
            ceiling,
        },
    ))
}

/// Writes the logged values into `model` in log order.
pub fn replay(model: &Model, log: &ImputationLog) -> Result<Model> {
    let mut out = model.clone();
    for c in &log.cells {
        out.set_value(c.id, c.feature, Some(c.value))?;
        out.set_origin(c.id, Origin::Imputed)?;
    }
    Ok(out)
}
