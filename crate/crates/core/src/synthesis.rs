//! Conditioned synthetic case generation with a conviction dial ν.
//!
//! Each free feature is predicted from the values chosen so far and then
//! resampled around the prediction: a Laplace draw with scale
//! rᵢ·(𝔼I/ν)^ξ for numeric features, a confusion-matrix row draw for
//! nominal ones.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use rayon::prelude::*;

use crate::conviction;
use crate::data::{Case, CaseValue, FeatureKind, Origin};
use crate::engine::{local_model, LocalSize, Model};
use crate::error::{Error, Result};
use crate::metric::{ConfusionMatrix, NOMINAL_EPSILON};

/// Bounded draws are retried this many times before clamping.
pub const MAX_REDRAWS: usize = 100;

/// 1/ζᵢ = rᵢ·(𝔼I/ν)^ξ for every feature.
pub fn laplace_scales(model: &Model, conviction: f64) -> Result<Vec<f64>> {
    let expected = conviction::expected_self_information(model)?;
    scales_from(&model.deviations().values, expected, conviction)
}

/// [`laplace_scales`] with explicit residuals and 𝔼I.
pub fn scales_from(residuals: &[f64], expected: f64, conviction: f64) -> Result<Vec<f64>> {
    let factor = scale_factor(expected, conviction, residuals.len())?;
    Ok(residuals.iter().map(|r| r * factor).collect())
}

/// (𝔼I/ν)^ξ.
pub fn scale_factor(expected: f64, conviction: f64, xi: usize) -> Result<f64> {
    if !(conviction > 0.0 && conviction.is_finite()) {
        return Err(Error::invalid(format!("conviction must be positive, got {conviction}")));
    }
    Ok((expected / conviction).powi(xi as i32))
}

/// A Laplace(center, scale) draw: a fair side choice, then an
/// exponential magnitude with mean `scale`.
pub fn laplace_draw<R: Rng + ?Sized>(center: f64, scale: f64, rng: &mut R) -> f64 {
    let upward: bool = rng.random();
    if !(scale > 0.0) {
        return center;
    }
    let magnitude = Exp::new(1.0 / scale).map_or(0.0, |e| e.sample(rng));
    if upward {
        center + magnitude
    } else {
        center - magnitude
    }
}

/// Laplace draw kept inside `bounds` by re-drawing, then clamping.
pub fn resample_continuous<R: Rng + ?Sized>(center: f64, scale: f64, bounds: Option<(f64, f64)>, rng: &mut R) -> f64 {
    let Some((lo, hi)) = bounds else {
        return laplace_draw(center, scale, rng);
    };
    for _ in 0..MAX_REDRAWS {
        let v = laplace_draw(center, scale, rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    laplace_draw(center, scale, rng).clamp(lo, hi)
}

/// Seeded convenience wrapper around [`resample_continuous`].
pub fn resample_continuous_seeded(center: f64, scale: f64, bounds: Option<(f64, f64)>, seed: u64) -> f64 {
    resample_continuous(center, scale, bounds, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Categorical draw from a probability row. Degenerate rows are smoothed
/// with ε and renormalized.
pub fn resample_nominal<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> Result<usize> {
    if row.is_empty() {
        return Err(Error::invalid("empty confusion row"));
    }
    let clean: Vec<f64> = row.iter().map(|p| if p.is_finite() && *p > 0.0 { *p } else { 0.0 }).collect();
    let dist = match WeightedIndex::new(&clean) {
        Ok(d) => d,
        Err(_) => {
            let smoothed: Vec<f64> = clean.iter().map(|p| p + NOMINAL_EPSILON).collect();
            WeightedIndex::new(&smoothed).map_err(|e| Error::invalid(e.to_string()))?
        }
    };
    Ok(dist.sample(rng))
}

/// Scales the off-diagonal mass of `row` (for symbol `code`) by `factor`,
/// keeping the row a probability vector.
pub fn scale_row(row: &[f64], code: usize, factor: f64) -> Vec<f64> {
    let off: f64 = row.iter().enumerate().filter(|(j, _)| *j != code).map(|(_, p)| p).sum();
    if off <= 0.0 || row.len() < 2 {
        return row.to_vec();
    }
    let target = (off * factor).min(1.0 - NOMINAL_EPSILON);
    let ratio = target / off;
    row.iter()
        .enumerate()
        .map(|(j, p)| if j == code { 1.0 - target } else { p * ratio })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureOrder {
    #[default]
    Random,
    /// Highest feature prediction conviction first.
    ByFeatureConviction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisRequest {
    /// Fixed (feature, value) pairs; nominal values are symbol codes.
    pub conditions: Vec<(usize, f64)>,
    /// Target prediction conviction ν.
    pub conviction: f64,
    pub count: usize,
    pub seed: u64,
    pub order: FeatureOrder,
}

impl SynthesisRequest {
    pub fn new(conviction: f64, count: usize, seed: u64) -> Self {
        Self {
            conditions: Vec::new(),
            conviction,
            count,
            seed,
            order: FeatureOrder::Random,
        }
    }

    fn validate(&self, model: &Model) -> Result<()> {
        if !(self.conviction > 0.0 && self.conviction.is_finite()) {
            return Err(Error::invalid(format!("conviction must be positive, got {}", self.conviction)));
        }
        let xi = model.feature_count();
        for (i, (f, v)) in self.conditions.iter().enumerate() {
            if *f >= xi {
                return Err(Error::UnknownFeature(format!("#{f}")));
            }
            if self.conditions[..i].iter().any(|(g, _)| g == f) {
                return Err(Error::invalid(format!(
                    "feature `{}` is conditioned twice",
                    model.dataset().schema()[*f].name
                )));
            }
            let mut probe = vec![None; xi];
            probe[*f] = Some(*v);
            model.dataset().check_case(&Case::new(0, probe))?;
        }
        Ok(())
    }
}

/// Request-wide quantities computed once.
struct Plan {
    factor: f64,
    ranking: Option<Vec<usize>>,
}

fn plan(model: &Model, request: &SynthesisRequest) -> Result<Plan> {
    let expected = conviction::expected_self_information(model)?;
    let factor = scale_factor(expected, request.conviction, model.feature_count())?;
    let ranking = match request.order {
        FeatureOrder::Random => None,
        FeatureOrder::ByFeatureConviction if model.feature_count() < 2 => Some(vec![0]),
        FeatureOrder::ByFeatureConviction => {
            let c = conviction::feature_prediction_convictions(model)?;
            let mut order: Vec<usize> = (0..c.len()).collect();
            order.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
            Some(order)
        }
    };
    Ok(Plan { factor, ranking })
}

/// Local residual (or confusion matrix) for `feature` around a partial
/// case, from hold-one-out predictions within its 2k nearest cases.
enum Spread {
    Scale(f64),
    Row(Vec<f64>),
}

fn local_spread(model: &Model, values: &[CaseValue], feature: usize, predicted: f64) -> Option<Spread> {
    let k = model.effective_k();
    let size = 2 * model.params().k;
    let context: Vec<usize> = (0..values.len()).filter(|&f| values[f].is_some()).collect();
    if context.is_empty() || model.len() < size {
        return None;
    }
    let local = local_model(model, values, LocalSize::Count(size), &[]).ok()?;
    if local.len() < size {
        return None;
    }
    let ids: Vec<u64> = local.iter().map(|n| n.id).collect();
    let sub = model.submodel(&ids);
    let nominal = model.dataset().schema()[feature].kind.is_nominal();
    let m = model.dataset().symbols(feature).len();
    let mut counts = vec![0.0; m * m];
    let (mut sum, mut count) = (0.0, 0usize);
    for c in sub.dataset().cases() {
        let Some(actual) = c.values[feature] else { continue };
        let ctx: Vec<usize> = context.iter().copied().filter(|&f| c.values[f].is_some()).collect();
        if ctx.is_empty() {
            continue;
        }
        let Ok((p, _)) = sub.predict(&c.values, &ctx, feature, k.min(sub.len() - 1).max(1), &[c.id]) else {
            continue;
        };
        if nominal {
            let (a, p) = (actual as usize, p as usize);
            if a < m && p < m {
                counts[a * m + p] += 1.0;
                count += 1;
            }
        } else {
            sum += feature_error(&model.dataset().schema()[feature].kind, actual, p);
            count += 1;
        }
    }
    if count == 0 {
        return None;
    }
    if nominal {
        let cm = ConfusionMatrix::from_counts(m, &counts, NOMINAL_EPSILON);
        cm.row(predicted as usize).map(|r| Spread::Row(r.to_vec()))
    } else {
        Some(Spread::Scale((sum / count as f64).max(model.floors()[feature])))
    }
}

fn feature_error(kind: &FeatureKind, a: f64, b: f64) -> f64 {
    match kind {
        FeatureKind::Cyclic { period } => {
            let d = (a - b).abs() % period;
            d.min(period - d)
        }
        _ => (a - b).abs(),
    }
}

fn global_spread(model: &Model, feature: usize, predicted: f64) -> Spread {
    match &model.deviations().confusion[feature] {
        Some(cm) if model.dataset().schema()[feature].kind.is_nominal() => {
            let m = cm.size().max(1);
            let row = cm
                .row(predicted as usize)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![1.0 / m as f64; m]);
            Spread::Row(row)
        }
        _ => Spread::Scale(model.deviations().values[feature]),
    }
}

/// Draws a new value for `feature` around `center`.
fn resample_feature<R: Rng + ?Sized>(
    model: &Model,
    feature: usize,
    center: f64,
    spread: Spread,
    factor: f64,
    rng: &mut R,
) -> Result<f64> {
    let schema = &model.dataset().schema()[feature];
    Ok(match (&schema.kind, spread) {
        (FeatureKind::Nominal, Spread::Row(row)) => {
            let code = center as usize;
            resample_nominal(&scale_row(&row, code, factor), rng)? as f64
        }
        (FeatureKind::Nominal, Spread::Scale(_)) => center,
        (kind, spread) => {
            let base = match spread {
                Spread::Scale(s) => s,
                Spread::Row(_) => model.deviations().values[feature],
            };
            let scale = base * factor;
            match kind {
                FeatureKind::Cyclic { period } => laplace_draw(center, scale, rng).rem_euclid(*period),
                FeatureKind::Ordinal { levels } => laplace_draw(center, scale, rng)
                    .round()
                    .clamp(0.0, (levels.len() - 1) as f64),
                _ => resample_continuous(center, scale, schema.bounds, rng),
            }
        }
    })
}

/// Resamples one feature value of the model around `center` at
/// conviction ν, using global residuals. Used by stochastic imputation.
pub(crate) fn resample_global<R: Rng + ?Sized>(
    model: &Model,
    feature: usize,
    center: f64,
    factor: f64,
    rng: &mut R,
) -> Result<f64> {
    resample_feature(model, feature, center, global_spread(model, feature, center), factor, rng)
}

/// Uniformly random known value of `feature` from the model.
fn random_known<R: Rng + ?Sized>(model: &Model, feature: usize, rng: &mut R) -> Result<f64> {
    let known: Vec<f64> = model.dataset().cases().iter().filter_map(|c| c.values[feature]).collect();
    known
        .choose(rng)
        .copied()
        .ok_or_else(|| Error::Infeasible(format!("feature `{}` has no known values", model.dataset().schema()[feature].name)))
}

fn synthesize_with<R: Rng + ?Sized>(
    model: &Model,
    request: &SynthesisRequest,
    plan: &Plan,
    id: u64,
    rng: &mut R,
) -> Result<Case> {
    let xi = model.feature_count();
    let mut values: Vec<CaseValue> = vec![None; xi];
    for &(f, v) in &request.conditions {
        values[f] = Some(v);
    }
    let mut free: Vec<usize> = match &plan.ranking {
        Some(order) => order.iter().copied().filter(|&f| values[f].is_none()).collect(),
        None => {
            let mut f: Vec<usize> = (0..xi).filter(|&f| values[f].is_none()).collect();
            f.shuffle(rng);
            f
        }
    };
    if request.conditions.is_empty() && !free.is_empty() {
        let first = free.remove(0);
        let seed_value = random_known(model, first, rng)?;
        let spread = global_spread(model, first, seed_value);
        values[first] = Some(resample_feature(model, first, seed_value, spread, plan.factor, rng)?);
    }
    for feature in free {
        let context: Vec<usize> = (0..xi).filter(|&f| values[f].is_some()).collect();
        let center = match model.predict(&values, &context, feature, model.effective_k(), &[]) {
            Ok((t, _)) => t,
            Err(Error::ActionUnavailable(_) | Error::NoComparableCases) => random_known(model, feature, rng)?,
            Err(e) => return Err(e),
        };
        let spread = local_spread(model, &values, feature, center).unwrap_or_else(|| global_spread(model, feature, center));
        values[feature] = Some(resample_feature(model, feature, center, spread, plan.factor, rng)?);
    }
    let mut case = Case::new(id, values);
    case.origin = Origin::Synthesized;
    Ok(case)
}

/// One synthetic case drawn with `rng`; the id is the model's next id.
pub fn synthesize_case<R: Rng + ?Sized>(model: &Model, request: &SynthesisRequest, rng: &mut R) -> Result<Case> {
    if model.is_empty() {
        return Err(Error::Infeasible("cannot synthesize from an empty model".into()));
    }
    request.validate(model)?;
    let plan = plan(model, request)?;
    synthesize_with(model, request, &plan, model.dataset().next_id(), rng)
}

/// `request.count` cases with consecutive ids after the model's last.
/// Case i uses stream i of the seeded generator, so output is independent
/// of thread count.
pub fn synthesize(model: &Model, request: &SynthesisRequest) -> Result<Vec<Case>> {
    if model.is_empty() {
        return Err(Error::Infeasible("cannot synthesize from an empty model".into()));
    }
    if request.count == 0 {
        return Err(Error::invalid("count must be positive"));
    }
    request.validate(model)?;
    let plan = plan(model, request)?;
    let first_id = model.dataset().next_id();
    (0..request.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
            rng.set_stream(i as u64);
            synthesize_with(model, request, &plan, first_id + i as u64, &mut rng)
        })
        .collect()
}
