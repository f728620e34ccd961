#![allow(dead_code)]

use std::f64::consts::PI;

use conviction_core::data::parse_table;
use conviction_core::engine::FitOptions;
use conviction_core::{Dataset, FeatureSchema, Hyperparameters, Model};

/// Composite Simpson rule over [a, b] with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    sum * h / 3.0
}

fn normal_pdf(x: f64, sigma: f64) -> f64 {
    (-(x * x) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// E|X − Y| for X ~ N(0, σ²), Y ~ N(μ, σ²) by nested quadrature. The inner
/// integral over y is split at the kink y = x.
pub fn lk_quadrature(mu: f64, sigma: f64) -> f64 {
    let span = 9.0 * sigma;
    let panels = 600;
    let inner = |x: f64| {
        let lo = mu - span;
        let hi = mu + span;
        let kink = x.clamp(lo, hi);
        let g = |y: f64| (x - y).abs() * normal_pdf(y - mu, sigma);
        simpson(g, lo, kink, panels) + simpson(g, kink, hi, panels)
    };
    simpson(|x| normal_pdf(x, sigma) * inner(x), -span, span, panels)
}

/// Average ranks (1-based) with ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let below = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided signed-rank p-value by flipping every sign.
pub fn wilcoxon_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let ranks = average_ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let mean = ranks.iter().sum::<f64>() / 2.0;
    let observed: f64 = ranks.iter().zip(&d).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let gap = (observed - mean).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (w - mean).abs() >= gap - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

/// Two-sided rank-sum p-value over every relabelling of the pooled sample.
pub fn mann_whitney_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total = pooled.len();
    let m = a.len();
    let ranks = average_ranks(&pooled);
    let centre = m as f64 * (total as f64 + 1.0) / 2.0;
    let observed: f64 = ranks[..m].iter().sum();
    let gap = (observed - centre).abs();
    let (mut extreme, mut all) = (0u64, 0u64);
    for mask in 0u64..(1 << total) {
        if mask.count_ones() as usize != m {
            continue;
        }
        all += 1;
        let s: f64 = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (s - centre).abs() >= gap - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / all as f64
}

/// Weighted Minkowski distance on continuous values, written out directly.
pub fn minkowski(x: &[f64], y: &[f64], weights: &[f64], p: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let s: f64 = x
        .iter()
        .zip(y)
        .zip(weights)
        .map(|((a, b), w)| w / total * (a - b).abs().powf(p))
        .sum();
    s.powf(1.0 / p)
}

/// Weighted geometric mean as a plain product.
pub fn geometric_product(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v.powf(w / total)).product()
}

/// Indices of `rows` sorted by Minkowski distance to `query`, ties by index.
pub fn brute_force_knn(rows: &[Vec<f64>], query: &[f64], weights: &[f64], p: f64, k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (minkowski(r, query, weights, p), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, i)| i).collect()
}

/// SplitMix64, used so fixtures do not depend on the library's generator.
pub struct Mix(pub u64);

impl Mix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.uniform().max(f64::MIN_POSITIVE);
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
    }
}

pub fn continuous_dataset(names: &[&str], rows: &[Vec<f64>]) -> Dataset {
    let schema = names.iter().map(|n| FeatureSchema::continuous(*n)).collect();
    let rows = rows.iter().map(|r| r.iter().map(|v| Some(*v)).collect()).collect();
    Dataset::from_rows(schema, rows).unwrap()
}

pub fn csv_dataset(text: &str, schema: Vec<FeatureSchema>) -> Dataset {
    parse_table(text, schema, b',').unwrap()
}

pub fn params(k: usize, p: f64, lk: bool) -> Hyperparameters {
    let mut h = Hyperparameters {
        k,
        ..Hyperparameters::default()
    };
    h.metric.p = p;
    h.metric.mode = if lk {
        conviction_core::DeviationMode::LkNormal
    } else {
        conviction_core::DeviationMode::None
    };
    h
}

pub fn fitted(ds: Dataset, params: Hyperparameters) -> Model {
    Model::fit(ds, params, FitOptions::default()).unwrap().0
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
