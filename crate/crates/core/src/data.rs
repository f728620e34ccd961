//! Schemas, cases, and delimiter-separated table ingestion.
//!
//! Every value is stored as `Option<f64>`: continuous and cyclic features
//! hold the raw number, ordinal features hold the level index, and nominal
//! features hold a dense code interned per feature. The original symbols are
//! kept in the dataset's symbol tables and are always used for external
//! forms.

use std::collections::HashMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Column names that carry case metadata rather than feature values.
pub const ORIGIN_COLUMN: &str = "origin";
pub const SESSION_COLUMN: &str = "session";

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Continuous,
    Nominal,
    Ordinal { levels: Vec<String> },
    Cyclic { period: f64 },
}

impl FeatureKind {
    pub fn label(&self) -> &'static str {
        match self {
            FeatureKind::Continuous => "continuous",
            FeatureKind::Nominal => "nominal",
            FeatureKind::Ordinal { .. } => "ordinal",
            FeatureKind::Cyclic { .. } => "cyclic",
        }
    }

    pub fn is_nominal(&self) -> bool {
        matches!(self, FeatureKind::Nominal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    pub weight: f64,
    pub bounds: Option<(f64, f64)>,
}

impl FeatureSchema {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        Self {
            name: name.into(),
            kind,
            weight: 1.0,
            bounds: None,
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Self::new(name, FeatureKind::Continuous)
    }

    pub fn nominal(name: impl Into<String>) -> Self {
        Self::new(name, FeatureKind::Nominal)
    }

    pub fn ordinal<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Self::new(
            name,
            FeatureKind::Ordinal {
                levels: levels.into_iter().map(Into::into).collect(),
            },
        )
    }

    pub fn cyclic(name: impl Into<String>, period: f64) -> Self {
        Self::new(name, FeatureKind::Cyclic { period })
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_bounds(mut self, min: f64, max: f64) -> Self {
        self.bounds = Some((min, max));
        self
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("feature name is empty".into()));
        }
        if self.name == ORIGIN_COLUMN || self.name == SESSION_COLUMN {
            return Err(Error::Schema(format!("`{}` is a reserved column name", self.name)));
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(Error::Schema(format!("feature `{}` has non-positive weight", self.name)));
        }
        match &self.kind {
            FeatureKind::Ordinal { levels } => {
                if levels.is_empty() {
                    return Err(Error::Schema(format!("ordinal feature `{}` has no levels", self.name)));
                }
                for (i, level) in levels.iter().enumerate() {
                    if levels[..i].contains(level) {
                        return Err(Error::Schema(format!(
                            "ordinal feature `{}` repeats level `{level}`",
                            self.name
                        )));
                    }
                }
            }
            FeatureKind::Cyclic { period } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(Error::Schema(format!("cyclic feature `{}` needs a positive period", self.name)));
                }
            }
            FeatureKind::Continuous | FeatureKind::Nominal => {}
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Schema(format!("feature `{}` has invalid bounds", self.name)));
            }
        }
        Ok(())
    }
}

/// Rescales weights to sum to one. Idempotent up to rounding.
pub fn normalize_weights(schema: &mut [FeatureSchema]) {
    let total: f64 = schema.iter().map(|f| f.weight).sum();
    if total > 0.0 && total.is_finite() {
        for f in schema.iter_mut() {
            f.weight /= total;
        }
    }
}

/// A known value (see module docs for its interpretation) or missing.
pub type CaseValue = Option<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Observed,
    Imputed,
    Synthesized,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Observed => "observed",
            Origin::Imputed => "imputed",
            Origin::Synthesized => "synthesized",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "observed" => Some(Origin::Observed),
            "imputed" => Some(Origin::Imputed),
            "synthesized" => Some(Origin::Synthesized),
            _ => None,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub id: u64,
    pub values: Vec<CaseValue>,
    pub origin: Origin,
    pub session: Option<String>,
}

impl Case {
    pub fn new(id: u64, values: Vec<CaseValue>) -> Self {
        Self {
            id,
            values,
            origin: Origin::Observed,
            session: None,
        }
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn known_features(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|_| i))
            .collect()
    }
}

/// A cell removed by [`mask_values`], with its ground-truth value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskedCell {
    pub case_index: usize,
    pub feature: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<FeatureSchema>,
    symbols: Vec<Vec<String>>,
    cases: Vec<Case>,
}

impl Dataset {
    /// Creates an empty dataset. Weights are normalized to sum to one.
    pub fn new(mut schema: Vec<FeatureSchema>) -> Result<Self> {
        if schema.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        for (i, f) in schema.iter().enumerate() {
            f.validate()?;
            if schema[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
        }
        normalize_weights(&mut schema);
        let symbols = vec![Vec::new(); schema.len()];
        Ok(Self {
            schema,
            symbols,
            cases: Vec::new(),
        })
    }

    /// Builds a dataset from raw rows, assigning ids in row order.
    pub fn from_rows(schema: Vec<FeatureSchema>, rows: Vec<Vec<CaseValue>>) -> Result<Self> {
        let mut ds = Self::new(schema)?;
        for (id, values) in rows.into_iter().enumerate() {
            ds.push(Case::new(id as u64, values))?;
        }
        Ok(ds)
    }

    pub fn schema(&self) -> &[FeatureSchema] {
        &self.schema
    }

    pub fn feature_count(&self) -> usize {
        self.schema.len()
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn symbols(&self, feature: usize) -> &[String] {
        &self.symbols[feature]
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn case_index(&self, id: u64) -> Option<usize> {
        self.cases.iter().position(|c| c.id == id)
    }

    pub fn case(&self, id: u64) -> Option<&Case> {
        self.cases.iter().find(|c| c.id == id)
    }

    pub fn next_id(&self) -> u64 {
        self.cases.iter().map(|c| c.id + 1).max().unwrap_or(0)
    }

    pub fn missing_count(&self) -> usize {
        self.cases.iter().map(Case::missing_count).sum()
    }

    /// Interns a nominal symbol, returning its code.
    pub fn intern(&mut self, feature: usize, symbol: &str) -> u32 {
        let table = &mut self.symbols[feature];
        match table.iter().position(|s| s == symbol) {
            Some(code) => code as u32,
            None => {
                table.push(symbol.to_string());
                (table.len() - 1) as u32
            }
        }
    }

    pub fn lookup_symbol(&self, feature: usize, symbol: &str) -> Option<u32> {
        self.symbols[feature].iter().position(|s| s == symbol).map(|c| c as u32)
    }

    /// Reassembles a dataset exactly, without renormalizing weights.
    pub(crate) fn from_parts(schema: Vec<FeatureSchema>, symbols: Vec<Vec<String>>, cases: Vec<Case>) -> Result<Self> {
        if schema.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        for (i, f) in schema.iter().enumerate() {
            f.validate()?;
            if schema[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
        }
        if symbols.len() != schema.len() {
            return Err(Error::Schema("symbol table count does not match schema".into()));
        }
        let mut ds = Self {
            schema,
            symbols,
            cases: Vec::with_capacity(cases.len()),
        };
        let mut seen = std::collections::HashSet::with_capacity(cases.len());
        for case in cases {
            ds.check_case(&case)?;
            if !seen.insert(case.id) {
                return Err(Error::invalid(format!("duplicate case id {}", case.id)));
            }
            ds.cases.push(case);
        }
        Ok(ds)
    }

    /// Parses a token for `feature` without mutating symbol tables. An unseen
    /// nominal symbol maps to a fresh code that matches no stored case.
    pub fn parse_value(&self, feature: usize, token: &str) -> Result<CaseValue> {
        let token = token.trim();
        if is_missing_token(token) {
            return Ok(None);
        }
        let f = &self.schema[feature];
        match &f.kind {
            FeatureKind::Nominal => Ok(Some(
                self.lookup_symbol(feature, token)
                    .unwrap_or(self.symbols[feature].len() as u32) as f64,
            )),
            _ => parse_known(f, token).map(Some).map_err(|message| Error::Parse { line: 0, message }),
        }
    }

    pub fn format_value(&self, feature: usize, value: CaseValue) -> String {
        let Some(v) = value else {
            return String::new();
        };
        match &self.schema[feature].kind {
            FeatureKind::Nominal => self.symbols[feature]
                .get(v as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{v}")),
            FeatureKind::Ordinal { levels } => levels
                .get(v as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{v}")),
            FeatureKind::Continuous | FeatureKind::Cyclic { .. } => format!("{v}"),
        }
    }

    pub fn push(&mut self, case: Case) -> Result<()> {
        self.check_case(&case)?;
        if self.cases.iter().any(|c| c.id == case.id) {
            return Err(Error::invalid(format!("duplicate case id {}", case.id)));
        }
        self.cases.push(case);
        Ok(())
    }

    pub(crate) fn check_case(&self, case: &Case) -> Result<()> {
        if case.values.len() != self.schema.len() {
            return Err(Error::invalid(format!(
                "case {} has {} values, schema has {} features",
                case.id,
                case.values.len(),
                self.schema.len()
            )));
        }
        for (f, v) in self.schema.iter().zip(&case.values) {
            let Some(v) = *v else { continue };
            if !v.is_finite() {
                return Err(Error::invalid(format!("case {} has a non-finite `{}`", case.id, f.name)));
            }
            if let FeatureKind::Ordinal { levels } = &f.kind {
                if v < 0.0 || v.fract() != 0.0 || v as usize >= levels.len() {
                    return Err(Error::invalid(format!(
                        "case {} has ordinal `{}` outside its level list",
                        case.id, f.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn remove(&mut self, id: u64) -> Option<Case> {
        let idx = self.case_index(id)?;
        Some(self.cases.remove(idx))
    }

    pub(crate) fn cases_mut(&mut self) -> &mut [Case] {
        &mut self.cases
    }

    /// Dataset over the same schema holding only `ids`, in model order.
    pub fn subset(&self, ids: &[u64]) -> Dataset {
        let ids: std::collections::HashSet<u64> = ids.iter().copied().collect();
        Dataset {
            schema: self.schema.clone(),
            symbols: self.symbols.clone(),
            cases: self.cases.iter().filter(|c| ids.contains(&c.id)).cloned().collect(),
        }
    }

    /// Removes a feature column and renormalizes the remaining weights.
    pub fn drop_feature(&mut self, feature: usize) -> Result<FeatureSchema> {
        if self.schema.len() < 2 {
            return Err(Error::Infeasible("cannot drop the last feature".into()));
        }
        let removed = self.schema.remove(feature);
        self.symbols.remove(feature);
        for c in &mut self.cases {
            c.values.remove(feature);
        }
        normalize_weights(&mut self.schema);
        Ok(removed)
    }

    /// Multiplies every known value of a continuous feature by `factor`.
    pub fn scale_feature(&mut self, feature: usize, factor: f64) {
        for c in &mut self.cases {
            if let Some(v) = c.values[feature].as_mut() {
                *v *= factor;
            }
        }
    }

    pub fn is_compatible(&self, other: &Dataset) -> bool {
        self.schema.len() == other.schema.len()
            && self
                .schema
                .iter()
                .zip(&other.schema)
                .all(|(a, b)| a.name == b.name && a.kind.label() == b.kind.label())
    }
}

pub(crate) fn is_missing_token(token: &str) -> bool {
    token.is_empty() || token == "?"
}

fn parse_known(f: &FeatureSchema, token: &str) -> std::result::Result<f64, String> {
    match &f.kind {
        FeatureKind::Continuous | FeatureKind::Cyclic { .. } => match token.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{token}` is not a finite number for feature `{}`", f.name)),
        },
        FeatureKind::Ordinal { levels } => levels
            .iter()
            .position(|l| l == token)
            .map(|i| i as f64)
            .ok_or_else(|| format!("`{token}` is not a level of ordinal feature `{}`", f.name)),
        FeatureKind::Nominal => unreachable!("nominal values are interned"),
    }
}

fn reader(text: &str, delimiter: u8) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Parses delimiter-separated text with a mandatory header row.
///
/// Empty fields and `?` are missing. The reserved `origin` and `session`
/// columns, when present, populate case metadata.
pub fn parse_table(text: &str, schema: Vec<FeatureSchema>, delimiter: u8) -> Result<Dataset> {
    let mut ds = Dataset::new(schema)?;
    let mut rdr = reader(text, delimiter);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().all(str::is_empty) {
        return Err(Error::EmptyHeader);
    }

    let mut column_feature = Vec::with_capacity(header.len());
    let mut origin_col = None;
    let mut session_col = None;
    for (col, name) in header.iter().enumerate() {
        match name {
            ORIGIN_COLUMN => origin_col = Some(col),
            SESSION_COLUMN => session_col = Some(col),
            _ => {}
        }
        let idx = if name == ORIGIN_COLUMN || name == SESSION_COLUMN {
            None
        } else {
            Some(
                ds.schema
                    .iter()
                    .position(|f| f.name == name)
                    .ok_or_else(|| Error::UnknownColumn(name.to_string()))?,
            )
        };
        column_feature.push(idx);
    }
    for f in &ds.schema {
        if !header.iter().any(|h| h == f.name) {
            return Err(Error::MissingColumn(f.name.clone()));
        }
    }

    let xi = ds.schema.len();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(row + 2);
        let mut values = vec![None; xi];
        for (col, token) in record.iter().enumerate() {
            let Some(feature) = column_feature[col] else { continue };
            if is_missing_token(token) {
                continue;
            }
            values[feature] = Some(if ds.schema[feature].kind.is_nominal() {
                ds.intern(feature, token) as f64
            } else {
                parse_known(&ds.schema[feature], token).map_err(|message| Error::Parse { line, message })?
            });
        }
        let mut case = Case::new(row as u64, values);
        if let Some(col) = origin_col {
            let token = &record[col];
            if !token.is_empty() {
                case.origin = Origin::parse(token).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("unknown origin `{token}`"),
                })?;
            }
        }
        if let Some(col) = session_col {
            let token = &record[col];
            if !token.is_empty() {
                case.session = Some(token.to_string());
            }
        }
        ds.cases.push(case);
    }
    Ok(ds)
}

/// Infers continuous columns (every known token numeric) and nominal columns
/// (everything else), with uniform weights.
pub fn infer_schema(text: &str, delimiter: u8) -> Result<Vec<FeatureSchema>> {
    let mut rdr = reader(text, delimiter);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(Error::EmptyHeader);
    }
    let mut numeric = vec![true; header.len()];
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        for (col, token) in record.iter().enumerate() {
            if numeric[col] && !is_missing_token(token) && !token.parse::<f64>().is_ok_and(f64::is_finite) {
                numeric[col] = false;
            }
        }
    }
    let features: Vec<FeatureSchema> = header
        .iter()
        .zip(numeric)
        .filter(|(name, _)| *name != ORIGIN_COLUMN && *name != SESSION_COLUMN)
        .map(|(name, numeric)| {
            if numeric {
                FeatureSchema::continuous(name)
            } else {
                FeatureSchema::nominal(name)
            }
        })
        .collect();
    let weight = 1.0 / features.len().max(1) as f64;
    Ok(features.into_iter().map(|f| f.with_weight(weight)).collect())
}

/// Writes the dataset in the same layout [`parse_table`] reads. Numbers are
/// printed in shortest round-trip form, so re-parsing is bit-exact.
pub fn write_table(ds: &Dataset, delimiter: u8, with_origin: bool) -> String {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    let mut header: Vec<&str> = ds.schema.iter().map(|f| f.name.as_str()).collect();
    if with_origin {
        header.push(ORIGIN_COLUMN);
    }
    w.write_record(&header).expect("in-memory write");
    for case in &ds.cases {
        let mut row: Vec<String> = (0..ds.schema.len())
            .map(|f| ds.format_value(f, case.values[f]))
            .collect();
        if with_origin {
            row.push(case.origin.to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Parses the line-oriented schema override format:
///
/// ```text
/// # name kind [params] [weight]
/// temp   continuous [0,50] 2
/// colour nominal
/// size   ordinal small,medium,large
/// hour   cyclic 24 0.5
/// ```
pub fn parse_schema_file(text: &str) -> Result<Vec<FeatureSchema>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: n + 1, message };
        let mut tokens = line.split_whitespace();
        let name = tokens.next().expect("non-empty line");
        let kind = tokens.next().ok_or_else(|| err(format!("feature `{name}` has no kind")))?;
        let rest: Vec<&str> = tokens.collect();
        let (mut feature, rest) = match kind {
            "continuous" => match rest.first() {
                Some(tok) if tok.starts_with('[') => {
                    let inner = tok.trim_start_matches('[').trim_end_matches(']');
                    let (lo, hi) = inner
                        .split_once(',')
                        .ok_or_else(|| err(format!("bad bounds `{tok}`")))?;
                    let lo: f64 = lo.trim().parse().map_err(|_| err(format!("bad bound `{lo}`")))?;
                    let hi: f64 = hi.trim().parse().map_err(|_| err(format!("bad bound `{hi}`")))?;
                    (FeatureSchema::continuous(name).with_bounds(lo, hi), &rest[1..])
                }
                _ => (FeatureSchema::continuous(name), &rest[..]),
            },
            "nominal" => (FeatureSchema::nominal(name), &rest[..]),
            "ordinal" => {
                let levels = rest.first().ok_or_else(|| err(format!("ordinal `{name}` needs levels")))?;
                (FeatureSchema::ordinal(name, levels.split(',')), &rest[1..])
            }
            "cyclic" => {
                let period = rest
                    .first()
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| err(format!("cyclic `{name}` needs a period")))?;
                (FeatureSchema::cyclic(name, period), &rest[1..])
            }
            other => return Err(err(format!("unknown kind `{other}`"))),
        };
        match rest {
            [] => {}
            [w] => {
                feature.weight = w.parse().map_err(|_| err(format!("bad weight `{w}`")))?;
            }
            _ => return Err(err(format!("trailing tokens after feature `{name}`"))),
        }
        feature.validate()?;
        out.push(feature);
    }
    if out.is_empty() {
        return Err(Error::EmptyHeader);
    }
    Ok(out)
}

/// Deterministically masks `max(1, round(fraction * known cells))` known
/// values, returning the masked dataset and the ground truth.
pub fn mask_values(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Vec<MaskedCell>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("mask fraction {fraction} is outside (0, 1)")));
    }
    let known: Vec<(usize, usize)> = ds
        .cases
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| c.known_features().into_iter().map(move |f| (ci, f)))
        .collect();
    if known.is_empty() {
        return Err(Error::invalid("dataset has no known values to mask"));
    }
    let count = ((fraction * known.len() as f64).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, known.len(), count).into_vec();
    picked.sort_unstable();

    let mut out = ds.clone();
    let mut cells = Vec::with_capacity(count);
    for idx in picked {
        let (ci, f) = known[idx];
        let value = out.cases[ci].values[f].take().expect("known cell");
        cells.push(MaskedCell {
            case_index: ci,
            feature: f,
            value,
        });
    }
    Ok((out, cells))
}

/// Convenience index from feature name to position.
pub fn name_index(schema: &[FeatureSchema]) -> HashMap<&str, usize> {
    schema.iter().enumerate().map(|(i, f)| (f.name.as_str(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab_schema() -> Vec<FeatureSchema> {
        vec![FeatureSchema::continuous("a"), FeatureSchema::nominal("b")]
    }

    #[test]
    fn empty_field_is_missing() {
        let ds = parse_table("a,b\n1.5,x\n2.0,\n", ab_schema(), b',').unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.cases()[0].values, vec![Some(1.5), Some(0.0)]);
        assert_eq!(ds.cases()[1].values, vec![Some(2.0), None]);
        assert_eq!(ds.cases()[1].id, 1);
        assert_eq!(ds.cases()[1].origin, Origin::Observed);
    }

    #[test]
    fn question_mark_is_missing() {
        let ds = parse_table("a,b\n?,x\n", ab_schema(), b',').unwrap();
        assert_eq!(ds.cases()[0].values[0], None);
    }

    #[test]
    fn header_only_gives_empty_dataset() {
        let ds = parse_table("a,b\n", ab_schema(), b',').unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn ordinal_token_maps_to_level_index() {
        let schema = vec![FeatureSchema::ordinal("size", ["low", "mid", "high"])];
        let ds = parse_table("size\nmid\n", schema, b',').unwrap();
        assert_eq!(ds.cases()[0].values[0], Some(1.0));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_table("a,zzz\n1,2\n", ab_schema(), b','),
            Err(Error::UnknownColumn(c)) if c == "zzz"
        ));
        assert!(matches!(
            parse_table("a,b\nnope,x\n", ab_schema(), b','),
            Err(Error::Parse { line: 2, .. })
        ));
        let schema = vec![FeatureSchema::ordinal("size", ["low", "high"])];
        assert!(parse_table("size\nmid\n", schema, b',').is_err());
        assert!(matches!(
            parse_table("a\n1\n", ab_schema(), b','),
            Err(Error::MissingColumn(c)) if c == "b"
        ));
    }

    #[test]
    fn nominal_symbols_are_open_set() {
        let text: String = std::iter::once("a,b\n".to_string())
            .chain((0..500).map(|i| format!("{i},s{i}\n")))
            .collect();
        let ds = parse_table(&text, ab_schema(), b',').unwrap();
        assert_eq!(ds.symbols(1).len(), 500);
    }

    #[test]
    fn tab_delimiter_and_metadata_columns() {
        let text = "a\tb\torigin\tsession\n1\tx\timputed\tg7\n";
        let ds = parse_table(text, ab_schema(), b'\t').unwrap();
        assert_eq!(ds.cases()[0].origin, Origin::Imputed);
        assert_eq!(ds.cases()[0].session.as_deref(), Some("g7"));
    }

    #[test]
    fn infer_schema_decision_table() {
        // Every (numeric, symbolic, missing) token-set combination.
        let cases: [(&[&str], FeatureKind); 6] = [
            (&["1", "2.5", ""], FeatureKind::Continuous),
            (&["red", "blue"], FeatureKind::Nominal),
            (&["1", "red"], FeatureKind::Nominal),
            (&["", "?"], FeatureKind::Continuous),
            (&["?", "red"], FeatureKind::Nominal),
            (&["1e3", "-4"], FeatureKind::Continuous),
        ];
        for (tokens, expected) in cases {
            let text: String = std::iter::once("c\n".to_string())
                .chain(tokens.iter().map(|t| format!("{t}\n")))
                .collect();
            let schema = infer_schema(&text, b',').unwrap();
            assert_eq!(schema[0].kind, expected, "tokens {tokens:?}");
        }
    }

    #[test]
    fn infer_schema_uniform_weights_and_empty_header() {
        let schema = infer_schema("x,y,z,origin\n1,a,2,observed\n", b',').unwrap();
        assert_eq!(schema.len(), 3);
        assert!(schema.iter().all(|f| (f.weight - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(infer_schema("\n", b','), Err(Error::EmptyHeader)));
    }

    #[test]
    fn schema_file_round() {
        let text = "# comment\ntemp continuous [0,50] 2\ncolour nominal\nsize ordinal s,m,l\nhour cyclic 24 0.5\n";
        let schema = parse_schema_file(text).unwrap();
        assert_eq!(schema.len(), 4);
        assert_eq!(schema[0].bounds, Some((0.0, 50.0)));
        assert_eq!(schema[0].weight, 2.0);
        assert_eq!(schema[3].kind, FeatureKind::Cyclic { period: 24.0 });
        assert!(parse_schema_file("x ordinal a,a\n").is_err());
        assert!(parse_schema_file("x cyclic -1\n").is_err());
        assert!(parse_schema_file("x blob\n").is_err());
    }

    #[test]
    fn mask_counts() {
        let rows: Vec<Vec<CaseValue>> = (0..10)
            .map(|i| (0..10).map(|j| Some((i * 10 + j) as f64)).collect())
            .collect();
        let schema = (0..10).map(|j| FeatureSchema::continuous(format!("f{j}"))).collect();
        let ds = Dataset::from_rows(schema, rows).unwrap();
        let (masked, cells) = mask_values(&ds, 0.1, 7).unwrap();
        assert_eq!(cells.len(), 10);
        assert_eq!(masked.missing_count(), 10);
        for c in &cells {
            assert_eq!(ds.cases()[c.case_index].values[c.feature], Some(c.value));
        }
        let (_, again) = mask_values(&ds, 0.1, 7).unwrap();
        assert_eq!(cells, again);
        let (_, tiny) = mask_values(&ds, 1e-9, 7).unwrap();
        assert_eq!(tiny.len(), 1);
        assert!(mask_values(&ds, 0.0, 1).is_err());
        assert!(mask_values(&ds, 1.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn continuous_round_trip_is_bit_exact(values in prop::collection::vec(-1e12f64..1e12, 1..40)) {
            let rows = values.iter().map(|v| vec![Some(*v), Some(v * 1e-7)]).collect();
            let schema = vec![FeatureSchema::continuous("a"), FeatureSchema::continuous("b")];
            let ds = Dataset::from_rows(schema.clone(), rows).unwrap();
            let text = write_table(&ds, b',', false);
            let back = parse_table(&text, schema, b',').unwrap();
            for (x, y) in ds.cases().iter().zip(back.cases()) {
                for (a, b) in x.values.iter().zip(&y.values) {
                    prop_assert_eq!(a.unwrap().to_bits(), b.unwrap().to_bits());
                }
            }
        }

        #[test]
        fn weight_normalization_is_idempotent(weights in prop::collection::vec(0.01f64..100.0, 1..10)) {
            let mut schema: Vec<FeatureSchema> = weights
                .iter()
                .enumerate()
                .map(|(i, w)| FeatureSchema::continuous(format!("f{i}")).with_weight(*w))
                .collect();
            normalize_weights(&mut schema);
            let once: Vec<f64> = schema.iter().map(|f| f.weight).collect();
            normalize_weights(&mut schema);
            for (a, f) in once.iter().zip(&schema) {
                prop_assert!((a - f.weight).abs() < 1e-15);
            }
            let total: f64 = once.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
