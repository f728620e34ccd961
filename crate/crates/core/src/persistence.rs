//! Versioned, digest-protected model snapshots.
//!
//! A snapshot is a UTF-8 text header, a length-prefixed little-endian
//! binary body, and a SHA-256 trailer over everything before it. Cases are
//! written in ascending id order, so serialization is canonical: saving a
//! loaded snapshot reproduces the original bytes.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::{Case, Dataset, FeatureKind, FeatureSchema, Origin};
use crate::engine::{Hyperparameters, Model, SurprisalCache};
use crate::error::{Error, Result};
use crate::metric::{ConfusionMatrix, DeviationMode, DeviationVector, MetricConfig, ResidualStatistic};

pub const MAGIC: &str = "conviction-snapshot";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_PREFIX: &[u8] = b"digest sha256 ";
const DIGEST_LINE_LEN: usize = 14 + 64 + 1;

pub fn save(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    from_bytes(&std::fs::read(path)?)
}

/// Escapes bytes that would break header tokenization as `%XX`.
fn escape(text: &str) -> String {
    let mut bytes = Vec::with_capacity(text.len());
    for b in text.bytes() {
        if b == b'%' || b == b',' || b <= b' ' || b == 0x7f {
            bytes.extend_from_slice(format!("%{b:02X}").as_bytes());
        } else {
            bytes.push(b);
        }
    }
    String::from_utf8(bytes).expect("escaping preserves UTF-8")
}

fn unescape(token: &str) -> Result<String> {
    let bytes = token.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = token
                .get(i + 1..i + 3)
                .ok_or_else(|| corrupt("truncated escape in header"))?;
            out.push(u8::from_str_radix(hex, 16).map_err(|_| corrupt("bad escape in header"))?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| corrupt("header text is not UTF-8"))
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corrupt(msg.into())
}

fn origin_code(origin: Origin) -> u8 {
    match origin {
        Origin::Observed => 0,
        Origin::Imputed => 1,
        Origin::Synthesized => 2,
    }
}

fn origin_from(code: u8) -> Result<Origin> {
    match code {
        0 => Ok(Origin::Observed),
        1 => Ok(Origin::Imputed),
        2 => Ok(Origin::Synthesized),
        other => Err(corrupt(format!("unknown origin code {other}"))),
    }
}

fn header(model: &Model) -> String {
    let ds = model.dataset();
    let params = model.params();
    let mut h = format!("{MAGIC}\nversion {FORMAT_VERSION}\n");
    h.push_str(&format!("k {}\n", params.k));
    h.push_str(&format!("p {:?}\n", params.metric.p));
    h.push_str(&format!("mode {}\n", params.metric.mode.as_str()));
    h.push_str(&format!("alpha {:?}\n", params.alpha));
    h.push_str(&format!("statistic {}\n", model.deviations().statistic.as_str()));
    h.push_str(&format!("features {}\n", ds.feature_count()));
    for f in ds.schema() {
        let mut line = format!("feature {} {} {:?}", escape(&f.name), f.kind.label(), f.weight);
        match &f.kind {
            FeatureKind::Ordinal { levels } => {
                let levels: Vec<String> = levels.iter().map(|l| escape(l)).collect();
                line.push_str(&format!(" levels {}", levels.join(",")));
            }
            FeatureKind::Cyclic { period } => line.push_str(&format!(" period {period:?}")),
            FeatureKind::Continuous | FeatureKind::Nominal => {}
        }
        if let Some((lo, hi)) = f.bounds {
            line.push_str(&format!(" bounds {lo:?} {hi:?}"));
        }
        h.push_str(&line);
        h.push('\n');
    }
    h.push_str(&format!("cases {}\n", ds.len()));
    h.push_str(&format!(
        "cache {}\n",
        if model.surprisal_cache().is_some() { "present" } else { "absent" }
    ));
    h
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

fn body(model: &Model) -> Vec<u8> {
    let ds = model.dataset();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by_key(|&i| ds.cases()[i].id);
    let mut w = Writer(Vec::new());
    for &i in &order {
        let case = &ds.cases()[i];
        w.u64(case.id);
        w.u8(origin_code(case.origin));
        match &case.session {
            Some(s) => {
                w.u8(1);
                w.str(s);
            }
            None => w.u8(0),
        }
        for v in &case.values {
            match v {
                Some(v) => {
                    w.u8(1);
                    w.f64(*v);
                }
                None => w.u8(0),
            }
        }
    }
    let dev = model.deviations();
    for &r in &dev.values {
        w.f64(r);
    }
    for &r in model.floors() {
        w.f64(r);
    }
    for m in &dev.confusion {
        match m {
            Some(m) => {
                w.u8(1);
                w.u32(m.size() as u32);
                for &p in m.probs() {
                    w.f64(p);
                }
            }
            None => w.u8(0),
        }
    }
    for f in 0..ds.feature_count() {
        let symbols = ds.symbols(f);
        w.u32(symbols.len() as u32);
        for s in symbols {
            w.str(s);
        }
    }
    if let Some(cache) = model.surprisal_cache() {
        for &i in &order {
            w.f64(cache.per_case[i]);
        }
        w.f64(cache.mean);
    }
    w.0
}

/// Serializes a model to its canonical snapshot bytes.
pub fn to_bytes(model: &Model) -> Vec<u8> {
    let body = body(model);
    let mut out = header(model).into_bytes();
    out.extend_from_slice(format!("body {}\n", body.len()).as_bytes());
    out.extend_from_slice(&body);
    let digest = hex::encode(Sha256::digest(&out));
    out.extend_from_slice(DIGEST_PREFIX);
    out.extend_from_slice(digest.as_bytes());
    out.push(b'\n');
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt("body ends early"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(corrupt(format!("bad flag byte {other}"))),
        }
    }
    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| corrupt("string is not UTF-8"))
    }
}

struct Lines<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| corrupt("header ends early"))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| corrupt("header is not UTF-8"))
    }

    /// Next line, which must be `<key> <value>`.
    fn field(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| corrupt(format!("expected `{key}` line, found `{line}`")))
    }
}

fn parse<T: std::str::FromStr>(token: &str, what: &str) -> Result<T> {
    token.parse().map_err(|_| corrupt(format!("bad {what} `{token}`")))
}

fn parse_feature(line: &str) -> Result<FeatureSchema> {
    let tokens: Vec<&str> = line.split(' ').collect();
    let [name, kind, weight, rest @ ..] = tokens.as_slice() else {
        return Err(corrupt(format!("bad feature line `{line}`")));
    };
    let name = unescape(name)?;
    let mut rest = rest;
    let kind = match *kind {
        "continuous" => FeatureKind::Continuous,
        "nominal" => FeatureKind::Nominal,
        "ordinal" => match rest {
            ["levels", levels, tail @ ..] => {
                rest = tail;
                FeatureKind::Ordinal {
                    levels: levels.split(',').map(unescape).collect::<Result<_>>()?,
                }
            }
            _ => return Err(corrupt(format!("ordinal `{name}` lacks levels"))),
        },
        "cyclic" => match rest {
            ["period", period, tail @ ..] => {
                rest = tail;
                FeatureKind::Cyclic {
                    period: parse(period, "period")?,
                }
            }
            _ => return Err(corrupt(format!("cyclic `{name}` lacks a period"))),
        },
        other => return Err(corrupt(format!("unknown kind `{other}`"))),
    };
    let mut feature = FeatureSchema::new(name, kind).with_weight(parse(weight, "weight")?);
    match rest {
        [] => {}
        ["bounds", lo, hi] => feature = feature.with_bounds(parse(lo, "bound")?, parse(hi, "bound")?),
        _ => return Err(corrupt(format!("trailing tokens in feature line `{line}`"))),
    }
    Ok(feature)
}

/// Splits off and checks the digest trailer, returning the covered bytes.
fn verify_digest(bytes: &[u8]) -> Result<&[u8]> {
    if bytes.len() < DIGEST_LINE_LEN {
        return Err(corrupt("file too short for a digest trailer"));
    }
    let (covered, trailer) = bytes.split_at(bytes.len() - DIGEST_LINE_LEN);
    let hex_digest = trailer
        .strip_prefix(DIGEST_PREFIX)
        .and_then(|t| t.strip_suffix(b"\n"))
        .ok_or_else(|| corrupt("missing digest trailer"))?;
    let expected = hex::encode(Sha256::digest(covered));
    if hex_digest != expected.as_bytes() {
        return Err(corrupt("digest mismatch"));
    }
    Ok(covered)
}

/// Parses snapshot bytes. The digest is checked before anything else, so a
/// damaged file never yields a partial model.
pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    let covered = verify_digest(bytes)?;
    let mut lines = Lines { bytes: covered, pos: 0 };
    if lines.next()? != MAGIC {
        return Err(corrupt("not a snapshot file"));
    }
    let version: u32 = parse(lines.field("version")?, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let k: usize = parse(lines.field("k")?, "k")?;
    let p: f64 = parse(lines.field("p")?, "p")?;
    let mode_text = lines.field("mode")?;
    let mode = DeviationMode::parse(mode_text).ok_or_else(|| corrupt(format!("unknown mode `{mode_text}`")))?;
    let alpha: f64 = parse(lines.field("alpha")?, "alpha")?;
    let stat_text = lines.field("statistic")?;
    let statistic =
        ResidualStatistic::parse(stat_text).ok_or_else(|| corrupt(format!("unknown statistic `{stat_text}`")))?;
    let nf: usize = parse(lines.field("features")?, "feature count")?;
    let schema = (0..nf)
        .map(|_| lines.field("feature").and_then(parse_feature))
        .collect::<Result<Vec<_>>>()?;
    let n: usize = parse(lines.field("cases")?, "case count")?;
    let has_cache = match lines.field("cache")? {
        "present" => true,
        "absent" => false,
        other => return Err(corrupt(format!("bad cache flag `{other}`"))),
    };
    let body_len: usize = parse(lines.field("body")?, "body length")?;
    if covered.len() - lines.pos != body_len {
        return Err(corrupt("body length does not match file"));
    }
    let mut r = Reader {
        bytes: &covered[lines.pos..],
        pos: 0,
    };

    let mut cases = Vec::with_capacity(n.min(body_len));
    for _ in 0..n {
        let id = r.u64()?;
        let origin = origin_from(r.u8()?)?;
        let session = if r.flag()? { Some(r.str()?) } else { None };
        let values = (0..nf)
            .map(|_| if r.flag()? { r.f64().map(Some) } else { Ok(None) })
            .collect::<Result<Vec<_>>>()?;
        cases.push(Case {
            id,
            values,
            origin,
            session,
        });
    }
    if cases.windows(2).any(|w| w[0].id >= w[1].id) {
        return Err(corrupt("cases are not in ascending id order"));
    }
    let values = (0..nf).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let floors = (0..nf).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let mut confusion = Vec::with_capacity(nf);
    for _ in 0..nf {
        confusion.push(if r.flag()? {
            let size = r.u32()? as usize;
            let cells = size.checked_mul(size).ok_or_else(|| corrupt("confusion size overflows"))?;
            let probs = (0..cells).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            Some(ConfusionMatrix::from_probs(size, probs))
        } else {
            None
        });
    }
    let mut symbols = Vec::with_capacity(nf);
    for _ in 0..nf {
        let count = r.u32()? as usize;
        symbols.push((0..count).map(|_| r.str()).collect::<Result<Vec<_>>>()?);
    }
    let cache = if has_cache {
        let per_case = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let mean = r.f64()?;
        Some(SurprisalCache { per_case, mean })
    } else {
        None
    };
    if r.pos != r.bytes.len() {
        return Err(corrupt("trailing bytes after body"));
    }

    let dataset = Dataset::from_parts(schema, symbols, cases).map_err(|e| corrupt(e.to_string()))?;
    let params = Hyperparameters {
        k,
        metric: MetricConfig { p, mode },
        alpha,
    };
    let deviations = DeviationVector {
        values,
        statistic,
        confusion,
    };
    Model::from_parts(dataset, params, deviations, floors, cache).map_err(|e| corrupt(e.to_string()))
}
