//! Per-field token vocabularies and numerical standardization statistics.
//!
//! Categorical fields reserve index 0 for out-of-vocabulary and missing
//! tokens; known tokens take `1..cardinality`. Numerical fields have a single
//! embedding row (index 0) and carry the train-split mean and population
//! standard deviation used for standardization.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::data::{FieldKind, RawRecord, Schema};
use crate::error::{Error, Result};

pub const OOV_INDEX: usize = 0;
const STD_FLOOR: f64 = 1e-12;
const VOCAB_HEADER: &str = "contextnet-vocab\tv1";

#[derive(Clone, Debug, PartialEq)]
pub enum FieldVocab {
    Categorical {
        /// `tokens[i - 1]` is the token with index `i`.
        tokens: Vec<String>,
        lookup: HashMap<String, usize>,
    },
    Numerical {
        mean: f64,
        std: f64,
    },
}

impl FieldVocab {
    fn categorical(tokens: Vec<String>) -> Self {
        let lookup = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + 1))
            .collect();
        FieldVocab::Categorical { tokens, lookup }
    }

    /// Number of embedding rows this field needs.
    pub fn cardinality(&self) -> usize {
        match self {
            FieldVocab::Categorical { tokens, .. } => tokens.len() + 1,
            FieldVocab::Numerical { .. } => 1,
        }
    }

    pub fn kind(&self) -> FieldKind {
        match self {
            FieldVocab::Categorical { .. } => FieldKind::Categorical,
            FieldVocab::Numerical { .. } => FieldKind::Numerical,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    names: Vec<String>,
    fields: Vec<FieldVocab>,
}

/// Index/value form of one instance, in schema field order.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInstance {
    pub label: f64,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Vocabulary {
    /// Builds vocabularies from the training split only.
    ///
    /// Tokens seen at least `min_count` times get an index; indices are
    /// assigned in lexicographic token order so the result does not depend
    /// on record order.
    pub fn build(train: &[RawRecord], schema: &Schema, min_count: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::data("cannot build a vocabulary from an empty training set"));
        }
        let mut fields = Vec::with_capacity(schema.len());
        for field in schema.fields() {
            let col = field.position;
            let vocab = match field.kind {
                FieldKind::Categorical => {
                    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                    for r in train {
                        let tok = column(r, col)?;
                        if !tok.is_empty() {
                            *counts.entry(tok).or_default() += 1;
                        }
                    }
                    let tokens = counts
                        .into_iter()
                        .filter(|&(_, c)| c >= min_count.max(1))
                        .map(|(t, _)| t.to_string())
                        .collect();
                    FieldVocab::categorical(tokens)
                }
                FieldKind::Numerical => {
                    let mut sum = 0.0;
                    let mut n = 0usize;
                    let mut xs = Vec::new();
                    for (row, r) in train.iter().enumerate() {
                        let tok = column(r, col)?;
                        if tok.is_empty() {
                            continue;
                        }
                        let x = parse_numeric(tok, row, &field.name)?;
                        sum += x;
                        n += 1;
                        xs.push(x);
                    }
                    let (mean, std) = if n == 0 {
                        (0.0, 1.0)
                    } else {
                        let mean = sum / n as f64;
                        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
                        (mean, var.sqrt())
                    };
                    FieldVocab::Numerical { mean, std }
                }
            };
            fields.push(vocab);
        }
        Ok(Self {
            names: schema.names().into_iter().map(str::to_string).collect(),
            fields,
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, i: usize) -> &FieldVocab {
        &self.fields[i]
    }

    pub fn field_name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.fields.iter().map(FieldVocab::cardinality).collect()
    }

    /// Index for `token` in categorical field `field`; OOV when unknown.
    pub fn index_of(&self, field: usize, token: &str) -> usize {
        match &self.fields[field] {
            FieldVocab::Categorical { lookup, .. } => lookup.get(token).copied().unwrap_or(OOV_INDEX),
            FieldVocab::Numerical { .. } => 0,
        }
    }

    /// Token text for an index; `None` for OOV and for numerical fields.
    pub fn token(&self, field: usize, index: usize) -> Option<&str> {
        match &self.fields[field] {
            FieldVocab::Categorical { tokens, .. } if index >= 1 => tokens.get(index - 1).map(String::as_str),
            _ => None,
        }
    }

    /// Human-readable label for a feature key.
    pub fn describe(&self, field: usize, index: usize) -> String {
        match &self.fields[field] {
            FieldVocab::Numerical { .. } => self.names[field].clone(),
            FieldVocab::Categorical { .. } => match self.token(field, index) {
                Some(tok) => format!("{}={tok}", self.names[field]),
                None => format!("{}=<oov>", self.names[field]),
            },
        }
    }

    /// Checks that this vocabulary was built for `schema`.
    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        if schema.len() != self.len() {
            return Err(Error::data(format!(
                "vocabulary has {} fields but schema declares {}",
                self.len(),
                schema.len()
            )));
        }
        for (i, f) in schema.fields().iter().enumerate() {
            if f.name != self.names[i] || f.kind != self.fields[i].kind() {
                return Err(Error::data(format!(
                    "schema field {i} is `{}` ({}) but vocabulary has `{}` ({})",
                    f.name,
                    f.kind,
                    self.names[i],
                    self.fields[i].kind()
                )));
            }
        }
        Ok(())
    }

    pub fn encode(&self, record: &RawRecord) -> Result<EncodedInstance> {
        if record.values.len() != self.len() {
            return Err(Error::data(format!(
                "record has {} feature columns, vocabulary expects {}",
                record.values.len(),
                self.len()
            )));
        }
        let label = match record.label.trim() {
            "0" => 0.0,
            "1" => 1.0,
            other => return Err(Error::data(format!("malformed label {other:?} (expected 0 or 1)"))),
        };
        let mut indices = Vec::with_capacity(self.len());
        let mut values = Vec::with_capacity(self.len());
        for (i, (vocab, tok)) in self.fields.iter().zip(&record.values).enumerate() {
            match vocab {
                FieldVocab::Categorical { lookup, .. } => {
                    indices.push(lookup.get(tok.as_str()).copied().unwrap_or(OOV_INDEX));
                    values.push(1.0);
                }
                FieldVocab::Numerical { mean, std } => {
                    indices.push(0);
                    if tok.is_empty() {
                        values.push(0.0);
                    } else {
                        let x: f64 = tok.trim().parse().map_err(|_| {
                            Error::data(format!(
                                "field `{}`: non-numeric value {tok:?}",
                                self.names[i]
                            ))
                        })?;
                        values.push((x - mean) / std.max(STD_FLOOR));
                    }
                }
            }
        }
        Ok(EncodedInstance {
            label,
            indices,
            values,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{VOCAB_HEADER}");
        let _ = writeln!(out, "[fields]");
        for (name, f) in self.names.iter().zip(&self.fields) {
            let _ = writeln!(out, "{name}\t{}\t{}", f.kind(), f.cardinality());
        }
        let _ = writeln!(out, "[categorical]");
        for (name, f) in self.names.iter().zip(&self.fields) {
            if let FieldVocab::Categorical { tokens, .. } = f {
                for (i, tok) in tokens.iter().enumerate() {
                    let _ = writeln!(out, "{name}\t{tok}\t{}", i + 1);
                }
            }
        }
        let _ = writeln!(out, "[numerical]");
        for (name, f) in self.names.iter().zip(&self.fields) {
            if let FieldVocab::Numerical { mean, std } = f {
                let _ = writeln!(out, "{name}\t{mean:?}\t{std:?}");
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == VOCAB_HEADER => {}
            _ => return Err(Error::data(format!("vocabulary file must start with `{VOCAB_HEADER}`"))),
        }
        let bad = |n: usize, l: &str| Error::data(format!("vocabulary line {}: malformed {l:?}", n + 1));

        #[derive(PartialEq)]
        enum Section {
            None,
            Fields,
            Categorical,
            Numerical,
        }
        let mut section = Section::None;
        let mut names: Vec<String> = Vec::new();
        let mut kinds: Vec<(FieldKind, usize)> = Vec::new();
        let mut tokens: Vec<Vec<String>> = Vec::new();
        let mut stats: Vec<Option<(f64, f64)>> = Vec::new();
        let position = |names: &[String], name: &str, n: usize| {
            names
                .iter()
                .position(|x| x == name)
                .ok_or_else(|| Error::data(format!("vocabulary line {}: unknown field `{name}`", n + 1)))
        };

        for (n, line) in lines {
            match line {
                "[fields]" => section = Section::Fields,
                "[categorical]" => section = Section::Categorical,
                "[numerical]" => section = Section::Numerical,
                "" => {}
                _ => {
                    let parts: Vec<&str> = line.split('\t').collect();
                    if parts.len() != 3 {
                        return Err(bad(n, line));
                    }
                    match section {
                        Section::Fields => {
                            let kind: FieldKind = parts[1].parse()?;
                            let card: usize = parts[2].parse().map_err(|_| bad(n, line))?;
                            names.push(parts[0].to_string());
                            kinds.push((kind, card));
                            tokens.push(Vec::new());
                            stats.push(None);
                        }
                        Section::Categorical => {
                            let f = position(&names, parts[0], n)?;
                            let idx: usize = parts[2].parse().map_err(|_| bad(n, line))?;
                            if idx != tokens[f].len() + 1 {
                                return Err(Error::data(format!(
                                    "vocabulary line {}: indices for `{}` must be contiguous from 1",
                                    n + 1,
                                    parts[0]
                                )));
                            }
                            tokens[f].push(parts[1].to_string());
                        }
                        Section::Numerical => {
                            let f = position(&names, parts[0], n)?;
                            let mean: f64 = parts[1].parse().map_err(|_| bad(n, line))?;
                            let std: f64 = parts[2].parse().map_err(|_| bad(n, line))?;
                            stats[f] = Some((mean, std));
                        }
                        Section::None => return Err(bad(n, line)),
                    }
                }
            }
        }

        let mut fields = Vec::with_capacity(names.len());
        for (i, (kind, card)) in kinds.into_iter().enumerate() {
            let vocab = match kind {
                FieldKind::Categorical => FieldVocab::categorical(std::mem::take(&mut tokens[i])),
                FieldKind::Numerical => {
                    let (mean, std) = stats[i]
                        .ok_or_else(|| Error::data(format!("missing statistics for numerical field `{}`", names[i])))?;
                    FieldVocab::Numerical { mean, std }
                }
            };
            if vocab.cardinality() != card {
                return Err(Error::data(format!(
                    "field `{}` declares cardinality {card} but lists {}",
                    names[i],
                    vocab.cardinality()
                )));
            }
            fields.push(vocab);
        }
        if fields.is_empty() {
            return Err(Error::data("vocabulary declares no fields"));
        }
        Ok(Self { names, fields })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }
}

fn column(r: &RawRecord, col: usize) -> Result<&str> {
    r.values
        .get(col)
        .map(String::as_str)
        .ok_or_else(|| Error::data(format!("record is missing column {col}")))
}

fn parse_numeric(tok: &str, row: usize, field: &str) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::data(format!("row {row}, field `{field}`: non-numeric value {tok:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::from_kinds([
            ("color", FieldKind::Categorical),
            ("price", FieldKind::Numerical),
            ("shape", FieldKind::Categorical),
        ])
        .unwrap()
    }

    fn records() -> Vec<RawRecord> {
        vec![
            RawRecord::new("1", ["a", "1", "sq"]),
            RawRecord::new("0", ["a", "2", "ci"]),
            RawRecord::new("1", ["a", "3", "sq"]),
            RawRecord::new("0", ["b", "", "tri"]),
        ]
    }

    #[test]
    fn min_count_filters_rare_tokens() {
        let v = Vocabulary::build(&records(), &schema(), 2).unwrap();
        assert_eq!(v.index_of(0, "a"), 1);
        assert_eq!(v.index_of(0, "b"), OOV_INDEX);
        assert_eq!(v.field(0).cardinality(), 2);
    }

    #[test]
    fn distinct_tokens_with_min_count_one() {
        let v = Vocabulary::build(&records(), &schema(), 1).unwrap();
        assert_eq!(v.field(2).cardinality(), 3 + 1);
    }

    #[test]
    fn numerical_stats_use_population_std() {
        let v = Vocabulary::build(&records(), &schema(), 1).unwrap();
        match v.field(1) {
            FieldVocab::Numerical { mean, std } => {
                assert_eq!(*mean, 2.0);
                assert!((std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
            }
            _ => panic!("expected numerical"),
        }
    }

    #[test]
    fn build_errors() {
        assert!(Vocabulary::build(&[], &schema(), 1).is_err());
        let bad = vec![RawRecord::new("1", ["a", "oops", "sq"])];
        let err = Vocabulary::build(&bad, &schema(), 1).unwrap_err().to_string();
        assert!(err.contains("row 0") && err.contains("price"), "{err}");
    }

    #[test]
    fn encodes_hand_record() {
        let v = Vocabulary::build(&records(), &schema(), 1).unwrap();
        // sorted tokens: shape -> ci=1, sq=2, tri=3
        let e = v.encode(&RawRecord::new("1", ["a", "3", "tri"])).unwrap();
        let z = 1.0 / (2.0f64 / 3.0).sqrt();
        assert_eq!(
            e,
            EncodedInstance {
                label: 1.0,
                indices: vec![1, 0, 3],
                values: vec![1.0, z, 1.0],
            }
        );
    }

    #[test]
    fn encode_edge_cases() {
        let v = Vocabulary::build(&records(), &schema(), 1).unwrap();
        let e = v.encode(&RawRecord::new("0", ["zzz", "2", ""])).unwrap();
        assert_eq!(e.indices, vec![OOV_INDEX, 0, OOV_INDEX]);
        assert_eq!(e.values[1], 0.0);
        let e = v.encode(&RawRecord::new("0", ["a", "", "sq"])).unwrap();
        assert_eq!((e.indices[1], e.values[1]), (0, 0.0));
        assert!(v.encode(&RawRecord::new("2", ["a", "1", "sq"])).is_err());
        assert!(v.encode(&RawRecord::new("yes", ["a", "1", "sq"])).is_err());
    }

    #[test]
    fn tokens_decode_back() {
        let v = Vocabulary::build(&records(), &schema(), 1).unwrap();
        for tok in ["ci", "sq", "tri"] {
            assert_eq!(v.token(2, v.index_of(2, tok)), Some(tok));
        }
        assert_eq!(v.token(2, OOV_INDEX), None);
    }

    #[test]
    fn text_round_trip() {
        let v = Vocabulary::build(&records(), &schema(), 1).unwrap();
        let text = v.to_text();
        assert!(text.contains("shape\tsq\t2"));
        let back = Vocabulary::parse(&text).unwrap();
        assert_eq!(back, v);
        back.check_schema(&schema()).unwrap();
        assert!(Vocabulary::parse("garbage").is_err());
    }
}
