use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Categorical,
    Numerical,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Categorical => "cat",
            FieldKind::Numerical => "num",
        }
    }
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cat" => Ok(FieldKind::Categorical),
            "num" => Ok(FieldKind::Numerical),
            other => Err(Error::data(format!(
                "unknown field kind `{other}` (expected `cat` or `num`)"
            ))),
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldSchema {
    pub name: String,
    pub kind: FieldKind,
    /// Column index among the feature columns (the label column is not counted).
    pub position: usize,
}

/// Ordered list of fields, one per feature column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    fields: Vec<FieldSchema>,
}

impl Schema {
    pub fn new(fields: Vec<FieldSchema>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::data("schema declares no fields"));
        }
        let mut names = HashSet::new();
        for (i, field) in fields.iter().enumerate() {
            if field.name.is_empty() || field.name.contains(['\t', '\n']) {
                return Err(Error::data(format!("invalid field name {:?}", field.name)));
            }
            if !names.insert(field.name.as_str()) {
                return Err(Error::data(format!("duplicate field name `{}`", field.name)));
            }
            if field.position != i {
                return Err(Error::data(format!(
                    "field `{}` has position {} but positions must be dense and ordered (expected {i})",
                    field.name, field.position
                )));
            }
        }
        Ok(Self { fields })
    }

    /// Convenience constructor assigning positions in order.
    pub fn from_kinds<S: Into<String>>(fields: impl IntoIterator<Item = (S, FieldKind)>) -> Result<Self> {
        Self::new(
            fields
                .into_iter()
                .enumerate()
                .map(|(position, (name, kind))| FieldSchema {
                    name: name.into(),
                    kind,
                    position,
                })
                .collect(),
        )
    }

    /// Parses `name<TAB>kind` lines in column order. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(name), Some(kind), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::data(format!(
                    "schema line {}: expected `name<TAB>kind`, got {line:?}",
                    lineno + 1
                )));
            };
            let kind = kind
                .parse()
                .map_err(|e| Error::data(format!("schema line {}: {e}", lineno + 1)))?;
            fields.push(FieldSchema {
                name: name.to_string(),
                kind,
                position: fields.len(),
            });
        }
        Self::new(fields)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.fields
            .iter()
            .map(|f| format!("{}\t{}\n", f.name, f.kind))
            .collect()
    }

    pub fn fields(&self) -> &[FieldSchema] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, i: usize) -> &FieldSchema {
        &self.fields[i]
    }

    pub fn names(&self) -> Vec<&str> {
        self.fields.iter().map(|f| f.name.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_schema_file() {
        let s = Schema::parse("age\tnum\ngender\tcat\n\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.field(0).kind, FieldKind::Numerical);
        assert_eq!(s.field(1).name, "gender");
        assert_eq!(s.field(1).position, 1);
        assert_eq!(Schema::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn rejects_duplicates_and_bad_kinds() {
        assert!(Schema::parse("a\tcat\na\tnum\n").is_err());
        assert!(Schema::parse("a\tfloat\n").is_err());
        assert!(Schema::parse("a cat\n").is_err());
        assert!(Schema::parse("").is_err());
    }

    #[test]
    fn positions_must_be_dense() {
        let fields = vec![FieldSchema {
            name: "a".into(),
            kind: FieldKind::Categorical,
            position: 1,
        }];
        assert!(Schema::new(fields).is_err());
    }
}
