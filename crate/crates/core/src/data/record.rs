use std::io::BufRead;
use std::path::Path;

use crate::data::Schema;
use crate::error::{Error, Result};

/// One unparsed line of a data file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRecord {
    pub label: String,
    /// One entry per schema field; the empty string marks a missing value.
    pub values: Vec<String>,
}

impl RawRecord {
    pub fn new<S: Into<String>>(label: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Self {
            label: label.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn to_line(&self) -> String {
        let mut line = self.label.clone();
        for v in &self.values {
            line.push('\t');
            line.push_str(v);
        }
        line
    }
}

/// Parses tab-separated lines: label first, then one column per schema field.
pub fn parse_records(reader: impl BufRead, schema: &Schema) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::data(format!("line {}: {e}", lineno + 1)))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let label = cols.next().unwrap_or_default().to_string();
        let values: Vec<String> = cols.map(str::to_string).collect();
        if values.len() != schema.len() {
            return Err(Error::data(format!(
                "line {}: expected {} feature columns, found {}",
                lineno + 1,
                schema.len(),
                values.len()
            )));
        }
        out.push(RawRecord { label, values });
    }
    Ok(out)
}

pub fn read_records(path: &Path, schema: &Schema) -> Result<Vec<RawRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(std::io::BufReader::new(file), schema)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn write_records(path: &Path, records: &[RawRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_line());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FieldKind;

    #[test]
    fn parses_lines_and_missing_values() {
        let schema = Schema::from_kinds([("a", FieldKind::Categorical), ("b", FieldKind::Numerical)]).unwrap();
        let recs = parse_records("1\tx\t2.5\n0\t\t\n".as_bytes(), &schema).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0], RawRecord::new("1", ["x", "2.5"]));
        assert_eq!(recs[1].values, vec!["", ""]);
        assert_eq!(recs[0].to_line(), "1\tx\t2.5");
    }

    #[test]
    fn wrong_column_count_names_line() {
        let schema = Schema::from_kinds([("a", FieldKind::Categorical)]).unwrap();
        let err = parse_records("1\tx\n1\tx\ty\n".as_bytes(), &schema).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
