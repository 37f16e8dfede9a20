//! CSV ingestion into a typed dataset.

use std::io::Read;

use dmr::{ColumnData, ColumnSpec, Dataset, DmrError};

use crate::error::{CliError, Result};
use crate::schema::Schema;

/// Raw CSV contents with the file line on which each record starts.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub lines: Vec<u64>,
}

impl Table {
    pub fn read<R: Read>(reader: R) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::input(format!("line 1: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        for (i, h) in headers.iter().enumerate() {
            if h.is_empty() {
                return Err(CliError::input(format!(
                    "line 1: column {} has an empty name",
                    i + 1
                )));
            }
            if headers[..i].contains(h) {
                return Err(CliError::input(format!("line 1: duplicate column {h:?}")));
            }
        }
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                CliError::input(format!("line {line}: {e}"))
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            rows.push(record.iter().map(str::to_string).collect());
            lines.push(line);
        }
        Ok(Table {
            headers,
            rows,
            lines,
        })
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (u64, &str)> {
        self.rows
            .iter()
            .zip(&self.lines)
            .map(move |(r, &l)| (l, r[j].as_str()))
    }

    /// Builds the dataset and column specs: response, then every other
    /// column in header order as a factor (if declared) or continuous.
    pub fn to_dataset(&self, schema: &Schema) -> Result<(Dataset, Vec<ColumnSpec>)> {
        for name in std::iter::once(&schema.response).chain(schema.factors.iter().map(|f| &f.name))
        {
            if !self.headers.contains(name) {
                return Err(CliError::input(format!(
                    "line 1: column {name:?} not found in header"
                )));
            }
        }
        let mut data = Dataset::new();
        let mut specs = Vec::with_capacity(self.headers.len());
        for (j, name) in self.headers.iter().enumerate() {
            if let Some(decl) = schema.factor(name) {
                let mut values = Vec::with_capacity(self.rows.len());
                for (line, v) in self.column(j) {
                    if v.is_empty() {
                        return Err(CliError::input(format!(
                            "line {line}: missing value in column {name:?}"
                        )));
                    }
                    values.push(v.to_string());
                }
                let levels = match &decl.levels {
                    Some(levels) => levels.clone(),
                    None => {
                        let mut seen: Vec<String> = Vec::new();
                        for v in &values {
                            if !seen.contains(v) {
                                seen.push(v.clone());
                            }
                        }
                        seen
                    }
                };
                data.push(name.clone(), ColumnData::Categorical(values));
                specs.push(ColumnSpec::factor(name.clone(), levels));
            } else {
                let mut values = Vec::with_capacity(self.rows.len());
                for (line, v) in self.column(j) {
                    let t = v.trim();
                    if t.is_empty() {
                        return Err(CliError::input(format!(
                            "line {line}: missing value in column {name:?}"
                        )));
                    }
                    let x: f64 = t.parse().map_err(|_| {
                        CliError::input(format!(
                            "line {line}: column {name:?}: cannot parse {v:?} as a number"
                        ))
                    })?;
                    if !x.is_finite() {
                        return Err(CliError::input(format!(
                            "line {line}: column {name:?}: non-finite value {v:?}"
                        )));
                    }
                    values.push(x);
                }
                data.push(name.clone(), ColumnData::Numeric(values));
                specs.push(if *name == schema.response {
                    ColumnSpec::response(name.clone())
                } else {
                    ColumnSpec::continuous(name.clone())
                });
            }
        }
        Ok((data, specs))
    }

    /// Rewrites errors that point at a data row to name its file line.
    pub fn locate(&self, e: DmrError) -> CliError {
        match e {
            DmrError::UnknownLevel { column, level, row } => CliError::input(format!(
                "line {}: unknown level {level:?} in factor column {column:?} (data row {})",
                self.lines.get(row).copied().unwrap_or(0),
                row + 1
            )),
            other => other.into(),
        }
    }
}
