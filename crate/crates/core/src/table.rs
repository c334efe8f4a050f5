//! Column tables written as CSV with a `name [unit]` header row.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

/// A rectangular numeric table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Table {
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Shortest round-trip float formatting keeps output byte-deterministic.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let header: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{} [{}]", c.name, c.unit))
            .collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v:e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty CSV".into()))?;
        let columns = header
            .split(',')
            .map(|h| {
                let h = h.trim();
                match (h.find(" ["), h.ends_with(']')) {
                    (Some(i), true) => Column {
                        name: h[..i].to_string(),
                        unit: h[i + 2..h.len() - 1].to_string(),
                    },
                    _ => Column {
                        name: h.to_string(),
                        unit: String::new(),
                    },
                }
            })
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for (ln, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("row {}: cannot parse `{v}`", ln + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(Error::Config(format!("row {} has wrong width", ln + 2)));
            }
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }
}
