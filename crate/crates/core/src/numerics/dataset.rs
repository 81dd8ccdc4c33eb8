use std::io::Write;

use crate::error::{Error, Result};

/// Row-major feature matrix with one real label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    d: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, d: usize, labels: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if features.len() != labels.len() * d {
            return Err(Error::invalid(format!(
                "feature matrix has {} entries, expected {} rows x {} columns",
                features.len(),
                labels.len(),
                d
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature at row {}, column {}",
                i / d,
                i % d
            )));
        }
        if let Some(i) = labels.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite label at row {i}")));
        }
        Ok(Dataset { features, labels, d })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(1);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("rows have inconsistent lengths"));
        }
        Self::new(rows.concat(), d, labels)
    }

    pub fn empty(d: usize) -> Self {
        Dataset {
            features: Vec::new(),
            labels: Vec::new(),
            d: d.max(1),
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.d)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Dataset> {
        if columns.is_empty() {
            return Err(Error::invalid("column selection is empty"));
        }
        if let Some(&c) = columns.iter().find(|&&c| c >= self.d) {
            return Err(Error::invalid(format!(
                "column {c} out of range for {} features",
                self.d
            )));
        }
        let features = self
            .rows()
            .flat_map(|r| columns.iter().map(move |&c| r[c]))
            .collect();
        Ok(Dataset {
            features,
            labels: self.labels.clone(),
            d: columns.len(),
        })
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            d: self.d,
        }
    }

    /// Row-wise concatenation in the given order.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let d = parts.first().map(|p| p.d).unwrap_or(1);
        if parts.iter().any(|p| p.d != d) {
            return Err(Error::invalid("cannot concatenate datasets of different widths"));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            features.extend_from_slice(&p.features);
            labels.extend_from_slice(&p.labels);
        }
        Ok(Dataset { features, labels, d })
    }

    /// CSV with header `x1,...,xd,y`, rows in storage order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.d)
            .map(|j| format!("x{j}"))
            .chain(std::iter::once("y".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (row, y) in self.rows().zip(&self.labels) {
            let cells: Vec<String> = row.iter().chain(std::iter::once(y)).map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(input: R) -> Result<Dataset> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset CSV".into()))??;
        let cols = header.split(',').count();
        if cols < 2 || header.split(',').last() != Some("y") {
            return Err(Error::Parse(format!("unexpected dataset header `{header}`")));
        }
        let d = cols - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            if vals.len() != cols {
                return Err(Error::Parse(format!(
                    "line {}: expected {cols} cells, got {}",
                    lineno + 2,
                    vals.len()
                )));
            }
            features.extend_from_slice(&vals[..d]);
            labels.push(vals[d]);
        }
        Dataset::new(features, d, labels)
    }
}
