//! Date-indexed feature tables.

use std::io::Write;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complete (no missing values) feature matrix, one row per date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub values: Array2<f64>,
    /// Rows removed upstream because some feature was missing.
    pub dropped_rows: usize,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, dates: Vec<NaiveDate>, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != dates.len() || values.ncols() != names.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} values for {} dates and {} names",
                values.nrows(),
                values.ncols(),
                dates.len(),
                names.len()
            )));
        }
        Ok(Self {
            names,
            dates,
            values,
            dropped_rows: 0,
        })
    }

    /// Keeps the rows where every field is present.
    pub fn from_optional_rows(
        names: Vec<String>,
        rows: impl IntoIterator<Item = (NaiveDate, Vec<Option<f64>>)>,
    ) -> Result<Self> {
        let n_cols = names.len();
        let mut dates = Vec::new();
        let mut flat = Vec::new();
        let mut dropped = 0;
        for (date, row) in rows {
            if row.len() != n_cols {
                return Err(Error::ShapeMismatch(format!(
                    "row for {date} has {} fields, expected {n_cols}",
                    row.len()
                )));
            }
            if row.iter().all(Option::is_some) {
                dates.push(date);
                flat.extend(row.into_iter().flatten());
            } else {
                dropped += 1;
            }
        }
        let values = Array2::from_shape_vec((dates.len(), n_cols), flat)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let mut m = Self::new(names, dates, values)?;
        m.dropped_rows = dropped;
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<ArrayView1<'_, f64>> {
        self.column_index(name).map(|j| self.values.column(j))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            dates: rows.iter().map(|&i| self.dates[i]).collect(),
            values: self.values.select(Axis(0), rows),
            dropped_rows: 0,
        }
    }

    pub fn select_columns(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::InvalidInput(format!("no column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            dates: self.dates.clone(),
            values: self.values.select(Axis(1), &idx),
            dropped_rows: self.dropped_rows,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows = self
            .dates
            .iter()
            .zip(self.values.rows())
            .map(|(d, r)| (*d, r.iter().map(|v| Some(*v)).collect::<Vec<_>>()));
        write_table_csv(out, &self.names, rows)
    }
}

/// `date,<names...>` with missing values rendered as empty fields.
pub fn write_table_csv<W: Write>(
    out: W,
    names: &[String],
    rows: impl IntoIterator<Item = (NaiveDate, Vec<Option<f64>>)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["date".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (date, row) in rows {
        let mut rec = vec![date.to_string()];
        rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_incomplete_rows_and_exports() {
        let d = |k| NaiveDate::from_ymd_opt(2024, 1, k).unwrap();
        let m = FeatureMatrix::from_optional_rows(
            vec!["a".into(), "b".into()],
            vec![
                (d(2), vec![Some(1.0), None]),
                (d(3), vec![Some(2.0), Some(0.5)]),
            ],
        )
        .unwrap();
        assert_eq!(m.n_rows(), 1);
        assert_eq!(m.dropped_rows, 1);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "date,a,b\n2024-01-03,2,0.5\n");

        let mut buf = Vec::new();
        write_table_csv(&mut buf, &["x".into()], vec![(d(2), vec![None])]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "date,x\n2024-01-02,\n");
    }
}
