//! Multivariate time series on a unit-spaced integer time grid.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{EwsError, Result};

/// A `T × D` block of abundances indexed by consecutive integer times.
///
/// Storage is column-major, so each feature is a contiguous slice (see
/// [`MultiSeries::feature`]).
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSeries {
    values: DMatrix<f64>,
    times: Vec<i64>,
    feature_names: Option<Vec<String>>,
}

impl MultiSeries {
    pub fn new(values: DMatrix<f64>, times: Vec<i64>) -> Result<Self> {
        let (t, d) = values.shape();
        if t < 2 {
            return Err(EwsError::invalid(format!("series needs at least 2 time points, got {t}")));
        }
        if d < 1 {
            return Err(EwsError::invalid("series needs at least one feature"));
        }
        if times.len() != t {
            return Err(EwsError::invalid(format!(
                "{} time stamps for {t} rows",
                times.len()
            )));
        }
        for w in times.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(EwsError::invalid(format!(
                    "time grid must be consecutive integers, found {} after {}",
                    w[1], w[0]
                )));
            }
        }
        if let Some((i, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(EwsError::invalid(format!(
                "non-finite value at row {}, feature {}",
                i % t,
                i / t
            )));
        }
        Ok(Self {
            values,
            times,
            feature_names: None,
        })
    }

    /// Times `start, start + 1, ...`.
    pub fn from_values(values: DMatrix<f64>, start: i64) -> Result<Self> {
        let times = (0..values.nrows() as i64).map(|k| start + k).collect();
        Self::new(values, times)
    }

    /// Build from per-feature columns sharing a time grid starting at `start`.
    pub fn from_columns(columns: &[Vec<f64>], start: i64) -> Result<Self> {
        let d = columns.len();
        if d == 0 {
            return Err(EwsError::invalid("series needs at least one feature"));
        }
        let t = columns[0].len();
        if columns.iter().any(|c| c.len() != t) {
            return Err(EwsError::invalid("feature columns differ in length"));
        }
        let values = DMatrix::from_fn(t, d, |i, j| columns[j][i]);
        Self::from_values(values, start)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(EwsError::invalid(format!(
                "{} feature names for {} features",
                names.len(),
                self.dim()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn feature(&self, d: usize) -> &[f64] {
        let t = self.len();
        &self.values.as_slice()[d * t..(d + 1) * t]
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Name of feature `d`, falling back to `f{d+1}`.
    pub fn feature_name(&self, d: usize) -> String {
        match &self.feature_names {
            Some(names) => names[d].clone(),
            None => format!("f{}", d + 1),
        }
    }

    /// Rows `start..start + len`, keeping times and names.
    pub fn rows(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(EwsError::invalid(format!(
                "row range {start}..{} exceeds series length {}",
                start + len,
                self.len()
            )));
        }
        let values = self.values.rows(start, len).into_owned();
        let times = self.times[start..start + len].to_vec();
        let mut out = Self::new(values, times)?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend((0..self.dim()).map(|d| self.feature_name(d)));
        w.write_record(&header).map_err(csv_err)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = Vec::with_capacity(self.dim() + 1);
            row.push(t.to_string());
            row.extend(self.values.row(i).iter().map(|v| format!("{v}")));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| EwsError::io("<csv writer>", e))?;
        Ok(())
    }

    /// Parse `time,f1,...,fD`. Errors carry 1-based line numbers.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.is_empty() || header.iter().all(str::is_empty) {
            return Err(EwsError::Parse {
                line: 1,
                message: "no data rows".into(),
            });
        }
        if header.len() < 2 {
            return Err(EwsError::Parse {
                line: 1,
                message: "header must be `time,f1,...,fD` with at least one feature".into(),
            });
        }
        if !header[0].eq_ignore_ascii_case("time") {
            return Err(EwsError::Parse {
                line: 1,
                message: format!("first column must be `time`, found `{}`", &header[0]),
            });
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let d = names.len();

        let mut times: Vec<i64> = Vec::new();
        let mut rows: Vec<f64> = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != d + 1 {
                return Err(EwsError::Parse {
                    line,
                    message: format!("expected {} fields, found {}", d + 1, record.len()),
                });
            }
            let t: i64 = record[0].parse().map_err(|_| EwsError::Parse {
                line,
                message: format!("time `{}` is not an integer", &record[0]),
            })?;
            if let Some(&prev) = times.last() {
                if t <= prev {
                    return Err(EwsError::Parse {
                        line,
                        message: format!("time column not increasing: {t} after {prev}"),
                    });
                }
                if t != prev + 1 {
                    return Err(EwsError::Parse {
                        line,
                        message: format!("time grid must have unit spacing: {t} after {prev}"),
                    });
                }
            }
            times.push(t);
            for (j, field) in record.iter().skip(1).enumerate() {
                let v: f64 = field.parse().map_err(|_| EwsError::Parse {
                    line,
                    message: format!("value `{field}` in column {} is not a number", j + 2),
                })?;
                if !v.is_finite() {
                    return Err(EwsError::Parse {
                        line,
                        message: format!("non-finite value in column {}", j + 2),
                    });
                }
                rows.push(v);
            }
        }
        if times.is_empty() {
            return Err(EwsError::Parse {
                line: 2,
                message: "no data rows".into(),
            });
        }
        if times.len() < 2 {
            return Err(EwsError::Parse {
                line: 2,
                message: "series needs at least 2 data rows".into(),
            });
        }
        let values = DMatrix::from_row_slice(times.len(), d, &rows);
        Self::new(values, times)?.with_feature_names(names)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| EwsError::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| EwsError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_err(e: csv::Error) -> EwsError {
    let line = e.position().map_or(0, |p| p.line());
    EwsError::Parse {
        line,
        message: e.to_string(),
    }
}
