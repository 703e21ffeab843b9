//! Canonical in-memory multivariate series.
//!
//! Rows index time `t = 1..T`, columns index components `i = 1..n`. The
//! matrix is stored column-major so each component is a contiguous slice,
//! which is the access pattern of the autocovariance kernels.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries {
    values: DMatrix<f64>,
    centered: bool,
}

impl MultivariateSeries {
    /// Builds a series from a `T × n` matrix, validating shape and finiteness.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 time points, got {}",
                values.nrows()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::InsufficientData("series has no components".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::Parse {
                row: row + 1,
                col: col + 1,
                msg: "non-finite value".into(),
            });
        }
        Ok(Self {
            values,
            centered: false,
        })
    }

    /// Builds a series from row-major observations (one `Vec` per time point).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        for (idx, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::RaggedRow {
                    row: idx + 1,
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(rows.len(), n, |t, i| rows[t][i]))
    }

    /// Reads a comma-separated file, one row per time point.
    pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, has_header)
    }

    pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = None;
        for (idx, record) in rdr.records().enumerate() {
            let row = idx + 1;
            let record = record.map_err(|e| Error::Parse {
                row,
                col: 0,
                msg: e.to_string(),
            })?;
            let expected = *width.get_or_insert(record.len());
            if record.len() != expected {
                return Err(Error::RaggedRow {
                    row,
                    expected,
                    found: record.len(),
                });
            }
            let parsed = record
                .iter()
                .enumerate()
                .map(|(c, cell)| match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    Ok(_) => Err(Error::Parse {
                        row,
                        col: c + 1,
                        msg: format!("non-finite value {cell:?}"),
                    }),
                    Err(_) => Err(Error::Parse {
                        row,
                        col: c + 1,
                        msg: format!("cannot parse {cell:?} as a real number"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(parsed);
        }
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 rows, got {}",
                rows.len()
            )));
        }
        Self::from_rows(&rows)
    }

    /// Writes the series as CSV using shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, writer: W, header: Option<&[String]>) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let map_err = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
        if let Some(names) = header {
            wtr.write_record(names).map_err(map_err)?;
        }
        for t in 0..self.t_len() {
            let row: Vec<String> = (0..self.n_dim())
                .map(|i| format!("{:?}", self.values[(t, i)]))
                .collect();
            wtr.write_record(&row).map_err(map_err)?;
        }
        wtr.flush()
            .map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), None)
    }

    /// Subtracts each column's sample mean. A series already flagged as
    /// centered is returned unchanged, which makes the operation idempotent
    /// bit for bit.
    pub fn center(&self) -> Self {
        if self.centered {
            return self.clone();
        }
        let mut values = self.values.clone();
        for mut col in values.column_iter_mut() {
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            col.iter_mut().for_each(|v| *v -= mean);
        }
        Self {
            values,
            centered: true,
        }
    }

    /// Marks a series as mean-zero without touching the data. Used for
    /// simulated draws from models whose mean is known to be zero.
    pub fn assume_centered(mut self) -> Self {
        self.centered = true;
        self
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let t = self.t_len();
        &self.values.as_slice()[i * t..(i + 1) * t]
    }

    pub fn t_len(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Multiplies every observation by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: &self.values * c,
            centered: self.centered,
        }
    }

    /// `value(t, i)` with 1-based indices, matching the row/column numbering
    /// used in error messages.
    pub fn value(&self, t: usize, i: usize) -> f64 {
        self.values[(t - 1, i - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<MultivariateSeries> {
        MultivariateSeries::read_csv(text.as_bytes(), false)
    }

    #[test]
    fn four_by_two_file() {
        let s = parse("1,2\n3,4\n5,6\n7,8").unwrap();
        assert_eq!((s.t_len(), s.n_dim()), (4, 2));
        assert_eq!(s.value(1, 1), 1.0);
        assert_eq!(s.value(4, 2), 8.0);
        assert!(!s.is_centered());
    }

    #[test]
    fn header_row_is_skipped() {
        let s = MultivariateSeries::read_csv("a,b\n1,2\n3,4\n".as_bytes(), true).unwrap();
        assert_eq!(s.t_len(), 2);
        assert_eq!(s.value(2, 1), 3.0);
    }

    #[test]
    fn non_numeric_cell_reports_coordinates() {
        match parse("1,x\n2,3") {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        match parse("1,2\n3\n4,5") {
            Err(Error::RaggedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_row_is_insufficient() {
        assert!(matches!(parse("1,2"), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn nan_rejected() {
        assert!(matches!(
            parse("1\nNaN\n3"),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn centering_examples() {
        let s = MultivariateSeries::from_rows(&[vec![1.0, -1.0, 2.0], vec![3.0, 1.0, 2.0]])
            .unwrap()
            .center();
        assert_eq!(s.column(0), &[-1.0, 1.0]);
        assert_eq!(s.column(1), &[-1.0, 1.0]);
        assert_eq!(s.column(2), &[0.0, 0.0]);
        assert!(s.is_centered());
    }

    #[test]
    fn constant_column_centers_to_zero() {
        let s = MultivariateSeries::from_rows(&[vec![2.0], vec![2.0], vec![2.0], vec![2.0]])
            .unwrap()
            .center();
        assert_eq!(s.column(0), &[0.0; 4]);
    }

    #[test]
    fn write_then_read_is_bit_exact() {
        let s = MultivariateSeries::from_rows(&[
            vec![0.1, 1.0 / 3.0],
            vec![-2.5e-300, std::f64::consts::PI],
            vec![1e300, -0.0],
        ])
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, None).unwrap();
        let back = MultivariateSeries::read_csv(buf.as_slice(), false).unwrap();
        assert_eq!(back.values(), s.values());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn center_is_idempotent(data in prop::collection::vec(-1e6f64..1e6, 6..60)) {
                let rows: Vec<Vec<f64>> = data.chunks(3).filter(|c| c.len() == 3).map(<[f64]>::to_vec).collect();
                let s = MultivariateSeries::from_rows(&rows).unwrap();
                let once = s.center();
                prop_assert_eq!(once.center(), once.clone());
                for i in 0..3 {
                    let col = once.column(i);
                    let scale = col.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    let sum: f64 = col.iter().sum();
                    prop_assert!(sum.abs() <= 1e-10 * col.len() as f64 * scale);
                }
            }

            #[test]
            fn csv_round_trip(data in prop::collection::vec(prop::num::f64::NORMAL, 4..40)) {
                let rows: Vec<Vec<f64>> = data.chunks(2).filter(|c| c.len() == 2).map(<[f64]>::to_vec).collect();
                let s = MultivariateSeries::from_rows(&rows).unwrap();
                let mut buf = Vec::new();
                s.write_csv(&mut buf, None).unwrap();
                let back = MultivariateSeries::read_csv(buf.as_slice(), false).unwrap();
                prop_assert_eq!(back.values(), s.values());
            }
        }
    }
}
