//! Dataset container shared by every stage of the pipeline.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `n` points in `d` ambient dimensions, stored row-major.
///
/// Optionally carries the image shape the `d` coordinates were flattened
/// from and an `n × p` matrix of ground-truth parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    image_shape: Option<(usize, usize)>,
    params: Option<DMatrix<f64>>,
}

impl DataMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("need at least 2 points, got {n}")));
        }
        if d == 0 {
            return Err(Error::Parameter("ambient dimension must be at least 1".into()));
        }
        if values.len() != n * d {
            return Err(Error::Format(format!(
                "expected {} values for {n}x{d}, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Value(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            n,
            d,
            values,
            image_shape: None,
            params: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::Format(format!(
                    "row {i} has {} fields, expected {d}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), d, values)
    }

    pub fn with_image_shape(mut self, height: usize, width: usize) -> Result<Self> {
        if height * width != self.d {
            return Err(Error::Metadata(format!(
                "image shape {height}x{width} = {} does not match dimension {}",
                height * width,
                self.d
            )));
        }
        self.image_shape = Some((height, width));
        Ok(self)
    }

    pub fn with_params(mut self, params: DMatrix<f64>) -> Result<Self> {
        if params.nrows() != self.n {
            return Err(Error::Metadata(format!(
                "parameter matrix has {} rows, dataset has {}",
                params.nrows(),
                self.n
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Value("non-finite parameter value".into()));
        }
        self.params = Some(params);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    pub fn params(&self) -> Option<&DMatrix<f64>> {
        self.params.as_ref()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.values)
    }

    /// Keeps the listed rows (in the given order), carrying parameters along.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            if i >= self.n {
                return Err(Error::Parameter(format!("row {i} out of range")));
            }
            values.extend_from_slice(self.row(i));
        }
        let mut out = Self::new(rows.len(), self.d, values)?;
        out.image_shape = self.image_shape;
        out.params = self
            .params
            .as_ref()
            .map(|p| p.select_rows(rows.iter()));
        Ok(out)
    }

    /// Drops row `i`; used by leave-one-out folds.
    pub fn without_row(&self, i: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n).filter(|&r| r != i).collect();
        self.select_rows(&keep)
    }

    /// Keeps the listed columns, dropping image shape (the result is no longer an image).
    pub(crate) fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        let m = columns.len();
        let mut values = Vec::with_capacity(self.n * m);
        for row in self.rows() {
            values.extend(columns.iter().map(|&j| row[j]));
        }
        let mut out = Self::new(self.n, m, values)?;
        out.params = self.params.clone();
        Ok(out)
    }

    /// A copy with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        if out.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Value("scaling produced non-finite values".into()));
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = DataMatrix::new(2, 1, vec![0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Value(_)));
    }

    #[test]
    fn rejects_single_point() {
        assert!(DataMatrix::new(1, 2, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn image_shape_must_match() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!(x.clone().with_image_shape(1, 2).is_ok());
        assert!(matches!(
            x.with_image_shape(2, 2).unwrap_err(),
            Error::Metadata(_)
        ));
    }

    #[test]
    fn select_rows_carries_params() {
        let x = DataMatrix::from_rows(&[[0.0], [1.0], [2.0]])
            .unwrap()
            .with_params(DMatrix::from_row_slice(3, 1, &[10.0, 11.0, 12.0]))
            .unwrap();
        let y = x.without_row(1).unwrap();
        assert_eq!(y.values(), &[0.0, 2.0]);
        assert_eq!(y.params().unwrap().as_slice(), &[10.0, 12.0]);
    }
}
