//! Sample autocovariance matrices `C(u) = (1/T) Σ_t Z_t Z_{t+u}ᵀ` and their
//! exact expectations under known models.
//!
//! The divisor is `T` at every lag, so `E C(u) = ((T − |u|)/T) Γ(u)` for a
//! mean-zero process. Sample-mean centering perturbs this by `O(1/T)`; the
//! expectation below ignores that perturbation.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ProcessModel;
use crate::series::MultivariateSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSequence {
    t_len: usize,
    /// `C(0), …, C(max_lag)`; negative lags are produced by transposition.
    matrices: Vec<DMatrix<f64>>,
}

impl AutocovSequence {
    /// Wraps precomputed nonnegative-lag matrices `C(0), …, C(L)`.
    pub fn from_matrices(t_len: usize, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = matrices
            .first()
            .map(DMatrix::nrows)
            .ok_or_else(|| Error::InvalidInput("autocovariance sequence is empty".into()))?;
        if matrices.len() > t_len {
            return Err(Error::LagOutOfRange {
                lag: matrices.len() - 1,
                t_len,
            });
        }
        if matrices.iter().any(|m| m.shape() != (n, n)) {
            return Err(Error::InvalidInput(
                "autocovariance matrices must be n×n".into(),
            ));
        }
        if matrices
            .iter()
            .flat_map(|m| m.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput(
                "autocovariance has non-finite entries".into(),
            ));
        }
        Ok(Self { t_len, matrices })
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn n_dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn max_lag(&self) -> usize {
        self.matrices.len() - 1
    }

    /// `C(u)` for `u ≥ 0`.
    pub fn lag(&self, u: usize) -> Option<&DMatrix<f64>> {
        self.matrices.get(u)
    }

    /// `C(u)` for any integer lag, `C(−u) = C(u)ᵀ`.
    pub fn at(&self, u: i64) -> Option<DMatrix<f64>> {
        let m = self.matrices.get(u.unsigned_abs() as usize)?;
        Some(if u < 0 { m.transpose() } else { m.clone() })
    }
}

/// Computes `C(0), …, C(max_lag)` with divisor `T`. Lags are evaluated in
/// parallel; each lag's sum runs in fixed time order, so the result does
/// not depend on the worker count.
pub fn sample_autocov(series: &MultivariateSeries, max_lag: usize) -> Result<AutocovSequence> {
    let t_len = series.t_len();
    if max_lag >= t_len {
        return Err(Error::LagOutOfRange {
            lag: max_lag,
            t_len,
        });
    }
    if !series.is_centered() {
        return Err(Error::InvalidInput(
            "sample_autocov expects a centered series; call center() first".into(),
        ));
    }
    let n = series.n_dim();
    let cols: Vec<&[f64]> = (0..n).map(|i| series.column(i)).collect();
    let inv_t = 1.0 / t_len as f64;
    let matrices = (0..=max_lag)
        .into_par_iter()
        .map(|u| {
            DMatrix::from_fn(n, n, |i, j| {
                let a = &cols[i][..t_len - u];
                let b = &cols[j][u..];
                dot(a, b) * inv_t
            })
        })
        .collect();
    Ok(AutocovSequence { t_len, matrices })
}

/// Four-way unrolled dot product; the association order is fixed.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `E C(u) = ((T − |u|)/T) Γ(u)` for a mean-zero model.
pub fn expected_autocov(model: &ProcessModel, u: i64, t_len: usize) -> Result<DMatrix<f64>> {
    let abs = u.unsigned_abs() as usize;
    if abs >= t_len {
        return Err(Error::LagOutOfRange { lag: abs, t_len });
    }
    let factor = (t_len - abs) as f64 / t_len as f64;
    Ok(model.autocov(u)? * factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(values: &[f64]) -> MultivariateSeries {
        let rows: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
        MultivariateSeries::from_rows(&rows)
            .unwrap()
            .assume_centered()
    }

    #[test]
    fn hand_evaluated_lags() {
        let c = sample_autocov(&scalar(&[1.0, -1.0, 2.0, -2.0]), 3).unwrap();
        assert_eq!(c.lag(0).unwrap()[(0, 0)], 2.5);
        assert_eq!(c.lag(1).unwrap()[(0, 0)], -7.0 / 4.0);
        // u = 2: (1·2 + (−1)(−2)) / 4
        assert_eq!(c.lag(2).unwrap()[(0, 0)], 1.0);
        assert_eq!(c.at(-1).unwrap()[(0, 0)], -7.0 / 4.0);
    }

    #[test]
    fn negative_lags_are_transposes() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|t| {
                vec![
                    (t as f64 * 0.7).sin(),
                    (t as f64 * 1.3).cos(),
                    t as f64 % 3.0,
                ]
            })
            .collect();
        let s = MultivariateSeries::from_rows(&rows).unwrap().center();
        let c = sample_autocov(&s, 10).unwrap();
        for u in 1..=10 {
            assert_eq!(c.at(-u).unwrap(), c.at(u).unwrap().transpose());
        }
    }

    #[test]
    fn lag_range_and_centering_enforced() {
        let s = scalar(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            sample_autocov(&s, 3),
            Err(Error::LagOutOfRange { .. })
        ));
        let raw = MultivariateSeries::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(sample_autocov(&raw, 0).is_err());
    }

    #[test]
    fn expected_autocov_examples() {
        let wn = ProcessModel::white_noise(2);
        assert_eq!(
            expected_autocov(&wn, 0, 10).unwrap(),
            DMatrix::identity(2, 2)
        );
        assert_eq!(expected_autocov(&wn, 1, 10).unwrap(), DMatrix::zeros(2, 2));
        let ar = ProcessModel::ar1(0.5);
        let v = expected_autocov(&ar, 2, 8).unwrap()[(0, 0)];
        assert!((v - 0.25).abs() < 1e-15);
        let tar = ProcessModel::ThresholdAr1 {
            a: 0.3,
            b: 0.2,
            sigma2: 1.0,
        };
        assert!(matches!(
            expected_autocov(&tar, 0, 8),
            Err(Error::UnsupportedModel(_))
        ));
    }
}
