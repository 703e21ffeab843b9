//! Causal process models `Z_t = R(…, ε_{t−1}, ε_t)` driven by iid Gaussian
//! innovations, with closed-form autocovariances where they exist.
//!
//! Autocovariances follow the convention `Γ(u) = E[Z_0 Z_uᵀ]`, the quantity
//! estimated by the divisor-`T` sample autocovariance `C(u)`. Under this
//! convention `Γ(−u) = Γ(u)ᵀ` and, for a VAR(1) with coefficient `A`,
//! `Γ(u) = Γ(0)(Aᵀ)^u` for `u ≥ 0`.

use std::fmt;
use std::path::Path;

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Truncation error target for the causal filters, relative to the scale of `Z_t`.
const TRUNCATION_TOL: f64 = 1e-14;
const MIN_BURN_IN: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum ProcessModel {
    /// `Z_t = ε_t`, `ε_t ~ N(0, Σ)`.
    WhiteNoise { sigma: DMatrix<f64> },
    /// `Z_t = A Z_{t−1} + ε_t`.
    Var1 {
        a: DMatrix<f64>,
        sigma: DMatrix<f64>,
    },
    /// `Z_t = Σ_{j=0}^{q} B_j ε_{t−j}`.
    Vma {
        coeffs: Vec<DMatrix<f64>>,
        sigma: DMatrix<f64>,
    },
    /// Scalar `Z_t = φ Z_{t−1} + ε_t`, `ε_t ~ N(0, σ²)`.
    Ar1 { phi: f64, sigma2: f64 },
    /// Scalar threshold autoregression
    /// `Z_t = a·max(Z_{t−1}, 0) + b·min(Z_{t−1}, 0) + ε_t`.
    ThresholdAr1 { a: f64, b: f64, sigma2: f64 },
}

impl ProcessModel {
    pub fn white_noise(n: usize) -> Self {
        ProcessModel::WhiteNoise {
            sigma: DMatrix::identity(n, n),
        }
    }

    pub fn ar1(phi: f64) -> Self {
        ProcessModel::Ar1 { phi, sigma2: 1.0 }
    }

    /// Bivariate VAR(1) with `A = [[0.4, 0.1], [0.0, 0.3]]`, `Σ = I`.
    pub fn default_var1() -> Self {
        ProcessModel::Var1 {
            a: DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.0, 0.3]),
            sigma: DMatrix::identity(2, 2),
        }
    }

    /// Parses the model grammar:
    /// `white[:n=..]`, `ar1:phi=..[,sigma2=..]`, `var1:file=A.csv,sigma=S.csv`,
    /// `var1:default`, `vma:file=B0.csv;B1.csv;..[,sigma=S.csv]`,
    /// `tar:a=..,b=..[,sigma2=..]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let params = parse_params(rest)?;
        let get = |key: &str| {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match get(key) {
                Some(v) => v.parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("model parameter {key}={v:?} is not a number"))
                }),
                None => default.ok_or_else(|| {
                    Error::InvalidInput(format!("model {kind:?} requires parameter {key}"))
                }),
            }
        };
        let model = match kind.to_ascii_lowercase().as_str() {
            "white" | "white_noise" => {
                let sigma = match get("sigma") {
                    Some(path) => read_matrix_csv(path)?,
                    None => {
                        let n = num("n", Some(1.0))?;
                        if n < 1.0 || n.fract() != 0.0 {
                            return Err(Error::InvalidInput(format!(
                                "white noise dimension n={n}"
                            )));
                        }
                        DMatrix::identity(n as usize, n as usize)
                    }
                };
                ProcessModel::WhiteNoise { sigma }
            }
            "ar1" => ProcessModel::Ar1 {
                phi: num("phi", None)?,
                sigma2: num("sigma2", Some(1.0))?,
            },
            "var1" if rest.trim() == "default" => Self::default_var1(),
            "var1" => {
                let a = read_matrix_csv(get("file").ok_or_else(|| {
                    Error::InvalidInput("var1 requires file=<A.csv> or 'default'".into())
                })?)?;
                let sigma = match get("sigma") {
                    Some(path) => read_matrix_csv(path)?,
                    None => DMatrix::identity(a.nrows(), a.nrows()),
                };
                ProcessModel::Var1 { a, sigma }
            }
            "vma" => {
                let files = get("file").ok_or_else(|| {
                    Error::InvalidInput("vma requires file=B0.csv;B1.csv;..".into())
                })?;
                let coeffs = files
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|p| read_matrix_csv(p.trim()))
                    .collect::<Result<Vec<_>>>()?;
                let b = coeffs.first().map_or(0, DMatrix::ncols);
                let sigma = match get("sigma") {
                    Some(path) => read_matrix_csv(path)?,
                    None => DMatrix::identity(b, b),
                };
                ProcessModel::Vma { coeffs, sigma }
            }
            "tar" | "threshold_ar1" => ProcessModel::ThresholdAr1 {
                a: num("a", None)?,
                b: num("b", None)?,
                sigma2: num("sigma2", Some(1.0))?,
            },
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown model kind {other:?}; expected white|ar1|var1|vma|tar"
                )))
            }
        };
        model.validate()?;
        Ok(model)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProcessModel::WhiteNoise { .. } => "white_noise",
            ProcessModel::Var1 { .. } => "var1",
            ProcessModel::Vma { .. } => "vma",
            ProcessModel::Ar1 { .. } => "ar1_scalar",
            ProcessModel::ThresholdAr1 { .. } => "threshold_ar1",
        }
    }

    pub fn n_dim(&self) -> usize {
        match self {
            ProcessModel::WhiteNoise { sigma } => sigma.nrows(),
            ProcessModel::Var1 { a, .. } => a.nrows(),
            ProcessModel::Vma { coeffs, .. } => coeffs.first().map_or(0, DMatrix::nrows),
            ProcessModel::Ar1 { .. } | ProcessModel::ThresholdAr1 { .. } => 1,
        }
    }

    /// Dimension `b` of the innovation vectors.
    pub fn innovation_dim(&self) -> usize {
        match self {
            ProcessModel::WhiteNoise { sigma }
            | ProcessModel::Var1 { sigma, .. }
            | ProcessModel::Vma { sigma, .. } => sigma.nrows(),
            ProcessModel::Ar1 { .. } | ProcessModel::ThresholdAr1 { .. } => 1,
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, ProcessModel::ThresholdAr1 { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let check_sigma = |sigma: &DMatrix<f64>| -> Result<()> {
            if !sigma.is_square() || sigma.nrows() == 0 {
                return Err(Error::InvalidInput(
                    "innovation covariance must be square".into(),
                ));
            }
            if sigma.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "innovation covariance has non-finite entries".into(),
                ));
            }
            if (sigma - sigma.transpose()).amax() > 1e-12 * sigma.amax().max(1.0) {
                return Err(Error::InvalidInput(
                    "innovation covariance must be symmetric".into(),
                ));
            }
            if sigma.clone().cholesky().is_none() {
                return Err(Error::InvalidInput(
                    "innovation covariance must be positive definite".into(),
                ));
            }
            Ok(())
        };
        match self {
            ProcessModel::WhiteNoise { sigma } => check_sigma(sigma),
            ProcessModel::Var1 { a, sigma } => {
                check_sigma(sigma)?;
                if !a.is_square() || a.nrows() != sigma.nrows() {
                    return Err(Error::InvalidInput(format!(
                        "VAR(1) coefficient is {}x{} but Σ is {}x{}",
                        a.nrows(),
                        a.ncols(),
                        sigma.nrows(),
                        sigma.ncols()
                    )));
                }
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(
                        "VAR(1) coefficient has non-finite entries".into(),
                    ));
                }
                let rho = spectral_radius(a);
                if rho >= 1.0 {
                    return Err(Error::NonStationaryModel(format!(
                        "VAR(1) spectral radius {rho} >= 1"
                    )));
                }
                Ok(())
            }
            ProcessModel::Vma { coeffs, sigma } => {
                check_sigma(sigma)?;
                let first = coeffs
                    .first()
                    .ok_or_else(|| Error::InvalidInput("VMA needs at least B_0".into()))?;
                for (j, b) in coeffs.iter().enumerate() {
                    if b.shape() != first.shape() || b.ncols() != sigma.nrows() {
                        return Err(Error::InvalidInput(format!(
                            "VMA coefficient B_{j} has wrong shape"
                        )));
                    }
                    if b.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidInput(format!(
                            "VMA coefficient B_{j} is not finite"
                        )));
                    }
                }
                Ok(())
            }
            ProcessModel::Ar1 { phi, sigma2 } => {
                positive_variance(*sigma2)?;
                if !phi.is_finite() || phi.abs() >= 1.0 {
                    return Err(Error::NonStationaryModel(format!(
                        "AR(1) |phi| = {} >= 1",
                        phi.abs()
                    )));
                }
                Ok(())
            }
            ProcessModel::ThresholdAr1 { a, b, sigma2 } => {
                positive_variance(*sigma2)?;
                if !(a.is_finite() && b.is_finite()) || a.abs() + b.abs() >= 1.0 {
                    return Err(Error::NonStationaryModel(format!(
                        "threshold AR(1) needs |a| + |b| < 1, got {}",
                        a.abs() + b.abs()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Geometric contraction rate of the causal filter (zero for finite memory).
    pub fn contraction_rate(&self) -> f64 {
        match self {
            ProcessModel::WhiteNoise { .. } | ProcessModel::Vma { .. } => 0.0,
            ProcessModel::Var1 { a, .. } => spectral_radius(a),
            ProcessModel::Ar1 { phi, .. } => phi.abs(),
            ProcessModel::ThresholdAr1 { a, b, .. } => a.abs().max(b.abs()),
        }
    }

    /// Number of past innovations `L` after which the filter's dependence on
    /// the initial state is below `1e-14` relative.
    pub fn truncation_horizon(&self) -> usize {
        match self {
            ProcessModel::WhiteNoise { .. } => 0,
            ProcessModel::Vma { coeffs, .. } => coeffs.len() - 1,
            _ => {
                let r = self.contraction_rate();
                if r == 0.0 {
                    return 1;
                }
                // Slack for non-normal VAR matrices whose powers overshoot ρ^L.
                let base = (TRUNCATION_TOL.ln() / r.ln()).ceil() as usize;
                base + base / 4 + 8
            }
        }
    }

    pub fn burn_in(&self) -> usize {
        MIN_BURN_IN.max(self.truncation_horizon())
    }

    /// Coefficient `a_j` of the causal linear representation
    /// `Z_t = Σ_j a_j ε_{t−j}`; `None` for nonlinear models.
    pub fn ma_coefficient(&self, j: usize) -> Option<DMatrix<f64>> {
        match self {
            ProcessModel::WhiteNoise { sigma } => {
                let n = sigma.nrows();
                Some(if j == 0 {
                    DMatrix::identity(n, n)
                } else {
                    DMatrix::zeros(n, n)
                })
            }
            ProcessModel::Var1 { a, .. } => Some(matrix_power(a, j)),
            ProcessModel::Vma { coeffs, sigma } => Some(
                coeffs
                    .get(j)
                    .cloned()
                    .unwrap_or_else(|| DMatrix::zeros(coeffs[0].nrows(), sigma.nrows())),
            ),
            ProcessModel::Ar1 { phi, .. } => Some(DMatrix::from_element(1, 1, phi.powi(j as i32))),
            ProcessModel::ThresholdAr1 { .. } => None,
        }
    }

    /// Innovation covariance `Σ`.
    pub fn innovation_cov(&self) -> DMatrix<f64> {
        match self {
            ProcessModel::WhiteNoise { sigma }
            | ProcessModel::Var1 { sigma, .. }
            | ProcessModel::Vma { sigma, .. } => sigma.clone(),
            ProcessModel::Ar1 { sigma2, .. } | ProcessModel::ThresholdAr1 { sigma2, .. } => {
                DMatrix::from_element(1, 1, *sigma2)
            }
        }
    }

    /// `Γ(u) = E[Z_0 Z_uᵀ]` in closed form.
    pub fn autocov(&self, u: i64) -> Result<DMatrix<f64>> {
        if u < 0 {
            return Ok(self.autocov(-u)?.transpose());
        }
        let u = u as usize;
        match self {
            ProcessModel::WhiteNoise { sigma } => Ok(if u == 0 {
                sigma.clone()
            } else {
                DMatrix::zeros(sigma.nrows(), sigma.ncols())
            }),
            ProcessModel::Ar1 { phi, sigma2 } => Ok(DMatrix::from_element(
                1,
                1,
                phi.powi(u as i32) * sigma2 / (1.0 - phi * phi),
            )),
            ProcessModel::Var1 { a, sigma } => {
                let gamma0 = var1_stationary_cov(a, sigma)?;
                Ok(gamma0 * matrix_power(&a.transpose(), u))
            }
            ProcessModel::Vma { coeffs, sigma } => {
                let n = coeffs[0].nrows();
                let mut out = DMatrix::zeros(n, n);
                for j in 0..coeffs.len().saturating_sub(u) {
                    out += &coeffs[j] * sigma * coeffs[j + u].transpose();
                }
                Ok(out)
            }
            ProcessModel::ThresholdAr1 { .. } => Err(Error::UnsupportedModel(
                "threshold AR(1) has no closed-form autocovariance".into(),
            )),
        }
    }

    /// True spectral density matrix `f(λ) = (1/2π) Σ_u e^{−iuλ} Γ(u)`.
    pub fn spectral_density(&self, lambda: f64) -> Result<DMatrix<Complex<f64>>> {
        self.validate()?;
        let two_pi = 2.0 * std::f64::consts::PI;
        match self {
            ProcessModel::Ar1 { phi, sigma2 } => {
                let d = Complex::new(1.0, 0.0) - Complex::from_polar(*phi, -lambda);
                Ok(DMatrix::from_element(
                    1,
                    1,
                    Complex::new(sigma2 / (two_pi * d.norm_sqr()), 0.0),
                ))
            }
            ProcessModel::Var1 { a, sigma } => {
                // With Γ(u) = E[Z_0 Z_uᵀ] the transfer function enters as
                // (I − A e^{iλ})^{-1} on the left.
                let n = a.nrows();
                let eye = DMatrix::<Complex<f64>>::identity(n, n);
                let ac = a.map(|v| Complex::new(v, 0.0));
                let left = (&eye - &ac * Complex::from_polar(1.0, lambda))
                    .try_inverse()
                    .ok_or_else(|| Error::NonStationaryModel("I − A e^{iλ} is singular".into()))?;
                let right = (&eye - ac.transpose() * Complex::from_polar(1.0, -lambda))
                    .try_inverse()
                    .ok_or_else(|| {
                        Error::NonStationaryModel("I − Aᵀ e^{−iλ} is singular".into())
                    })?;
                let s = sigma.map(|v| Complex::new(v, 0.0));
                Ok((left * s * right).map(|z| z / two_pi))
            }
            ProcessModel::WhiteNoise { .. } | ProcessModel::Vma { .. } => {
                let max_lag = self.truncation_horizon() as i64;
                let n = self.n_dim();
                let mut out = DMatrix::<Complex<f64>>::zeros(n, n);
                for u in -max_lag..=max_lag {
                    let g = self.autocov(u)?;
                    let w = Complex::from_polar(1.0 / two_pi, -(u as f64) * lambda);
                    out += g.map(|v| w * v);
                }
                Ok(out)
            }
            ProcessModel::ThresholdAr1 { .. } => Err(Error::UnsupportedModel(
                "threshold AR(1) has no closed-form spectral density".into(),
            )),
        }
    }

    /// Draws `len` innovation vectors `ε_t ~ N(0, Σ)`, row-major `len × b`.
    pub fn draw_innovations<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> Vec<f64> {
        let sigma = self.innovation_cov();
        let b = sigma.nrows();
        if b == 1 {
            let sd = sigma[(0, 0)].sqrt();
            return (0..len)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
        }
        let chol = sigma
            .cholesky()
            .expect("validated models have positive definite Σ")
            .l();
        let mut out = vec![0.0; len * b];
        let mut w = vec![0.0; b];
        for row in out.chunks_exact_mut(b) {
            w.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = (0..=i).map(|k| chol[(i, k)] * w[k]).sum();
            }
        }
        out
    }

    /// Runs the causal filter over an innovation stream (row-major `len × b`)
    /// from a zero pre-sample state. Returns row-major `len × n`.
    pub fn filter(&self, innovations: &[f64]) -> Vec<f64> {
        let b = self.innovation_dim();
        let n = self.n_dim();
        let len = innovations.len() / b;
        let mut out = vec![0.0; len * n];
        match self {
            ProcessModel::WhiteNoise { .. } => out.copy_from_slice(innovations),
            ProcessModel::Ar1 { phi, .. } => {
                let mut z = 0.0;
                for (o, e) in out.iter_mut().zip(innovations) {
                    z = phi * z + e;
                    *o = z;
                }
            }
            ProcessModel::ThresholdAr1 { a, b, .. } => {
                let mut z: f64 = 0.0;
                for (o, e) in out.iter_mut().zip(innovations) {
                    z = a * z.max(0.0) + b * z.min(0.0) + e;
                    *o = z;
                }
            }
            ProcessModel::Var1 { a, .. } => {
                let mut prev = vec![0.0; n];
                for t in 0..len {
                    let row = &mut out[t * n..(t + 1) * n];
                    for i in 0..n {
                        row[i] = innovations[t * n + i]
                            + (0..n).map(|k| a[(i, k)] * prev[k]).sum::<f64>();
                    }
                    prev.copy_from_slice(row);
                }
            }
            ProcessModel::Vma { coeffs, .. } => {
                for t in 0..len {
                    for (j, bj) in coeffs.iter().enumerate().take(t + 1) {
                        let e = &innovations[(t - j) * b..(t - j + 1) * b];
                        for i in 0..n {
                            out[t * n + i] += (0..b).map(|k| bj[(i, k)] * e[k]).sum::<f64>();
                        }
                    }
                }
            }
        }
        out
    }

    /// Simulates `t_len` observations after a burn-in of
    /// `max(1000, truncation_horizon)` steps.
    pub fn simulate_with<R: Rng + ?Sized>(&self, rng: &mut R, t_len: usize) -> Vec<f64> {
        let burn = self.burn_in();
        let eps = self.draw_innovations(rng, burn + t_len);
        let mut z = self.filter(&eps);
        z.drain(..burn * self.n_dim());
        z
    }

    /// Reproducible ChaCha8 stream for `seed`.
    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }
}

impl fmt::Display for ProcessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessModel::WhiteNoise { sigma } => write!(f, "white:n={}", sigma.nrows()),
            ProcessModel::Ar1 { phi, sigma2 } => write!(f, "ar1:phi={phi},sigma2={sigma2}"),
            ProcessModel::ThresholdAr1 { a, b, sigma2 } => {
                write!(f, "tar:a={a},b={b},sigma2={sigma2}")
            }
            ProcessModel::Var1 { a, .. } => write!(f, "var1:n={}", a.nrows()),
            ProcessModel::Vma { coeffs, .. } => write!(f, "vma:q={}", coeffs.len() - 1),
        }
    }
}

impl ProcessModel {
    /// Full parameter echo for report metadata.
    pub fn to_json(&self) -> Value {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        match self {
            ProcessModel::WhiteNoise { sigma } => {
                json!({"kind": self.kind(), "sigma": rows(sigma)})
            }
            ProcessModel::Var1 { a, sigma } => {
                json!({"kind": self.kind(), "a": rows(a), "sigma": rows(sigma)})
            }
            ProcessModel::Vma { coeffs, sigma } => json!({
                "kind": self.kind(),
                "coeffs": coeffs.iter().map(rows).collect::<Vec<_>>(),
                "sigma": rows(sigma),
            }),
            ProcessModel::Ar1 { phi, sigma2 } => {
                json!({"kind": self.kind(), "phi": phi, "sigma2": sigma2})
            }
            ProcessModel::ThresholdAr1 { a, b, sigma2 } => {
                json!({"kind": self.kind(), "a": a, "b": b, "sigma2": sigma2})
            }
        }
    }
}

fn positive_variance(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "innovation variance {s} must be positive"
        )))
    }
}

fn parse_params(rest: &str) -> Result<Vec<(String, String)>> {
    rest.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != "default")
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_string()))
                .ok_or_else(|| {
                    Error::InvalidInput(format!("model parameter {kv:?} is not key=value"))
                })
        })
        .collect()
}

/// Reads a numeric matrix from a headerless CSV file.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let series = crate::series::MultivariateSeries::load_csv(path.as_ref(), false);
    match series {
        Ok(s) => Ok(s.values().clone()),
        // A 1×k matrix is a legitimate coefficient; re-read without the T ≥ 2 rule.
        Err(Error::InsufficientData(_)) => {
            let path = path.as_ref();
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let row: Vec<f64> = text
                .trim()
                .split(',')
                .enumerate()
                .map(|(c, v)| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        row: 1,
                        col: c + 1,
                        msg: format!("cannot parse {v:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(DMatrix::from_row_slice(1, row.len(), &row))
        }
        Err(e) => Err(e),
    }
}

pub(crate) fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub(crate) fn matrix_power(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut result = DMatrix::identity(a.nrows(), a.ncols());
    let mut base = a.clone();
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

/// Solves `Γ0 = A Γ0 Aᵀ + Σ` through `(I − A ⊗ A) vec(Γ0) = vec(Σ)`.
fn var1_stationary_cov(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let system = DMatrix::<f64>::identity(n * n, n * n) - a.kronecker(a);
    let rhs = nalgebra::DVector::from_column_slice(sigma.as_slice());
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonStationaryModel("Lyapunov system is singular".into()))?;
    let g = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&g + g.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_autocov_closed_form() {
        let m = ProcessModel::ar1(0.5);
        assert!((m.autocov(0).unwrap()[(0, 0)] - 4.0 / 3.0).abs() < 1e-15);
        assert!((m.autocov(-2).unwrap()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn var1_lyapunov_and_lag_convention() {
        let m = ProcessModel::default_var1();
        let (a, sigma) = match &m {
            ProcessModel::Var1 { a, sigma } => (a.clone(), sigma.clone()),
            _ => unreachable!(),
        };
        let g0 = m.autocov(0).unwrap();
        assert!((&g0 - &a * &g0 * a.transpose() - &sigma).amax() < 1e-13);
        // Γ(u) = Σ_j a_j Σ a_{j+u}ᵀ from the MA(∞) form.
        for u in 0..4usize {
            let mut direct = DMatrix::zeros(2, 2);
            for j in 0..200 {
                direct += m.ma_coefficient(j).unwrap()
                    * &sigma
                    * m.ma_coefficient(j + u).unwrap().transpose();
            }
            assert!((m.autocov(u as i64).unwrap() - direct).amax() < 1e-12);
        }
        assert_eq!(m.autocov(-3).unwrap(), m.autocov(3).unwrap().transpose());
    }

    #[test]
    fn var1_density_matches_autocov_sum() {
        let m = ProcessModel::default_var1();
        for lambda in [0.0, 0.7, std::f64::consts::PI] {
            let closed = m.spectral_density(lambda).unwrap();
            let mut sum = DMatrix::<Complex<f64>>::zeros(2, 2);
            for u in -120i64..=120 {
                let w =
                    Complex::from_polar(1.0 / (2.0 * std::f64::consts::PI), -(u as f64) * lambda);
                sum += m.autocov(u).unwrap().map(|v| w * v);
            }
            assert!(
                (closed - sum).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12,
                "lambda={lambda}"
            );
        }
    }

    #[test]
    fn nonstationary_models_rejected() {
        assert!(matches!(
            ProcessModel::Ar1 {
                phi: 1.0,
                sigma2: 1.0
            }
            .validate(),
            Err(Error::NonStationaryModel(_))
        ));
        let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.0, 0.0, 0.2]);
        let m = ProcessModel::Var1 {
            a,
            sigma: DMatrix::identity(2, 2),
        };
        assert!(matches!(m.validate(), Err(Error::NonStationaryModel(_))));
        let t = ProcessModel::ThresholdAr1 {
            a: 0.6,
            b: -0.5,
            sigma2: 1.0,
        };
        assert!(matches!(t.validate(), Err(Error::NonStationaryModel(_))));
    }

    #[test]
    fn threshold_model_has_no_closed_forms() {
        let t = ProcessModel::ThresholdAr1 {
            a: 0.5,
            b: -0.3,
            sigma2: 1.0,
        };
        assert!(matches!(t.autocov(1), Err(Error::UnsupportedModel(_))));
        assert!(matches!(
            t.spectral_density(0.0),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn grammar() {
        assert_eq!(
            ProcessModel::parse("ar1:phi=0.5").unwrap(),
            ProcessModel::ar1(0.5)
        );
        assert_eq!(
            ProcessModel::parse("white").unwrap(),
            ProcessModel::white_noise(1)
        );
        assert_eq!(ProcessModel::parse("white:n=3").unwrap().n_dim(), 3);
        assert_eq!(
            ProcessModel::parse("var1:default").unwrap(),
            ProcessModel::default_var1()
        );
        assert!(matches!(
            ProcessModel::parse("tar:a=0.5,b=-0.3").unwrap(),
            ProcessModel::ThresholdAr1 { .. }
        ));
        assert!(ProcessModel::parse("arma:p=1").is_err());
        assert!(ProcessModel::parse("ar1").is_err());
    }

    #[test]
    fn grammar_reads_matrix_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("A.csv");
        std::fs::write(&a, "0.4,0.1\n0.0,0.3\n").unwrap();
        let m = ProcessModel::parse(&format!("var1:file={}", a.display())).unwrap();
        assert_eq!(m, ProcessModel::default_var1());
        let b0 = dir.path().join("B0.csv");
        let b1 = dir.path().join("B1.csv");
        std::fs::write(&b0, "1\n").unwrap();
        std::fs::write(&b1, "0.5\n").unwrap();
        let m =
            ProcessModel::parse(&format!("vma:file={};{}", b0.display(), b1.display())).unwrap();
        assert!((m.autocov(0).unwrap()[(0, 0)] - 1.25).abs() < 1e-15);
        assert!((m.autocov(1).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(m.autocov(2).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn filter_matches_ma_representation() {
        let m = ProcessModel::default_var1();
        let mut rng = ProcessModel::rng(3);
        let eps = m.draw_innovations(&mut rng, 40);
        let z = m.filter(&eps);
        let t = 39;
        let mut expect = nalgebra::DVector::zeros(2);
        for j in 0..=t {
            let e = nalgebra::DVector::from_column_slice(&eps[(t - j) * 2..(t - j + 1) * 2]);
            expect += m.ma_coefficient(j).unwrap() * e;
        }
        assert!((expect[0] - z[t * 2]).abs() < 1e-12);
        assert!((expect[1] - z[t * 2 + 1]).abs() < 1e-12);
    }
}
