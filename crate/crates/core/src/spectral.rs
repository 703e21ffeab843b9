//! Lag-window estimator of the spectral density matrix,
//!
//! ```text
//! f̂_T(λ) = (1/2π) Σ_{|u|<T} K(u/B_T) e^{−iuλ} C(u),
//! ```
//!
//! together with its exact expectation and the true spectrum for models
//! with closed-form autocovariances.
//!
//! Evaluation is a direct sum over the `O(B_T)` lags inside the kernel's
//! support. Only the upper triangle is summed; the lower triangle is its
//! conjugate, so every output matrix is Hermitian bit for bit. An FFT path
//! would pay off only for dense uniform grids at large `B_T`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::acov::AutocovSequence;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::model::ProcessModel;
use crate::SCHEMA_VERSION;

pub type CMatrix = DMatrix<Complex<f64>>;

/// Lag-window size `B_T = round(c · T^b)`, clamped to `[2, T − 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    b_exponent: f64,
    c_const: f64,
    value: usize,
}

impl Bandwidth {
    pub const DEFAULT_EXPONENT: f64 = 0.4;
    pub const DEFAULT_CONST: f64 = 1.0;

    pub fn new(t_len: usize, b_exponent: f64, c_const: f64) -> Result<Self> {
        if !(b_exponent > 0.0 && b_exponent < 1.0) {
            return Err(Error::InvalidInput(format!(
                "bandwidth exponent {b_exponent} must lie in (0, 1)"
            )));
        }
        if !(c_const > 0.0 && c_const.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bandwidth constant {c_const} must be positive"
            )));
        }
        if t_len < 3 {
            return Err(Error::InsufficientData(format!(
                "bandwidth needs T >= 3 so that 2 <= B_T <= T - 1, got T = {t_len}"
            )));
        }
        let raw = (c_const * (t_len as f64).powf(b_exponent)).round();
        let value = (raw.max(2.0) as usize).min(t_len - 1);
        Ok(Self {
            b_exponent,
            c_const,
            value,
        })
    }

    /// An explicit lag-window size, bypassing the power rule.
    pub fn fixed(value: usize) -> Result<Self> {
        if value < 1 {
            return Err(Error::InvalidInput("bandwidth must be at least 1".into()));
        }
        Ok(Self {
            b_exponent: f64::NAN,
            c_const: f64::NAN,
            value,
        })
    }

    pub fn with_defaults(t_len: usize) -> Result<Self> {
        Self::new(t_len, Self::DEFAULT_EXPONENT, Self::DEFAULT_CONST)
    }

    pub fn value(&self) -> usize {
        self.value
    }

    pub fn b_exponent(&self) -> f64 {
        self.b_exponent
    }

    pub fn c_const(&self) -> f64 {
        self.c_const
    }

    pub fn as_f64(&self) -> f64 {
        self.value as f64
    }

    fn to_json(self) -> Value {
        let finite = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
        json!({
            "value": self.value,
            "b_exponent": finite(self.b_exponent),
            "c_const": finite(self.c_const),
        })
    }
}

/// Hermitian `n × n` matrices on an ordered frequency list.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub freqs: Vec<f64>,
    pub matrices: Vec<CMatrix>,
    pub bandwidth: usize,
    pub kernel_name: String,
    pub t_len: usize,
}

impl SpectralGrid {
    pub fn n_dim(&self) -> usize {
        self.matrices.first().map_or(0, DMatrix::nrows)
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn entry(&self, l: usize, i: usize, j: usize) -> Complex<f64> {
        self.matrices[l][(i, j)]
    }

    /// Real part of diagonal entry `i` at grid index `l`.
    pub fn diag(&self, l: usize, i: usize) -> f64 {
        self.matrices[l][(i, i)].re
    }

    /// `max_l |f − f^H| / max|f|` over the grid.
    pub fn hermitian_defect(&self) -> f64 {
        let mut scale = 0.0f64;
        let mut defect = 0.0f64;
        for m in &self.matrices {
            scale = scale.max(m.iter().map(|z| z.norm()).fold(0.0, f64::max));
            defect = defect.max(
                (m - m.adjoint())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max),
            );
        }
        if scale == 0.0 {
            defect
        } else {
            defect / scale
        }
    }

    /// Smallest eigenvalue and trace at each grid frequency.
    pub fn min_eigenvalues(&self) -> Vec<(f64, f64)> {
        self.matrices
            .iter()
            .map(|m| {
                let herm = (m + m.adjoint()).map(|z| z * 0.5);
                let trace = herm.diagonal().iter().map(|z| z.re).sum::<f64>();
                let min = herm
                    .symmetric_eigenvalues()
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                (min, trace)
            })
            .collect()
    }

    /// Elementwise scaling of every matrix by a real factor.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.matrices
            .iter_mut()
            .for_each(|m| *m *= Complex::new(c, 0.0));
        out
    }

    pub fn to_json(&self, metadata: Value) -> Value {
        let matrices: Vec<Vec<Vec<[f64; 2]>>> = self
            .matrices
            .iter()
            .map(|m| {
                m.row_iter()
                    .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                    .collect()
            })
            .collect();
        json!({
            "schema_version": SCHEMA_VERSION,
            "freqs": self.freqs,
            "bandwidth": self.bandwidth,
            "kernel": self.kernel_name,
            "t_len": self.t_len,
            "matrices": matrices,
            "metadata": metadata,
        })
    }
}

/// `λ*_l = π l / B_T` for `l = 0..=B_T`.
pub fn theorem_grid(bandwidth: &Bandwidth) -> Vec<f64> {
    equispaced(bandwidth.value())
}

/// `π k / m` for `k = 0..=m`. The ratio is formed first so that rounding
/// never pushes the last point above π.
fn equispaced(m: usize) -> Vec<f64> {
    (0..=m).map(|k| PI * (k as f64 / m as f64)).collect()
}

/// `count` equispaced frequencies from 0 to π inclusive.
pub fn uniform_grid(count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidInput(
            "uniform grid needs at least 2 points".into(),
        ));
    }
    Ok(equispaced(count - 1))
}

/// Theorem grid refined `factor` times: `π k / (factor · B_T)`.
pub fn refined_grid(bandwidth: &Bandwidth, factor: usize) -> Vec<f64> {
    equispaced(bandwidth.value() * factor.max(1))
}

fn check_public_freqs(freqs: &[f64]) -> Result<()> {
    match freqs.iter().find(|f| !(0.0..=PI).contains(*f)) {
        Some(f) => Err(Error::InvalidInput(format!("frequency {f} outside [0, π]"))),
        None => Ok(()),
    }
}

/// `(1/2π) [w_0 M_0 + Σ_{u≥1} w_u (e^{−iuλ} M_u + e^{iuλ} M_uᵀ)]`, upper
/// triangle summed, lower triangle mirrored.
fn lag_window_sum(weights: &[f64], mats: &[&DMatrix<f64>], lambda: f64) -> CMatrix {
    let n = mats[0].nrows();
    let mut out = CMatrix::zeros(n, n);
    let trig: Vec<(f64, f64)> = (0..weights.len())
        .map(|u| {
            let (s, c) = ((u as f64) * lambda).sin_cos();
            (c, s)
        })
        .collect();
    for i in 0..n {
        for j in i..n {
            let mut re = weights[0] * mats[0][(i, j)];
            let mut im = 0.0;
            for u in 1..weights.len() {
                let w = weights[u];
                if w == 0.0 {
                    continue;
                }
                let (c, s) = trig[u];
                let a = mats[u][(i, j)];
                let b = mats[u][(j, i)];
                // e^{−iuλ} a + e^{iuλ} b
                re += w * c * (a + b);
                im += w * s * (b - a);
            }
            let z = Complex::new(re, if i == j { 0.0 } else { im }) / (2.0 * PI);
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
    }
    out
}

/// Lags with possibly nonzero weight: `|u| ≤ min(⌊B_T⌋, T − 1)`.
fn lag_limit(bandwidth: &Bandwidth, t_len: usize) -> usize {
    bandwidth.value().min(t_len - 1)
}

/// Evaluates the estimator at arbitrary real frequencies, negative ones
/// included. Public callers should use [`estimate_spectrum`].
pub fn estimate_at(
    acov: &AutocovSequence,
    kernel: &Kernel,
    bandwidth: &Bandwidth,
    freqs: &[f64],
) -> Result<SpectralGrid> {
    let t_len = acov.t_len();
    if bandwidth.value() >= t_len {
        return Err(Error::BandwidthTooLarge {
            bandwidth: bandwidth.value(),
            t_len,
        });
    }
    let lmax = lag_limit(bandwidth, t_len);
    if acov.max_lag() < lmax {
        return Err(Error::LagOutOfRange { lag: lmax, t_len });
    }
    let b = bandwidth.as_f64();
    let weights: Vec<f64> = (0..=lmax).map(|u| kernel.eval(u as f64 / b)).collect();
    let mats: Vec<&DMatrix<f64>> = (0..=lmax).map(|u| acov.lag(u).expect("checked")).collect();
    let matrices = freqs
        .par_iter()
        .map(|&lambda| lag_window_sum(&weights, &mats, lambda))
        .collect();
    Ok(SpectralGrid {
        freqs: freqs.to_vec(),
        matrices,
        bandwidth: bandwidth.value(),
        kernel_name: kernel.name().to_string(),
        t_len,
    })
}

/// `f̂_T(λ)` on frequencies in `[0, π]`.
pub fn estimate_spectrum(
    acov: &AutocovSequence,
    kernel: &Kernel,
    bandwidth: &Bandwidth,
    freqs: &[f64],
) -> Result<SpectralGrid> {
    check_public_freqs(freqs)?;
    estimate_at(acov, kernel, bandwidth, freqs)
}

/// Exact `E f̂_T(λ) = (1/2π) Σ K(u/B_T) e^{−iuλ} ((T − |u|)/T) Γ(u)`.
pub fn expected_spectrum(
    model: &ProcessModel,
    kernel: &Kernel,
    bandwidth: &Bandwidth,
    t_len: usize,
    freqs: &[f64],
) -> Result<SpectralGrid> {
    check_public_freqs(freqs)?;
    model.validate()?;
    if bandwidth.value() >= t_len {
        return Err(Error::BandwidthTooLarge {
            bandwidth: bandwidth.value(),
            t_len,
        });
    }
    let lmax = lag_limit(bandwidth, t_len);
    let b = bandwidth.as_f64();
    let gammas = (0..=lmax)
        .map(|u| model.autocov(u as i64))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = (0..=lmax)
        .map(|u| kernel.eval(u as f64 / b) * (t_len - u) as f64 / t_len as f64)
        .collect();
    let mats: Vec<&DMatrix<f64>> = gammas.iter().collect();
    let matrices = freqs
        .par_iter()
        .map(|&lambda| lag_window_sum(&weights, &mats, lambda))
        .collect();
    Ok(SpectralGrid {
        freqs: freqs.to_vec(),
        matrices,
        bandwidth: bandwidth.value(),
        kernel_name: kernel.name().to_string(),
        t_len,
    })
}

/// Closed-form `f(λ)`.
pub fn true_spectrum(model: &ProcessModel, freqs: &[f64]) -> Result<SpectralGrid> {
    check_public_freqs(freqs)?;
    let matrices = freqs
        .iter()
        .map(|&lambda| model.spectral_density(lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralGrid {
        freqs: freqs.to_vec(),
        matrices,
        bandwidth: 0,
        kernel_name: "true".into(),
        t_len: 0,
    })
}

/// Metadata block describing how an estimate was produced.
pub fn estimate_metadata(
    kernel: &Kernel,
    bandwidth: &Bandwidth,
    centered: bool,
    extra: Value,
) -> Value {
    let bo = kernel.bias_order();
    json!({
        "kernel": kernel.name(),
        "kappa": kernel.kappa(),
        "q": if bo.q.is_finite() { json!(bo.q) } else if bo.q.is_nan() { Value::Null } else { json!("inf") },
        "kappa_warning": kernel.kappa_warning(),
        "bandwidth": bandwidth.to_json(),
        "centered": centered,
        "extra": extra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_end_exactly_at_pi() {
        for b in 2..500 {
            let bw = Bandwidth::fixed(b).unwrap();
            assert_eq!(*theorem_grid(&bw).last().unwrap(), PI);
            assert!(refined_grid(&bw, 4).iter().all(|f| (0.0..=PI).contains(f)));
            assert_eq!(*uniform_grid(b).unwrap().last().unwrap(), PI);
        }
    }
    use crate::acov::sample_autocov;
    use crate::series::MultivariateSeries;

    fn scalar_acov(t_len: usize, lags: &[f64]) -> AutocovSequence {
        let mats = lags
            .iter()
            .map(|v| DMatrix::from_element(1, 1, *v))
            .collect();
        AutocovSequence::from_matrices(t_len, mats).unwrap()
    }

    #[test]
    fn white_lag_sequence_gives_flat_estimate() {
        let acov = scalar_acov(50, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let bw = Bandwidth::fixed(5).unwrap();
        for k in Kernel::CATALOG {
            let g = estimate_spectrum(&acov, &k, &bw, &[0.0, 1.0, PI]).unwrap();
            for l in 0..3 {
                assert!((g.diag(l, 0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn three_term_bartlett() {
        let acov = scalar_acov(10, &[1.0, 0.5, 0.0]);
        let bw = Bandwidth::fixed(2).unwrap();
        let g = estimate_spectrum(&acov, &Kernel::Bartlett, &bw, &[0.0]).unwrap();
        assert!((g.diag(0, 0) - 1.5 / (2.0 * PI)).abs() < 1e-15);
        assert!((g.diag(0, 0) - 0.238_732).abs() < 1e-6);
    }

    #[test]
    fn theorem_grid_shapes() {
        let g = theorem_grid(&Bandwidth::fixed(4).unwrap());
        assert_eq!(g, vec![0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI]);
        assert_eq!(
            theorem_grid(&Bandwidth::fixed(2).unwrap()),
            vec![0.0, PI / 2.0, PI]
        );
        let g = theorem_grid(&Bandwidth::fixed(37).unwrap());
        assert_eq!(g.len(), 38);
        assert_eq!(*g.last().unwrap(), PI);
        assert!(g
            .windows(2)
            .all(|w| (w[1] - w[0] - PI / 37.0).abs() < 1e-14));
    }

    #[test]
    fn bandwidth_rule() {
        let bw = Bandwidth::new(8192, 0.4, 1.0).unwrap();
        assert_eq!(bw.value(), 37);
        assert_eq!(Bandwidth::new(4, 0.4, 1.0).unwrap().value(), 2);
        assert_eq!(Bandwidth::new(10, 0.9, 5.0).unwrap().value(), 9);
        assert!(Bandwidth::new(100, 1.0, 1.0).is_err());
        assert!(Bandwidth::new(100, 0.5, -1.0).is_err());
    }

    #[test]
    fn bandwidth_must_be_below_t() {
        let acov = scalar_acov(4, &[1.0, 0.0, 0.0, 0.0]);
        let r = estimate_spectrum(
            &acov,
            &Kernel::Bartlett,
            &Bandwidth::fixed(4).unwrap(),
            &[0.0],
        );
        assert!(matches!(r, Err(Error::BandwidthTooLarge { .. })));
    }

    #[test]
    fn frequencies_outside_range_rejected() {
        let acov = scalar_acov(10, &[1.0, 0.1, 0.0]);
        let bw = Bandwidth::fixed(2).unwrap();
        assert!(estimate_spectrum(&acov, &Kernel::Bartlett, &bw, &[-0.1]).is_err());
        assert!(estimate_at(&acov, &Kernel::Bartlett, &bw, &[-0.1]).is_ok());
    }

    #[test]
    fn expected_spectrum_examples() {
        let wn = ProcessModel::white_noise(1);
        let bw = Bandwidth::fixed(8).unwrap();
        let e = expected_spectrum(&wn, &Kernel::Bartlett, &bw, 64, &[0.0, 1.0]).unwrap();
        assert_eq!(e.diag(1, 0), 1.0 / (2.0 * PI));

        // MA(1), θ = 0.5: Γ(0) = 1.25, Γ(1) = 0.5.
        let dir = tempfile::tempdir().unwrap();
        let (b0, b1) = (dir.path().join("b0.csv"), dir.path().join("b1.csv"));
        std::fs::write(&b0, "1\n").unwrap();
        std::fs::write(&b1, "0.5\n").unwrap();
        let ma =
            ProcessModel::parse(&format!("vma:file={};{}", b0.display(), b1.display())).unwrap();
        let e = expected_spectrum(&ma, &Kernel::Bartlett, &bw, 64, &[0.0]).unwrap();
        let oracle = (1.25 + 2.0 * (1.0 - 1.0 / 8.0) * (63.0 / 64.0) * 0.5) / (2.0 * PI);
        assert!((e.diag(0, 0) - oracle).abs() < 1e-15);
    }

    #[test]
    fn ar1_true_spectrum() {
        let g = true_spectrum(&ProcessModel::ar1(0.5), &[0.0, PI]).unwrap();
        assert!((g.diag(0, 0) - 2.0 / PI).abs() < 1e-15);
        assert!((g.diag(1, 0) - 1.0 / (2.0 * PI * 2.25)).abs() < 1e-15);
        // Cross-check against Σ_{|u|≤200} Γ(u) e^{−iuλ} / 2π.
        for lambda in [0.0, 0.3, PI] {
            let direct: f64 = (-200i64..=200)
                .map(|u| 0.5f64.powi(u.unsigned_abs() as i32) / 0.75 * ((u as f64) * lambda).cos())
                .sum::<f64>()
                / (2.0 * PI);
            let g = true_spectrum(&ProcessModel::ar1(0.5), &[lambda]).unwrap();
            assert!((g.diag(0, 0) - direct).abs() < 1e-13);
        }
        let wn = true_spectrum(&ProcessModel::white_noise(2), &[1.0]).unwrap();
        assert!(
            (wn.matrices[0].map(|z| z.re) - DMatrix::identity(2, 2) / (2.0 * PI)).amax() < 1e-16
        );
    }

    #[test]
    fn expected_converges_to_true() {
        let m = ProcessModel::ar1(0.5);
        let lambda = [0.0, PI / 2.0];
        let f = true_spectrum(&m, &lambda).unwrap();
        let mut prev = f64::INFINITY;
        for exp in (10..=16).step_by(2) {
            let t = 1usize << exp;
            let bw = Bandwidth::new(t, 0.4, 1.0).unwrap();
            let e = expected_spectrum(&m, &Kernel::Parzen, &bw, t, &lambda).unwrap();
            let gap = (0..2)
                .map(|l| (e.diag(l, 0) - f.diag(l, 0)).abs())
                .fold(0.0, f64::max);
            assert!(gap < prev, "T = {t}: {gap} >= {prev}");
            prev = gap;
        }
    }

    #[test]
    fn hermitian_and_even_on_bivariate_data() {
        let m = ProcessModel::default_var1();
        let mut rng = ProcessModel::rng(11);
        let z = m.simulate_with(&mut rng, 400);
        let rows: Vec<Vec<f64>> = z.chunks(2).map(<[f64]>::to_vec).collect();
        let s = MultivariateSeries::from_rows(&rows).unwrap().center();
        let bw = Bandwidth::with_defaults(400).unwrap();
        let acov = sample_autocov(&s, bw.value()).unwrap();
        let freqs = [0.3, 1.1, 2.9];
        let neg: Vec<f64> = freqs.iter().map(|f| -f).collect();
        let pos = estimate_at(&acov, &Kernel::Bartlett, &bw, &freqs).unwrap();
        let negs = estimate_at(&acov, &Kernel::Bartlett, &bw, &neg).unwrap();
        assert_eq!(pos.hermitian_defect(), 0.0);
        for l in 0..3 {
            for i in 0..2 {
                assert!((pos.diag(l, i) - negs.diag(l, i)).abs() < 1e-14);
            }
            assert!((pos.entry(l, 0, 1) - negs.entry(l, 0, 1).conj()).norm() < 1e-14);
            assert_eq!(pos.entry(l, 0, 1), pos.entry(l, 1, 0).conj());
        }
    }
}
