//! Maximum-deviation statistics, their Gumbel limit, simultaneous bands and
//! pointwise intervals.
//!
//! All logarithms are natural. The limit law has cdf `exp(−exp(−x/2))`
//! (twice a standard Gumbel), and the centring constant
//! `2 log B_T − log(π log B_T)` uses the same base.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::Serialize;
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::spectral::SpectralGrid;
use crate::SCHEMA_VERSION;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `exp(−exp(−x/2))`.
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x / 2.0).exp()).exp()
}

/// Density of [`gumbel_cdf`].
pub fn gumbel_pdf(x: f64) -> f64 {
    let e = (-x / 2.0).exp();
    0.5 * e * (-e).exp()
}

/// `x` with `gumbel_cdf(x) = level`, i.e. `−2 log(−log level)`.
pub fn gumbel_quantile(level: f64) -> Result<f64> {
    check_level(level)?;
    Ok(-2.0 * (-level.ln()).ln())
}

/// `2 log B − log(π log B)`.
pub fn gumbel_centering(bandwidth: f64) -> f64 {
    let lb = bandwidth.ln();
    2.0 * lb - (PI * lb).ln()
}

/// `ω(λ) = 2` on integer multiples of π, 1 elsewhere.
pub fn omega(lambda: f64) -> f64 {
    let r = lambda / PI;
    if (r - r.round()).abs() <= 1e-12 {
        2.0
    } else {
        1.0
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(level))
    }
}

/// Matrix entry `(i, j)`, zero-based.
pub type Entry = (usize, usize);

/// Parses `all | diag | i,j;i,j;...` with one-based indices. `all` lists the
/// upper triangle including the diagonal.
pub fn parse_entries(spec: &str, n: usize) -> Result<Vec<Entry>> {
    match spec.trim() {
        "all" => Ok((0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()),
        "diag" => Ok((0..n).map(|i| (i, i)).collect()),
        list => list
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|pair| {
                let (a, b) = pair
                    .split_once(',')
                    .ok_or_else(|| Error::InvalidInput(format!("entry {pair:?} is not i,j")))?;
                let parse = |s: &str| -> Result<usize> {
                    match s.trim().parse::<usize>() {
                        Ok(k) if (1..=n).contains(&k) => Ok(k - 1),
                        _ => Err(Error::InvalidInput(format!(
                            "entry index {s:?} must be an integer in 1..={n}"
                        ))),
                    }
                };
                Ok((parse(a)?, parse(b)?))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    /// Centred at the exact `E f̂`.
    OracleMean,
    /// Centred at the true `f`.
    OracleTrue,
    /// Denominators from the estimate itself.
    Plugin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxDeviationStat {
    pub entry: Entry,
    /// `max_l (T/B_T) |f̂_ij − c_ij|² / (κ f_ii f_jj)` over the grid.
    pub raw_max: f64,
    /// `raw_max − 2 log B_T + log(π log B_T)`.
    pub centered: f64,
    pub grid_size: usize,
    pub argmax_freq: f64,
    pub center_mode: CenterMode,
}

fn same_grid(a: &SpectralGrid, b: &SpectralGrid, what: &str) -> Result<()> {
    if a.freqs.len() != b.freqs.len()
        || a.freqs
            .iter()
            .zip(&b.freqs)
            .any(|(x, y)| (x - y).abs() > 1e-12)
    {
        return Err(Error::InvalidInput(format!(
            "{what} grid differs from the estimate's grid"
        )));
    }
    if a.n_dim() != b.n_dim() {
        return Err(Error::InvalidInput(format!(
            "{what} has a different dimension"
        )));
    }
    Ok(())
}

fn check_entry(grid: &SpectralGrid, (i, j): Entry) -> Result<()> {
    let n = grid.n_dim();
    if i >= n || j >= n {
        return Err(Error::InvalidInput(format!(
            "entry ({i}, {j}) outside {n}×{n}"
        )));
    }
    Ok(())
}

fn positive_diag(grid: &SpectralGrid, l: usize, i: usize) -> Result<f64> {
    let v = grid.diag(l, i);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::DegenerateSpectrum {
            freq: grid.freqs[l],
            index: i + 1,
            value: v,
        })
    }
}

/// Self-normalised maximum deviation of entry `(i, j)` over the grid of
/// `est`. `center` supplies the centring values and `denom` the diagonal
/// spectra in the normaliser. `T` and `B_T` are taken from `est`.
pub fn max_deviation(
    est: &SpectralGrid,
    center: &SpectralGrid,
    denom: &SpectralGrid,
    kernel: &Kernel,
    entry: Entry,
    center_mode: CenterMode,
) -> Result<MaxDeviationStat> {
    same_grid(est, center, "center")?;
    same_grid(est, denom, "denominator")?;
    check_entry(est, entry)?;
    if est.bandwidth < 2 || est.t_len == 0 {
        return Err(Error::InvalidInput(
            "estimate lacks bandwidth/sample-size metadata".into(),
        ));
    }
    let (i, j) = entry;
    let scale = est.t_len as f64 / est.bandwidth as f64 / kernel.kappa();
    let mut raw_max = 0.0f64;
    let mut argmax = est.freqs.first().copied().unwrap_or(0.0);
    for l in 0..est.len() {
        let d = (est.entry(l, i, j) - center.entry(l, i, j)).norm_sqr();
        let norm = positive_diag(denom, l, i)? * positive_diag(denom, l, j)?;
        let v = scale * d / norm;
        if v > raw_max {
            raw_max = v;
            argmax = est.freqs[l];
        }
    }
    Ok(MaxDeviationStat {
        entry,
        raw_max,
        centered: raw_max - gumbel_centering(est.bandwidth as f64),
        grid_size: est.len(),
        argmax_freq: argmax,
        center_mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMethod {
    GumbelUniform,
    CltPointwise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryBand {
    pub entry: Entry,
    pub freqs: Vec<f64>,
    pub estimate: Vec<Complex<f64>>,
    /// Uniform bands: radius of the disc around the estimate.
    /// Pointwise intervals: half-width applied to the real and imaginary
    /// parts separately.
    pub half_width: Vec<f64>,
}

impl EntryBand {
    /// Whether `target` lies inside the band at every grid frequency.
    pub fn covers(&self, target: &SpectralGrid, method: BandMethod) -> bool {
        let (i, j) = self.entry;
        self.estimate
            .iter()
            .zip(&self.half_width)
            .enumerate()
            .all(|(l, (est, hw))| {
                let d = target.entry(l, i, j) - est;
                match method {
                    BandMethod::GumbelUniform => d.norm() <= *hw,
                    BandMethod::CltPointwise => d.re.abs() <= *hw && d.im.abs() <= *hw,
                }
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandResult {
    pub level: f64,
    pub method: BandMethod,
    pub bonferroni_m: usize,
    /// Limit-law quantile at the (possibly Bonferroni-adjusted) level.
    pub quantile: f64,
    pub center_mode: CenterMode,
    pub entries: Vec<EntryBand>,
}

impl BandResult {
    /// Joint coverage: every entry covers `target` at every frequency.
    pub fn covers(&self, target: &SpectralGrid) -> bool {
        self.entries.iter().all(|e| e.covers(target, self.method))
    }

    pub fn to_json(&self, metadata: Value) -> Value {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|e| {
                let re: Vec<f64> = e.estimate.iter().map(|z| z.re).collect();
                let im: Vec<f64> = e.estimate.iter().map(|z| z.im).collect();
                let off = |v: &[f64], sign: f64| -> Vec<f64> {
                    v.iter()
                        .zip(&e.half_width)
                        .map(|(x, h)| x + sign * h)
                        .collect()
                };
                json!({
                    "i": e.entry.0 + 1,
                    "j": e.entry.1 + 1,
                    "freqs": e.freqs,
                    "estimate_re": re,
                    "estimate_im": im,
                    "half_width": e.half_width,
                    "lower": off(&re, -1.0),
                    "upper": off(&re, 1.0),
                    "lower_im": off(&im, -1.0),
                    "upper_im": off(&im, 1.0),
                })
            })
            .collect();
        json!({
            "schema_version": SCHEMA_VERSION,
            "level": self.level,
            "method": self.method,
            "bonferroni_m": self.bonferroni_m,
            "quantile": self.quantile,
            "center_mode": self.center_mode,
            "entries": entries,
            "metadata": metadata,
        })
    }
}

/// Simultaneous band from the Gumbel limit with plug-in denominators.
///
/// At `λ*_l` the half-width (disc radius) is
/// `sqrt((B_T/T) κ f̂_ii f̂_jj (q + 2 log B_T − log(π log B_T)))`, with `q` the
/// limit quantile at `level`, or at `1 − (1 − level)/m` across `m` entries
/// when `bonferroni` is set.
pub fn uniform_band(
    est: &SpectralGrid,
    kernel: &Kernel,
    level: f64,
    entries: &[Entry],
    bonferroni: bool,
) -> Result<BandResult> {
    check_level(level)?;
    if entries.is_empty() {
        return Err(Error::InvalidInput("no entries requested".into()));
    }
    let m = if bonferroni { entries.len() } else { 1 };
    let adjusted = 1.0 - (1.0 - level) / m as f64;
    let q = gumbel_quantile(adjusted)?;
    let b = est.bandwidth as f64;
    if b < 2.0 || est.t_len == 0 {
        return Err(Error::InvalidInput(
            "estimate lacks bandwidth/sample-size metadata".into(),
        ));
    }
    let threshold = q + gumbel_centering(b);
    if threshold < 0.0 {
        return Err(Error::BandUndefined(format!(
            "q + 2 log B_T − log(π log B_T) = {threshold:.4} < 0 at B_T = {b}; increase the bandwidth"
        )));
    }
    let scale = b / est.t_len as f64 * kernel.kappa() * threshold;
    let bands = entries
        .iter()
        .map(|&entry| {
            check_entry(est, entry)?;
            let (i, j) = entry;
            let half_width = (0..est.len())
                .map(|l| Ok((scale * positive_diag(est, l, i)? * positive_diag(est, l, j)?).sqrt()))
                .collect::<Result<Vec<_>>>()?;
            Ok(EntryBand {
                entry,
                freqs: est.freqs.clone(),
                estimate: (0..est.len()).map(|l| est.entry(l, i, j)).collect(),
                half_width,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandResult {
        level,
        method: BandMethod::GumbelUniform,
        bonferroni_m: m,
        quantile: q,
        center_mode: CenterMode::Plugin,
        entries: bands,
    })
}

/// Pointwise interval for one entry at one grid frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseInterval {
    pub freq: f64,
    pub half_width: f64,
    pub re: (f64, f64),
    /// Present for off-diagonal entries.
    pub im: Option<(f64, f64)>,
}

/// Half-width `z_{(1+level)/2} sqrt((B_T/T) ω(λ) κ f̂_ii f̂_jj)` at grid index `l`.
fn pointwise_half_width(
    est: &SpectralGrid,
    kernel: &Kernel,
    z: f64,
    entry: Entry,
    l: usize,
) -> Result<f64> {
    let (i, j) = entry;
    let var = est.bandwidth as f64 / est.t_len as f64
        * omega(est.freqs[l])
        * kernel.kappa()
        * positive_diag(est, l, i)?
        * positive_diag(est, l, j)?;
    Ok(z * var.sqrt())
}

/// CLT interval at `freq`, which must be one of the estimate's frequencies.
/// For `i ≠ j` the same half-width is applied to the real and imaginary parts.
pub fn pointwise_ci(
    est: &SpectralGrid,
    kernel: &Kernel,
    level: f64,
    entry: Entry,
    freq: f64,
) -> Result<PointwiseInterval> {
    check_level(level)?;
    check_entry(est, entry)?;
    if !(0.0..=PI).contains(&freq) {
        return Err(Error::InvalidInput(format!(
            "frequency {freq} outside [0, π]"
        )));
    }
    let l = est
        .freqs
        .iter()
        .position(|f| (f - freq).abs() <= 1e-12)
        .ok_or_else(|| {
            Error::InvalidInput(format!("frequency {freq} is not on the estimate's grid"))
        })?;
    let z = normal_quantile(0.5 * (1.0 + level));
    let hw = pointwise_half_width(est, kernel, z, entry, l)?;
    let v = est.entry(l, entry.0, entry.1);
    Ok(PointwiseInterval {
        freq: est.freqs[l],
        half_width: hw,
        re: (v.re - hw, v.re + hw),
        im: (entry.0 != entry.1).then_some((v.im - hw, v.im + hw)),
    })
}

/// Pointwise intervals at every grid frequency, packaged like a band.
pub fn pointwise_band(
    est: &SpectralGrid,
    kernel: &Kernel,
    level: f64,
    entries: &[Entry],
) -> Result<BandResult> {
    check_level(level)?;
    let z = normal_quantile(0.5 * (1.0 + level));
    let bands = entries
        .iter()
        .map(|&entry| {
            check_entry(est, entry)?;
            Ok(EntryBand {
                entry,
                freqs: est.freqs.clone(),
                estimate: (0..est.len())
                    .map(|l| est.entry(l, entry.0, entry.1))
                    .collect(),
                half_width: (0..est.len())
                    .map(|l| pointwise_half_width(est, kernel, z, entry, l))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandResult {
        level,
        method: BandMethod::CltPointwise,
        bonferroni_m: 1,
        quantile: z,
        center_mode: CenterMode::Plugin,
        entries: bands,
    })
}

/// Undersmoothing check `b_lower (q + 1) > 1`, which lets bands target `f`
/// instead of `E f̂`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessCheck {
    pub q: f64,
    pub b_lower: f64,
    pub product: f64,
    pub satisfied: bool,
}

pub fn smoothness_check(kernel: &Kernel, b_lower: f64) -> SmoothnessCheck {
    let q = kernel.bias_order().q;
    let product = b_lower * (q + 1.0);
    SmoothnessCheck {
        q,
        b_lower,
        product,
        satisfied: product > 1.0,
    }
}

/// Smallest eigenvalue of the plug-in estimate over the grid, a diagnostic
/// for the positive-definiteness margin.
pub fn min_plugin_eigenvalue(est: &SpectralGrid) -> f64 {
    est.min_eigenvalues()
        .iter()
        .map(|(m, _)| *m)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn flat(n: usize, b: usize, t: usize, level: f64) -> SpectralGrid {
        let freqs: Vec<f64> = (0..=b).map(|l| PI * l as f64 / b as f64).collect();
        let m = DMatrix::<Complex<f64>>::identity(n, n) * Complex::new(level, 0.0);
        SpectralGrid {
            matrices: vec![m; freqs.len()],
            freqs,
            bandwidth: b,
            kernel_name: "bartlett".into(),
            t_len: t,
        }
    }

    #[test]
    fn cdf_and_quantile() {
        assert!((gumbel_cdf(0.0) - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(gumbel_cdf(2000.0), 1.0);
        assert_eq!(gumbel_cdf(-2000.0), 0.0);
        assert!(gumbel_quantile((-1.0f64).exp()).unwrap().abs() < 1e-15);
        let q95 = gumbel_quantile(0.95).unwrap();
        // −2 ln(−ln 0.95), evaluated independently.
        assert!((q95 - 5.940_390_498).abs() < 1e-8);
        for p in [0.01, 0.5, 0.99, 0.95] {
            assert!((gumbel_cdf(gumbel_quantile(p).unwrap()) - p).abs() < 1e-12);
        }
        assert!((gumbel_quantile(0.5).unwrap() - 0.733_025_841).abs() < 1e-8);
        assert!(matches!(gumbel_quantile(1.5), Err(Error::InvalidLevel(_))));
        assert!(matches!(gumbel_quantile(0.0), Err(Error::InvalidLevel(_))));
    }

    #[test]
    fn gumbel_mean_by_quadrature() {
        let mean = crate::quad::integrate(|x| x * gumbel_pdf(x), -30.0, 200.0, 1e-12);
        assert!((mean - 2.0 * EULER_GAMMA).abs() < 1e-9);
        assert!((2.0 * EULER_GAMMA - 1.154_431).abs() < 1e-6);
    }

    #[test]
    fn omega_values() {
        assert_eq!(omega(0.0), 2.0);
        assert_eq!(omega(PI), 2.0);
        assert_eq!(omega(PI / 2.0), 1.0);
        assert_eq!(omega(1e-3), 1.0);
    }

    #[test]
    fn normal_quantile_975() {
        assert!((normal_quantile(0.975) - 1.959_964).abs() < 1e-6);
    }

    #[test]
    fn zero_deviation_statistic() {
        let g = flat(1, 10, 1000, 1.0 / (2.0 * PI));
        let s = max_deviation(
            &g,
            &g,
            &g,
            &Kernel::Bartlett,
            (0, 0),
            CenterMode::OracleMean,
        )
        .unwrap();
        assert_eq!(s.raw_max, 0.0);
        let expect = -2.0 * 10f64.ln() + (PI * 10f64.ln()).ln();
        assert!((s.centered - expect).abs() < 1e-14);
        assert!((s.centered + 2.626_407_855).abs() < 1e-8);
        assert_eq!(s.grid_size, 11);
    }

    #[test]
    fn single_deviation_statistic() {
        let f = 1.0 / (2.0 * PI);
        let center = flat(1, 10, 1000, f);
        let mut est = center.clone();
        let d = 0.01;
        est.matrices[3][(0, 0)] += Complex::new(d, 0.0);
        let s = max_deviation(
            &est,
            &center,
            &center,
            &Kernel::Bartlett,
            (0, 0),
            CenterMode::OracleMean,
        )
        .unwrap();
        let expect = 100.0 * d * d / ((2.0 / 3.0) * f * f);
        assert!((s.raw_max - expect).abs() < 1e-12 * expect);
        assert_eq!(s.argmax_freq, est.freqs[3]);
    }

    #[test]
    fn imaginary_deviation_counts_like_real() {
        let center = flat(2, 10, 1000, 0.2);
        let mut re = center.clone();
        let mut im = center.clone();
        re.matrices[2][(0, 1)] += Complex::new(0.03, 0.0);
        im.matrices[2][(0, 1)] += Complex::new(0.0, 0.03);
        let k = Kernel::Parzen;
        let a = max_deviation(&re, &center, &center, &k, (0, 1), CenterMode::OracleMean).unwrap();
        let b = max_deviation(&im, &center, &center, &k, (0, 1), CenterMode::OracleMean).unwrap();
        assert_eq!(a.raw_max, b.raw_max);
    }

    #[test]
    fn degenerate_denominator() {
        let g = flat(1, 4, 100, 0.1);
        let mut d = g.clone();
        d.matrices[2][(0, 0)] = Complex::new(0.0, 0.0);
        match max_deviation(
            &g,
            &g,
            &d,
            &Kernel::Bartlett,
            (0, 0),
            CenterMode::OracleMean,
        ) {
            Err(Error::DegenerateSpectrum { freq, .. }) => assert_eq!(freq, PI / 2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flat_uniform_band_oracle() {
        let f = 1.0 / (2.0 * PI);
        let g = flat(1, 32, 4096, f);
        let band = uniform_band(&g, &Kernel::Bartlett, 0.95, &[(0, 0)], false).unwrap();
        let q = 5.940_390_498_084_327;
        let oracle = ((32.0 / 4096.0)
            * (2.0 / 3.0)
            * f
            * f
            * (q + 2.0 * 32f64.ln() - (PI * 32f64.ln()).ln()))
        .sqrt();
        for hw in &band.entries[0].half_width {
            assert!((hw - oracle).abs() < 1e-8 * oracle);
        }
    }

    #[test]
    fn bonferroni_split() {
        let g = flat(2, 16, 4096, 0.1);
        let entries = parse_entries("all", 2).unwrap();
        assert_eq!(entries, vec![(0, 0), (0, 1), (1, 1)]);
        let band = uniform_band(&g, &Kernel::Bartlett, 0.95, &entries, true).unwrap();
        assert_eq!(band.bonferroni_m, 3);
        let expect = gumbel_quantile(1.0 - 0.05 / 3.0).unwrap();
        assert_eq!(band.quantile, expect);
        assert!((1.0f64 - 0.05 / 3.0 - 0.983_33).abs() < 1e-5);
    }

    #[test]
    fn band_undefined_at_tiny_bandwidth() {
        let g = flat(1, 2, 100, 0.1);
        assert!(matches!(
            uniform_band(&g, &Kernel::Bartlett, 0.01, &[(0, 0)], false),
            Err(Error::BandUndefined(_))
        ));
    }

    #[test]
    fn pointwise_examples() {
        let g = flat(2, 8, 800, 0.25);
        let at0 = pointwise_ci(&g, &Kernel::Bartlett, 0.95, (0, 0), 0.0).unwrap();
        let mid = pointwise_ci(&g, &Kernel::Bartlett, 0.95, (0, 0), PI / 2.0).unwrap();
        assert!((at0.half_width / mid.half_width - 2f64.sqrt()).abs() < 1e-14);
        assert!(at0.im.is_none());
        let cross = pointwise_ci(&g, &Kernel::Bartlett, 0.95, (0, 1), PI / 2.0).unwrap();
        assert!(cross.im.is_some());
        assert!(pointwise_ci(&g, &Kernel::Bartlett, 0.95, (0, 0), 0.1).is_err());
        assert!(matches!(
            pointwise_ci(&g, &Kernel::Bartlett, 1.5, (0, 0), 0.0),
            Err(Error::InvalidLevel(_))
        ));
    }

    #[test]
    fn entry_parsing() {
        assert_eq!(
            parse_entries("diag", 3).unwrap(),
            vec![(0, 0), (1, 1), (2, 2)]
        );
        assert_eq!(parse_entries("1,2;2,2", 2).unwrap(), vec![(0, 1), (1, 1)]);
        assert!(parse_entries("0,1", 2).is_err());
        assert!(parse_entries("1;2", 2).is_err());
    }

    #[test]
    fn smoothness() {
        assert!(!smoothness_check(&Kernel::Bartlett, 0.3).satisfied);
        assert!(smoothness_check(&Kernel::Bartlett, 0.4).satisfied);
        assert!(smoothness_check(&Kernel::Truncated, 0.01).satisfied);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quantile_round_trip(p in 0.001f64..0.999) {
                prop_assert!((gumbel_cdf(gumbel_quantile(p).unwrap()) - p).abs() < 1e-12);
            }

            #[test]
            fn band_monotone_in_level_and_m(l1 in 0.5f64..0.99, dl in 0.0f64..0.009, level in 0.5f64..0.99) {
                let g = flat(3, 20, 5000, 0.3);
                let e = parse_entries("all", 3).unwrap();
                let k = Kernel::Parzen;
                let lo = uniform_band(&g, &k, l1, &e[..1], false).unwrap();
                let hi = uniform_band(&g, &k, l1 + dl, &e[..1], false).unwrap();
                prop_assert!(hi.entries[0].half_width[0] >= lo.entries[0].half_width[0]);
                let m1 = uniform_band(&g, &k, level, &e[..2], true).unwrap();
                let m2 = uniform_band(&g, &k, level, &e, true).unwrap();
                prop_assert!(m2.entries[0].half_width[0] >= m1.entries[0].half_width[0]);
            }

            #[test]
            fn scale_equivariance(c in 0.1f64..10.0, bump in -0.05f64..0.05) {
                let center = flat(2, 12, 2000, 0.2);
                let mut est = center.clone();
                est.matrices[4][(0, 1)] += Complex::new(bump, -bump / 2.0);
                est.matrices[4][(1, 0)] = est.matrices[4][(0, 1)].conj();
                let k = Kernel::Bartlett;
                let s1 = max_deviation(&est, &center, &center, &k, (0, 1), CenterMode::OracleMean).unwrap();
                let (e2, c2) = (est.scaled(c * c), center.scaled(c * c));
                let s2 = max_deviation(&e2, &c2, &c2, &k, (0, 1), CenterMode::OracleMean).unwrap();
                prop_assert!((s1.raw_max - s2.raw_max).abs() <= 1e-9 * s1.raw_max.max(1e-12));
                let b1 = uniform_band(&est, &k, 0.9, &[(0, 0)], false).unwrap();
                let b2 = uniform_band(&e2, &k, 0.9, &[(0, 0)], false).unwrap();
                let r = b2.entries[0].half_width[0] / b1.entries[0].half_width[0];
                prop_assert!((r - c * c).abs() < 1e-9 * c * c);
            }
        }
    }
}
