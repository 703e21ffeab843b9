//! Functional dependence measures by coupling.
//!
//! For a causal model `Z_t = R(…, ε_{t−1}, ε_t)` the coupled copy
//! `Z_{t,{0}}` replaces `ε_0` with an independent draw `ε_0*` and keeps every
//! other innovation. Per coordinate `i`,
//!
//! ```text
//! δ_{t,p} = ‖Z_it − Z_it,{0}‖_p
//! Θ_{m,p} = Σ_{t≥m} δ_{t,p}
//! Ψ_{m,p} = (Σ_{t≥m} δ_{t,p}^{p'})^{1/p'},   p' = min(2, p)
//! d_{m,p} = Σ_{t≥0} min(Ψ_{m,p}, δ_{t,p})
//! ```
//!
//! The infinite sums are truncated at a horizon `H` and, when the measured
//! sequence passes a geometric-decay test, extended past `H` with the fitted
//! `A ρ^t`. The extension is reported as the truncation remainder.
//!
//! Replications run in parallel, each on its own ChaCha stream keyed by the
//! replication index, and are reduced in index order, so estimates do not
//! depend on the number of worker threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::ProcessModel;
use crate::series::MultivariateSeries;
use crate::stats::{neumaier_sum, MeanVar};

pub const MIN_REPS: usize = 100;
pub const MIN_INNER_REPS: usize = 50;

/// Simulates `t_len` observations. Deterministic in `(model, t_len, seed)`.
pub fn simulate(model: &ProcessModel, t_len: usize, seed: u64) -> Result<MultivariateSeries> {
    model.validate()?;
    if t_len < 2 {
        return Err(Error::InsufficientData(format!("T = {t_len} < 2")));
    }
    let mut rng = ProcessModel::rng(seed);
    let z = model.simulate_with(&mut rng, t_len);
    series_from_row_major(&z, model.n_dim())
}

pub(crate) fn series_from_row_major(z: &[f64], n: usize) -> Result<MultivariateSeries> {
    let t_len = z.len() / n;
    MultivariateSeries::new(nalgebra::DMatrix::from_fn(t_len, n, |t, i| z[t * n + i]))
}

fn rep_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// One coupled pair: returns `Z_t − Z_{t,{0}}` for `t = 0..=horizon`,
/// row-major `(horizon + 1) × n`.
fn coupled_differences(model: &ProcessModel, horizon: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lead = model.truncation_horizon();
    let b = model.innovation_dim();
    let n = model.n_dim();
    let eps = model.draw_innovations(rng, lead + horizon + 1);
    let star = model.draw_innovations(rng, 1);
    let mut coupled = eps.clone();
    coupled[lead * b..(lead + 1) * b].copy_from_slice(&star);
    let z = model.filter(&eps);
    let zc = model.filter(&coupled);
    z[lead * n..]
        .iter()
        .zip(&zc[lead * n..])
        .map(|(a, c)| a - c)
        .collect()
}

/// Monte Carlo estimate of `δ_{t,p}` per coordinate with delta-method
/// standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaEstimate {
    pub t: usize,
    pub p: f64,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub reps: usize,
}

fn check_mc_args(p: f64, reps: usize) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "moment order p = {p} must be >= 1"
        )));
    }
    if reps < MIN_REPS {
        return Err(Error::InvalidInput(format!(
            "reps = {reps} below the floor of {MIN_REPS}"
        )));
    }
    Ok(())
}

/// `(E|D|^p)^{1/p}` and its standard error from per-rep `|D|^p` values.
fn lp_norm_with_se(powers: &[f64], p: f64) -> (f64, f64) {
    let mv = MeanVar::from_slice(powers);
    let m = mv.mean;
    if m <= 0.0 {
        return (0.0, 0.0);
    }
    let se_m = mv.std_error();
    let est = m.powf(1.0 / p);
    (est, est / (p * m) * se_m)
}

/// Per-rep `|D_t|^p` for `t = 0..=horizon`, laid out `[rep][t * n + i]`.
fn coupled_powers(
    model: &ProcessModel,
    horizon: usize,
    p: f64,
    reps: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(seed, rep);
            coupled_differences(model, horizon, &mut rng)
                .into_iter()
                .map(|d| d.abs().powf(p))
                .collect()
        })
        .collect()
}

fn column(powers: &[Vec<f64>], idx: usize) -> Vec<f64> {
    powers.iter().map(|r| r[idx]).collect()
}

pub fn coupled_delta(
    model: &ProcessModel,
    t: usize,
    p: f64,
    reps: usize,
    seed: u64,
) -> Result<DeltaEstimate> {
    model.validate()?;
    check_mc_args(p, reps)?;
    let n = model.n_dim();
    let powers = coupled_powers(model, t, p, reps, seed);
    let (estimate, se) = (0..n)
        .map(|i| lp_norm_with_se(&column(&powers, t * n + i), p))
        .unzip();
    Ok(DeltaEstimate {
        t,
        p,
        estimate,
        se,
        reps,
    })
}

/// Least-squares fit `ln y = a + β x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub ssr: f64,
    pub points: usize,
}

impl LineFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Option<Self> {
        let k = x.len();
        if k < 2 || k != y.len() {
            return None;
        }
        let kf = k as f64;
        let mx = x.iter().sum::<f64>() / kf;
        let my = y.iter().sum::<f64>() / kf;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let ssr: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        let slope_se = if k > 2 {
            (ssr / (kf - 2.0) / sxx).sqrt()
        } else {
            f64::INFINITY
        };
        Some(Self {
            intercept,
            slope,
            slope_se,
            ssr,
            points: k,
        })
    }

    /// Upper end of the two-sided `level` confidence interval for the slope.
    pub fn slope_upper(&self, level: f64) -> f64 {
        if self.points <= 2 {
            return f64::INFINITY;
        }
        if self.slope_se == 0.0 {
            return self.slope;
        }
        let t = StudentsT::new(0.0, 1.0, (self.points - 2) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.5 * (1.0 + level));
        self.slope + t * self.slope_se
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Outcome of the geometric-decay test on a nonnegative sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTest {
    pub verdict: Verdict,
    /// Fitted `ρ`; zero when the sequence vanishes identically past some index.
    pub rho: f64,
    pub log_amplitude: f64,
    pub rho_upper95: f64,
    /// Residual sums of squares of `ln δ_t` against `t` and against `ln(t+1)`.
    pub ssr_geometric: f64,
    pub ssr_power: f64,
    pub finite_memory: bool,
}

/// Geometric decay passes when the upper 95% bound on `ln ρ` is negative and
/// `ln δ_t` is at least as linear in `t` as in `ln(t + 1)`. A sequence that is
/// exactly zero for its last two entries is treated as finite-memory.
pub fn geometric_decay_test(seq: &[f64]) -> DecayTest {
    let inconclusive = DecayTest {
        verdict: Verdict::Inconclusive,
        rho: f64::NAN,
        log_amplitude: f64::NAN,
        rho_upper95: f64::NAN,
        ssr_geometric: f64::NAN,
        ssr_power: f64::NAN,
        finite_memory: false,
    };
    let k = seq.len();
    if k >= 2 && seq[k - 1] == 0.0 && seq[k - 2] == 0.0 {
        let amp = seq.iter().copied().fold(0.0, f64::max);
        return DecayTest {
            verdict: Verdict::Pass,
            rho: 0.0,
            log_amplitude: amp.ln(),
            rho_upper95: 0.0,
            ssr_geometric: 0.0,
            ssr_power: 0.0,
            finite_memory: true,
        };
    }
    let (t, y): (Vec<f64>, Vec<f64>) = seq
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| (t as f64, v.ln()))
        .unzip();
    if t.len() < 3 {
        return inconclusive;
    }
    let logt: Vec<f64> = t.iter().map(|v| (v + 1.0).ln()).collect();
    let (geo, pow) = match (LineFit::fit(&t, &y), LineFit::fit(&logt, &y)) {
        (Some(g), Some(p)) => (g, p),
        _ => return inconclusive,
    };
    let upper = geo.slope_upper(0.95);
    let pass = upper < 0.0 && geo.ssr <= pow.ssr;
    DecayTest {
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        rho: geo.slope.exp(),
        log_amplitude: geo.intercept,
        rho_upper95: upper.exp(),
        ssr_geometric: geo.ssr,
        ssr_power: pow.ssr,
        finite_memory: false,
    }
}

/// Geometric tail `A ρ^t` used past the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricTail {
    pub amplitude: f64,
    pub rho: f64,
}

impl GeometricTail {
    /// `Σ_{t≥from} A ρ^t`.
    fn sum(&self, from: usize) -> f64 {
        self.amplitude * self.rho.powi(from as i32) / (1.0 - self.rho)
    }

    /// `Σ_{t≥from} (A ρ^t)^r`.
    fn power_sum(&self, from: usize, r: f64) -> f64 {
        let rr = self.rho.powf(r);
        self.amplitude.powf(r) * rr.powi(from as i32) / (1.0 - rr)
    }

    /// `Σ_{t≥from} min(cap, A ρ^t)`.
    fn capped_sum(&self, from: usize, cap: f64) -> f64 {
        if self.amplitude <= 0.0 {
            return 0.0;
        }
        if cap <= 0.0 {
            return 0.0;
        }
        let cross = if self.amplitude * self.rho.powi(from as i32) <= cap {
            from
        } else {
            // First t with A ρ^t <= cap.
            let t = ((cap / self.amplitude).ln() / self.rho.ln())
                .ceil()
                .max(from as f64) as usize;
            (t..)
                .find(|&t| self.amplitude * self.rho.powi(t as i32) <= cap)
                .unwrap_or(t)
        };
        (cross - from) as f64 * cap + self.sum(cross)
    }
}

/// Dependence measures for one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateProfile {
    pub delta: Vec<f64>,
    pub delta_se: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_se: Vec<f64>,
    pub psi: Vec<f64>,
    pub d_seq: Vec<f64>,
    pub decay: DecayTest,
    /// `None` when the sequence is finite-memory or the decay test failed.
    pub tail: Option<GeometricTail>,
    /// Contribution of the extrapolated tail to `Θ_{0,p}`; `None` when unknown.
    pub theta_remainder: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceProfile {
    pub p: f64,
    pub horizon: usize,
    pub reps: usize,
    pub coords: Vec<CoordinateProfile>,
    /// Maxima over coordinates.
    pub delta: Vec<f64>,
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
    pub d_seq: Vec<f64>,
    pub warnings: Vec<String>,
}

impl DependenceProfile {
    /// Builds the aggregates from measured (or synthetic) `δ` sequences,
    /// one per coordinate, each of length `H + 1`.
    pub fn from_delta(
        p: f64,
        delta: Vec<Vec<f64>>,
        delta_se: Vec<Vec<f64>>,
        reps: usize,
    ) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidInput(format!("p = {p} must be >= 1")));
        }
        let h1 = delta.first().map_or(0, Vec::len);
        if h1 < 5 || delta.iter().any(|d| d.len() != h1) || delta_se.len() != delta.len() {
            return Err(Error::InvalidInput(
                "delta sequences must share a horizon H >= 4".into(),
            ));
        }
        if delta
            .iter()
            .flatten()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::InvalidInput(
                "delta values must be finite and nonnegative".into(),
            ));
        }
        let p_prime = p.min(2.0);
        let mut warnings = Vec::new();
        let coords: Vec<CoordinateProfile> = delta
            .into_iter()
            .zip(delta_se)
            .enumerate()
            .map(|(i, (d, se))| {
                let decay = geometric_decay_test(&d);
                let tail = match decay.verdict {
                    Verdict::Pass if !decay.finite_memory => Some(GeometricTail {
                        amplitude: decay.log_amplitude.exp(),
                        rho: decay.rho,
                    }),
                    Verdict::Pass => None,
                    _ => {
                        warnings.push(format!(
                            "DecayFitWarning: coordinate {}: geometric fit {:?}; sums truncated at H = {} with unknown remainder",
                            i + 1,
                            decay.verdict,
                            h1 - 1
                        ));
                        None
                    }
                };
                aggregate(d, se, p_prime, decay, tail)
            })
            .collect();
        let max_over = |f: &dyn Fn(&CoordinateProfile) -> &Vec<f64>| -> Vec<f64> {
            (0..h1)
                .map(|k| coords.iter().map(|c| f(c)[k]).fold(0.0, f64::max))
                .collect()
        };
        Ok(Self {
            p,
            horizon: h1 - 1,
            reps,
            delta: max_over(&|c| &c.delta),
            theta: max_over(&|c| &c.theta),
            psi: max_over(&|c| &c.psi),
            d_seq: max_over(&|c| &c.d_seq),
            coords,
            warnings,
        })
    }
}

fn aggregate(
    delta: Vec<f64>,
    delta_se: Vec<f64>,
    p_prime: f64,
    decay: DecayTest,
    tail: Option<GeometricTail>,
) -> CoordinateProfile {
    let h1 = delta.len();
    let finite = decay.finite_memory;
    let theta: Vec<f64> = (0..h1)
        .map(|m| neumaier_sum(delta[m..].iter().copied()) + tail.map_or(0.0, |g| g.sum(h1)))
        .collect();
    let theta_se: Vec<f64> = (0..h1)
        .map(|m| neumaier_sum(delta_se[m..].iter().copied()))
        .collect();
    let psi: Vec<f64> = (0..h1)
        .map(|m| {
            let head = neumaier_sum(delta[m..].iter().map(|v| v.powf(p_prime)));
            (head + tail.map_or(0.0, |g| g.power_sum(h1, p_prime))).powf(1.0 / p_prime)
        })
        .collect();
    let d_seq: Vec<f64> = psi
        .iter()
        .map(|&cap| {
            neumaier_sum(delta.iter().map(|v| v.min(cap)))
                + tail.map_or(0.0, |g| g.capped_sum(h1, cap))
        })
        .collect();
    let theta_remainder = match (tail, finite) {
        (Some(g), _) => Some(g.sum(h1)),
        (None, true) => Some(0.0),
        (None, false) => None,
    };
    CoordinateProfile {
        delta,
        delta_se,
        theta,
        theta_se,
        psi,
        d_seq,
        decay,
        tail,
        theta_remainder,
    }
}

/// Measures `δ_{t,p}` for `t = 0..=H` from one coupled trajectory per
/// replication and aggregates `Θ`, `Ψ`, `d`.
pub fn profile(
    model: &ProcessModel,
    p: f64,
    horizon: usize,
    reps: usize,
    seed: u64,
) -> Result<DependenceProfile> {
    model.validate()?;
    check_mc_args(p, reps)?;
    if horizon < 4 {
        return Err(Error::InvalidInput(format!(
            "horizon H = {horizon} must be >= 4"
        )));
    }
    let n = model.n_dim();
    let powers = coupled_powers(model, horizon, p, reps, seed);
    let mut delta = vec![Vec::with_capacity(horizon + 1); n];
    let mut delta_se = vec![Vec::with_capacity(horizon + 1); n];
    for t in 0..=horizon {
        for i in 0..n {
            let (e, s) = lp_norm_with_se(&column(&powers, t * n + i), p);
            delta[i].push(e);
            delta_se[i].push(s);
        }
    }
    DependenceProfile::from_delta(p, delta, delta_se, reps)
}

/// `m`-dependent approximation `Z̃_t = E(Z_t | ε_{t−m}, …, ε_t)` built on the
/// same innovation stream as [`simulate`] with the same seed.
///
/// Linear models use the exact truncation `Σ_{j≤m} a_j ε_{t−j}`. Nonlinear
/// models average `inner_reps` runs in which the innovations before `t − m`
/// are redrawn.
pub fn m_dependent_approx(
    model: &ProcessModel,
    m: usize,
    t_len: usize,
    seed: u64,
    inner_reps: usize,
) -> Result<MultivariateSeries> {
    model.validate()?;
    if t_len < 2 {
        return Err(Error::InsufficientData(format!("T = {t_len} < 2")));
    }
    if !model.is_linear() && inner_reps < MIN_INNER_REPS {
        return Err(Error::InsufficientInnerReps(inner_reps));
    }
    let n = model.n_dim();
    let b = model.innovation_dim();
    let burn = model.burn_in();
    let mut rng = ProcessModel::rng(seed);
    let eps = model.draw_innovations(&mut rng, burn + t_len);
    let rows: Vec<Vec<f64>> = if model.is_linear() {
        let coeffs: Vec<nalgebra::DMatrix<f64>> = (0..=m)
            .map(|j| model.ma_coefficient(j).expect("linear model"))
            .collect();
        (burn..burn + t_len)
            .into_par_iter()
            .map(|idx| {
                let mut z = vec![0.0; n];
                for (j, a) in coeffs.iter().enumerate().take(idx.min(m) + 1) {
                    let e = &eps[(idx - j) * b..(idx - j + 1) * b];
                    for (i, zi) in z.iter_mut().enumerate() {
                        *zi += (0..b).map(|k| a[(i, k)] * e[k]).sum::<f64>();
                    }
                }
                z
            })
            .collect()
    } else {
        let lead = model.truncation_horizon();
        let inner_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
        (burn..burn + t_len)
            .into_par_iter()
            .map(|idx| {
                let kept = idx.min(m) + 1;
                let recent = &eps[(idx + 1 - kept) * b..(idx + 1) * b];
                let mut rng = rep_rng(inner_seed, idx);
                let mut acc = vec![MeanVar::default(); n];
                for _ in 0..inner_reps {
                    let mut stream = model.draw_innovations(&mut rng, lead);
                    stream.extend_from_slice(recent);
                    let z = model.filter(&stream);
                    let last = &z[z.len() - n..];
                    acc.iter_mut().zip(last).for_each(|(a, v)| a.push(*v));
                }
                acc.iter().map(|a| a.mean).collect()
            })
            .collect()
    };
    series_from_row_major(&rows.concat(), n)
}

/// Decay and admissibility diagnostics for the limit theorems'
/// preconditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub p: f64,
    /// `p` used in the thresholds (halved in the independent-components mode).
    pub p_effective: f64,
    pub delta_param: f64,
    pub geometric: DecayTest,
    pub d_exponent: Option<f64>,
    pub theta_exponent: Option<f64>,
    pub alpha1_threshold: f64,
    pub alpha2_threshold: f64,
    pub d_power_law: Verdict,
    pub theta_power_law: Verdict,
    pub bandwidth_admissible: bool,
    pub b: f64,
    pub b_lower: f64,
    /// `p > 4`, needed for the moment-convergence statement.
    pub moments_theorem1: bool,
    /// `p ≥ 4`, needed for the multivariate Gumbel limit.
    pub moments_theorem2: bool,
    pub independent_components: bool,
}

/// Power-law exponent `α` in `x_m = O(m^{−α})` fitted over `m = 1..=H`.
fn power_law(seq: &[f64], threshold: f64) -> (Option<f64>, Verdict) {
    let tail = &seq[1..];
    let k = tail.len();
    if k >= 2 && tail[k - 1] == 0.0 && tail[k - 2] == 0.0 {
        // Eventually zero: O(m^{−α}) for every α.
        return (Some(f64::INFINITY), Verdict::Pass);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = tail
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(m, v)| (((m + 1) as f64).ln(), v.ln()))
        .unzip();
    if x.len() < 3 {
        return (None, Verdict::Inconclusive);
    }
    match LineFit::fit(&x, &y) {
        Some(fit) => {
            let alpha = -fit.slope;
            let verdict = if alpha > threshold {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            (Some(alpha), verdict)
        }
        None => (None, Verdict::Inconclusive),
    }
}

/// Evaluates the geometric-decay condition, the power-law alternative with
/// thresholds `α₁ > max[1/2 − (p−4)/(2δp), 2δ/p]` and
/// `α₂ > max[1 − (p−4)/(2δp), 0]`, and the bandwidth window
/// `0 < b_lower < b < 1`. With `independent_components`, `p` is replaced by
/// `p/2` throughout.
pub fn check_conditions(
    profile: &DependenceProfile,
    p: f64,
    b: f64,
    b_lower: f64,
    delta_param: f64,
    independent_components: bool,
) -> Result<ConditionReport> {
    if !(delta_param > 0.0 && delta_param.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "delta_param = {delta_param} must be positive"
        )));
    }
    let pe = if independent_components { p / 2.0 } else { p };
    let common = (pe - 4.0) / (2.0 * delta_param * pe);
    let alpha1 = (0.5 - common).max(2.0 * delta_param / pe);
    let alpha2 = (1.0 - common).max(0.0);
    let (d_exponent, d_power_law) = power_law(&profile.d_seq, alpha1);
    let (theta_exponent, theta_power_law) = power_law(&profile.theta, alpha2);
    Ok(ConditionReport {
        p,
        p_effective: pe,
        delta_param,
        geometric: geometric_decay_test(&profile.delta),
        d_exponent,
        theta_exponent,
        alpha1_threshold: alpha1,
        alpha2_threshold: alpha2,
        d_power_law,
        theta_power_law,
        bandwidth_admissible: 0.0 < b_lower && b_lower < b && b < 1.0,
        b,
        b_lower,
        moments_theorem1: pe > 4.0,
        moments_theorem2: pe >= 4.0,
        independent_components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn white_noise_delta() {
        let wn = ProcessModel::white_noise(1);
        let d0 = coupled_delta(&wn, 0, 2.0, 20_000, 1).unwrap();
        assert!((d0.estimate[0] - SQRT2).abs() < 3.0 * d0.se[0], "{d0:?}");
        for t in 1..4 {
            let d = coupled_delta(&wn, t, 3.0, 100, 2).unwrap();
            assert_eq!(d.estimate[0], 0.0);
        }
    }

    #[test]
    fn ar1_delta_matches_linear_oracle() {
        let m = ProcessModel::ar1(0.5);
        let d = coupled_delta(&m, 3, 2.0, 20_000, 5).unwrap();
        assert!((d.estimate[0] - 0.125 * SQRT2).abs() < 3.0 * d.se[0]);
        assert!((0.125 * SQRT2 - 0.176_777).abs() < 1e-6);
    }

    #[test]
    fn mc_argument_floors() {
        let m = ProcessModel::ar1(0.5);
        assert!(coupled_delta(&m, 0, 2.0, 99, 1).is_err());
        assert!(coupled_delta(&m, 0, 0.5, 200, 1).is_err());
        assert!(profile(&m, 2.0, 3, 200, 1).is_err());
    }

    #[test]
    fn white_noise_profile() {
        let p = profile(&ProcessModel::white_noise(1), 2.0, 8, 5000, 3).unwrap();
        assert!(p.warnings.is_empty());
        assert_eq!(p.theta[0], p.delta[0]);
        assert!((p.theta[0] - SQRT2).abs() < 3.0 * p.coords[0].theta_se[0]);
        assert!(p.theta[1..].iter().all(|v| *v == 0.0));
        assert_eq!(p.coords[0].theta_remainder, Some(0.0));
    }

    #[test]
    fn ar1_profile_aggregates() {
        let p = profile(&ProcessModel::ar1(0.5), 2.0, 20, 10_000, 9).unwrap();
        let c = &p.coords[0];
        assert!(c.tail.is_some());
        assert!((c.decay.rho - 0.5).abs() < 1e-6);
        let se = c.theta_se[0];
        assert!(
            (p.theta[0] - 2.0 * SQRT2).abs() < 3.0 * se,
            "{} ± {se}",
            p.theta[0]
        );
        assert!(p.theta.windows(2).all(|w| w[1] <= w[0]));
        // Ψ ≤ Θ for p' = 2 on nonnegative sequences.
        assert!(p.psi.iter().zip(&p.theta).all(|(s, t)| s <= t));
    }

    #[test]
    fn psi_uses_p_prime_two_for_p_four() {
        let p = profile(&ProcessModel::ar1(0.5), 4.0, 24, 10_000, 4).unwrap();
        let c4 = p.delta[0];
        let oracle = c4 / (1.0f64 - 0.25).sqrt();
        assert!(
            (p.psi[0] - oracle).abs() < 1e-9 * oracle,
            "{} vs {oracle}",
            p.psi[0]
        );
    }

    #[test]
    fn aggregates_recompute_from_delta() {
        let delta = vec![vec![1.0, 0.4, 0.3, 0.1, 0.0, 0.0]];
        let p = DependenceProfile::from_delta(3.0, delta.clone(), vec![vec![0.0; 6]], 0).unwrap();
        for m in 0..6 {
            let theta: f64 = delta[0][m..].iter().sum();
            assert!((p.theta[m] - theta).abs() < 1e-12);
            let psi = delta[0][m..].iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((p.psi[m] - psi).abs() < 1e-12);
            let d: f64 = delta[0].iter().map(|v| v.min(p.psi[m])).sum();
            assert!((p.d_seq[m] - d).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_harmonic_sequence() {
        let delta: Vec<f64> = (0..=30).map(|t| 1.0 / (t as f64 + 1.0)).collect();
        let p = DependenceProfile::from_delta(8.0, vec![delta], vec![vec![0.0; 31]], 0).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].starts_with("DecayFitWarning"));
        assert_eq!(p.coords[0].theta_remainder, None);
        let r = check_conditions(&p, 8.0, 0.4, 0.2, 1.0, false).unwrap();
        assert_eq!(r.geometric.verdict, Verdict::Fail);
        // max[1/2 − 4/16, 2/8] and max[1 − 4/16, 0]
        assert!((r.alpha1_threshold - 0.25).abs() < 1e-15);
        assert!((r.alpha2_threshold - 0.75).abs() < 1e-15);
        assert!(r.theta_exponent.is_some() && r.d_exponent.is_some());
    }

    #[test]
    fn conditions_for_known_models() {
        let wn = profile(&ProcessModel::white_noise(1), 8.0, 10, 500, 1).unwrap();
        let r = check_conditions(&wn, 8.0, 0.4, 0.2, 1.0, false).unwrap();
        assert_eq!(r.geometric.verdict, Verdict::Pass);
        assert!(r.bandwidth_admissible && r.moments_theorem1);
        let ar = profile(&ProcessModel::ar1(0.5), 8.0, 30, 2000, 1).unwrap();
        let r = check_conditions(&ar, 8.0, 0.4, 0.2, 1.0, false).unwrap();
        assert_eq!(r.geometric.verdict, Verdict::Pass);
        assert!((r.geometric.rho - 0.5).abs() < 0.05);
        assert_eq!(r.theta_power_law, Verdict::Pass);
        let relaxed = check_conditions(&ar, 8.0, 0.4, 0.2, 1.0, true).unwrap();
        assert_eq!(relaxed.p_effective, 4.0);
        assert!(!relaxed.moments_theorem1 && relaxed.moments_theorem2);
        assert!(
            !check_conditions(&ar, 8.0, 0.3, 0.5, 1.0, false)
                .unwrap()
                .bandwidth_admissible
        );
    }

    #[test]
    fn simulate_is_deterministic() {
        let m = ProcessModel::default_var1();
        assert_eq!(
            simulate(&m, 300, 42).unwrap(),
            simulate(&m, 300, 42).unwrap()
        );
        assert_ne!(
            simulate(&m, 300, 42).unwrap(),
            simulate(&m, 300, 43).unwrap()
        );
    }

    #[test]
    fn m_dependent_linear_cases() {
        let wn = ProcessModel::white_noise(2);
        let z = simulate(&wn, 50, 8).unwrap();
        assert_eq!(m_dependent_approx(&wn, 0, 50, 8, 0).unwrap(), z);

        let ar = ProcessModel::ar1(0.5);
        let z = simulate(&ar, 20_000, 21).unwrap();
        let mut prev = f64::INFINITY;
        for m in [0usize, 1, 2, 4, 8] {
            let zt = m_dependent_approx(&ar, m, 20_000, 21, 0).unwrap();
            let diff: Vec<f64> = z
                .column(0)
                .iter()
                .zip(zt.column(0))
                .map(|(a, b)| a - b)
                .collect();
            let rms = (diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64).sqrt();
            // ‖Z − Z̃‖₂ = φ^{m+1} / sqrt(1 − φ²) for unit innovations.
            let oracle = 0.5f64.powi(m as i32 + 1) / 0.75f64.sqrt();
            assert!(
                (rms - oracle).abs() < 0.05 * oracle,
                "m={m}: {rms} vs {oracle}"
            );
            assert!(rms <= prev);
            prev = rms;
        }
    }

    #[test]
    fn m_dependent_nonlinear() {
        let tar = ProcessModel::ThresholdAr1 {
            a: 0.5,
            b: -0.3,
            sigma2: 1.0,
        };
        assert!(matches!(
            m_dependent_approx(&tar, 2, 100, 1, 10),
            Err(Error::InsufficientInnerReps(10))
        ));
        let z = simulate(&tar, 400, 6).unwrap();
        let e2 = |m: usize| {
            let zt = m_dependent_approx(&tar, m, 400, 6, 60).unwrap();
            z.column(0)
                .iter()
                .zip(zt.column(0))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / 400.0
        };
        let (small, large) = (e2(0), e2(6));
        assert!(large < small, "{large} !< {small}");
    }
}
