//! Lag-window kernels.
//!
//! Every kernel is even, bounded, equal to one at the origin and vanishes
//! outside `[-1, 1]`. Alongside the window itself each kernel carries the
//! constants used downstream:
//!
//! - `kappa = ∫ K(u)² du`, the variance constant of the CLT and of the
//!   maximum-deviation normalisation;
//! - the characteristic exponent `q` and limit constant
//!   `K_q = lim_{x→0} (1 − K(x)) / |x|^q`, which set the bias order
//!   `O(B_T^{-q})`;
//! - whether the window's Fourier transform is nonnegative, in which case
//!   lag-window estimates built from divisor-`T` autocovariances are positive
//!   semidefinite.
//!
//! The admissibility condition on `kappa` is taken as `kappa < ∞`. The
//! truncated window has `kappa = 2`; kernels with `kappa >= 1` produce a
//! warning through [`Kernel::kappa_warning`] rather than being rejected.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `1 − |u|`.
    Bartlett,
    /// Cubic-spline window: `1 − 6u² + 6|u|³` on `|u| ≤ 1/2`, `2(1 − |u|)³` beyond.
    Parzen,
    /// `(1 + cos πu) / 2`.
    TukeyHanning,
    /// Indicator of `[-1, 1]`.
    Truncated,
    /// User-supplied window, linearly interpolated.
    Tabulated(TabulatedKernel),
}

/// Bias-order metadata `(q, K_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasOrder {
    /// Characteristic exponent; `f64::INFINITY` for the truncated window,
    /// NaN when unknown (tabulated kernels).
    pub q: f64,
    /// Limit constant, `None` where the limit is infinite or undefined.
    pub k_q: Option<f64>,
    /// Exponent obtained from the first-order expansion of `1 − K(x)` when it
    /// differs from the reported `q`.
    pub expansion_q: Option<(f64, f64)>,
    pub note: Option<&'static str>,
}

const BARTLETT_NOTE: &str = "reported q = 2 follows the cited bias remark; expanding \
1 - K(x) = |x| gives q = 1, K_q = 1 under Hannan's definition. The bias-rate experiment \
reports the fitted slope instead of asserting either value.";

impl Kernel {
    pub const CATALOG: [Kernel; 4] = [
        Kernel::Bartlett,
        Kernel::Parzen,
        Kernel::TukeyHanning,
        Kernel::Truncated,
    ];

    /// Parses `bartlett|parzen|tukey|truncated|file:<path>`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec.trim().to_ascii_lowercase().as_str() {
            "bartlett" => Ok(Kernel::Bartlett),
            "parzen" => Ok(Kernel::Parzen),
            "tukey" | "tukey_hanning" | "tukey-hanning" => Ok(Kernel::TukeyHanning),
            "truncated" => Ok(Kernel::Truncated),
            _ => match spec.trim().strip_prefix("file:") {
                Some(path) => Ok(Kernel::Tabulated(TabulatedKernel::load_csv(path)?)),
                None => Err(Error::InvalidKernel(format!(
                    "unknown kernel {spec:?}; expected bartlett|parzen|tukey|truncated|file:<path>"
                ))),
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Bartlett => "bartlett",
            Kernel::Parzen => "parzen",
            Kernel::TukeyHanning => "tukey_hanning",
            Kernel::Truncated => "truncated",
            Kernel::Tabulated(_) => "tabulated",
        }
    }

    /// `K(u)`; exactly zero for `|u| > 1`.
    pub fn eval(&self, u: f64) -> f64 {
        let a = u.abs();
        if a > 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Bartlett => 1.0 - a,
            Kernel::Parzen => {
                if a <= 0.5 {
                    1.0 - 6.0 * a * a + 6.0 * a * a * a
                } else {
                    let r = 1.0 - a;
                    2.0 * r * r * r
                }
            }
            Kernel::TukeyHanning => 0.5 * (1.0 + (PI * a).cos()),
            Kernel::Truncated => 1.0,
            Kernel::Tabulated(t) => t.eval_abs(a),
        }
    }

    /// `∫_{-1}^{1} K(u)² du` in closed form.
    pub fn kappa(&self) -> f64 {
        match self {
            Kernel::Bartlett => 2.0 / 3.0,
            Kernel::Parzen => 151.0 / 280.0,
            Kernel::TukeyHanning => 0.75,
            Kernel::Truncated => 2.0,
            Kernel::Tabulated(t) => t.kappa,
        }
    }

    /// `∫ K²` by adaptive quadrature, split at the window's kinks.
    pub fn kappa_numeric(&self) -> f64 {
        let breaks: Vec<f64> = match self {
            Kernel::Tabulated(t) => {
                let mut b: Vec<f64> = t.abscissae.iter().rev().map(|u| -u).collect();
                b.extend(t.abscissae.iter().skip(1));
                b
            }
            _ => vec![-1.0, -0.5, 0.0, 0.5, 1.0],
        };
        quad::integrate_pieces(|u| self.eval(u).powi(2), &breaks, 1e-13)
    }

    pub fn bias_order(&self) -> BiasOrder {
        match self {
            Kernel::Bartlett => BiasOrder {
                q: 2.0,
                k_q: None,
                expansion_q: Some((1.0, 1.0)),
                note: Some(BARTLETT_NOTE),
            },
            Kernel::Parzen => BiasOrder {
                q: 2.0,
                k_q: Some(6.0),
                expansion_q: None,
                note: None,
            },
            Kernel::TukeyHanning => BiasOrder {
                q: 2.0,
                k_q: Some(PI * PI / 4.0),
                expansion_q: None,
                note: None,
            },
            Kernel::Truncated => BiasOrder {
                q: f64::INFINITY,
                k_q: None,
                expansion_q: None,
                note: None,
            },
            Kernel::Tabulated(_) => BiasOrder {
                q: f64::NAN,
                k_q: None,
                expansion_q: None,
                note: Some("bias order is not derived for tabulated kernels"),
            },
        }
    }

    /// Whether the window's Fourier transform is nonnegative.
    pub fn psd_guarantee(&self) -> bool {
        matches!(self, Kernel::Bartlett | Kernel::Parzen)
    }

    pub fn kappa_warning(&self) -> Option<String> {
        let kappa = self.kappa();
        (kappa >= 1.0).then(|| {
            format!(
                "kernel {} has kappa = {kappa}; the admissibility bound is read as kappa < infinity",
                self.name()
            )
        })
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kernel given by samples `(u, K(u))` on a grid symmetric about zero.
///
/// Only the nonnegative half is stored; evaluation interpolates linearly in
/// `|u|`, so evenness holds exactly. The shift-sum regularity condition on
/// the window is not checked.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    abscissae: Vec<f64>,
    ordinates: Vec<f64>,
    kappa: f64,
}

impl TabulatedKernel {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        const TOL: f64 = 1e-9;
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        if pts.iter().any(|(u, k)| !u.is_finite() || !k.is_finite()) {
            return Err(Error::InvalidKernel("non-finite table entry".into()));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[1].0 - w[0].0 <= 0.0) {
            return Err(Error::InvalidKernel("duplicate abscissae".into()));
        }
        if pts.iter().any(|(u, _)| u.abs() > 1.0 + TOL) {
            return Err(Error::InvalidKernel("support must lie in [-1, 1]".into()));
        }
        let half: Vec<(f64, f64)> = pts.iter().copied().filter(|(u, _)| *u >= -TOL).collect();
        let neg: Vec<(f64, f64)> = pts.iter().copied().filter(|(u, _)| *u <= TOL).collect();
        if half.len() != neg.len() {
            return Err(Error::InvalidKernel("grid is not symmetric about 0".into()));
        }
        for ((u, k), (nu, nk)) in half.iter().zip(neg.iter().rev()) {
            if (u + nu).abs() > TOL || (k - nk).abs() > TOL {
                return Err(Error::InvalidKernel(format!(
                    "K({u}) = {k} but K({nu}) = {nk}: table is not even"
                )));
            }
        }
        match half.first() {
            Some((u, k)) if u.abs() <= TOL && (k - 1.0).abs() <= TOL => {}
            _ => return Err(Error::InvalidKernel("table must contain K(0) = 1".into())),
        }
        let abscissae: Vec<f64> = half.iter().map(|p| p.0.abs()).collect();
        let mut ordinates: Vec<f64> = half.iter().map(|p| p.1).collect();
        ordinates[0] = 1.0;
        // Exact ∫ of the squared linear interpolant, doubled for evenness.
        let kappa = 2.0
            * abscissae
                .windows(2)
                .zip(ordinates.windows(2))
                .map(|(u, k)| (u[1] - u[0]) * (k[0] * k[0] + k[0] * k[1] + k[1] * k[1]) / 3.0)
                .sum::<f64>();
        Ok(Self {
            abscissae,
            ordinates,
            kappa,
        })
    }

    /// Two-column CSV `(u, K(u))`, optional header.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut points = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 2 {
                return Err(Error::RaggedRow {
                    row: idx + 1,
                    expected: 2,
                    found: cells.len(),
                });
            }
            match (cells[0].parse::<f64>(), cells[1].parse::<f64>()) {
                (Ok(u), Ok(k)) => points.push((u, k)),
                _ if idx == 0 => continue,
                (Err(_), _) => {
                    return Err(Error::Parse {
                        row: idx + 1,
                        col: 1,
                        msg: format!("cannot parse {:?}", cells[0]),
                    })
                }
                (_, Err(_)) => {
                    return Err(Error::Parse {
                        row: idx + 1,
                        col: 2,
                        msg: format!("cannot parse {:?}", cells[1]),
                    })
                }
            }
        }
        Self::new(&points)
    }

    fn eval_abs(&self, a: f64) -> f64 {
        let last = *self.abscissae.last().expect("table holds K(0)");
        if a > last {
            return 0.0;
        }
        let idx = self.abscissae.partition_point(|&u| u <= a);
        if idx == 0 {
            return self.ordinates[0];
        }
        if idx == self.abscissae.len() {
            return self.ordinates[idx - 1];
        }
        let (u0, u1) = (self.abscissae[idx - 1], self.abscissae[idx]);
        let (k0, k1) = (self.ordinates[idx - 1], self.ordinates[idx]);
        k0 + (k1 - k0) * (a - u0) / (u1 - u0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bartlett_values() {
        assert_eq!(Kernel::Bartlett.eval(0.0), 1.0);
        assert_eq!(Kernel::Bartlett.eval(0.5), 0.5);
        assert_eq!(Kernel::Bartlett.eval(-0.5), 0.5);
        assert_eq!(Kernel::Bartlett.eval(1.5), 0.0);
    }

    #[test]
    fn truncated_is_indicator() {
        assert_eq!(Kernel::Truncated.eval(0.999), 1.0);
        assert_eq!(Kernel::Truncated.eval(1.0), 1.0);
        assert_eq!(Kernel::Truncated.eval(1.001), 0.0);
    }

    #[test]
    fn closed_form_kappa_matches_quadrature() {
        // Oracles: 2/3 and 2 from the integrals by hand, Parzen from quadrature.
        assert!((Kernel::Bartlett.kappa() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(Kernel::Truncated.kappa(), 2.0);
        assert!((Kernel::Parzen.kappa() - 0.539_285_714_285_714_3).abs() < 1e-12);
        for k in Kernel::CATALOG {
            assert!(
                (k.kappa() - k.kappa_numeric()).abs() < 1e-10,
                "{k}: {} vs {}",
                k.kappa(),
                k.kappa_numeric()
            );
        }
    }

    #[test]
    fn bias_orders() {
        assert_eq!(Kernel::Truncated.bias_order().q, f64::INFINITY);
        let b = Kernel::Bartlett.bias_order();
        assert_eq!(b.q, 2.0);
        assert_eq!(b.expansion_q, Some((1.0, 1.0)));
        assert!(b.note.is_some());
        let p = Kernel::Parzen.bias_order();
        assert_eq!((p.q, p.k_q), (2.0, Some(6.0)));
        for x in [1e-2, 1e-3, 1e-4] {
            let ratio = (1.0 - Kernel::Parzen.eval(x)) / (x * x);
            assert!((ratio - 6.0).abs() <= 6.0 * x + 1e-6, "x={x}: {ratio}");
        }
    }

    #[test]
    fn hannan_limit_converges() {
        for k in Kernel::CATALOG {
            let bo = k.bias_order();
            let (q, kq) = match (bo.q.is_finite(), bo.k_q) {
                (true, Some(kq)) => (bo.q, kq),
                _ => continue,
            };
            let errs: Vec<f64> = (1..=5)
                .map(|e| {
                    let x = 10f64.powi(-e);
                    ((1.0 - k.eval(x)) / x.powf(q) - kq).abs()
                })
                .collect();
            // Rounding in 1 − K(x) dominates once x² nears machine epsilon.
            assert!(
                errs.windows(2).take(3).all(|w| w[1] <= w[0]),
                "{k}: {errs:?}"
            );
        }
        let errs: Vec<f64> = (1..=5)
            .map(|e| {
                let x = 10f64.powi(-e);
                ((1.0 - Kernel::Bartlett.eval(x)) / x - 1.0).abs()
            })
            .collect();
        assert!(errs.iter().all(|e| *e < 1e-10));
    }

    #[test]
    fn psd_flags_and_warnings() {
        assert!(Kernel::Bartlett.psd_guarantee());
        assert!(!Kernel::Truncated.psd_guarantee());
        assert!(Kernel::Truncated.kappa_warning().is_some());
        assert!(Kernel::Bartlett.kappa_warning().is_none());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(Kernel::from_spec("tukey").unwrap(), Kernel::TukeyHanning);
        assert!(matches!(
            Kernel::from_spec("gauss"),
            Err(Error::InvalidKernel(_))
        ));
    }

    #[test]
    fn tabulated_bartlett_reproduces_catalog() {
        let pts: Vec<(f64, f64)> = (-10..=10)
            .map(|i| {
                let u = i as f64 / 10.0;
                (u, 1.0 - u.abs())
            })
            .collect();
        let t = Kernel::Tabulated(TabulatedKernel::new(&pts).unwrap());
        for u in [-0.95, -0.33, 0.0, 0.2, 0.71, 1.2] {
            assert!((t.eval(u) - Kernel::Bartlett.eval(u)).abs() < 1e-12);
        }
        assert!((t.kappa() - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.kappa() - t.kappa_numeric()).abs() < 1e-10);
    }

    #[test]
    fn tabulated_rejects_bad_tables() {
        assert!(TabulatedKernel::new(&[(-1.0, 0.0), (0.0, 1.0), (0.5, 0.0)]).is_err());
        assert!(TabulatedKernel::new(&[(-1.0, 0.0), (0.0, 0.9), (1.0, 0.0)]).is_err());
        assert!(TabulatedKernel::new(&[(-2.0, 0.0), (0.0, 1.0), (2.0, 0.0)]).is_err());
        assert!(TabulatedKernel::new(&[(-1.0, 0.1), (0.0, 1.0), (1.0, 0.0)]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn even_bounded_compact(u in -2.0f64..2.0) {
                for k in Kernel::CATALOG {
                    prop_assert_eq!(k.eval(u), k.eval(-u));
                    prop_assert!(k.eval(u).abs() <= 1.0);
                    if u.abs() > 1.0 {
                        prop_assert_eq!(k.eval(u), 0.0);
                    }
                }
            }
        }
    }
}
