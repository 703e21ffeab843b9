//! Lag-window estimation of the spectral density matrix of a multivariate
//! stationary time series, with Gumbel-limit simultaneous bands, pointwise
//! CLT intervals, coupling-based dependence measures and a Monte Carlo
//! harness that checks the limit theory at desk scale.
//!
//! The typical pipeline:
//!
//! ```no_run
//! use lagspec::{acov, inference, spectral, Kernel, MultivariateSeries};
//!
//! let series = MultivariateSeries::load_csv("data.csv", true)?.center();
//! let bw = spectral::Bandwidth::with_defaults(series.t_len())?;
//! let c = acov::sample_autocov(&series, bw.value())?;
//! let est = spectral::estimate_spectrum(&c, &Kernel::Bartlett, &bw, &spectral::theorem_grid(&bw))?;
//! let entries = inference::parse_entries("all", series.n_dim())?;
//! let band = inference::uniform_band(&est, &Kernel::Bartlett, 0.95, &entries, true)?;
//! # Ok::<(), lagspec::Error>(())
//! ```

pub mod acov;
pub mod cli;
pub mod dependence;
pub mod error;
pub mod harness;
pub mod inference;
pub mod kernels;
pub mod model;
pub mod quad;
pub mod series;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::Kernel;
pub use model::ProcessModel;
pub use series::MultivariateSeries;
pub use spectral::{Bandwidth, SpectralGrid};

/// Version tag embedded in every JSON document the crate writes.
pub const SCHEMA_VERSION: &str = "1.0";
