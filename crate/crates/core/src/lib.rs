//! Simulation and moment analysis toolkit for the CDGARCH(p,q) process, the
//! continuous-time GARCH model whose variance `X` feeds back on its own past
//! through a level kernel `f_mu` (delay `p`) and on past squared noise through
//! a kernel `f_nu` (delay `q`).
//!
//! The crate generates the driving Lévy noise ([`noise`]), simulates the
//! price/variance pair with a grid Euler recursion ([`euler`]) and with an
//! exact event-driven integrator for compound-Poisson noise ([`events`]),
//! solves the deterministic mean equation two ways ([`mean`]), checks the
//! stationarity/positivity/moment conditions and scans the characteristic
//! function for roots ([`stability`]), and estimates the quantities those
//! conditions predict from simulated ensembles ([`stats`]).

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ensemble;
pub mod error;
pub mod euler;
pub mod events;
pub mod history;
pub mod kernels;
pub mod mean;
pub mod noise;
pub mod path;
pub mod quad;
pub mod rng;
pub mod stability;
pub mod stats;
pub mod validation;

pub use config::Config;
pub use ensemble::{euler_ensemble, event_ensemble};
pub use error::{Error, Result};
pub use euler::{euler_returns, euler_simulate};
pub use events::{compare_paths, event_simulate, xi_evaluate, EventOptions};
pub use history::HistorySegment;
pub use kernels::{combine, kernel_norms, volterra_f, Combined, DelayKernel, DelayModel, KernelForm, KernelNorms};
pub use mean::{renewal_kernel_zeta, solve_mean_fde, solve_mean_renewal, MeanPath, MeanSolver};
pub use noise::{
    derive_moments, sample_increments, sample_jump_events, truncate_jumps, IncrementSeries, JumpLog, NoiseSpec,
};
pub use path::{EventRecord, PathMeta, SamplePath, Scheme};
pub use stability::{
    characteristic_delta, moment_bound_report, positivity_floor, scan_roots, stability_report, stationary_mean,
    theoretical_return_autocov, MomentBounds, Rect, RootScan, StabilityReport,
};
pub use stats::{
    empirical_autocov, ensemble_mean, return_autocov_ensemble, weak_dependence_check, CovRow, ValidationRow,
};
pub use validation::{Battery, Criterion, Suite};
