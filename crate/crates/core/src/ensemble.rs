//! Independent paths in parallel, path `i` drawing from substream `i`.

use rayon::prelude::*;

use crate::error::Result;
use crate::euler::{euler_simulate, lag_count};
use crate::events::{event_simulate, EventOptions};
use crate::history::HistorySegment;
use crate::kernels::DelayModel;
use crate::noise::{sample_increments_with, sample_jump_events_with};
use crate::path::SamplePath;
use crate::rng::path_stream;

/// Event-driven paths on `(0, horizon]`. Each path draws its jumps on
/// `(-q, horizon]` so that the `f_nu` window is filled from the start.
pub fn event_ensemble(
    model: &DelayModel,
    phi: &HistorySegment,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    opts: &EventOptions,
) -> Result<Vec<SamplePath>> {
    let start = -model.q();
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_stream(seed, i as u64);
            let log = sample_jump_events_with(&model.noise, (start, horizon), &mut rng)?;
            let mut path = event_simulate(model, &log, phi, 0.0, opts)?;
            path.meta.seed = Some(seed);
            Ok(path)
        })
        .collect()
}

/// Euler paths on the grid `k delta`, `0 <= k delta <= horizon`.
pub fn euler_ensemble(
    model: &DelayModel,
    phi: &HistorySegment,
    delta: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SamplePath>> {
    let n_hist = lag_count(model.r(), delta, "r")?;
    let n_future = (horizon / delta + 1e-9).floor() as usize;
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_stream(seed, i as u64);
            let inc = sample_increments_with(&model.noise, delta, n_hist, n_future, &mut rng)?;
            let mut path = euler_simulate(model, &inc, phi, 0.0)?;
            path.meta.seed = Some(seed);
            Ok(path)
        })
        .collect()
}
