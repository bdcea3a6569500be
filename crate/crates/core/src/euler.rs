//! Grid Euler scheme for the price/variance pair.
//!
//! With lag counts `P = p/delta`, `Q = q/delta` the variance recursion is
//!
//! ```text
//! X_n = delta eta + (1 - c_mu delta) X_{n-1} + c_nu X_{n-1} dS_n
//!     + sum_{k=1..P} delta^2 f_mu(-k delta) X_{n-k}
//!     + sum_{k=1..Q} delta f_nu(-k delta) X_{n-k} dS_{n-k+1}
//! ```
//!
//! and the price follows `Y_n = Y_{n-1} + sqrt(X_{n-1}) dL_n`.

use crate::error::{Error, Result};
use crate::history::HistorySegment;
use crate::kernels::DelayModel;
use crate::noise::IncrementSeries;
use crate::path::{lag_steps, PathMeta, SamplePath, Scheme};

/// Coefficients of the recursion written as a GARCH-type filter:
/// `X_n = omega + sum beta[k-1] X_{n-k} + sum alpha[k-1] X_{n-k} dS_{n-k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerCoefficients {
    pub omega: f64,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Number of grid steps in a delay of length `len`; the delay must be a
/// multiple of `delta` up to `1e-9` relative.
pub fn lag_count(len: f64, delta: f64, what: &'static str) -> Result<usize> {
    if len == 0.0 {
        return Ok(0);
    }
    let k = len / delta;
    if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
        return Err(Error::OffGrid { what, value: len, step: delta });
    }
    Ok(k.round() as usize)
}

pub fn euler_coefficients(model: &DelayModel, delta: f64) -> Result<EulerCoefficients> {
    if !(delta > 0.0) {
        return Err(crate::error::invalid(format!("delta must be > 0, got {delta}")));
    }
    let lag_p = lag_count(model.p(), delta, "p")?;
    let lag_q = lag_count(model.q(), delta, "q")?;
    let mut beta: Vec<f64> =
        (1..=lag_p.max(1)).map(|k| delta * delta * model.f_mu_value(-(k as f64) * delta)).collect();
    beta[0] += 1.0 - model.c_mu * delta;
    let mut alpha: Vec<f64> = (1..=lag_q.max(1)).map(|k| delta * model.f_nu_value(-(k as f64) * delta)).collect();
    alpha[0] += model.c_nu;
    Ok(EulerCoefficients { omega: delta * model.eta, beta, alpha })
}

/// Runs the recursion over all future steps of `inc`.
///
/// Negative variance values are kept (the scheme is not positivity
/// preserving) and their grid indices recorded in `meta.negative_x`; the
/// price update uses `sqrt(max(X, 0))`.
pub fn euler_simulate(model: &DelayModel, inc: &IncrementSeries, phi: &HistorySegment, y0: f64) -> Result<SamplePath> {
    model.validate()?;
    let delta = inc.delta;
    let coef = euler_coefficients(model, delta)?;
    let r = model.r();
    if !phi.covers(r) {
        return Err(crate::error::invalid(format!("initial segment covers {} < r = {r}", phi.r())));
    }
    let n_hist = lag_count(r, delta, "r")?;
    let n_future = inc.n_future();
    let needed_ds_history = coef.alpha.len().saturating_sub(1);
    if needed_ds_history > inc.n_history {
        log::warn!(
            "increment series has {} history steps, recursion needs {}; missing dS are taken as zero",
            inc.n_history,
            needed_ds_history
        );
    }
    let ds_at = |n: i64| inc.at(n).map_or(0.0, |(_, ds)| ds);

    // x[i] <-> step n = i - offset
    let offset = n_hist;
    let mut x = Vec::with_capacity(offset + n_future + 1);
    for i in 0..=offset {
        let n = i as i64 - offset as i64;
        x.push(phi.value(n as f64 * delta));
    }
    let mut y = Vec::with_capacity(n_future + 1);
    y.push(y0);
    let mut meta = PathMeta::new(Scheme::Euler);
    for step in 1..=n_future {
        let n = step as i64;
        let i = offset + step;
        let hist = |k: usize| x[i - k];
        let mut next = coef.omega;
        for (k, b) in coef.beta.iter().enumerate() {
            next += b * hist(k + 1);
        }
        for (k, a) in coef.alpha.iter().enumerate() {
            next += a * hist(k + 1) * ds_at(n - k as i64);
        }
        if !next.is_finite() {
            return Err(Error::NonFinite("euler variance"));
        }
        if next < 0.0 {
            meta.negative_x.push(i);
        }
        let (dl, _) = inc.at(n).expect("future step present");
        let prev = *y.last().expect("nonempty");
        y.push(prev + x[i - 1].max(0.0).sqrt() * dl);
        x.push(next);
    }
    Ok(SamplePath { t0: -(offset as f64) * delta, delta, n_history: offset, x, y, events: Vec::new(), meta })
}

/// Returns `Y_t - Y_{t - tau}` at every grid point `t >= tau`.
pub fn euler_returns(path: &SamplePath, tau: f64) -> Result<Vec<f64>> {
    let k = lag_steps(path.delta, tau, "tau")?;
    if k >= path.y.len() {
        return Err(crate::error::invalid(format!("path too short for return lag {tau}")));
    }
    Ok((k..path.y.len()).map(|n| path.y[n] - path.y[n - k]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DelayKernel;
    use crate::noise::{sample_increments, NoiseSpec};
    use proptest::prelude::*;

    fn quiet() -> NoiseSpec {
        NoiseSpec::new(0.0, 0.0, 0.0, 1.0, 0).unwrap()
    }

    fn zeros(delta: f64, n_history: usize, n: usize) -> IncrementSeries {
        IncrementSeries { delta, n_history, dl: vec![0.0; n_history + n], ds: vec![0.0; n_history + n] }
    }

    #[test]
    fn noiseless_cogarch_is_linear_recursion() {
        let m = DelayModel::cogarch(1.0, 1.0, 0.5, quiet()).unwrap();
        let phi = HistorySegment::constant(0.0, 0.0).unwrap();
        let path = euler_simulate(&m, &zeros(0.1, 0, 200), &phi, 0.0).unwrap();
        let x = &path.x[path.n_history..];
        assert!((x[1] - 0.1).abs() < 1e-15);
        assert!((x[2] - 0.19).abs() < 1e-15);
        assert!((x[3] - 0.271).abs() < 1e-15);
        for (n, v) in x.iter().enumerate() {
            assert!((v - (1.0 - 0.9f64.powi(n as i32))).abs() < 1e-12);
        }
    }

    #[test]
    fn single_jump_adds_c_nu_x_ds() {
        let m = DelayModel::cogarch(0.7, 1.3, 0.4, quiet()).unwrap();
        let phi = HistorySegment::constant(0.0, 2.0).unwrap();
        let base = zeros(0.05, 0, 40);
        let mut kicked = base.clone();
        kicked.ds[9] = 1.7; // step 10
        let a = euler_simulate(&m, &base, &phi, 0.0).unwrap();
        let b = euler_simulate(&m, &kicked, &phi, 0.0).unwrap();
        let k = b.n_history + 10;
        assert!((b.x[k] - a.x[k] - 0.4 * b.x[k - 1] * 1.7).abs() < 1e-14);
        assert_eq!(a.x[k - 1], b.x[k - 1]);
    }

    #[test]
    fn garch_reduction_when_q_is_zero() {
        let fm = DelayKernel::exponential(1.0, 2.0, 0.35).unwrap();
        let m = DelayModel::new(1.0, 3.0, 0.5, Some(fm), None, quiet()).unwrap();
        let c = euler_coefficients(&m, 0.05).unwrap();
        assert_eq!(c.beta.len(), (0.35f64 / 0.05).ceil() as usize);
        assert_eq!(c.alpha, vec![0.5]);
        assert!((c.omega - 0.05).abs() < 1e-16);
        assert!((c.beta[0] - (1.0 - 0.15 + 0.0025 * m.f_mu_value(-0.05))).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_divisible_delays() {
        let fm = DelayKernel::exponential(1.0, 2.0, 0.33).unwrap();
        let m = DelayModel::new(1.0, 3.0, 0.5, Some(fm), None, quiet()).unwrap();
        let phi = HistorySegment::constant(1.0, 1.0).unwrap();
        assert!(matches!(euler_simulate(&m, &zeros(0.1, 4, 10), &phi, 0.0), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn flags_negative_excursions() {
        // huge c_mu delta overshoots below zero
        let m = DelayModel::cogarch(0.1, 30.0, 0.1, quiet()).unwrap();
        let phi = HistorySegment::constant(0.0, 5.0).unwrap();
        let p = euler_simulate(&m, &zeros(0.1, 0, 5), &phi, 0.0).unwrap();
        assert!(!p.meta.negative_x.is_empty());
        assert!(p.x[p.meta.negative_x[0]] < 0.0);
    }

    #[test]
    fn deterministic_given_inputs() {
        let fm = DelayKernel::exponential(0.5, 1.0, 0.5).unwrap();
        let fnu = DelayKernel::exponential(0.3, 2.0, 0.3).unwrap();
        let noise = NoiseSpec::new(0.2, 1.0, 0.0, 0.5, 3).unwrap();
        let m = DelayModel::new(0.5, 2.0, 0.3, Some(fm), Some(fnu), noise).unwrap();
        let inc = sample_increments(&noise, 0.01, 50, 500).unwrap();
        let phi = HistorySegment::constant(0.5, 0.4).unwrap();
        assert_eq!(euler_simulate(&m, &inc, &phi, 1.0).unwrap(), euler_simulate(&m, &inc, &phi, 1.0).unwrap());
    }

    #[test]
    fn returns_on_grid() {
        let mut path = euler_simulate(
            &DelayModel::cogarch(1.0, 1.0, 0.5, quiet()).unwrap(),
            &zeros(0.25, 0, 12),
            &HistorySegment::constant(0.0, 1.0).unwrap(),
            3.0,
        )
        .unwrap();
        assert!(euler_returns(&path, 1.0).unwrap().iter().all(|&r| r == 0.0));
        path.y = (0..path.y.len()).map(|n| n as f64 * 0.25).collect();
        let r = euler_returns(&path, 1.0).unwrap();
        assert!(r.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert_eq!(r.len(), path.y.len() - 4);
        assert!(euler_returns(&path, 0.3).is_err());
    }

    #[test]
    fn returns_match_direct_indexing() {
        let noise = NoiseSpec::new(0.3, 2.0, 0.0, 1.0, 17).unwrap();
        let m = DelayModel::cogarch(1.0, 2.0, 0.5, noise).unwrap();
        let inc = sample_increments(&noise, 0.01, 0, 2000).unwrap();
        let path = euler_simulate(&m, &inc, &HistorySegment::constant(0.0, 1.0).unwrap(), 0.0).unwrap();
        let r = euler_returns(&path, 0.5).unwrap();
        for n in (50..2000).step_by(19) {
            assert_eq!(r[n - 50], path.y[n] - path.y[n - 50]);
        }
    }

    proptest! {
        #[test]
        fn affine_in_history_and_eta(scale in 0.1f64..5.0, x0 in 0.0f64..3.0, eta in 0.01f64..2.0) {
            let fm = DelayKernel::exponential(0.8, 1.0, 0.5).unwrap();
            let m = DelayModel::new(eta, 2.0, 0.3, Some(fm.clone()), None, quiet()).unwrap();
            let ms = DelayModel::new(eta * scale, 2.0, 0.3, Some(fm), None, quiet()).unwrap();
            let inc = zeros(0.05, 10, 100);
            let a = euler_simulate(&m, &inc, &HistorySegment::constant(0.5, x0).unwrap(), 0.0).unwrap();
            let b = euler_simulate(&ms, &inc, &HistorySegment::constant(0.5, x0 * scale).unwrap(), 0.0).unwrap();
            for (u, v) in a.x.iter().zip(&b.x) {
                prop_assert!((u * scale - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }
}
