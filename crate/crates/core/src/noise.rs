//! Driving Lévy noise: a Brownian part plus a compound-Poisson part with
//! Gaussian jumps, its quadratic variation `S = [L, L]`, grid increments and
//! exact jump logs.

use std::io::{Read, Write};

use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{substream, SimRng, PRIMARY_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Brownian volatility of `L`.
    pub sigma_l: f64,
    /// Compound-Poisson intensity (jumps per unit time).
    pub lambda_l: f64,
    /// Jump-size mean.
    pub mu_j: f64,
    /// Jump-size standard deviation.
    pub sigma_j: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma_l: f64, lambda_l: f64, mu_j: f64, sigma_j: f64, seed: u64) -> Result<Self> {
        let spec = Self { sigma_l, lambda_l, mu_j, sigma_j, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Pure compound-Poisson noise (no Brownian part).
    pub fn compound_poisson(lambda_l: f64, mu_j: f64, sigma_j: f64, seed: u64) -> Result<Self> {
        Self::new(0.0, lambda_l, mu_j, sigma_j, seed)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_L", self.sigma_l), ("lambda_L", self.lambda_l), ("sigma_J", self.sigma_j)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.mu_j.is_finite() {
            return Err(invalid("mu_J must be finite"));
        }
        Ok(())
    }

    /// Both `sigma_L` and `lambda_L` zero: the noise is identically zero.
    pub fn is_degenerate(&self) -> bool {
        self.sigma_l == 0.0 && self.lambda_l == 0.0
    }

    pub fn kappa2(&self) -> f64 {
        derive_moments(self).0
    }

    pub fn kappa4(&self) -> f64 {
        derive_moments(self).1
    }

    fn jump_law(&self) -> Normal<f64> {
        Normal::new(self.mu_j, self.sigma_j).expect("validated jump law")
    }
}

/// `(kappa2, kappa4)`: mean and variance per unit time of `S`.
///
/// `kappa2 = sigma_L^2 + lambda_L E[Z^2]`, `kappa4 = lambda_L E[Z^4]` with
/// `Z ~ N(mu_J, sigma_J^2)`; the Brownian part of `S` is deterministic and
/// adds nothing to `kappa4`.
pub fn derive_moments(spec: &NoiseSpec) -> (f64, f64) {
    let (m, s) = (spec.mu_j, spec.sigma_j);
    let ez2 = m * m + s * s;
    let ez4 = m.powi(4) + 6.0 * m * m * s * s + 3.0 * s.powi(4);
    (spec.sigma_l * spec.sigma_l + spec.lambda_l * ez2, spec.lambda_l * ez4)
}

/// Grid increments of `L` and `S`.
///
/// Entry `i` is the increment over `((n-1) delta, n delta]` with
/// `n = i + 1 - n_history`, so the first `n_history` entries cover `(-r, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSeries {
    pub delta: f64,
    pub n_history: usize,
    pub dl: Vec<f64>,
    pub ds: Vec<f64>,
}

impl IncrementSeries {
    pub fn len(&self) -> usize {
        self.dl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dl.is_empty()
    }

    pub fn n_future(&self) -> usize {
        self.len() - self.n_history
    }

    /// Step index `n` (increment over `((n-1) delta, n delta]`) of entry `i`.
    pub fn step_of(&self, i: usize) -> i64 {
        i as i64 + 1 - self.n_history as i64
    }

    /// `(dl, ds)` for step `n`, or `None` outside the series.
    pub fn at(&self, n: i64) -> Option<(f64, f64)> {
        let i = n - 1 + self.n_history as i64;
        if i < 0 || i as usize >= self.len() {
            return None;
        }
        Some((self.dl[i as usize], self.ds[i as usize]))
    }

    /// Bins an exact jump log onto the grid: every jump in `((n-1) delta, n delta]`
    /// contributes to step `n`. Only valid for pure-jump noise.
    pub fn from_jump_log(log: &JumpLog, delta: f64, n_history: usize, n_future: usize) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(invalid(format!("delta must be > 0, got {delta}")));
        }
        let total = n_history + n_future;
        let mut dl = vec![0.0; total];
        let mut ds = vec![0.0; total];
        for (&t, &z) in log.times.iter().zip(&log.sizes) {
            // n = ceil(t / delta), with a small snap so grid-exact times land in their own cell
            let x = t / delta;
            let mut n = x.ceil();
            if (x - x.round()).abs() < 1e-9 {
                n = x.round();
            }
            let i = n as i64 - 1 + n_history as i64;
            if i >= 0 && (i as usize) < total {
                dl[i as usize] += z;
                ds[i as usize] += z * z;
            }
        }
        Ok(Self { delta, n_history, dl, ds })
    }

    /// CSV with columns `t,dl,ds`, `t` the right end of each interval.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "dl", "ds"])?;
        for i in 0..self.len() {
            let t = self.step_of(i) as f64 * self.delta;
            wr.write_record([t.to_string(), self.dl[i].to_string(), self.ds[i].to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Draws `n_history + n_future` increments from the spec's primary stream.
pub fn sample_increments(spec: &NoiseSpec, delta: f64, n_history: usize, n_future: usize) -> Result<IncrementSeries> {
    let mut rng = substream(spec.seed, PRIMARY_STREAM);
    sample_increments_with(spec, delta, n_history, n_future, &mut rng)
}

pub fn sample_increments_with(
    spec: &NoiseSpec,
    delta: f64,
    n_history: usize,
    n_future: usize,
    rng: &mut SimRng,
) -> Result<IncrementSeries> {
    spec.validate()?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid(format!("delta must be > 0, got {delta}")));
    }
    let total = n_history + n_future;
    let mut dl = Vec::with_capacity(total);
    let mut ds = Vec::with_capacity(total);
    let brown_var = spec.sigma_l * spec.sigma_l * delta;
    let brown = Normal::new(0.0, brown_var.sqrt()).map_err(|e| invalid(e.to_string()))?;
    let counts = if spec.lambda_l > 0.0 {
        Some(Poisson::new(spec.lambda_l * delta).map_err(|e| invalid(e.to_string()))?)
    } else {
        None
    };
    let jumps = spec.jump_law();
    for _ in 0..total {
        let mut l = if brown_var > 0.0 { brown.sample(rng) } else { 0.0 };
        let mut s = brown_var;
        if let Some(pois) = &counts {
            let k: f64 = pois.sample(rng);
            for _ in 0..k as u64 {
                let z = jumps.sample(rng);
                l += z;
                s += z * z;
            }
        }
        dl.push(l);
        ds.push(s);
    }
    Ok(IncrementSeries { delta, n_history, dl, ds })
}

/// Exact jump times and sizes of a compound-Poisson `L` on `(t_start, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpLog {
    pub horizon: (f64, f64),
    pub times: Vec<f64>,
    pub sizes: Vec<f64>,
}

impl JumpLog {
    pub fn new(horizon: (f64, f64), times: Vec<f64>, sizes: Vec<f64>) -> Result<Self> {
        if times.len() != sizes.len() {
            return Err(invalid("jump times and sizes differ in length"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("jump times must be strictly increasing"));
        }
        if times.iter().any(|&t| !(t > horizon.0 && t <= horizon.1)) {
            return Err(invalid("jump time outside horizon"));
        }
        if sizes.iter().any(|&z| z == 0.0 || !z.is_finite()) {
            return Err(invalid("jump sizes must be finite and nonzero"));
        }
        Ok(Self { horizon, times, sizes })
    }

    pub fn empty(horizon: (f64, f64)) -> Self {
        Self { horizon, times: Vec::new(), sizes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Increment of `S` over `(a, b]`.
    pub fn s_increment(&self, a: f64, b: f64) -> f64 {
        let lo = self.times.partition_point(|&t| t <= a);
        let hi = self.times.partition_point(|&t| t <= b);
        self.sizes[lo..hi].iter().map(|z| z * z).sum()
    }

    /// Smallest gap between consecutive jumps (infinite with fewer than two).
    pub fn min_gap(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["T_j", "dL"])?;
        for (t, z) in self.times.iter().zip(&self.sizes) {
            wr.write_record([t.to_string(), z.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the `T_j,dL` CSV; the horizon is taken from the caller.
    pub fn read_csv<R: Read>(r: R, horizon: (f64, f64)) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let (mut times, mut sizes) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| invalid(format!("bad jump-log row {:?}", rec)))
            };
            times.push(parse(0)?);
            sizes.push(parse(1)?);
        }
        Self::new(horizon, times, sizes)
    }
}

/// Compound-Poisson jump events on `horizon`, drawn from ChaCha20 keyed by `seed`.
pub fn sample_jump_events(spec: &NoiseSpec, horizon: (f64, f64), seed: u64) -> Result<JumpLog> {
    let mut rng = substream(seed, PRIMARY_STREAM);
    sample_jump_events_with(spec, horizon, &mut rng)
}

pub fn sample_jump_events_with(spec: &NoiseSpec, horizon: (f64, f64), rng: &mut SimRng) -> Result<JumpLog> {
    spec.validate()?;
    if spec.sigma_l != 0.0 {
        return Err(invalid("event-driven noise needs sigma_L = 0; fold the Brownian part into c_mu and f_mu"));
    }
    if !(spec.lambda_l > 0.0) {
        return Err(invalid("event-driven noise needs lambda_L > 0"));
    }
    let (t0, t1) = horizon;
    let mut log = JumpLog::empty(horizon);
    if !(t1 > t0) {
        return Ok(log);
    }
    let gaps = Exp::new(spec.lambda_l).map_err(|e| invalid(e.to_string()))?;
    let jumps = spec.jump_law();
    let mut t = t0;
    loop {
        t += gaps.sample(rng);
        if t > t1 {
            break;
        }
        let z = jumps.sample(rng);
        // drop zero sizes and (numerically) coincident times
        if z == 0.0 || log.times.last().is_some_and(|&last| t <= last) || t <= t0 {
            continue;
        }
        log.times.push(t);
        log.sizes.push(z);
    }
    Ok(log)
}

/// Keeps the jumps with `|size| >= 1/n`.
pub fn truncate_jumps(log: &JumpLog, n: u32) -> Result<JumpLog> {
    if n == 0 {
        return Err(invalid("truncation level n must be >= 1"));
    }
    let threshold = 1.0 / n as f64;
    let (times, sizes) =
        log.times.iter().zip(&log.sizes).filter(|(_, z)| z.abs() >= threshold).map(|(&t, &z)| (t, z)).unzip();
    Ok(JumpLog { horizon: log.horizon, times, sizes })
}
