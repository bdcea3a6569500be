use std::fmt;
use std::io::Write;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Events,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Euler => "euler",
            Scheme::Events => "events",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathMeta {
    pub scheme: Scheme,
    pub seed: Option<u64>,
    pub model_digest: String,
    /// Integrator step of the event-driven scheme.
    pub ode_step: Option<f64>,
    /// Grid indices (into `x`) where the Euler recursion went negative.
    pub negative_x: Vec<usize>,
}

impl PathMeta {
    pub fn new(scheme: Scheme) -> Self {
        Self { scheme, seed: None, model_digest: String::new(), ode_step: None, negative_x: Vec::new() }
    }
}

/// State just before and after a jump of the driving noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub dl: f64,
    pub x_pre: f64,
    pub x_post: f64,
    pub y_pre: f64,
    pub y_post: f64,
}

/// Variance and price paths on a uniform grid.
///
/// `x[i]` is the variance at `t0 + i delta` (the first `n_history` points lie
/// in the initial segment); `y[j]` is the price at `j delta`, `j >= 0`. Paths
/// from the event-driven scheme also carry exact left/right limits at every
/// jump time in `events`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub t0: f64,
    pub delta: f64,
    pub n_history: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub events: Vec<EventRecord>,
    pub meta: PathMeta,
}

impl SamplePath {
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_history {
            0.0
        } else {
            self.t0 + i as f64 * self.delta
        }
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.x.len() - 1)
    }

    /// Index of the grid point nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t0) / self.delta).round();
        if k < 0.0 || k as usize >= self.x.len() {
            return None;
        }
        Some(k as usize)
    }

    /// Variance at `t`: linear between grid points and event limits, right
    /// continuous at jumps. `None` outside the grid.
    pub fn x_at(&self, t: f64) -> Option<f64> {
        self.interp(t, &self.x, self.t0, |e| (e.x_pre, e.x_post))
    }

    /// Price at `t >= 0`; constant between events for the event-driven scheme.
    pub fn y_at(&self, t: f64) -> Option<f64> {
        self.interp(t, &self.y, 0.0, |e| (e.y_pre, e.y_post))
    }

    fn interp(&self, t: f64, vals: &[f64], start: f64, limits: impl Fn(&EventRecord) -> (f64, f64)) -> Option<f64> {
        let last = (vals.len() - 1) as f64;
        let pos = (t - start) / self.delta;
        let tol = 1e-9;
        if pos < -tol || pos > last + tol || vals.is_empty() {
            return None;
        }
        let pos = pos.clamp(0.0, last);
        let near = pos.round();
        let k = if (pos - near).abs() < tol { near as usize } else { pos.floor() as usize };
        let tk = start + k as f64 * self.delta;
        if k as f64 == last || (pos - near).abs() < tol && self.events.is_empty() {
            return Some(vals[k]);
        }
        let tk1 = tk + self.delta;
        // anchors inside (tk, tk1]
        let lo = self.events.partition_point(|e| e.t <= tk);
        let hi = self.events.partition_point(|e| e.t <= tk1);
        let window = &self.events[lo..hi];
        let left = window.iter().rev().find(|e| e.t <= t).map_or((tk, vals[k]), |e| (e.t, limits(e).1));
        let right = window.iter().find(|e| e.t > t).map_or((tk1, vals[k + 1]), |e| (e.t, limits(e).0));
        if right.0 <= left.0 {
            return Some(left.1);
        }
        let w = (t - left.0) / (right.0 - left.0);
        Some(left.1 + w * (right.1 - left.1))
    }

    /// Path CSV `t,x,y` (plus `event` for event-driven paths). `y` is blank
    /// in the initial segment. At a jump the row with `event = 0` holds the
    /// left limit and the following row with `event = 1` the post-jump state.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let with_events = self.meta.scheme == Scheme::Events;
        let mut wr = csv::Writer::from_writer(w);
        if with_events {
            wr.write_record(["t", "x", "y", "event"])?;
        } else {
            wr.write_record(["t", "x", "y"])?;
        }
        let mut ev = self.events.iter().peekable();
        for i in 0..self.x.len() {
            let t = self.time(i);
            while let Some(e) = ev.peek() {
                if e.t > t {
                    break;
                }
                wr.write_record([e.t.to_string(), e.x_pre.to_string(), e.y_pre.to_string(), "0".into()])?;
                wr.write_record([e.t.to_string(), e.x_post.to_string(), e.y_post.to_string(), "1".into()])?;
                ev.next();
            }
            let y = if i >= self.n_history { self.y[i - self.n_history].to_string() } else { String::new() };
            if with_events {
                wr.write_record([t.to_string(), self.x[i].to_string(), y, "0".into()])?;
            } else {
                wr.write_record([t.to_string(), self.x[i].to_string(), y])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Key-value metadata sidecar.
    pub fn write_meta<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "scheme = {}", self.meta.scheme)?;
        writeln!(w, "delta = {}", self.delta)?;
        writeln!(w, "t_end = {}", self.t_end())?;
        if let Some(seed) = self.meta.seed {
            writeln!(w, "seed = {seed}")?;
        }
        if let Some(h) = self.meta.ode_step {
            writeln!(w, "ode_step = {h}")?;
        }
        writeln!(w, "model_digest = {}", self.meta.model_digest)?;
        writeln!(w, "events = {}", self.events.len())?;
        writeln!(w, "negative_x_steps = {}", self.meta.negative_x.len())?;
        Ok(())
    }

    pub fn min_x(&self) -> f64 {
        self.x.iter().copied().chain(self.events.iter().flat_map(|e| [e.x_pre, e.x_post])).fold(f64::INFINITY, f64::min)
    }
}

/// Checks the common requirements of the grid-returning operations.
pub(crate) fn lag_steps(delta: f64, lag: f64, what: &'static str) -> Result<usize> {
    if !(lag > 0.0) {
        return Err(invalid(format!("{what} must be > 0, got {lag}")));
    }
    let k = lag / delta;
    if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
        return Err(crate::Error::OffGrid { what, value: lag, step: delta });
    }
    Ok(k.round() as usize)
}
