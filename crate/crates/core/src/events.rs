//! Event-driven simulation for compound-Poisson driving noise.
//!
//! Between jumps the variance solves the delay ODE
//! `dX/dt = eta - c_mu X + xi(X)_t`, integrated by classical RK4 by the
//! method of steps; at a jump time the exact map
//! `X(T) = X(T-) (1 + c_nu dL^2)`, `Y(T) = Y(T-) + sqrt(X(T-)) dL` is applied.
//! Steps never cross a jump.
//!
//! The stored history is a chain of cubic Hermite segments (value and
//! derivative at every integrator knot, a doubled knot at every jump), so the
//! delayed lookups and the `f_mu` delay integral keep the order of the
//! integrator.

use crate::error::{invalid, Error, Result};
use crate::history::HistorySegment;
use crate::kernels::{DelayKernel, DelayModel, KernelForm};
use crate::noise::JumpLog;
use crate::path::{EventRecord, PathMeta, SamplePath, Scheme};
use crate::quad::{self, Rule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOptions {
    /// RK4 step.
    pub h: f64,
    /// Spacing of the reporting grid.
    pub report_dt: f64,
}

impl Default for EventOptions {
    fn default() -> Self {
        Self { h: 1e-3, report_dt: 0.01 }
    }
}

impl EventOptions {
    pub fn new(h: f64, report_dt: f64) -> Result<Self> {
        let o = Self { h, report_dt };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!("ODE step must be > 0, got {}", self.h)));
        }
        if !(self.report_dt > 0.0 && self.report_dt.is_finite()) {
            return Err(invalid(format!("report spacing must be > 0, got {}", self.report_dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Knot {
    t: f64,
    x: f64,
    d: f64,
}

fn hermite(a: &Knot, b: &Knot, s: f64) -> f64 {
    let len = b.t - a.t;
    let th = (s - a.t) / len;
    let th2 = th * th;
    let th3 = th2 * th;
    (2.0 * th3 - 3.0 * th2 + 1.0) * a.x
        + (th3 - 2.0 * th2 + th) * len * a.d
        + (3.0 * th2 - 2.0 * th3) * b.x
        + (th3 - th2) * len * b.d
}

/// Longest panel used when integrating a kernel against one history segment.
/// Longest quadrature panel used on the stored history.
pub const MAX_PANEL: f64 = 0.05;

/// Dense, right-continuous variance history.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHistory {
    knots: Vec<Knot>,
}

impl DenseHistory {
    /// History given by the initial segment on `[-r, 0]`.
    pub fn from_segment(phi: &HistorySegment, r: f64) -> Self {
        let pts = phi.knots(r);
        let mut knots = Vec::with_capacity(2 * pts.len());
        if pts.len() == 1 {
            knots.push(Knot { t: pts[0].0, x: pts[0].1, d: 0.0 });
        }
        for w in pts.windows(2) {
            let (u0, v0) = w[0];
            let (u1, v1) = w[1];
            let slope = (v1 - v0) / (u1 - u0);
            knots.push(Knot { t: u0, x: v0, d: slope });
            knots.push(Knot { t: u1, x: v1, d: slope });
        }
        Self { knots }
    }

    /// Appends a knot at `t >= end()`. A knot at `t == end()` starts a new
    /// segment (a jump or a derivative break).
    pub fn push(&mut self, t: f64, x: f64, d: f64) -> Result<()> {
        if t < self.end() {
            return Err(invalid(format!("history knot at {t} precedes end {}", self.end())));
        }
        self.knots.push(Knot { t, x, d });
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.knots[0].t
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1].t
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    fn eval_segment(&self, j: usize, s: f64) -> f64 {
        let (a, b) = (&self.knots[j], &self.knots[j + 1]);
        if b.t > a.t {
            hermite(a, b, s)
        } else {
            b.x
        }
    }

    /// `X(s)`, right-continuous; clamped to the end values outside the range.
    pub fn value(&self, s: f64) -> f64 {
        let j = self.knots.partition_point(|k| k.t <= s);
        if j == 0 {
            return self.knots[0].x;
        }
        if j == self.knots.len() {
            return self.knots[j - 1].x;
        }
        self.eval_segment(j - 1, s)
    }

    /// Left limit `X(s-)`.
    pub fn left(&self, s: f64) -> f64 {
        let j = self.knots.partition_point(|k| k.t < s);
        if j == 0 {
            return self.knots[0].x;
        }
        if j == self.knots.len() {
            return self.knots[j - 1].x;
        }
        self.eval_segment(j - 1, s)
    }

    /// `∫_a^b k(s - t) X(s) ds` over the stored history.
    pub fn integrate(&self, k: &DelayKernel, t: f64, a: f64, b: f64) -> f64 {
        let b = b.min(self.end());
        if !(b > a) {
            return 0.0;
        }
        let grid = kernel_grid(k);
        let mut j = self.knots.partition_point(|kn| kn.t <= a).saturating_sub(1);
        let mut acc = 0.0;
        while j + 1 < self.knots.len() && self.knots[j].t < b {
            let (ka, kb) = (self.knots[j], self.knots[j + 1]);
            j += 1;
            let lo = a.max(ka.t);
            let hi = b.min(kb.t);
            if !(hi > lo) {
                continue;
            }
            if ka.x == kb.x && ka.d == 0.0 && kb.d == 0.0 {
                acc += ka.x * k.mass(lo - t, hi - t);
                continue;
            }
            acc += integrate_pieces(lo, hi, t, grid, |s| k.value(s - t) * hermite(&ka, &kb, s));
        }
        acc
    }
}

/// Knot grid `(first, step)` of a tabulated kernel.
fn kernel_grid(k: &DelayKernel) -> Option<(f64, f64)> {
    match k.form() {
        KernelForm::Exponential { .. } => None,
        KernelForm::Tabulated { values } => Some((-k.support(), k.support() / (values.len() - 1) as f64)),
    }
}

/// Gauss-4 over `[lo, hi]`, split at the kernel knots `t + u_i` and into
/// panels of at most `MAX_PANEL`.
fn integrate_pieces<G: FnMut(f64) -> f64>(lo: f64, hi: f64, t: f64, grid: Option<(f64, f64)>, mut g: G) -> f64 {
    let mut cuts: Vec<f64> = Vec::new();
    if let Some((first, step)) = grid {
        let i0 = ((lo - t - first) / step).floor() as i64 + 1;
        let mut i = i0.max(0);
        loop {
            let c = t + first + i as f64 * step;
            if c >= hi {
                break;
            }
            if c > lo {
                cuts.push(c);
            }
            i += 1;
        }
    }
    cuts.push(hi);
    let mut acc = 0.0;
    let mut a = lo;
    for c in cuts {
        let n = ((c - a) / MAX_PANEL).ceil().max(1.0) as usize;
        let w = (c - a) / n as f64;
        for i in 0..n {
            let p0 = a + i as f64 * w;
            let p1 = if i + 1 == n { c } else { p0 + w };
            acc += quad::gauss(Rule::Gauss4, p0, p1, &mut g);
        }
        a = c;
    }
    acc
}

/// `xi(X)_t = ∫_{-p}^0 f_mu(u) X(t+u) du + Σ_{T_j in (t-q, t]} f_nu(T_j - t) X(T_j-) dL_j^2`.
pub fn xi_evaluate(model: &DelayModel, history: &DenseHistory, log: &JumpLog, t: f64) -> Result<f64> {
    let r = model.r();
    let tol = 1e-12 * t.abs().max(1.0);
    if history.start() > t - r + tol || t > history.end() + tol {
        return Err(Error::InsufficientHistory { t, earliest: history.start() + r });
    }
    let mut xi = 0.0;
    if let Some(k) = &model.f_mu {
        xi += history.integrate(k, t, t - model.p(), t);
    }
    if let Some(k) = &model.f_nu {
        let lo = log.times.partition_point(|&s| s <= t - model.q());
        let hi = log.times.partition_point(|&s| s <= t);
        for j in lo..hi {
            let tj = log.times[j];
            xi += k.value(tj - t) * history.left(tj) * log.sizes[j] * log.sizes[j];
        }
    }
    Ok(xi)
}

/// Variance over the step in progress, used for the part of the delay
/// window that lies beyond the stored history.
#[derive(Debug, Clone, Copy)]
enum Local {
    None,
    /// Extension of the previous step's Hermite segment.
    Cubic(Knot, Knot),
    /// Quadratic with given value and slope at `t0`.
    Quad {
        t0: f64,
        x0: f64,
        d0: f64,
        a: f64,
    },
}

impl Local {
    fn eval(&self, s: f64) -> f64 {
        match *self {
            Local::None => 0.0,
            Local::Cubic(a, b) => hermite(&a, &b, s),
            Local::Quad { t0, x0, d0, a } => {
                let u = s - t0;
                x0 + u * (d0 + a * u)
            }
        }
    }
}

/// RK4 method-of-steps integrator for
/// `x' = eta - decay x + Σ_i w_i ∫ k_i(s - t) x(s) ds + Σ_j f_nu(T_j - t) a_j`.
pub(crate) struct Integrator<'a> {
    eta: f64,
    decay: f64,
    level: Vec<(&'a DelayKernel, f64)>,
    nu: Option<&'a DelayKernel>,
    hist: DenseHistory,
    /// Running integrals for the exponential kernels in `level`.
    caches: Vec<Option<ExpCache>>,
    /// `(T_j, X(T_j-) dL_j^2)` for every jump that can enter the `f_nu` window.
    atoms: Vec<(f64, f64)>,
}

/// For `f(u) = w (e^{lambda u} - c)`, per finished knot `i`:
/// `e[i] = ∫_{t_0}^{t_i} e^{lambda (s - t_i)} X(s) ds` and
/// `k[i] = ∫_{t_0}^{t_i} X(s) ds`, so the delay integral over whole segments
/// costs O(1).
struct ExpCache {
    w: f64,
    lambda: f64,
    c: f64,
    e: Vec<f64>,
    k: Vec<f64>,
}

impl ExpCache {
    fn new(k: &DelayKernel) -> Option<Self> {
        match *k.form() {
            KernelForm::Exponential { w, lambda } => {
                Some(Self { w, lambda, c: (-lambda * k.support()).exp(), e: vec![0.0], k: vec![0.0] })
            }
            KernelForm::Tabulated { .. } => None,
        }
    }

    fn extend(&mut self, knots: &[Knot]) {
        while self.e.len() < knots.len() {
            let i = self.e.len();
            let (a, b) = (knots[i - 1], knots[i]);
            let (mut je, mut jk) = (0.0, 0.0);
            if b.t > a.t {
                let n = ((b.t - a.t) / MAX_PANEL).ceil().max(1.0) as usize;
                let w = (b.t - a.t) / n as f64;
                for p in 0..n {
                    let p0 = a.t + p as f64 * w;
                    let p1 = if p + 1 == n { b.t } else { p0 + w };
                    je += quad::gauss(Rule::Gauss4, p0, p1, |s| (self.lambda * (s - b.t)).exp() * hermite(&a, &b, s));
                    jk += quad::gauss(Rule::Gauss4, p0, p1, |s| hermite(&a, &b, s));
                }
            }
            let prev = self.e[i - 1] * (-self.lambda * (b.t - a.t)).exp();
            self.e.push(prev + je);
            self.k.push(self.k[i - 1] + jk);
        }
    }

    /// `∫_{t_a}^{t_b} f(s - t) X(s) ds` between cached knots `ia <= ib`.
    fn window(&self, knots: &[Knot], ia: usize, ib: usize, t: f64) -> f64 {
        let (ta, tb) = (knots[ia].t, knots[ib].t);
        let expo = self.e[ib] - (-self.lambda * (tb - ta)).exp() * self.e[ia];
        self.w * ((self.lambda * (tb - t)).exp() * expo - self.c * (self.k[ib] - self.k[ia]))
    }
}

impl<'a> Integrator<'a> {
    /// Integrator positioned at `t = 0` with history `phi` on `[-r, 0]`.
    pub(crate) fn starting(
        eta: f64,
        decay: f64,
        level: Vec<(&'a DelayKernel, f64)>,
        phi: &HistorySegment,
        r: f64,
    ) -> Self {
        let mut hist = DenseHistory::from_segment(phi, r);
        if hist.end() < 0.0 {
            hist.knots.push(Knot { t: 0.0, x: phi.value(0.0), d: 0.0 });
        }
        let caches = level.iter().map(|(k, _)| ExpCache::new(k)).collect();
        let mut sim = Self { eta, decay, level, nu: None, hist, caches, atoms: Vec::new() };
        sim.finalize();
        sim.restart_at(phi.value(0.0));
        sim
    }

    fn drift(&self, t: f64, x: f64, local: Local) -> f64 {
        let mut v = self.eta - self.decay * x;
        let end = self.hist.end();
        for (&(k, wt), cache) in self.level.iter().zip(&self.caches) {
            let lo = t - k.support();
            let hi = t.min(end);
            let mut part = match cache {
                Some(c) => self.cached_integral(c, k, t, lo, hi),
                None => self.hist.integrate(k, t, lo, hi),
            };
            if t > end && !matches!(local, Local::None) {
                let a = lo.max(end);
                part += quad::gauss(Rule::Gauss4, a, t, |s| k.value(s - t) * local.eval(s));
            }
            v += wt * part;
        }
        if let Some(k) = self.nu {
            let lo = self.atoms.partition_point(|a| a.0 <= t - k.support());
            let hi = self.atoms.partition_point(|a| a.0 <= t);
            for &(tj, w) in &self.atoms[lo..hi] {
                v += k.value(tj - t) * w;
            }
        }
        v
    }

    fn cached_integral(&self, c: &ExpCache, k: &DelayKernel, t: f64, lo: f64, hi: f64) -> f64 {
        let knots = &self.hist.knots;
        let done = c.e.len() - 1;
        let ia = knots.partition_point(|kn| kn.t < lo);
        if ia >= done || knots[done].t > hi {
            return self.hist.integrate(k, t, lo, hi);
        }
        self.hist.integrate(k, t, lo, knots[ia].t)
            + c.window(knots, ia, done, t)
            + self.hist.integrate(k, t, knots[done].t, hi)
    }

    /// Brings the running integrals up to the last knot.
    fn finalize(&mut self) {
        for c in self.caches.iter_mut().flatten() {
            c.extend(&self.hist.knots);
        }
    }

    pub(crate) fn last_value(&self) -> (f64, f64) {
        let k = self.last();
        (k.t, k.x)
    }

    fn last(&self) -> Knot {
        self.hist.knots[self.hist.knots.len() - 1]
    }

    /// One RK4 step of length `s` from the last knot; appends the new knot.
    fn step(&mut self, s: f64, restart: bool) {
        let k0 = self.last();
        let (t, x, k1) = (k0.t, k0.x, k0.d);
        let n = self.hist.knots.len();
        let prev = (!restart && n >= 2).then(|| self.hist.knots[n - 2]).filter(|p| p.t < t);
        let local = |tau: f64, xs: f64| match prev {
            Some(p) => Local::Cubic(p, k0),
            None => {
                let th = tau - t;
                Local::Quad { t0: t, x0: x, d0: k1, a: (xs - x - k1 * th) / (th * th) }
            }
        };
        let tm = t + 0.5 * s;
        let x2 = x + 0.5 * s * k1;
        let k2 = self.drift(tm, x2, local(tm, x2));
        let x3 = x + 0.5 * s * k2;
        let k3 = self.drift(tm, x3, local(tm, x3));
        let te = t + s;
        let x4 = x + s * k3;
        let k4 = self.drift(te, x4, local(te, x4));
        let xn = x + s / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
        self.hist.knots.push(Knot { t: te, x: xn, d: k4 });
        let dn = self.drift(te, xn, Local::None);
        self.hist.knots.last_mut().expect("just pushed").d = dn;
        self.finalize();
    }

    /// Starts a new segment at the current end with value `x`.
    pub(crate) fn restart_at(&mut self, x: f64) {
        let t = self.hist.end();
        self.hist.knots.push(Knot { t, x, d: 0.0 });
        let d = self.drift(t, x, Local::None);
        self.hist.knots.last_mut().expect("just pushed").d = d;
        self.finalize();
    }

    pub(crate) fn advance(&mut self, target: f64, h: f64, restart: &mut bool) {
        let t = self.hist.end();
        let gap = target - t;
        if !(gap > 0.0) {
            return;
        }
        let n = (gap / h - 1e-9).ceil().max(1.0) as usize;
        let s = gap / n as f64;
        for i in 0..n {
            let len = if i + 1 == n { target - self.hist.end() } else { s };
            self.step(len, *restart);
            *restart = false;
        }
    }
}

/// Simulates `(X, Y)` driven by the jumps in `log` up to its horizon end.
///
/// Jumps at times `<= 0` belong to the initial segment: they leave `X`
/// unchanged but enter the `f_nu` window with `X(T-) = Phi(T)`.
pub fn event_simulate(
    model: &DelayModel,
    log: &JumpLog,
    phi: &HistorySegment,
    y0: f64,
    opts: &EventOptions,
) -> Result<SamplePath> {
    event_simulate_dense(model, log, phi, y0, opts).map(|(p, _)| p)
}

/// As [`event_simulate`], also returning the dense history.
pub fn event_simulate_dense(
    model: &DelayModel,
    log: &JumpLog,
    phi: &HistorySegment,
    y0: f64,
    opts: &EventOptions,
) -> Result<(SamplePath, DenseHistory)> {
    model.validate()?;
    opts.validate()?;
    if model.noise.sigma_l != 0.0 {
        return Err(invalid("event-driven simulation needs sigma_L = 0 (fold the Brownian part first)"));
    }
    if model.noise.lambda_l > 0.0 && opts.h > 0.25 / model.noise.lambda_l {
        return Err(invalid(format!(
            "ODE step {} exceeds a quarter of the mean inter-event time {}",
            opts.h,
            1.0 / model.noise.lambda_l
        )));
    }
    let r = model.r();
    if !phi.covers(r) {
        return Err(invalid(format!("initial segment covers {} < r = {r}", phi.r())));
    }
    let t_end = log.horizon.1;
    if t_end < 0.0 {
        return Err(invalid(format!("horizon end {t_end} is negative")));
    }
    let q = model.q();
    if q > 0.0 && log.horizon.0 > -q + 1e-12 {
        log::debug!("jump log starts at {} > -q; earlier jumps are absent from xi", log.horizon.0);
    }

    let dt = opts.report_dt;
    let n_hist = (r / dt - 1e-9).ceil().max(0.0) as usize;
    let n_future = (t_end / dt + 1e-9).floor() as usize;
    let t0 = -(n_hist as f64) * dt;
    let mut x: Vec<f64> = (0..n_hist).map(|i| phi.value(t0 + i as f64 * dt)).collect();
    x.reserve(n_future + 1);
    let mut y = Vec::with_capacity(n_future + 1);

    let first_future = log.times.partition_point(|&s| s <= 0.0);
    let atoms = if model.f_nu.is_some() {
        let lo = log.times.partition_point(|&s| s <= -q);
        (lo..first_future).map(|j| (log.times[j], phi.value(log.times[j]) * log.sizes[j] * log.sizes[j])).collect()
    } else {
        Vec::new()
    };
    let mut sim = Integrator::starting(model.eta, model.c_mu, model.f_mu.iter().map(|k| (k, 1.0)).collect(), phi, r);
    sim.nu = model.f_nu.as_ref();
    sim.atoms = atoms;
    // the pre-zero atoms enter the drift at t = 0
    sim.restart_at(phi.value(0.0));
    let mut restart = true;
    let mut cur_y = y0;
    x.push(sim.last().x);
    y.push(cur_y);

    let mut events = Vec::new();
    let mut next_event = first_future;
    // reporting times, then the horizon end for jumps past the last one
    for k in 1..=n_future + 1 {
        let report = k <= n_future;
        let tk = if report { k as f64 * dt } else { t_end };
        while next_event < log.len() && log.times[next_event] <= tk {
            let te = log.times[next_event];
            let dl = log.sizes[next_event];
            sim.advance(te, opts.h, &mut restart);
            let x_pre = sim.last().x;
            let x_post = x_pre * (1.0 + model.c_nu * dl * dl);
            let y_post = cur_y + x_pre.max(0.0).sqrt() * dl;
            if model.f_nu.is_some() {
                sim.atoms.push((te, x_pre * dl * dl));
            }
            sim.restart_at(x_post);
            restart = true;
            events.push(EventRecord { t: te, dl, x_pre, x_post, y_pre: cur_y, y_post });
            cur_y = y_post;
            next_event += 1;
        }
        if report {
            sim.advance(tk, opts.h, &mut restart);
            let v = sim.last().x;
            if !v.is_finite() {
                return Err(Error::NonFinite("event-driven variance"));
            }
            x.push(v);
            y.push(cur_y);
        }
    }

    let mut meta = PathMeta::new(Scheme::Events);
    meta.ode_step = Some(opts.h);
    let path = SamplePath { t0, delta: dt, n_history: n_hist, x, y, events, meta };
    Ok((path, sim.hist))
}

/// Largest variance gap between two paths over the grid of the coarser one,
/// with the other path interpolated; returns `(distance, time)`.
pub fn compare_paths(a: &SamplePath, b: &SamplePath) -> Result<(f64, f64)> {
    let (coarse, fine) = if a.delta >= b.delta { (a, b) } else { (b, a) };
    let lo = a.t0.max(b.t0);
    let hi = a.t_end().min(b.t_end());
    if lo > hi {
        return Err(invalid(format!("paths do not overlap ({lo} > {hi})")));
    }
    let tol = 1e-9 * coarse.delta;
    let mut best = (0.0, lo);
    for i in 0..coarse.x.len() {
        let t = coarse.time(i);
        if t < lo - tol || t > hi + tol {
            continue;
        }
        let Some(xf) = fine.x_at(t.clamp(lo, hi)) else { continue };
        let d = (coarse.x[i] - xf).abs();
        if d > best.0 {
            best = (d, t);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_jump_events, truncate_jumps, NoiseSpec};
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;

    fn cp(lambda: f64, seed: u64) -> NoiseSpec {
        NoiseSpec::compound_poisson(lambda, 0.0, 1.0, seed).unwrap()
    }

    #[test]
    fn xi_trivial_and_constant_history() {
        let fm = DelayKernel::exponential(1.5, 2.0, 1.0).unwrap();
        let fnu = DelayKernel::exponential(0.7, 1.0, 0.8).unwrap();
        let model = DelayModel::new(1.0, 3.0, 0.5, Some(fm.clone()), Some(fnu), cp(1.0, 1)).unwrap();
        let hist = DenseHistory::from_segment(&HistorySegment::constant(1.0, 2.5).unwrap(), 1.0);
        let empty = JumpLog::empty((-1.0, 0.0));
        let xi = xi_evaluate(&model, &hist, &empty, 0.0).unwrap();
        assert!((xi - 2.5 * fm.l1()).abs() < 1e-13);
        let bare = DelayModel::new(1.0, 3.0, 0.5, None, None, cp(1.0, 1)).unwrap();
        assert_eq!(xi_evaluate(&bare, &hist, &empty, 0.0).unwrap(), 0.0);
        assert!(matches!(xi_evaluate(&model, &hist, &empty, 0.5), Err(Error::InsufficientHistory { .. })));
    }

    #[test]
    fn xi_single_atom() {
        let fnu = DelayKernel::exponential(0.7, 1.0, 0.8).unwrap();
        let model = DelayModel::new(1.0, 3.0, 0.5, None, Some(fnu.clone()), cp(1.0, 1)).unwrap();
        let phi = HistorySegment::gridded(0.8, vec![1.0, 2.0, 4.0, 3.0]).unwrap();
        let hist = DenseHistory::from_segment(&phi, 0.8);
        let z = 1.3;
        let log = JumpLog::new((-0.8, 0.0), vec![-0.4], vec![z]).unwrap();
        let xi = xi_evaluate(&model, &hist, &log, 0.0).unwrap();
        let want = fnu.value(-0.4) * phi.value(-0.4) * z * z;
        assert!((xi - want).abs() < 1e-14 * want);
    }

    #[test]
    fn dense_history_limits() {
        let mut h = DenseHistory::from_segment(&HistorySegment::constant(0.0, 1.0).unwrap(), 0.0);
        h.push(1.0, 2.0, 1.0).unwrap();
        h.push(1.0, 5.0, 0.0).unwrap();
        h.push(2.0, 5.0, 0.0).unwrap();
        assert_eq!(h.left(1.0), 2.0);
        assert_eq!(h.value(1.0), 5.0);
        assert!(h.push(0.5, 1.0, 0.0).is_err());
        // Hermite reproduces cubics exactly
        let c = |t: f64| 1.0 + t - 0.5 * t * t + 0.25 * t * t * t;
        let dc = |t: f64| 1.0 - t + 0.75 * t * t;
        let mut g = DenseHistory::from_segment(&HistorySegment::constant(0.0, 1.0).unwrap(), 0.0);
        g.knots[0].d = dc(0.0);
        g.push(0.7, c(0.7), dc(0.7)).unwrap();
        for s in [0.1, 0.35, 0.69] {
            assert!((g.value(s) - c(s)).abs() < 1e-14);
        }
    }

    #[test]
    fn cogarch_matches_closed_form_between_jumps() {
        let (eta, c_mu, c_nu) = (0.8, 1.5, 0.6);
        let model = DelayModel::cogarch(eta, c_mu, c_nu, cp(1.0, 0)).unwrap();
        let log = sample_jump_events(&model.noise, (0.0, 10.0), 11).unwrap();
        let phi = HistorySegment::constant(0.0, 0.3).unwrap();
        let path = event_simulate(&model, &log, &phi, 0.0, &EventOptions::new(1e-3, 0.01).unwrap()).unwrap();
        let fix = eta / c_mu;
        let mut worst: f64 = 0.0;
        for i in path.n_history..path.x.len() {
            let t = path.time(i);
            let (t_last, x_last) = path.events.iter().rev().find(|e| e.t <= t).map_or((0.0, 0.3), |e| (e.t, e.x_post));
            let exact = fix + (x_last - fix) * (-c_mu * (t - t_last)).exp();
            worst = worst.max(((path.x[i] - exact) / exact).abs());
        }
        assert!(worst < 1e-8, "relative error {worst}");
        assert!(!path.events.is_empty());
    }

    #[test]
    fn jump_identity_exact() {
        let fm = DelayKernel::exponential(0.5, 2.0, 0.6).unwrap();
        let fnu = DelayKernel::exponential(0.4, 1.0, 0.4).unwrap();
        let model = DelayModel::new(0.5, 2.0, 0.7, Some(fm), Some(fnu), cp(2.0, 0)).unwrap();
        let log = sample_jump_events(&model.noise, (-0.6, 20.0), 5).unwrap();
        let path = event_simulate(
            &model,
            &log,
            &HistorySegment::constant(0.6, 0.5).unwrap(),
            0.0,
            &EventOptions::new(0.01, 0.05).unwrap(),
        )
        .unwrap();
        assert!(path.events.len() > 10);
        for e in &path.events {
            let ratio = (e.x_post - e.x_pre) / (e.x_pre * e.dl * e.dl);
            assert!((ratio - 0.7).abs() < 1e-12 * 0.7 || e.dl.abs() < 1e-6);
            assert!((e.y_post - e.y_pre - e.x_pre.sqrt() * e.dl).abs() < 1e-15 * e.y_post.abs().max(1.0));
        }
    }

    #[test]
    fn positivity_floor_holds() {
        let fm = DelayKernel::exponential(1.0, 2.0, 1.0).unwrap();
        let fnu = DelayKernel::exponential(0.5, 1.0, 0.5).unwrap();
        let model = DelayModel::new(0.4, 1.2, 0.5, Some(fm), Some(fnu), cp(1.5, 0)).unwrap();
        let floor = model.eta / (model.c_mu - model.f_mu_l1());
        let log = sample_jump_events(&model.noise, (-1.0, 15.0), 9).unwrap();
        let phi = HistorySegment::constant(1.0, floor).unwrap();
        let path = event_simulate(&model, &log, &phi, 0.0, &EventOptions::new(5e-3, 0.01).unwrap()).unwrap();
        assert!(path.min_x() >= floor * (1.0 - 1e-9), "{} < {floor}", path.min_x());
    }

    #[test]
    fn rejects_brownian_noise_and_bad_steps() {
        let noisy = NoiseSpec::new(0.2, 1.0, 0.0, 1.0, 0).unwrap();
        let m = DelayModel::cogarch(1.0, 1.0, 0.5, noisy).unwrap();
        let log = JumpLog::empty((0.0, 1.0));
        let phi = HistorySegment::constant(0.0, 1.0).unwrap();
        assert!(event_simulate(&m, &log, &phi, 0.0, &EventOptions::default()).is_err());
        let m = DelayModel::cogarch(1.0, 1.0, 0.5, cp(10.0, 0)).unwrap();
        assert!(event_simulate(&m, &log, &phi, 0.0, &EventOptions { h: 0.1, report_dt: 0.1 }).is_err());
        assert!(EventOptions::new(0.0, 0.1).is_err());
    }

    fn x_at_end(model: &DelayModel, phi: &HistorySegment, h: f64) -> f64 {
        let log = JumpLog::empty((0.0, 2.0));
        let p = event_simulate(model, &log, phi, 0.0, &EventOptions::new(h, 0.1).unwrap()).unwrap();
        *p.x.last().unwrap()
    }

    #[test]
    fn rk4_self_convergence_on_jump_free_window() {
        let fm = DelayKernel::exponential(2.0, 1.5, 0.6).unwrap();
        let model = DelayModel::new(1.0, 2.5, 0.5, Some(fm), None, cp(1.0, 0)).unwrap();
        let phi = HistorySegment::from_fn(0.6, 12, |u| 0.5 + 0.3 * (3.0 * u).cos()).unwrap();
        let h = 0.05;
        let reference = x_at_end(&model, &phi, h / 4.0);
        let e1 = (x_at_end(&model, &phi, h) - reference).abs();
        let e2 = (x_at_end(&model, &phi, h / 2.0) - reference).abs();
        let ratio = e1 / e2;
        assert!((10.0..25.0).contains(&ratio), "ratio {ratio}, errors {e1} {e2}");
    }

    #[test]
    fn compare_paths_trivial() {
        let model = DelayModel::cogarch(1.0, 1.0, 0.5, cp(1.0, 0)).unwrap();
        let log = sample_jump_events(&model.noise, (0.0, 5.0), 2).unwrap();
        let phi = HistorySegment::constant(0.0, 1.0).unwrap();
        let a = event_simulate(&model, &log, &phi, 0.0, &EventOptions::new(0.01, 0.05).unwrap()).unwrap();
        assert_eq!(compare_paths(&a, &a).unwrap().0, 0.0);
        let mut b = a.clone();
        b.x.iter_mut().for_each(|v| *v += 0.25);
        b.events.iter_mut().for_each(|e| {
            e.x_pre += 0.25;
            e.x_post += 0.25;
        });
        assert!((compare_paths(&a, &b).unwrap().0 - 0.25).abs() < 1e-12);
        let mut c = a.clone();
        c.t0 += 100.0;
        assert!(compare_paths(&a, &c).is_err());
    }

    fn random_model(rng: &mut impl Rng) -> DelayModel {
        let q = rng.random_range(0.2..1.0);
        let p = rng.random_range(0.2..1.0);
        let c_mu = rng.random_range(1.5..3.0);
        let fm = DelayKernel::exponential(rng.random_range(0.2..1.0), rng.random_range(0.5..2.0), p).unwrap();
        let fnu = DelayKernel::exponential(rng.random_range(0.1..0.5), rng.random_range(0.5..2.0), q).unwrap();
        let noise = NoiseSpec::compound_poisson(rng.random_range(1.0..4.0), 0.0, 0.6, 0).unwrap();
        DelayModel::new(rng.random_range(0.2..1.0), c_mu, rng.random_range(0.1..0.6), Some(fm), Some(fnu), noise)
            .unwrap()
    }

    #[test]
    fn truncation_approaches_full_path() {
        let mut rng = substream(404, 0);
        let opts = EventOptions::new(0.02, 0.05).unwrap();
        let mut monotone = 0;
        for i in 0..10 {
            let model = random_model(&mut rng);
            let r = model.r();
            let log = sample_jump_events(&model.noise, (-r, 10.0), 100 + i).unwrap();
            let phi = HistorySegment::constant(r, 0.5).unwrap();
            let full = event_simulate(&model, &log, &phi, 0.0, &opts).unwrap();
            let dists: Vec<f64> = [2, 4, 8, 16]
                .iter()
                .map(|&n| {
                    let tl = truncate_jumps(&log, n).unwrap();
                    compare_paths(&full, &event_simulate(&model, &tl, &phi, 0.0, &opts).unwrap()).unwrap().0
                })
                .collect();
            if dists.windows(2).all(|w| w[1] <= w[0]) {
                monotone += 1;
            }
            assert!(dists[3] < dists[0] / 4.0, "{dists:?}");
        }
        assert!(monotone >= 9, "monotone in {monotone} of 10");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn jump_identity_and_floor_random(seed in 0u64..1000, c_nu in 0.05f64..1.0, lambda in 0.5f64..3.0) {
            let fm = DelayKernel::exponential(0.6, 1.0, 0.5).unwrap();
            let fnu = DelayKernel::exponential(0.3, 1.0, 0.5).unwrap();
            let model = DelayModel::new(0.5, 1.5, c_nu, Some(fm), Some(fnu), cp(lambda, 0)).unwrap();
            let floor = model.eta / (model.c_mu - model.f_mu_l1());
            let log = sample_jump_events(&model.noise, (-0.5, 5.0), seed).unwrap();
            let phi = HistorySegment::constant(0.5, floor).unwrap();
            let path = event_simulate(&model, &log, &phi, 0.0, &EventOptions::new(0.02, 0.05).unwrap()).unwrap();
            for e in &path.events {
                prop_assert!((e.x_post - e.x_pre * (1.0 + c_nu * e.dl * e.dl)).abs() <= 1e-15 * e.x_post);
            }
            prop_assert!(path.min_x() >= floor * (1.0 - 1e-9));
        }
    }
}
