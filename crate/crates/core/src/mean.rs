//! The mean `m(t) = E[X_t]` solves the linear delay equation
//! `m' = eta - c0 m + ∫_{-r}^0 f(u) m(t+u) du` with the combined kernel
//! `f = f_mu + kappa2 f_nu` and `c0 = c_mu - kappa2 c_nu`. It is solved here
//! by RK4 method of steps and, independently, through the renewal equation
//! `m(t) = ∫_0^t zeta(t-u) m(u) du + h(t)`.

use std::fmt;
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::events::Integrator;
use crate::history::HistorySegment;
use crate::kernels::{combine, Combined, DelayModel};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanSolver {
    Dde,
    Renewal,
}

impl fmt::Display for MeanSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeanSolver::Dde => "dde",
            MeanSolver::Renewal => "renewal",
        })
    }
}

/// Mean on the grid `t0 + i step`; `m[n_history]` is `m(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPath {
    pub t0: f64,
    pub step: f64,
    pub n_history: usize,
    pub m: Vec<f64>,
    pub solver: MeanSolver,
}

impl MeanPath {
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_history {
            0.0
        } else {
            self.t0 + i as f64 * self.step
        }
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.m.len() - 1)
    }

    /// Values on `[0, T]`.
    pub fn future(&self) -> &[f64] {
        &self.m[self.n_history..]
    }

    /// Linear interpolation; `None` outside the grid.
    pub fn at(&self, t: f64) -> Option<f64> {
        let pos = (t - self.t0) / self.step;
        let last = (self.m.len() - 1) as f64;
        if pos < -1e-9 || pos > last + 1e-9 {
            return None;
        }
        let pos = pos.clamp(0.0, last);
        let i = (pos.floor() as usize).min(self.m.len().saturating_sub(2));
        if self.m.len() == 1 {
            return Some(self.m[0]);
        }
        let w = pos - i as f64;
        Some(self.m[i] + w * (self.m[i + 1] - self.m[i]))
    }

    /// Largest `|m_a - m_b|` over `[0, T]` on the grid of `self`.
    pub fn sup_distance(&self, other: &MeanPath) -> f64 {
        (self.n_history..self.m.len())
            .filter_map(|i| other.at(self.time(i)).map(|v| (v - self.m[i]).abs()))
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t,m,solver`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "m", "solver"])?;
        let tag = self.solver.to_string();
        for (i, v) in self.m.iter().enumerate() {
            wr.write_record([self.time(i).to_string(), v.to_string(), tag.clone()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn check_common(model: &DelayModel, phi: &HistorySegment, t_end: f64, step: f64) -> Result<(usize, usize)> {
    model.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("step must be > 0, got {step}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("horizon must be > 0, got {t_end}")));
    }
    let r = model.r();
    if !phi.covers(r) {
        return Err(invalid(format!("initial segment covers {} < r = {r}", phi.r())));
    }
    let n_hist = crate::euler::lag_count(r, step, "r")?;
    let n = (t_end / step - 1e-9).ceil() as usize;
    Ok((n_hist, n))
}

fn history_values(phi: &HistorySegment, n_hist: usize, step: f64, n: usize) -> Vec<f64> {
    let mut m = Vec::with_capacity(n_hist + n + 1);
    m.extend((0..n_hist).map(|i| phi.value(-((n_hist - i) as f64) * step)));
    m
}

/// RK4 method of steps on the grid `k step`. The step must divide `r`, so
/// the derivative breaks at multiples of `r` fall on grid points.
pub fn solve_mean_fde(model: &DelayModel, phi: &HistorySegment, t_end: f64, step: f64) -> Result<MeanPath> {
    let (n_hist, n) = check_common(model, phi, t_end, step)?;
    let c = combine(model);
    let mut level = Vec::new();
    if let Some(k) = &model.f_mu {
        level.push((k, 1.0));
    }
    if let Some(k) = &model.f_nu {
        level.push((k, c.kappa2));
    }
    let mut sim = Integrator::starting(model.eta, c.c0, level, phi, model.r());
    let mut m = history_values(phi, n_hist, step, n);
    m.push(phi.value(0.0));
    let mut restart = true;
    for k in 1..=n {
        sim.advance(k as f64 * step, step, &mut restart);
        let v = sim.last_value().1;
        if !v.is_finite() {
            return Err(Error::NonFinite("mean equation"));
        }
        m.push(v);
    }
    Ok(MeanPath { t0: -(n_hist as f64) * step, step, n_history: n_hist, m, solver: MeanSolver::Dde })
}

fn zeta(c: &Combined<'_>, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    -c.c0 + c.mass(-t.min(c.r()), 0.0)
}

/// `∫_0^t zeta`, exact.
fn zeta_integral(c: &Combined<'_>, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let r = c.r();
    let b = t.min(r);
    // ∫_0^b G = b G(b) + ∫_{-b}^0 u f(u) du
    let g_part = b * c.mass(-b, 0.0) + c.moment1(-b, 0.0) + (t - b) * c.f_l1;
    -c.c0 * t + g_part
}

/// `zeta(t) = -c0 1{t > 0} + ∫_0^{min(t, r)} f(-u) du`.
pub fn renewal_kernel_zeta(model: &DelayModel, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid(format!("zeta is defined for t >= 0, got {t}")));
    }
    Ok(zeta(&combine(model), t))
}

/// Longest Gauss-8 panel in the renewal forcing integral.
pub const FORCING_PANEL: f64 = 0.05;

/// Forcing term
/// `h(t) = phi(0) - M ∫_0^t zeta + ∫_0^r (zeta(t+u) - zeta(u)) (phi(-u) - M) du`.
fn forcing(c: &Combined<'_>, phi: &HistorySegment, mean: f64, t: f64, cuts: &[f64]) -> f64 {
    let r = c.r();
    let mut inner = 0.0;
    if r > 0.0 {
        let mut pts: Vec<f64> = cuts.iter().copied().filter(|&u| u > 0.0 && u < r).collect();
        if t < r {
            pts.push(r - t);
        }
        pts.push(0.0);
        pts.push(r);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        for w in pts.windows(2) {
            let panels = ((w[1] - w[0]) / FORCING_PANEL).ceil().max(1.0) as usize;
            inner += quad::integrate(w[0], w[1], panels, |u| (zeta(c, t + u) - zeta(c, u)) * (phi.value(-u) - mean));
        }
    }
    phi.value(0.0) - mean * zeta_integral(c, t) + inner
}

/// Trapezoid product integration of the renewal equation on the grid
/// `k step`: `m` is taken piecewise linear and integrated exactly against
/// `zeta` (up to Gauss-8 quadrature of `zeta` on each cell).
pub fn solve_mean_renewal(model: &DelayModel, phi: &HistorySegment, t_end: f64, step: f64) -> Result<MeanPath> {
    let (n_hist, n) = check_common(model, phi, t_end, step)?;
    let c = combine(model);
    let zeta_r = zeta(&c, c.r().max(f64::MIN_POSITIVE));
    if zeta_r.abs() < 1e-14 * c.c0.abs().max(1.0) {
        return Err(Error::ConditionFailed { condition: "zeta(r) != 0", lhs: c.c0, rhs: c.f_l1 });
    }
    let mean = -model.eta / zeta_r;
    let r = c.r();
    let big_r = n_hist;
    let zeta_inf = -c.c0 + c.f_l1;

    // cell i = [i step, (i+1) step]: rising and falling hat-weighted integrals
    let cells = big_r.min(n) + 1;
    let mut rise = Vec::with_capacity(cells);
    let mut fall = Vec::with_capacity(cells);
    for i in 0..cells {
        let a = i as f64 * step;
        let b = a + step;
        if a >= r {
            rise.push(0.5 * zeta_inf * step);
            fall.push(0.5 * zeta_inf * step);
        } else {
            rise.push(quad::gauss(quad::Rule::Gauss8, a, b, |v| zeta(&c, v) * (v - a) / step));
            fall.push(quad::gauss(quad::Rule::Gauss8, a, b, |v| zeta(&c, v) * (b - v) / step));
        }
    }
    let cell = |i: usize| if i < cells { (rise[i], fall[i]) } else { (0.5 * zeta_inf * step, 0.5 * zeta_inf * step) };
    let interior = |k: usize| cell(k - 1).0 + cell(k).1;

    let cuts: Vec<f64> = match phi {
        HistorySegment::Constant { .. } => Vec::new(),
        HistorySegment::Gridded { .. } => phi.knots(r).iter().map(|&(u, _)| -u).collect(),
    };
    // for t >= r the forcing differs from its value at r only through the zeta integral
    let tail = forcing(&c, phi, mean, r, &cuts) + mean * zeta_integral(&c, r);
    let mut sol = Vec::with_capacity(n + 1);
    sol.push(phi.value(0.0));
    // prefix[j] = m_1 + ... + m_j
    let mut prefix = vec![0.0];
    let diag = 1.0 - cell(0).1;
    for k_n in 1..=n {
        let t = k_n as f64 * step;
        let h_t = if t >= r { tail - mean * zeta_integral(&c, t) } else { forcing(&c, phi, mean, t, &cuts) };
        let mut acc = h_t + cell(k_n - 1).0 * sol[0];
        // near lags k = 1..min(R, n-1) use the exact hat weights
        let near = big_r.min(k_n - 1);
        for k in 1..=near {
            acc += interior(k) * sol[k_n - k];
        }
        // far lags k = R+1..n-1 see the constant tail of zeta
        if k_n > big_r + 1 {
            acc += zeta_inf * step * prefix[k_n - big_r - 1];
        }
        let v = acc / diag;
        if !v.is_finite() {
            return Err(Error::NonFinite("renewal equation"));
        }
        sol.push(v);
        prefix.push(prefix[k_n - 1] + v);
    }
    let mut m = history_values(phi, n_hist, step, n);
    m.extend(sol);
    Ok(MeanPath { t0: -(n_hist as f64) * step, step, n_history: n_hist, m, solver: MeanSolver::Renewal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DelayKernel;
    use crate::noise::NoiseSpec;

    fn noise() -> NoiseSpec {
        NoiseSpec::compound_poisson(1.0, 0.0, 1.0, 0).unwrap()
    }

    fn generic() -> DelayModel {
        let fm = DelayKernel::exponential(1.2, 1.5, 1.0).unwrap();
        let fnu = DelayKernel::exponential(0.4, 2.0, 0.5).unwrap();
        DelayModel::new(0.8, 2.5, 0.6, Some(fm), Some(fnu), noise()).unwrap()
    }

    fn stationary(m: &DelayModel) -> f64 {
        let c = combine(m);
        m.eta / (c.c0 - c.f_l1)
    }

    #[test]
    fn zeta_values() {
        let m = generic();
        let c = combine(&m);
        assert_eq!(renewal_kernel_zeta(&m, 0.0).unwrap(), 0.0);
        for t in [1.0, 1.5, 40.0] {
            assert!((renewal_kernel_zeta(&m, t).unwrap() - (-c.c0 + c.f_l1)).abs() < 1e-14);
        }
        let half = quad::integrate(0.0, 0.5, 200, |u| m.f_mu_value(-u) + c.kappa2 * m.f_nu_value(-u));
        assert!((renewal_kernel_zeta(&m, 0.5).unwrap() - (half - c.c0)).abs() < 1e-10);
        assert!(renewal_kernel_zeta(&m, -0.1).is_err());
    }

    #[test]
    fn zeta_integral_matches_quadrature() {
        let m = generic();
        let c = combine(&m);
        for t in [0.3, 0.5, 0.9, 1.0, 2.7] {
            let mut pts = vec![0.0, t];
            for b in [0.5, 1.0] {
                if b < t {
                    pts.push(b);
                }
            }
            pts.sort_by(f64::total_cmp);
            let q: f64 = pts.windows(2).map(|w| quad::integrate(w[0], w[1], 50, |v| zeta(&c, v))).sum();
            assert!((zeta_integral(&c, t) - q).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn stationary_history_stays_put() {
        let m = generic();
        let big_m = stationary(&m);
        let phi = HistorySegment::constant(1.0, big_m).unwrap();
        for path in [solve_mean_fde(&m, &phi, 10.0, 0.01).unwrap(), solve_mean_renewal(&m, &phi, 10.0, 0.01).unwrap()] {
            assert!(path.m.iter().all(|v| (v - big_m).abs() < 1e-9), "{}", path.solver);
        }
    }

    #[test]
    fn scalar_ode_closed_form() {
        let m = DelayModel::cogarch(1.0, 2.0, 0.5, noise()).unwrap();
        let c0 = 1.5;
        let phi = HistorySegment::constant(0.0, 3.0).unwrap();
        let exact = |t: f64| 1.0 / c0 + (3.0 - 1.0 / c0) * (-c0 * t).exp();
        let fde = solve_mean_fde(&m, &phi, 5.0, 1e-3).unwrap();
        for i in 0..fde.m.len() {
            assert!((fde.m[i] - exact(fde.time(i))).abs() < 1e-8);
        }
        // second-order scheme: the error at step 1e-3 is about 1e-7 here
        let ren = solve_mean_renewal(&m, &phi, 5.0, 5e-4).unwrap();
        for i in 0..ren.m.len() {
            let t = ren.time(i);
            assert!((ren.m[i] - exact(t)).abs() < 1e-7, "t = {t}: {}", ren.m[i] - exact(t));
        }
    }

    #[test]
    fn solvers_agree_on_generic_model() {
        let m = generic();
        let phi = HistorySegment::from_fn(1.0, 20, |u| 0.5 + 0.4 * (2.0 * u).sin().powi(2)).unwrap();
        let fde = solve_mean_fde(&m, &phi, 20.0, 1e-3).unwrap();
        let ren = solve_mean_renewal(&m, &phi, 20.0, 1e-3).unwrap();
        let d = fde.sup_distance(&ren);
        assert!(d < 1e-6, "sup distance {d}");
    }

    #[test]
    fn fde_self_convergence() {
        let m = generic();
        let phi = HistorySegment::from_fn(1.0, 20, |u| 1.0 + (3.0 * u).cos()).unwrap();
        let end = |s: f64| *solve_mean_fde(&m, &phi, 3.0, s).unwrap().m.last().unwrap();
        let reference = end(0.0125);
        let e1 = (end(0.1) - reference).abs();
        let e2 = (end(0.05) - reference).abs();
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = generic();
        let phi = HistorySegment::constant(1.0, 1.0).unwrap();
        assert!(solve_mean_fde(&m, &phi, 5.0, 0.0).is_err());
        assert!(solve_mean_fde(&m, &phi, 5.0, 0.3).is_err());
        // c0 = ||f||_1 makes zeta(r) vanish
        let fm = DelayKernel::exponential(1.0, 1.0, 1.0).unwrap();
        let l1 = fm.l1();
        let z = NoiseSpec::compound_poisson(1.0, 0.0, 1.0, 0).unwrap();
        let critical = DelayModel::new(1.0, l1 + 0.5, 0.5, Some(fm), None, z).unwrap();
        assert!(matches!(solve_mean_renewal(&critical, &phi, 5.0, 0.01), Err(Error::ConditionFailed { .. })));
    }

    #[test]
    fn csv_columns() {
        let m = generic();
        let phi = HistorySegment::constant(1.0, 1.0).unwrap();
        let p = solve_mean_fde(&m, &phi, 0.05, 0.01).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,m,solver\n-1,1,dde\n"));
        assert_eq!(text.lines().count(), p.m.len() + 1);
    }
}
