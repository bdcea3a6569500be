//! The validation battery run by `cdgarch validate`.
//!
//! Twelve criteria, each reduced to one verdict plus the rows behind it.
//! Criteria that need a particular model (the noise check, the COGARCH
//! closed form, the root scans, the truncation study) build it themselves;
//! the rest use the reference model handed to [`Battery::new`].

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use crate::ensemble::event_ensemble;
use crate::error::{invalid, Error, Result};
use crate::euler::euler_simulate;
use crate::events::{compare_paths, event_simulate, EventOptions};
use crate::history::HistorySegment;
use crate::kernels::{combine, DelayKernel, DelayModel};
use crate::mean::{solve_mean_fde, solve_mean_renewal, MeanPath};
use crate::noise::{
    sample_increments, sample_jump_events, sample_jump_events_with, truncate_jumps, IncrementSeries, NoiseSpec,
};
use crate::path::SamplePath;
use crate::quad::integrate;
use crate::rng::{path_stream, substream};
use crate::stability::{moment_bound_report, positivity_floor, scan_roots, stability_report, stationary_mean, Rect};
use crate::stats::{ensemble_mean, return_autocov_ensemble, ValidationRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// The full sample sizes.
    Full,
    /// Reduced sizes for smoke runs.
    Quick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Sizes {
    increments: usize,
    ensemble: usize,
    floor_paths: usize,
    euler_draws: usize,
    random_models: usize,
    ucp_models: usize,
}

impl Suite {
    fn sizes(self) -> Sizes {
        match self {
            Suite::Full => Sizes {
                increments: 1_000_000,
                ensemble: 2000,
                floor_paths: 100,
                euler_draws: 20,
                random_models: 20,
                ucp_models: 10,
            },
            Suite::Quick => Sizes {
                increments: 100_000,
                ensemble: 200,
                floor_paths: 10,
                euler_draws: 4,
                random_models: 4,
                ucp_models: 4,
            },
        }
    }
}

pub const CRITERIA: [&str; 12] = [
    "noise moments",
    "cogarch closed form",
    "jump identity",
    "positivity floor",
    "euler convergence",
    "mean solver agreement",
    "stationary mean",
    "exponential mean convergence",
    "root scan consistency",
    "return autocovariance",
    "ucp truncation",
    "moment bound",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub rows: Vec<ValidationRow>,
    pub seconds: f64,
}

impl Criterion {
    /// `"criterion 3 (jump identity): PASS, max ratio 1e-16"`.
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        format!("criterion {} ({}): {verdict}, {}", self.id, self.name, self.detail)
    }
}

const ENSEMBLE_HORIZON: f64 = 50.0;
const ENSEMBLE_OPTS: (f64, f64) = (0.01, 0.05);

pub struct Battery {
    model: DelayModel,
    seed: u64,
    sizes: Sizes,
    stationary: OnceLock<Vec<SamplePath>>,
    floor: OnceLock<Vec<SamplePath>>,
}

impl Battery {
    /// The reference model needs centred pure-jump noise, a stationary mean,
    /// a positivity floor and `C1- > 0`.
    pub fn new(model: DelayModel, suite: Suite, seed: u64) -> Result<Self> {
        let n = &model.noise;
        if n.sigma_l != 0.0 || n.lambda_l <= 0.0 || n.mu_j != 0.0 {
            return Err(invalid("the reference model needs centred compound Poisson noise (sigma_l = 0, mu_j = 0)"));
        }
        stationary_mean(&model)?;
        positivity_floor(&model)?;
        let c1 = moment_bound_report(&model, 0.0, 0.0)?.c1_minus;
        if c1 <= 0.0 {
            return Err(Error::ConditionFailed { condition: "C1- > 0", lhs: c1, rhs: 0.0 });
        }
        Ok(Self { model, seed, sizes: suite.sizes(), stationary: OnceLock::new(), floor: OnceLock::new() })
    }

    /// Sample sizes and integrator settings, for echoing in reports.
    pub fn settings(&self) -> Vec<(&'static str, String)> {
        let s = &self.sizes;
        vec![
            ("seed", self.seed.to_string()),
            ("noise_increments", s.increments.to_string()),
            ("stationary_paths", s.ensemble.to_string()),
            ("floor_paths", s.floor_paths.to_string()),
            ("ensemble_horizon", ENSEMBLE_HORIZON.to_string()),
            ("ensemble_ode_step", ENSEMBLE_OPTS.0.to_string()),
            ("ensemble_report_dt", ENSEMBLE_OPTS.1.to_string()),
            ("euler_draws", s.euler_draws.to_string()),
            ("root_scan_models", s.random_models.to_string()),
            ("ucp_models", s.ucp_models.to_string()),
        ]
    }

    pub fn run_all(&self) -> Vec<Result<Criterion>> {
        (1..=CRITERIA.len()).map(|id| self.run(id)).collect()
    }

    pub fn run(&self, id: usize) -> Result<Criterion> {
        let start = Instant::now();
        let (pass, detail, rows) = match id {
            1 => self.noise_moments(),
            2 => self.cogarch_closed_form(),
            3 => self.jump_identity(),
            4 => self.positivity(),
            5 => self.euler_convergence(),
            6 => self.solver_agreement(),
            7 => self.stationary_mean(),
            8 => self.mean_convergence(),
            9 => self.root_scan(),
            10 => self.return_autocov(),
            11 => self.ucp_truncation(),
            12 => self.moment_bound(),
            _ => return Err(invalid(format!("no criterion {id}"))),
        }?;
        let seconds = start.elapsed().as_secs_f64();
        Ok(Criterion { id, name: CRITERIA[id - 1], pass, detail, rows, seconds })
    }

    fn mean_level(&self) -> f64 {
        stationary_mean(&self.model).expect("checked in new")
    }

    fn ensemble<'a>(&self, phi_level: f64, cell: &'a OnceLock<Vec<SamplePath>>, n: usize) -> Result<&'a [SamplePath]> {
        if let Some(paths) = cell.get() {
            return Ok(paths);
        }
        let phi = HistorySegment::constant(self.model.r(), phi_level)?;
        let opts = EventOptions::new(ENSEMBLE_OPTS.0, ENSEMBLE_OPTS.1)?;
        let paths = event_ensemble(&self.model, &phi, ENSEMBLE_HORIZON, n, self.seed, &opts)?;
        Ok(cell.get_or_init(|| paths))
    }

    fn stationary_paths(&self) -> Result<&[SamplePath]> {
        self.ensemble(self.mean_level(), &self.stationary, self.sizes.ensemble)
    }

    fn floor_paths(&self) -> Result<&[SamplePath]> {
        let floor = positivity_floor(&self.model)?;
        self.ensemble(floor, &self.floor, self.sizes.floor_paths)
    }

    fn noise_moments(&self) -> Outcome {
        let spec = NoiseSpec::compound_poisson(1.0, 0.0, 1.0, self.seed)?;
        let delta = 1.0;
        let inc = sample_increments(&spec, delta, 0, self.sizes.increments)?;
        let n = inc.ds.len() as f64;
        let rates: Vec<f64> = inc.ds.iter().map(|s| s / delta).collect();
        let mean = rates.iter().sum::<f64>() / n;
        let var = rates.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (k2, k4) = (spec.kappa2(), spec.kappa4());
        let rows = vec![
            ValidationRow::check("kappa2", None, k2, mean, (mean - k2).abs() <= 0.01 * k2),
            ValidationRow::check("kappa4", None, k4, var * delta, (var * delta - k4).abs() <= 0.05 * k4),
        ];
        let detail = format!("mean dS/delta {mean:.5} (kappa2 {k2}), var dS/delta {:.4} (kappa4 {k4})", var * delta);
        Ok(verdict(rows, detail))
    }

    fn cogarch_closed_form(&self) -> Outcome {
        let noise = NoiseSpec::compound_poisson(1.0, 0.0, 1.0, 0)?;
        let model = DelayModel::cogarch(1.0, 1.0, 0.25, noise)?;
        let horizon = 20.0;
        let log = sample_jump_events(&model.noise, (0.0, horizon), self.seed)?;
        let phi = HistorySegment::constant(0.0, 2.0)?;
        let path = event_simulate(&model, &log, &phi, 0.0, &EventOptions::new(1e-3, 0.01)?)?;
        let level = model.eta / model.c_mu;
        let mut worst: f64 = 0.0;
        for i in path.n_history..path.x.len() {
            let t = path.time(i);
            let k = path.events.partition_point(|e| e.t <= t);
            let (t_j, x_j) =
                if k == 0 { (0.0, phi.value(0.0)) } else { (path.events[k - 1].t, path.events[k - 1].x_post) };
            let exact = level + (x_j - level) * (-model.c_mu * (t - t_j)).exp();
            worst = worst.max((path.x[i] - exact).abs() / exact);
        }
        let rows = vec![ValidationRow::check("cogarch max relative error", None, 0.0, worst, worst < 1e-8)];
        Ok(verdict(rows, format!("max relative error {worst:.3e} over {} events", path.events.len())))
    }

    fn jump_identity(&self) -> Outcome {
        let c_nu = self.model.c_nu;
        let mut worst: f64 = 0.0;
        let mut count = 0usize;
        for p in self.stationary_paths()?.iter().chain(self.floor_paths()?) {
            for e in &p.events {
                let dx = e.x_post - e.x_pre;
                let eps = 1e-3 * e.x_pre;
                worst = worst.max((dx - c_nu * e.x_pre * e.dl * e.dl).abs() / dx.max(eps));
                count += 1;
            }
        }
        let rows = vec![ValidationRow::check("jump identity max ratio", None, 0.0, worst, worst < 1e-12)];
        Ok(verdict(rows, format!("max ratio {worst:.3e} over {count} events")))
    }

    fn positivity(&self) -> Outcome {
        let floor = positivity_floor(&self.model)?;
        let lowest = self.floor_paths()?.iter().map(SamplePath::min_x).fold(f64::INFINITY, f64::min);
        let rows = vec![ValidationRow::check("min X", None, floor, lowest, lowest >= floor * (1.0 - 1e-9))];
        Ok(verdict(rows, format!("min X {lowest:.10} against floor {floor:.10}")))
    }

    fn euler_convergence(&self) -> Outcome {
        let noise = NoiseSpec::compound_poisson(1.0, 0.0, 1.0, 0)?;
        let model = DelayModel::cogarch(0.1, 1.0, 0.5, noise)?;
        let horizon = 10.0;
        let phi = HistorySegment::constant(0.0, 0.2)?;
        let opts = EventOptions::new(1e-3, 1e-3)?;
        let mut ratios = Vec::with_capacity(self.sizes.euler_draws);
        for i in 0..self.sizes.euler_draws {
            let log = sample_jump_events_with(&model.noise, (0.0, horizon), &mut path_stream(self.seed, i as u64))?;
            let reference = event_simulate(&model, &log, &phi, 0.0, &opts)?;
            let dist = |delta: f64| -> Result<f64> {
                let n = (horizon / delta).round() as usize;
                let inc = IncrementSeries::from_jump_log(&log, delta, 0, n)?;
                Ok(compare_paths(&euler_simulate(&model, &inc, &phi, 0.0)?, &reference)?.0)
            };
            ratios.push(dist(1e-2)? / dist(5e-3)?);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let rows = vec![ValidationRow::check("sup distance ratio", None, 2.0, mean, (1.5..=2.5).contains(&mean))];
        Ok(verdict(rows, format!("mean ratio {mean:.4} over {} draws", ratios.len())))
    }

    fn solver_agreement(&self) -> Outcome {
        let phi = HistorySegment::constant(self.model.r(), 2.0 * self.mean_level())?;
        let a = solve_mean_fde(&self.model, &phi, 20.0, 1e-3)?;
        let b = solve_mean_renewal(&self.model, &phi, 20.0, 1e-3)?;
        let d = a.sup_distance(&b);
        let rows = vec![ValidationRow::check("dde vs renewal sup distance", None, 0.0, d, d < 1e-6)];
        Ok(verdict(rows, format!("sup distance {d:.3e}")))
    }

    fn stationary_mean(&self) -> Outcome {
        let m = self.mean_level();
        let phi = HistorySegment::constant(self.model.r(), m)?;
        let drift = |p: &MeanPath| p.future().iter().fold(0.0f64, |a, v| a.max((v - m).abs()));
        let d_fde = drift(&solve_mean_fde(&self.model, &phi, 20.0, 1e-3)?);
        let d_ren = drift(&solve_mean_renewal(&self.model, &phi, 20.0, 1e-3)?);
        let (est, se) = ensemble_mean(self.stationary_paths()?, ENSEMBLE_HORIZON)?;
        let rows = vec![
            ValidationRow::check("dde drift from M", None, 0.0, d_fde, d_fde <= 1e-9),
            ValidationRow::check("renewal drift from M", None, 0.0, d_ren, d_ren <= 1e-9),
            ValidationRow::z_test("ensemble mean X_T", Some(ENSEMBLE_HORIZON), m, est, se, 3.0),
        ];
        let detail = format!("solver drift {d_fde:.2e}/{d_ren:.2e}, ensemble {est:.5} +- {se:.5} vs M {m:.5}");
        Ok(verdict(rows, detail))
    }

    fn mean_convergence(&self) -> Outcome {
        let report = stability_report(&self.model, 0.0, 0.0, 400)?;
        let (root, _) = report.dominant_root.ok_or_else(|| invalid("no characteristic root found"))?;
        let m = self.mean_level();
        let phi = HistorySegment::constant(self.model.r(), 2.0 * m)?;
        let (t1, t2) = (2.0 / root.abs(), 12.0 / root.abs());
        let path = solve_mean_fde(&self.model, &phi, t2, 1e-3)?;
        let pts: Vec<(f64, f64)> = (path.n_history..path.m.len())
            .map(|i| (path.time(i), path.m[i]))
            .filter(|&(t, _)| t >= t1)
            .map(|(t, v)| (t, (v - m).abs().ln()))
            .collect();
        let slope = ls_slope(&pts);
        let pass = (slope - root).abs() <= 0.05 * root.abs();
        let rows = vec![ValidationRow::check("log|m - M| slope", None, root, slope, pass)];
        Ok(verdict(rows, format!("slope {slope:.5}, dominant root {root:.5}")))
    }

    fn root_scan(&self) -> Outcome {
        let mut rng = substream(self.seed, u64::MAX);
        let rect = Rect::new(0.0, 10.0, -50.0, 50.0)?;
        let mut rows = Vec::new();
        let mut found = 0;
        for _ in 0..self.sizes.random_models {
            let model = loop {
                let m = random_model(&mut rng)?;
                let c = combine(&m);
                if c.c0 > c.f_l1 {
                    break m;
                }
            };
            found += scan_roots(&model, &rect, 400)?.count;
        }
        rows.push(ValidationRow::check("roots in [0,10]x[-50,50]", None, 0.0, found as f64, found == 0));
        let unstable = unstable_model()?;
        let scan = scan_roots(&unstable, &Rect::default_for(&unstable), 400)?;
        let root = scan.dominant.map_or(f64::NAN, |z| z.re);
        let bisected = real_root_bisection(&unstable);
        let gap = (root - bisected).abs();
        rows.push(ValidationRow::check("positive real root", None, bisected, root, gap <= 1e-8));
        Ok(verdict(rows, format!("{found} roots in stable models, root {root:.12} vs bisection {bisected:.12}")))
    }

    fn return_autocov(&self) -> Outcome {
        let m = self.mean_level();
        let k2 = self.model.kappa2();
        let lags = [0.0, 0.5, 1.5];
        let est = return_autocov_ensemble(self.stationary_paths()?, 1.0, &lags)?;
        let rows: Vec<ValidationRow> = est
            .iter()
            .map(|c| {
                ValidationRow::z_test(
                    "return autocov",
                    Some(c.u),
                    k2 * m * (1.0 - c.u).max(0.0),
                    c.cov,
                    c.std_error,
                    3.0,
                )
            })
            .collect();
        let detail = rows
            .iter()
            .map(|r| format!("u={}: z={:.2}", r.lag.unwrap_or(0.0), r.z_score().unwrap_or(f64::NAN)))
            .collect::<Vec<_>>()
            .join(", ");
        Ok(verdict(rows, detail))
    }

    fn ucp_truncation(&self) -> Outcome {
        let mut rng = substream(self.seed, u64::MAX - 1);
        let opts = EventOptions::new(0.02, 0.05)?;
        let (mut coarse, mut fine) = (Vec::new(), Vec::new());
        for i in 0..self.sizes.ucp_models {
            let model = random_model(&mut rng)?;
            let r = model.r();
            let log = sample_jump_events_with(&model.noise, (-r, 10.0), &mut path_stream(self.seed, i as u64))?;
            let phi = HistorySegment::constant(r, 0.5)?;
            let full = event_simulate(&model, &log, &phi, 0.0, &opts)?;
            let dist = |n: u32| -> Result<f64> {
                let cut = event_simulate(&model, &truncate_jumps(&log, n)?, &phi, 0.0, &opts)?;
                Ok(compare_paths(&full, &cut)?.0)
            };
            coarse.push(dist(2)?);
            fine.push(dist(16)?);
        }
        let (a, b) = (median(&mut coarse), median(&mut fine));
        let rows = vec![ValidationRow::check("median sup distance n=16", None, a / 4.0, b, b < a / 4.0)];
        Ok(verdict(rows, format!("median distance {a:.4e} at n=2, {b:.4e} at n=16")))
    }

    fn moment_bound(&self) -> Outcome {
        let m = self.mean_level();
        let bound = moment_bound_report(&self.model, m, m * m)?.l1_bound.expect("C1- > 0 checked in new");
        let paths = self.stationary_paths()?;
        let mut highest = f64::NEG_INFINITY;
        for i in paths[0].n_history..paths[0].x.len() {
            let mean = paths.iter().map(|p| p.x[i]).sum::<f64>() / paths.len() as f64;
            highest = highest.max(mean);
        }
        let rows = vec![ValidationRow::check("max ensemble mean", None, bound, highest, highest <= bound)];
        Ok(verdict(rows, format!("max ensemble mean {highest:.5}, bound {bound:.5}")))
    }
}

type Outcome = Result<(bool, String, Vec<ValidationRow>)>;

fn verdict(rows: Vec<ValidationRow>, detail: String) -> (bool, String, Vec<ValidationRow>) {
    (rows.iter().all(|r| r.pass), detail, rows)
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn random_model(rng: &mut impl Rng) -> Result<DelayModel> {
    let p = rng.random_range(0.2..1.0);
    let q = rng.random_range(0.2..1.0);
    let f_mu = DelayKernel::exponential(rng.random_range(0.2..1.0), rng.random_range(0.5..2.0), p)?;
    let f_nu = DelayKernel::exponential(rng.random_range(0.1..0.5), rng.random_range(0.5..2.0), q)?;
    let noise = NoiseSpec::compound_poisson(rng.random_range(1.0..4.0), 0.0, 0.6, 0)?;
    let c_mu = rng.random_range(1.5..3.0);
    DelayModel::new(rng.random_range(0.2..1.0), c_mu, rng.random_range(0.1..0.6), Some(f_mu), Some(f_nu), noise)
}

/// `c0 = 0.5` against `||f||_1 ≈ 1.33`: a single positive real root.
fn unstable_model() -> Result<DelayModel> {
    let noise = NoiseSpec::compound_poisson(1.0, 0.0, 1.0, 0)?;
    let f_mu = DelayKernel::exponential(3.0, 1.0, 1.5)?;
    DelayModel::new(1.0, 1.0, 0.5, Some(f_mu), None, noise)
}

/// Root of `x + c0 - ∫ e^{xu} f(u) du` on `x >= 0`, the integral taken by
/// panelled Gauss-Legendre on the pointwise kernel values.
fn real_root_bisection(model: &DelayModel) -> f64 {
    let c = combine(model);
    let mut cuts = c.breakpoints();
    cuts.push(-c.r());
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let delta = |x: f64| {
        let s: f64 = cuts.windows(2).map(|w| integrate(w[0], w[1], 200, |u| (x * u).exp() * c.value(u))).sum();
        x + c.c0 - s
    };
    let (mut lo, mut hi) = (0.0, c.f_l1 - c.c0 + 1.0);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if delta(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> DelayModel {
        let noise = NoiseSpec::compound_poisson(1.0, 0.0, 1.0, 0).unwrap();
        let f_mu = DelayKernel::exponential(1.0, 2.0, 1.0).unwrap();
        let f_nu = DelayKernel::exponential(0.5, 1.0, 0.5).unwrap();
        DelayModel::new(1.0, 3.0, 0.5, Some(f_mu), Some(f_nu), noise).unwrap()
    }

    #[test]
    fn rejects_unsuitable_reference() {
        let noise = NoiseSpec::new(0.5, 1.0, 0.0, 1.0, 0).unwrap();
        let m = DelayModel::cogarch(1.0, 2.0, 0.5, noise).unwrap();
        assert!(Battery::new(m, Suite::Quick, 0).is_err());
        assert!(Battery::new(reference(), Suite::Quick, 0).is_ok());
    }

    #[test]
    fn deterministic_criteria_pass() {
        let b = Battery::new(reference(), Suite::Quick, 3).unwrap();
        for id in [2, 6, 8, 9] {
            let c = b.run(id).unwrap();
            assert!(c.pass, "{}", c.line());
        }
        assert!(b.run(13).is_err());
    }

    #[test]
    fn helpers() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 1.0 - 0.5 * i as f64)).collect();
        assert!((ls_slope(&pts) + 0.5).abs() < 1e-14);
    }
}
