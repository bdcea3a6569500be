//! Stationarity, positivity and moment-bound conditions, and the roots of the
//! characteristic function `Delta(z) = z + c0 - ∫_{-r}^0 e^{zu} f(u) du`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::kernels::{combine, DelayModel};

/// `M = eta / (c0 - ||f||_1)`.
pub fn stationary_mean(model: &DelayModel) -> Result<f64> {
    let c = combine(model);
    if c.c0 > c.f_l1 {
        Ok(model.eta / (c.c0 - c.f_l1))
    } else {
        Err(Error::ConditionFailed { condition: "c0 > ||f||_1", lhs: c.c0, rhs: c.f_l1 })
    }
}

/// `x^- = eta / (c_mu - ||f_mu||_1)`, the level the variance never falls below
/// when started above it.
pub fn positivity_floor(model: &DelayModel) -> Result<f64> {
    let l1 = model.f_mu_l1();
    if model.c_mu > l1 {
        Ok(model.eta / (model.c_mu - l1))
    } else {
        Err(Error::ConditionFailed { condition: "c_mu > ||f_mu||_1", lhs: model.c_mu, rhs: l1 })
    }
}

/// The constants `C1±`, `C2±` and the uniform `L1`/`L2` bounds they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBounds {
    pub c1_minus: f64,
    pub c1_plus: f64,
    pub c2_minus: f64,
    pub c2_plus: f64,
    pub l1_bound: Option<f64>,
    pub l2_bound: Option<f64>,
}

pub fn moment_bound_report(model: &DelayModel, ex0: f64, ex0_sq: f64) -> Result<MomentBounds> {
    if !(ex0 >= 0.0) || !(ex0_sq >= ex0 * ex0 * (1.0 - 1e-12)) {
        return Err(invalid(format!("need E[X0] >= 0 and E[X0^2] >= E[X0]^2, got {ex0}, {ex0_sq}")));
    }
    let k2 = model.kappa2();
    let k4 = model.noise.kappa4();
    let base1 = model.c_mu - k2 * model.c_nu;
    let spread1 = model.f_mu_l1() + k2 * model.f_nu_l1();
    let base2 = base1 - 0.5 * k4 * model.c_nu * model.c_nu;
    let spread2 = model.f_mu_l1() + k4 * model.f_nu_l2();
    let (c1_minus, c1_plus) = (base1 - spread1, base1 + spread1);
    let (c2_minus, c2_plus) = (base2 - spread2, base2 + spread2);
    let l1_bound = (c1_minus > 0.0).then(|| 2.0 * model.eta / c1_minus + ex0 * c1_plus / c1_minus);
    let l2_bound = (c2_minus > 0.0).then(|| (model.eta / c2_minus).powi(2) + ex0_sq * c2_plus / c2_minus);
    Ok(MomentBounds { c1_minus, c1_plus, c2_minus, c2_plus, l1_bound, l2_bound })
}

pub fn characteristic_delta(model: &DelayModel, z: Complex64) -> Complex64 {
    let c = combine(model);
    z + c.c0 - c.laplace(z)
}

/// `Delta'(z) = 1 - ∫ u e^{zu} f(u) du`, by a central difference of the
/// analytic function along the real axis.
fn delta_prime(model: &DelayModel, z: Complex64) -> Complex64 {
    let eps = 1e-6 * z.norm().max(1.0);
    let e = Complex64::new(eps, 0.0);
    (characteristic_delta(model, z + e) - characteristic_delta(model, z - e)) / (2.0 * eps)
}

/// Closed rectangle `[re_min, re_max] x [im_min, im_max]` of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_max > re_min && im_max > im_min) || ![re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite()) {
            return Err(invalid(format!("degenerate rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]")));
        }
        Ok(Self { re_min, re_max, im_min, im_max })
    }

    /// `[0, 10 N] x [-20 N, 20 N]` with `N = c0 + ||f||_1 + 1`.
    pub fn default_for(model: &DelayModel) -> Self {
        let n = model_scale(model);
        Self { re_min: 0.0, re_max: 10.0 * n, im_min: -20.0 * n, im_max: 20.0 * n }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    fn grow(&self, frac: f64) -> Self {
        let (dw, dh) = (frac * self.width(), frac * self.height());
        Self { re_min: self.re_min - dw, re_max: self.re_max + dw, im_min: self.im_min - dh, im_max: self.im_max + dh }
    }

    /// Splits along the longer side at fraction `at`.
    fn split(&self, at: f64) -> (Self, Self) {
        if self.width() >= self.height() {
            let m = self.re_min + at * self.width();
            (Self { re_max: m, ..*self }, Self { re_min: m, ..*self })
        } else {
            let m = self.im_min + at * self.height();
            (Self { im_max: m, ..*self }, Self { im_min: m, ..*self })
        }
    }
}

fn model_scale(model: &DelayModel) -> f64 {
    let c = combine(model);
    c.c0.abs() + c.f_l1 + 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootScan {
    pub rect: Rect,
    pub count: usize,
    /// Root of largest real part inside `rect`.
    pub dominant: Option<Complex64>,
    /// Every isolated root, polished.
    pub roots: Vec<Complex64>,
}

/// Winding number of `Delta` around the boundary of `rect`, sampled at
/// `density` points per side.
fn winding(model: &DelayModel, rect: &Rect, density: usize) -> Result<i64> {
    let n = density.max(4);
    let corners = [
        Complex64::new(rect.re_min, rect.im_min),
        Complex64::new(rect.re_max, rect.im_min),
        Complex64::new(rect.re_max, rect.im_max),
        Complex64::new(rect.re_min, rect.im_max),
    ];
    let mut total = 0.0;
    let mut prev = characteristic_delta(model, corners[0]);
    for side in 0..4 {
        let (a, b) = (corners[side], corners[(side + 1) % 4]);
        for k in 1..=n {
            let z = a + (b - a) * (k as f64 / n as f64);
            let d = characteristic_delta(model, z);
            if d.norm() == 0.0 || !d.is_finite() {
                return Err(Error::ContourTooCoarse { increment: f64::INFINITY, re: z.re, im: z.im });
            }
            let inc = (d / prev).arg();
            if inc.abs() > FRAC_PI_2 {
                return Err(Error::ContourTooCoarse { increment: inc.abs(), re: z.re, im: z.im });
            }
            total += inc;
            prev = d;
        }
    }
    let w = total / (2.0 * PI);
    let rounded = w.round();
    if (w - rounded).abs() > 1e-6 {
        let c = rect.center();
        return Err(Error::ContourTooCoarse { increment: (w - rounded).abs(), re: c.re, im: c.im });
    }
    Ok(rounded as i64)
}

/// Winding number, doubling the sampling density up to 16x on failure.
fn winding_refined(model: &DelayModel, rect: &Rect, density: usize) -> Result<i64> {
    let mut d = density;
    let mut last = None;
    for _ in 0..5 {
        match winding(model, rect, d) {
            Ok(w) => return Ok(w),
            Err(e) => last = Some(e),
        }
        d *= 2;
    }
    Err(last.expect("at least one attempt"))
}

fn newton(model: &DelayModel, z0: Complex64) -> Option<Complex64> {
    let mut z = z0;
    for _ in 0..50 {
        let d = characteristic_delta(model, z);
        if d.norm() < 1e-12 {
            return Some(z);
        }
        let dp = delta_prime(model, z);
        if dp.norm() == 0.0 {
            return None;
        }
        z -= d / dp;
        if !z.is_finite() {
            return None;
        }
    }
    (characteristic_delta(model, z).norm() < 1e-12).then_some(z)
}

const SPLIT_AT: [f64; 3] = [0.5137, 0.4711, 0.5523];

fn isolate(
    model: &DelayModel,
    rect: &Rect,
    count: i64,
    density: usize,
    depth: u32,
    out: &mut Vec<Complex64>,
) -> Result<()> {
    if count <= 0 {
        return Ok(());
    }
    let c = rect.center();
    let diam = rect.width().hypot(rect.height());
    if count == 1 && diam <= 0.05 * c.norm().max(1.0) {
        if let Some(z) = newton(model, c).filter(|z| rect.grow(0.1).contains(*z)) {
            out.push(z);
            return Ok(());
        }
    }
    if depth >= 80 || diam < 1e-12 * c.norm().max(1.0) {
        // a multiple root, or one Newton cannot polish: report the cell centre
        for _ in 0..count {
            out.push(newton(model, c).unwrap_or(c));
        }
        return Ok(());
    }
    let mut last = None;
    for at in SPLIT_AT {
        let (a, b) = rect.split(at);
        let (na, nb) = match (winding_refined(model, &a, density), winding_refined(model, &b, density)) {
            (Ok(na), Ok(nb)) if na + nb == count => (na, nb),
            (Err(e), _) | (_, Err(e)) => {
                last = Some(e);
                continue;
            }
            _ => continue,
        };
        isolate(model, &a, na, density, depth + 1, out)?;
        isolate(model, &b, nb, density, depth + 1, out)?;
        return Ok(());
    }
    Err(last.unwrap_or(Error::ContourTooCoarse { increment: f64::NAN, re: c.re, im: c.im }))
}

/// Counts the zeros of `Delta` inside `rect` by the argument principle and
/// locates them by bisection of the rectangle and Newton polishing.
pub fn scan_roots(model: &DelayModel, rect: &Rect, grid_density: usize) -> Result<RootScan> {
    if grid_density < 4 {
        return Err(invalid(format!("grid density must be >= 4, got {grid_density}")));
    }
    let count = winding(model, rect, grid_density)?;
    if count < 0 {
        return Err(invalid(format!("negative winding number {count}: Delta has no poles")));
    }
    let mut roots = Vec::new();
    isolate(model, rect, count, grid_density, 0, &mut roots)?;
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let dominant = roots.first().map(|z| if z.im.abs() < 1e-9 { Complex64::new(z.re, 0.0) } else { *z });
    Ok(RootScan { rect: *rect, count: count as usize, dominant, roots })
}

/// `kappa2 M (1 - u)_+`, the autocovariance of unit-interval returns at lag `u`.
pub fn theoretical_return_autocov(model: &DelayModel, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(invalid(format!("lag must be >= 0, got {u}")));
    }
    if model.noise.mu_j != 0.0 {
        log::warn!("return autocovariance assumes centred noise, mu_J = {}", model.noise.mu_j);
    }
    let m = stationary_mean(model)?;
    Ok(model.kappa2() * m * (1.0 - u).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub kappa2: f64,
    pub kappa4: f64,
    pub c0: f64,
    pub f_l1: f64,
    pub f_mu_l1: f64,
    pub f_nu_l1: f64,
    pub f_nu_l2: f64,
    pub mean_stationary: bool,
    pub mean: Option<f64>,
    pub x_floor: Option<f64>,
    pub bounds: MomentBounds,
    pub scan_rect: Rect,
    pub roots_in_rhp: usize,
    /// Root of largest real part, searched down to `dominant_scan_re_min`.
    pub dominant_root: Option<(f64, f64)>,
    pub dominant_scan_re_min: f64,
}

impl StabilityReport {
    /// Flat `(key, value)` pairs; absent optional values are `NA`.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        let r = &self.scan_rect;
        vec![
            ("kappa2", self.kappa2.to_string()),
            ("kappa4", self.kappa4.to_string()),
            ("c0", self.c0.to_string()),
            ("f_l1", self.f_l1.to_string()),
            ("f_mu_l1", self.f_mu_l1.to_string()),
            ("f_nu_l1", self.f_nu_l1.to_string()),
            ("f_nu_l2", self.f_nu_l2.to_string()),
            ("mean_stationary", self.mean_stationary.to_string()),
            ("M", opt(self.mean)),
            ("x_floor", opt(self.x_floor)),
            ("C1_minus", self.bounds.c1_minus.to_string()),
            ("C1_plus", self.bounds.c1_plus.to_string()),
            ("C2_minus", self.bounds.c2_minus.to_string()),
            ("C2_plus", self.bounds.c2_plus.to_string()),
            ("l1_bound", opt(self.bounds.l1_bound)),
            ("l2_bound", opt(self.bounds.l2_bound)),
            ("scan_rect", format!("[{}, {}]x[{}, {}]", r.re_min, r.re_max, r.im_min, r.im_max)),
            ("roots_in_rhp", self.roots_in_rhp.to_string()),
            ("dominant_root_re", opt(self.dominant_root.map(|z| z.0))),
            ("dominant_root_im", opt(self.dominant_root.map(|z| z.1))),
            ("dominant_scan_re_min", self.dominant_scan_re_min.to_string()),
        ]
    }

    /// `key = value` lines.
    pub fn write_kv<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in self.entries() {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    }

    /// Two-column CSV `key,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["key", "value"])?;
        for (k, v) in self.entries() {
            wr.write_record([k, v.as_str()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Evaluates every condition for `model`, with moments of `X_0` for the
/// bounds; scans the default rectangle for right-half-plane roots and a wider
/// one for the dominant root.
pub fn stability_report(model: &DelayModel, ex0: f64, ex0_sq: f64, grid_density: usize) -> Result<StabilityReport> {
    model.validate()?;
    let c = combine(model);
    let bounds = moment_bound_report(model, ex0, ex0_sq)?;
    let mean = stationary_mean(model).ok();
    let n = model_scale(model);
    // a hair left of the axis, so that a root at 0 is counted
    let mut scan_rect = Rect::default_for(model);
    scan_rect.re_min = -1e-9 * n;
    let rhp = scan_roots(model, &scan_rect, grid_density)?;
    let mut lo = -c.c0.abs() - c.f_l1 - 1.0;
    let mut dominant = None;
    for _ in 0..4 {
        let rect = Rect { re_min: lo, ..scan_rect };
        match scan_roots(model, &rect, grid_density) {
            Ok(s) => {
                dominant = s.dominant;
                break;
            }
            Err(Error::ContourTooCoarse { .. }) => lo *= 1.0137,
            Err(e) => return Err(e),
        }
    }
    Ok(StabilityReport {
        kappa2: c.kappa2,
        kappa4: model.noise.kappa4(),
        c0: c.c0,
        f_l1: c.f_l1,
        f_mu_l1: model.f_mu_l1(),
        f_nu_l1: model.f_nu_l1(),
        f_nu_l2: model.f_nu_l2(),
        mean_stationary: mean.is_some(),
        mean,
        x_floor: positivity_floor(model).ok(),
        bounds,
        scan_rect,
        roots_in_rhp: rhp.count,
        dominant_root: dominant.map(|z| (z.re, z.im)),
        dominant_scan_re_min: lo,
    })
}
