//! Delay measures `mu`, `nu`: a point mass at zero plus a nonnegative density
//! on `[-r_k, 0]`, their norms, the mean-equation combination
//! `c0 = c_mu - kappa2 c_nu`, `f = f_mu + kappa2 f_nu`, and the Volterra kernel
//! `F(t, s)` obtained by exchanging the double integral in the variance
//! equation.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::noise::NoiseSpec;
use crate::quad::{self, Rule};

#[derive(Debug, Clone, PartialEq)]
pub enum KernelForm {
    /// `f(u) = w (exp(lambda u) - exp(-lambda r_k))`, which vanishes at `-r_k`.
    Exponential { w: f64, lambda: f64 },
    /// Values on the uniform grid `-r_k, ..., 0`, linearly interpolated.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayKernel {
    support: f64,
    form: KernelForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelNorms {
    pub l1: f64,
    pub l2: f64,
    pub sup: f64,
}

impl DelayKernel {
    pub fn exponential(w: f64, lambda: f64, support: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("exponential kernel needs w > 0 and lambda > 0, got w={w}, lambda={lambda}")));
        }
        check_support(support)?;
        Ok(Self { support, form: KernelForm::Exponential { w, lambda } })
    }

    pub fn tabulated(support: f64, values: Vec<f64>) -> Result<Self> {
        check_support(support)?;
        if values.len() < 2 {
            return Err(invalid("tabulated kernel needs at least two values"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("tabulated kernel values must be finite and nonnegative"));
        }
        if values[0] != 0.0 {
            log::warn!("tabulated kernel does not vanish at its left end (f(-r) = {})", values[0]);
        }
        Ok(Self { support, form: KernelForm::Tabulated { values } })
    }

    /// Length `r_k` of the support `[-r_k, 0]`.
    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    fn tab_step(values: &[f64], support: f64) -> f64 {
        support / (values.len() - 1) as f64
    }

    /// `f(u)`; zero outside `[-r_k, 0]`.
    pub fn value(&self, u: f64) -> f64 {
        if u < -self.support || u > 0.0 {
            return 0.0;
        }
        match &self.form {
            KernelForm::Exponential { w, lambda } => {
                (w * ((lambda * u).exp() - (-lambda * self.support).exp())).max(0.0)
            }
            KernelForm::Tabulated { values } => {
                let h = Self::tab_step(values, self.support);
                let x = (u + self.support) / h;
                let i = (x.floor() as usize).min(values.len() - 2);
                let frac = x - i as f64;
                values[i] + (values[i + 1] - values[i]) * frac
            }
        }
    }

    /// `∫_a^b f(u) du`, exact for both forms (the tabulated form is integrated
    /// as the piecewise-linear function it represents).
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(-self.support);
        let hi = b.min(0.0);
        if !(hi > lo) {
            return 0.0;
        }
        match &self.form {
            KernelForm::Exponential { w, lambda } => {
                let c = (-lambda * self.support).exp();
                w * ((lambda * lo).exp() * (lambda * (hi - lo)).exp_m1() / lambda - c * (hi - lo))
            }
            KernelForm::Tabulated { .. } => self.piecewise(lo, hi, |x0, x1, f0, f1| 0.5 * (x1 - x0) * (f0 + f1)),
        }
    }

    /// `∫_a^b u f(u) du`.
    pub fn moment1(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(-self.support);
        let hi = b.min(0.0);
        if !(hi > lo) {
            return 0.0;
        }
        match &self.form {
            KernelForm::Exponential { w, lambda } => {
                let c = (-lambda * self.support).exp();
                let anti = |u: f64| (lambda * u).exp() * (u / lambda - 1.0 / (lambda * lambda)) - 0.5 * c * u * u;
                w * (anti(hi) - anti(lo))
            }
            KernelForm::Tabulated { .. } => self.piecewise(lo, hi, |x0, x1, f0, f1| {
                // Simpson is exact for the quadratic u * f(u)
                let xm = 0.5 * (x0 + x1);
                let fm = 0.5 * (f0 + f1);
                (x1 - x0) / 6.0 * (x0 * f0 + 4.0 * xm * fm + x1 * f1)
            }),
        }
    }

    /// Applies `piece(x0, x1, f(x0), f(x1))` to every linear piece of a
    /// tabulated kernel inside `[lo, hi]` and sums.
    fn piecewise<G: Fn(f64, f64, f64, f64) -> f64>(&self, lo: f64, hi: f64, piece: G) -> f64 {
        let KernelForm::Tabulated { values } = &self.form else { unreachable!("piecewise on a non-tabulated kernel") };
        let h = Self::tab_step(values, self.support);
        let first = (((lo + self.support) / h).floor() as usize).min(values.len() - 2);
        let mut acc = 0.0;
        let mut i = first;
        while i + 1 < values.len() {
            let x0 = -self.support + i as f64 * h;
            let x1 = if i + 2 == values.len() { 0.0 } else { x0 + h };
            if x0 >= hi {
                break;
            }
            let a = x0.max(lo);
            let b = x1.min(hi);
            if b > a {
                acc += piece(a, b, self.value(a), self.value(b));
            }
            i += 1;
        }
        acc
    }

    pub fn norms(&self) -> KernelNorms {
        kernel_norms(self)
    }

    pub fn l1(&self) -> f64 {
        self.mass(-self.support, 0.0)
    }

    /// `∫_{-r_k}^0 exp(z u) f(u) du`.
    pub fn laplace(&self, z: Complex64) -> Complex64 {
        let s = self.support;
        match &self.form {
            KernelForm::Exponential { w, lambda } => {
                let c = (-lambda * s).exp();
                (exp_window(z + lambda, s) - exp_window(z, s) * c) * *w
            }
            KernelForm::Tabulated { values } => {
                let h = Self::tab_step(values, s);
                let sub = ((z.norm() * h / 0.5).ceil() as usize).max(1);
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..values.len() - 1 {
                    let x0 = -s + i as f64 * h;
                    let x1 = if i + 2 == values.len() { 0.0 } else { x0 + h };
                    let sh = (x1 - x0) / sub as f64;
                    for j in 0..sub {
                        let a = x0 + j as f64 * sh;
                        let b = if j + 1 == sub { x1 } else { a + sh };
                        let re = quad::gauss(Rule::Gauss8, a, b, |u| (z * u).exp().re * self.value(u));
                        let im = quad::gauss(Rule::Gauss8, a, b, |u| (z * u).exp().im * self.value(u));
                        acc += Complex64::new(re, im);
                    }
                }
                acc
            }
        }
    }

    /// Points in `[-r_k, 0]` where `f` is not smooth, including both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.form {
            KernelForm::Exponential { .. } => vec![-self.support, 0.0],
            KernelForm::Tabulated { values } => {
                let h = Self::tab_step(values, self.support);
                (0..values.len()).map(|i| -self.support + i as f64 * h).collect()
            }
        }
    }
}

fn check_support(support: f64) -> Result<()> {
    if !(support > 0.0 && support.is_finite()) {
        return Err(invalid(format!(
            "kernel support must be finite and > 0 (use an absent kernel for zero delay), got {support}"
        )));
    }
    Ok(())
}

/// `∫_{-s}^0 exp(a u) du = (1 - exp(-a s)) / a`, with a series near `a s = 0`.
fn exp_window(a: Complex64, s: f64) -> Complex64 {
    let x = a * s;
    if x.norm() < 1e-3 {
        // s * (1 - x/2 + x^2/6 - x^3/24 + x^4/120)
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..=6 {
            term = -term * x / k as f64;
            sum += term;
        }
        sum * s
    } else {
        (Complex64::new(1.0, 0.0) - (-x).exp()) / a
    }
}

/// L1, L2 and sup norms of a kernel. The exponential form uses closed forms;
/// the tabulated form integrates its piecewise-linear interpolant exactly.
pub fn kernel_norms(k: &DelayKernel) -> KernelNorms {
    let s = k.support;
    match &k.form {
        KernelForm::Exponential { w, lambda } => {
            let c = (-lambda * s).exp();
            let l1 = w * (1.0 / lambda - c * (1.0 / lambda + s));
            let l2sq = w
                * w
                * ((-(-2.0 * lambda * s).exp_m1()) / (2.0 * lambda) - 2.0 * c * (-(-lambda * s).exp_m1()) / lambda
                    + c * c * s);
            KernelNorms { l1, l2: l2sq.max(0.0).sqrt(), sup: w * (1.0 - c) }
        }
        KernelForm::Tabulated { values } => {
            let l1 = k.l1();
            // exact square integral of a linear piece: h/3 (f0^2 + f0 f1 + f1^2)
            let l2sq = k.piecewise(-s, 0.0, |x0, x1, f0, f1| (x1 - x0) / 3.0 * (f0 * f0 + f0 * f1 + f1 * f1));
            let sup = values.iter().copied().fold(0.0, f64::max);
            KernelNorms { l1, l2: l2sq.sqrt(), sup }
        }
    }
}

/// `F(t, s) = ∫ f(u) du` over `[max(-r_k, s - t), min(s, 0)]`; zero when the
/// interval is empty, in particular whenever `s >= t` or `t <= 0`.
pub fn volterra_f(k: &DelayKernel, t: f64, s: f64) -> f64 {
    let lo = (-k.support).max(s - t);
    let hi = s.min(0.0);
    if hi > lo {
        k.mass(lo, hi)
    } else {
        0.0
    }
}

/// Parameters of the variance equation: drift level `eta`, point masses
/// `c_mu` (mean reversion) and `c_nu` (jump feedback), the delay densities and
/// the driving noise. An absent kernel means zero delay.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    pub eta: f64,
    pub c_mu: f64,
    pub c_nu: f64,
    pub f_mu: Option<DelayKernel>,
    pub f_nu: Option<DelayKernel>,
    pub noise: NoiseSpec,
}

impl DelayModel {
    pub fn new(
        eta: f64,
        c_mu: f64,
        c_nu: f64,
        f_mu: Option<DelayKernel>,
        f_nu: Option<DelayKernel>,
        noise: NoiseSpec,
    ) -> Result<Self> {
        let m = Self { eta, c_mu, c_nu, f_mu, f_nu, noise };
        m.validate()?;
        Ok(m)
    }

    /// The COGARCH special case `p = q = 0`.
    pub fn cogarch(eta: f64, c_mu: f64, c_nu: f64, noise: NoiseSpec) -> Result<Self> {
        Self::new(eta, c_mu, c_nu, None, None, noise)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta", self.eta), ("c_mu", self.c_mu), ("c_nu", self.c_nu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        self.noise.validate()
    }

    pub fn p(&self) -> f64 {
        self.f_mu.as_ref().map_or(0.0, DelayKernel::support)
    }

    pub fn q(&self) -> f64 {
        self.f_nu.as_ref().map_or(0.0, DelayKernel::support)
    }

    pub fn r(&self) -> f64 {
        self.p().max(self.q())
    }

    pub fn kappa2(&self) -> f64 {
        self.noise.kappa2()
    }

    pub fn f_mu_l1(&self) -> f64 {
        self.f_mu.as_ref().map_or(0.0, DelayKernel::l1)
    }

    pub fn f_nu_l1(&self) -> f64 {
        self.f_nu.as_ref().map_or(0.0, DelayKernel::l1)
    }

    pub fn f_nu_l2(&self) -> f64 {
        self.f_nu.as_ref().map_or(0.0, |k| k.norms().l2)
    }

    pub fn f_mu_value(&self, u: f64) -> f64 {
        self.f_mu.as_ref().map_or(0.0, |k| k.value(u))
    }

    pub fn f_nu_value(&self, u: f64) -> f64 {
        self.f_nu.as_ref().map_or(0.0, |k| k.value(u))
    }

    pub fn combined(&self) -> Combined<'_> {
        combine(self)
    }

    /// Folds a Brownian part of the noise into the drift: `c_mu -> c_mu -
    /// sigma_L^2 c_nu`, `f_mu -> f_mu + sigma_L^2 f_nu`. Only possible when the
    /// result is representable, i.e. `f_nu` absent (or `sigma_L = 0`) and the
    /// new `c_mu` stays positive.
    pub fn fold_brownian(&self) -> Result<Self> {
        let s2 = self.noise.sigma_l * self.noise.sigma_l;
        if s2 == 0.0 {
            return Ok(self.clone());
        }
        if self.f_nu.is_some() {
            return Err(invalid("cannot fold a Brownian part into f_mu when f_nu is present"));
        }
        let noise = NoiseSpec { sigma_l: 0.0, ..self.noise };
        Self::new(self.eta, self.c_mu - s2 * self.c_nu, self.c_nu, self.f_mu.clone(), None, noise)
    }
}

/// The mean-equation view: `c0 = c_mu - kappa2 c_nu` and
/// `f = f_mu + kappa2 f_nu` on `[-r, 0]`.
#[derive(Debug, Clone, Copy)]
pub struct Combined<'a> {
    pub c0: f64,
    pub kappa2: f64,
    pub f_l1: f64,
    f_mu: Option<&'a DelayKernel>,
    f_nu: Option<&'a DelayKernel>,
    r: f64,
}

pub fn combine(m: &DelayModel) -> Combined<'_> {
    let kappa2 = m.kappa2();
    Combined {
        c0: m.c_mu - kappa2 * m.c_nu,
        kappa2,
        f_l1: m.f_mu_l1() + kappa2 * m.f_nu_l1(),
        f_mu: m.f_mu.as_ref(),
        f_nu: m.f_nu.as_ref(),
        r: m.r(),
    }
}

impl Combined<'_> {
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn is_empty(&self) -> bool {
        self.f_mu.is_none() && (self.f_nu.is_none() || self.kappa2 == 0.0)
    }

    pub fn value(&self, u: f64) -> f64 {
        self.f_mu.map_or(0.0, |k| k.value(u)) + self.kappa2 * self.f_nu.map_or(0.0, |k| k.value(u))
    }

    pub fn mass(&self, a: f64, b: f64) -> f64 {
        self.f_mu.map_or(0.0, |k| k.mass(a, b)) + self.kappa2 * self.f_nu.map_or(0.0, |k| k.mass(a, b))
    }

    pub fn moment1(&self, a: f64, b: f64) -> f64 {
        self.f_mu.map_or(0.0, |k| k.moment1(a, b)) + self.kappa2 * self.f_nu.map_or(0.0, |k| k.moment1(a, b))
    }

    pub fn laplace(&self, z: Complex64) -> Complex64 {
        let a = self.f_mu.map_or(Complex64::new(0.0, 0.0), |k| k.laplace(z));
        let b = self.f_nu.map_or(Complex64::new(0.0, 0.0), |k| k.laplace(z));
        a + b * self.kappa2
    }

    /// Sorted, deduplicated non-smooth points of `f` in `[-r, 0]`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.f_mu.into_iter().chain(self.f_nu).flat_map(DelayKernel::breakpoints).collect();
        pts.push(0.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        pts
    }
}
