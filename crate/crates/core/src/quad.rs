//! Fixed-order Gauss–Legendre rules and a panelled integrator.

// nodes/weights on [-1, 1], positive half only (symmetric rules)
const GL2: [(f64, f64); 1] = [(0.577_350_269_189_625_8, 1.0)];
const GL4: [(f64, f64); 2] =
    [(0.339_981_043_584_856_3, 0.652_145_154_862_546_1), (0.861_136_311_594_052_6, 0.347_854_845_137_453_9)];
const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Gauss2,
    Gauss4,
    Gauss8,
}

impl Rule {
    fn half(self) -> &'static [(f64, f64)] {
        match self {
            Rule::Gauss2 => &GL2,
            Rule::Gauss4 => &GL4,
            Rule::Gauss8 => &GL8,
        }
    }
}

/// Integral of `g` over `[a, b]` with a single application of `rule`.
#[inline]
pub fn gauss<F: FnMut(f64) -> f64>(rule: Rule, a: f64, b: f64, mut g: F) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in rule.half() {
        acc += w * (g(c - h * x) + g(c + h * x));
    }
    acc * h
}

/// Gauss-8 on `panels` equal panels of `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut g: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == n { b } else { lo + h };
            gauss(Rule::Gauss8, lo, hi, &mut g)
        })
        .sum()
}

/// Composite trapezoid with `panels` equal panels.
pub fn trapezoid<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut g: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| g(a + i as f64 * h)).sum();
    h * (0.5 * (g(a) + g(b)) + inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_are_exact_on_their_polynomials() {
        let cubic = |x: f64| 1.0 + x - 2.0 * x * x + 3.0 * x.powi(3);
        let exact = |x: f64| x + x * x / 2.0 - 2.0 * x.powi(3) / 3.0 + 0.75 * x.powi(4);
        let want = exact(2.0) - exact(-0.5);
        assert!((gauss(Rule::Gauss2, -0.5, 2.0, cubic) - want).abs() < 1e-13);
        let p15 = |x: f64| x.powi(15) + x.powi(7);
        let want15 = 2f64.powi(16) / 16.0 + 2f64.powi(8) / 8.0;
        assert!((gauss(Rule::Gauss8, 0.0, 2.0, p15) - want15).abs() < 1e-9 * want15);
    }

    #[test]
    fn panelled_exponential() {
        let v = integrate(-3.0, 0.0, 4, f64::exp);
        assert!((v - (1.0 - (-3f64).exp())).abs() < 1e-14);
        let t = trapezoid(-3.0, 0.0, 10_000, f64::exp);
        assert!((t - v).abs() < 1e-8);
    }
}
