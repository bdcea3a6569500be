//! Estimators applied to simulated paths.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::euler::euler_returns;
use crate::path::SamplePath;

/// Sample mean and its standard error `s / sqrt(n)`.
pub fn mean_se(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(invalid(format!("need at least two samples, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    finite((mean, (var / n).sqrt()), "sample mean")
}

fn finite(v: (f64, f64), what: &'static str) -> Result<(f64, f64)> {
    if v.0.is_finite() && v.1.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_shared_grid(paths: &[SamplePath]) -> Result<&SamplePath> {
    let first = paths.first().ok_or_else(|| invalid("empty path collection"))?;
    if paths.iter().any(|p| p.t0 != first.t0 || p.delta != first.delta || p.x.len() != first.x.len()) {
        return Err(invalid("paths do not share a reporting grid"));
    }
    Ok(first)
}

fn grid_index(p: &SamplePath, t: f64) -> Result<usize> {
    p.nearest_index(t).ok_or_else(|| invalid(format!("t = {t} is outside the path grid")))
}

/// Cross-path mean of `X` at the grid point nearest `t`, with standard error.
pub fn ensemble_mean(paths: &[SamplePath], t: f64) -> Result<(f64, f64)> {
    let i = grid_index(check_shared_grid(paths)?, t)?;
    let xs: Vec<f64> = paths.iter().map(|p| p.x[i]).collect();
    mean_se(&xs)
}

/// Mean-removed autocovariance at `lag` with divisor `n`; the standard error
/// comes from `floor(sqrt(n))` batch means of the lagged products.
pub fn empirical_autocov(series: &[f64], lag: usize) -> Result<(f64, f64)> {
    let n = series.len();
    if lag >= n {
        return Err(invalid(format!("lag {lag} >= series length {n}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let prods: Vec<f64> = (0..n - lag).map(|i| (series[i] - mean) * (series[i + lag] - mean)).collect();
    let est = prods.iter().sum::<f64>() / n as f64;
    let m = prods.len();
    let batches = ((n as f64).sqrt().floor() as usize).clamp(1, m);
    let size = m / batches;
    let se = if batches >= 2 && size >= 1 {
        let means: Vec<f64> =
            (0..batches).map(|b| prods[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
        let (_, se) = mean_se(&means)?;
        se * m as f64 / n as f64
    } else {
        0.0
    };
    finite((est, se), "autocovariance")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovRow {
    pub u: f64,
    pub cov: f64,
    pub std_error: f64,
}

/// Cross-path `Cov(X_t, X_{t+u})` for each `u` (divisor `n - 1`); the
/// standard error is that of the mean of the centred products.
pub fn weak_dependence_check(paths: &[SamplePath], t: f64, u_list: &[f64]) -> Result<Vec<CovRow>> {
    let first = check_shared_grid(paths)?;
    if paths.len() < 2 {
        return Err(invalid("need at least two paths"));
    }
    let i = grid_index(first, t)?;
    let a: Vec<f64> = paths.iter().map(|p| p.x[i]).collect();
    u_list
        .iter()
        .map(|&u| {
            let j = grid_index(first, first.time(i) + u)?;
            let b: Vec<f64> = paths.iter().map(|p| p.x[j]).collect();
            let (cov, std_error) = cross_cov(&a, &b)?;
            Ok(CovRow { u, cov, std_error })
        })
        .collect()
}

fn cross_cov(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1.0);
    let (_, se) = mean_se(&prods)?;
    finite((cov, se * n / (n - 1.0)), "cross-covariance")
}

/// Return autocovariance `E[Y~_t Y~_{t+u}]` of `tau`-returns at each lag:
/// every path contributes the time average of the lagged products of its
/// returns (the returns have mean zero); the standard error is taken across
/// paths.
pub fn return_autocov_ensemble(paths: &[SamplePath], tau: f64, lags: &[f64]) -> Result<Vec<CovRow>> {
    check_shared_grid(paths)?;
    let returns: Vec<Vec<f64>> = paths.iter().map(|p| euler_returns(p, tau)).collect::<Result<_>>()?;
    let delta = paths[0].delta;
    lags.iter()
        .map(|&u| {
            let k = if u == 0.0 { 0 } else { crate::path::lag_steps(delta, u, "lag")? };
            let per_path: Vec<f64> = returns
                .iter()
                .map(|r| {
                    if k >= r.len() {
                        return Err(invalid(format!("lag {u} exceeds the return series")));
                    }
                    let m = r.len() - k;
                    Ok((0..m).map(|i| r[i] * r[i + k]).sum::<f64>() / m as f64)
                })
                .collect::<Result<_>>()?;
            let (cov, std_error) = mean_se(&per_path)?;
            Ok(CovRow { u, cov, std_error })
        })
        .collect()
}

/// One line of a validation table. Statistical rows carry a standard error
/// and are judged by their z-score; tolerance rows have none.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub quantity: String,
    pub lag: Option<f64>,
    pub theory: f64,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub pass: bool,
}

impl ValidationRow {
    /// Row judged by `|estimate - theory| <= z_max * std_error`.
    pub fn z_test(
        quantity: impl Into<String>,
        lag: Option<f64>,
        theory: f64,
        estimate: f64,
        std_error: f64,
        z_max: f64,
    ) -> Self {
        let mut row =
            Self { quantity: quantity.into(), lag, theory, estimate, std_error: Some(std_error), pass: false };
        row.pass = row.z_score().is_some_and(|z| z.abs() <= z_max);
        row
    }

    /// Row with an externally decided verdict.
    pub fn check(quantity: impl Into<String>, lag: Option<f64>, theory: f64, estimate: f64, pass: bool) -> Self {
        Self { quantity: quantity.into(), lag, theory, estimate, std_error: None, pass }
    }

    pub fn z_score(&self) -> Option<f64> {
        let se = self.std_error?;
        let diff = self.estimate - self.theory;
        Some(if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        })
    }
}

/// CSV with columns `quantity,lag,theory,estimate,std_error,z_score,pass`;
/// blank cells for absent values.
pub fn write_validation_csv<W: Write>(rows: &[ValidationRow], w: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["quantity", "lag", "theory", "estimate", "std_error", "z_score", "pass"])?;
    for r in rows {
        wr.write_record([
            r.quantity.clone(),
            opt(r.lag),
            r.theory.to_string(),
            r.estimate.to_string(),
            opt(r.std_error),
            opt(r.z_score()),
            r.pass.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{PathMeta, Scheme};
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn flat(x: Vec<f64>) -> SamplePath {
        let y = vec![0.0; x.len()];
        SamplePath { t0: 0.0, delta: 1.0, n_history: 0, x, y, events: Vec::new(), meta: PathMeta::new(Scheme::Euler) }
    }

    #[test]
    fn ensemble_mean_examples() {
        let paths = vec![flat(vec![2.0, 2.0]), flat(vec![2.0, 2.0]), flat(vec![2.0, 2.0])];
        assert_eq!(ensemble_mean(&paths, 1.0).unwrap(), (2.0, 0.0));
        let two = vec![flat(vec![0.0, 1.0]), flat(vec![0.0, 3.0])];
        let (m, se) = ensemble_mean(&two, 1.0).unwrap();
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
        assert!(ensemble_mean(&[], 0.0).is_err());
        assert!(ensemble_mean(&two, 7.0).is_err());
    }

    #[test]
    fn autocov_examples() {
        assert_eq!(empirical_autocov(&[3.0; 50], 4).unwrap(), (0.0, 0.0));
        let n = 10_000;
        let alt: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (g, _) = empirical_autocov(&alt, 1).unwrap();
        assert!((g - (-((n - 1) as f64) / n as f64)).abs() < 1e-12);
        assert!((g + 1.0).abs() < 1e-3);
        assert!(empirical_autocov(&alt, n).is_err());
    }

    #[test]
    fn autocov_white_noise() {
        let mut rng = substream(3, 0);
        let xs: Vec<f64> = (0..40_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (g0, se0) = empirical_autocov(&xs, 0).unwrap();
        assert!((g0 - 1.0).abs() < 4.0 * se0);
        let (g3, se3) = empirical_autocov(&xs, 3).unwrap();
        assert!(g3.abs() < 4.0 * se3 && se3 > 0.0);
    }

    #[test]
    fn weak_dependence_basics() {
        let mut rng = substream(5, 0);
        let paths: Vec<SamplePath> =
            (0..500).map(|_| flat((0..5).map(|_| StandardNormal.sample(&mut rng)).collect())).collect();
        let rows = weak_dependence_check(&paths, 1.0, &[0.0, 2.0]).unwrap();
        assert!(rows[0].cov > 0.0);
        assert!((rows[0].cov - 1.0).abs() < 4.0 * rows[0].std_error);
        let det: Vec<SamplePath> = (0..10).map(|_| flat(vec![1.0, 2.0, 3.0])).collect();
        for row in weak_dependence_check(&det, 0.0, &[0.0, 1.0, 2.0]).unwrap() {
            assert_eq!(row.cov, 0.0);
        }
    }

    #[test]
    fn se_shrinks_like_root_n() {
        let mut ratios = Vec::new();
        for seed in 0..20 {
            let mut rng = substream(seed, 1);
            let draw = |n: usize, rng: &mut crate::rng::SimRng| -> Vec<f64> {
                (0..n).map(|_| StandardNormal.sample(rng)).collect()
            };
            let (_, a) = mean_se(&draw(1000, &mut rng)).unwrap();
            let (_, b) = mean_se(&draw(2000, &mut rng)).unwrap();
            ratios.push(a / b);
        }
        let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((avg - 2f64.sqrt()).abs() < 0.05, "{avg}");
    }

    #[test]
    fn validation_csv() {
        let rows = vec![
            ValidationRow::z_test("mean", None, 1.0, 1.1, 0.05, 3.0),
            ValidationRow::z_test("return_autocov", Some(0.5), 0.5, 0.4, 0.05, 3.0),
        ];
        assert!(rows[0].pass && rows[1].pass);
        assert!((rows[0].z_score().unwrap() - 2.0).abs() < 1e-12);
        let tol = ValidationRow::check("floor", None, 1.0, 1.0, true);
        assert_eq!(tol.z_score(), None);
        let mut buf = Vec::new();
        write_validation_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("quantity,lag,theory,estimate,std_error,z_score,pass\nmean,,1,"));
    }

    #[test]
    fn nan_is_an_error() {
        assert!(mean_se(&[1.0, f64::NAN]).is_err());
        assert!(empirical_autocov(&[1.0, f64::NAN, 2.0], 1).is_err());
    }

    proptest! {
        #[test]
        fn cross_cov_symmetric(xs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..50)) {
            let a: Vec<f64> = xs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = xs.iter().map(|p| p.1).collect();
            prop_assert_eq!(cross_cov(&a, &b).unwrap(), cross_cov(&b, &a).unwrap());
        }
    }
}
