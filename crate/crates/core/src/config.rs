//! TOML run configuration.
//!
//! ```toml
//! [noise]
//! lambda_l = 1.0
//! sigma_j = 1.0
//!
//! [model]
//! eta = 1.0
//! c_mu = 1.0
//! c_nu = 0.25
//!
//! [kernel.mu]
//! form = "exponential"
//! w = 0.5
//! lambda = 2.0
//! support = 1.0
//!
//! [run]
//! seed = 7
//! ```
//!
//! Unknown keys are rejected. Every `[run]` value has a default; the resolved
//! configuration (defaults filled in) is what [`Config::digest`] hashes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::history::HistorySegment;
use crate::kernels::{DelayKernel, DelayModel};
use crate::noise::NoiseSpec;
use crate::stability::{positivity_floor, stationary_mean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub sigma_l: f64,
    #[serde(default)]
    pub lambda_l: f64,
    #[serde(default)]
    pub mu_j: f64,
    #[serde(default)]
    pub sigma_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub eta: f64,
    pub c_mu: f64,
    pub c_nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Exponential { w: f64, lambda: f64, support: f64 },
    Tabulated { support: f64, values: Vec<f64> },
}

impl KernelSpec {
    pub fn build(&self) -> Result<DelayKernel> {
        match self {
            KernelSpec::Exponential { w, lambda, support } => DelayKernel::exponential(*w, *lambda, *support),
            KernelSpec::Tabulated { support, values } => DelayKernel::tabulated(*support, values.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub mu: Option<KernelSpec>,
    pub nu: Option<KernelSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Euler,
    Events,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Dde,
    Renewal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedHistory {
    /// `Phi ≡ M`.
    Stationary,
    /// `Phi ≡ x^-`.
    Floor,
}

/// Initial segment: a constant level or a named one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HistorySpec {
    Level(f64),
    Named(NamedHistory),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub scheme: SchemeChoice,
    pub solver: SolverChoice,
    /// Euler grid step.
    pub delta: f64,
    pub horizon: f64,
    pub paths: usize,
    /// RK4 step of the event-driven scheme.
    pub ode_step: f64,
    /// Reporting grid of the event-driven scheme.
    pub report_dt: f64,
    /// Grid step of the mean solvers.
    pub mean_step: f64,
    pub history: HistorySpec,
    pub y0: f64,
    /// Contour samples per side in the root scan.
    pub grid_density: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            scheme: SchemeChoice::Events,
            solver: SolverChoice::Dde,
            delta: 0.01,
            horizon: 20.0,
            paths: 1,
            ode_step: 1e-3,
            report_dt: 0.01,
            mean_step: 1e-3,
            history: HistorySpec::Named(NamedHistory::Stationary),
            y0: 0.0,
            grid_density: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub noise: NoiseSection,
    pub model: ModelSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub run: RunSection,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the model and the numeric `[run]` settings.
    pub fn validate(&self) -> Result<()> {
        self.model()?;
        let r = &self.run;
        for (name, v) in [
            ("delta", r.delta),
            ("horizon", r.horizon),
            ("ode_step", r.ode_step),
            ("report_dt", r.report_dt),
            ("mean_step", r.mean_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("run.{name} must be positive and finite, got {v}")));
            }
        }
        if r.paths == 0 || r.grid_density < 8 {
            return Err(Error::Config(format!(
                "need run.paths >= 1 and run.grid_density >= 8, got {} and {}",
                r.paths, r.grid_density
            )));
        }
        Ok(())
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The resolved configuration, every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`Config::to_toml`], hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_toml().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        let n = &self.noise;
        NoiseSpec::new(n.sigma_l, n.lambda_l, n.mu_j, n.sigma_j, self.run.seed).map_err(config_error)
    }

    pub fn model(&self) -> Result<DelayModel> {
        let f_mu = self.kernel.mu.as_ref().map(KernelSpec::build).transpose().map_err(config_error)?;
        let f_nu = self.kernel.nu.as_ref().map(KernelSpec::build).transpose().map_err(config_error)?;
        let m = &self.model;
        DelayModel::new(m.eta, m.c_mu, m.c_nu, f_mu, f_nu, self.noise()?).map_err(config_error)
    }

    /// Constant initial segment on `[-r, 0]` at the configured level.
    pub fn history(&self, model: &DelayModel) -> Result<HistorySegment> {
        let level = match self.run.history {
            HistorySpec::Level(v) => v,
            HistorySpec::Named(NamedHistory::Stationary) => stationary_mean(model)?,
            HistorySpec::Named(NamedHistory::Floor) => positivity_floor(model)?,
        };
        HistorySegment::constant(model.r(), level).map_err(config_error)
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidParameter(msg) => Error::Config(msg),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COGARCH: &str = r#"
[noise]
lambda_l = 1.0
sigma_j = 1.0

[model]
eta = 1.0
c_mu = 1.0
c_nu = 0.25
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = Config::from_toml_str(COGARCH).unwrap();
        assert_eq!(cfg.run, RunSection::default());
        let m = cfg.model().unwrap();
        assert_eq!(m.r(), 0.0);
        assert!((stationary_mean(&m).unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kernels_and_run_overrides() {
        let text = format!(
            "{COGARCH}\n[kernel.mu]\nform = \"exponential\"\nw = 0.5\nlambda = 2.0\nsupport = 1.0\n\n\
             [kernel.nu]\nform = \"tabulated\"\nsupport = 0.5\nvalues = [0.2, 0.1, 0.0]\n\n\
             [run]\nseed = 9\nscheme = \"euler\"\nhistory = 0.7\n"
        );
        let cfg = Config::from_toml_str(&text).unwrap();
        assert_eq!(cfg.run.seed, 9);
        assert_eq!(cfg.run.scheme, SchemeChoice::Euler);
        assert_eq!(cfg.run.history, HistorySpec::Level(0.7));
        let m = cfg.model().unwrap();
        assert_eq!(m.p(), 1.0);
        assert_eq!(m.q(), 0.5);
        assert_eq!(m.noise.seed, 9);
        assert_eq!(cfg.history(&m).unwrap().value(-0.3), 0.7);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for bad in [
            format!("{COGARCH}\n[run]\nsede = 3\n"),
            format!("{COGARCH}\n[extra]\na = 1\n"),
            COGARCH.replace("eta = 1.0", "eta = 1.0\nbeta = 2.0"),
            format!(
                "{COGARCH}\n[kernel.mu]\nform = \"exponential\"\nw = 1.0\nlambda = 1.0\nsupport = 1.0\nextra = 1\n"
            ),
        ] {
            assert!(matches!(Config::from_toml_str(&bad), Err(Error::Config(_))), "{bad}");
        }
        assert!(matches!(Config::from_toml_str(&COGARCH.replace("c_mu = 1.0", "c_mu = -1.0")), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml_str(&format!("{COGARCH}\n[run]\ndelta = 0.0\n")), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml_str(&format!("{COGARCH}\n[run]\npaths = 0\n")), Err(Error::Config(_))));
    }

    #[test]
    fn digest_tracks_resolved_values() {
        let a = Config::from_toml_str(COGARCH).unwrap();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.run.seed = 1;
        assert_ne!(a.digest(), b.digest());
        let round = Config::from_toml_str(&a.to_toml()).unwrap();
        assert_eq!(round, a);
        assert_eq!(a.digest().len(), 64);
    }
}
