use crate::error::{invalid, Result};

/// Initial segment `Phi` of the variance on `[-r, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub enum HistorySegment {
    Constant {
        r: f64,
        value: f64,
    },
    /// Values on the uniform grid `-r, ..., 0`, linearly interpolated.
    Gridded {
        r: f64,
        values: Vec<f64>,
    },
}

impl HistorySegment {
    pub fn constant(r: f64, value: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(invalid(format!("history length must be >= 0, got {r}")));
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(invalid(format!("history values must be >= 0, got {value}")));
        }
        Ok(Self::Constant { r, value })
    }

    pub fn gridded(r: f64, values: Vec<f64>) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid(format!("gridded history needs r > 0, got {r}")));
        }
        if values.len() < 2 {
            return Err(invalid("gridded history needs at least two values"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("history values must be finite and >= 0"));
        }
        Ok(Self::Gridded { r, values })
    }

    /// Samples `g` on `n + 1` uniform points of `[-r, 0]`.
    pub fn from_fn<G: Fn(f64) -> f64>(r: f64, n: usize, g: G) -> Result<Self> {
        let n = n.max(1);
        Self::gridded(r, (0..=n).map(|i| g(-r + r * i as f64 / n as f64)).collect())
    }

    pub fn r(&self) -> f64 {
        match self {
            Self::Constant { r, .. } | Self::Gridded { r, .. } => *r,
        }
    }

    pub fn covers(&self, r: f64) -> bool {
        self.r() >= r * (1.0 - 1e-12) || matches!(self, Self::Constant { .. })
    }

    /// `Phi(u)`; a constant segment extends to any `u <= 0`.
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Self::Constant { value, .. } => *value,
            Self::Gridded { r, values } => {
                let h = r / (values.len() - 1) as f64;
                let x = ((u + r) / h).clamp(0.0, (values.len() - 1) as f64);
                let i = (x.floor() as usize).min(values.len() - 2);
                let frac = x - i as f64;
                values[i] + (values[i + 1] - values[i]) * frac
            }
        }
    }

    /// Interpolation knots `(u, Phi(u))` covering `[-r_needed, 0]`.
    pub fn knots(&self, r_needed: f64) -> Vec<(f64, f64)> {
        match self {
            Self::Constant { value, .. } => {
                if r_needed > 0.0 {
                    vec![(-r_needed, *value), (0.0, *value)]
                } else {
                    vec![(0.0, *value)]
                }
            }
            Self::Gridded { r, values } => {
                let h = r / (values.len() - 1) as f64;
                values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (if i + 1 == values.len() { 0.0 } else { -r + i as f64 * h }, v))
                    .collect()
            }
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Self::Constant { value, .. } => *value,
            Self::Gridded { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}
