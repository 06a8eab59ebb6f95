use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normal kernel restricted to `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncNormal {
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncNormal {
    pub fn new(mean: f64, variance: f64, lower: f64, upper: f64) -> Result<Self> {
        let p = Self {
            mean,
            variance,
            lower,
            upper,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mean, self.variance, self.lower, self.upper]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.variance <= 0.0 || self.lower >= self.upper {
            return Err(Error::InvalidPrior(format!(
                "truncated normal needs variance > 0 and lower < upper, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Log density up to the normalizing constant; `-inf` outside the support.
    pub fn log_kernel(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper {
            return f64::NEG_INFINITY;
        }
        let z = x - self.mean;
        -0.5 * z * z / self.variance
    }

    pub fn grad(&self, x: f64) -> f64 {
        -(x - self.mean) / self.variance
    }

    pub fn curvature(&self) -> f64 {
        -1.0 / self.variance
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn project(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

/// Weak priors for the free population and item parameters of the
/// longitudinal fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub slope: TruncNormal,
    pub slope_variance: TruncNormal,
    pub threshold_increment: TruncNormal,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        self.slope.validate()?;
        self.slope_variance.validate()?;
        self.threshold_increment.validate()?;
        if self.slope_variance.lower <= 0.0 || self.threshold_increment.lower <= 0.0 {
            return Err(Error::InvalidPrior(
                "slope variance and threshold increments need a positive lower bound".into(),
            ));
        }
        Ok(())
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        default_priors()
    }
}

/// Slope `TN(0, 1)` on `[-1, 1]`, random-slope variance `TN(0, 1)` on
/// `[0.01, 2]`, upper threshold increments `TN(1, 1)` on `[0.01, 10]`.
pub fn default_priors() -> PriorSpec {
    PriorSpec {
        slope: TruncNormal {
            mean: 0.0,
            variance: 1.0,
            lower: -1.0,
            upper: 1.0,
        },
        slope_variance: TruncNormal {
            mean: 0.0,
            variance: 1.0,
            lower: 0.01,
            upper: 2.0,
        },
        threshold_increment: TruncNormal {
            mean: 1.0,
            variance: 1.0,
            lower: 0.01,
            upper: 10.0,
        },
    }
}
