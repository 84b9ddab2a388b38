use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market constants for the precision-factor volatility model: the factor Y
/// is an inverse variance, so sigma(y) = 1/sqrt(y), the Sharpe ratio is
/// (mu - r) * sqrt(y), the factor drift is kappa * (theta - y) and the factor
/// volatility is delta * sqrt(y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub excess_drift: f64,
    pub kappa: f64,
    pub theta: f64,
    pub delta: f64,
    pub rho: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::default_calibration()
    }
}

impl ModelParams {
    /// Calibrated long-run values used by the default configuration.
    pub fn default_calibration() -> Self {
        ModelParams {
            excess_drift: 0.0811,
            kappa: 0.3374,
            theta: 27.9345,
            delta: 0.6503,
            rho: 0.5241,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.excess_drift.is_finite() {
            return Err(Error::Config("excess_drift must be finite".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.theta > 0.0) {
            return Err(Error::Config(format!("theta must be > 0, got {}", self.theta)));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Config(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum UtilitySpec {
    Power { gamma: f64 },
    Mixture { gamma1: f64, gamma2: f64 },
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        let check = |g: f64, name: &str| -> Result<()> {
            if !(g > 0.0) || g == 1.0 || !g.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be positive, finite and != 1, got {g}"
                )));
            }
            Ok(())
        };
        match *self {
            UtilitySpec::Power { gamma } => check(gamma, "gamma"),
            UtilitySpec::Mixture { gamma1, gamma2 } => {
                check(gamma1, "gamma1")?;
                check(gamma2, "gamma2")?;
                if gamma1 == gamma2 {
                    return Err(Error::Config("gamma1 and gamma2 must differ".into()));
                }
                Ok(())
            }
        }
    }

    /// U(xi); caller guarantees xi > 0 (grid nodes always are).
    pub fn value(&self, xi: f64) -> f64 {
        debug_assert!(xi > 0.0);
        match *self {
            UtilitySpec::Power { gamma } => xi.powf(1.0 - gamma) / (1.0 - gamma),
            UtilitySpec::Mixture { gamma1, gamma2 } => {
                xi.powf(1.0 - gamma1) / (1.0 - gamma1) + xi.powf(1.0 - gamma2) / (1.0 - gamma2)
            }
        }
    }

    /// U'(xi).
    pub fn d1(&self, xi: f64) -> f64 {
        debug_assert!(xi > 0.0);
        match *self {
            UtilitySpec::Power { gamma } => xi.powf(-gamma),
            UtilitySpec::Mixture { gamma1, gamma2 } => xi.powf(-gamma1) + xi.powf(-gamma2),
        }
    }

    /// U''(xi).
    pub fn d2(&self, xi: f64) -> f64 {
        debug_assert!(xi > 0.0);
        match *self {
            UtilitySpec::Power { gamma } => -gamma * xi.powf(-gamma - 1.0),
            UtilitySpec::Mixture { gamma1, gamma2 } => {
                -gamma1 * xi.powf(-gamma1 - 1.0) - gamma2 * xi.powf(-gamma2 - 1.0)
            }
        }
    }

    /// -U'(xi)/U''(xi), the terminal risk tolerance profile.
    pub fn terminal_risk_tolerance(&self, xi: f64) -> f64 {
        debug_assert!(xi > 0.0);
        match *self {
            UtilitySpec::Power { gamma } => xi / gamma,
            UtilitySpec::Mixture { gamma1, gamma2 } => {
                let num = xi.powf(-gamma1) + xi.powf(-gamma2);
                let den = gamma1 * xi.powf(-gamma1 - 1.0) + gamma2 * xi.powf(-gamma2 - 1.0);
                num / den
            }
        }
    }
}

/// Taylor coefficients of the model functions at the reference point
/// (xbar, ybar), plus the factor correlation that enters the mixed term.
/// lambda10 is the x-derivative of the Sharpe ratio, zero for this model
/// family since no coefficient depends on x; b0 is the log-price drift at the
/// reference and is carried for formula completeness even though every
/// downstream formula multiplies it by lambda10 = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionCoefficients {
    pub lambda0: f64,
    pub lambda10: f64,
    pub lambda01: f64,
    pub b0: f64,
    pub c0: f64,
    pub sigma0: f64,
    pub beta0: f64,
    pub rho: f64,
    pub xbar: f64,
    pub ybar: f64,
}

/// Sharpe ratio lambda(y) = (mu - r) * sqrt(y).
pub fn sharpe_ratio(params: &ModelParams, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("sharpe_ratio needs y > 0, got {y}")));
    }
    Ok(params.excess_drift * y.sqrt())
}

/// Expansion coefficients at (xbar, ybar) for the precision-factor model.
pub fn expansion_coefficients(
    params: &ModelParams,
    xbar: f64,
    ybar: f64,
) -> Result<ExpansionCoefficients> {
    if !(ybar > 0.0) {
        return Err(Error::Domain(format!(
            "expansion_coefficients needs ybar > 0, got {ybar}"
        )));
    }
    let sqrt_y = ybar.sqrt();
    let lambda0 = params.excess_drift * sqrt_y;
    let sigma0 = 1.0 / sqrt_y;
    let b0 = params.excess_drift - 0.5 * sigma0 * sigma0;
    Ok(ExpansionCoefficients {
        lambda0,
        lambda10: 0.0,
        lambda01: params.excess_drift / (2.0 * sqrt_y),
        b0,
        c0: params.kappa * (params.theta - ybar),
        sigma0,
        beta0: params.delta * sqrt_y,
        rho: params.rho,
        xbar,
        ybar,
    })
}

/// U(xi) with domain checking.
pub fn utility_value(spec: &UtilitySpec, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("utility_value needs xi > 0, got {xi}")));
    }
    Ok(spec.value(xi))
}

/// -U'/U'' with domain checking.
pub fn terminal_risk_tolerance(spec: &UtilitySpec, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!(
            "terminal_risk_tolerance needs xi > 0, got {xi}"
        )));
    }
    Ok(spec.terminal_risk_tolerance(xi))
}
