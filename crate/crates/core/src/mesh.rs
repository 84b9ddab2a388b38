use std::sync::Arc;

use crate::error::{Error, Result};
use crate::market::{sharpe_ratio, ModelParams, UtilitySpec};

/// Uniform mesh over [0, T] x [alpha, 1]. Time layers are indexed from the
/// terminal side: layer n sits at t = T - n * dt, so layer 0 is the terminal
/// condition and layer n_count is t = 0.
#[derive(Debug, Clone)]
pub struct Grid {
    pub alpha: f64,
    pub horizon: f64,
    pub j_count: usize,
    pub dxi: f64,
    pub n_count: usize,
    pub dt: f64,
    pub xi_nodes: Vec<f64>,
    pub dt_capped: bool,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha
            && self.horizon == other.horizon
            && self.j_count == other.j_count
            && self.n_count == other.n_count
    }
}

impl Grid {
    pub fn xi(&self, j: usize) -> f64 {
        self.xi_nodes[j]
    }

    pub fn t(&self, n: usize) -> f64 {
        self.horizon - n as f64 * self.dt
    }
}

pub struct StableDt {
    pub dt: f64,
    pub capped: bool,
}

/// Largest explicit time step for the diffusion coefficient (lambda0^2/2) R^2,
/// scaled by a safety factor: safety * dxi^2 / (lambda0^2 * r_max^2).
/// A vanishing lambda0 or r_max means no diffusion to resolve; the step is
/// then capped at horizon/16 and flagged.
pub fn stable_dt(
    lambda0: f64,
    r_max: f64,
    dxi: f64,
    safety: f64,
    horizon: f64,
) -> Result<StableDt> {
    if !(dxi > 0.0) || !(horizon > 0.0) {
        return Err(Error::Domain(format!(
            "stable_dt needs dxi > 0 and horizon > 0, got dxi={dxi}, horizon={horizon}"
        )));
    }
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::Domain(format!("safety must lie in (0, 1], got {safety}")));
    }
    if lambda0 < 0.0 || r_max < 0.0 {
        return Err(Error::Domain("lambda0 and r_max must be nonnegative".into()));
    }
    let denom = lambda0 * lambda0 * r_max * r_max;
    if denom == 0.0 {
        return Ok(StableDt { dt: horizon / 16.0, capped: true });
    }
    Ok(StableDt { dt: safety * dxi * dxi / denom, capped: false })
}

/// Builds the space-time grid. The time step comes from stable_dt with
/// lambda0 evaluated at ybar and r_max taken as the maximum of the terminal
/// risk tolerance over the spatial nodes; N = ceil(horizon / dt_stable) and
/// dt = horizon / N.
pub fn build_grid(
    alpha: f64,
    horizon: f64,
    j_count: usize,
    params: &ModelParams,
    utility: &UtilitySpec,
    ybar: f64,
    safety: f64,
) -> Result<Arc<Grid>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    if j_count < 4 {
        return Err(Error::Config(format!("j_count must be at least 4, got {j_count}")));
    }
    params.validate()?;
    utility.validate()?;

    let dxi = (1.0 - alpha) / j_count as f64;
    let xi_nodes: Vec<f64> = (0..=j_count)
        .map(|j| alpha + (1.0 - alpha) * j as f64 / j_count as f64)
        .collect();
    let lambda0 = sharpe_ratio(params, ybar)?;
    let r_max = xi_nodes
        .iter()
        .map(|&xi| utility.terminal_risk_tolerance(xi))
        .fold(0.0_f64, f64::max);
    let stable = stable_dt(lambda0, r_max, dxi, safety, horizon)?;
    let n_count = (horizon / stable.dt).ceil() as usize;
    let n_count = n_count.max(1);
    let dt = horizon / n_count as f64;
    debug_assert!(dt <= stable.dt * (1.0 + 1e-12));

    Ok(Arc::new(Grid {
        alpha,
        horizon,
        j_count,
        dxi,
        n_count,
        dt,
        xi_nodes,
        dt_capped: stable.capped,
    }))
}
