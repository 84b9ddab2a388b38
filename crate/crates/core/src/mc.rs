use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{ModelParams, UtilitySpec};
use crate::strategy::strategy_lookup;
use crate::surface::Surface;

#[derive(Debug, Clone, Copy)]
pub struct McConfig<'a> {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub initial_xi: f64,
    pub initial_m: f64,
    pub initial_y: f64,
    pub freeze_volatility: bool,
    pub antithetic: bool,
    pub strategy: &'a Surface,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub mean_utility: f64,
    pub std_error: f64,
    pub violation_count: u64,
    pub absorbed_fraction: f64,
}

fn validate(cfg: &McConfig) -> Result<()> {
    let alpha = cfg.strategy.grid.alpha;
    if cfg.paths == 0 || cfg.steps == 0 {
        return Err(Error::Config("simulation needs paths >= 1 and steps >= 1".into()));
    }
    if !(cfg.initial_xi > alpha && cfg.initial_xi <= 1.0) {
        return Err(Error::Config(format!(
            "initial ratio {} outside ({alpha}, 1]",
            cfg.initial_xi
        )));
    }
    if !(cfg.initial_m > 0.0) || !(cfg.initial_y > 0.0) {
        return Err(Error::Config("initial running max and volatility state must be positive".into()));
    }
    if cfg.antithetic && cfg.paths % 2 != 0 {
        return Err(Error::Config("antithetic sampling needs an even path count".into()));
    }
    Ok(())
}

/// One path of the discounted wealth / running max / precision system.
/// Returns (terminal utility, absorbed flag, constraint-violation flag).
fn path_outcome(
    cfg: &McConfig,
    params: &ModelParams,
    utility: &UtilitySpec,
    stream: u64,
    negate: bool,
) -> Result<(f64, bool, bool)> {
    let g = &cfg.strategy.grid;
    let alpha = g.alpha;
    let dt = g.horizon / cfg.steps as f64;
    let sqrt_dt = dt.sqrt();
    let sign = if negate { -1.0 } else { 1.0 };
    let delta = if cfg.freeze_volatility { 0.0 } else { params.delta };
    let rho_perp = (1.0 - params.rho * params.rho).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let mut l = cfg.initial_xi * cfg.initial_m;
    let mut m = cfg.initial_m;
    let mut y = cfg.initial_y;
    let mut absorbed = false;
    let mut violated = false;

    for k in 0..cfg.steps {
        let y_plus = y.max(0.0);
        if y_plus <= 0.0 {
            return Err(Error::Numerical(format!(
                "volatility state reached zero on path {stream} at step {k}"
            )));
        }
        let sigma = 1.0 / y_plus.sqrt();

        let t = k as f64 * dt;
        let xi = (l / m).clamp(alpha, 1.0);
        let pi = strategy_lookup(cfg.strategy, t, xi)?;

        let z1: f64 = sign * rng.sample::<f64, _>(StandardNormal);
        l += pi * (params.excess_drift * dt + sigma * sqrt_dt * z1);
        if !l.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite wealth on path {stream} at step {k}"
            )));
        }
        if l > m {
            m = l;
        }

        if !cfg.freeze_volatility {
            let z2: f64 = sign * rng.sample::<f64, _>(StandardNormal);
            let db2 = sqrt_dt * (params.rho * z1 + rho_perp * z2);
            y += params.kappa * (params.theta - y_plus) * dt + delta * y_plus.sqrt() * db2;
        }

        if l <= alpha * m {
            absorbed = true;
            break;
        }
        if l < alpha * m {
            violated = true;
        }
    }

    let ratio = if absorbed { alpha } else { l / m };
    Ok((utility.value(ratio), absorbed, violated))
}

fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
        }
    }
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = pairwise_sum(samples) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let devs: Vec<f64> = samples.iter().map(|u| (u - mean) * (u - mean)).collect();
    let var = pairwise_sum(&devs) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Estimates E[U(L_T / M_T)] under the given strategy surface by Euler paths
/// of the discounted wealth, running maximum, and precision factor. Paths run
/// in parallel but are reduced in a fixed order, so identical configurations
/// give bit-identical results.
pub fn simulate(cfg: &McConfig, params: &ModelParams, utility: &UtilitySpec) -> Result<McResult> {
    validate(cfg)?;
    params.validate()?;
    utility.validate()?;

    let outcomes: Vec<(f64, bool, bool)> = if cfg.antithetic {
        let pairs: Vec<[(f64, bool, bool); 2]> = (0..cfg.paths / 2)
            .into_par_iter()
            .map(|p| {
                let a = path_outcome(cfg, params, utility, p as u64, false)?;
                let b = path_outcome(cfg, params, utility, p as u64, true)?;
                Ok::<_, Error>([a, b])
            })
            .collect::<Result<Vec<_>>>()?;
        pairs.into_iter().flatten().collect()
    } else {
        (0..cfg.paths)
            .into_par_iter()
            .map(|i| path_outcome(cfg, params, utility, i as u64, false))
            .collect::<Result<Vec<_>>>()?
    };

    let (mean_utility, std_error) = if cfg.antithetic {
        let pair_means: Vec<f64> = outcomes
            .chunks_exact(2)
            .map(|pair| 0.5 * (pair[0].0 + pair[1].0))
            .collect();
        mean_and_se(&pair_means)
    } else {
        let utilities: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
        mean_and_se(&utilities)
    };

    let absorbed = outcomes.iter().filter(|o| o.1).count();
    let violation_count = outcomes.iter().filter(|o| o.2).count() as u64;

    Ok(McResult {
        mean_utility,
        std_error,
        violation_count,
        absorbed_fraction: absorbed as f64 / cfg.paths as f64,
    })
}

/// Standardized distance z = (mean - reference) / std_error. A zero standard
/// error signals either an exact match (0) or a hard disagreement (+inf).
pub fn compare(result: &McResult, reference_value: f64) -> f64 {
    if result.std_error == 0.0 {
        if result.mean_utility == reference_value {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (result.mean_utility - reference_value) / result.std_error
    }
}
