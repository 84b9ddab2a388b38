use std::sync::Arc;

use crate::config::RunConfig;
use crate::correction::{compute_q1, CorrectionInputs};
use crate::error::{Error, Result};
use crate::market::{expansion_coefficients, sharpe_ratio, ExpansionCoefficients};
use crate::mesh::{build_grid, Grid};
use crate::risk::{differentiate, solve_r, RiskDerivatives};
use crate::strategy::{pi0, pi1, StrategyOrder, StrategyRequest};
use crate::surface::{Surface, SurfaceKind};
use crate::value::solve_q0;

/// Everything the zeroth/first-order machinery produces for one volatility
/// state y: the grid sized by that state's Sharpe ratio, both PDE surfaces,
/// and the risk-tolerance derivative stack when the grid can support it.
pub struct ScenarioSolution {
    pub y: f64,
    pub lambda0: f64,
    pub coeffs: ExpansionCoefficients,
    pub grid: Arc<Grid>,
    pub q0: Surface,
    pub r: Surface,
    rd: Option<RiskDerivatives>,
}

impl ScenarioSolution {
    pub fn derivatives(&self) -> Result<&RiskDerivatives> {
        self.rd.as_ref().ok_or_else(|| {
            Error::Config("first-order quantities need j_count >= 8 for the derivative stencils".into())
        })
    }

    pub fn q1(&self) -> Result<Surface> {
        let inputs = CorrectionInputs {
            q0: &self.q0,
            rd: self.derivatives()?,
            coeffs: self.coeffs,
            y_current: self.y,
            horizon: self.grid.horizon,
        };
        compute_q1(&inputs)
    }

    /// Zeroth- and first-order strategy surfaces for the configured wealth
    /// level. A zeroth-only request leaves the adjustment surface at zero.
    pub fn strategy_surfaces(&self, cfg: &RunConfig) -> Result<(Surface, Surface)> {
        let req = StrategyRequest {
            m: cfg.strategy.m,
            y: self.y,
            order: cfg.strategy.order,
        };
        let rd = self.derivatives()?;
        let zeroth = pi0(&req, rd, &cfg.model)?;
        let first = match cfg.strategy.order {
            StrategyOrder::ZerothOnly => {
                Surface::zeros(self.grid.clone(), SurfaceKind::Strategy)
            }
            StrategyOrder::FirstOrder => pi1(&req, rd, &self.q0, &self.coeffs, &cfg.model)?,
        };
        Ok((zeroth, first))
    }
}

pub fn solve_scenario(cfg: &RunConfig, y_mult: f64) -> Result<ScenarioSolution> {
    if !(y_mult > 0.0) {
        return Err(Error::Config(format!("scenario multiplier must be > 0, got {y_mult}")));
    }
    let y = y_mult * cfg.model.theta;
    let lambda0 = sharpe_ratio(&cfg.model, y)?;
    let coeffs = expansion_coefficients(&cfg.model, 0.0, y)?;
    let grid = build_grid(
        cfg.grid.alpha,
        cfg.grid.horizon,
        cfg.grid.j_count,
        &cfg.model,
        &cfg.utility,
        y,
        cfg.grid.safety,
    )?;
    let q0 = solve_q0(&grid, &cfg.utility, lambda0)?;
    let r = solve_r(&grid, &cfg.utility, lambda0)?;
    let rd = if cfg.grid.j_count >= 8 {
        Some(differentiate(&r)?)
    } else {
        None
    };
    Ok(ScenarioSolution { y, lambda0, coeffs, grid, q0, r, rd })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_reproduces_anchor_values() {
        let mut cfg = RunConfig::default();
        cfg.grid.j_count = 200;
        let sol = solve_scenario(&cfg, 1.0).unwrap();
        assert_eq!(sol.grid.n_count, 6533);
        let j_mid = 100;
        assert!((sol.grid.xi(j_mid) - 0.75).abs() < 1e-15);
        assert!((sol.q0.at(sol.grid.n_count, j_mid) - (-0.836490)).abs() < 1e-6);
        assert!((sol.r.at(sol.grid.n_count, j_mid) - 0.243184).abs() < 1e-6);
    }

    #[test]
    fn coarse_grid_supports_solve_but_not_derivatives() {
        let mut cfg = RunConfig::default();
        cfg.grid.j_count = 4;
        let sol = solve_scenario(&cfg, 1.0).unwrap();
        assert!(sol.derivatives().is_err());
        assert!(sol.q1().is_err());
    }

    #[test]
    fn strategy_surfaces_respect_order() {
        let mut cfg = RunConfig::default();
        cfg.grid.j_count = 16;
        cfg.grid.horizon = 0.02;
        let sol = solve_scenario(&cfg, 1.0).unwrap();
        cfg.strategy.order = StrategyOrder::ZerothOnly;
        let (p0, p1) = sol.strategy_surfaces(&cfg).unwrap();
        assert!(p0.max_abs() > 0.0);
        assert_eq!(p1.max_abs(), 0.0);
        cfg.strategy.order = StrategyOrder::FirstOrder;
        let (_, p1) = sol.strategy_surfaces(&cfg).unwrap();
        assert!(p1.max_abs() > 0.0);
    }
}
