//! Drawdown-constrained portfolio choice under local stochastic volatility:
//! explicit finite-difference solvers for the zeroth-order value and
//! risk-tolerance equations, the closed-form first-order volatility
//! correction, strategy assembly, and a Monte Carlo cross-validator.

pub mod checks;
pub mod config;
pub mod correction;
pub mod csv_out;
pub mod error;
pub mod market;
pub mod mc;
pub mod mesh;
pub mod pipeline;
pub mod risk;
pub mod stencil;
pub mod strategy;
pub mod surface;
pub mod value;
