use std::sync::Arc;

use crate::error::{Error, Result};
use crate::market::UtilitySpec;
use crate::mesh::Grid;
use crate::stencil::{d1_row, d2_row, d3_row};
use crate::surface::{margin_nodes, Surface, SurfaceKind, CHECK_MARGIN_FRACTION};
use crate::value::scale_of;

/// Marches the risk-tolerance surface backward from -U'/U''. Interior update:
///   R[n+1][j] = R[n][j] + (1/2) lambda0^2 dt R[n][j]^2
///               (R[n][j+1]-2 R[n][j]+R[n][j-1]) / dxi^2
/// The terminal layer keeps the analytic profile at every node including the
/// corners; the zero boundary values are imposed from the first computed
/// layer onward, exactly in that order.
pub fn solve_r(grid: &Arc<Grid>, utility: &UtilitySpec, lambda0: f64) -> Result<Surface> {
    utility.validate()?;
    if !(lambda0 >= 0.0) || !lambda0.is_finite() {
        return Err(Error::Domain(format!("lambda0 must be finite and >= 0, got {lambda0}")));
    }
    let j_count = grid.j_count;
    let mut r = Surface::zeros(grid.clone(), SurfaceKind::RiskTolerance);
    for j in 0..=j_count {
        r.set(0, j, utility.terminal_risk_tolerance(grid.xi(j)));
    }
    let r_max = r.row(0).iter().fold(0.0_f64, |m, v| m.max(*v));
    let coef = 0.5 * lambda0 * lambda0 * grid.dt / (grid.dxi * grid.dxi);

    for n in 0..grid.n_count {
        let (prev, next) = r.rows_prev_next(n);
        for j in 1..j_count {
            let bracket = prev[j + 1] - 2.0 * prev[j] + prev[j - 1];
            next[j] = prev[j] + coef * prev[j] * prev[j] * bracket;
        }
        next[0] = 0.0;
        next[j_count] = 0.0;
        for (j, &v) in next.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite risk tolerance at time step {} node {}",
                    n + 1,
                    j
                )));
            }
            if v < 0.0 {
                return Err(Error::Numerical(format!(
                    "negative risk tolerance {v} at time step {} node {}",
                    n + 1,
                    j
                )));
            }
            if v > 2.0 * r_max {
                return Err(Error::Numerical(format!(
                    "risk tolerance {v} exceeded twice its terminal maximum at time step {} node {}",
                    n + 1,
                    j
                )));
            }
        }
    }
    Ok(r)
}

/// Max over interior nodes of |R + D_c Q / D_c^2 Q| / (R + eps), comparing the
/// solved risk tolerance against the one implied by centered differences of
/// the value surface. Layers 0 and 1 are skipped (the corner override makes
/// them transitional) and nodes within 10% of the domain width of a spatial
/// boundary are excluded.
pub fn consistency_vs_q0(r: &Surface, q0: &Surface) -> Result<f64> {
    r.same_grid(q0)?;
    let g = &r.grid;
    let eps = 1e-12 * scale_of(q0);
    let k = margin_nodes(g.j_count, CHECK_MARGIN_FRACTION);
    let mut worst = 0.0_f64;
    for n in 2..=g.n_count {
        let qrow = q0.row(n);
        let rrow = r.row(n);
        for j in k..=g.j_count - k {
            let dc = (qrow[j + 1] - qrow[j - 1]) / (2.0 * g.dxi);
            let dc2 = (qrow[j + 1] - 2.0 * qrow[j] + qrow[j - 1]) / (g.dxi * g.dxi);
            if dc2 == 0.0 {
                continue;
            }
            let rfd = -dc / dc2;
            let gap = (rrow[j] - rfd).abs() / (rrow[j] + eps);
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct RiskDerivatives {
    pub r: Surface,
    pub r1: Surface,
    pub r2: Surface,
    pub r3: Surface,
}

/// Nodal spatial derivatives of the risk tolerance, layer by layer.
pub fn differentiate(r: &Surface) -> Result<RiskDerivatives> {
    let g = r.grid.clone();
    if g.j_count < 8 {
        return Err(Error::Config(format!(
            "derivative stencils need at least 8 spatial intervals, got {}",
            g.j_count
        )));
    }
    let mut r1 = Surface::zeros(g.clone(), SurfaceKind::RiskTolerance);
    let mut r2 = Surface::zeros(g.clone(), SurfaceKind::RiskTolerance);
    let mut r3 = Surface::zeros(g.clone(), SurfaceKind::RiskTolerance);
    for n in 0..=g.n_count {
        d1_row(r.row(n), g.dxi, r1.row_mut(n));
        d2_row(r.row(n), g.dxi, r2.row_mut(n));
        d3_row(r.row(n), g.dxi, r3.row_mut(n));
    }
    Ok(RiskDerivatives { r: r.clone(), r1, r2, r3 })
}

/// Largest increase of the per-layer maximum as time-to-maturity grows;
/// nonpositive means the discrete maximum principle held.
pub fn max_principle_drift(r: &Surface) -> f64 {
    let g = &r.grid;
    let mut worst = f64::NEG_INFINITY;
    let mut prev_max = r.row(0).iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    for n in 1..=g.n_count {
        let cur_max = r.row(n).iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        worst = worst.max(cur_max - prev_max);
        prev_max = cur_max;
    }
    worst
}
