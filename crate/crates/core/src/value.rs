use std::sync::Arc;

use crate::error::{Error, Result};
use crate::market::UtilitySpec;
use crate::mesh::Grid;
use crate::surface::{margin_nodes, Surface, SurfaceKind, CHECK_MARGIN_FRACTION};

/// Reference magnitude for tolerances: the largest terminal utility value.
pub fn scale_of(q0: &Surface) -> f64 {
    q0.row(0).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

const DENOM_FLOOR_REL: f64 = 1e-12;

/// Marches the zeroth-order value surface backward from the terminal utility.
/// Interior update per layer:
///   Q[n+1][j] = Q[n][j] - (1/8) lambda0^2 dt (Q[n][j+1]-Q[n][j-1])^2
///                / (Q[n][j+1]-2 Q[n][j]+Q[n][j-1])
/// then the floor value is pinned at U(alpha) and the top node copies its
/// neighbor. Where the discrete second difference is below 1e-12 * scale the
/// update is zero: with the copy rule both numerator and denominator vanish
/// toward the top, where the continuum product R * Q_xi is itself zero.
pub fn solve_q0(grid: &Arc<Grid>, utility: &UtilitySpec, lambda0: f64) -> Result<Surface> {
    utility.validate()?;
    if !(lambda0 >= 0.0) || !lambda0.is_finite() {
        return Err(Error::Domain(format!("lambda0 must be finite and >= 0, got {lambda0}")));
    }
    let j_count = grid.j_count;
    let mut q = Surface::zeros(grid.clone(), SurfaceKind::ValueQ0);
    for j in 0..=j_count {
        let v = utility.value(grid.xi(j));
        q.set(0, j, v);
    }
    let scale = scale_of(&q);
    let eps_d = DENOM_FLOOR_REL * scale;
    let u_alpha = q.at(0, 0);
    let coef = 0.125 * lambda0 * lambda0 * grid.dt;

    for n in 0..grid.n_count {
        let (prev, next) = q.rows_prev_next(n);
        for j in 1..j_count {
            let num = (prev[j + 1] - prev[j - 1]) * (prev[j + 1] - prev[j - 1]);
            let den = prev[j + 1] - 2.0 * prev[j] + prev[j - 1];
            next[j] = if den.abs() < eps_d { prev[j] } else { prev[j] - coef * num / den };
        }
        next[0] = u_alpha;
        next[j_count] = next[j_count - 1];
        if let Some(j_bad) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite value at time step {} node {}",
                n + 1,
                j_bad
            )));
        }
    }
    Ok(q)
}

/// Max-norm residual of the transformed equation Q_t = (lambda0^2/2) R^2 Q_xixi,
/// measured with a centered time difference against the centered spatial
/// second difference, over layers 1..N-1 and nodes at least 10% of the domain
/// width away from each spatial boundary.
pub fn transformed_residual(q0: &Surface, r: &Surface, lambda0: f64) -> Result<f64> {
    q0.same_grid(r)?;
    let g = &q0.grid;
    let (n_count, j_count) = (g.n_count, g.j_count);
    if n_count < 2 {
        return Ok(0.0);
    }
    let k = margin_nodes(j_count, CHECK_MARGIN_FRACTION);
    let inv2dt = 1.0 / (2.0 * g.dt);
    let invdxi2 = 1.0 / (g.dxi * g.dxi);
    let half_l2 = 0.5 * lambda0 * lambda0;
    let mut worst = 0.0_f64;
    for n in 1..n_count {
        let older = q0.row(n - 1);
        let cur = q0.row(n);
        let newer = q0.row(n + 1);
        let rrow = r.row(n);
        for j in k..=j_count - k {
            let dq_dt = (older[j] - newer[j]) * inv2dt;
            let d2 = (cur[j + 1] - 2.0 * cur[j] + cur[j - 1]) * invdxi2;
            let res = dq_dt - half_l2 * rrow[j] * rrow[j] * d2;
            worst = worst.max(res.abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct ShapeReport {
    pub passed: bool,
    pub tol: f64,
    pub worst_monotone: f64,
    pub worst_monotone_at: (usize, usize),
    pub worst_concavity: f64,
    pub worst_concavity_at: (usize, usize),
}

/// Checks every time slice for non-decreasing values (forward differences)
/// and concavity (second differences), with tolerance 1e-9 * scale.
pub fn check_shape(q0: &Surface) -> ShapeReport {
    let g = &q0.grid;
    let tol = 1e-9 * scale_of(q0);
    let mut worst_m = f64::INFINITY;
    let mut at_m = (0, 0);
    let mut worst_c = f64::NEG_INFINITY;
    let mut at_c = (0, 0);
    for n in 0..=g.n_count {
        let row = q0.row(n);
        for j in 0..g.j_count {
            let fwd = row[j + 1] - row[j];
            if fwd < worst_m {
                worst_m = fwd;
                at_m = (n, j);
            }
        }
        for j in 1..g.j_count {
            let snd = row[j + 1] - 2.0 * row[j] + row[j - 1];
            if snd > worst_c {
                worst_c = snd;
                at_c = (n, j);
            }
        }
    }
    ShapeReport {
        passed: worst_m >= -tol && worst_c <= tol,
        tol,
        worst_monotone: worst_m,
        worst_monotone_at: at_m,
        worst_concavity: worst_c,
        worst_concavity_at: at_c,
    }
}
