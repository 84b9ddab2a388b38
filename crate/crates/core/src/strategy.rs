use crate::error::{Error, Result};
use crate::market::{ExpansionCoefficients, ModelParams};
use crate::risk::RiskDerivatives;
use crate::stencil::{d1_row, d2_row};
use crate::surface::{margin_nodes, Surface, SurfaceKind, CHECK_MARGIN_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StrategyOrder {
    #[serde(rename = "zeroth")]
    ZerothOnly,
    #[serde(rename = "first")]
    FirstOrder,
}

#[derive(Debug, Clone, Copy)]
pub struct StrategyRequest {
    pub m: f64,
    pub y: f64,
    pub order: StrategyOrder,
}

impl StrategyRequest {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !(self.y > 0.0) {
            return Err(Error::Config(format!(
                "strategy request needs m > 0 and y > 0, got m={}, y={}",
                self.m, self.y
            )));
        }
        Ok(())
    }
}

/// Zeroth-order strategy pi0 = m (mu - r) y R(t, xi).
pub fn pi0(req: &StrategyRequest, rd: &RiskDerivatives, params: &ModelParams) -> Result<Surface> {
    req.validate()?;
    let g = rd.r.grid.clone();
    let coef = req.m * params.excess_drift * req.y;
    let mut out = Surface::zeros(g.clone(), SurfaceKind::Strategy);
    for n in 0..=g.n_count {
        let rrow = rd.r.row(n);
        let orow = out.row_mut(n);
        for j in 0..=g.j_count {
            orow[j] = coef * rrow[j];
        }
    }
    Ok(out)
}

/// First-order strategy adjustment, assembled from the risk tolerance and its
/// spatial derivatives:
///   pi1/m = (1/2)(mu-r)^3 y^2 (T-t)^2 [ kappa (theta-y) R^2 Q0_xixi
///           + rho delta (R^2 R_xixi (3 R_xi - 2) + R^3 R_xixixi) ]
///           + (mu-r)^2 (T-t) rho delta y R (R_xi - 1)
/// with Q0_xixi taken from the centered second difference of the value surface.
pub fn pi1(
    req: &StrategyRequest,
    rd: &RiskDerivatives,
    q0: &Surface,
    _coeffs: &ExpansionCoefficients,
    params: &ModelParams,
) -> Result<Surface> {
    req.validate()?;
    q0.same_grid(&rd.r)?;
    let g = q0.grid.clone();
    let mu = params.excess_drift;
    let y = req.y;
    let drift_term = params.kappa * (params.theta - y);
    let skew = params.rho * params.delta;
    let lead = 0.5 * mu * mu * mu * y * y;
    let cross_lead = mu * mu * skew * y;

    let mut qxx = vec![0.0; g.j_count + 1];
    let mut out = Surface::zeros(g.clone(), SurfaceKind::Strategy);
    for n in 0..=g.n_count {
        let tau = n as f64 * g.dt;
        d2_row(q0.row(n), g.dxi, &mut qxx);
        let r = rd.r.row(n);
        let r1 = rd.r1.row(n);
        let r2 = rd.r2.row(n);
        let r3 = rd.r3.row(n);
        let orow = out.row_mut(n);
        for j in 0..=g.j_count {
            let rr = r[j] * r[j];
            let bracket = drift_term * rr * qxx[j]
                + skew * (rr * r2[j] * (3.0 * r1[j] - 2.0) + rr * r[j] * r3[j]);
            let cross = cross_lead * tau * r[j] * (r1[j] - 1.0);
            orow[j] = req.m * (lead * tau * tau * bracket + cross);
        }
    }
    Ok(out)
}

/// Alternative assembly of pi1 through the value surface: using
/// G = D1 Q0 and H = D1 D1 Q0, the identity suite gives
///   R^2 Q0_xixi                            = -G
///   R^2 R_xixi (3 R_xi - 2) + R^3 R_xixixi = R (D1 + D2) H / G
///   R (R_xi - 1)                           = R H / G
/// so every R-derivative factor is replaced by operator combinations applied
/// to the value surface. Quotients are zeroed where |G| falls below
/// 1e-14 * sup|G| (both assemblies vanish there anyway).
pub fn pi1_from_dk(
    req: &StrategyRequest,
    rd: &RiskDerivatives,
    q0: &Surface,
    _coeffs: &ExpansionCoefficients,
    params: &ModelParams,
) -> Result<Surface> {
    req.validate()?;
    q0.same_grid(&rd.r)?;
    let g = q0.grid.clone();
    let jc = g.j_count;
    let mu = params.excess_drift;
    let y = req.y;
    let drift_term = params.kappa * (params.theta - y);
    let skew = params.rho * params.delta;
    let lead = 0.5 * mu * mu * mu * y * y;
    let cross_lead = mu * mu * skew * y;

    let mut qx = vec![0.0; jc + 1];
    let mut grow = vec![0.0; jc + 1];
    let mut g1 = vec![0.0; jc + 1];
    let mut hrow = vec![0.0; jc + 1];
    let mut h1 = vec![0.0; jc + 1];
    let mut h2 = vec![0.0; jc + 1];

    let mut sup_g = 0.0_f64;
    let mut rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::with_capacity(g.n_count + 1);
    for n in 0..=g.n_count {
        let r = rd.r.row(n);
        d1_row(q0.row(n), g.dxi, &mut qx);
        for j in 0..=jc {
            grow[j] = r[j] * qx[j];
        }
        d1_row(&grow, g.dxi, &mut g1);
        for j in 0..=jc {
            hrow[j] = r[j] * g1[j];
        }
        d1_row(&hrow, g.dxi, &mut h1);
        d2_row(&hrow, g.dxi, &mut h2);
        let d1d2h: Vec<f64> =
            (0..=jc).map(|j| r[j] * h1[j] + r[j] * r[j] * h2[j]).collect();
        for j in 0..=jc {
            sup_g = sup_g.max(grow[j].abs());
        }
        rows.push((grow.clone(), hrow.clone(), d1d2h));
    }
    let floor = 1e-14 * sup_g;

    let mut out = Surface::zeros(g.clone(), SurfaceKind::Strategy);
    for n in 0..=g.n_count {
        let tau = n as f64 * g.dt;
        let r = rd.r.row(n);
        let (grow, hrow, d1d2h) = &rows[n];
        let orow = out.row_mut(n);
        for j in 0..=jc {
            let kterm = drift_term * (-grow[j]);
            let (bracket, cross) = if grow[j].abs() <= floor {
                (0.0, 0.0)
            } else {
                (
                    skew * r[j] * d1d2h[j] / grow[j],
                    cross_lead * tau * r[j] * hrow[j] / grow[j],
                )
            };
            orow[j] = req.m * (lead * tau * tau * (kterm + bracket) + cross);
        }
    }
    Ok(out)
}

/// Sup-normalized disagreement between the two pi1 assemblies over interior
/// nodes (10% of the width inside each boundary, layers past the first).
pub fn pi1_route_gap(primary: &Surface, alternative: &Surface) -> Result<f64> {
    primary.same_grid(alternative)?;
    let g = &primary.grid;
    let k = margin_nodes(g.j_count, CHECK_MARGIN_FRACTION);
    let mut sup_gap = 0.0_f64;
    let mut sup_ref = 0.0_f64;
    for n in 1..=g.n_count {
        let a = primary.row(n);
        let b = alternative.row(n);
        for j in k..=g.j_count - k {
            sup_gap = sup_gap.max((a[j] - b[j]).abs());
            sup_ref = sup_ref.max(a[j].abs());
        }
    }
    Ok(if sup_ref == 0.0 { sup_gap } else { sup_gap / sup_ref })
}

/// Spatial median over interior nodes of the layer at t = 0.
pub fn interior_median_at_t0(surface: &Surface) -> f64 {
    let g = &surface.grid;
    let row = surface.row(g.n_count);
    let mut interior: Vec<f64> = row[1..g.j_count].to_vec();
    interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = interior.len();
    if m % 2 == 1 {
        interior[m / 2]
    } else {
        0.5 * (interior[m / 2 - 1] + interior[m / 2])
    }
}

/// Bilinear interpolation in (t, xi); exactly nodal at grid nodes. xi is
/// clamped to [alpha, 1]; t outside [0, T] is an error.
pub fn strategy_lookup(surface: &Surface, t: f64, xi: f64) -> Result<f64> {
    let g = &surface.grid;
    if !(0.0..=g.horizon + 1e-12 * g.horizon.max(1.0)).contains(&t) {
        return Err(Error::Domain(format!(
            "lookup time {t} outside [0, {}]",
            g.horizon
        )));
    }
    let xi = xi.clamp(g.alpha, 1.0);

    let u = ((g.horizon - t) / g.dt).clamp(0.0, g.n_count as f64);
    let n0 = (u.floor() as usize).min(g.n_count - 1);
    let wt = u - n0 as f64;

    let s = ((xi - g.alpha) / g.dxi).clamp(0.0, g.j_count as f64);
    let j0 = (s.floor() as usize).min(g.j_count - 1);
    let ws = s - j0 as f64;

    let f00 = surface.at(n0, j0);
    let f01 = surface.at(n0, j0 + 1);
    let f10 = surface.at(n0 + 1, j0);
    let f11 = surface.at(n0 + 1, j0 + 1);
    Ok((1.0 - wt) * ((1.0 - ws) * f00 + ws * f01) + wt * ((1.0 - ws) * f10 + ws * f11))
}

/// Worst increase over the last five nodes of each layer, skipping the first
/// few layers after the terminal one: the explicit scheme propagates the
/// boundary override one node per step, so the top profile can only be
/// monotone once at least five layers have passed.
pub fn liquidation_monotonicity(pi0: &Surface) -> f64 {
    let g = &pi0.grid;
    let mut worst = f64::NEG_INFINITY;
    let start = 5.min(g.n_count);
    for n in start..=g.n_count {
        let row = pi0.row(n);
        for j in g.j_count - 4..=g.j_count {
            worst = worst.max(row[j] - row[j - 1]);
        }
    }
    worst
}

/// Scale for strategy tolerances: the largest zeroth-order allocation.
pub fn strategy_scale(pi0: &Surface) -> f64 {
    pi0.max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{expansion_coefficients, sharpe_ratio, ModelParams, UtilitySpec};
    use crate::mesh::build_grid;
    use crate::risk::{differentiate, solve_r};
    use crate::value::solve_q0;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn setup(
        j: usize,
        horizon: f64,
    ) -> (ModelParams, UtilitySpec, Arc<crate::mesh::Grid>, Surface, RiskDerivatives) {
        let p = ModelParams::default_calibration();
        let u = UtilitySpec::Power { gamma: 3.0 };
        let g = build_grid(0.5, horizon, j, &p, &u, p.theta, 0.5).unwrap();
        let lambda0 = sharpe_ratio(&p, p.theta).unwrap();
        let q0 = solve_q0(&g, &u, lambda0).unwrap();
        let rd = differentiate(&solve_r(&g, &u, lambda0).unwrap()).unwrap();
        (p, u, g, q0, rd)
    }

    #[test]
    fn pi0_terminal_and_boundaries() {
        let (p, _, g, _, rd) = setup(16, 0.02);
        let req = StrategyRequest { m: 1.0, y: p.theta, order: StrategyOrder::ZerothOnly };
        let s = pi0(&req, &rd, &p).unwrap();
        let j_mid = 8;
        assert_eq!(g.xi(j_mid), 0.75);
        assert_relative_eq!(
            s.at(0, j_mid),
            0.0811 * 27.9345 * 0.25,
            max_relative = 1e-14
        );
        assert!((s.at(0, j_mid) - 0.56637).abs() < 1e-5);
        for n in 1..=g.n_count {
            assert_eq!(s.at(n, 0), 0.0);
            assert_eq!(s.at(n, 16), 0.0);
        }
        for n in 0..=g.n_count {
            for j in 0..=16 {
                assert!(s.at(n, j) >= 0.0);
            }
        }
    }

    #[test]
    fn linear_in_m() {
        let (p, _, g, q0, rd) = setup(16, 0.02);
        let coeffs = expansion_coefficients(&p, 0.0, p.theta).unwrap();
        let r1 = StrategyRequest { m: 1.0, y: p.theta, order: StrategyOrder::FirstOrder };
        let r2 = StrategyRequest { m: 2.0, y: p.theta, order: StrategyOrder::FirstOrder };
        let p0a = pi0(&r1, &rd, &p).unwrap();
        let p0b = pi0(&r2, &rd, &p).unwrap();
        let p1a = pi1(&r1, &rd, &q0, &coeffs, &p).unwrap();
        let p1b = pi1(&r2, &rd, &q0, &coeffs, &p).unwrap();
        for n in 0..=g.n_count {
            for j in 0..=16 {
                assert_eq!(2.0 * p0a.at(n, j), p0b.at(n, j));
                assert_eq!(2.0 * p1a.at(n, j), p1b.at(n, j));
            }
        }
    }

    #[test]
    fn pi1_zero_cases() {
        let (p, _, g, q0, rd) = setup(16, 0.02);
        let mut pd = p;
        pd.delta = 0.0;
        let coeffs = expansion_coefficients(&pd, 0.0, pd.theta).unwrap();
        let req = StrategyRequest { m: 1.0, y: pd.theta, order: StrategyOrder::FirstOrder };
        let s = pi1(&req, &rd, &q0, &coeffs, &pd).unwrap();
        assert_eq!(s.max_abs(), 0.0);

        let coeffs = expansion_coefficients(&p, 0.0, p.theta).unwrap();
        let s = pi1(&req, &rd, &q0, &coeffs, &p).unwrap();
        for j in 0..=16 {
            assert_eq!(s.at(0, j), 0.0);
        }
        for n in 0..=g.n_count {
            assert_eq!(s.at(n, 0), 0.0);
        }
    }

    #[test]
    fn lookup_nodal_and_linear() {
        let (p, _, g, _, rd) = setup(16, 0.02);
        let req = StrategyRequest { m: 1.0, y: p.theta, order: StrategyOrder::ZerothOnly };
        let s = pi0(&req, &rd, &p).unwrap();
        for n in (0..=g.n_count).step_by(3) {
            for j in (0..=16).step_by(4) {
                let t = g.t(n);
                let v = strategy_lookup(&s, t, g.xi(j)).unwrap();
                assert_relative_eq!(v, s.at(n, j), max_relative = 1e-12, epsilon = 1e-15);
            }
        }

        let flat = Surface::from_fn(g.clone(), SurfaceKind::Strategy, |_, _| 0.7);
        let mid_t = g.horizon - (g.n_count as f64 - 0.5) * g.dt;
        let mid_xi = 0.5 * (g.xi(4) + g.xi(5));
        assert_relative_eq!(
            strategy_lookup(&flat, mid_t, mid_xi).unwrap(),
            0.7,
            max_relative = 1e-13
        );

        let step = Surface::from_fn(g.clone(), SurfaceKind::Strategy, |_, j| {
            if j <= 4 { 0.0 } else { 1.0 }
        });
        let v = strategy_lookup(&step, mid_t, mid_xi).unwrap();
        assert_relative_eq!(v, 0.5, max_relative = 1e-12);

        assert!(strategy_lookup(&flat, -0.5, 0.75).is_err());
        assert!(strategy_lookup(&flat, g.horizon * 2.0, 0.75).is_err());
        let clamped = strategy_lookup(&flat, mid_t, 2.0).unwrap();
        assert_relative_eq!(clamped, 0.7, max_relative = 1e-13);
    }

    #[test]
    fn liquidation_profile_monotone_after_transient() {
        let (p, _, _, _, rd) = setup(64, 0.25);
        let req = StrategyRequest { m: 1.0, y: p.theta, order: StrategyOrder::ZerothOnly };
        let s = pi0(&req, &rd, &p).unwrap();
        let worst = liquidation_monotonicity(&s);
        assert!(worst <= 1e-9 * strategy_scale(&s), "worst top increase {worst}");
    }

    #[test]
    fn route_gap_small_on_default_style_run() {
        let (p, _, g, q0, rd) = setup(100, 1.0);
        let y = 1.05 * p.theta;
        let coeffs = expansion_coefficients(&p, 0.0, y).unwrap();
        let req = StrategyRequest { m: 1.0, y, order: StrategyOrder::FirstOrder };
        let a = pi1(&req, &rd, &q0, &coeffs, &p).unwrap();
        let b = pi1_from_dk(&req, &rd, &q0, &coeffs, &p).unwrap();
        let gap = pi1_route_gap(&a, &b).unwrap();
        assert!(gap <= 0.05, "pi1 route gap {gap}");
        let _ = g;
    }
}
