/// Second-order finite-difference stencils applied along one spatial row.
/// Interior nodes use centered differences; boundary nodes use one-sided
/// stencils of the same order, so every formula is exact on cubics (the
/// five-node third-derivative stencils are exact on quartics).

pub fn d1_row(f: &[f64], h: f64, out: &mut [f64]) {
    let m = f.len();
    assert!(m >= 4 && out.len() == m);
    let inv2h = 1.0 / (2.0 * h);
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv2h;
    for j in 1..m - 1 {
        out[j] = (f[j + 1] - f[j - 1]) * inv2h;
    }
    out[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) * inv2h;
}

pub fn d2_row(f: &[f64], h: f64, out: &mut [f64]) {
    let m = f.len();
    assert!(m >= 4 && out.len() == m);
    let invh2 = 1.0 / (h * h);
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * invh2;
    for j in 1..m - 1 {
        out[j] = (f[j + 1] - 2.0 * f[j] + f[j - 1]) * invh2;
    }
    out[m - 1] = (2.0 * f[m - 1] - 5.0 * f[m - 2] + 4.0 * f[m - 3] - f[m - 4]) * invh2;
}

pub fn d3_row(f: &[f64], h: f64, out: &mut [f64]) {
    let m = f.len();
    assert!(m >= 6 && out.len() == m);
    let inv2h3 = 1.0 / (2.0 * h * h * h);
    for j in 0..2 {
        out[j] = (-5.0 * f[j] + 18.0 * f[j + 1] - 24.0 * f[j + 2] + 14.0 * f[j + 3]
            - 3.0 * f[j + 4])
            * inv2h3;
    }
    for j in 2..m - 2 {
        out[j] = (-f[j - 2] + 2.0 * f[j - 1] - 2.0 * f[j + 1] + f[j + 2]) * inv2h3;
    }
    for j in m - 2..m {
        out[j] = (5.0 * f[j] - 18.0 * f[j - 1] + 24.0 * f[j - 2] - 14.0 * f[j - 3]
            + 3.0 * f[j - 4])
            * inv2h3;
    }
}
