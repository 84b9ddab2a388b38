use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::error::Result;
use crate::surface::Surface;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn open(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_header(w: &mut impl Write, cfg: &RunConfig, columns: &str) -> Result<()> {
    writeln!(w, "# drawdown-lsv {TOOL_VERSION}")?;
    for line in cfg.echo_toml()?.lines() {
        if line.is_empty() {
            writeln!(w, "#")?;
        } else {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "# columns: {columns}")?;
    Ok(())
}

/// One row per (t, xi) node, t ascending, 17 significant digits throughout.
pub fn write_value_surface(path: &Path, cfg: &RunConfig, surface: &Surface) -> Result<()> {
    let mut w = open(path)?;
    write_header(&mut w, cfg, "t,xi,value")?;
    let g = &surface.grid;
    for n in (0..=g.n_count).rev() {
        let t = g.t(n);
        for j in 0..=g.j_count {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", t, g.xi(j), surface.at(n, j))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_correction(
    path: &Path,
    cfg: &RunConfig,
    q1: &Surface,
    ratio: &Surface,
) -> Result<()> {
    q1.same_grid(ratio)?;
    let mut w = open(path)?;
    write_header(&mut w, cfg, "t,xi,q1,q1_over_q0")?;
    let g = &q1.grid;
    for n in (0..=g.n_count).rev() {
        let t = g.t(n);
        for j in 0..=g.j_count {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                t,
                g.xi(j),
                q1.at(n, j),
                ratio.at(n, j)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_strategy(
    path: &Path,
    cfg: &RunConfig,
    pi0: &Surface,
    pi1: &Surface,
) -> Result<()> {
    pi0.same_grid(pi1)?;
    let mut w = open(path)?;
    write_header(&mut w, cfg, "t,xi,pi0,pi1,pi_total")?;
    let g = &pi0.grid;
    for n in (0..=g.n_count).rev() {
        let t = g.t(n);
        for j in 0..=g.j_count {
            let a = pi0.at(n, j);
            let b = pi1.at(n, j);
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t,
                g.xi(j),
                a,
                b,
                a + b
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = open(path)?;
    let text = serde_json::to_string_pretty(value)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    let mut w = open(path)?;
    w.write_all(content.as_bytes())?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::solve_scenario;

    fn small_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.grid.j_count = 8;
        cfg.grid.horizon = 0.01;
        cfg
    }

    #[test]
    fn value_file_shape_and_determinism() {
        let cfg = small_cfg();
        let sol = solve_scenario(&cfg, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("q0_a.csv");
        let p2 = dir.path().join("q0_b.csv");
        write_value_surface(&p1, &cfg, &sol.q0).unwrap();
        write_value_surface(&p2, &cfg, &sol.q0).unwrap();
        let a = std::fs::read(&p1).unwrap();
        let b = std::fs::read(&p2).unwrap();
        assert_eq!(a, b);

        let text = String::from_utf8(a).unwrap();
        let (comments, data): (Vec<&str>, Vec<&str>) =
            text.lines().partition(|l| l.starts_with('#'));
        let g = &sol.grid;
        assert_eq!(data.len(), (g.n_count + 1) * (g.j_count + 1));
        assert!(comments.iter().any(|l| l.contains("columns: t,xi,value")));
        assert!(comments.iter().any(|l| l.contains("drawdown-lsv")));
        assert!(comments.iter().any(|l| l.contains("j_count = 8")));

        let first: Vec<f64> = data[0].split(',').map(|v| v.parse().unwrap()).collect();
        assert!(first[0].abs() < 1e-12, "first row should sit at t = 0");
        assert_eq!(first[1], 0.5);
        let last: Vec<f64> = data.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last[0], cfg.grid.horizon);
        assert_eq!(last[1], 1.0);
    }

    #[test]
    fn seventeen_digit_round_trip() {
        let cfg = small_cfg();
        let sol = solve_scenario(&cfg, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q0.csv");
        write_value_surface(&p, &cfg, &sol.q0).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let g = &sol.grid;
        let mut rows = text.lines().filter(|l| !l.starts_with('#'));
        let first = rows.next().unwrap();
        let v: f64 = first.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(v.to_bits(), sol.q0.at(g.n_count, 0).to_bits());
    }

    #[test]
    fn strategy_file_totals_columns() {
        let cfg = small_cfg();
        let sol = solve_scenario(&cfg, 1.0).unwrap();
        let (p0, p1s) = sol.strategy_surfaces(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("strategy.csv");
        write_strategy(&p, &cfg, &p0, &p1s).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let row = text.lines().find(|l| !l.starts_with('#')).unwrap();
        let vals: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals.len(), 5);
        assert_eq!(vals[4], vals[2] + vals[3]);
    }
}
