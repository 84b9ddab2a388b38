use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use drawdown_lsv::checks::full_check;
use drawdown_lsv::config::{Overrides, RunConfig};
use drawdown_lsv::correction::correction_ratio;
use drawdown_lsv::csv_out::{
    write_correction, write_json, write_strategy, write_text, write_value_surface,
};
use drawdown_lsv::error::Result;
use drawdown_lsv::mc::{compare, simulate, McConfig};
use drawdown_lsv::pipeline::{solve_scenario, ScenarioSolution};
use drawdown_lsv::strategy::{strategy_lookup, StrategyOrder};
use drawdown_lsv::surface::{Surface, SurfaceKind};

pub const OUT_DIR_ENV: &str = "DRAWDOWN_LSV_OUT";

#[derive(Parser)]
#[command(
    name = "drawdown-lsv",
    version,
    about = "Drawdown-constrained portfolio approximation under local stochastic volatility"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the value and risk-tolerance surfaces; writes q0.csv and r.csv
    Solve(CommonArgs),
    /// First-order correction per scenario; writes q1_y<mult>.csv
    Correct(CommonArgs),
    /// Strategy surfaces per scenario; writes strategy_y<mult>.csv
    Strategy(CommonArgs),
    /// Monte Carlo cross-check of the solved value; writes mc_summary.json
    Simulate(CommonArgs),
    /// Full scenario loop: value, risk, correction, and strategy files per multiplier
    Sweep(CommonArgs),
    /// Run the invariant suite; writes check_report.txt, nonzero exit on failure
    Check(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; calibrated defaults apply when omitted
    config: Option<PathBuf>,
    /// Drawdown floor fraction in (0, 1)
    #[arg(long)]
    alpha: Option<f64>,
    /// Time horizon in years
    #[arg(long)]
    horizon: Option<f64>,
    /// Spatial node count J
    #[arg(long)]
    j: Option<usize>,
    /// Replace the scenario list with this single theta multiplier
    #[arg(long = "y-mult")]
    y_mult: Option<f64>,
    /// Monte Carlo path count
    #[arg(long)]
    paths: Option<usize>,
    /// Monte Carlo seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides config and environment)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            alpha: self.alpha,
            horizon: self.horizon,
            j_count: self.j,
            y_mult: self.y_mult,
            paths: self.paths,
            seed: self.seed,
        });
        cfg.validate()?;
        Ok(cfg)
    }

    fn output_dir(&self, cfg: &RunConfig) -> Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn scenario_tag(mult: f64) -> String {
    format!("y{mult:.2}")
}

fn total_strategy(pi0: &Surface, pi1: &Surface) -> Surface {
    Surface::from_fn(pi0.grid.clone(), SurfaceKind::Strategy, |n, j| {
        pi0.at(n, j) + pi1.at(n, j)
    })
}

fn announce(sol: &ScenarioSolution) {
    println!(
        "y = {:.4} (lambda0 = {:.6}): grid J = {}, N = {}, dt = {:.6e}{}",
        sol.y,
        sol.lambda0,
        sol.grid.j_count,
        sol.grid.n_count,
        sol.grid.dt,
        if sol.grid.dt_capped { " (capped)" } else { "" }
    );
}

fn cmd_solve(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let sol = solve_scenario(cfg, cfg.scenario[0])?;
    announce(&sol);
    let q0_path = dir.join("q0.csv");
    write_value_surface(&q0_path, cfg, &sol.q0)?;
    let r_path = dir.join("r.csv");
    write_value_surface(&r_path, cfg, &sol.r)?;
    let v = strategy_lookup(&sol.q0, 0.0, cfg.mc.initial_xi)?;
    println!("value at (t=0, xi={}): {:.6}", cfg.mc.initial_xi, v);
    println!("wrote {}", q0_path.display());
    println!("wrote {}", r_path.display());
    Ok(())
}

fn cmd_correct(cfg: &RunConfig, dir: &Path) -> Result<()> {
    for &mult in &cfg.scenario {
        let sol = solve_scenario(cfg, mult)?;
        announce(&sol);
        let q1 = sol.q1()?;
        let ratio = correction_ratio(&q1, &sol.q0)?;
        let path = dir.join(format!("q1_{}.csv", scenario_tag(mult)));
        write_correction(&path, cfg, &q1, &ratio)?;
        let g = &sol.grid;
        let mut worst = 0.0f64;
        for j in 0..=g.j_count {
            worst = worst.max(ratio.at(g.n_count, j).abs());
        }
        println!("max |q1/q0| at t=0: {worst:.6e}");
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_strategy(cfg: &RunConfig, dir: &Path) -> Result<()> {
    for &mult in &cfg.scenario {
        let sol = solve_scenario(cfg, mult)?;
        announce(&sol);
        let (p0, p1) = sol.strategy_surfaces(cfg)?;
        let path = dir.join(format!("strategy_{}.csv", scenario_tag(mult)));
        write_strategy(&path, cfg, &p0, &p1)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let sol = solve_scenario(cfg, cfg.scenario[0])?;
    announce(&sol);
    let (p0, p1) = sol.strategy_surfaces(cfg)?;
    let total = total_strategy(&p0, &p1);
    let mc_cfg = McConfig {
        paths: cfg.mc.paths,
        steps: cfg.mc.steps,
        seed: cfg.mc.seed,
        initial_xi: cfg.mc.initial_xi,
        initial_m: cfg.mc.initial_m,
        initial_y: sol.y,
        freeze_volatility: cfg.mc.freeze_volatility,
        antithetic: cfg.mc.antithetic,
        strategy: &total,
    };
    let result = simulate(&mc_cfg, &cfg.model, &cfg.utility)?;
    let mut reference = strategy_lookup(&sol.q0, 0.0, cfg.mc.initial_xi)?;
    if cfg.strategy.order == StrategyOrder::FirstOrder {
        let q1 = sol.q1()?;
        reference += strategy_lookup(&q1, 0.0, cfg.mc.initial_xi)?;
    }
    let z = compare(&result, reference);
    let summary = serde_json::json!({
        "config": serde_json::to_value(cfg)?,
        "initial_y": sol.y,
        "mean_utility": result.mean_utility,
        "std_error": result.std_error,
        "violation_count": result.violation_count,
        "absorbed_fraction": result.absorbed_fraction,
        "reference_value": reference,
        "z": z,
    });
    let path = dir.join("mc_summary.json");
    write_json(&path, &summary)?;
    println!(
        "mc mean {:.6} +- {:.6}, reference {:.6}, z {:.3}, violations {}",
        result.mean_utility, result.std_error, reference, z, result.violation_count
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, dir: &Path) -> Result<()> {
    for &mult in &cfg.scenario {
        let sol = solve_scenario(cfg, mult)?;
        announce(&sol);
        let tag = scenario_tag(mult);
        let q0_path = dir.join(format!("q0_{tag}.csv"));
        write_value_surface(&q0_path, cfg, &sol.q0)?;
        let r_path = dir.join(format!("r_{tag}.csv"));
        write_value_surface(&r_path, cfg, &sol.r)?;
        let q1 = sol.q1()?;
        let ratio = correction_ratio(&q1, &sol.q0)?;
        write_correction(&dir.join(format!("q1_{tag}.csv")), cfg, &q1, &ratio)?;
        let (p0, p1) = sol.strategy_surfaces(cfg)?;
        write_strategy(&dir.join(format!("strategy_{tag}.csv")), cfg, &p0, &p1)?;
        println!("wrote scenario {tag} files");
    }
    Ok(())
}

fn cmd_check(cfg: &RunConfig, dir: &Path) -> Result<bool> {
    let (report, all_passed) = full_check(cfg)?;
    let path = dir.join("check_report.txt");
    write_text(&path, &report)?;
    print!("{report}");
    println!("wrote {}", path.display());
    Ok(all_passed)
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    let args = match &cli.cmd {
        Cmd::Solve(a) | Cmd::Correct(a) | Cmd::Strategy(a) | Cmd::Simulate(a) | Cmd::Sweep(a)
        | Cmd::Check(a) => a,
    };
    let cfg = args.effective_config()?;
    let dir = args.output_dir(&cfg)?;
    match &cli.cmd {
        Cmd::Solve(_) => cmd_solve(&cfg, &dir)?,
        Cmd::Correct(_) => cmd_correct(&cfg, &dir)?,
        Cmd::Strategy(_) => cmd_strategy(&cfg, &dir)?,
        Cmd::Simulate(_) => cmd_simulate(&cfg, &dir)?,
        Cmd::Sweep(_) => cmd_sweep(&cfg, &dir)?,
        Cmd::Check(_) => {
            if !cmd_check(&cfg, &dir)? {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
