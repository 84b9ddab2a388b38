use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_drawdown-lsv"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

const TOY_SOLVE_CONFIG: &str = "\
scenario = [1.0]

[model]
excess_drift = 1.0
kappa = 0.3374
theta = 1.0
delta = 0.0
rho = 0.0

[utility]
variant = \"power\"
gamma = 3.0

[grid]
alpha = 0.5
horizon = 1e-4
j_count = 4

[mc]
paths = 16
steps = 4
";

#[test]
fn solve_matches_hand_evaluated_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("toy.toml");
    std::fs::write(&cfg, TOY_SOLVE_CONFIG).unwrap();
    let out = dir.path().join("out");
    run_ok(&["solve", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);

    let rows = data_rows(&out.join("q0.csv"));
    assert_eq!(rows.len(), 2 * 5, "one step on five nodes");

    let u = |xi: f64| xi.powf(-2.0) / -2.0;
    let dt = 1e-4;
    let unodes: Vec<f64> = (0..=4).map(|j| u(0.5 + 0.125 * j as f64)).collect();
    let mut expected = unodes.clone();
    for j in 1..4 {
        let num = unodes[j + 1] - unodes[j - 1];
        let den = unodes[j + 1] - 2.0 * unodes[j] + unodes[j - 1];
        expected[j] = unodes[j] - 0.125 * dt * num * num / den;
    }
    expected[0] = u(0.5);
    expected[4] = expected[3];

    for (j, row) in rows[..5].iter().enumerate() {
        assert!(row[0].abs() < 1e-18, "first block sits at t = 0");
        assert!(
            (row[2] - expected[j]).abs() <= 1e-14 * expected[j].abs(),
            "node {j}: file {} vs hand value {}",
            row[2],
            expected[j]
        );
    }
    for (j, row) in rows[5..].iter().enumerate() {
        assert_eq!(row[0], 1e-4);
        assert_eq!(row[2], unodes[j], "terminal layer is the utility exactly");
    }
}

const LINEARITY_CONFIG: &str = "\
scenario = [1.0]

[grid]
j_count = 16
horizon = 0.02

[strategy]
m = {M}
order = \"first\"

[mc]
paths = 16
steps = 4
";

#[test]
fn strategy_scales_exactly_with_wealth_level() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for m in ["1.0", "2.0"] {
        let cfg = dir.path().join(format!("m{m}.toml"));
        std::fs::write(&cfg, LINEARITY_CONFIG.replace("{M}", m)).unwrap();
        let out = dir.path().join(format!("out{m}"));
        run_ok(&["strategy", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        outputs.push(data_rows(&out.join("strategy_y1.00.csv")));
    }
    let (one, two) = (&outputs[0], &outputs[1]);
    assert_eq!(one.len(), two.len());
    let mut nonzero = 0usize;
    for (ra, rb) in one.iter().zip(two.iter()) {
        assert_eq!(ra[0], rb[0]);
        assert_eq!(ra[1], rb[1]);
        for col in 2..5 {
            assert_eq!(2.0 * ra[col], rb[col], "column {col} doubles exactly");
            if ra[col] != 0.0 {
                nonzero += 1;
            }
        }
    }
    assert!(nonzero > 0, "strategy surfaces must not be trivially zero");
}

const NO_DIFFUSION_CONFIG: &str = "\
scenario = [1.0]

[model]
excess_drift = 0.0
kappa = 0.3374
theta = 1.0
delta = 0.0
rho = 0.0

[grid]
j_count = 8
horizon = 0.5

[mc]
paths = 16
steps = 4
";

#[test]
fn zero_sharpe_keeps_interior_frozen() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("flat.toml");
    std::fs::write(&cfg, NO_DIFFUSION_CONFIG).unwrap();
    let out = dir.path().join("out");
    run_ok(&["solve", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);

    let rows = data_rows(&out.join("q0.csv"));
    assert_eq!(rows.len(), 17 * 9, "capped grid has sixteen steps");
    let terminal: Vec<f64> = rows[rows.len() - 9..].iter().map(|r| r[2]).collect();
    for block in rows.chunks(9) {
        for j in 0..=7 {
            assert_eq!(block[j][2], terminal[j], "interior column {j} frozen in time");
        }
    }
    let early_top: Vec<f64> = rows
        .chunks(9)
        .take(16)
        .map(|block| block[8][2])
        .collect();
    for v in early_top {
        assert_eq!(v, terminal[7], "top copy rule keeps the neighbor value");
    }
}

const ZERO_STRATEGY_MC_CONFIG: &str = "\
scenario = [1.0]

[model]
excess_drift = 0.0
kappa = 0.3374
theta = 1.0
delta = 0.0
rho = 0.0

[grid]
j_count = 8
horizon = 0.25

[strategy]
order = \"zeroth\"

[mc]
paths = 1024
steps = 8
initial_xi = 0.75
freeze_volatility = true
";

#[test]
fn simulate_with_zero_strategy_matches_utility_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.toml");
    std::fs::write(&cfg, ZERO_STRATEGY_MC_CONFIG).unwrap();
    let out = dir.path().join("out");
    run_ok(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);

    let text = std::fs::read_to_string(out.join("mc_summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let expected = 0.75f64.powf(-2.0) / -2.0;
    assert_eq!(v["mean_utility"].as_f64().unwrap(), expected);
    assert_eq!(v["std_error"].as_f64().unwrap(), 0.0);
    assert_eq!(v["violation_count"].as_u64().unwrap(), 0);
    assert_eq!(v["z"].as_f64().unwrap(), 0.0);
}

#[test]
fn repeated_solve_writes_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("toy.toml");
    std::fs::write(&cfg, TOY_SOLVE_CONFIG).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["solve", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run_ok(&["solve", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    for name in ["q0.csv", "r.csv"] {
        let fa = std::fs::read(a.join(name)).unwrap();
        let fb = std::fs::read(b.join(name)).unwrap();
        assert_eq!(fa, fb, "{name} must be byte-identical across runs");
    }
}

#[test]
fn output_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("toy.toml");
    std::fs::write(&cfg, TOY_SOLVE_CONFIG).unwrap();
    let out = dir.path().join("from_env");
    let res = bin()
        .args(["solve", cfg.to_str().unwrap()])
        .env("DRAWDOWN_LSV_OUT", &out)
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(out.join("q0.csv").exists());
}

#[test]
fn invalid_config_exits_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[grid]\nalpha = 1.5\n").unwrap();
    let res = bin()
        .args(["solve", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");
}

#[test]
fn flag_overrides_replace_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("toy.toml");
    std::fs::write(&cfg, TOY_SOLVE_CONFIG).unwrap();
    let out = dir.path().join("out");
    let stdout = run_ok(&[
        "solve",
        cfg.to_str().unwrap(),
        "--j",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("J = 8"), "stdout: {stdout}");
    let rows = data_rows(&out.join("q0.csv"));
    assert!(rows.iter().all(|r| r.len() == 3));
    assert_eq!(rows.len() % 9, 0, "nine nodes per layer after the override");
}
