use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SCALAR: &str = r#"
seed = 1

[mesh]
nodes = 2

[energy]
alpha = 1.0

[time]
horizon = 1.0
steps = 200

[[load.terms]]
amplitude = "2*sin(pi*t)"

[dissipation]
kind = "fatigue"
threshold = "1"
threshold_prime = "0"
lipschitz = 0

[viscosity]
epsilon = 1e-3
eps0 = 0.1
levels = 8

[verify]
n_loads = 3
n_pairs = 4
bound_eps = [0.1, 0.01]
lipschitz_eps = [0.1, 0.01]

[control]
basis = [{ amplitude = "sin(pi*t/2)", density = "1" }]
target_theta = [2.2]
theta0 = [0.5]
reg_weight = 1e-8
budget = 100
"#;

fn ris(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ris"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

#[test]
fn solve_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = ris(dir.path(), SCALAR, &["solve"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = read(dir.path(), "trajectory.csv");
    let mut lines = traj.lines();
    let hash = lines.next().unwrap();
    assert!(hash.starts_with("# config_sha256=") && hash.len() == "# config_sha256=".len() + 64);
    assert_eq!(lines.next().unwrap(), "t,q0,q1");
    assert_eq!(lines.count(), 201);
    let report = read(dir.path(), "report.csv");
    assert!(report.lines().nth(1).unwrap().starts_with("step,t,energy"));
    // last state of the running-max oracle
    let last: Vec<f64> = traj
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((last[1] - 1.0).abs() < 2e-2, "{last:?}");
}

#[test]
fn invalid_alpha_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ris(dir.path(), &SCALAR.replace("alpha = 1.0", "alpha = -1.0"), &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("energy.alpha"), "{}", stderr(&o));
}

#[test]
fn unknown_fields_and_bad_expressions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = ris(dir.path(), &SCALAR.replace("[mesh]", "[mesh]\nnodse = 3"), &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nodse"));
    let o = ris(
        dir.path(),
        &SCALAR.replace("threshold = \"1\"", "threshold = \"1 + t\""),
        &["solve"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dissipation.threshold"), "{}", stderr(&o));
}

#[test]
fn incompatible_initial_load_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SCALAR.replace("2*sin(pi*t)", "3 + sin(pi*t)");
    let o = ris(dir.path(), &cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("WARNING")));
    let o = ris(dir.path(), &cfg, &["verify", "compat"]);
    assert!(stdout(&o).starts_with("FAIL compat"));
}

#[test]
fn sweep_summary_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let o = ris(dir.path(), SCALAR, &["sweep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("PASS limit certificate"), "{}", stdout(&o));
    let summary = read(dir.path(), "sweep_summary.csv");
    assert_eq!(summary.lines().count(), 2 + 8);
    let ratios: Vec<f64> = summary
        .lines()
        .skip(4)
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert!(ratios.iter().all(|&r| r < 1.0), "{ratios:?}");
    assert!(dir.path().join("out/trajectory_level07.csv").exists());
    assert!(dir.path().join("out/certificate.csv").exists());
}

#[test]
fn verify_lipschitz_passes_on_scalar_problem() {
    let dir = tempfile::tempdir().unwrap();
    let o = ris(dir.path(), SCALAR, &["verify", "lipschitz"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("PASS lipschitz"), "{}", stdout(&o));
    assert_eq!(read(dir.path(), "lipschitz.csv").lines().count(), 2 + 4 * 2);
}

#[test]
fn verify_dual_needs_a_small_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let o = ris(dir.path(), SCALAR, &["verify", "dual"]);
    assert!(stdout(&o).starts_with("PASS dual"), "{}{}", stdout(&o), stderr(&o));
    let o = ris(
        dir.path(),
        &SCALAR.replace("nodes = 2", "nodes = 9"),
        &["verify", "dual"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_recovers_amplitude_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let o = ris(dir.path(), SCALAR, &["optimize"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("converged"), "{}", stdout(&o));
    let trace = read(dir.path(), "trace.csv");
    let rows: Vec<Vec<String>> = trace
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert!(rows.len() <= 100);
    let accepted: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r[3] == "1")
        .map(|r| (r[1].parse().unwrap(), r[6].parse().unwrap()))
        .collect();
    assert!(accepted.windows(2).all(|w| w[1].0 <= w[0].0));
    assert!((accepted.last().unwrap().1 - 2.2).abs() < 5e-2, "{accepted:?}");
}

#[test]
fn overrides_change_the_hash_but_output_dir_does_not() {
    let dir = tempfile::tempdir().unwrap();
    let hash = |args: &[&str], out: &str| {
        let path = dir.path().join("config.toml");
        fs::write(&path, SCALAR).unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_ris"))
            .args(args)
            .arg("--config")
            .arg(&path)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(o.status.success());
        fs::read_to_string(dir.path().join(out).join("trajectory.csv"))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    let a = hash(&["solve"], "a");
    assert_eq!(a, hash(&["solve"], "b"));
    assert_ne!(a, hash(&["solve", "--eps", "0.01"], "c"));
    assert_ne!(a, hash(&["solve", "--seed", "9"], "d"));
}

#[test]
fn missing_config_file_exits_with_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_ris"))
        .args(["solve", "--config", "/nonexistent/ris.toml"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
