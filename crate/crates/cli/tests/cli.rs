use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BS: &str = "[model]\nkind = \"black_scholes\"\nb = 0.4\nsigma = 1.0\n";
const DISCRETE: &str = "[model]\nkind = \"discrete\"\npoints = [-0.5, 0.2, 0.8]\nprobs = [0.1, 0.6, 0.3]\n[params]\nrho = 0.8\nlambda = 1.0\n[solver]\nn_xi = 128\n";

fn run(dir: &Path, text: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, text).unwrap();
    Command::new(env!("CARGO_BIN_EXE_illiquid"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("ILLIQUID_THREADS")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Data rows of a CSV file as numbers, skipping comments and the header.
fn rows(path: &Path) -> (Vec<String>, Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let comments = text.lines().filter(|l| l.starts_with('#')).map(String::from).collect();
    let mut body = text.lines().filter(|l| !l.starts_with('#'));
    let header = body.next().unwrap().split(',').map(String::from).collect();
    let data = body
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (comments, header, data)
}

#[test]
fn validate_exit_codes_follow_the_growth_condition() {
    let dir = tempfile::tempdir().unwrap();
    for (rho, expected) in [(0.2, 2), (0.5, 0), (0.05, 3)] {
        let text = format!("{BS}[params]\nrho = {rho}\nlambda = 2.0\n");
        let o = run(dir.path(), &text, &["validate"]);
        assert_eq!(
            code(&o),
            expected,
            "rho = {rho}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
    }
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = format!("{DISCRETE}[bvp]\nx00 = 1.0\n");
    assert_eq!(code(&run(dir.path(), &unknown, &["validate"])), 1);
    let bad_value = DISCRETE.replace("rho = 0.8", "rho = -1.0");
    assert_eq!(code(&run(dir.path(), &bad_value, &["solve"])), 1);
    let no_cfg = Command::new(env!("CARGO_BIN_EXE_illiquid"))
        .arg("solve")
        .output()
        .unwrap();
    assert_eq!(code(&no_cfg), 1);
    let bad_cmd = Command::new(env!("CARGO_BIN_EXE_illiquid"))
        .arg("frobnicate")
        .output()
        .unwrap();
    assert_eq!(code(&bad_cmd), 1);
}

#[test]
fn solver_failure_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{DISCRETE}max_iter = 2\n");
    let o = run(dir.path(), &text, &["solve"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solve_writes_a_stamped_value_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), DISCRETE, &["solve"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (comments, header, data) = rows(&dir.path().join("out/value.csv"));
    assert!(comments[0].starts_with(&format!("# illiquid {} config_sha256=", env!("CARGO_PKG_VERSION"))));
    assert_eq!(comments[0].split('=').nth(1).unwrap().len(), 64);
    assert_eq!(header, ["xi", "vbar", "dvbar"]);
    assert_eq!(data.len(), 128);
}

#[test]
fn path_without_continuation_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BS}[params]\nrho = 0.2\nlambda = 2.0\n[solver]\nn_xi = 64\ndt = 0.25\ntheta1 = 0.0\n[bvp]\nx0 = 2.0\na = 1.0\n");
    let o = run(dir.path(), &text, &["path"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, header, data) = rows(&dir.path().join("out/path.csv"));
    assert_eq!(header, ["s", "Y", "c", "p", "Y0_baseline", "gap"]);
    let c0 = data[0][2];
    assert!((c0 - 4.4).abs() <= 1e-5 * 4.4, "c0 = {c0}");
    for r in &data {
        assert!((r[1] - r[4]).abs() <= 1e-8);
    }
}

#[test]
fn simulation_is_reproducible_and_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{DISCRETE}[sim]\nn_paths = 300\nseed = 4\n");
    let first = run(dir.path(), &text, &["simulate", "--threads", "1"]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let a = fs::read_to_string(dir.path().join("out/sim.csv")).unwrap();
    let second = run(dir.path(), &text, &["simulate", "--threads", "2"]);
    assert_eq!(code(&second), 0);
    let b = fs::read_to_string(dir.path().join("out/sim.csv")).unwrap();
    assert_eq!(a, b);
    let reseeded = run(dir.path(), &text, &["simulate", "--seed", "5"]);
    assert_eq!(code(&reseeded), 0);
    let c = fs::read_to_string(dir.path().join("out/sim.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn malformed_thread_count_in_the_environment_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("{DISCRETE}[sim]\nn_paths = 100\n")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_illiquid"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .env("ILLIQUID_THREADS", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}
