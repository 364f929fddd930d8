use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use estalg::{revalidate, Manifest, Report};

const CIRCLE: &str = r#"
seed = 4

[system]
manifold = "circle"
observations = ["cos(theta)"]

[certificate]
n = 3

[simulate]
x0 = [1.0]
t_end = 0.2
dt = 1e-2

[filter]
grid = 64
particles = 1000
prior = "exp(2*cos(theta - 1))"
"#;

const LINE: &str = r#"
[system]
manifold = "euclidean"
dim = 1
observations = ["x"]
"#;

fn estalg(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_estalg"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .env("ESTALG_OUT", dir.join("runs"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_dir(root: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root.join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

#[test]
fn probe_line_closes_at_four() {
    let tmp = tempfile::tempdir().unwrap();
    let o = estalg(tmp.path(), LINE, &["probe"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Closed dim 4"), "{}", stdout(&o));
    let run = run_dir(tmp.path());
    let env = revalidate(&fs::read_to_string(run.join("probe.json")).unwrap()).unwrap();
    match env.report {
        Report::Probe(p) => {
            assert_eq!(p.status, "closed");
            assert_eq!(p.dimension, 4);
        }
        other => panic!("unexpected {other:?}"),
    }
    let m: Manifest = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.schema_version, 1);
    assert_eq!(m.commands["probe"], vec!["probe.json", "probe_log.csv"]);
}

#[test]
fn certificate_circle_depth_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = estalg(tmp.path(), CIRCLE, &["certificate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(run_dir(tmp.path()).join("certificate_matrix.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    let r = 0.5f64.sqrt();
    let want = [[1.0, 0.0, r], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]];
    assert_eq!(rows.len(), 3);
    for (row, w) in rows.iter().zip(want) {
        for (a, b) in row.iter().zip(w) {
            assert!((a - b).abs() < 1e-9, "{csv}");
        }
    }
}

#[test]
fn constant_observation_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[system]\nmanifold = \"circle\"\nobservations = [\"2\"]\n";
    let o = estalg(tmp.path(), cfg, &["certificate"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("constant"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = estalg(tmp.path(), "[system]\nmanifold = \"circle\"\n", &["probe"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("system.observations"), "{}", stderr(&o));
    let asym = "[system]\nmanifold = \"torus2\"\nobservations = [\"cos(x)\"]\ndiffusion = [[\"1\", \"1\"], [\"0\", \"1\"]]\n";
    let o = estalg(tmp.path(), asym, &["probe"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
    let o = estalg(tmp.path(), LINE, &["probe", "--tol", "rank=-1"]);
    assert_eq!(o.status.code(), Some(2));
    // the triangular certificate needs a compact chart
    let o = estalg(tmp.path(), LINE, &["certificate"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn brackets_print_davis_coefficients() {
    let tmp = tempfile::tempdir().unwrap();
    let o = estalg(tmp.path(), CIRCLE, &["brackets"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("L0 = ") && s.contains("B_0 = ") && s.contains("C_00 = "), "{s}");
}

#[test]
fn every_report_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["probe", "certificate", "brackets", "simulate", "filter"] {
        let o = estalg(tmp.path(), CIRCLE, &[cmd]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    let o = estalg(tmp.path(), CIRCLE, &["report"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).matches(" ok (").count(), 5, "{}", stdout(&o));

    // a tampered report is refused
    let run = run_dir(tmp.path());
    let p = run.join("simulate.json");
    let text = fs::read_to_string(&p).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 7");
    fs::write(&p, text).unwrap();
    let o = estalg(tmp.path(), CIRCLE, &["report"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn identical_runs_give_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        for cmd in ["simulate", "filter", "certificate"] {
            let o = estalg(dir, CIRCLE, &[cmd]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        }
    }
    let (ra, rb) = (run_dir(a.path()), run_dir(b.path()));
    assert_eq!(ra.file_name(), rb.file_name());
    for f in ["trajectory.csv", "moments.csv", "density_final.csv", "certificate_matrix.csv"] {
        assert_eq!(fs::read(ra.join(f)).unwrap(), fs::read(rb.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_override_changes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    estalg(tmp.path(), CIRCLE, &["simulate"]);
    estalg(tmp.path(), CIRCLE, &["simulate", "--seed", "5"]);
    assert_eq!(fs::read_dir(tmp.path().join("runs")).unwrap().count(), 2);
}

#[test]
fn kalman_comparison_on_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
seed = 10
[system]
manifold = "euclidean"
drift = ["-x/2"]
observations = ["x"]
[simulate]
x0 = [0.5]
t_end = 0.5
dt = 1e-3
[filter]
grid = 401
methods = ["robust", "kalman"]
[filter.kalman]
a = -0.5
c = 1.0
m0 = 0.5
p0 = 0.25
"#;
    let o = estalg(tmp.path(), cfg, &["filter"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let env = revalidate(&fs::read_to_string(run_dir(tmp.path()).join("filter.json")).unwrap()).unwrap();
    let Report::Filter(f) = env.report else { panic!() };
    assert!(f.distances["robust/kalman-bucy:max_mean"] < 1e-2, "{:?}", f.distances);
}
