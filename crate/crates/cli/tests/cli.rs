use std::path::Path;
use std::process::{Command, Output};

fn gluing(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gluing"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("GLUING_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn delaunay_writes_one_period() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(&["delaunay", "--n", "4", "--eps", "0.3"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let prof = read(dir.path(), "delaunay_profile.csv");
    assert!(prof.starts_with("t,v,w,H\n"));
    let r = rows(&prof);
    let period: f64 = stdout(&o)
        .split("period = ")
        .nth(1)
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(r[0][0], 0.0);
    assert!((r.last().unwrap()[0] - period).abs() < 1e-9 * period);
    let h0 = r[0][3];
    assert!(r.iter().all(|x| (x[3] - h0).abs() < 1e-9 * h0.abs()));
    let u = read(dir.path(), "uprofile.csv");
    assert!(u.starts_with("r,u,ru_r,r2u_rr\n"));
    assert_eq!(rows(&u).len(), 200);
}

#[test]
fn delaunay_rejects_eps_above_cylinder() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(&["delaunay", "--n", "4", "--eps", "0.8"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn delaunay_prop22_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(
        &["delaunay", "--n", "3", "--eps", "0.1", "--verify-prop22"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("leading-term ratios"));
}

#[test]
fn delaunay_sweep_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(
        &["delaunay", "--n", "5", "--eps", "0.1,0.2", "--svg"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    for f in [
        "delaunay_profile_0.csv",
        "delaunay_profile_1.csv",
        "uprofile_1.csv",
        "delaunay_profile_1.svg",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn spectrum_examples() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(&["spectrum", "--family", "s2xs2", "--k1", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stdout(&o).contains("DEGENERATE kernel (1,0)"),
        "{}",
        stdout(&o)
    );
    assert!(read(dir.path(), "spectrum.csv").starts_with("eigenvalue,laplace,i1,i2\n"));
    let o = gluing(&["spectrum", "--family", "s2xs2", "--k1", "3"], dir.path());
    assert!(
        stdout(&o).contains("NONDEGENERATE gap 2.0000000000000000e0"),
        "{}",
        stdout(&o)
    );
    let o = gluing(&["spectrum", "--family", "s2xs2", "--k1", "7"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn match_zero_is_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(
        &["match", "--preset", "zero", "--n", "4", "--eps", "0.1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&read(dir.path(), "match.csv"));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][1..6], [0.0, 0.1 * 0.1 / 4.0, 0.0, 0.0, 0.0]);
}

#[test]
fn match_synthetic_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(&["match", "--preset", "synthetic"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("VIOLATED"));
}

#[test]
fn match_oversized_h0_is_domain_violation() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(
        &["match", "--preset", "synthetic", "--h0-scale", "10"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("domain violation in b_lambda"));
}

#[test]
fn match_magnitude_gate_is_parameter_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(
        &["match", "--preset", "synthetic", "--scale", "100"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn interior_zero_and_oversized() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(&["interior", "--coef", "0"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(read(dir.path(), "interior.csv").starts_with("iteration,increment,residual\n"));
    let o = gluing(&["interior", "--coef", "100"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn interior_degree_two_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(&["interior", "--coef", "0.02", "--svg"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = rows(&read(dir.path(), "interior.csv"));
    assert!(r.len() >= 3);
    assert!(r.last().unwrap()[2] < 1e-6);
    assert!(dir.path().join("interior.svg").exists());
}

#[test]
fn norms_are_radius_stable() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(&["norms", "--mu", "1.1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&read(dir.path(), "norms.csv"));
    assert_eq!(r.len(), 3);
    for x in &r {
        assert!((x[1] / r[0][1] - 1.0).abs() < 0.01);
    }
}

#[test]
fn output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        assert_eq!(
            gluing(&["match", "--preset", "synthetic", "--seed", "7"], d)
                .status
                .code(),
            Some(0)
        );
        assert_eq!(gluing(&["norms", "--seed", "7"], d).status.code(), Some(0));
    }
    for f in ["match.csv", "norms.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f));
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"n": 5, "eps": [0.8]}"#).unwrap();
    // n = 5 from the file; 0.8 exceeds its cylinder value
    let o = gluing(&["delaunay", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = gluing(
        &[
            "delaunay",
            "--config",
            cfg.to_str().unwrap(),
            "--eps",
            "0.2",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("n = 5 "));
    std::fs::write(&cfg, r#"{"n": "four"}"#).unwrap();
    let o = gluing(&["delaunay", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn env_sets_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gluing"))
        .args(["norms"])
        .env("GLUING_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("norms.csv").exists());
}

#[test]
fn budget_is_checked_at_load() {
    let dir = tempfile::tempdir().unwrap();
    let o = gluing(&["norms", "--s", "5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
