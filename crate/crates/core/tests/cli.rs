use std::path::Path;
use std::process::{Command, Output};

fn nlest(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlest"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("launch nlest")
}

fn bare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlest")).args(args).output().expect("launch nlest")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlest(&["run", "--seed", "42", "--steps", "18"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("result.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 18);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(&header[..5], ["step", "truth_x1_ft", "truth_x2_ftps", "truth_x3_slugpft2", "z_ft"]);
    assert!(header.contains(&"ukf_err_meas_ft") && header.contains(&"lkf_sq_err_ft2"));
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), header.len());
        for f in &fields[1..] {
            assert!(f.parse::<f64>().unwrap().is_finite());
        }
    }
    for svg in ["errors.svg", "mse.svg"] {
        let text = read(&dir.path().join(svg));
        assert!(text.contains(r#"viewBox="0 0 800 500""#));
        assert_eq!(text.matches("<polyline").count(), 3);
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["lkf", "ekf", "ukf"] {
        assert!(stdout.lines().any(|l| l.starts_with(name)), "{stdout}");
    }
}

#[test]
fn squared_error_column_matches_error() {
    let dir = tempfile::tempdir().unwrap();
    nlest(&["run", "--seed", "9", "--filters", "ekf"], dir.path());
    let csv = read(&dir.path().join("result.csv"));
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (e, s, est, truth) = (col("ekf_err_truth_ft"), col("ekf_sq_err_ft2"), col("ekf_est_x1_ft"), col("truth_x1_ft"));
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(v[s], v[e] * v[e]);
        assert_eq!(v[e], v[est] - v[truth]);
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("settings.txt");
    std::fs::write(&cfg, "# short run\nseed = 3\nsteps = 6\nfilters = lkf,ukf\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    assert_eq!(nlest(&["run", "--config", cfg, "--steps", "8"], &a).status.code(), Some(0));
    let csv = read(&a.join("result.csv"));
    assert_eq!(csv.lines().count(), 8);
    assert!(csv.lines().next().unwrap().contains("ukf_est_x1_ft"));
    assert!(!csv.contains("ekf_"));

    let b = dir.path().join("b");
    nlest(&["run", "--seed", "3", "--steps", "8", "--filters", "lkf,ukf"], &b);
    assert_eq!(csv, read(&b.join("result.csv")));
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    nlest(&["run", "--seed", "1"], &dir.path().join("a"));
    nlest(&["run", "--seed", "2"], &dir.path().join("b"));
    assert_ne!(read(&dir.path().join("a/result.csv")), read(&dir.path().join("b/result.csv")));
}

#[test]
fn bad_arguments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--steps", "1"],
        vec!["run", "--unknown"],
        vec!["run", "--seed", "-1"],
        vec!["run", "--filters", "lkf,pf"],
        vec!["run", "--q-form", "full"],
        vec!["run", "--alpha", "0"],
        vec!["montecarlo", "--runs", "0"],
        vec!["run", "--config", "/nonexistent/settings.txt"],
    ] {
        let out = nlest(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let cfg = dir.path().join("bad.txt");
    std::fs::write(&cfg, "seed = 1\nwidth = 3\n").unwrap();
    let out = nlest(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
    assert_eq!(bare(&[]).status.code(), Some(2));
    assert!(!dir.path().join("result.csv").exists());
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = nlest(&["run"], &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn montecarlo_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlest(&["montecarlo", "--runs", "40", "--seed", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("mc_summary.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "filter,mean_mse_ft2,stderr_ft2,diverged_count");
    assert_eq!(lines.len(), 4);
    for (line, name) in lines[1..].iter().zip(["lkf", "ekf", "ukf"]) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], name);
        assert!(f[1].parse::<f64>().unwrap() > 0.0);
        assert!(f[2].parse::<f64>().unwrap() > 0.0);
        assert_eq!(f[3], "0");
    }
    assert!(dir.path().join("result.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("jitter"));

    let again = tempfile::tempdir().unwrap();
    nlest(&["montecarlo", "--runs", "40", "--seed", "1"], again.path());
    assert_eq!(csv, read(&again.path().join("mc_summary.csv")));
}

#[test]
fn selftest_passes() {
    let out = bare(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 2, "{stdout}");
}

#[test]
fn divergence_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlest(&["run", "--dt", "40"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));

    let out = nlest(&["montecarlo", "--dt", "40", "--runs", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = read(&dir.path().join("mc_summary.csv"));
    let diverged: usize = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert!(diverged > 0, "{csv}");
}
