use std::fs;
use std::path::Path;
use std::process::Command as Process;

use hartree_lab::config::default_r_max;
use hartree_lab::{parse_config, run, CachePolicy, Command, LabError, RunConfig, Source};
use tempfile::TempDir;

fn args(out: &Path, extra: &[&str]) -> Vec<String> {
    let mut v = vec!["hartree-lab".to_string()];
    v.extend(extra.iter().map(|s| s.to_string()));
    v.push("--out".into());
    v.push(out.display().to_string());
    v
}

fn cfg(out: &Path, extra: &[&str]) -> RunConfig {
    parse_config(args(out, extra)).unwrap()
}

fn config_error(out: &Path, extra: &[&str]) -> String {
    match parse_config(args(out, extra)) {
        Err(LabError::Config(m)) => m,
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

// a coarser grid than the default keeps the pipeline tests quick
const SMALL: [&str; 4] = ["--n", "3", "--grid-n", "256"];

fn small(out: &Path, command: &str, extra: &[&str]) -> RunConfig {
    let mut a = vec![command];
    a.extend(SMALL);
    a.extend(extra);
    cfg(out, &a)
}

#[test]
fn minimal_flags_fill_defaults() {
    let dir = TempDir::new().unwrap();
    let c = cfg(dir.path(), &["--cmd", "ground_state", "--n", "3"]);
    assert_eq!(c.command, Command::GroundState);
    assert_eq!(c.r_max, 30.0);
    assert_eq!(c.grid_n, 400);
    assert_eq!(c.solver.tol, 1e-10);
    assert_eq!(c.cache, CachePolicy::Use);
    assert_eq!(c.cache_path, dir.path().join("ground_state_n3.cache"));
    assert_eq!(default_r_max(5), 20.0);
    let p = cfg(dir.path(), &["spectrum", "--n", "4"]);
    assert_eq!((p.command, p.dim, p.r_max, p.k_max), (Command::Spectrum, 4, 25.0, 8));
}

#[test]
fn unsupported_dimension_is_rejected() {
    let dir = TempDir::new().unwrap();
    let m = config_error(dir.path(), &["spectrum", "--n", "6"]);
    assert!(m.contains("3, 4, 5"), "{m}");
}

#[test]
fn flags_override_file_values() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("run.toml");
    fs::write(&file, "command = \"identities\"\nn = 4\nr_max = 20.0\ntol = 1e-9\neps = [0.4, 0.2, 0.1]\n").unwrap();
    let f = file.display().to_string();
    let c = cfg(dir.path(), &["--config", &f, "--r-max", "22"]);
    assert_eq!(c.command, Command::Identities);
    assert_eq!(c.dim, 4);
    assert_eq!(c.r_max, 22.0);
    assert_eq!(c.solver.tol, 1e-9);
    assert_eq!(c.eps, vec![0.4, 0.2, 0.1]);
    let c = cfg(dir.path(), &["--config", &f, "--cmd", "spectrum", "--eps", "0.3,0.2,0.1,0.05"]);
    assert_eq!(c.command, Command::Spectrum);
    assert_eq!(c.eps.len(), 4);
}

#[test]
fn malformed_configuration_is_rejected() {
    let dir = TempDir::new().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p.display().to_string()
    };
    let unknown = write("unknown.toml", "command = \"spectrum\"\nn = 3\ngrid_size = 10\n");
    assert!(config_error(dir.path(), &["--config", &unknown]).contains("grid_size"));
    let mistyped = write("mistyped.toml", "command = \"spectrum\"\nn = \"three\"\n");
    assert!(config_error(dir.path(), &["--config", &mistyped]).contains("invalid type"));
    let no_n = write("no_n.toml", "command = \"spectrum\"\n");
    assert!(config_error(dir.path(), &["--config", &no_n]).contains("'n'"));
    assert!(config_error(dir.path(), &["--n", "3"]).contains("'command'"));
    assert!(config_error(dir.path(), &["spectrum", "--cmd", "identities", "--n", "3"]).contains("twice"));
    assert!(config_error(dir.path(), &["spectrum", "--n", "3", "--tol", "0"]).contains("tol"));
    assert!(config_error(dir.path(), &["spectrum", "--n", "3", "--k-max", "1"]).contains("k_max"));
    assert!(config_error(dir.path(), &["semiclassical", "--n", "3", "--eps", "0.1,0.2,0.05"]).contains("decreasing"));
    assert!(config_error(dir.path(), &["semiclassical", "--n", "3", "--point", "0,0"]).contains("point"));
    assert!(config_error(dir.path(), &["semiclassical", "--n", "3", "--potential", "wobbly"]).contains("wobbly"));
    assert!(config_error(dir.path(), &["multipole_verify", "--n", "4"]).contains("n = 3"));
    assert!(config_error(dir.path(), &["spectrum", "--n", "3", "--method", "newton"]).contains("newton"));
    assert!(config_error(dir.path(), &["spectrum", "--n", "3", "--grid-n", "many"]).contains("many"));
}

#[test]
fn contradictory_cache_policy_is_rejected() {
    let dir = TempDir::new().unwrap();
    let m = config_error(dir.path(), &["spectrum", "--n", "3", "--cache", "use", "--cache", "refresh"]);
    assert!(m.contains("contradictory cache policy"), "{m}");
    let m = config_error(dir.path(), &["spectrum", "--n", "3", "--cache", "ignore", "--cache-path", "x.cache"]);
    assert!(m.contains("contradictory cache policy"), "{m}");
    let c = cfg(dir.path(), &["spectrum", "--n", "3", "--cache", "ignore", "--cache", "ignore"]);
    assert_eq!(c.cache, CachePolicy::Ignore);
}

#[test]
fn spectrum_reuses_the_cached_ground_state() {
    let dir = TempDir::new().unwrap();
    let first = run(&small(dir.path(), "ground_state", &[])).unwrap();
    assert_eq!(first.ground_state, Some(Source::Solved));
    assert_eq!(first.exit_code(), 0);
    assert!(dir.path().join("ground_state_n3.cache").exists());
    let gs_csv = fs::read_to_string(dir.path().join("ground_state_n3.csv")).unwrap();
    assert_eq!(gs_csv.lines().count(), 257);

    let c = small(dir.path(), "spectrum", &["--k-max", "3"]);
    let out = run(&c).unwrap();
    assert_eq!(out.ground_state, Some(Source::Cache));
    assert_eq!(out.exit_code(), 0, "{:?}", out.failed());
    let csv_path = dir.path().join("spectrum_n3.csv");
    let csv = fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,lambda0,lambda1,zero_mode_residual,W_k"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.len() == 5));
    assert_eq!(rows[1][4], "");
    assert!(rows[2][4].parse::<f64>().unwrap() > 0.0);
    assert!(rows[2][1].contains('e') && rows[2][1].len() >= 21);

    // determinism: the same config and cache give identical bytes
    let again = run(&c).unwrap();
    assert_eq!(again.ground_state, Some(Source::Cache));
    assert_eq!(fs::read_to_string(&csv_path).unwrap(), csv);
    let names: Vec<_> = out.checks.iter().map(|c| c.name.as_str()).collect();
    for want in ["zero_mode", "radial_gap", "positivity", "wk_positive", "zero_mode_correlation"] {
        assert!(names.contains(&want), "{names:?}");
    }
}

#[test]
fn mismatched_cache_is_refreshed_not_reused() {
    let dir = TempDir::new().unwrap();
    run(&small(dir.path(), "ground_state", &[])).unwrap();
    let cache = dir.path().join("ground_state_n3.cache");
    let before = fs::read_to_string(&cache).unwrap();

    let other = cfg(dir.path(), &["identities", "--n", "3", "--grid-n", "240"]);
    let out = run(&other).unwrap();
    assert_eq!(out.ground_state, Some(Source::Solved));
    let after = fs::read_to_string(&cache).unwrap();
    assert!(after.starts_with("n=3 r_max=30 N=240 "), "{}", after.lines().next().unwrap());
    assert_ne!(before, after);

    let tighter = cfg(dir.path(), &["identities", "--n", "3", "--grid-n", "240", "--tol", "1e-11"]);
    assert_eq!(run(&tighter).unwrap().ground_state, Some(Source::Solved));

    fs::write(&cache, "not a cache\n").unwrap();
    assert_eq!(run(&other).unwrap().ground_state, Some(Source::Solved));
    assert_eq!(run(&other).unwrap().ground_state, Some(Source::Cache));
}

#[test]
fn refresh_and_ignore_policies() {
    let dir = TempDir::new().unwrap();
    run(&small(dir.path(), "ground_state", &[])).unwrap();
    let refresh = small(dir.path(), "ground_state", &["--cache", "refresh"]);
    assert_eq!(run(&refresh).unwrap().ground_state, Some(Source::Solved));

    let other = TempDir::new().unwrap();
    let ignore = small(other.path(), "ground_state", &["--cache", "ignore"]);
    assert_eq!(run(&ignore).unwrap().ground_state, Some(Source::Solved));
    assert!(!other.path().join("ground_state_n3.cache").exists());
}

#[test]
fn identities_table() {
    let dir = TempDir::new().unwrap();
    let out = run(&small(dir.path(), "identities", &[])).unwrap();
    assert_eq!(out.exit_code(), 0, "{:?}", out.failed());
    let csv = fs::read_to_string(dir.path().join("identities_n3.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "identity,defect");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("L(2U+rU')+2U,"));
    for l in &lines[1..] {
        let d: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(d < 1e-4);
    }
}

#[test]
fn multipole_verify_table() {
    let dir = TempDir::new().unwrap();
    let out = run(&cfg(dir.path(), &["multipole_verify", "--n", "3", "--k-max", "8"])).unwrap();
    assert_eq!(out.ground_state, None);
    assert_eq!(out.exit_code(), 0, "{:?}", out.failed());
    let csv = fs::read_to_string(dir.path().join("multipole_n3.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 9);
    assert!(csv.starts_with("point,x1,x2,x3,k_max,expansion,oracle,abs_error\n"));

    let coarse = run(&cfg(dir.path(), &["multipole_verify", "--n", "3", "--k-max", "0"])).unwrap();
    assert_eq!(coarse.exit_code(), 2);
    assert_eq!(coarse.failed()[0].name, "multipole_error");
}

#[test]
fn semiclassical_outputs_and_declared_exponent_check() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("sc.toml");
    fs::write(
        &file,
        "command = \"semiclassical\"\nn = 3\ngrid_n = 256\npotential = \"double_well:1,1.2,0.7\"\n\
         point = [0.8, 0.0, 0.0]\nbox_half = 2.0\nexpect_proxy_exponent = [0.9, 1.1]\n",
    )
    .unwrap();
    let f = file.display().to_string();
    let out = run(&cfg(dir.path(), &["--config", &f])).unwrap();
    assert_eq!(out.exit_code(), 0, "{:?}", out.failed());
    let rows = fs::read_to_string(dir.path().join("semiclassical_n3.csv")).unwrap();
    assert_eq!(rows.lines().next(), Some("eps,mu,energy,leading,energy_error,proxy,gamma"));
    assert_eq!(rows.lines().count(), 5);
    let conc = fs::read_to_string(dir.path().join("concentration_n3.csv")).unwrap();
    assert_eq!(conc.lines().count(), 4);
    assert_eq!(conc.lines().filter(|l| l.contains(",minimum,")).count(), 2);
    assert_eq!(conc.lines().filter(|l| l.contains(",saddle,")).count(), 1);
    let rep = fs::read_to_string(dir.path().join("semiclassical_n3.txt")).unwrap();
    assert!(rep.contains("proxy_exponent:") && rep.contains("C1:"));

    fs::write(
        &file,
        "command = \"semiclassical\"\nn = 3\ngrid_n = 256\npoint = [0.0, 0.0, 0.0]\nexpect_proxy_exponent = [0.9, 1.1]\n",
    )
    .unwrap();
    let out = run(&cfg(dir.path(), &["--config", &f])).unwrap();
    assert_eq!(out.exit_code(), 2);
    assert_eq!(out.failed()[0].name, "proxy_exponent");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hartree-lab");
    let dir = TempDir::new().unwrap();
    let out = dir.path().display().to_string();

    let ok = Process::new(bin).args(["ground_state", "--n", "3", "--grid-n", "256", "--out", &out]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS residual"));
    assert!(dir.path().join("summary_ground_state_n3.txt").exists());

    let bad = Process::new(bin).args(["spectrum", "--n", "6", "--out", &out]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("3, 4, 5"));

    let stuck = Process::new(bin)
        .args(["ground_state", "--n", "3", "--grid-n", "256", "--max-iter", "2", "--cache", "ignore", "--out", &out])
        .output()
        .unwrap();
    assert_eq!(stuck.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&stuck.stderr).contains("did not converge"));

    let failing = Process::new(bin)
        .args(["multipole_verify", "--n", "3", "--k-max", "0", "--out", &out])
        .output()
        .unwrap();
    assert_eq!(failing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&failing.stderr).contains("check failed: multipole_error"));

    let help = Process::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}
