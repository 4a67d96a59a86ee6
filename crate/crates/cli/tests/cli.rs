use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fdrs_core::svm::{build_dual_svm_qp, parse_svm};
use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::Value;
use tempfile::TempDir;

fn fdrs(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdrs"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("FDRS_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn last_fpr_sq(dir: &Path) -> f64 {
    let csv = fs::read_to_string(dir.join("trace.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    last.split(',').nth(1).unwrap().parse().unwrap()
}

#[test]
fn aggressive_random_qp_reaches_default_tolerance() {
    let tmp = TempDir::new().unwrap();
    let o = fdrs(
        &["solve", "--qp", "random", "--dim", "20", "--gamma-mode", "aggressive", "--lambda", "1", "--max-iter", "10000"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(last_fpr_sq(tmp.path()) <= 1e-20);
    let r = report(tmp.path());
    assert_eq!(r["command"], "solve");
    assert_eq!(r["config"]["gamma_mode"], "aggressive");
    assert_eq!(r["summary"]["converged"], true);
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for cmd in [
        vec!["solve", "--dim", "15", "--rows", "3", "--emit-plot-data"],
        vec!["certify", "--dim", "10", "--max-iter", "200", "--emit-plot-data"],
        vec!["spectral", "--qp", "synthetic-svm", "--samples", "40"],
    ] {
        let oa = fdrs(&cmd, a.path());
        let ob = fdrs(&cmd, b.path());
        assert_eq!(oa.status.code(), ob.status.code());
        assert_eq!(oa.stdout, ob.stdout);
        for name in ["trace.csv", "report.json", "fpr.tsv", "objective_error.tsv"] {
            let (pa, pb) = (a.path().join(name), b.path().join(name));
            if pa.exists() {
                assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap(), "{cmd:?}: {name}");
            }
        }
    }
}

#[test]
fn plot_data_is_tab_separated_k_value() {
    let tmp = TempDir::new().unwrap();
    assert!(fdrs(&["solve", "--dim", "8", "--emit-plot-data"], tmp.path()).status.success());
    for name in ["fpr.tsv", "objective_error.tsv"] {
        let text = fs::read_to_string(tmp.path().join(name)).unwrap();
        for (i, line) in text.lines().enumerate() {
            let (k, v) = line.split_once('\t').unwrap();
            assert_eq!(k.parse::<usize>().unwrap(), i);
            assert!(v.parse::<f64>().unwrap() >= 0.0);
        }
    }
}

#[test]
fn flags_override_config_file_and_config_is_echoed() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# test config\nmax_iter = 5\nlambda = 0.5\ndim = 6\n").unwrap();
    let out = tmp.path().join("out");
    let o = fdrs(&["--config", cfg.to_str().unwrap(), "solve", "--lambda", "0.8", "--fpr-tol", "-1"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["config"]["lambda"], 0.8);
    assert_eq!(r["config"]["max_iter"], 5);
    assert_eq!(r["config"]["dim"], 6);
    assert_eq!(r["summary"]["iterations"], 5);
    let csv = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0.8")));
}

#[test]
fn output_directory_from_environment_unless_flag_given() {
    let tmp = TempDir::new().unwrap();
    let env_dir = tmp.path().join("from_env");
    let flag_dir = tmp.path().join("from_flag");
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_fdrs"))
            .args(extra)
            .args(["spectral", "--dim", "6"])
            .env("FDRS_OUT_DIR", &env_dir)
            .output()
            .unwrap()
    };
    assert!(run(&[]).status.success());
    assert!(env_dir.join("report.json").exists());
    fs::remove_dir_all(&env_dir).unwrap();
    assert!(run(&["--out-dir", flag_dir.to_str().unwrap()]).status.success());
    assert!(flag_dir.join("report.json").exists());
    assert!(!env_dir.exists());
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(fdrs(&["solve", "--no-such-flag"], tmp.path()).status.code(), Some(1));
    assert_eq!(fdrs(&["solve", "--qp", "svm"], tmp.path()).status.code(), Some(1));
    assert_eq!(fdrs(&["spectral", "--svm-file", "/nonexistent/data.txt"], tmp.path()).status.code(), Some(1));
    assert_eq!(fdrs(&["solve", "--gamma-mode", "reckless"], tmp.path()).status.code(), Some(1));
    // lambda beyond 1/alpha is rejected before any iteration
    assert_eq!(fdrs(&["solve", "--gamma-mode", "aggressive", "--lambda", "1.5"], tmp.path()).status.code(), Some(1));
    assert_eq!(fdrs(&["pd-compare", "--dim", "5", "--iters", "100"], tmp.path()).status.code(), Some(0));
    // a zero tolerance cannot absorb round-off, so the comparison reports failure
    assert_eq!(fdrs(&["pd-compare", "--dim", "5", "--iters", "100", "--tol", "0"], tmp.path()).status.code(), Some(2));
    assert_eq!(report(tmp.path())["certificates"]["pass"], false);
}

#[test]
fn certify_passes_on_default_problem() {
    let tmp = TempDir::new().unwrap();
    let o = fdrs(&["certify", "--max-iter", "300", "--linear-c", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(tmp.path());
    assert_eq!(r["certificates"]["all_pass"], true);
    let entries = r["certificates"]["entries"].as_array().unwrap();
    assert!(entries.iter().any(|e| e["name"] == "fejer"));
    assert!(entries.iter().all(|e| e["pass"] == true));
}

#[test]
fn counterexamples_meet_their_bounds() {
    let tmp = TempDir::new().unwrap();
    let o = fdrs(&["counterexample", "sublinear", "--alpha", "0.75", "--a", "1", "--blocks", "100000", "--k", "300"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(tmp.path());
    assert!(r["summary"]["min_ratio_xh_to_bound"].as_f64().unwrap() >= 1.0);
    assert!(r["summary"]["min_ratio_xf_to_bound"].as_f64().unwrap() >= 1.0);
    assert_eq!(fs::read_to_string(tmp.path().join("trace.csv")).unwrap().lines().count(), 302);

    let o = fdrs(&["counterexample", "slow", "--k-max", "100"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(report(tmp.path())["summary"]["min_ratio_to_bound"].as_f64().unwrap() >= 1.0);
}

const SMALL_SVM: &str = "\
+1 1:0.2 3:1.0
-1 1:0.9 2:0.4
+1 2:0.1 3:0.7
-1 1:1.0 3:0.2
+1 1:0.3 2:0.3 3:0.9
-1 2:1.0
";

fn printed(stdout: &str, key: &str) -> f64 {
    let line = stdout.lines().find(|l| l.starts_with(&format!("{key} ="))).unwrap();
    line.split('=').nth(1).unwrap().trim().parse().unwrap()
}

#[test]
fn spectral_on_small_file_matches_dense_eigensolver() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data.txt");
    fs::write(&data, SMALL_SVM).unwrap();
    let o = fdrs(&["spectral", "--svm-file", data.to_str().unwrap(), "--spectral-tol", "1e-12"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();

    let ds = parse_svm(SMALL_SVM.as_bytes()).unwrap();
    let q = build_dual_svm_qp(&ds, 0.125, 10.0, None).unwrap().q;
    let n = ds.len();
    let y = DMatrix::from_column_slice(n, 1, &ds.labels);
    // projector onto {x : y'x = 0} with ||y||^2 = n
    let p = DMatrix::identity(n, n) - &y * y.transpose() / n as f64;
    let lq = SymmetricEigen::new(q.clone()).eigenvalues.max();
    let lv = SymmetricEigen::new(&p * &q * &p).eigenvalues.max();
    assert!((printed(&stdout, "1/beta") - lq).abs() <= 1e-8 * lq);
    assert!((printed(&stdout, "1/beta_V") - lv).abs() <= 1e-8 * lv);
    assert!((printed(&stdout, "ratio") - lq / lv).abs() <= 1e-7 * lq / lv);
}
