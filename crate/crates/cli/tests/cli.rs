use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use relay_aser_cli::reserialize;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relay-aser"))
}

fn run(config: &str, extra: &[&str]) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.conf");
    std::fs::write(&path, config).unwrap();
    bin().arg("--config").arg(&path).arg("--quiet").args(extra).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn closed_only_sweep_at_4x4x4_is_fast() {
    let t = Instant::now();
    let o = run("scheme = hqam\norder = 4\nns = 4\nnr = 4\nnd = 4\nsnr_start_db = 0\nsnr_stop_db = 30\nsnr_step_db = 1\n", &[]);
    let elapsed = t.elapsed();
    let csv = stdout(&o);
    let v = column(&csv, "aser_closed");
    assert_eq!(v.len(), 31);
    assert!(v.iter().all(|x| *x > 0.0 && *x < 1.0), "{v:?}");
    assert!(v.windows(2).all(|w| w[1] < w[0]));
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
}

#[test]
fn grid_rows_and_header() {
    let csv = stdout(&run("scheme = sqam\norder = 16\nsnr_start_db = 0\nsnr_stop_db = 30\nsnr_step_db = 2\n", &[]));
    assert_eq!(csv.lines().count(), 17);
    assert_eq!(csv.lines().next().unwrap(), "snr_db,aser_closed");
    assert_eq!(column(&csv, "snr_db")[15], 30.0);
}

#[test]
fn identical_runs_give_identical_bytes() {
    let cfg = "scheme = hqam\norder = 8\nevaluators = closed, mc-semi\ntrials = 50000\nseed = 17\nsnr_stop_db = 10\nsnr_step_db = 5\n";
    let a = stdout(&run(cfg, &[]));
    let b = stdout(&run(cfg, &[]));
    assert_eq!(a, b);
    assert_eq!(reserialize(&a).unwrap(), a);
    let c = stdout(&run(cfg, &["--seed", "18"]));
    assert_ne!(a, c);
}

#[test]
fn analytic_curve_lies_above_simulation() {
    let cfg = "scheme = hqam\norder = 8\nevaluators = closed, quadrature, mc-semi\ntrials = 200000\nsnr_stop_db = 12\nsnr_step_db = 2\n";
    let csv = stdout(&run(cfg, &[]));
    let closed = column(&csv, "aser_closed");
    let quad = column(&csv, "aser_quadrature");
    let mc = column(&csv, "aser_mc");
    let se = column(&csv, "mc_std_err");
    assert_eq!(column(&csv, "trials"), vec![200000.0; 7]);
    for i in 0..closed.len() {
        assert!(closed[i] >= mc[i] - 3.0 * se[i], "row {i}: {} < {}", closed[i], mc[i]);
        assert!(((closed[i] - quad[i]) / quad[i]).abs() < 1e-5);
    }
}

#[test]
fn flags_override_the_file() {
    let csv = stdout(&run("scheme = hqam\norder = 8\nsnr_stop_db = 4\n", &["--snr-stop-db", "2", "--evaluators", "quadrature"]));
    assert_eq!(csv.lines().next().unwrap(), "snr_db,aser_quadrature");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn output_file_matches_stdout() {
    let cfg = "scheme = xqam\norder = 32\nsnr_stop_db = 3\n";
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let o = run(cfg, &["--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), stdout(&run(cfg, &[])));
}

#[test]
fn exit_codes() {
    let o = run("scheme = hqam\norder = 7\n", &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("4, 8, 16, 32, 64"), "{err}");

    assert_eq!(run("scheme = hqam\norder = 8\nfoo = 1\n", &[]).status.code(), Some(1));
    assert_eq!(run("scheme = hqam\norder = 8\n", &["--ns", "0"]).status.code(), Some(1));

    let missing = bin().args(["--config", "/nonexistent/dir/x.conf"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));

    let unwritable = Path::new("/nonexistent/dir/out.csv");
    let o = run("scheme = hqam\norder = 8\nsnr_stop_db = 1\n", &["--output", unwritable.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn flags_alone_suffice() {
    let o = bin().args(["--quiet", "--scheme", "rqam", "--mi", "4", "--mq", "2", "--snr-stop-db", "0"]).output().unwrap();
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 2);
}
