use std::path::PathBuf;
use std::process::{Command, Output};

use confluxlab::DenseMatrix;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confluxlab")).args(args).env("RUST_LOG", "error").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn derive_lu_at_n4() {
    let o = bin(&["derive", "--program", &fixture("lu.daap"), "--memory", "4", "--procs", "1", "--n", "4"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("N = 4: Q >= 14\n"), "{}", stdout(&o));
}

#[test]
fn derive_cholesky_leading_third() {
    let o = bin(&["derive", "--program", &fixture("cholesky.daap"), "--memory", "64"]);
    assert!(stdout(&o).contains("leading term: 0.333333 N^3 / (P M^0.5)"), "{}", stdout(&o));
}

#[test]
fn derive_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bound.csv");
    let o = bin(&["derive", "--program", &fixture("lu.daap"), "--memory", "16", "--procs", "4", "--n", "8,16", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.starts_with("# schema_version=1\nN,P,M,bound\n"));
    assert_eq!(data_rows(&csv).len(), 2);
}

#[test]
fn malformed_program_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.daap");
    std::fs::write(&p, "for k in 0..N {\n  A[k] = \n").unwrap();
    let o = bin(&["derive", "--program", p.to_str().unwrap(), "--memory", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn factorize_reports_residual_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stats.csv");
    let o = bin(&["factorize", "--kind", "lu", "--n", "256", "--grid", "2,2,2", "--block", "16", "--check", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("(ok)"));
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.starts_with("# schema_version=1\nrank,pi,pj,pk,"));
    assert_eq!(data_rows(&csv).len(), 8);
}

#[test]
fn cholesky_rejects_indefinite_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.bin");
    let mut a = DenseMatrix::identity(16);
    a.row_mut(5)[5] = -2.0;
    a.write_to(&mut std::fs::File::create(&p).unwrap()).unwrap();
    let o = bin(&["factorize", "--kind", "chol", "--grid", "2,2,1", "--block", "4", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("positive definite"));
}

#[test]
fn divisibility_and_padding() {
    let o = bin(&["factorize", "--n", "250", "--grid", "2,2,2", "--block", "16"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a multiple of the block size"));
    let o = bin(&["factorize", "--n", "250", "--grid", "2,2,2", "--block", "16", "--pad", "--check"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("N 256 "));
}

#[test]
fn bad_grid_is_a_parse_error() {
    assert_eq!(bin(&["factorize", "--grid", "2,x,2"]).status.code(), Some(2));
}

#[test]
fn sweep_is_long_form_and_matches_factorize() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = bin(&["sweep", "--n-list", "32,64,128", "--grids", "2,2,1", "--block", "8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    let header = csv.lines().nth(1).unwrap();
    assert!(header.contains(",ratio,"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 3 * 4);

    let single = dir.path().join("one.csv");
    bin(&["sweep", "--n-list", "64", "--grids", "2,2,2", "--block", "8", "--out", single.to_str().unwrap()]);
    let fact = dir.path().join("fact.csv");
    bin(&["factorize", "--n", "64", "--grid", "2,2,2", "--block", "8", "--out", fact.to_str().unwrap()]);
    let sweep_csv = std::fs::read_to_string(single).unwrap();
    let fact_csv = std::fs::read_to_string(fact).unwrap();
    let tails: Vec<String> = data_rows(&sweep_csv).iter().map(|r| r.split(',').skip(8).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(tails, data_rows(&fact_csv));
}

#[test]
fn audit_lists_eleven_steps() {
    let o = bin(&["audit", "--n", "64", "--grid", "2,2,2", "--block", "8", "--step", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("step")).count(), 11);
    assert!(text.contains("step  7: max        0 data +     0 index"));
}

#[test]
fn pebble_chain_and_lu() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("chain.cdag");
    std::fs::write(&p, "v 1 in\nv 2 mid\nv 3 out\ne 1 2\ne 2 3\n").unwrap();
    let o = bin(&["pebble", "--cdag", p.to_str().unwrap(), "--memory", "2", "--brute-force"]);
    assert!(stdout(&o).contains("Q_opt = 2 "));

    let o = bin(&["pebble", "--program", &fixture("lu.daap"), "--n", "3", "--memory", "4", "--brute-force"]);
    let text = stdout(&o);
    assert!(text.contains("derived sequential bound: Q >= "));
    assert!(text.contains("Q_opt >= bound: true"), "{text}");
}

#[test]
fn pebble_replays_its_witness() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.cdag");
    std::fs::write(&g, "v 1 in\nv 2 in\nv 3 mid\nv 4 out\ne 1 3\ne 2 3\ne 3 4\ne 1 4\n").unwrap();
    let w = dir.path().join("w.txt");
    let o = bin(&["pebble", "--cdag", g.to_str().unwrap(), "--memory", "3", "--brute-force", "--witness", w.to_str().unwrap()]);
    let q = stdout(&o).lines().find_map(|l| l.strip_prefix("optimal: Q_opt = ")).unwrap().split(' ').next().unwrap().to_string();
    let o = bin(&["pebble", "--cdag", g.to_str().unwrap(), "--memory", "3", "--schedule", w.to_str().unwrap()]);
    assert!(stdout(&o).contains(&format!("Q = {q} ")), "{}", stdout(&o));
}

#[test]
fn pebble_refuses_large_brute_force() {
    let o = bin(&["pebble", "--program", &fixture("lu.daap"), "--n", "6", "--memory", "4", "--brute-force"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn models_csv() {
    let o = bin(&["models", "--n", "4096", "--procs", "64", "--memory", "1048576", "--model", "conflux,mkl2d"]);
    let text = stdout(&o);
    assert!(text.starts_with("# schema_version=1\n"));
    assert!(text.contains("model,N,P,M,words\n"));
    assert_eq!(data_rows(&text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")).len(), 2);
    assert_eq!(bin(&["models", "--n", "8", "--procs", "1", "--memory", "4", "--model", "scalapack"]).status.code(), Some(2));
}
