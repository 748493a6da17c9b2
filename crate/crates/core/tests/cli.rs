use std::process::{Command, Output};

fn avgproc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avgproc")).args(args).env_remove("AVGPROC_SEED").output().unwrap()
}

fn data_rows(out: &Output) -> Vec<String> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines().map(str::to_string);
    assert_eq!(lines.next().as_deref(), Some(avgproc::cli::HEADER));
    lines.collect()
}

#[test]
fn documented_row_counts() {
    let out = avgproc(&["exact-bipartite", "--m", "500", "--n", "1000", "--a-grid", "-4:4:1"]);
    assert!(out.status.success());
    assert_eq!(data_rows(&out).len(), 9);
    let out = avgproc(&["hypercube-exact", "--d", "8,12,16", "--a-grid", "-3:3:0.5"]);
    assert_eq!(data_rows(&out).len(), 39);
    let out = avgproc(&["hardy", "--d", "100"]);
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 50);
    for r in &rows {
        let v: f64 = r.split(',').nth(9).unwrap().parse().unwrap();
        assert!((0.25..=1.0 + 1e-9).contains(&v), "{r}");
    }
    let out = avgproc(&["entropy", "--graph", "hypercube", "--d", "6", "--t", "0,0.5,1", "--replicas", "200"]);
    assert_eq!(data_rows(&out).len(), 12);
}

#[test]
fn sandwich_rows_all_pass() {
    let out = avgproc(&["ehrenfest", "--d", "12", "--check", "sandwich", "--t", "0.5,1,2,4"]);
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.contains(",sandwich_pass,1.0000000000000000e0,")));
}

#[test]
fn same_seed_same_bytes() {
    let args = ["simulate", "--graph", "k_bipartite", "--m", "10", "--n", "50", "--p", "1", "--t", "2.0", "--replicas", "4000", "--seed", "7"];
    let a = avgproc(&args);
    let b = avgproc(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = avgproc(&["simulate", "--graph", "k_bipartite", "--m", "10", "--n", "50", "--p", "1", "--t", "2.0", "--replicas", "4000", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn seed_from_environment() {
    let args = ["simulate", "--graph", "hypercube", "--d", "4", "--t", "1", "--replicas", "50"];
    let env = Command::new(env!("CARGO_BIN_EXE_avgproc")).args(args).env("AVGPROC_SEED", "42").output().unwrap();
    let flag = avgproc(&[&args[..], &["--seed", "42"]].concat());
    assert_eq!(env.stdout, flag.stdout);
    let both = Command::new(env!("CARGO_BIN_EXE_avgproc"))
        .args(args)
        .args(["--seed", "42"])
        .env("AVGPROC_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(both.stdout, flag.stdout);
    let default = avgproc(&args);
    assert!(data_rows(&default)[0].ends_with(",0"));
    let bad = Command::new(env!("CARGO_BIN_EXE_avgproc")).args(args).env("AVGPROC_SEED", "x").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("AVGPROC_SEED"));
}

#[test]
fn exit_codes() {
    let out = avgproc(&["simulate", "--graph", "hypercube", "--t", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--d"));
    assert_eq!(avgproc(&["simulate", "--graph", "hypercube", "--d", "4", "--t", "1", "--p", "3"]).status.code(), Some(2));
    assert_eq!(avgproc(&["entropy", "--graph", "k_bipartite", "--m", "2", "--n", "6", "--t", "1"]).status.code(), Some(2));
    assert_eq!(avgproc(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(avgproc(&["--version"]).status.code(), Some(0));
}

#[test]
fn csv_shape() {
    let out = avgproc(&["profile-sweep", "--graph", "k_bipartite", "--m", "3", "--n", "40", "--p", "1", "--a-grid", "0:1:1", "--replicas", "20"]);
    for r in data_rows(&out) {
        let cols: Vec<&str> = r.split(',').collect();
        assert_eq!(cols.len(), 13);
        assert_eq!(cols[8], "mean_lp");
        assert!(!cols[10].is_empty() && cols[11] == "20");
    }
    let out = avgproc(&["exact-bipartite", "--m", "3", "--n", "40", "--t", "0.5"]);
    let cols: Vec<String> = data_rows(&out)[0].split(',').map(str::to_string).collect();
    assert!(cols[10].is_empty() && cols[11].is_empty() && cols[6].is_empty());
}
