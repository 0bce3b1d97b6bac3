use std::path::Path;
use std::process::{Command, Output};

fn dpoph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpoph"))
        .args(args)
        .output()
        .expect("spawn dpoph")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_data(dir: &Path) -> String {
    let mut text = String::new();
    for i in 0..40u32 {
        let feats: Vec<String> = (0..12).map(|j| format!("{}:1", 1 + (i * 3 + j * 5) % 64)).collect();
        let mut feats = feats;
        feats.sort_by_key(|s| s.split(':').next().unwrap().parse::<u32>().unwrap());
        feats.dedup();
        text.push_str(&format!("{} {}\n", i % 2, feats.join(" ")));
    }
    let p = dir.join("data.svm");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn tables_prints_discount_factors() {
    let o = dpoph(&["tables", "--D", "1024", "--K", "64", "--f-min", "64,512", "--b", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "variant,D,K,f,b,delta,N");
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines.contains(&"oph-re,1024,64,64,1,0.000001,6"));
    assert!(lines.contains(&"oph-re,1024,64,512,1,0.000001,1"));
}

#[test]
fn indivisible_dimension_is_a_config_error() {
    let o = dpoph(&["tables", "--D", "1000", "--K", "64", "--f-min", "64"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1024"));
}

#[test]
fn unknown_flag_is_a_config_error() {
    assert_eq!(dpoph(&["tables", "--bogus"]).status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_config_error() {
    let o = dpoph(&["sketch", "--dataset", "/nonexistent.svm", "--K", "8", "--variant", "oph-re", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sparse_vector_below_f_min_is_a_budget_violation() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = dir.path().join("s.sig");
    let o = dpoph(&[
        "dp-sketch", "--dataset", &data, "--D", "64", "--K", "8", "--variant", "oph-re", "--epsilon", "5",
        "--f-min", "50", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sketch_dp_sketch_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let plain = dir.path().join("plain.sig");
    let private = dir.path().join("dp.sig");
    let csv = dir.path().join("plain.csv");
    let o = dpoph(&[
        "sketch", "--dataset", &data, "--D", "64", "--K", "8", "--b", "2", "--variant", "oph-re", "--seed", "3",
        "--out", plain.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 41);

    let o = dpoph(&[
        "dp-sketch", "--dataset", &data, "--D", "64", "--K", "8", "--b", "2", "--variant", "oph-re", "--seed", "3",
        "--epsilon", "8", "--f-min", "10", "--out", private.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let o = dpoph(&[
        "eval", "--dataset", &data, "--queries", &data, "--db-sigs", plain.to_str().unwrap(), "--query-sigs",
        plain.to_str().unwrap(), "--R", "1,5", "--top", "5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("scheme,K,b,R,precision,recall"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[3], "1");
    // Every query is its own exact match.
    assert_eq!(first[4], "1.000000");

    let o = dpoph(&[
        "eval", "--dataset", &data, "--queries", &data, "--db-sigs", private.to_str().unwrap(), "--query-sigs",
        plain.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mse_sim_writes_one_row_per_cell() {
    let o = dpoph(&[
        "mse-sim", "--D", "64", "--K", "8", "--f-min", "16", "--epsilon", "5,10", "--runs", "200",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("variant,f,epsilon,mse,stderr,replicates"));
    assert_eq!(out.lines().count(), 1 + 3 * 2);
}
