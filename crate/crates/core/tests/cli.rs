#![allow(clippy::excessive_precision)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use protoperf::bench::CostProfile;
use protoperf::category::Category;
use protoperf::model::ModelRegistry;
use protoperf::protocol::parse_corpus;
use serde_json::Value;

fn protoperf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protoperf"))
        .args(args)
        .current_dir(dir)
        .env_remove("PROTOPERF_SEED")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = protoperf(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    protoperf(dir, args).status.code().unwrap()
}

const TWO: &str = "protocol small { A -> B: senc(size=80); hash(size=80) }\n\
                   protocol big { A -> B: senc(size=80); hash(size=80); aenc(size=80, key=1024) }\n";

#[test]
fn bench_default_sweep_is_deterministic_on_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a", "b"] {
        ok(d, &["bench", "--backend", "synthetic", "--spec", "hash:sha1:0", "--out", &format!("{name}.csv"),
                "--aggregated-out", &format!("{name}.agg.csv")]);
    }
    let agg = fs::read_to_string(d.join("a.agg.csv")).unwrap();
    assert_eq!(agg, fs::read_to_string(d.join("b.agg.csv")).unwrap());
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    let lines: Vec<&str> = agg.lines().collect();
    assert_eq!(lines.len(), 1 + 11);
    assert_eq!(lines[1], "hash,digest,16.0,298.0");
    assert_eq!(lines[11], "hash,digest,16384.0,49402.0");
}

#[test]
fn bench_rejects_malformed_spec_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = protoperf(dir.path(), &["bench", "--backend", "synthetic", "--spec", "hash:sha1", "--out", "m.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--help"));
    assert!(!dir.path().join("m.csv").exists());
}

#[test]
fn bench_capability_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(dir.path(), &["bench", "--backend", "synthetic", "--spec", "senc:aes:cbc:100", "--out", "m.csv"]),
        2
    );
    assert_eq!(
        code(dir.path(), &["bench", "--backend", "synthetic", "--spec", "hash:sha1:0", "--out", "m.csv",
                           "--batching", "off", "--sizes", "16"]),
        0,
        "virtual clock ticks at 1 ns, so a 298 ns call clears the 64 ns threshold"
    );
}

#[test]
fn fit_prints_zero_rmse_on_exact_cubic_and_merges() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["bench", "--backend", "synthetic", "--spec", "hash:sha1:0", "--out", "m.csv", "--reps", "3"]);
    let printed = ok(d, &["fit", "--in", "m.csv", "--out", "reg.json"]);
    assert!(printed.starts_with("hash.digest: rmse=0 "), "{printed}");

    assert_eq!(code(d, &["fit", "--in", "m.csv", "--out", "reg.json", "--category-op", "aenc"]), 2);

    ok(d, &["bench", "--backend", "synthetic", "--spec", "aenc:rsa:1024", "--out", "a.csv", "--reps", "3"]);
    ok(d, &["fit", "--in", "a.csv", "--out", "reg.json", "--category-op", "asymmetric.encrypt"]);
    let doc: Value = serde_json::from_str(&fs::read_to_string(d.join("reg.json")).unwrap()).unwrap();
    let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["asymmetric.encrypt", "hash.digest"]);
    assert_eq!(doc["hash.digest"]["unit"], "ns");
    assert!(doc["hash.digest"]["fitted_on"]["digest"].is_string());
}

#[test]
fn fitted_registry_reproduces_the_generating_profile() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut args = vec!["bench", "--backend", "synthetic", "--out", "m.csv", "--reps", "2"];
    for s in ["senc:aes:cbc:128", "sdec:aes:cbc:128", "hash:sha1:0", "aenc:rsa:1024", "adec:rsa:1024"] {
        args.extend(["--spec", s]);
    }
    ok(d, &args);
    ok(d, &["fit", "--in", "m.csv", "--out", "reg.json"]);
    let reg = ModelRegistry::load(d.join("reg.json")).unwrap();
    let p = CostProfile::default();
    for c in Category::ALL {
        for x in [16.0, 100.0, 1000.0, 2048.0, 4096.0] {
            let want = p.cost_ns(c, x);
            let got = reg.get(c).eval(x).unwrap();
            assert!((got - want).abs() <= 1e-9 * want, "{c}({x}): {got} vs {want}");
        }
    }
}

#[test]
fn estimate_and_compare_with_bundled_preset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("p.txt"), TWO).unwrap();
    let out = ok(d, &["estimate", "--registry", "builtin:table1", "--protocols", "p.txt"]);
    let small: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((small - 12.370185964666320384).abs() <= 1e-12 * small);
    assert!(out.lines().nth(1).unwrap().ends_with(",paper-units"));

    let same = ok(d, &["compare", "--registry", "builtin:table1", "--protocols", "p.txt", "--p", "big", "--q", "big"]);
    assert!(same.lines().nth(1).unwrap().contains(",TIE,"));
    let v = ok(d, &["compare", "--registry", "builtin:table1", "--protocols", "p.txt", "--p", "small", "--q", "big"]);
    assert!(v.lines().nth(1).unwrap().starts_with("small,big,") && v.contains(",P,"));

    assert_eq!(code(d, &["compare", "--registry", "builtin:table1", "--protocols", "p.txt", "--p", "x", "--q", "big"]), 2);
    assert_eq!(code(d, &["estimate", "--registry", "missing.json", "--protocols", "p.txt"]), 2);
    assert_eq!(code(d, &["estimate", "--registry", "builtin:table1", "--protocols", "missing.txt"]), 2);
    fs::write(d.join("bad.txt"), "protocol x { A -> B: senc(size=0) }").unwrap();
    assert_eq!(code(d, &["estimate", "--registry", "builtin:table1", "--protocols", "bad.txt"]), 2);
}

#[test]
fn generate_is_byte_identical_and_honours_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--seed", "7", "--n", "1000", "--out", "a.txt"]);
    ok(d, &["generate", "--seed", "7", "--n", "1000", "--out", "b.txt"]);
    let a = fs::read(d.join("a.txt")).unwrap();
    assert_eq!(a, fs::read(d.join("b.txt")).unwrap());
    assert_eq!(parse_corpus(std::str::from_utf8(&a).unwrap()).unwrap().len(), 1000);

    let side: Value = serde_json::from_str(&fs::read_to_string(d.join("a.txt.meta.json")).unwrap()).unwrap();
    assert_eq!(side["seed"], 7);
    assert_eq!(side["n"], 1000);
    assert_eq!(side["generator"], "chacha20-le64-mulshift-v1");
    assert!(side["config"]["payload_choices"].is_array());

    let out = Command::new(env!("CARGO_BIN_EXE_protoperf"))
        .args(["generate", "--n", "1000", "--out", "c.txt"])
        .current_dir(d)
        .env("PROTOPERF_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(a, fs::read(d.join("c.txt")).unwrap());
    assert_eq!(code(d, &["generate", "--n", "10", "--out", "d.txt"]), 2, "no seed anywhere");
}

#[test]
fn validate_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("p.txt"), TWO).unwrap();
    let printed = ok(d, &["validate", "--corpus", "p.txt", "--registry", "builtin:synthetic", "--backend", "synthetic",
                          "--report", "out"]);
    let summary: Value = serde_json::from_str(&fs::read_to_string(d.join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary, serde_json::from_str::<Value>(&printed).unwrap());
    assert_eq!(summary["agreement_rate"], 1.0);
    assert_eq!(summary["pairs_total"], 2);
    assert_eq!(summary["pairs_retained"], 2);
    assert_eq!(summary["min_sep_pct"], 5.0);
    assert_eq!(summary["environment"]["backend"], "synthetic");
    let csv = fs::read_to_string(d.join("out/report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "p_id,q_id,est_p,est_q,est_ratio,predicted_faster,meas_p_ns,meas_q_ns,meas_ratio,agree");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("big,small,") && lines[1].ends_with(",true"));

    assert_eq!(
        code(d, &["validate", "--corpus", "p.txt", "--registry", "builtin:table1", "--backend", "synthetic", "--report", "o2"]),
        2,
        "preset registry is not in ns"
    );
    assert_eq!(
        code(d, &["validate", "--corpus", "p.txt", "--registry", "builtin:synthetic", "--backend", "synthetic", "--report",
                  "o3", "--min-sep", "-1"]),
        2
    );
}

#[test]
fn sweep_error_and_replicate_on_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let csv = ok(d, &["sweep-error", "--sizes", "10,80,300", "--backend", "synthetic", "--registry", "builtin:synthetic",
                      "--seed", "7", "--n", "20", "--reps", "2"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "payload_bytes,mean_abs_ratio_deviation_pct");
    assert_eq!(lines[2..], ["80,0", "300,0"]);
    // sdec at 10 B costs 572.5 ns, which the virtual clock rounds to a whole ns.
    let dev10: f64 = lines[1].strip_prefix("10,").unwrap().parse().unwrap();
    assert!(dev10 > 0.0 && dev10 < 0.1, "{dev10}");

    let printed = ok(d, &["replicate", "--backend", "synthetic", "--seed", "3", "--n", "12", "--out", "run", "--reps", "2"]);
    let summary: Value = serde_json::from_str(&printed).unwrap();
    assert_eq!(summary["agreement_rate"], 1.0);
    for f in ["measurements.csv", "registry.json", "corpus.txt", "corpus.txt.meta.json", "report.csv", "summary.json"] {
        assert!(d.join("run").join(f).is_file(), "{f}");
    }
    ModelRegistry::load(d.join("run/registry.json")).unwrap();
    assert_eq!(parse_corpus(&fs::read_to_string(d.join("run/corpus.txt")).unwrap()).unwrap().len(), 12);
}
