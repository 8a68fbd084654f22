mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn webusage(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_webusage"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = webusage(dir, args);
    assert!(
        out.status.success(),
        "webusage {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn loaded_store(dir: &Path, fixture_args: &[&str]) {
    let mut args = vec!["fixture", "--out", "fx"];
    args.extend_from_slice(fixture_args);
    ok(dir, &args);
    ok(dir, &["ingest", "--store", "st", "fx/queries.log", "fx/displays.log", "fx/orders.log"]);
    ok(dir, &["import-biblio", "--store", "st", "fx/biblio.jsonl"]);
    ok(dir, &["import-customers", "--store", "st", "fx/customers.csv"]);
}

#[test]
fn ingest_summary_lists_one_snapshot_per_file() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["fixture", "--seed", "3", "--size", "200", "--out", "fx"]);
    let out = ok(dir.path(), &["ingest", "--store", "st", "fx/queries.log", "fx/displays.log", "fx/orders.log"]);
    assert!(out.contains("snapshot=1") && out.contains("snapshot=2") && out.contains("snapshot=3"));
    assert!(out.ends_with("files=3 records=327 errors=0 snapshots=3\n"), "{out}");

    // The same files again are recognised as duplicate batches.
    let again = ok(dir.path(), &["ingest", "--store", "st", "fx/orders.log"]);
    assert!(again.contains("duplicate-batch") && again.contains("snapshots=0"));
}

#[test]
fn bad_lines_are_reported_but_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let log = "D\t2002-03-01T10:00:00Z\tu1\tfr\tR1\n\
               D\tnot-a-time\tu1\tfr\tR1\n\
               D\t2002-03-01T10:00:00Z\tu2\tfr\n\
               D\t2002-03-02T10:00:00Z\tu2\tde\tR2\n";
    fs::write(dir.path().join("d.log"), log).unwrap();
    let out = webusage(dir.path(), &["ingest", "--store", "st", "d.log"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("records=2\terrors=2"), "{stdout}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("d.log:2:") && stderr.contains("d.log:3:"), "{stderr}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&webusage(p, &["ingest", "--store", "st", "missing.log"])), 2);
    assert_eq!(code(&webusage(p, &["import-biblio", "--store", "st", "missing.jsonl"])), 2);
    assert_eq!(code(&webusage(p, &["no-such-command"])), 2);
    assert_eq!(code(&webusage(p, &["stats", "--store", "st", "--dataset", "query", "--dimension", "bogus"])), 2);
    // A valid dimension that the dataset does not carry.
    assert_eq!(code(&webusage(p, &["stats", "--store", "st", "--dataset", "query", "--dimension", "record"])), 2);
    assert_eq!(
        code(&webusage(p, &["cousage", "--store", "st", "--min-cluster-size", "5", "--max-cluster-size", "4"])),
        2
    );
    assert_eq!(code(&webusage(p, &["stats", "--store", "st", "--from", "2002-01-01"])), 2);
    assert_eq!(code(&webusage(p, &["fixture", "--community", "A5x8"])), 2);
    assert_eq!(code(&webusage(p, &["ingest", "missing-store-flag.log"])), 2);
}

#[test]
fn empty_store() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["stats", "--store", "st"]);
    assert!(out.contains("store is empty"));
    let cousage = webusage(dir.path(), &["cousage", "--store", "st", "--out", "out"]);
    assert_eq!(code(&cousage), 1);
    assert!(String::from_utf8_lossy(&cousage.stderr).contains("nothing to analyse"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn full_year_stats() {
    let dir = tempfile::tempdir().unwrap();
    loaded_store(dir.path(), &["--seed", "5", "--size", "600"]);
    let out = ok(dir.path(), &["stats", "--store", "st", "--out", "out"]);
    assert!(out.contains("month: 12 reports") && out.contains("year: 1 reports"));
    let monthly = fs::read_dir(dir.path().join("st/stat/month")).unwrap().count();
    let yearly = fs::read_dir(dir.path().join("st/stat/year")).unwrap().count();
    assert_eq!((monthly, yearly), (12, 1));

    let table = ok(
        dir.path(),
        &["stats", "--store", "st", "--out", "out", "--dataset", "order", "--dimension", "customer_activity", "--top", "2"],
    );
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "rank,key,count,percent");
    assert!(lines.len() <= 3);
}

#[test]
fn cousage_recovers_planted_communities() {
    let dir = tempfile::tempdir().unwrap();
    loaded_store(dir.path(), &["--seed", "11", "--size", "100"]);
    let out = ok(dir.path(), &["cousage", "--store", "st", "--out", "out"]);
    assert!(out.contains("document: items=16 pairs=56 clusters=2 unclustered=0"), "{out}");
    assert!(out.contains("user: items=10 pairs=20 clusters=2 unclustered=0"), "{out}");

    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fx/manifest.json")).unwrap()).unwrap();
    for (kind, field) in [("documents", "docs"), ("users", "users")] {
        let clusters: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("out/cousage/{kind}/clusters.json"))).unwrap())
                .unwrap();
        let mut got: Vec<Vec<String>> = clusters["clusters"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| serde_json::from_value(c["internal_items"].clone()).unwrap())
            .collect();
        let mut want: Vec<Vec<String>> = manifest["communities"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| {
                let mut v: Vec<String> = serde_json::from_value(c[field].clone()).unwrap();
                v.sort();
                v
            })
            .collect();
        got.sort();
        want.sort();
        assert_eq!(got, want, "{kind}");
        assert!(dir.path().join(format!("out/cousage/{kind}/clusters/cluster_1.dot")).is_file());
        support::check_dot(&fs::read_to_string(dir.path().join(format!("out/cousage/{kind}/clusters/cluster_2.dot"))).unwrap())
            .unwrap();
    }

    ok(dir.path(), &["map", "out/cousage/users/clusters.json", "--out", "m", "--x-split", "0.5"]);
    let csv = fs::read_to_string(dir.path().join("m/map.csv")).unwrap();
    // Isolated communities have centrality 0, below the forced split: type 3.
    assert_eq!(csv, "cluster,x,y,size,type\n1,0.000000,1.000000,5,3\n2,0.000000,1.000000,5,3\n");
    assert_eq!(code(&webusage(dir.path(), &["map", "nope.json"])), 2);
}

#[test]
fn factors_tables() {
    let dir = tempfile::tempdir().unwrap();
    loaded_store(dir.path(), &["--seed", "8", "--size", "800"]);
    let out = ok(dir.path(), &["factors", "--store", "st", "--out", "out", "--kind", "wuf"]);
    assert!(out.starts_with("rank,journal,count,factor\n1,"));
    let by_year = ok(
        dir.path(),
        &["factors", "--store", "st", "--out", "out", "--kind", "cof", "--journal", "Macromolecules", "--by-year"],
    );
    assert!(by_year.starts_with("publication_year,journal,count,stored,factor\n"));
    assert!(dir.path().join("out/factors/cof-by-year.csv").is_file());
    assert_eq!(code(&webusage(dir.path(), &["factors", "--store", "st", "--by-year"])), 2);
    assert_eq!(code(&webusage(dir.path(), &["factors", "--store", "st", "--kind", "xyz"])), 2);
}

#[test]
fn fixture_command() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["fixture", "--seed", "42", "--size", "300", "--out", "a"]);
    ok(p, &["fixture", "--seed", "42", "--size", "300", "--out", "b"]);
    assert_eq!(support::read_tree(&p.join("a")), support::read_tree(&p.join("b")));

    ok(p, &["fixture", "--seed", "1", "--size", "0", "--out", "empty"]);
    for log in ["queries.log", "displays.log", "orders.log"] {
        assert_eq!(fs::read_to_string(p.join("empty").join(log)).unwrap(), "");
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(p.join("empty/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["communities"], Value::Array(vec![]));

    ok(p, &["fixture", "--seed", "1", "--size", "0", "--community", "A:5x8", "--community", "B:5x8", "--overlap", "0", "--out", "c"]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(p.join("c/manifest.json")).unwrap()).unwrap();
    let spec = &manifest["spec"]["communities"];
    assert_eq!(spec[0], serde_json::json!({"name": "A", "users": 5, "docs": 8}));
    assert_eq!(spec[1], serde_json::json!({"name": "B", "users": 5, "docs": 8}));
    assert_eq!(manifest["spec"]["overlap"], 0);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("run.conf"), "# demo\nout = from-config\nseed = 9\nsize = 40\n").unwrap();
    ok(p, &["fixture", "--config", "run.conf"]);
    assert!(p.join("from-config/manifest.json").is_file());
    ok(p, &["fixture", "--config", "run.conf", "--out", "from-flag", "--seed", "10"]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(p.join("from-flag/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["spec"]["seed"], 10);
    assert_eq!(manifest["query_events"], 20);

    fs::write(p.join("bad.conf"), "colour = blue\n").unwrap();
    assert_eq!(code(&webusage(p, &["fixture", "--config", "bad.conf"])), 2);
    assert_eq!(code(&webusage(p, &["fixture", "--config", "absent.conf"])), 2);
}
