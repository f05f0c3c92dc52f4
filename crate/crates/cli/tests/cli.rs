use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Result;
use clap::Parser;
use cjt_cli::cli::{run, Args, Runner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tempfile::TempDir;

type Rows = Vec<Vec<u32>>;

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &Rows) {
    let mut text = header.join(",") + "\n";
    for r in rows {
        text += &r.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        text += "\n";
    }
    fs::write(dir.join(name), text).unwrap();
}

/// R(A,B) – S(B,C) – T(C,D) with duplicate rows, as an int catalog.
fn chain_db(seed: u64) -> (TempDir, [Rows; 3]) {
    let mut rng = StdRng::seed_from_u64(seed);
    let dir = TempDir::new().unwrap();
    let mut gen = || -> Rows { (0..40).map(|_| vec![rng.gen_range(0..5), rng.gen_range(0..5)]).collect() };
    let rels = [gen(), gen(), gen()];
    write_csv(dir.path(), "r.csv", &["A", "B"], &rels[0]);
    // Columns in a different order from the declaration.
    let swapped: Rows = rels[1].iter().map(|r| vec![r[1], r[0]]).collect();
    write_csv(dir.path(), "s.csv", &["C", "B"], &swapped);
    write_csv(dir.path(), "t.csv", &["C", "D"], &rels[2]);
    fs::write(
        dir.path().join("catalog.json"),
        r#"{"semiring": "int", "relations": [
            {"name": "R", "path": "r.csv", "attributes": ["A", "B"], "ordered": ["A"]},
            {"name": "S", "path": "s.csv", "attributes": ["B", "C"]},
            {"name": "T", "path": "t.csv", "attributes": ["C", "D"]}]}"#,
    )
    .unwrap();
    (dir, rels)
}

/// Count of the chain join grouped by D, with A below `a_max`.
fn oracle_by_d(rels: &[Rows; 3], a_max: u32) -> BTreeMap<u32, i64> {
    let mut out = BTreeMap::new();
    for r in &rels[0] {
        for s in &rels[1] {
            for t in &rels[2] {
                if r[0] < a_max && r[1] == s[0] && s[1] == t[0] {
                    *out.entry(t[1]).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

fn parse_counts(csv: &str) -> BTreeMap<u32, i64> {
    csv.lines()
        .skip(1)
        .map_while(|l| {
            let (k, v) = l.split_once(',')?;
            Some((k.parse().ok()?, v.parse().ok()?))
        })
        .collect()
}

struct Cli {
    runner: Runner,
}

impl Cli {
    fn new(catalog: &Path, extra: &[&str]) -> Cli {
        let mut argv = vec!["cjt", "--catalog", catalog.to_str().unwrap()];
        argv.extend(extra);
        argv.push("stats");
        Cli {
            runner: Runner::new(&Args::try_parse_from(argv).unwrap()),
        }
    }

    /// Runs one command line; returns stdout.
    fn run(&mut self, line: &[&str]) -> Result<String> {
        let mut argv = vec!["cjt"];
        argv.extend(line);
        let args = Args::try_parse_from(argv)?;
        let (mut out, mut err) = (Vec::new(), Vec::new());
        self.runner.run(&args.command, &mut out, &mut err)?;
        Ok(String::from_utf8(out)?)
    }

    fn last_computed(&self) -> u64 {
        self.runner.log.last().unwrap().1.messages_computed
    }
}

#[test]
fn catalog_query_matches_a_nested_loop_join() {
    let (dir, rels) = chain_db(1);
    let mut cli = Cli::new(&dir.path().join("catalog.json"), &[]);
    let out = cli.run(&["query", "group = D; where = A < 3"]).unwrap();
    assert!(out.starts_with("D,count\n"));
    assert_eq!(parse_counts(&out), oracle_by_d(&rels, 3));
}

#[test]
fn duplicate_rows_accumulate() {
    let dir = TempDir::new().unwrap();
    write_csv(dir.path(), "r.csv", &["A"], &vec![vec![1], vec![1], vec![1], vec![2]]);
    fs::write(
        dir.path().join("catalog.json"),
        r#"{"relations": [{"name": "R", "path": "r.csv", "attributes": ["A"]}]}"#,
    )
    .unwrap();
    let mut cli = Cli::new(&dir.path().join("catalog.json"), &[]);
    let out = cli.run(&["query", "group = A"]).unwrap();
    assert_eq!(out, "A,count\n1,3\n2,1\n");
}

#[test]
fn header_mismatch_names_the_column() {
    let (dir, _) = chain_db(2);
    fs::write(dir.path().join("t.csv"), "C,E\n1,2\n").unwrap();
    let mut cli = Cli::new(&dir.path().join("catalog.json"), &[]);
    let err = cli.run(&["build-jt"]).unwrap_err().to_string();
    assert!(err.contains("\"E\""), "{err}");
}

#[test]
fn pivot_query_passes_no_messages() {
    let (dir, rels) = chain_db(3);
    let mut cli = Cli::new(&dir.path().join("catalog.json"), &[]);
    cli.run(&["calibrate", "group = D"]).unwrap();
    assert_eq!(cli.last_computed(), 4);
    let out = cli.run(&["query", "group = D"]).unwrap();
    assert_eq!(cli.last_computed(), 0);
    assert_eq!(parse_counts(&out), oracle_by_d(&rels, u32::MAX));
}

#[test]
fn deleting_rows_keeps_the_pivot_free() {
    for mode in ["eager", "lazy"] {
        let (dir, mut rels) = chain_db(4);
        let mut cli = Cli::new(&dir.path().join("catalog.json"), &["--mode", mode]);
        cli.run(&["calibrate", "group = D"]).unwrap();
        let removed: Rows = rels[0].drain(..10).collect();
        write_csv(dir.path(), "gone.csv", &["B", "A"], &removed.iter().map(|r| vec![r[1], r[0]]).collect());
        cli.run(&["delta", "relation = R; delete_csv = gone.csv"]).unwrap();
        let out = cli.run(&["query", "group = D"]).unwrap();
        if mode == "eager" {
            assert_eq!(cli.last_computed(), 0);
        }
        assert_eq!(parse_counts(&out), oracle_by_d(&rels, u32::MAX), "{mode}");
    }
}

#[test]
fn deleting_an_absent_row_fails() {
    let (dir, _) = chain_db(5);
    let mut cli = Cli::new(&dir.path().join("catalog.json"), &[]);
    let err = cli.run(&["delta", "relation = R; delete = 99, 0"]).unwrap_err();
    assert!(err.to_string().contains("not in R"), "{err}");
}

#[test]
fn export_round_trips() {
    let (dir, _) = chain_db(6);
    let out_dir = dir.path().join("out");
    let mut cli = Cli::new(&dir.path().join("catalog.json"), &[]);
    cli.run(&["delta", "relation = T; insert = 0, 9 | 0, 9"]).unwrap();
    let before = cli.run(&["query", "group = D, A"]).unwrap();
    cli.run(&["export", out_dir.to_str().unwrap()]).unwrap();
    let mut again = Cli::new(&out_dir.join("catalog.json"), &[]);
    assert_eq!(again.run(&["query", "group = D, A"]).unwrap(), before);
    let tree = |c: &mut Cli| c.run(&["build-jt"]).unwrap();
    assert_eq!(tree(&mut again), tree(&mut cli));
}

#[test]
fn stats_json_records_every_command() {
    let (dir, _) = chain_db(7);
    let stats = dir.path().join("stats.json");
    let args = Args::try_parse_from([
        "cjt",
        "--catalog",
        dir.path().join("catalog.json").to_str().unwrap(),
        "--stats-json",
        stats.to_str().unwrap(),
        "query",
        "group = B",
    ])
    .unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    run(&args, &mut out, &mut err).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&stats).unwrap()).unwrap();
    let log = v.as_array().unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(log[0]["command"], "query");
    assert!(String::from_utf8(err).unwrap().starts_with("[query] computed="));
}

#[test]
fn script_runs_against_one_session() {
    let (dir, rels) = chain_db(8);
    fs::write(
        dir.path().join("run.txt"),
        "# warm up\ncalibrate \"group = D\"\nquery 'group = D; where = A < 2'\ncube --dims A,D --k 1\nolap D --where A<2\n",
    )
    .unwrap();
    let mut cli = Cli::new(&dir.path().join("catalog.json"), &[]);
    let out = cli.run(&["script", dir.path().join("run.txt").to_str().unwrap()]).unwrap();
    let want = oracle_by_d(&rels, 2);
    let tables: Vec<&str> = out.split("D,count\n").skip(1).collect();
    assert_eq!(tables.len(), 2);
    for t in tables {
        assert_eq!(parse_counts(&format!("D,count\n{t}")), want);
    }
    let commands: Vec<&str> = cli.runner.log.iter().map(|(c, _)| c.as_str()).collect();
    assert_eq!(commands, ["calibrate", "query", "cube", "olap"]);
}

#[test]
fn train_recovers_an_exact_line() {
    let dir = TempDir::new().unwrap();
    // y = 3 + 2x over keys shared with a second relation.
    let xs: Rows = (0..6).map(|k| vec![k, k * 2]).collect();
    let ys: Rows = (0..6).map(|k| vec![k, 3 + 4 * k]).collect();
    write_csv(dir.path(), "x.csv", &["K", "x"], &xs);
    write_csv(dir.path(), "y.csv", &["K", "y"], &ys);
    fs::write(
        dir.path().join("catalog.json"),
        r#"{"semiring": "covariance", "feature_slots": {"x": 0, "y": 1}, "relations": [
            {"name": "X", "path": "x.csv", "attributes": ["K", "x"], "features": ["x"]},
            {"name": "Y", "path": "y.csv", "attributes": ["K", "y"], "features": ["y"]}]}"#,
    )
    .unwrap();
    let mut cli = Cli::new(&dir.path().join("catalog.json"), &[]);
    let out = cli.run(&["train", "--features", "x", "--target", "y"]).unwrap();
    let vals: BTreeMap<&str, f64> = out
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k, v.parse().unwrap())
        })
        .collect();
    assert!((vals["intercept"] - 3.0).abs() < 1e-9);
    assert!((vals["x"] - 2.0).abs() < 1e-9);
    assert!((vals["r2"] - 1.0).abs() < 1e-9);
    assert_eq!(vals["n"], 6.0);
}

#[test]
fn augment_through_the_cli_adds_one_message() {
    let (dir, rels) = chain_db(9);
    let extra: Rows = (0..5).map(|d| vec![d, d % 2]).chain([vec![7, 0]]).collect();
    write_csv(dir.path(), "extra.csv", &["D", "E"], &extra);
    let mut cli = Cli::new(&dir.path().join("catalog.json"), &[]);
    cli.run(&["calibrate"]).unwrap();
    let out = cli
        .run(&["augment", dir.path().join("extra.csv").to_str().unwrap(), "--keys", "D"])
        .unwrap();
    assert_eq!(cli.last_computed(), 1);
    // Each D value appears once in `extra`, so the count is unchanged.
    let total: i64 = oracle_by_d(&rels, u32::MAX).values().sum();
    assert!(out.contains(&format!("count\n{total}\n")), "{out}");
    let grouped = cli.run(&["query", "group = E"]).unwrap();
    let by_d = oracle_by_d(&rels, u32::MAX);
    let even: i64 = by_d.iter().filter(|(d, _)| *d % 2 == 0).map(|(_, c)| c).sum();
    assert!(grouped.contains(&format!("\n0,{even}\n")), "{grouped}");
}

#[test]
fn bench_chain_reports_the_ratio() {
    let mut cli = Cli::new(Path::new("unused.json"), &[]);
    let out = cli.run(&["bench-chain", "--r", "4", "--f", "3", "--d", "9"]).unwrap();
    assert!(out.contains(&format!("materialized join:   {} rows", 9 * 81)), "{out}");
}
