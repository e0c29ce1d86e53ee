use std::fs;
use std::path::Path;

use gridprint::cli::{run, EXIT_CAP, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use gridprint::ClusterTable;

const SAMPLE: &str = include_str!("../testdata/sample_signature.txt");

struct Output {
    code: i32,
    out: String,
    err: String,
}

fn gp(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("gridprint").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Output {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn footer<'a>(text: &'a str, name: &str) -> &'a str {
    let prefix = format!("# {name}\t");
    text.lines()
        .find_map(|l| l.strip_prefix(prefix.as_str()))
        .unwrap_or_else(|| panic!("no {name} line in {text}"))
}

fn generate(dir: &Path, extra: &[&str]) -> (std::path::PathBuf, std::path::PathBuf) {
    let corpus = dir.join("corpus");
    let truth = dir.join("truth.tsv");
    let mut args = vec!["generate", "--out", p(&corpus), "--truth", p(&truth)];
    args.extend_from_slice(extra);
    let o = gp(&args);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    (corpus, truth)
}

#[test]
fn help_lists_every_parameter_with_defaults() {
    let o = gp(&["dedup", "--help"]);
    assert_eq!(o.code, EXIT_OK);
    for flag in [
        "--grid-n", "--min-edge", "--max-edge", "--neighbors", "--threshold", "--min-matched",
        "--matcher", "--side-tol", "--angle-tol", "--jobs", "--config", "--csv",
    ] {
        assert!(o.out.contains(flag), "{flag} missing from help");
    }
    for default in ["15", "100", "90"] {
        assert!(o.out.contains(default));
    }
    let top = gp(&["--help"]);
    for cmd in ["index", "identify", "dedup", "oracle", "stats", "regress", "estimate", "generate", "bench"] {
        assert!(top.out.contains(cmd), "{cmd} missing");
    }
}

#[test]
fn usage_errors() {
    assert_eq!(gp(&[]).code, EXIT_USAGE);
    assert_eq!(gp(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(gp(&["estimate", "--n", "10"]).code, EXIT_USAGE);
    assert_eq!(gp(&["estimate", "--n", "10", "--avg", "2", "--min-edge", "200"]).code, EXIT_USAGE);
    assert_eq!(gp(&["estimate", "--n", "10", "--avg", "2", "--grid-n", "0"]).code, EXIT_USAGE);
    assert_eq!(gp(&["estimate", "--n", "10", "--avg", "2", "--threshold", "101"]).code, EXIT_USAGE);
}

#[test]
fn estimate_reproduces_worked_example() {
    let o = gp(&["estimate", "--n", "10000000", "--avg", "2", "--ms-per-cmp", "1"]);
    assert_eq!(o.code, EXIT_OK);
    assert_eq!(
        o.out,
        "classes\t5000000\ncomparisons_per_class\t1\ncomparisons\t5000000\nwall_ms\t5000000\nwall\t1h23'20\"\n"
    );
    let csv = gp(&["estimate", "--n", "4", "--avg", "2", "--csv"]);
    assert!(csv.out.starts_with("classes,2\n"));
}

#[test]
fn regress_reads_decimal_commas() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t3.tsv");
    fs::write(
        &input,
        "BD size\tAvg\n320\t1\n1011\t1,002\n4001\t1,0025\n10000\t1,0014\n20000\t1,0033\n\
         30000\t1,0059\n40000\t1,0053\n50000\t1,0049\n54000\t1,0053\n113609\t1,0086\n",
    )
    .unwrap();
    let o = gp(&["regress", "--input", p(&input), "--predict", "10000000"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    assert!(o.out.contains("intercept\t1.00177911"), "{}", o.out);
    assert!(o.out.contains("10000000\t1.664715563"), "{}", o.out);

    fs::write(&input, "320\t1\n").unwrap();
    assert_eq!(gp(&["regress", "--input", p(&input)]).code, EXIT_DATA);
    fs::write(&input, "1\t2\nnot\tnumbers\n").unwrap();
    assert_eq!(gp(&["regress", "--input", p(&input)]).code, EXIT_DATA);
}

#[test]
fn generate_dedup_truth_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, truth) = generate(dir.path(), &["--subjects", "200", "--dup", "0.1", "--seed", "5"]);
    assert_eq!(fs::read_dir(&corpus).unwrap().count(), 220);

    let report = dir.path().join("report.tsv");
    let o = gp(&[
        "dedup", "--corpus", p(&corpus), "--out", p(&report), "--truth", p(&truth), "--oracle",
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(footer(&text, "n"), "220");
    assert_eq!(footer(&text, "duplicate_groups"), "20");
    assert_eq!(footer(&text, "precision"), "1.0000");
    assert_eq!(footer(&text, "recall"), "1.0000");
    assert_eq!(footer(&text, "oracle_agrees"), "true");
    assert!(o.err.contains("20 duplicate groups"));

    // every group line: key, representative, members starting with it
    let groups: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    let members: usize = groups
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            assert_eq!(f.len(), 3);
            assert!(f[2].starts_with(f[1]));
            f[2].split(',').count()
        })
        .sum();
    assert_eq!(members, 220);
}

#[test]
fn dedup_is_idempotent_across_runs_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = generate(dir.path(), &["--subjects", "300", "--dup", "0.2", "--seed", "9"]);
    let strip = |s: String| -> String {
        s.lines()
            .filter(|l| !l.starts_with("# wall_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = gp(&["dedup", "--corpus", p(&corpus)]);
    let b = gp(&["dedup", "--corpus", p(&corpus)]);
    let c = gp(&["dedup", "--corpus", p(&corpus), "--jobs", "3"]);
    assert_eq!(a.code, EXIT_OK);
    let a = strip(a.out);
    assert_eq!(a, strip(b.out));
    assert_eq!(a, strip(c.out));
}

#[test]
fn index_then_identify() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = generate(dir.path(), &["--subjects", "150", "--seed", "3"]);
    fs::write(corpus.join("SAMPLE1.sig"), SAMPLE).unwrap();
    let table_path = dir.path().join("th1.tsv");
    let o = gp(&["index", "--corpus", p(&corpus), "--out", p(&table_path)]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    let table = ClusterTable::load_file(&table_path).unwrap();
    assert_eq!(table.size(), 151);
    assert_eq!(
        table.lookup("1-1-1-1-0-1-4-2-2-0-2-1-2-0-0-1-0-0-1-1-1-0-1-0-0"),
        &["SAMPLE1".to_string()]
    );

    let query = dir.path().join("probe.txt");
    fs::write(&query, SAMPLE).unwrap();
    let with_table = gp(&[
        "identify", "--query", p(&query), "--table", p(&table_path), "--corpus", p(&corpus),
    ]);
    assert_eq!(with_table.code, EXIT_OK, "{}", with_table.err);
    assert!(with_table.out.starts_with("SAMPLE1\t100.0000\tyes\n"), "{}", with_table.out);
    let rebuilt = gp(&["identify", "--query", p(&query), "--corpus", p(&corpus)]);
    assert_eq!(rebuilt.out, with_table.out);
}

#[test]
fn stats_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = generate(dir.path(), &["--subjects", "100", "--dup", "0.05", "--seed", "4"]);
    let o = gp(&["stats", "--corpus", p(&corpus), "--name", "SYN", "--csv"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    let lines: Vec<&str> = o.out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("FBD,Size"));
    assert!(lines[1].starts_with("SYN,105,"));

    let oracle = gp(&["oracle", "--corpus", p(&corpus)]);
    assert_eq!(oracle.code, EXIT_OK);
    assert_eq!(footer(&oracle.out, "duplicate_groups"), "5");
    assert_eq!(gp(&["oracle", "--corpus", p(&corpus), "--cap", "50"]).code, EXIT_CAP);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = generate(dir.path(), &["--subjects", "40", "--dup", "0.25", "--seed", "8"]);
    let cfg = dir.path().join("run.toml");
    // nothing reaches a threshold above 100, so nothing groups
    fs::write(&cfg, "grid_n = 5\n[matcher]\nscore_threshold = 100.0\nmin_matched_descriptors = 100000\n").unwrap();
    let strict = gp(&["dedup", "--corpus", p(&corpus), "--config", p(&cfg)]);
    assert_eq!(strict.code, EXIT_OK, "{}", strict.err);
    assert_eq!(footer(&strict.out, "duplicate_groups"), "0");
    let flag = gp(&["dedup", "--corpus", p(&corpus), "--config", p(&cfg), "--min-matched", "0"]);
    assert_eq!(footer(&flag.out, "duplicate_groups"), "10");

    fs::write(&cfg, "bogus_key = 1\n").unwrap();
    assert_eq!(gp(&["dedup", "--corpus", p(&corpus), "--config", p(&cfg)]).code, EXIT_DATA);
}

#[test]
fn data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = gp(&["dedup", "--corpus", p(&empty)]);
    assert_eq!(o.code, EXIT_DATA);
    assert!(!o.err.is_empty());
    assert_eq!(gp(&["dedup", "--corpus", p(&dir.path().join("missing"))]).code, EXIT_DATA);

    fs::write(empty.join("bad.sig"), "12;x;0.5;1\n").unwrap();
    assert_eq!(gp(&["index", "--corpus", p(&empty), "--out", p(&dir.path().join("t"))]).code, EXIT_DATA);
}

#[test]
fn bench_small_run() {
    let o = gp(&["bench", "--sizes", "200,400", "--reps", "1", "--queries", "10", "--csv"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    let lines: Vec<&str> = o.out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("size,nb_class,avg"));
    assert!(lines[1].starts_with("200,"));
    assert!(lines[2].starts_with("400,"));
}

#[test]
fn csv_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, truth) = generate(dir.path(), &["--subjects", "60", "--dup", "0.1", "--seed", "12"]);
    let o = gp(&["dedup", "--corpus", p(&corpus), "--truth", p(&truth), "--csv"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    assert!(o.out.contains("# precision,1.0000\n"));
    let pair = o
        .out
        .lines()
        .filter(|l| !l.starts_with('#'))
        .find(|l| l.matches(',').count() == 3)
        .expect("a two-member group line");
    let fields: Vec<&str> = pair.splitn(3, ',').collect();
    assert!(fields[2].starts_with(&format!("\"{}", fields[1])));
    let oracle = gp(&["oracle", "--corpus", p(&corpus), "--csv"]);
    assert!(oracle.out.contains("# duplicate_groups,6\n"), "{}", oracle.out);
}
