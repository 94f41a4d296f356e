use std::fs;
use std::path::Path;

use detinfo_harness::{cli_main, schema, ExperimentKind};

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["detinfo"];
    argv.extend_from_slice(args);
    cli_main(argv)
}

fn out(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn fig4_writes_expected_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = out(dir.path(), "fig4.csv");
    let code = run(&[
        "fig4",
        "--snr-db",
        "0",
        "--tb",
        "64,128",
        "--trials",
        "200",
        "--seed",
        "7",
        "--out",
        &path,
        "--deterministic",
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("tb,prior_present,p_fa,p_fa_stderr,"));
    assert_eq!(
        header.split(',').collect::<Vec<_>>(),
        schema(ExperimentKind::Fig4)
    );
    assert_eq!(lines.count(), 2 * 21);
}

#[test]
fn timestamp_comment_unless_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = out(dir.path(), "a.csv");
    assert_eq!(
        run(&["fig3", "--snr-db", "0", "--trials", "100", "--out", &path]),
        0
    );
    assert!(fs::read_to_string(&path)
        .unwrap()
        .starts_with("# generated "));
}

#[test]
fn identical_output_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cache = out(dir.path(), "cache");
    let mut files = Vec::new();
    for threads in ["1", "3", "8"] {
        for (kind, extra) in [
            ("fig3", vec!["--snr-db", "-3,4"]),
            ("fig5", vec!["--snr-db", "0", "--tb", "16"]),
            ("roc", vec!["--snr-db", "5", "--pfa", "0.01,0.1"]),
        ] {
            let path = out(dir.path(), &format!("{kind}-{threads}.csv"));
            let mut args = vec![
                kind,
                "--trials",
                "300",
                "--seed",
                "11",
                "--threads",
                threads,
                "--deterministic",
                "--cache-dir",
                &cache,
                "--out",
                &path,
            ];
            args.extend(extra);
            assert_eq!(run(&args), 0);
            files.push((kind, fs::read(&path).unwrap()));
        }
    }
    for (kind, bytes) in &files[3..] {
        let first = files.iter().find(|(k, _)| k == kind).unwrap();
        assert_eq!(&first.1, bytes, "{kind} differs across thread counts");
    }
}

#[test]
fn json_lines_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = out(dir.path(), "fig6.jsonl");
    let code = run(&[
        "fig6", "--prior", "0,0.5,1", "--tb", "16", "--trials", "200", "--format", "json", "--out",
        &path,
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&path).unwrap();
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 3);
    let keys: Vec<&str> = rows[0]
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    assert_eq!(keys, schema(ExperimentKind::Fig6));
    assert_eq!(rows[0]["di_theoretical"], 0.0);
    assert_eq!(rows[2]["di_theoretical"], 0.0);
}

#[test]
fn spec_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = out(dir.path(), "spec.json");
    fs::write(
        &spec_path,
        r#"{"schema_version":1,"kind":"custom","sweep":{"tb":[16],"snr_db":["-inf",3],"prior_present":[0.3]},"trials":150,"seed":5}"#,
    )
    .unwrap();
    let path = out(dir.path(), "custom.csv");
    assert_eq!(
        run(&[
            "custom",
            "--spec",
            &spec_path,
            "--out",
            &path,
            "--deterministic"
        ]),
        0
    );
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("16,-inf,0.3,"));
}

#[test]
fn validation_errors_exit_one() {
    assert_eq!(run(&["fig3", "--trials", "99"]), 1);
    assert_eq!(run(&["fig3", "--prior", "1.5"]), 1);
    assert_eq!(run(&["fig3", "--snr-db", "nope"]), 1);
    assert_eq!(run(&["roc", "--mode", "full-interval"]), 1);
    assert_eq!(
        run(&[
            "dettheorem",
            "--m",
            "30",
            "--trials",
            "100",
            "--reference-trials",
            "100"
        ]),
        1
    );
    assert_eq!(run(&["frobnicate"]), 1);
    assert_eq!(run(&["fig3", "--threads", "0"]), 1);
}

#[test]
fn runtime_errors_exit_two_and_leave_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir/out.csv");
    let code = run(&[
        "fig3",
        "--snr-db",
        "0",
        "--trials",
        "100",
        "--out",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(!missing.exists());
}

#[test]
fn help_and_version() {
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["fig3", "--help"]), 0);
    assert_eq!(run(&["--version"]), 0);
}
