use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use shaploc::config::{parse_config, table2_preset};
use shaploc::report::COLUMNS;

fn shaploc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shaploc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const GOOD: &str = "\
seed = 7

[experiment.indep]
sigma1 = 1.5
sigma2 = 1.5
attack_type = C
am = 9.95
um = 0.1
trials = 3000

[experiment.corr]
rho = -0.5
sigma1 = 2
sigma2 = 2
attack_type = A
am = 1
trials = 3000
";

#[test]
fn run_writes_one_row_per_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "suite.cfg", GOOD);
    let out = dir.path().join("out.csv");
    let o = shaploc(&[
        "run",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--no-timestamp",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# seed = 7");
    assert_eq!(lines[1], COLUMNS.join(","));
    assert_eq!(lines.len(), 4);
    let indep: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(indep.len(), COLUMNS.len());
    assert_eq!(indep[0], "indep");
    assert_eq!(indep[10], indep[11], "independent rows share Pe");
    assert_eq!(indep[16], "", "no oracle for type C");
    let corr: Vec<&str> = lines[3].split(',').collect();
    assert!(!corr[16].is_empty());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.cfg",
        &GOOD.replace("rho = -0.5", "rho = 1.2"),
    );
    let o = shaploc(&["run", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("correlation out of range"));

    let syntax = write(
        dir.path(),
        "syntax.cfg",
        "seed = 1\n[experiment.a]\nsigma1 = 1\nbroken line\n",
    );
    let o = shaploc(&["run", &syntax]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));

    let o = shaploc(&["run", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_two_and_mark_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[experiment.never]\nsigma1 = 1\nsigma2 = 1\nattack_type = A\nam = 1\ntargets = 2\ntrials = 100\n\n\
                [experiment.fine]\nsigma1 = 1\nsigma2 = 1\nattack_type = A\nam = 3\ntrials = 100\n";
    let cfg = write(dir.path(), "f.cfg", text);
    let o = shaploc(&["run", &cfg, "--no-timestamp"]);
    assert_eq!(o.status.code(), Some(2));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("never,") && rows[0].contains(",FAILED,"));
    assert!(rows[1].starts_with("fine,") && !rows[1].contains("FAILED"));
}

#[test]
fn empty_suite_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.cfg", "# no experiments\nseed = 3\n");
    let o = shaploc(&["run", &cfg, "--no-timestamp"]);
    assert!(o.status.success());
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        format!("# seed = 3\n{}\n", COLUMNS.join(","))
    );
}

#[test]
fn preset_output_is_reproducible() {
    let args = [
        "preset",
        "table2",
        "--trials",
        "2000",
        "--seed",
        "42",
        "--no-timestamp",
    ];
    let a = shaploc(&args);
    let b = shaploc(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 2 + 6);

    let stamped = shaploc(&["preset", "table2", "--trials", "500"]);
    let text = String::from_utf8(stamped.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("# generated = "));
}

#[test]
fn markdown_output() {
    let o = shaploc(&[
        "preset",
        "table1",
        "--trials",
        "500",
        "--format",
        "markdown",
        "--no-timestamp",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("<!-- seed = 0 -->\n| name | rho |"));
    assert_eq!(text.lines().filter(|l| l.starts_with("| t1_")).count(), 12);
}

#[test]
fn format_and_output_come_from_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("result.md");
    let text = format!(
        "format = markdown\noutput = {}\n{}",
        out.display(),
        GOOD.replace("seed = 7\n", "")
    );
    let cfg = write(dir.path(), "s.cfg", &text);
    let o = shaploc(&["run", &cfg, "--no-timestamp"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(out).unwrap().contains("| indep |"));
}

#[test]
fn bench_prints_a_table() {
    let o = shaploc(&["bench", "--max-n", "4", "--reps", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "n,shapley_s,single_s,shapley_ratio,single_ratio"
    );
    assert_eq!(text.lines().count(), 5);
    assert!(!shaploc(&["bench", "--max-n", "25"]).status.success());
}

#[test]
fn canonical_config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let suite = table2_preset(1234, 77);
    let path = write(dir.path(), "canon.cfg", &suite.to_config_string());
    assert_eq!(parse_config(Path::new(&path)).unwrap(), suite);
}
