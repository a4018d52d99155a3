//! End-to-end tests of the `qk` binary: exit codes, output formats,
//! determinism, and the compile/run/trace flows over the sample programs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qk"))
        .args(args)
        .output()
        .expect("qk runs")
}

fn sample(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../samples")
        .join(name);
    path.to_str().unwrap().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn check_accepts_the_samples() {
    for name in ["bell.qk", "fullstack.qk", "minimal.qk"] {
        let out = qk(&["check", &sample(name)]);
        assert!(out.status.success(), "{name}: {}", stderr(&out));
    }
}

#[test]
fn check_rejects_duplicate_targets_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.qk");
    std::fs::write(
        &path,
        "@gateset cliffords\nallocate q:\n  cx q q\nmeasure done\n",
    )
    .unwrap();
    let out = qk(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("duplicate target"));
}

#[test]
fn missing_file_exits_2() {
    let out = qk(&["check", "/no/such/file.qk"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gateset_flag_overrides_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toyish.qk");
    std::fs::write(&path, "allocate q:\n  flip q\nmeasure done\n").unwrap();
    // No header at all: exit 1 with a hint.
    let out = qk(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--gateset"));
    let out = qk(&["check", path.to_str().unwrap(), "--gateset", "toy"]);
    assert!(out.status.success());
    let out = qk(&["check", path.to_str().unwrap(), "--gateset", "cliffords"]);
    assert_eq!(out.status.code(), Some(1), "flip is not a clifford");
}

#[test]
fn compile_bell_through_rep3bit_matches_the_expected_listing() {
    let out = qk(&[
        "compile",
        &sample("bell.qk"),
        "--pipeline",
        "rep3bit",
        "--compact",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let expected = "\
@gateset cliffords
allocate q1.0:
  allocate q1.1:
    allocate q1.2:
      allocate q2.0:
        allocate q2.1:
          allocate q2.2:
            h q2.0; h q2.1; h q2.2
            cx q2.0 q1.0; cx q2.1 q1.1; cx q2.2 q1.2
          measure done
        measure done
      measure rep3bit.done
    measure done
  measure done
measure rep3bit.repeat_until_zero
";
    assert_eq!(text, expected);
}

#[test]
fn compiled_output_reparses_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("compiled.qk");
    let out = qk(&[
        "compile",
        &sample("fullstack.qk"),
        "--pipeline",
        "toy2cliffords,rep3bit,rep3phase,h2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    // Re-check through the CLI: the output must validate against the
    // pipeline's final gate set (named in its header).
    let out = qk(&["check", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("@gateset trapped-ion\n"));

    // The manifest landed next to it and lists the wrapping chains.
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("compiled.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(
        manifest["pipeline"],
        serde_json::json!(["toy2cliffords", "rep3bit", "rep3phase", "h2"])
    );
    let callbacks = manifest["callbacks"].as_array().unwrap();
    let fix = callbacks
        .iter()
        .find(|c| c["original"] == "fix")
        .expect("fix is in the manifest");
    assert_eq!(
        fix["wrapped_by"],
        serde_json::json!(["h2", "rep3phase", "rep3bit", "toy2cliffords"])
    );
    assert_eq!(fix["name"], "h2.rep3phase.rep3bit.toy2cliffords.fix");
}

#[test]
fn empty_pipeline_echoes_canonical_form() {
    let out = qk(&["compile", &sample("minimal.qk")]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "@gateset cliffords\nallocate q:\nmeasure done\n"
    );
}

#[test]
fn unknown_pass_exits_1() {
    let out = qk(&["compile", &sample("bell.qk"), "--pipeline", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown pass"));
}

#[test]
fn run_minimal_yields_all_zero_histogram() {
    let out = qk(&[
        "run",
        &sample("minimal.qk"),
        "--shots",
        "10",
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let hist: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(hist, serde_json::json!({ "0": 10 }));
}

#[test]
fn run_is_bit_identical_across_invocations() {
    let args = [
        "run",
        &sample("bell.qk"),
        "--pipeline",
        "rep3bit",
        "--shots",
        "200",
        "--seed",
        "42",
        "--format",
        "csv",
    ];
    let first = qk(&args);
    let second = qk(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    assert!(text.starts_with("bitstring,count\n"));
    // Logical outcomes survive compilation: 0 followed by 1s.
    for line in text.lines().skip(1) {
        let (bits, _) = line.split_once(',').unwrap();
        assert!(bits.starts_with('0') && bits[1..].chars().all(|c| c == '1'));
    }
}

#[test]
fn run_with_threads_matches_single_thread() {
    let base = [
        "run",
        &sample("fullstack.qk"),
        "--pipeline",
        "toy2cliffords,rep3bit",
        "--shots",
        "100",
        "--seed",
        "5",
        "--format",
        "json",
    ];
    let single = qk(&base);
    let mut with_threads: Vec<&str> = base.to_vec();
    with_threads.extend(["--threads", "4"]);
    let multi = qk(&with_threads);
    assert!(single.status.success() && multi.status.success());
    assert_eq!(single.stdout, multi.stdout);
}

#[test]
fn compiled_file_runs_standalone_and_matches_the_pipeline_run() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("encoded.qk");
    let compile = qk(&[
        "compile",
        &sample("fullstack.qk"),
        "--pipeline",
        "toy2cliffords,rep3bit,rep3phase,h2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(compile.status.success(), "{}", stderr(&compile));

    // Running the compiled file rebuilds the wrapped callbacks by name.
    let from_file = qk(&[
        "run",
        out_path.to_str().unwrap(),
        "--shots",
        "150",
        "--seed",
        "21",
        "--format",
        "json",
    ]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));

    // Same histogram as compiling and running in one invocation.
    let in_one = qk(&[
        "run",
        &sample("fullstack.qk"),
        "--pipeline",
        "toy2cliffords,rep3bit,rep3phase,h2",
        "--shots",
        "150",
        "--seed",
        "21",
        "--format",
        "json",
    ]);
    assert!(in_one.status.success());
    assert_eq!(from_file.stdout, in_one.stdout);
}

#[test]
fn run_rejects_unregistered_callbacks_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("custom.qk");
    std::fs::write(
        &path,
        "@gateset cliffords\nallocate q:\nmeasure my_decoder\n",
    )
    .unwrap();
    let out = qk(&["run", path.to_str().unwrap(), "--shots", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("my_decoder"));
}

#[test]
fn run_with_noise_shifts_the_histogram() {
    let out = qk(&[
        "run",
        &sample("minimal.qk"),
        "--shots",
        "1000",
        "--noise",
        "0,0,0,1.0",
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let hist: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(hist, serde_json::json!({ "1": 1000 }));
    let out = qk(&["run", &sample("minimal.qk"), "--noise", "0,0,0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn trace_minimal_is_one_end_done_record() {
    let out = qk(&["trace", &sample("minimal.qk"), "--seed", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    let record: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(record["rule"], "EndDone");
    assert_eq!(record["callback"], "done");
    assert_eq!(record["bit"], 0);
    assert_eq!(record["mstack"], "0");
}

#[test]
fn trace_compiled_bell_shows_decoded_stacks() {
    let out = qk(&[
        "trace",
        &sample("bell.qk"),
        "--pipeline",
        "rep3bit",
        "--seed",
        "11",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let records: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // Six measurement records per iteration, and after the wrapped done
    // fires the stack is back to one logical bit.
    let wrapped_done: Vec<&serde_json::Value> = records
        .iter()
        .filter(|r| r["callback"] == "rep3bit.done")
        .collect();
    assert!(!wrapped_done.is_empty());
    for r in &wrapped_done {
        assert_eq!(r["mstack"].as_str().unwrap().len(), 1);
    }
    let ends: usize = records
        .iter()
        .filter(|r| r["rule"] == "EndDone" || r["rule"] == "EndContinue")
        .count();
    assert_eq!(ends % 6, 0, "six physical measurements per iteration");
}

#[test]
fn run_accepts_a_custom_gateset_json() {
    let dir = tempfile::tempdir().unwrap();
    let set_path: PathBuf = dir.path().join("flipper.json");
    std::fs::write(
        &set_path,
        r#"{"name": "flipper", "gates": [
            {"name": "not", "arity": 1, "matrix": [[[0,0],[1,0]],[[1,0],[0,0]]]}
        ]}"#,
    )
    .unwrap();
    let prog_path = dir.path().join("prog.qk");
    std::fs::write(&prog_path, "allocate q:\n  not q\nmeasure done\n").unwrap();
    let out = qk(&[
        "run",
        prog_path.to_str().unwrap(),
        "--gateset",
        set_path.to_str().unwrap(),
        "--shots",
        "5",
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let hist: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(hist, serde_json::json!({ "1": 5 }));
}
