use super::run_cli;
use serde_json::Value;
use std::io::Write;
use std::path::PathBuf;
use tempfile::NamedTempFile;

struct Run {
    code: u8,
    out: String,
    err: String,
}

fn run_with(args: &[&str], budget: Option<&str>) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("dft").chain(args.iter().copied());
    let code = run_cli(argv, budget.map(str::to_owned), &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    run_with(args, None)
}

fn json(r: &Run) -> Value {
    assert_eq!(r.code, 0, "stderr: {}", r.err);
    serde_json::from_str(&r.out).unwrap()
}

fn model(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn path(f: &NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

fn benchmark(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "benchmarks", &format!("{name}.dft")]
        .iter()
        .collect();
    p.to_str().unwrap().to_owned()
}

const AND_PAIR: &str = "toplevel \"T\";\n\"T\" and \"A\" \"B\";\n\"A\" lambda=0.5;\n\"B\" lambda=0.25;\n";

#[test]
fn help_is_success() {
    let r = run(&["--help"]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains("verify-rules"));
    assert!(r.err.is_empty());
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let r = run(&["frobnicate"]);
    assert_eq!(r.code, 2);
    assert!(r.out.is_empty());
}

#[test]
fn missing_file_is_usage_error() {
    let r = run(&["parse", "/nonexistent/model.dft"]);
    assert_eq!(r.code, 2);
    assert!(r.err.starts_with("dft: "), "{}", r.err);
}

#[test]
fn syntax_error_is_usage_error() {
    let f = model("toplevel \"T\"\n\"T\" and;");
    assert_eq!(run(&["parse", path(&f)]).code, 2);
}

#[test]
fn invalid_model_is_analysis_error() {
    let f = model("toplevel \"T\";\n\"T\" or \"A\";\n\"A\" lambda=-1;\n");
    let r = run(&["parse", path(&f)]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("non-positive rate"), "{}", r.err);
}

#[test]
fn parse_counts_nodes() {
    let f = model(AND_PAIR);
    let v = json(&run(&["--format", "json", "parse", path(&f)]));
    assert_eq!(v["basic_events"], 2);
    assert_eq!(v["gates"], 1);
    assert_eq!(v["toplevel"], "T");
}

#[test]
fn negative_time_is_usage_error() {
    let f = model(AND_PAIR);
    assert_eq!(run(&["prob", path(&f), "--time", "-1"]).code, 2);
}

#[test]
fn prob_matches_closed_form() {
    let f = model(AND_PAIR);
    let v = json(&run(&["--format", "json", "prob", path(&f), "--time", "2"]));
    let p = v["probability"].as_f64().unwrap();
    let expected = (1.0 - (-1.0f64).exp()) * (1.0 - (-0.5f64).exp());
    assert!((p - expected).abs() < 1e-9, "{p} vs {expected}");
}

#[test]
fn mttf_matches_closed_form() {
    let f = model(AND_PAIR);
    let v = json(&run(&["--format", "json", "mttf", path(&f)]));
    let m = v["mttf"].as_f64().unwrap();
    let expected = 1.0 / 0.5 + 1.0 / 0.25 - 1.0 / 0.75;
    assert!((m - expected).abs() < 1e-9, "{m} vs {expected}");
}

#[test]
fn state_budget_is_enforced() {
    let f = model(AND_PAIR);
    let args = ["prob", path(&f), "--time", "1"];
    assert_eq!(run_with(&args, Some("2")).code, 1);
    assert_eq!(run_with(&args, Some("many")).code, 2);
    assert_eq!(run_with(&args, Some("100")).code, 0);
}

#[test]
fn reduce_emits_sop() {
    let f = model(AND_PAIR);
    let r = run(&["reduce", path(&f), "--emit", "sop"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(r.out.trim(), "A . B");
}

#[test]
fn cutseq_reports_sequences() {
    let f = model("toplevel \"T\";\n\"T\" or \"A\" \"B\";\n\"A\" lambda=1;\n\"B\" lambda=1;\n");
    let v = json(&run(&["--format", "json", "cutseq", path(&f)]));
    assert_eq!(v["cut_summary"]["sequences"].as_array().unwrap().len(), 2);
}

#[test]
fn mc_is_deterministic() {
    let f = model(AND_PAIR);
    let args = ["--format", "json", "mc", path(&f), "--time", "2", "--trials", "5000", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.code, 0, "{}", a.err);
    assert_eq!(a.out, b.out);
}

#[test]
fn verify_rules_passes() {
    let r = run(&["verify-rules", "--max-vars", "3"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.trim_end().ends_with(" 0 failures"), "{}", r.out);
}

#[test]
fn equiv_exit_codes() {
    assert_eq!(run(&["equiv", "A . B", "B . A"]).code, 0);
    assert_eq!(run(&["equiv", "A + B", "A . B"]).code, 1);
    assert_eq!(run(&["equiv", "A . (", "A"]).code, 2);
}

#[test]
fn equiv_reads_model_files() {
    let f = model(AND_PAIR);
    assert_eq!(run(&["equiv", path(&f), "B . A"]).code, 0);
}

#[test]
fn unknown_benchmark_is_usage_error() {
    assert_eq!(run(&["bench", "--model", "nope", "--time", "10"]).code, 2);
}

#[test]
fn bench_json_is_byte_stable_without_timings() {
    let args = ["bench", "--model", "ahrs", "--time", "10", "--format", "json", "--no-timings"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.code, 0, "{}", a.err);
    assert_eq!(a.out, b.out);
    assert!(!a.out.contains("wall_time"));
    let v: Value = serde_json::from_str(&a.out).unwrap();
    assert_eq!(v["entries"][0]["model"], "ahrs");
}

#[test]
fn benchmark_files_parse() {
    for name in ["cpand", "ahrs", "mcs", "hecs", "hcas"] {
        let r = run(&["parse", &benchmark(name)]);
        assert_eq!(r.code, 0, "{name}: {}", r.err);
    }
}
