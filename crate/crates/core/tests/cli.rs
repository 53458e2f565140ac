use hardylab::cli::{run, EXIT_INCONCLUSIVE, EXIT_PASS, EXIT_USAGE, EXIT_VIOLATED};
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("hardylab").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn output_is_byte_identical_across_runs() {
    for args in [
        &["fuzz", "--seed", "7", "--count", "12"][..],
        &["fuzz", "--seed", "3", "--count", "6", "--monotone"],
        &["sweep", "--family", "step", "-p", "3", "--format", "csv"],
        &["norm", "-f", "chi(0,1)+pow(-2,1,inf)", "-p", "2.5"],
    ] {
        let a = call(args);
        let b = call(args);
        assert_eq!(a.0, EXIT_PASS, "{args:?}: {}", a.2);
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn step_sweep_at_two_extrapolates_to_one() {
    let (code, out, err) = call(&["sweep", "--family", "step", "-p", "2"]);
    assert_eq!(code, EXIT_PASS, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    let limit = v["limit"].as_f64().unwrap();
    assert!((limit - 1.0).abs() < 1e-6, "{limit}");
}

#[test]
fn csv_sweep_has_header_and_rows() {
    let (code, out, _) = call(&["sweep", "--family", "zero", "-p", "1.5", "--grid", "0.1,0.01,0.001", "--format", "csv"]);
    assert_eq!(code, EXIT_PASS);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "eps,norm_H,norm_H_err,norm_Hstar,norm_Hstar_err,ratio,sandwich_lo,sandwich_hi");
    assert_eq!(lines.len(), 4);
}

#[test]
fn fuzz_corpora_hold() {
    let (code, out, err) = call(&["fuzz", "--seed", "0", "--count", "30"]);
    assert_eq!(code, EXIT_PASS, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verdicts"]["Violated"], 0);
    let (code, _, err) = call(&["fuzz", "--seed", "100", "--count", "20", "--monotone"]);
    assert_eq!(code, EXIT_PASS, "{err}");
}

#[test]
fn verify_reports_verdicts() {
    let (code, out, err) = call(&["verify", "thm2", "-f", "chi(0,1)", "-p", "3"]);
    assert_eq!(code, EXIT_PASS, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verdict_lower"], "Holds");
    assert!(![EXIT_VIOLATED, EXIT_INCONCLUSIVE].contains(&code));
}

#[test]
fn domain_errors_exit_with_usage_code() {
    // nonincreasing requirement
    let (code, _, err) = call(&["verify", "thm2", "-f", "chi(1,2)", "-p", "2"]);
    assert_eq!(code, EXIT_USAGE, "{err}");
    let (code, _, _) = call(&["verify", "thm1", "-f", "chi(0,1)", "-p", "0.5"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = call(&["norm", "-f", "chi(0,1", "-p", "2"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = call(&["bogus"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn duality_needs_a_representable_mollifier() {
    // stepped but polynomial: mollified automatically
    let (code, out, err) = call(&["duality", "-f", "chi(0,1)+chi(0,2)", "-p", "2"]);
    assert_eq!(code, EXIT_PASS, "{err}");
    assert!(out.contains("norm_gaps") || out.contains("verdict"), "{out}");
    // stepped with a non-polynomial piece cannot be turned into an atom function
    let (code, _, _) = call(&["duality", "-f", "2*chi(0,1)+pow(-2,1,inf)", "-p", "2"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_PASS);
    assert!(out.contains("sweep"));
}
