//! End-to-end tests driving the `flowdec` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(path: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(path)
        .display()
        .to_string()
}

fn flowdec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowdec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn region_prints_the_scheme_constraints() {
    let out = flowdec(&[
        "region",
        &fixture("diamond.flows"),
        "-d",
        "5",
        "-L",
        "({3,4},{},{2},{1})",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("R{2} < I(X{4};Y5|X{3})"), "{text}");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn region_without_partition_prints_the_outer_bound() {
    let out = flowdec(&["region", &fixture("diamond.flows"), "-d", "5"]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "R{1} < I(X{1,2,3};Y5|X{4})\n\
         R{2} < I(X{2,4};Y5|X{1,3})\n\
         R{1,2} < I(X{1,2,3,4};Y5)\n"
    );
}

#[test]
fn region_annotation_adds_side_information_variant() {
    let out = flowdec(&[
        "region",
        &fixture("sfd.flows"),
        "-d",
        "3",
        "-L",
        "({1},{2})",
        "--annotate",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("R{1} < I(X{1};Y3)"), "{text}");
    assert!(
        text.contains("# with side information: R{1} < I(X{1};Y3|X{2})"),
        "{text}"
    );
}

#[test]
fn shift_advances_and_fixes_points() {
    let advanced = flowdec(&[
        "shift",
        &fixture("diamond.flows"),
        "-d",
        "5",
        "-L",
        "({3},{},{4},{1,2})",
        "-S",
        "{2}",
    ]);
    assert!(advanced.status.success());
    assert_eq!(stdout(&advanced), "({3},{},{},{1,4},{2})\n");

    let fixed = flowdec(&[
        "shift",
        &fixture("diamond.flows"),
        "-d",
        "5",
        "-L",
        "({3},{},{},{1,4},{2})",
        "-S",
        "{2}",
    ]);
    assert!(fixed.status.success());
    assert_eq!(stdout(&fixed), "({3},{},{},{1,4},{2})\n");
}

#[test]
fn validate_reports_violations_with_exit_one() {
    let dir = std::env::temp_dir().join("flowdec-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.flows");
    std::fs::write(
        &bad,
        "flow 1 -> 4 : {1} k=1 ; {2} k=1 ; {2} k=inf\n",
    )
    .unwrap();
    let out = flowdec(&["validate", &bad.display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("repeated across hop sets"), "{err}");

    let ok = flowdec(&["validate", &fixture("diamond.flows")]);
    assert!(ok.status.success());
    assert!(stdout(&ok).contains("valid"));
}

#[test]
fn usage_errors_exit_two() {
    let out = flowdec(&["region"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn derive_lists_virtual_structure() {
    let out = flowdec(&[
        "derive",
        &fixture("diamond.flows"),
        "-d",
        "5",
        "-L",
        "({3,4},{},{2},{1})",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("v(2) = {4}"), "{text}");
    assert!(text.contains("decode blocks: 1: b-3, 2: b-1"), "{text}");
    assert!(text.contains("layer 0 (block b-0): fresh {3,4}, known {}"));
    assert!(text.contains("complete: true"));
}

#[test]
fn cover_prints_trace_and_terminal_region() {
    let out = flowdec(&[
        "cover",
        &fixture("diamond.flows"),
        "-d",
        "5",
        "--channel",
        &fixture("diamond-binary.channel.json"),
        "-R",
        "1:0.01,2:0.01",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("step 0:"), "{text}");
    assert!(text.contains("R{1,2} <"), "{text}");
}

#[test]
fn cover_rejects_rates_outside_the_outer_region() {
    let out = flowdec(&[
        "cover",
        &fixture("diamond.flows"),
        "-d",
        "5",
        "--channel",
        &fixture("diamond-binary.channel.json"),
        "-R",
        "1:9.0,2:9.0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside the outer region"));
}

#[test]
fn verify_is_deterministic_and_covers() {
    let args = [
        "verify",
        &fixture("diamond.flows"),
        "-d",
        "5",
        "--channel",
        &fixture("diamond-binary.channel.json"),
        "--samples",
        "25",
        "--alpha",
        "0.99",
        "--seed",
        "7",
    ];
    let first = flowdec(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = flowdec(&args);
    assert_eq!(first.stdout, second.stdout, "output must be byte-identical");

    let text = stdout(&first);
    assert!(text.starts_with("sample_index,rate_1,rate_2,covered,covering_scheme,steps"));
    assert!(text.trim_end().ends_with("# coverage=1.000000"), "{text}");
    assert_eq!(text.lines().count(), 1 + 25 + 1);
}

#[test]
fn verify_with_no_samples_reports_nan() {
    let out = flowdec(&[
        "verify",
        &fixture("diamond.flows"),
        "-d",
        "5",
        "--channel",
        &fixture("diamond-binary.channel.json"),
        "--samples",
        "0",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2);
    assert!(text.ends_with("# coverage=NaN\n"));
}

#[test]
fn verify_beyond_the_boundary_flags_exterior_points() {
    let out = flowdec(&[
        "verify",
        &fixture("diamond.flows"),
        "-d",
        "5",
        "--channel",
        &fixture("diamond-binary.channel.json"),
        "--samples",
        "10",
        "--alpha",
        "1.01",
        "--seed",
        "7",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("outside_outer_region"), "{text}");
    assert!(text.trim_end().ends_with("# coverage=0.000000"), "{text}");
}

#[test]
fn fixtures_run_all_passes() {
    let out = flowdec(&["fixtures", "--run", "all"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("pass diamond-s1: region rendering"));
    assert!(!text.contains("FAIL"), "{text}");

    let single = flowdec(&["fixtures", "--run", "marc3-scenario2"]);
    assert!(single.status.success());
    assert!(stdout(&single).contains("chain violator-transfer"));

    let unknown = flowdec(&["fixtures", "--run", "nope"]);
    assert_eq!(unknown.status.code(), Some(1));
}
