//! End-to-end CLI tests driving the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cct(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cct"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cct-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const BASE_SPEC: &str = "\
[carrier]
schema = ipv4
count = 300
iat = exponential:5000
seed = 7

[embedding]
kind = single
pattern = P7
settings = default

[message]
kind = random
bits = 300
seed = 99

[channel]
seed = 3

[output]
report = report.txt
carrier = overt.cct
";

#[test]
fn catalog_stats_headline() {
    let dir = workdir("stats");
    let out = cct(&["catalog", "--stats"], &dir);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.starts_with("patterns: 11, techniques: 109, top4: 69.7%"),
        "{text}"
    );
    assert!(text.contains("P7    Reserved/Unused        24"));
}

#[test]
fn catalog_export_import_identity() {
    let dir = workdir("export");
    for format in ["markup", "tabular"] {
        let file = format!("catalog.{format}");
        let out = cct(&["catalog", "--export", &file, "--format", format], &dir);
        assert!(out.status.success(), "{}", stdout(&out));
        let out = cct(&["catalog", "--import", &file], &dir);
        assert!(out.status.success());
        assert!(stdout(&out).contains("imported 15 records"));
    }
}

#[test]
fn catalog_pattern_row() {
    let dir = workdir("row");
    let out = cct(&["catalog", "--pattern", "P6b"], &dir);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("name: Least Significant Bit"));
    assert!(text.contains("noise: noisy"));
    assert!(text.contains("elimination: TN"));
}

#[test]
fn run_reports_zero_ber_and_is_byte_deterministic() {
    let dir = workdir("run");
    std::fs::write(dir.join("spec.ini"), BASE_SPEC).unwrap();
    let out = cct(&["run", "spec.ini"], &dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("ber: 0.000000"));
    let first = std::fs::read(dir.join("report.txt")).unwrap();
    let out = cct(&["run", "spec.ini"], &dir);
    assert!(out.status.success());
    let second = std::fs::read(dir.join("report.txt")).unwrap();
    assert_eq!(
        first, second,
        "identical invocations must write identical reports"
    );
}

#[test]
fn run_unknown_schema_exits_with_config_error() {
    let dir = workdir("badschema");
    let spec = BASE_SPEC.replace("schema = ipv4", "schema = sctp");
    std::fs::write(dir.join("spec.ini"), spec).unwrap();
    let out = cct(&["run", "spec.ini"], &dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown schema"));
}

#[test]
fn run_capacity_error_exits_three() {
    let dir = workdir("capacity");
    let spec = BASE_SPEC
        .replace("count = 300", "count = 2")
        .replace("pattern = P7", "pattern = P9");
    std::fs::write(dir.join("spec.ini"), spec).unwrap();
    let out = cct(&["run", "spec.ini"], &dir);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_parallel_and_sequential_combinations() {
    let dir = workdir("combos");
    for kind in ["parallel", "sequential"] {
        let spec = BASE_SPEC
            .replace(
                "kind = single\npattern = P7",
                &format!("kind = {kind}\npatterns = P5 ipv4, P3 ipv4"),
            )
            .replace("count = 300", "count = 64")
            .replace("bits = 300", "bits = 512");
        std::fs::write(dir.join("spec.ini"), spec).unwrap();
        let out = cct(&["run", "spec.ini"], &dir);
        assert!(
            out.status.success(),
            "{kind}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report = stdout(&out);
        assert!(report.contains("ber: 0.000000"), "{kind}: {report}");
        assert!(report.contains(&format!("embedding: {kind} ")), "{report}");
    }
}

#[test]
fn run_with_warden_randomizes_extraction() {
    let dir = workdir("warden");
    let spec = format!("{BASE_SPEC}\n[warden]\nrules = default-stateless\n")
        .replace("count = 300", "count = 1200")
        .replace("bits = 300", "bits = 1200");
    std::fs::write(dir.join("spec.ini"), spec).unwrap();
    let out = cct(&["run", "spec.ini"], &dir);
    assert!(out.status.success());
    let report = stdout(&out);
    let ber_line = report
        .lines()
        .find(|l| l.starts_with("ber: "))
        .expect("report carries a ber line");
    let ber: f64 = ber_line["ber: ".len()..].parse().unwrap();
    assert!((ber - 0.5).abs() <= 0.05, "{ber_line}");
}

#[test]
fn hopping_run_with_wrong_key_yields_half_ber() {
    let dir = workdir("hop");
    let hop = "\
prf hmac-sha256
key 4242424242424242424242424242424242424242424242424242424242424242
modulus 2
pattern P5 ipv4
pattern P6.b ipv4
";
    std::fs::write(dir.join("hop.conf"), hop).unwrap();
    std::fs::write(dir.join("hop-wrong.conf"), hop.replace("4242", "4343")).unwrap();
    let spec = "\
[carrier]
schema = ipv4
count = 400
iat = constant:2000
seed = 7

[embedding]
kind = hopping
hopping-config = hop.conf

[message]
kind = random
bits = 1500
seed = 99

[channel]
seed = 3

[output]
trace = covert.cct
report = report.txt
";
    std::fs::write(dir.join("spec.ini"), spec).unwrap();
    let out = cct(&["run", "spec.ini"], &dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("ber: 0.000000"));
    let report = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("embedding: hopping P5,P6.b mod 2"));

    // Same spec, but the receiver holds the wrong key: the schedule
    // desynchronizes and extraction decodes noise.
    let wrong = spec.replace(
        "hopping-config = hop.conf",
        "hopping-config = hop.conf\nreceiver-hopping-config = hop-wrong.conf",
    );
    std::fs::write(dir.join("spec-wrong.ini"), wrong).unwrap();
    let out = cct(&["run", "spec-wrong.ini"], &dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = stdout(&out);
    let ber: f64 = report.lines().find(|l| l.starts_with("ber: ")).unwrap()["ber: ".len()..]
        .parse()
        .unwrap();
    assert!((ber - 0.5).abs() <= 0.05, "wrong-key BER {ber}");
}

#[test]
fn calibrate_is_deterministic_and_rejects_empty() {
    let dir = workdir("calibrate");
    std::fs::write(dir.join("spec.ini"), BASE_SPEC).unwrap();
    assert!(cct(&["run", "spec.ini"], &dir).status.success());
    let out = cct(
        &["calibrate", "overt.cct", "--output", "thresholds.txt"],
        &dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = std::fs::read(dir.join("thresholds.txt")).unwrap();
    assert!(cct(
        &["calibrate", "overt.cct", "--output", "thresholds.txt"],
        &dir
    )
    .status
    .success());
    let second = std::fs::read(dir.join("thresholds.txt")).unwrap();
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("iat-entropy-baseline: "));
    assert!(!text.contains("iat-entropy-baseline: inf"));

    let out = cct(&["calibrate", "missing.cct", "--output", "x.txt"], &dir);
    assert!(!out.status.success());
}

#[test]
fn settings_validate_and_list() {
    let dir = workdir("settings");
    let out = cct(&["settings", "list"], &dir);
    assert!(out.status.success());
    let listing = stdout(&out);
    assert!(listing.contains("[pattern P5]"));
    assert!(listing.contains("settings.ipv4_like.Offset=32"));
    std::fs::write(dir.join("mine.settings"), &listing).unwrap();
    let out = cct(&["settings", "validate", "mine.settings"], &dir);
    assert!(out.status.success());
    assert!(stdout(&out).contains("ok: 44 entries"));

    std::fs::write(
        dir.join("bad.settings"),
        "[pattern P5]\nsettings.ipv4.Len=999\n",
    )
    .unwrap();
    let out = cct(&["settings", "validate", "bad.settings"], &dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trace_inspect_and_convert() {
    let dir = workdir("trace");
    std::fs::write(dir.join("spec.ini"), BASE_SPEC).unwrap();
    assert!(cct(&["run", "spec.ini"], &dir).status.success());
    let out = cct(&["trace", "inspect", "overt.cct"], &dir);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("schema: ipv4_like"));
    assert!(text.contains("pdus: 300"));
    assert!(text.contains("violations: 0"));
    let out = cct(&["trace", "convert", "overt.cct", "overt.txt"], &dir);
    assert!(out.status.success());
    let dump = std::fs::read_to_string(dir.join("overt.txt")).unwrap();
    assert!(dump.lines().count() > 300);
    assert!(dump.contains("pdu seq=0 ts=0"));
}

#[test]
fn custom_schema_file_reaches_the_pipeline() {
    let dir = workdir("schema");
    let schema = "\
schema custom64
bits 64
field ident offset 0 len 16 kind random
field csum offset 16 len 16 kind checksum cover 0 to 64
field ttl offset 32 len 8 kind decrementing min 0 max 255 init 64
field pad offset 40 len 24 kind padding
options ids 1..16 count 0..4 payload 8
";
    std::fs::write(dir.join("custom.schema"), schema).unwrap();
    let settings = "[pattern P5]\nsettings.custom64.Offset=0\nsettings.custom64.Len=16\n";
    std::fs::write(dir.join("custom.settings"), settings).unwrap();
    let spec = "\
[carrier]
schema = custom64
schema-file = custom.schema
count = 50
iat = constant:1000
seed = 1

[embedding]
kind = single
pattern = P5
settings = custom.settings

[message]
kind = hex
hex = beefbeefbeef

[channel]
seed = 0

[output]
report = report.txt
";
    std::fs::write(dir.join("spec.ini"), spec).unwrap();
    let out = cct(&["run", "spec.ini"], &dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("ber: 0.000000"));
    assert!(stdout(&out).contains("schema: custom64"));
}
