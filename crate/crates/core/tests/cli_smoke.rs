//! The `refsob` binary: listing, describing and running a small suite.

use std::process::Command;

fn refsob() -> Command {
    Command::new(env!("CARGO_BIN_EXE_refsob"))
}

#[test]
fn list_and_describe() {
    let out = refsob().arg("list-suites").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.contains("fredholm-index"));

    let out = refsob().args(["describe", "sewing"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("suite = \"sewing\""));

    let out = refsob().args(["describe", "nothing"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_reports_under_the_env_root() {
    let root = std::env::temp_dir().join(format!("refsob-cli-{}", std::process::id()));
    let cfg = root.join("index.toml");
    std::fs::create_dir_all(&root).unwrap();
    std::fs::write(&cfg, "suite = \"fredholm-index\"\ncutoffs = [16, 32]\noutput_dir = \"idx\"\n").unwrap();
    let out = refsob().arg("run").arg(&cfg).env("HSPHI_OUTPUT_ROOT", root.join("out")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(root.join("out/idx/rows.csv")).unwrap();
    assert!(csv.starts_with(refined_sobolev::harness::CSV_HEADER));
    assert!(root.join("out/idx/report.json").exists() && root.join("out/idx/trend.svg").exists());

    // an unattainable tolerance gives exit status 1
    std::fs::write(&cfg, "suite = \"sharpness\"\ncutoffs = [64, 128]\n").unwrap();
    let out = refsob().arg("run").arg(&cfg).arg("--output-root").arg(root.join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(&cfg, "suite = \"sharpness\"\ncutoffs = []\n").unwrap();
    let out = refsob().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&root).ok();
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let exp = refined_sobolev::harness::load_config(&path).unwrap();
        assert_eq!(exp, exp.suite.defaults(), "{}", path.display());
        count += 1;
    }
    assert_eq!(count, 12);
}
