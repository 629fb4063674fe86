//! Runs one experiment suite from an inline configuration and writes its
//! reports under a temporary directory.

use refined_sobolev::harness::{parse_config, run_and_write, RowVerdict};

const CONFIG: &str = r#"
suite = "sewing"
seed = 11
cutoffs = [16, 32]
bundles = ["twisted", "rotation"]
samples = 20
"#;

fn main() -> refined_sobolev::Result<()> {
    let exp = parse_config(CONFIG)?;
    let root = std::env::temp_dir().join("refsob-example");
    let (report, dir) = run_and_write(&exp, &root)?;
    for row in &report.rows {
        let mark = if row.verdict == RowVerdict::Pass { " " } else { "!" };
        println!("{mark} N={:<3} {:<24} {:<40} {:.4e}", row.resolution, row.quantity, row.parameters, row.value);
    }
    println!("config hash {}, reports in {}", report.config_hash, dir.display());
    Ok(())
}
