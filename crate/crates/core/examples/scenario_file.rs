//! Loads a scenario file, prints its hash and resolved defaults, and runs
//! the trace experiment into a temporary directory.

use std::path::PathBuf;

use aoi_forge::experiments::{run_trace_experiment, write_trace_bundle, Scenario};

fn main() -> aoi_forge::error::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/default.json"));
    let scenario = Scenario::load(&path)?;
    println!("{} [{}]", scenario.name, scenario.hash());
    println!("{}", serde_json::to_string_pretty(&scenario)?);

    let out = std::env::temp_dir().join(format!("aoi-forge-{}", scenario.hash()));
    std::fs::create_dir_all(&out)?;
    let files = write_trace_bundle(&run_trace_experiment(&scenario)?, &out)?;
    println!("wrote {} to {}", files.join(", "), out.display());
    Ok(())
}
