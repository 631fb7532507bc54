//! Runs a scenario description in-process and prints its assertions.
//! Usage: `cargo run --example run_scenario [scenario.json]`.

use std::path::PathBuf;

use graph_heat_control::report::to_json;
use graph_heat_control::scenario::{run_scenario, Scenario};

fn main() -> graph_heat_control::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/k2_control.json")
    });
    let outcome = run_scenario(&Scenario::load(&path)?, None, false)?;
    for a in &outcome.summary.assertions {
        println!("{:<6} {}", if a.passed { "ok" } else { "FAILED" }, a.name);
    }
    for (name, _) in &outcome.csv {
        println!("detail table: {name}");
    }
    println!("{}", to_json(&outcome.summary)?);
    Ok(())
}
