//! Run a scenario file the way the `mis sweep` subcommand does and print the CSV.
//!
//! `cargo run --example sweep_from_config -- configs/power_sweep.toml`

use std::path::PathBuf;

use mis_core::experiment::run_sweep;
use mis_core::output::csv_string;
use mis_core::scenario::Scenario;

const FALLBACK: &str = r#"
schemes = ["bcd", "single", "qsearch"]

[sweep]
axis = "power-dbm"
values = [24.0, 28.0, 32.0]
"#;

fn main() -> mis_core::Result<()> {
    let scenario = match std::env::args().nth(1) {
        Some(path) => Scenario::load(&PathBuf::from(path))?,
        None => Scenario::from_toml_str(FALLBACK)?,
    };
    let rows = run_sweep(&scenario, 0)?;
    print!("{}", csv_string(&rows));
    Ok(())
}
