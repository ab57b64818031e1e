//! A short epsilon sweep on one range, warm-started in increasing epsilon order.

use evsp::cli::{sweep_csv, sweep_range, SocRange};
use evsp::instances::{generate_instance, CostParams, SocPolicy};

fn main() -> evsp::Result<()> {
    let inst = generate_instance(25, 6, SocPolicy::range(20, 80), CostParams::default())?;
    let rows = sweep_range(&inst, SocRange { low: 20, up: 80 }, &[0.01, 0.05, 0.2], 120.0, 200, 0)?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}
