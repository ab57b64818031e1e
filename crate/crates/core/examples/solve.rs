//! Solves a 30-trip instance with a 5% failure budget and validates the result.
//!
//! ```text
//! RUST_LOG=info cargo run --release --example solve
//! ```

use evsp::bnp::{solve, validate_solution, SolveOptions};
use evsp::instances::{generate_instance, CostParams, SocPolicy};

fn main() -> evsp::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let inst = generate_instance(30, 2, SocPolicy::range(20, 80).with_epsilon(0.05), CostParams::default())?;
    let out = solve(&inst, SolveOptions::default())?;
    let Some(sol) = &out.solution else {
        println!("no solution: {:?}", out.status);
        return Ok(());
    };
    validate_solution(&inst, sol)?;
    println!("{:?}: cost {:.2}, {} vehicles, joint P {:.4}", out.status, sol.cost, sol.fleet_size(), sol.joint_probability());
    println!(
        "root bound {:.2}, gap {:.2}%, {} nodes, {:.2}s",
        out.stats.root_lp_bound, out.stats.gap_pct, out.stats.bb_nodes, out.stats.total_secs
    );
    let graphs = evsp::bnp::build_graphs(&inst);
    for (k, c) in sol.schedules.iter().enumerate() {
        println!("bus {k}: trips {:?}  P {:.4}", c.trips, c.probability());
        println!("   {}", c.node_labels(&graphs[c.depot]).join(" "));
    }
    Ok(())
}
