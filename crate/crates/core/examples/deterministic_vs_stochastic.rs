//! Worst-case scheduling against a 5% failure budget on the same instance. Takes about a
//! minute in release mode.

use evsp::bnp::{solve, SolveOptions};
use evsp::instances::{generate_instance, worst_case_projection, CostParams, SocPolicy};

fn main() -> evsp::Result<()> {
    let inst = generate_instance(40, 4, SocPolicy::range(30, 80).with_epsilon(0.05), CostParams::default())?;
    let det = solve(&worst_case_projection(&inst), SolveOptions::default())?;
    let sto = solve(&inst, SolveOptions::default())?;
    let (Some(d), Some(s)) = (&det.solution, &sto.solution) else {
        println!("one of the runs found no solution");
        return Ok(());
    };
    println!("worst case : cost {:>9.2}  vehicles {}", d.cost, d.fleet_size());
    println!("eps = 0.05 : cost {:>9.2}  vehicles {}  joint P {:.4}", s.cost, s.fleet_size(), s.joint_probability());
    println!("saving {:.2}%", (d.cost - s.cost) / d.cost * 100.0);
    Ok(())
}
