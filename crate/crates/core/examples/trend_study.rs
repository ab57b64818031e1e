//! Worst-case against 5% failure budget on five 60-trip instances for both SoC ranges,
//! with the simulated yearly fade of each solution.
//!
//! ```text
//! cargo run --release --example trend_study
//! ```

use evsp::bnp::{solve, SolveOptions};
use evsp::cli::{Mode, SolutionFile};
use evsp::degradation::{monte_carlo_fade, FadingParams};
use evsp::instances::{generate_instance, worst_case_projection, CostParams, SocPolicy};

fn main() -> evsp::Result<()> {
    println!("seed,range,epsilon,status,cost,vehicles,yearly_fade_kwh,root_gap_pct,tree_gap_pct,secs");
    for seed in 0..5u64 {
        for low in [20u32, 30] {
            for eps in [0.0, 0.05] {
                let base = generate_instance(60, seed, SocPolicy::range(low, 80).with_epsilon(eps), CostParams::default())?;
                let (inst, mode) = if eps == 0.0 {
                    (worst_case_projection(&base), Mode::Deterministic)
                } else {
                    (base.clone(), Mode::Stochastic)
                };
                let out = solve(&inst, SolveOptions::default())?;
                let Some(sol) = &out.solution else {
                    println!("{seed},{low}-80,{eps},{:?},,,,,,", out.status);
                    continue;
                };
                // Fade is simulated under the stochastic consumption.
                let cols = SolutionFile::new(&inst, seed, mode, &out).columns(&base)?;
                let params = FadingParams::default().with_capacity(base.battery_capacity_kwh);
                let fade = monte_carlo_fade(&base, &cols, 1000, seed, &params)?;
                println!(
                    "{seed},{low}-80,{eps},{:?},{:.2},{},{:.3},{:.2},{:.2},{:.1}",
                    out.status,
                    sol.cost,
                    sol.fleet_size(),
                    fade.yearly_fade_per_vehicle,
                    out.stats.gap_pct,
                    out.stats.tree_gap_pct,
                    out.stats.total_secs
                );
            }
        }
    }
    Ok(())
}
