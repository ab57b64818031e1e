//! Monte Carlo battery fade of the schedules of a solved instance.

use evsp::bnp::{solve, SolveOptions};
use evsp::degradation::{monte_carlo_fade, FadingParams};
use evsp::instances::{generate_instance, CostParams, SocPolicy};

fn main() -> evsp::Result<()> {
    for low in [20, 30] {
        let inst = generate_instance(30, 0, SocPolicy::range(low, 80).with_epsilon(0.05), CostParams::default())?;
        let out = solve(&inst, SolveOptions::default())?;
        let Some(sol) = out.solution else { continue };
        let params = FadingParams::default().with_capacity(inst.battery_capacity_kwh);
        let report = monte_carlo_fade(&inst, &sol.schedules, 1000, 11, &params)?;
        println!(
            "range {low}-80: {} buses, {:.3} kWh/bus/year, lifetime {:.2} years",
            sol.fleet_size(),
            report.yearly_fade_per_vehicle,
            report.lifetime_years
        );
        for s in &report.schedules {
            println!(
                "  bus {}: daily {:.4} kWh (sd {:.4}), in range {:.3} vs P {:.3}",
                s.schedule, s.daily_fade_kwh, s.daily_fade_sd, s.within_range_frequency, s.reported_probability
            );
        }
    }
    Ok(())
}
