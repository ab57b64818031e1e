//! Survival probability of the longest schedules found by pricing with zero duals.

use evsp::charging::ChargingTable;
use evsp::instances::{generate_instance, CostParams, SocPolicy};
use evsp::network::build_graph;
use evsp::pricing::{solve_pricing, DualPrices, PricingOptions};

fn main() -> evsp::Result<()> {
    let inst = generate_instance(30, 1, SocPolicy::range(30, 80).with_epsilon(0.2), CostParams::default())?;
    let table = ChargingTable::for_instance(&inst)?;
    let g = build_graph(&inst, 0);
    // A large trip dual makes every trip attractive, so pricing returns long schedules.
    let mut duals = DualPrices::zeros(&inst);
    duals.trip.iter_mut().for_each(|u| *u = 500.0);
    let res = solve_pricing(&g, &inst, &table, &duals, None, &PricingOptions::default());
    let mut cols = res.columns;
    cols.sort_by_key(|c| std::cmp::Reverse(c.trips.len()));
    for c in cols.iter().take(5) {
        println!("{:>2} trips  P = {:.6}  cost {:.2}", c.trips.len(), c.probability(), c.cost);
        println!("   {}", c.node_labels(&g).join(" "));
    }
    Ok(())
}
