//! Labeling pricing with and without dominance on random duals.

use evsp::charging::ChargingTable;
use evsp::instances::{generate_tiny_instance, SocPolicy};
use evsp::network::build_graph;
use evsp::pricing::{solve_pricing, DualPrices, PricingOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> evsp::Result<()> {
    let inst = generate_tiny_instance(8, 5, SocPolicy::range(20, 80).with_epsilon(0.1))?;
    let table = ChargingTable::for_instance(&inst)?;
    let g = build_graph(&inst, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for round in 0..5 {
        let mut duals = DualPrices::zeros(&inst);
        duals.trip.iter_mut().for_each(|u| *u = rng.random_range(0.0..1500.0));
        duals.depot[0] = -rng.random_range(0.0..800.0);
        duals.chance = rng.random_range(0.0..400.0);
        let mut opts = PricingOptions::default();
        let with = solve_pricing(&g, &inst, &table, &duals, None, &opts);
        opts.dominance = false;
        let without = solve_pricing(&g, &inst, &table, &duals, None, &opts);
        println!(
            "round {round}: min reduced cost {:?} / {:?}, labels {} / {}",
            with.min_reduced_cost, without.min_reduced_cost, with.labels_created, without.labels_created
        );
    }
    Ok(())
}
