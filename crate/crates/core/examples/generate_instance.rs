//! Generates a random single-line instance and prints a short summary.
//!
//! ```text
//! cargo run --example generate_instance -- 60 0 /tmp/line60.json
//! ```

use evsp::instances::{generate_instance, write_instance, CostParams, SocPolicy};

fn main() -> evsp::Result<()> {
    let mut args = std::env::args().skip(1);
    let trips: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(60);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let out = args.next();

    let inst = generate_instance(trips, seed, SocPolicy::range(20, 80), CostParams::default())?;
    println!("{} ({} trips, hash {})", inst.name, inst.trips.len(), inst.content_hash());
    println!("locations: {}", inst.locations.join(", "));
    for t in inst.trips.iter().take(8) {
        println!(
            "  trip {:>3}  {} -> {}  dep {:>4}  mean {:.2}%  worst {}%",
            t.id,
            inst.locations[t.origin],
            inst.locations[t.destination],
            t.departure_min,
            t.energy_pmf.mean(),
            t.energy_pmf.max_consumption()
        );
    }
    if let Some(path) = out {
        write_instance(&inst, &path)?;
        println!("written to {path}");
    }
    Ok(())
}
