//! Builds the depot network of a small instance and reports its size.

use evsp::instances::{generate_instance, CostParams, SocPolicy};
use evsp::network::{build_graph, validate_graph, ArcKind};

fn main() -> evsp::Result<()> {
    let inst = generate_instance(20, 3, SocPolicy::range(20, 80), CostParams::default())?;
    let g = build_graph(&inst, 0);
    println!("nodes {} (trips {}, charging {}, waiting {})", g.nodes().len(), g.num_trips(), g.charging_node_count(), g.waiting_node_count());
    for kind in [ArcKind::PullOut, ArcKind::PullIn, ArcKind::Connection, ArcKind::ToCharge, ArcKind::Charging] {
        println!("  {kind:?}: {}", g.count_arcs(kind));
    }
    let problems = validate_graph(&g, &inst);
    println!("structural problems: {}", problems.len());
    if std::env::args().any(|a| a == "--dump") {
        print!("{}", g.dump());
    }
    Ok(())
}
