mod common;

use evsp::bnp::{build_graphs, charging_table};
use evsp::master::Column;
use evsp::network::NodeKind;
use rand::seq::IndexedRandom;
use rand::SeedableRng;

fn trip_count(g: &evsp::network::DepotGraph, arcs: &[usize]) -> usize {
    arcs.iter().filter(|&&a| matches!(g.node(g.arc(a).head), NodeKind::Trip(_))).count()
}

#[test]
fn matches_enumeration_over_joint_support() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    let mut below_one = 0;
    for seed in 0..40u64 {
        let inst = common::rich_pmf_case(seed, 4 + (seed % 3) as usize, 5);
        let g = &build_graphs(&inst)[0];
        let table = charging_table(&inst).unwrap();
        let paths: Vec<_> = common::enumerate_paths(g)
            .into_iter()
            .filter(|p| (1..=4).contains(&trip_count(g, p)))
            .collect();
        for _ in 0..5 {
            let Some(p) = paths.choose(&mut rng) else { break };
            let Ok(col) = Column::from_arcs(g, &inst, &table, p.clone()) else { continue };
            let oracle = common::brute_force_probability(&inst, g, &table, p);
            assert!(
                (col.probability() - oracle).abs() <= 1e-12,
                "seed {seed}: {} vs {oracle}",
                col.probability()
            );
            checked += 1;
            below_one += usize::from(oracle < 1.0 - 1e-9);
        }
    }
    assert!(checked >= 100, "only {checked} paths checked");
    assert!(below_one >= 20, "only {below_one} paths carry risk");
}

#[test]
fn deterministic_paths_are_certain_or_impossible() {
    let inst = evsp::instances::worst_case_projection(&common::rich_pmf_case(7, 5, 5));
    let g = &build_graphs(&inst)[0];
    let table = charging_table(&inst).unwrap();
    for p in common::enumerate_paths(g).into_iter().take(500) {
        if let Ok(col) = Column::from_arcs(g, &inst, &table, p) {
            let pr = col.probability();
            assert!(pr == 1.0 || pr == 0.0, "{pr}");
        }
    }
}
