mod common;

use evsp::bnp::{build_graphs, charging_table};
use evsp::pricing::{column_reduced_cost, solve_pricing, DualPrices, PricingOptions};
use rand::{Rng, SeedableRng};

fn random_duals(inst: &evsp::instances::Instance, rng: &mut impl Rng) -> DualPrices {
    let mut d = DualPrices::zeros(inst);
    d.trip.iter_mut().for_each(|u| *u = rng.random_range(0.0..1500.0));
    d.depot.iter_mut().for_each(|p| *p = -rng.random_range(0.0..1000.0));
    for row in d.charger.iter_mut() {
        row.iter_mut().for_each(|a| *a = -rng.random_range(0.0..60.0));
    }
    d.chance = rng.random_range(0.0..3000.0);
    d
}

fn exhaustive() -> PricingOptions {
    PricingOptions {
        completion_bound: false,
        max_columns: usize::MAX,
        ..PricingOptions::default()
    }
}

#[test]
fn dominance_keeps_the_minimum_reduced_cost() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let (mut kept, mut all) = (0, 0);
    for k in 0..100u64 {
        let inst = common::tiny_case(k % 20);
        let g = &build_graphs(&inst)[0];
        let table = charging_table(&inst).unwrap();
        let duals = random_duals(&inst, &mut rng);
        let on = solve_pricing(g, &inst, &table, &duals, None, &exhaustive());
        let off = solve_pricing(
            g,
            &inst,
            &table,
            &duals,
            None,
            &PricingOptions {
                dominance: false,
                ..exhaustive()
            },
        );
        match (on.min_reduced_cost, off.min_reduced_cost) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-9, "case {k}: {a} vs {b}"),
            (a, b) => assert_eq!(a.is_some(), b.is_some(), "case {k}"),
        }
        assert!(on.labels_created <= off.labels_created);
        kept += on.labels_created;
        all += off.labels_created;
    }
    assert!(kept < all, "dominance never fired");
}

#[test]
fn pricing_minimum_matches_enumerated_schedules() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    for k in 0..40u64 {
        let inst = common::tiny_case(k % 20);
        let g = &build_graphs(&inst)[0];
        let table = charging_table(&inst).unwrap();
        let duals = random_duals(&inst, &mut rng);
        let oracle = common::feasible_columns(&inst, g, &table)
            .into_iter()
            .map(|c| {
                let col = evsp::master::Column::from_arcs_with_probability(g, &inst, c.arcs, c.probability);
                column_reduced_cost(&col, &duals)
            })
            .min_by(f64::total_cmp);
        let got = solve_pricing(g, &inst, &table, &duals, None, &exhaustive()).min_reduced_cost;
        match (got, oracle) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-9, "case {k}: {a} vs {b}"),
            (a, b) => assert_eq!(a.is_some(), b.is_some(), "case {k}"),
        }
    }
}

#[test]
fn completion_bound_does_not_lose_negative_columns() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
    for k in 0..60u64 {
        let inst = common::tiny_case(k % 20);
        let g = &build_graphs(&inst)[0];
        let table = charging_table(&inst).unwrap();
        let duals = random_duals(&inst, &mut rng);
        let full = solve_pricing(g, &inst, &table, &duals, None, &exhaustive());
        let pruned = solve_pricing(
            g,
            &inst,
            &table,
            &duals,
            None,
            &PricingOptions {
                completion_bound: true,
                ..exhaustive()
            },
        );
        assert_eq!(full.columns.len(), pruned.columns.len(), "case {k}");
        if let Some(m) = full.min_reduced_cost.filter(|&m| m < -1e-6) {
            assert!((pruned.min_reduced_cost.unwrap() - m).abs() <= 1e-9);
        }
    }
}
