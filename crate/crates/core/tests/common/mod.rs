//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use evsp::charging::ChargingTable;
use evsp::instances::Instance;
use evsp::network::{ArcId, DepotGraph, NodeKind, SINK, SOURCE};

/// Every source-to-sink path of a graph, as arc lists.
pub fn enumerate_paths(g: &DepotGraph) -> Vec<Vec<ArcId>> {
    fn dfs(g: &DepotGraph, node: usize, stack: &mut Vec<ArcId>, out: &mut Vec<Vec<ArcId>>) {
        if node == SINK {
            out.push(stack.clone());
            return;
        }
        for &a in g.out_arcs(node) {
            stack.push(a);
            dfs(g, g.arc(a).head, stack, out);
            stack.pop();
        }
    }
    let mut out = Vec::new();
    dfs(g, SOURCE, &mut Vec::new(), &mut out);
    out
}

/// One step of the scalar SoC process along a path.
#[derive(Debug, Clone, Copy)]
enum Step {
    Trip(usize, u32),
    Move(u32),
    Charge,
}

fn steps(g: &DepotGraph, arcs: &[ArcId]) -> Vec<Step> {
    arcs.iter()
        .map(|&a| {
            let arc = g.arc(a);
            match g.node(arc.head) {
                NodeKind::Trip(t) => Step::Trip(t, arc.energy_pct),
                NodeKind::Charging { .. } => Step::Charge,
                _ => Step::Move(arc.energy_pct),
            }
        })
        .collect()
}

/// Simulates one realisation of trip consumptions. Returns the lowest SoC reached and whether
/// it stayed within `[low, up]` after every step.
pub fn simulate(
    inst: &Instance,
    g: &DepotGraph,
    table: &ChargingTable,
    arcs: &[ArcId],
    consumption: &dyn Fn(usize) -> u32,
) -> bool {
    let p = &inst.soc_policy;
    let mut soc = p.sigma_init_pct as i64;
    let mut run: Option<(i64, usize)> = None;
    for step in steps(g, arcs) {
        match step {
            Step::Trip(t, dh) => {
                run = None;
                soc -= (consumption(t) + dh) as i64;
            }
            Step::Move(dh) => {
                run = None;
                soc -= dh as i64;
            }
            Step::Charge => {
                let (pre, m) = run.map_or((soc, 1), |(s, m)| (s, m + 1));
                run = Some((pre, m));
                soc = (table.apply(pre as u32, m) as i64).min(p.sigma_up_pct as i64);
            }
        }
        if soc < p.sigma_low_pct as i64 {
            return false;
        }
    }
    true
}

/// Survival probability by enumerating every joint outcome of the trips on the path.
pub fn brute_force_probability(inst: &Instance, g: &DepotGraph, table: &ChargingTable, arcs: &[ArcId]) -> f64 {
    let trips: Vec<usize> = steps(g, arcs)
        .into_iter()
        .filter_map(|s| match s {
            Step::Trip(t, _) => Some(t),
            _ => None,
        })
        .collect();
    let supports: Vec<Vec<(u32, f64)>> = trips.iter().map(|&t| inst.trips[t].energy_pmf.iter().collect()).collect();
    let mut idx = vec![0usize; trips.len()];
    let mut total = 0.0;
    loop {
        let weight: f64 = idx.iter().zip(&supports).map(|(&k, s)| s[k].1).product();
        let lookup = |t: usize| {
            let pos = trips.iter().position(|&x| x == t).unwrap();
            supports[pos][idx[pos]].0
        };
        if simulate(inst, g, table, arcs, &lookup) {
            total += weight;
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == idx.len() {
                return total;
            }
            idx[k] += 1;
            if idx[k] < supports[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// A feasible schedule as seen by the oracle.
#[derive(Debug, Clone)]
pub struct OracleColumn {
    pub arcs: Vec<ArcId>,
    pub cost: f64,
    pub trips: Vec<usize>,
    pub chargers: Vec<(usize, usize)>,
    pub probability: f64,
}

/// Worst-case energy never below the minimum, and every station visit before a trip holds
/// exactly one charging run (at most one before the sink).
pub fn structurally_feasible(inst: &Instance, g: &DepotGraph, table: &ChargingTable, arcs: &[ArcId]) -> bool {
    let worst = |t: usize| inst.trips[t].energy_pmf.max_consumption();
    let p = &inst.soc_policy;
    let mut soc = p.sigma_init_pct as i64;
    let mut run: Option<(i64, usize)> = None;
    let mut runs_in_visit = 0;
    let mut prev_charging = false;
    for &a in arcs {
        let arc = g.arc(a);
        let head = g.node(arc.head);
        match head {
            NodeKind::Trip(t) => {
                if (g.node(arc.tail).is_waiting() || g.node(arc.tail).is_charging())
                    && runs_in_visit != 1 {
                        return false;
                    }
                runs_in_visit = 0;
                run = None;
                soc -= (worst(t) + arc.energy_pct) as i64;
            }
            NodeKind::Charging { .. } => {
                if !prev_charging {
                    runs_in_visit += 1;
                }
                let (pre, m) = run.map_or((soc, 1), |(s, m)| (s, m + 1));
                run = Some((pre, m));
                soc = table.apply(pre as u32, m) as i64;
            }
            _ => {
                run = None;
                soc -= arc.energy_pct as i64;
            }
        }
        prev_charging = head.is_charging();
        if soc < p.sigma_min_pct as i64 {
            return false;
        }
    }
    runs_in_visit <= 1
}

/// All schedules of a graph the oracle considers feasible on their own.
pub fn feasible_columns(inst: &Instance, g: &DepotGraph, table: &ChargingTable) -> Vec<OracleColumn> {
    let bound = inst.soc_policy.log_survival_bound();
    enumerate_paths(g)
        .into_iter()
        .filter(|arcs| structurally_feasible(inst, g, table, arcs))
        .filter_map(|arcs| {
            let mut trips = Vec::new();
            let mut chargers = Vec::new();
            let mut cost = 0.0;
            for &a in &arcs {
                let arc = g.arc(a);
                cost += arc.cost;
                match g.node(arc.head) {
                    NodeKind::Trip(t) => trips.push(t),
                    NodeKind::Charging { station, interval } => chargers.push((station, interval)),
                    _ => {}
                }
            }
            if trips.is_empty() {
                return None;
            }
            let probability = brute_force_probability(inst, g, table, &arcs);
            if probability.ln() < bound - 1e-12 {
                return None;
            }
            trips.sort_unstable();
            Some(OracleColumn {
                arcs,
                cost,
                trips,
                chargers,
                probability,
            })
        })
        .collect()
}

/// Exact minimum-cost set partitioning with depot, charger and chance constraints.
pub fn exact_optimum(inst: &Instance, cols: &[OracleColumn]) -> Option<f64> {
    struct Search<'a> {
        inst: &'a Instance,
        cols: &'a [OracleColumn],
        by_trip: Vec<Vec<usize>>,
        covered: Vec<bool>,
        chargers: std::collections::HashMap<(usize, usize), u32>,
        bound: f64,
        best: f64,
    }
    impl Search<'_> {
        fn go(&mut self, cost: f64, log_p: f64, vehicles: u32) {
            if cost >= self.best || log_p < self.bound - 1e-12 {
                return;
            }
            let Some(t) = self.covered.iter().position(|&c| !c) else {
                self.best = cost;
                return;
            };
            if vehicles >= self.inst.depots[0].capacity_vehicles {
                return;
            }
            for k in self.by_trip[t].clone() {
                let c = &self.cols[k];
                if c.trips.iter().any(|&x| self.covered[x]) {
                    continue;
                }
                let cap_ok = c.chargers.iter().all(|hr| {
                    self.chargers.get(hr).copied().unwrap_or(0) < self.inst.stations[hr.0].chargers
                });
                if !cap_ok {
                    continue;
                }
                for &x in &c.trips {
                    self.covered[x] = true;
                }
                for hr in &c.chargers {
                    *self.chargers.entry(*hr).or_default() += 1;
                }
                self.go(cost + c.cost, log_p + c.probability.ln(), vehicles + 1);
                for &x in &c.trips {
                    self.covered[x] = false;
                }
                for hr in &c.chargers {
                    *self.chargers.get_mut(hr).unwrap() -= 1;
                }
            }
        }
    }
    let n = inst.trips.len();
    let mut by_trip = vec![Vec::new(); n];
    for (k, c) in cols.iter().enumerate() {
        by_trip[c.trips[0]].push(k);
    }
    let mut s = Search {
        inst,
        cols,
        by_trip,
        covered: vec![false; n],
        chargers: Default::default(),
        bound: inst.soc_policy.log_survival_bound(),
        best: f64::INFINITY,
    };
    s.go(0.0, 0.0, 0);
    s.best.is_finite().then_some(s.best)
}

/// The tiny instance family shared by the optimality checks.
pub fn tiny_case(seed: u64) -> Instance {
    let n = 3 + (seed % 4) as usize;
    let eps = [0.0, 0.05, 0.1, 0.2][(seed / 4 % 4) as usize];
    let low = if seed.is_multiple_of(2) { 20 } else { 30 };
    evsp::instances::generate_tiny_instance(n, seed, evsp::instances::SocPolicy::range(low, 80).with_epsilon(eps))
        .unwrap()
}

/// Tiny instance whose trips carry random PMFs with up to `max_support` points.
pub fn rich_pmf_case(seed: u64, n_trips: usize, max_support: usize) -> Instance {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let low = if seed.is_multiple_of(2) { 20 } else { 30 };
    let mut inst = evsp::instances::generate_tiny_instance(
        n_trips,
        seed,
        evsp::instances::SocPolicy::range(low, 80).with_epsilon(0.3),
    )
    .unwrap();
    for t in inst.trips.iter_mut() {
        let k = rng.random_range(1..=max_support);
        let base: u32 = rng.random_range(4..12);
        let mut values: Vec<u32> = (0..k).map(|_| base + rng.random_range(0..10)).collect();
        values.sort_unstable();
        values.dedup();
        let weights: Vec<f64> = values.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        t.energy_pmf = evsp::instances::EnergyPmf::new(values.into_iter().zip(weights.into_iter().map(|w| w / total)));
    }
    inst
}
