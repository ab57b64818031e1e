//! Diving branch-and-price: column generation at every node, one fleet-size branching at
//! the root, then rounding of schedules or arcs until an integer solution appears.

use std::time::{Duration, Instant};

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charging::ChargingTable;
use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::master::{validate_selection, Column, MasterState, RmpSolution, INTEGRALITY_TOL};
use crate::network::{build_graph, ArcId, ArcKind, DepotGraph, NodeKind};
use crate::pricing::{solve_pricing, DualPrices, PricingOptions};

/// Score multiplier of the any-arc rounding strategy.
pub const ANY_ARC_SCORE_FACTOR: f64 = 0.7;
/// Values at or above this are fixed in groups.
pub const FIX_THRESHOLD: f64 = 0.99;
/// Maximum number of targets fixed at once.
/// Factor between successive heuristic label caps.
pub const HEURISTIC_CAP_GROWTH: usize = 8;
pub const MAX_FIXED: usize = 3;

#[derive(Debug, Clone)]
pub struct Limits {
    pub time_limit: Duration,
    pub max_nodes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(2 * 3600),
            max_nodes: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub limits: Limits,
    pub pricing: PricingOptions,
    /// Label cap for a cheap first pricing pass; exact pricing runs whenever the capped pass
    /// finds nothing.
    pub heuristic_label_cap: Option<usize>,
    /// Schedules of a known feasible solution, used as the starting upper bound.
    pub incumbent: Option<Vec<Column>>,
    /// Parallel pricing over depots.
    pub parallel: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            limits: Limits::default(),
            pricing: PricingOptions::default(),
            heuristic_label_cap: Some(8),
            incumbent: None,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Node list exhausted.
    Completed,
    /// A limit stopped the search; the best solution found is returned.
    LimitReached,
    Infeasible,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub gap_pct: f64,
    pub bb_nodes: usize,
    pub total_secs: f64,
    pub root_secs: f64,
    pub pricing_secs: f64,
    pub lp_secs: f64,
    pub lp_iterations: usize,
    pub columns_generated: usize,
    pub cg_iterations: usize,
    pub root_lp_bound: f64,
    /// Minimum LP bound over the fleet-size branches, or the root bound without branching.
    pub tree_bound: f64,
    pub tree_gap_pct: f64,
    pub upper_bound: f64,
    pub root_fleet: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub schedules: Vec<Column>,
    pub cost: f64,
}

impl Solution {
    pub fn fleet_size(&self) -> usize {
        self.schedules.len()
    }

    /// Probability that no vehicle leaves the recommended SoC range.
    pub fn joint_probability(&self) -> f64 {
        self.log_probability().exp()
    }

    pub fn log_probability(&self) -> f64 {
        self.schedules.iter().map(|c| c.log_probability).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub solution: Option<Solution>,
    pub stats: SolverStats,
}

/// Rounding strategy of the dive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rounding {
    Schedule,
    ConnectionArc,
    AnyArc,
}

/// A fixing target chosen by [`select_rounding`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Column(usize),
    /// `(depot, arc)`.
    Arc(usize, ArcId),
}

/// Branch-and-bound node description, applied to the master from scratch.
#[derive(Debug, Clone)]
pub struct BnbNode {
    pub depth: usize,
    pub fixed_columns: Vec<usize>,
    pub fixed_arcs: Vec<(usize, ArcId)>,
    pub fleet_bounds: (f64, f64),
    pub perturbation: bool,
    pub vehicle_branched: bool,
    pub parent_bound: f64,
    /// Which fleet-size branch this node opens, if any.
    pub branch_child: Option<usize>,
}

/// Children of the fleet-size branching: `<= floor` first, then `>= ceil`.
pub fn branch_vehicle_count(node: &BnbNode, fleet: f64, bound: f64) -> Vec<BnbNode> {
    let frac = fleet - fleet.floor();
    if frac <= INTEGRALITY_TOL || frac >= 1.0 - INTEGRALITY_TOL {
        return Vec::new();
    }
    let mut down = node.clone();
    down.fleet_bounds = (node.fleet_bounds.0, fleet.floor());
    let mut up = node.clone();
    up.fleet_bounds = (fleet.ceil(), node.fleet_bounds.1);
    down.branch_child = Some(0);
    up.branch_child = Some(1);
    for c in [&mut down, &mut up] {
        c.depth += 1;
        c.vehicle_branched = true;
        c.parent_bound = bound;
    }
    vec![down, up]
}

/// Picks targets from the best of the three strategies. Values are LP values of columns or
/// aggregated arc flows; fixed items must already be excluded.
pub fn pick_targets(values: &[(f64, Target)]) -> Vec<Target> {
    let mut sorted: Vec<(f64, Target)> = values.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let high: Vec<Target> = sorted
        .iter()
        .take_while(|(v, _)| *v >= FIX_THRESHOLD)
        .take(MAX_FIXED)
        .map(|(_, t)| *t)
        .collect();
    if !high.is_empty() {
        high
    } else {
        sorted.first().map(|(_, t)| vec![*t]).unwrap_or_default()
    }
}

/// Chooses a strategy by score, ties resolved in the order schedule, connection, any arc.
pub fn choose_strategy(schedule: f64, connection: f64, any_arc: f64) -> Rounding {
    let any = any_arc * ANY_ARC_SCORE_FACTOR;
    if schedule >= connection && schedule >= any {
        Rounding::Schedule
    } else if connection >= any {
        Rounding::ConnectionArc
    } else {
        Rounding::AnyArc
    }
}

/// Fractional candidates of each strategy and the chosen targets.
pub fn select_rounding(
    graphs: &[DepotGraph],
    master: &MasterState,
    rmp: &RmpSolution,
    node: &BnbNode,
) -> (Rounding, Vec<Target>) {
    let is_frac = |v: f64| v > INTEGRALITY_TOL && v < 1.0 - INTEGRALITY_TOL;
    let schedules: Vec<(f64, Target)> = rmp
        .y
        .iter()
        .enumerate()
        .filter(|&(k, &v)| is_frac(v) && !node.fixed_columns.contains(&k))
        .map(|(k, &v)| (v, Target::Column(k)))
        .collect();
    let mut flows: Vec<Vec<f64>> = graphs.iter().map(|g| vec![0.0; g.arcs().len()]).collect();
    for (k, &v) in rmp.y.iter().enumerate() {
        if v > INTEGRALITY_TOL {
            let c = master.column(k);
            for &a in &c.arcs {
                flows[c.depot][a] += v;
            }
        }
    }
    let mut connection = Vec::new();
    let mut any_arc = Vec::new();
    for (d, g) in graphs.iter().enumerate() {
        for (a, &f) in flows[d].iter().enumerate() {
            if !is_frac(f) || node.fixed_arcs.contains(&(d, a)) {
                continue;
            }
            let arc = g.arc(a);
            let trip_end = g.node(arc.tail).is_trip() || g.node(arc.head).is_trip();
            if !trip_end {
                continue;
            }
            if arc.kind == ArcKind::Connection {
                connection.push((f, Target::Arc(d, a)));
            }
            any_arc.push((f, Target::Arc(d, a)));
        }
    }
    let best = |v: &[(f64, Target)]| v.iter().map(|x| x.0).fold(0.0, f64::max);
    let strategy = choose_strategy(best(&schedules), best(&connection), best(&any_arc));
    let targets = match strategy {
        Rounding::Schedule => pick_targets(&schedules),
        Rounding::ConnectionArc => pick_targets(&connection),
        Rounding::AnyArc => pick_targets(&any_arc),
    };
    (strategy, targets)
}

/// Arcs removed by fixing `arc` of depot `d`: every other arc leaving its tail or entering
/// its head, at trip endpoints, in every depot network.
fn conflicting_arcs(graphs: &[DepotGraph], d: usize, arc: ArcId) -> Vec<(usize, ArcId)> {
    let a = graphs[d].arc(arc);
    let tail = graphs[d].node(a.tail);
    let head = graphs[d].node(a.head);
    let mut out = Vec::new();
    for (e, g) in graphs.iter().enumerate() {
        let same = |x: ArcId| e == d && x == arc;
        if let NodeKind::Trip(i) = tail {
            let u = g.trip_node(i);
            for &x in g.out_arcs(u) {
                let h = g.node(g.arc(x).head);
                if !same(x) && !(h == head && e == d) {
                    out.push((e, x));
                }
            }
        }
        if let NodeKind::Trip(j) = head {
            let v = g.trip_node(j);
            for &x in g.in_arcs(v) {
                let t = g.node(g.arc(x).tail);
                if !same(x) && !(t == tail && e == d) {
                    out.push((e, x));
                }
            }
        }
    }
    out
}

struct Driver<'a> {
    instance: &'a Instance,
    graphs: Vec<DepotGraph>,
    table: ChargingTable,
    master: MasterState,
    options: SolveOptions,
    start: Instant,
    stats: SolverStats,
    best: Option<Solution>,
    removed: Vec<Vec<bool>>,
    limit_hit: bool,
    child_bounds: [f64; 2],
    branched: bool,
}

impl<'a> Driver<'a> {
    fn out_of_time(&mut self) -> bool {
        if self.start.elapsed() >= self.options.limits.time_limit {
            self.limit_hit = true;
        }
        self.limit_hit
    }

    fn ub(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |s| s.cost)
    }

    fn price(&mut self, duals: &DualPrices) -> Vec<Column> {
        let t0 = Instant::now();
        let deadline = self.start + self.options.limits.time_limit;
        let run = |opts: &PricingOptions| -> (Vec<Column>, bool) {
            let work = |d: usize| {
                solve_pricing(
                    &self.graphs[d],
                    self.instance,
                    &self.table,
                    duals,
                    Some(&self.removed[d]),
                    opts,
                )
            };
            let results: Vec<_> = if self.options.parallel && self.graphs.len() > 1 {
                (0..self.graphs.len()).into_par_iter().map(work).collect()
            } else {
                (0..self.graphs.len()).map(work).collect()
            };
            let truncated = results.iter().any(|r| r.truncated);
            (results.into_iter().flat_map(|r| r.columns).collect(), truncated)
        };
        let mut opts = self.options.pricing.clone();
        opts.deadline = Some(opts.deadline.map_or(deadline, |d| d.min(deadline)));
        // Escalating label caps, then exact labeling.
        let caps = self
            .options
            .heuristic_label_cap
            .map_or(Vec::new(), |c| vec![Some(c), Some(c * HEURISTIC_CAP_GROWTH), Some(c * HEURISTIC_CAP_GROWTH * HEURISTIC_CAP_GROWTH)]);
        let mut cols = Vec::new();
        for cap in caps.into_iter().chain(std::iter::once(self.options.pricing.max_labels_per_node)) {
            opts.max_labels_per_node = cap;
            let (found, truncated) = run(&opts);
            cols = found;
            if truncated {
                self.limit_hit = true;
                break;
            }
            if !cols.is_empty() {
                break;
            }
        }
        self.stats.pricing_secs += t0.elapsed().as_secs_f64();
        cols
    }

    /// Records an integer RMP solution if it improves the upper bound.
    fn consider_integer(&mut self, rmp: &RmpSolution) {
        if rmp.uses_artificials() || rmp.uses_perturbation() || !rmp.is_integral() {
            return;
        }
        let picked: Vec<&Column> = rmp.selected().into_iter().map(|k| self.master.column(k)).collect();
        if validate_selection(self.instance, &picked).is_err() {
            return;
        }
        let cost: f64 = picked.iter().map(|c| c.cost).sum();
        if cost < self.ub() - 1e-9 {
            info!("new upper bound {cost:.2} with {} vehicles", picked.len());
            self.best = Some(Solution {
                schedules: picked.into_iter().cloned().collect(),
                cost,
            });
        }
    }

    /// Column generation to LP optimality for the current bounds.
    fn column_generation(&mut self, node_id: usize) -> Result<Option<RmpSolution>> {
        let mut iter = 0;
        loop {
            let t0 = Instant::now();
            let rmp = self.master.solve_rmp()?;
            self.stats.lp_secs += t0.elapsed().as_secs_f64();
            self.stats.lp_iterations += rmp.iterations;
            self.stats.cg_iterations += 1;
            self.consider_integer(&rmp);
            if self.out_of_time() {
                return Ok(None);
            }
            let cols = self.price(&rmp.duals);
            let added = self.master.add_columns(cols);
            self.stats.columns_generated += added;
            debug!(
                "node {node_id} iter {iter} lp {:.3} cols +{added} ub {:.2}",
                rmp.objective,
                self.ub()
            );
            iter += 1;
            if added == 0 {
                info!(
                    "node {node_id} converged after {iter} iterations: lp {:.3}, fleet {:.3}, ub {:.2}",
                    rmp.objective,
                    rmp.fleet_size(),
                    self.ub()
                );
                return Ok(Some(rmp));
            }
        }
    }

    fn apply_node(&mut self, node: &BnbNode) {
        for k in 0..self.master.num_columns() {
            self.master.set_column_bounds(k, 0.0, 1.0);
        }
        for r in self.removed.iter_mut() {
            r.iter_mut().for_each(|x| *x = false);
        }
        self.master.set_fleet_bounds(node.fleet_bounds.0, node.fleet_bounds.1);
        if node.perturbation && !self.master.perturbation_active() {
            self.master.restore_perturbation();
        } else if !node.perturbation && self.master.perturbation_active() {
            self.master.strip_perturbation();
        }
        for &(d, a) in &node.fixed_arcs {
            self.fix_arc(d, a);
        }
        for &k in &node.fixed_columns {
            self.master.set_column_bounds(k, 1.0, 1.0);
        }
        self.sync_removed_columns();
    }

    fn fix_arc(&mut self, d: usize, a: ArcId) {
        for (e, x) in conflicting_arcs(&self.graphs, d, a) {
            self.removed[e][x] = true;
        }
    }

    /// Forbids pooled columns that use a removed arc.
    fn sync_removed_columns(&mut self) {
        for k in 0..self.master.num_columns() {
            let c = self.master.column(k);
            let bad = c.arcs.iter().any(|&a| self.removed[c.depot][a]);
            if bad {
                let (lo, _) = self.master.column_bounds(k);
                if lo < 0.5 {
                    self.master.set_column_bounds(k, 0.0, 0.0);
                }
            }
        }
    }

    fn fix_targets(&mut self, node: &mut BnbNode, targets: &[Target]) {
        for t in targets {
            match *t {
                Target::Column(k) => {
                    node.fixed_columns.push(k);
                    let c = self.master.column(k).clone();
                    for &a in &c.arcs {
                        let g = &self.graphs[c.depot];
                        let arc = g.arc(a);
                        if g.node(arc.tail).is_trip() || g.node(arc.head).is_trip() {
                            node.fixed_arcs.push((c.depot, a));
                            self.fix_arc(c.depot, a);
                        }
                    }
                    self.master.set_column_bounds(k, 1.0, 1.0);
                }
                Target::Arc(d, a) => {
                    node.fixed_arcs.push((d, a));
                    self.fix_arc(d, a);
                }
            }
        }
        self.sync_removed_columns();
    }

    /// Lower bound of the unperturbed master at the root.
    fn root_bound(&mut self, perturbed: &RmpSolution) -> Result<f64> {
        if !self.master.perturbation_active() || !perturbed.uses_perturbation() {
            return Ok(perturbed.objective);
        }
        self.master.strip_perturbation();
        let exact = self.column_generation(0)?;
        self.master.restore_perturbation();
        Ok(exact.map_or(perturbed.objective, |r| r.objective))
    }

    fn proven_optimal(&self) -> bool {
        let ub = self.ub();
        ub.is_finite() && ub - self.stats.root_lp_bound <= 1e-6 * ub.abs().max(1.0)
    }

    fn run(&mut self) -> Result<SolveStatus> {
        let root = BnbNode {
            depth: 0,
            fixed_columns: Vec::new(),
            fixed_arcs: Vec::new(),
            fleet_bounds: (0.0, f64::INFINITY),
            perturbation: true,
            vehicle_branched: false,
            parent_bound: f64::NEG_INFINITY,
            branch_child: None,
        };
        let mut list = vec![root];
        let mut root_done = false;
        let mut node_counter = 0;
        while let Some(mut node) = list.pop() {
            if root_done && self.proven_optimal() {
                break;
            }
            if self.out_of_time() || node_counter >= self.options.limits.max_nodes {
                self.limit_hit = true;
                break;
            }
            self.apply_node(&node);
            // Dive from this node.
            loop {
                node_counter += 1;
                self.stats.bb_nodes += 1;
                let Some(rmp) = self.column_generation(node_counter)? else {
                    break;
                };
                if let Some(c) = node.branch_child.take() {
                    self.child_bounds[c] = if rmp.uses_artificials() { f64::INFINITY } else { rmp.objective };
                }
                if !root_done {
                    root_done = true;
                    if rmp.uses_artificials() {
                        self.stats.root_secs = self.start.elapsed().as_secs_f64();
                        return Ok(SolveStatus::Infeasible);
                    }
                    self.stats.root_lp_bound = self.root_bound(&rmp)?;
                    self.stats.root_fleet = rmp.fleet_size();
                    self.stats.root_secs = self.start.elapsed().as_secs_f64();
                    info!(
                        "root bound {:.3} fleet {:.3} columns {}",
                        self.stats.root_lp_bound,
                        self.stats.root_fleet,
                        self.master.num_columns()
                    );
                    if self.limit_hit || self.proven_optimal() {
                        break;
                    }
                    // Re-solve after the bound computation may have touched the basis.
                    continue;
                }
                if rmp.uses_artificials() {
                    debug!("node {node_counter} infeasible");
                    break;
                }
                if rmp.objective >= self.ub() - 1e-6 {
                    debug!("node {node_counter} pruned by bound");
                    break;
                }
                if rmp.is_integral() {
                    if rmp.uses_perturbation() {
                        self.master.strip_perturbation();
                        node.perturbation = false;
                        continue;
                    }
                    self.consider_integer(&rmp);
                    break;
                }
                if !node.vehicle_branched {
                    node.vehicle_branched = true;
                    let children = branch_vehicle_count(&node, rmp.fleet_size(), rmp.objective);
                    if let [down, up] = children.as_slice() {
                        info!(
                            "fleet branching at {:.3}: <= {} then >= {}",
                            rmp.fleet_size(),
                            down.fleet_bounds.1,
                            up.fleet_bounds.0
                        );
                        self.branched = true;
                        list.push(up.clone());
                        node = down.clone();
                        self.master.set_fleet_bounds(node.fleet_bounds.0, node.fleet_bounds.1);
                        continue;
                    }
                }
                let (strategy, targets) = select_rounding(&self.graphs, &self.master, &rmp, &node);
                if targets.is_empty() {
                    break;
                }
                debug!("node {node_counter}: rounding {strategy:?} on {} targets", targets.len());
                node.depth += 1;
                node.parent_bound = rmp.objective;
                self.fix_targets(&mut node, &targets);
                if self.out_of_time() || node_counter >= self.options.limits.max_nodes {
                    self.limit_hit = true;
                    break;
                }
            }
            if self.limit_hit {
                break;
            }
        }
        if self.best.is_none() && !self.limit_hit {
            return Ok(SolveStatus::Infeasible);
        }
        Ok(if self.limit_hit {
            SolveStatus::LimitReached
        } else {
            SolveStatus::Completed
        })
    }
}

/// Charging table matching an instance's policy.
pub fn charging_table(instance: &Instance) -> Result<ChargingTable> {
    ChargingTable::for_instance(instance)
}

/// Networks of every depot.
pub fn build_graphs(instance: &Instance) -> Vec<DepotGraph> {
    (0..instance.depots.len()).map(|d| build_graph(instance, d)).collect()
}

/// Runs the diving branch-and-price heuristic.
pub fn solve(instance: &Instance, options: SolveOptions) -> Result<SolveOutcome> {
    instance.validate()?;
    let start = Instant::now();
    let graphs = build_graphs(instance);
    let table = charging_table(instance)?;
    let mut master = MasterState::new(instance);
    let mut best = None;
    if let Some(cols) = &options.incumbent {
        // Re-map columns onto this instance's networks and probabilities.
        let mut rebuilt = Vec::with_capacity(cols.len());
        for c in cols {
            rebuilt.push(Column::from_arcs(&graphs[c.depot], instance, &table, c.arcs.clone())?);
        }
        let refs: Vec<&Column> = rebuilt.iter().collect();
        if validate_selection(instance, &refs).is_ok() {
            let cost = rebuilt.iter().map(|c| c.cost).sum();
            master.add_columns(rebuilt.clone());
            best = Some(Solution {
                schedules: rebuilt,
                cost,
            });
        }
    }
    let removed = graphs.iter().map(|g| vec![false; g.arcs().len()]).collect();
    let mut driver = Driver {
        instance,
        graphs,
        table,
        master,
        options,
        start,
        stats: SolverStats::default(),
        best,
        removed,
        limit_hit: false,
        child_bounds: [f64::NAN; 2],
        branched: false,
    };
    let status = driver.run()?;
    let mut stats = driver.stats;
    stats.total_secs = driver.start.elapsed().as_secs_f64();
    stats.tree_bound = if driver.branched {
        // An unexplored branch keeps the root bound.
        driver
            .child_bounds
            .iter()
            .map(|&b| if b.is_nan() { stats.root_lp_bound } else { b.max(stats.root_lp_bound) })
            .fold(f64::INFINITY, f64::min)
    } else {
        stats.root_lp_bound
    };
    let solution = driver.best;
    if let Some(s) = &solution {
        stats.upper_bound = s.cost;
        let gap = |lb: f64| if s.cost > 0.0 { ((s.cost - lb) / s.cost * 100.0).max(0.0) } else { 0.0 };
        stats.gap_pct = gap(stats.root_lp_bound);
        stats.tree_gap_pct = gap(stats.tree_bound.min(s.cost));
    } else {
        stats.gap_pct = 100.0;
        stats.tree_gap_pct = 100.0;
    }
    if status == SolveStatus::Infeasible && solution.is_none() {
        return Ok(SolveOutcome {
            status,
            solution: None,
            stats,
        });
    }
    Ok(SolveOutcome {
        status: if solution.is_none() { SolveStatus::LimitReached } else { status },
        solution,
        stats,
    })
}

/// Re-validates a solution from scratch: network paths, coverage, capacities, energy
/// feasibility and the chance constraint.
pub fn validate_solution(instance: &Instance, solution: &Solution) -> Result<()> {
    let graphs = build_graphs(instance);
    let table = charging_table(instance)?;
    let mut rebuilt = Vec::with_capacity(solution.schedules.len());
    for c in &solution.schedules {
        let g = graphs
            .get(c.depot)
            .ok_or_else(|| Error::Validation(format!("unknown depot {}", c.depot)))?;
        let nodes = g.path_nodes(&c.arcs);
        if nodes.first() != Some(&crate::network::SOURCE) || nodes.last() != Some(&crate::network::SINK) {
            return Err(Error::Validation("schedule is not a source-sink path".into()));
        }
        if g.path_arcs(&nodes).as_deref() != Some(c.arcs.as_slice()) {
            return Err(Error::Validation("schedule arcs are not consecutive".into()));
        }
        check_energy(instance, g, &table, &c.arcs)?;
        rebuilt.push(Column::from_arcs(g, instance, &table, c.arcs.clone())?);
    }
    let refs: Vec<&Column> = rebuilt.iter().collect();
    validate_selection(instance, &refs)?;
    let cost: f64 = rebuilt.iter().map(|c| c.cost).sum();
    if (cost - solution.cost).abs() > 1e-6 * cost.max(1.0) {
        return Err(Error::Validation(format!(
            "reported cost {} differs from recomputed {cost}",
            solution.cost
        )));
    }
    Ok(())
}

/// Worst-case SoC never drops below the minimum and charging visits recharge exactly once.
fn check_energy(instance: &Instance, g: &DepotGraph, table: &ChargingTable, arcs: &[ArcId]) -> Result<()> {
    let policy = &instance.soc_policy;
    let mut omega = policy.sigma_init_pct as i64;
    let mut pre: Option<(i64, usize)> = None;
    let mut recharged = 0;
    let mut at_station = false;
    for &a in arcs {
        let arc = g.arc(a);
        match g.node(arc.head) {
            NodeKind::Trip(j) => {
                if at_station && recharged != 1 {
                    return Err(Error::Validation("station visit without exactly one recharge".into()));
                }
                at_station = false;
                recharged = 0;
                pre = None;
                omega -= instance.trips[j].energy_pmf.max_consumption() as i64 + arc.energy_pct as i64;
            }
            NodeKind::Charging { .. } => {
                let (p, m) = match pre {
                    Some((p, m)) => (p, m + 1),
                    None => {
                        recharged += 1;
                        (omega, 1)
                    }
                };
                pre = Some((p, m));
                omega = table.apply(p as u32, m) as i64;
            }
            NodeKind::Waiting { .. } => {
                at_station = true;
                pre = None;
                omega -= arc.energy_pct as i64;
            }
            _ => {
                pre = None;
                omega -= arc.energy_pct as i64;
            }
        }
        if omega < policy.sigma_min_pct as i64 {
            return Err(Error::Validation("worst-case SoC below the minimum".into()));
        }
    }
    if recharged > 1 {
        return Err(Error::Validation("more than one recharge in a station visit".into()));
    }
    Ok(())
}
