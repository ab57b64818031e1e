//! Stochastic shortest-path pricing: a labeling algorithm over the per-depot network whose
//! labels carry the conditioned SoC distribution, the worst-case SoC, the reduced cost and
//! two charging resources.

use std::cmp::Ordering;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::charging::ChargingTable;
use crate::instances::Instance;
use crate::master::Column;
use crate::network::{ArcId, ArcKind, DepotGraph, NodeId, NodeKind, SINK, SOURCE};

/// Probability slack used when comparing conditioned CDFs.
const PROB_TOL: f64 = 1e-12;

/// Dual values of the restricted master problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPrices {
    /// `u_i` for each trip.
    pub trip: Vec<f64>,
    /// `pi_d` for each depot, including the dual of the fleet-size row.
    pub depot: Vec<f64>,
    /// `alpha^{hr}` indexed `[station][interval]`.
    pub charger: Vec<Vec<f64>>,
    /// `theta` of the chance row.
    pub chance: f64,
}

impl DualPrices {
    pub fn zeros(instance: &Instance) -> Self {
        Self {
            trip: vec![0.0; instance.trips.len()],
            depot: vec![0.0; instance.depots.len()],
            charger: vec![vec![0.0; instance.num_intervals()]; instance.stations.len()],
            chance: 0.0,
        }
    }
}

/// Arc cost with the duals applied. The chance-row term is not included because it is only
/// known once the schedule reaches the sink.
pub fn modified_arc_cost(graph: &DepotGraph, arc: ArcId, duals: &DualPrices) -> f64 {
    let a = graph.arc(arc);
    let mut c = a.cost;
    if a.kind == ArcKind::PullOut {
        c -= duals.depot[graph.depot()];
    }
    match graph.node(a.tail) {
        NodeKind::Trip(i) => c -= duals.trip[i],
        NodeKind::Charging { station, interval } => c -= duals.charger[station][interval],
        _ => {}
    }
    c
}

/// Charging run in progress: the label it started from and the number of intervals so far.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ChargeRun {
    pre_dist: usize,
    pre_omega: i32,
    intervals: usize,
}

/// Partial path state.
#[derive(Debug, Clone)]
pub struct Label {
    pub node: NodeId,
    /// Worst-case SoC.
    pub omega: i32,
    /// Accumulated reduced cost.
    pub cost: f64,
    /// Completed recharges since the last trip.
    pub recharges: i32,
    /// Station visits without recharge since the last trip.
    pub unserved_waits: i32,
    pred: Option<usize>,
    arc: Option<ArcId>,
    dist: usize,
    run: Option<ChargeRun>,
}

#[derive(Debug, Clone)]
pub struct PricingOptions {
    pub dominance: bool,
    /// Columns returned per call, most negative first.
    pub max_columns: usize,
    /// Reduced cost below which a schedule is reported.
    pub threshold: f64,
    /// Heuristic cap on labels kept per node (lowest cost first); `None` is exact.
    pub max_labels_per_node: Option<usize>,
    /// Stops labeling once passed; the result is then marked truncated.
    pub deadline: Option<Instant>,
    /// Drops labels whose cost plus a resource-free completion bound cannot reach the
    /// threshold. `min_reduced_cost` then only covers schedules below the threshold.
    pub completion_bound: bool,
}

impl Default for PricingOptions {
    fn default() -> Self {
        Self {
            dominance: true,
            max_columns: 200,
            threshold: -1e-6,
            max_labels_per_node: None,
            deadline: None,
            completion_bound: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PricingResult {
    pub columns: Vec<Column>,
    /// Reduced costs of the returned columns, in the same order.
    pub reduced_costs: Vec<f64>,
    /// Smallest reduced cost of any complete schedule found, if any.
    pub min_reduced_cost: Option<f64>,
    pub labels_created: usize,
    pub labels_dominated: usize,
    /// The deadline was hit before every node was processed.
    pub truncated: bool,
}

/// Label arena plus the distribution store it points into.
struct Pool {
    span: usize,
    labels: Vec<Label>,
    dists: Vec<f64>,
}

impl Pool {
    fn dist(&self, offset: usize) -> &[f64] {
        &self.dists[offset..offset + self.span]
    }

    fn push_dist(&mut self, d: &[f64]) -> usize {
        let off = self.dists.len();
        self.dists.extend_from_slice(d);
        off
    }
}

/// Context shared by all extensions of one pricing call.
struct Ctx<'a> {
    graph: &'a DepotGraph,
    instance: &'a Instance,
    table: &'a ChargingTable,
    arc_cost: Vec<f64>,
    low: i64,
    min_survival: f64,
    sigma_min: i32,
    theta: f64,
}

/// Outcome of extending a label along an arc.
enum Extended {
    Label(Label, Vec<f64>),
    Infeasible,
}

impl Ctx<'_> {
    fn extend(&self, pool: &Pool, from: usize, arc_id: ArcId) -> Extended {
        let l = &pool.labels[from];
        let arc = self.graph.arc(arc_id);
        let head = self.graph.node(arc.head);
        let tail = self.graph.node(arc.tail);
        let cur = pool.dist(l.dist);
        let mut recharges = l.recharges;
        let mut waits = l.unserved_waits;
        let mut run = None;
        let (omega, dist) = match head {
            NodeKind::Trip(j) => {
                let pmf = &self.instance.trips[j].energy_pmf;
                let omega = l.omega - pmf.max_consumption() as i32 - arc.energy_pct as i32;
                if omega < self.sigma_min {
                    return Extended::Infeasible;
                }
                (omega, convolve(cur, pmf.iter(), arc.energy_pct as usize))
            }
            NodeKind::Charging { .. } => {
                let (pre_dist, pre_omega, m) = match l.run {
                    Some(r) => (r.pre_dist, r.pre_omega, r.intervals + 1),
                    None => (l.dist, l.omega, 1),
                };
                if m > self.table.max_intervals() {
                    return Extended::Infeasible;
                }
                run = Some(ChargeRun {
                    pre_dist,
                    pre_omega,
                    intervals: m,
                });
                let omega = self.table.apply(pre_omega as u32, m) as i32;
                (omega, charge(pool.dist(pre_dist), self.low as u32, self.table, m))
            }
            _ => {
                let omega = l.omega - arc.energy_pct as i32;
                if omega < self.sigma_min {
                    return Extended::Infeasible;
                }
                (omega, shift(cur, arc.energy_pct as usize))
            }
        };
        match (tail, head) {
            (NodeKind::Waiting { .. }, NodeKind::Charging { .. }) => {
                recharges += 1;
                waits -= 1;
            }
            (NodeKind::Waiting { .. }, NodeKind::Trip(_)) => recharges -= 1,
            (NodeKind::Trip(_), NodeKind::Waiting { .. }) => waits += 1,
            _ => {}
        }
        let window = if head.is_trip() { 0 } else { 1 };
        if recharges > window || waits > window {
            return Extended::Infeasible;
        }
        let survival = *dist.last().expect("non-empty");
        if survival < self.min_survival {
            return Extended::Infeasible;
        }
        let mut cost = l.cost + self.arc_cost[arc_id];
        if arc.head == SINK && self.theta != 0.0 {
            cost -= self.theta * survival.ln();
        }
        Extended::Label(
            Label {
                node: arc.head,
                omega,
                cost,
                recharges,
                unserved_waits: waits,
                pred: Some(from),
                arc: Some(arc_id),
                dist: usize::MAX,
                run,
            },
            dist,
        )
    }
}

/// Trip extension: subtract consumption plus deadhead from every surviving SoC and drop the
/// mass that lands below the recommended range.
fn convolve(cdf: &[f64], pmf: impl Iterator<Item = (u32, f64)>, deadhead: usize) -> Vec<f64> {
    let n = cdf.len();
    let mut mass = vec![0.0; n];
    let mut prev = 0.0;
    let pre: Vec<f64> = cdf
        .iter()
        .map(|&c| {
            let p = c - prev;
            prev = c;
            p
        })
        .collect();
    for (mu, prob) in pmf {
        if prob == 0.0 {
            continue;
        }
        let drop = mu as usize + deadhead;
        if drop >= n {
            continue;
        }
        for k in drop..n {
            mass[k - drop] += prob * pre[k];
        }
    }
    cumulate(mass)
}

fn shift(cdf: &[f64], by: usize) -> Vec<f64> {
    if by == 0 {
        return cdf.to_vec();
    }
    let n = cdf.len();
    let mut out = vec![0.0; n];
    // F'(x) = F(x + by) - F(low + by - 1) for the surviving part.
    let base = if by >= 1 && by <= n { cdf[by - 1] } else { 0.0 };
    for (x, o) in out.iter_mut().enumerate() {
        let src = x + by;
        let v = if src < n { cdf[src] } else { cdf[n - 1] };
        *o = if by > n { 0.0 } else { v - base };
    }
    out
}

fn charge(cdf: &[f64], low: u32, table: &ChargingTable, m: usize) -> Vec<f64> {
    let n = cdf.len();
    let mut mass = vec![0.0; n];
    let mut prev = 0.0;
    for (k, &c) in cdf.iter().enumerate() {
        let p = c - prev;
        prev = c;
        if p != 0.0 {
            let y = table.apply(low + k as u32, m) as usize - low as usize;
            mass[y.min(n - 1)] += p;
        }
    }
    cumulate(mass)
}

fn cumulate(mut v: Vec<f64>) -> Vec<f64> {
    let mut acc = 0.0;
    for x in v.iter_mut() {
        acc += *x;
        *x = acc;
    }
    v
}

/// Checks conditions (v) and (vi): the surviving mass at or above every SoC level of `a`
/// is at least that of `b`.
fn tail_dominates(a: &[f64], b: &[f64]) -> bool {
    let n = a.len();
    let (fa, fb) = (a[n - 1], b[n - 1]);
    if fa + PROB_TOL < fb {
        return false;
    }
    for k in 1..n {
        if fa - a[k - 1] + PROB_TOL < fb - b[k - 1] {
            return false;
        }
    }
    true
}

/// Dominance test between two labels at the same node. Labels inside a charging run are
/// compared on the state the run started from, since later extensions are evaluated from it.
pub fn dominates_labels(pool_dists: &[f64], span: usize, a: &Label, b: &Label) -> bool {
    if a.cost > b.cost || a.recharges > b.recharges || a.unserved_waits > b.unserved_waits {
        return false;
    }
    let slice = |off: usize| &pool_dists[off..off + span];
    match (a.run, b.run) {
        (Some(ra), Some(rb)) => {
            ra.intervals >= rb.intervals
                && ra.pre_omega >= rb.pre_omega
                && a.omega >= b.omega
                && tail_dominates(slice(ra.pre_dist), slice(rb.pre_dist))
                && tail_dominates(slice(a.dist), slice(b.dist))
        }
        (None, None) => a.omega >= b.omega && tail_dominates(slice(a.dist), slice(b.dist)),
        _ => false,
    }
}

/// Public dominance rule on plain label components: cost, resources, worst-case SoC and
/// the conditioned CDFs over `[sigma_low, sigma_up]`.
#[allow(clippy::too_many_arguments)]
pub fn dominates(
    cost_a: f64,
    recharges_a: i32,
    waits_a: i32,
    omega_a: i32,
    cdf_a: &[f64],
    cost_b: f64,
    recharges_b: i32,
    waits_b: i32,
    omega_b: i32,
    cdf_b: &[f64],
) -> bool {
    cost_a <= cost_b
        && recharges_a <= recharges_b
        && waits_a <= waits_b
        && omega_a >= omega_b
        && tail_dominates(cdf_a, cdf_b)
}

/// Prices one depot network. `removed_arcs` marks arcs forbidden by branching.
pub fn solve_pricing(
    graph: &DepotGraph,
    instance: &Instance,
    table: &ChargingTable,
    duals: &DualPrices,
    removed_arcs: Option<&[bool]>,
    options: &PricingOptions,
) -> PricingResult {
    let policy = &instance.soc_policy;
    let span = policy.soc_span();
    let min_survival = if policy.epsilon > 0.0 {
        (1.0 - policy.epsilon) * (1.0 - 1e-12)
    } else {
        1.0 - 1e-12
    };
    let ctx = Ctx {
        graph,
        instance,
        table,
        arc_cost: (0..graph.arcs().len())
            .map(|a| modified_arc_cost(graph, a, duals))
            .collect(),
        low: policy.sigma_low_pct as i64,
        min_survival,
        sigma_min: policy.sigma_min_pct as i32,
        theta: duals.chance,
    };
    let mut pool = Pool {
        span,
        labels: Vec::new(),
        dists: Vec::new(),
    };
    let n = graph.nodes().len();
    let mut at_node: Vec<Vec<usize>> = vec![Vec::new(); n];
    let init = crate::probability::SocDistribution::initial(policy);
    let d0 = pool.push_dist(init.cdf());
    pool.labels.push(Label {
        node: SOURCE,
        omega: policy.sigma_init_pct as i32,
        cost: 0.0,
        recharges: 0,
        unserved_waits: 0,
        pred: None,
        arc: None,
        dist: d0,
        run: None,
    });
    at_node[SOURCE].push(0);
    let mut sink_labels: Vec<usize> = Vec::new();
    let mut dominated = 0usize;
    let mut truncated = false;
    let to_sink = if options.completion_bound && duals.chance >= 0.0 {
        Some(completion_bounds(graph, &ctx.arc_cost, removed_arcs))
    } else {
        None
    };

    for &u in graph.topological_order() {
        if u == SINK {
            continue;
        }
        if options.deadline.is_some_and(|d| Instant::now() >= d) {
            truncated = true;
            break;
        }
        let mut here = std::mem::take(&mut at_node[u]);
        if let Some(cap) = options.max_labels_per_node {
            if here.len() > cap {
                here.sort_by(|&a, &b| {
                    pool.labels[a]
                        .cost
                        .partial_cmp(&pool.labels[b].cost)
                        .unwrap_or(Ordering::Equal)
                        .then(a.cmp(&b))
                });
                here.truncate(cap);
            }
        }
        for &lid in &here {
            for &a in graph.out_arcs(u) {
                if removed_arcs.is_some_and(|r| r[a]) {
                    continue;
                }
                let Extended::Label(mut label, dist) = ctx.extend(&pool, lid, a) else {
                    continue;
                };
                let head = label.node;
                if to_sink.as_ref().is_some_and(|b| label.cost + b[head] >= options.threshold) {
                    continue;
                }
                if head == SINK {
                    label.dist = pool.push_dist(&dist);
                    pool.labels.push(label);
                    sink_labels.push(pool.labels.len() - 1);
                    continue;
                }
                label.dist = pool.push_dist(&dist);
                if options.dominance {
                    let bucket = &at_node[head];
                    let beaten = bucket
                        .iter()
                        .any(|&o| dominates_labels(&pool.dists, span, &pool.labels[o], &label));
                    if beaten {
                        dominated += 1;
                        pool.dists.truncate(label.dist);
                        continue;
                    }
                    let before = at_node[head].len();
                    let labels = &pool.labels;
                    let dists = &pool.dists;
                    at_node[head].retain(|&o| !dominates_labels(dists, span, &label, &labels[o]));
                    dominated += before - at_node[head].len();
                }
                pool.labels.push(label);
                at_node[head].push(pool.labels.len() - 1);
            }
        }
        at_node[u] = here;
    }

    let min_reduced_cost = sink_labels
        .iter()
        .map(|&l| pool.labels[l].cost)
        .min_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut negative: Vec<usize> = sink_labels
        .into_iter()
        .filter(|&l| pool.labels[l].cost < options.threshold)
        .collect();
    negative.sort_by(|&a, &b| {
        pool.labels[a]
            .cost
            .partial_cmp(&pool.labels[b].cost)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    negative.truncate(options.max_columns);
    let mut columns = Vec::with_capacity(negative.len());
    let mut reduced_costs = Vec::with_capacity(negative.len());
    for l in negative {
        let arcs = trace_arcs(&pool.labels, l);
        let survival = *pool.dist(pool.labels[l].dist).last().expect("non-empty");
        columns.push(Column::from_arcs_with_probability(graph, instance, arcs, survival));
        reduced_costs.push(pool.labels[l].cost);
    }
    PricingResult {
        columns,
        reduced_costs,
        min_reduced_cost,
        labels_created: pool.labels.len(),
        labels_dominated: dominated,
        truncated,
    }
}

/// Cheapest modified cost from every node to the sink, ignoring SoC and the chance term.
fn completion_bounds(graph: &DepotGraph, arc_cost: &[f64], removed: Option<&[bool]>) -> Vec<f64> {
    let mut best = vec![f64::INFINITY; graph.nodes().len()];
    best[SINK] = 0.0;
    for &u in graph.topological_order().iter().rev() {
        for &a in graph.out_arcs(u) {
            if removed.is_some_and(|r| r[a]) {
                continue;
            }
            let v = arc_cost[a] + best[graph.arc(a).head];
            if v < best[u] {
                best[u] = v;
            }
        }
    }
    best
}

fn trace_arcs(labels: &[Label], mut l: usize) -> Vec<ArcId> {
    let mut arcs = Vec::new();
    while let Some(a) = labels[l].arc {
        arcs.push(a);
        l = labels[l].pred.expect("arc implies predecessor");
    }
    arcs.reverse();
    arcs
}

/// Reduced cost of a column recomputed from its components.
pub fn column_reduced_cost(column: &Column, duals: &DualPrices) -> f64 {
    let mut c = column.cost - duals.depot[column.depot];
    for &t in &column.trips {
        c -= duals.trip[t];
    }
    for &(h, r) in &column.charger_use {
        c -= duals.charger[h][r];
    }
    c - duals.chance * column.log_probability
}
