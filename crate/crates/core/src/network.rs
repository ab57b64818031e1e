//! Per-depot connection network with time-expanded charging and waiting nodes.
//!
//! Station node timing: the waiting node of interval `r` stands for "at the station, free
//! at the end of interval `r`". A trip arriving during `r` reaches `waiting(r)`, charging
//! node `r + 1` occupies a charger during interval `r + 1`, and `waiting(r)` feeds trips
//! whose latest departure from the station falls in interval `r + 1`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::probability::SocStep;

pub type NodeId = usize;
pub type ArcId = usize;

pub const SOURCE: NodeId = 0;
pub const SINK: NodeId = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Source,
    Sink,
    Trip(usize),
    Charging { station: usize, interval: usize },
    Waiting { station: usize, interval: usize },
}

impl NodeKind {
    pub fn is_trip(&self) -> bool {
        matches!(self, NodeKind::Trip(_))
    }

    pub fn is_charging(&self) -> bool {
        matches!(self, NodeKind::Charging { .. })
    }

    pub fn is_waiting(&self) -> bool {
        matches!(self, NodeKind::Waiting { .. })
    }

    pub fn label(&self) -> String {
        match *self {
            NodeKind::Source => "source".into(),
            NodeKind::Sink => "sink".into(),
            NodeKind::Trip(t) => format!("trip:{t}"),
            NodeKind::Charging { station, interval } => format!("charge:{station}:{interval}"),
            NodeKind::Waiting { station, interval } => format!("wait:{station}:{interval}"),
        }
    }

    pub fn parse_label(label: &str) -> Option<Self> {
        let parts: Vec<&str> = label.split(':').collect();
        let num = |s: &str| s.parse::<usize>().ok();
        match parts.as_slice() {
            ["source"] => Some(NodeKind::Source),
            ["sink"] => Some(NodeKind::Sink),
            ["trip", t] => Some(NodeKind::Trip(num(t)?)),
            ["charge", h, r] => Some(NodeKind::Charging {
                station: num(h)?,
                interval: num(r)?,
            }),
            ["wait", h, r] => Some(NodeKind::Waiting {
                station: num(h)?,
                interval: num(r)?,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArcKind {
    PullOut,
    PullIn,
    Connection,
    Charging,
    ToCharge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
    pub kind: ArcKind,
    pub cost: f64,
    /// Deterministic deadhead energy, % of capacity.
    pub energy_pct: u32,
    /// Paid waiting minutes outside the depot.
    pub waiting_min: u32,
    pub via_depot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeInterval {
    pub index: usize,
    pub begin_min: u32,
    pub end_min: u32,
}

#[derive(Debug, Clone)]
pub struct DepotGraph {
    depot: usize,
    nodes: Vec<NodeKind>,
    arcs: Vec<Arc>,
    out_arcs: Vec<Vec<ArcId>>,
    in_arcs: Vec<Vec<ArcId>>,
    topo: Vec<NodeId>,
    intervals: Vec<TimeInterval>,
    trip_nodes: Vec<NodeId>,
    charging_nodes: Vec<Vec<NodeId>>,
    waiting_nodes: Vec<Vec<NodeId>>,
}

pub fn time_intervals(instance: &Instance) -> Vec<TimeInterval> {
    let rho = instance.soc_policy.interval_min;
    (0..instance.num_intervals())
        .map(|r| TimeInterval {
            index: r,
            begin_min: instance.horizon_start_min + r as u32 * rho,
            end_min: instance.horizon_start_min + (r as u32 + 1) * rho,
        })
        .collect()
}

/// Index of the interval containing `t`, if inside the horizon.
fn interval_of(intervals: &[TimeInterval], t: i64) -> Option<usize> {
    let first = intervals.first()?;
    if t < first.begin_min as i64 {
        return None;
    }
    let rho = (first.end_min - first.begin_min) as i64;
    let r = ((t - first.begin_min as i64) / rho) as usize;
    (r < intervals.len()).then_some(r)
}

/// Depot nearest to `location` by deadhead time (lowest id on ties).
pub fn nearest_depot(instance: &Instance, location: usize) -> usize {
    instance
        .depots
        .iter()
        .min_by_key(|d| (instance.travel.time(location, d.location), d.id))
        .map(|d| d.id)
        .expect("instance has depots")
}

/// Timing class of a trip-to-trip connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionTiming {
    Direct { waiting_min: u32 },
    ViaDepot { depot: usize },
}

/// Applies the connection rules to an ordered trip pair.
pub fn connection_timing(instance: &Instance, from: usize, to: usize) -> Option<ConnectionTiming> {
    if from == to {
        return None;
    }
    let ti = &instance.trips[from];
    let tj = &instance.trips[to];
    let policy = &instance.soc_policy;
    let slack = tj.departure_min as i64
        - (ti.arrival_min() as i64
            + instance.travel.time(ti.destination, tj.origin) as i64
            + policy.min_layover_min as i64);
    if slack < 0 {
        return None;
    }
    if slack <= policy.max_terminal_wait_min as i64 {
        return Some(ConnectionTiming::Direct {
            waiting_min: slack as u32,
        });
    }
    let depot = nearest_depot(instance, ti.destination);
    let loc = instance.depots[depot].location;
    let detour = instance.travel.time(ti.destination, loc) + instance.travel.time(loc, tj.origin);
    let ready = ti.arrival_min() as i64 + detour as i64 + policy.min_layover_min as i64;
    (ready <= tj.departure_min as i64).then_some(ConnectionTiming::ViaDepot { depot })
}

/// Builds the network of one depot.
pub fn build_graph(instance: &Instance, depot: usize) -> DepotGraph {
    let policy = &instance.soc_policy;
    let costs = &instance.costs;
    let travel = &instance.travel;
    let depot_loc = instance.depots[depot].location;
    let intervals = time_intervals(instance);
    let n_int = intervals.len();
    let rho = policy.interval_min;

    let mut nodes = vec![NodeKind::Source, NodeKind::Sink];
    let trip_nodes: Vec<NodeId> = instance
        .trips
        .iter()
        .map(|t| {
            nodes.push(NodeKind::Trip(t.id));
            nodes.len() - 1
        })
        .collect();
    let mut charging_nodes = Vec::with_capacity(instance.stations.len());
    let mut waiting_nodes = Vec::with_capacity(instance.stations.len());
    for h in &instance.stations {
        let mut c = Vec::with_capacity(n_int);
        let mut w = Vec::with_capacity(n_int);
        for r in 0..n_int {
            nodes.push(NodeKind::Charging {
                station: h.id,
                interval: r,
            });
            c.push(nodes.len() - 1);
            nodes.push(NodeKind::Waiting {
                station: h.id,
                interval: r,
            });
            w.push(nodes.len() - 1);
        }
        charging_nodes.push(c);
        waiting_nodes.push(w);
    }

    let mut arcs = Vec::new();
    let mut push = |tail, head, kind, cost: f64, energy_pct, waiting_min, via_depot| {
        arcs.push(Arc {
            tail,
            head,
            kind,
            cost,
            energy_pct,
            waiting_min,
            via_depot,
        });
    };

    for t in &instance.trips {
        let node = trip_nodes[t.id];
        push(
            SOURCE,
            node,
            ArcKind::PullOut,
            costs.vehicle + costs.deadhead_per_min * travel.time(depot_loc, t.origin) as f64,
            travel.energy(depot_loc, t.origin),
            0,
            false,
        );
        push(
            node,
            SINK,
            ArcKind::PullIn,
            costs.deadhead_per_min * travel.time(t.destination, depot_loc) as f64,
            travel.energy(t.destination, depot_loc),
            0,
            false,
        );
    }

    for ti in &instance.trips {
        for tj in &instance.trips {
            match connection_timing(instance, ti.id, tj.id) {
                None => {}
                Some(ConnectionTiming::Direct { waiting_min }) => push(
                    trip_nodes[ti.id],
                    trip_nodes[tj.id],
                    ArcKind::Connection,
                    costs.deadhead_per_min * travel.time(ti.destination, tj.origin) as f64
                        + costs.waiting_per_min * waiting_min as f64,
                    travel.energy(ti.destination, tj.origin),
                    waiting_min,
                    false,
                ),
                Some(ConnectionTiming::ViaDepot { depot: q }) => {
                    let loc = instance.depots[q].location;
                    let minutes =
                        travel.time(ti.destination, loc) + travel.time(loc, tj.origin);
                    push(
                        trip_nodes[ti.id],
                        trip_nodes[tj.id],
                        ArcKind::Connection,
                        costs.deadhead_per_min * minutes as f64,
                        travel.energy(ti.destination, loc) + travel.energy(loc, tj.origin),
                        0,
                        true,
                    );
                }
            }
        }
    }

    let station_wait = costs.waiting_per_min * rho as f64;
    for h in &instance.stations {
        let c = &charging_nodes[h.id];
        let w = &waiting_nodes[h.id];
        for r in 0..n_int {
            if r + 1 < n_int {
                push(w[r], w[r + 1], ArcKind::Charging, station_wait, 0, rho, false);
                push(c[r], c[r + 1], ArcKind::Charging, station_wait, 0, rho, false);
                push(
                    w[r],
                    c[r + 1],
                    ArcKind::Charging,
                    costs.charging_activity + station_wait,
                    0,
                    rho,
                    false,
                );
            }
            push(c[r], w[r], ArcKind::Charging, 0.0, 0, 0, false);
        }
        if let Some(&last) = w.last() {
            push(
                last,
                SINK,
                ArcKind::PullIn,
                costs.deadhead_per_min * travel.time(h.location, depot_loc) as f64,
                travel.energy(h.location, depot_loc),
                0,
                false,
            );
        }
        for t in &instance.trips {
            // Arrival at the station after trip t.
            let arrive = t.arrival_min() as i64 + travel.time(t.destination, h.location) as i64;
            if let Some(r) = interval_of(&intervals, arrive) {
                let wait = intervals[r].end_min as i64 - arrive;
                push(
                    trip_nodes[t.id],
                    w[r],
                    ArcKind::ToCharge,
                    costs.deadhead_per_min * travel.time(t.destination, h.location) as f64
                        + costs.waiting_per_min * wait as f64,
                    travel.energy(t.destination, h.location),
                    wait as u32,
                    false,
                );
            }
            // Latest departure from the station that still makes trip t.
            let leave = t.departure_min as i64
                - policy.min_layover_min as i64
                - travel.time(h.location, t.origin) as i64;
            if let Some(r1) = interval_of(&intervals, leave) {
                if r1 >= 1 {
                    let r = r1 - 1;
                    let wait = leave - intervals[r].end_min as i64;
                    push(
                        w[r],
                        trip_nodes[t.id],
                        ArcKind::Charging,
                        costs.deadhead_per_min * travel.time(h.location, t.origin) as f64
                            + costs.waiting_per_min * wait as f64,
                        travel.energy(h.location, t.origin),
                        wait as u32,
                        false,
                    );
                }
            }
        }
    }

    DepotGraph::from_parts(depot, nodes, arcs, intervals)
        .expect("generated network is acyclic")
}

/// Kahn topological order, or `None` if the arcs contain a cycle.
fn topological_order(n: usize, arcs: &[Arc], out_arcs: &[Vec<ArcId>]) -> Option<Vec<NodeId>> {
    let mut indeg = vec![0usize; n];
    for a in arcs {
        indeg[a.head] += 1;
    }
    let mut queue: VecDeque<NodeId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &a in &out_arcs[v] {
            let h = arcs[a].head;
            indeg[h] -= 1;
            if indeg[h] == 0 {
                queue.push_back(h);
            }
        }
    }
    (order.len() == n).then_some(order)
}

impl DepotGraph {
    /// Assembles a graph from explicit nodes and arcs. Node 0 must be the source and node 1
    /// the sink. Cyclic input is rejected.
    pub fn from_parts(
        depot: usize,
        nodes: Vec<NodeKind>,
        arcs: Vec<Arc>,
        intervals: Vec<TimeInterval>,
    ) -> Result<Self> {
        let g = Self::from_parts_unchecked(depot, nodes, arcs, intervals);
        if g.topo.len() != g.nodes.len() {
            return Err(Error::Validation("network contains a cycle".into()));
        }
        Ok(g)
    }

    /// Like [`DepotGraph::from_parts`] but keeps cyclic graphs (with an empty order) so that
    /// [`validate_graph`] can report them.
    pub fn from_parts_unchecked(
        depot: usize,
        nodes: Vec<NodeKind>,
        arcs: Vec<Arc>,
        intervals: Vec<TimeInterval>,
    ) -> Self {
        let n = nodes.len();
        let mut out_arcs = vec![Vec::new(); n];
        let mut in_arcs = vec![Vec::new(); n];
        for (id, a) in arcs.iter().enumerate() {
            out_arcs[a.tail].push(id);
            in_arcs[a.head].push(id);
        }
        let topo = topological_order(n, &arcs, &out_arcs).unwrap_or_default();
        let mut trip_nodes = Vec::new();
        let mut charging_nodes: Vec<Vec<NodeId>> = Vec::new();
        let mut waiting_nodes: Vec<Vec<NodeId>> = Vec::new();
        for (id, kind) in nodes.iter().enumerate() {
            match *kind {
                NodeKind::Trip(t) => {
                    if trip_nodes.len() <= t {
                        trip_nodes.resize(t + 1, usize::MAX);
                    }
                    trip_nodes[t] = id;
                }
                NodeKind::Charging { station, interval } => {
                    place(&mut charging_nodes, station, interval, id)
                }
                NodeKind::Waiting { station, interval } => {
                    place(&mut waiting_nodes, station, interval, id)
                }
                _ => {}
            }
        }
        Self {
            depot,
            nodes,
            arcs,
            out_arcs,
            in_arcs,
            topo,
            intervals,
            trip_nodes,
            charging_nodes,
            waiting_nodes,
        }
    }

    pub fn depot(&self) -> usize {
        self.depot
    }

    pub fn nodes(&self) -> &[NodeKind] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> NodeKind {
        self.nodes[id]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id]
    }

    pub fn out_arcs(&self, node: NodeId) -> &[ArcId] {
        &self.out_arcs[node]
    }

    pub fn in_arcs(&self, node: NodeId) -> &[ArcId] {
        &self.in_arcs[node]
    }

    pub fn topological_order(&self) -> &[NodeId] {
        &self.topo
    }

    pub fn intervals(&self) -> &[TimeInterval] {
        &self.intervals
    }

    pub fn trip_node(&self, trip: usize) -> NodeId {
        self.trip_nodes[trip]
    }

    pub fn num_trips(&self) -> usize {
        self.trip_nodes.len()
    }

    pub fn charging_node_count(&self) -> usize {
        self.charging_nodes.iter().map(Vec::len).sum()
    }

    pub fn waiting_node_count(&self) -> usize {
        self.waiting_nodes.iter().map(Vec::len).sum()
    }

    pub fn count_arcs(&self, kind: ArcKind) -> usize {
        self.arcs.iter().filter(|a| a.kind == kind).count()
    }

    pub fn find_arc(&self, tail: NodeId, head: NodeId) -> Option<ArcId> {
        self.out_arcs[tail]
            .iter()
            .copied()
            .find(|&a| self.arcs[a].head == head)
    }

    pub fn node_by_kind(&self, kind: NodeKind) -> Option<NodeId> {
        match kind {
            NodeKind::Source => Some(SOURCE),
            NodeKind::Sink => Some(SINK),
            NodeKind::Trip(t) => self.trip_nodes.get(t).copied().filter(|&n| n != usize::MAX),
            NodeKind::Charging { station, interval } => self
                .charging_nodes
                .get(station)
                .and_then(|v| v.get(interval))
                .copied(),
            NodeKind::Waiting { station, interval } => self
                .waiting_nodes
                .get(station)
                .and_then(|v| v.get(interval))
                .copied(),
        }
    }

    /// Arc ids of a node sequence, or `None` when two consecutive nodes are not linked.
    pub fn path_arcs(&self, nodes: &[NodeId]) -> Option<Vec<ArcId>> {
        nodes
            .windows(2)
            .map(|w| self.find_arc(w[0], w[1]))
            .collect()
    }

    /// Node sequence visited by an arc path (starting with the first tail).
    pub fn path_nodes(&self, arcs: &[ArcId]) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(arcs.len() + 1);
        if let Some(&first) = arcs.first() {
            out.push(self.arcs[first].tail);
        }
        out.extend(arcs.iter().map(|&a| self.arcs[a].head));
        out
    }

    /// SoC steps of an arc path, for use with [`crate::probability`].
    pub fn soc_steps<'a>(&self, instance: &'a Instance, arcs: &[ArcId]) -> Vec<SocStep<'a>> {
        arcs.iter()
            .map(|&a| {
                let arc = &self.arcs[a];
                match self.nodes[arc.head] {
                    NodeKind::Trip(t) => SocStep::Trip {
                        energy: &instance.trips[t].energy_pmf,
                        deadhead_pct: arc.energy_pct,
                    },
                    NodeKind::Charging { .. } => SocStep::Charge,
                    _ => SocStep::Move {
                        deadhead_pct: arc.energy_pct,
                    },
                }
            })
            .collect()
    }

    /// Plain-text listing of nodes and arcs.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# depot {} nodes {} arcs {}",
            self.depot,
            self.nodes.len(),
            self.arcs.len()
        );
        for (id, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "node {id} {}", n.label());
        }
        for (id, a) in self.arcs.iter().enumerate() {
            let _ = writeln!(
                s,
                "arc {id} {} -> {} {:?} cost={:.2} energy={} wait={} via_depot={}",
                self.nodes[a.tail].label(),
                self.nodes[a.head].label(),
                a.kind,
                a.cost,
                a.energy_pct,
                a.waiting_min,
                a.via_depot
            );
        }
        s
    }
}

fn place(table: &mut Vec<Vec<NodeId>>, station: usize, interval: usize, id: NodeId) {
    if table.len() <= station {
        table.resize(station + 1, Vec::new());
    }
    let row = &mut table[station];
    if row.len() <= interval {
        row.resize(interval + 1, usize::MAX);
    }
    row[interval] = id;
}

/// Checks structural invariants of a network and returns every violation found.
pub fn validate_graph(graph: &DepotGraph, instance: &Instance) -> Vec<String> {
    let mut v = Vec::new();
    let nodes = graph.nodes();
    let n = nodes.len();
    if graph.topological_order().len() != n {
        v.push("graph is not acyclic".to_string());
    }
    let sources = nodes.iter().filter(|k| **k == NodeKind::Source).count();
    let sinks = nodes.iter().filter(|k| **k == NodeKind::Sink).count();
    if sources != 1 || sinks != 1 || nodes.first() != Some(&NodeKind::Source) || nodes.get(1) != Some(&NodeKind::Sink) {
        v.push(format!("expected one source (node 0) and one sink (node 1), found {sources}/{sinks}"));
    }
    let expected = instance.stations.len() * instance.num_intervals();
    if graph.charging_node_count() != expected || graph.waiting_node_count() != expected {
        v.push(format!(
            "expected {expected} charging and waiting nodes, found {} and {}",
            graph.charging_node_count(),
            graph.waiting_node_count()
        ));
    }

    let intervals = graph.intervals();
    let policy = &instance.soc_policy;
    let travel = &instance.travel;
    let station_loc = |h: usize| instance.stations[h].location;
    for (id, a) in graph.arcs().iter().enumerate() {
        let (t, h) = (nodes[a.tail], nodes[a.head]);
        if a.cost < 0.0 {
            v.push(format!("arc {id}: negative cost"));
        }
        if h == NodeKind::Source || t == NodeKind::Sink {
            v.push(format!("arc {id}: enters the source or leaves the sink"));
        }
        if t.is_trip() && h.is_charging() {
            v.push(format!("arc {id}: trip directly followed by a charging node"));
        }
        match (a.kind, t, h) {
            (ArcKind::PullOut, NodeKind::Source, NodeKind::Trip(_)) => {}
            (ArcKind::PullIn, NodeKind::Trip(_), NodeKind::Sink) => {}
            (ArcKind::PullIn, NodeKind::Waiting { interval, .. }, NodeKind::Sink) => {
                if interval + 1 != intervals.len() {
                    v.push(format!("arc {id}: pull-in from a waiting node before the last interval"));
                }
            }
            (ArcKind::Connection, NodeKind::Trip(i), NodeKind::Trip(j)) => {
                let (ti, tj) = (&instance.trips[i], &instance.trips[j]);
                let earliest = ti.arrival_min() as i64
                    + travel.time(ti.destination, tj.origin) as i64
                    + policy.min_layover_min as i64;
                if (tj.departure_min as i64) < earliest {
                    v.push(format!("arc {id}: connection trip {i} -> trip {j} goes back in time"));
                }
                let slack = tj.departure_min as i64 - earliest;
                if slack > policy.max_terminal_wait_min as i64 && !a.via_depot {
                    v.push(format!("arc {id}: {slack} min terminal wait without depot detour"));
                }
            }
            (ArcKind::ToCharge, NodeKind::Trip(i), NodeKind::Waiting { station, interval }) => {
                let ti = &instance.trips[i];
                let arrive = ti.arrival_min() + travel.time(ti.destination, station_loc(station));
                let iv = intervals[interval];
                if !(iv.begin_min <= arrive && arrive < iv.end_min) {
                    v.push(format!("arc {id}: station arrival {arrive} outside interval {interval}"));
                }
            }
            (ArcKind::Charging, NodeKind::Waiting { station, interval }, NodeKind::Trip(j)) => {
                let tj = &instance.trips[j];
                let leave = tj.departure_min as i64
                    - policy.min_layover_min as i64
                    - travel.time(station_loc(station), tj.origin) as i64;
                let ok = intervals
                    .get(interval + 1)
                    .is_some_and(|iv| iv.begin_min as i64 <= leave && leave < iv.end_min as i64);
                if !ok {
                    v.push(format!("arc {id}: waiting node {interval} cannot reach trip {j} in time"));
                }
            }
            (
                ArcKind::Charging,
                NodeKind::Waiting { station: s1, interval: r1 },
                NodeKind::Waiting { station: s2, interval: r2 },
            )
            | (
                ArcKind::Charging,
                NodeKind::Charging { station: s1, interval: r1 },
                NodeKind::Charging { station: s2, interval: r2 },
            )
            | (
                ArcKind::Charging,
                NodeKind::Waiting { station: s1, interval: r1 },
                NodeKind::Charging { station: s2, interval: r2 },
            ) => {
                if s1 != s2 || r2 != r1 + 1 {
                    v.push(format!("arc {id}: station chain must advance one interval"));
                }
            }
            (
                ArcKind::Charging,
                NodeKind::Charging { station: s1, interval: r1 },
                NodeKind::Waiting { station: s2, interval: r2 },
            ) => {
                if s1 != s2 || r1 != r2 {
                    v.push(format!("arc {id}: charging node must release into the same interval"));
                }
            }
            _ => v.push(format!(
                "arc {id}: kind {:?} not allowed from {} to {}",
                a.kind,
                t.label(),
                h.label()
            )),
        }
    }

    // Reachability of trips from the source and to the sink.
    let reach = |start: NodeId, forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            let list = if forward { graph.out_arcs(u) } else { graph.in_arcs(u) };
            for &a in list {
                let w = if forward { graph.arc(a).head } else { graph.arc(a).tail };
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    if n > SINK {
        let fwd = reach(SOURCE, true);
        let bwd = reach(SINK, false);
        for (id, k) in nodes.iter().enumerate() {
            if k.is_trip() && !(fwd[id] && bwd[id]) {
                v.push(format!("{} is not on any source-sink path", k.label()));
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_instance, CostParams, EnergyPmf, SocPolicy};

    fn base() -> Instance {
        generate_instance(60, 5, SocPolicy::range(20, 80), CostParams::default()).unwrap()
    }

    /// Two trips at terminal A, with the second departing at `second_departure`.
    fn pair(second_departure: u32) -> Instance {
        let mut inst = base();
        inst.trips.truncate(2);
        for (i, t) in inst.trips.iter_mut().enumerate() {
            t.id = i;
            t.origin = 0;
            t.destination = 0;
            t.travel_time_min = 30;
            t.energy_pmf = EnergyPmf::point_mass(5);
        }
        inst.trips[0].departure_min = 9 * 60 + 30; // ends 10:00
        inst.trips[1].departure_min = second_departure;
        inst.costs.under_cover_caps.truncate(2);
        inst.costs.over_cover_caps.truncate(2);
        inst.validate().unwrap();
        inst
    }

    #[test]
    fn short_wait_connection() {
        let inst = pair(10 * 60 + 20);
        let g = build_graph(&inst, 0);
        let a = g.find_arc(g.trip_node(0), g.trip_node(1)).expect("connection exists");
        let arc = g.arc(a);
        assert_eq!(arc.kind, ArcKind::Connection);
        assert_eq!(arc.waiting_min, 15);
        assert!(!arc.via_depot);
        assert!((arc.cost - 15.0 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn long_wait_goes_via_depot() {
        // Depot sits at terminal A, so the detour from B costs a round trip of deadheads.
        let mut inst = pair(11 * 60);
        inst.trips[0].destination = 1;
        inst.trips[1].origin = 1;
        inst.trips[1].departure_min = 11 * 60 + 30;
        let g = build_graph(&inst, 0);
        let a = g.find_arc(g.trip_node(0), g.trip_node(1)).expect("arc exists");
        let arc = g.arc(a);
        assert!(arc.via_depot);
        assert_eq!(arc.energy_pct, 2 * inst.travel.energy(1, 2));
        let minutes = inst.travel.time(1, 2) + inst.travel.time(2, 1);
        assert!((arc.cost - 0.4 * minutes as f64).abs() < 1e-12);

        let same = pair(11 * 60);
        let g = build_graph(&same, 0);
        let arc = g.arc(g.find_arc(g.trip_node(0), g.trip_node(1)).unwrap());
        assert!(arc.via_depot);
        assert_eq!(arc.energy_pct, 0);
    }

    #[test]
    fn infeasible_pair_has_no_arc() {
        let inst = pair(10 * 60 + 3);
        let g = build_graph(&inst, 0);
        assert!(g.find_arc(g.trip_node(0), g.trip_node(1)).is_none());
        assert!(g.find_arc(g.trip_node(1), g.trip_node(0)).is_none());
    }

    #[test]
    fn generated_graph_is_valid() {
        let inst = base();
        let g = build_graph(&inst, 0);
        let violations = validate_graph(&g, &inst);
        assert!(violations.is_empty(), "{violations:?}");
        assert_eq!(g.charging_node_count(), 76);
        assert_eq!(g.waiting_node_count(), 76);
        // Same order of magnitude as the 60-trip benchmark family (about 2,200 arcs).
        let n = g.arcs().len();
        assert!((1_000..5_000).contains(&n), "{n} arcs");
    }

    #[test]
    fn seven_intervals_one_station() {
        let mut inst = pair(10 * 60 + 20);
        inst.horizon_start_min = 9 * 60;
        inst.horizon_end_min = 9 * 60 + 7 * 15;
        let g = build_graph(&inst, 0);
        assert_eq!(g.charging_node_count(), 7);
        assert_eq!(g.waiting_node_count(), 7);
        assert!(validate_graph(&g, &inst).is_empty());
    }

    #[test]
    fn back_in_time_arc_is_reported() {
        let inst = pair(10 * 60 + 20);
        let g = build_graph(&inst, 0);
        let mut arcs = g.arcs().to_vec();
        arcs.push(Arc {
            tail: g.trip_node(1),
            head: g.trip_node(0),
            kind: ArcKind::Connection,
            cost: 0.0,
            energy_pct: 0,
            waiting_min: 0,
            via_depot: false,
        });
        let bad = DepotGraph::from_parts_unchecked(0, g.nodes().to_vec(), arcs, g.intervals().to_vec());
        let violations = validate_graph(&bad, &inst);
        assert!(violations.iter().any(|s| s.contains("back in time")), "{violations:?}");
        assert!(violations.iter().any(|s| s.contains("acyclic")), "{violations:?}");
    }

    #[test]
    fn node_labels_round_trip() {
        let g = build_graph(&base(), 0);
        for (id, k) in g.nodes().iter().enumerate() {
            let parsed = NodeKind::parse_label(&k.label()).unwrap();
            assert_eq!(g.node_by_kind(parsed), Some(id));
        }
    }

    #[test]
    fn timing_of_station_arcs() {
        let inst = base();
        let g = build_graph(&inst, 0);
        for a in g.arcs() {
            if let (NodeKind::Waiting { interval, .. }, NodeKind::Trip(j)) = (g.node(a.tail), g.node(a.head)) {
                let iv = g.intervals()[interval];
                // The vehicle is free at the end of the interval and departs no earlier.
                let leave = inst.trips[j].departure_min - inst.soc_policy.min_layover_min;
                assert!(iv.end_min <= leave);
            }
        }
    }
}
