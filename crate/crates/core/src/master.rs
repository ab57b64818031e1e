//! Restricted master problem: perturbed set partitioning with depot, fleet-size and charger
//! capacity rows and the linearised chance constraint.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::charging::ChargingTable;
use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::lp::{LpSolver, RevisedSimplex, SparseColumn};
use crate::network::{ArcId, DepotGraph, NodeKind};
use crate::pricing::DualPrices;
use crate::probability::schedule_probability;

/// Cost of the artificial column covering a single trip.
pub const ARTIFICIAL_COST: f64 = 1e5;
/// Tolerance for treating an LP value as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// A vehicle schedule usable as a master column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub depot: usize,
    pub arcs: Vec<ArcId>,
    pub cost: f64,
    /// Covered trips, ascending.
    pub trips: Vec<usize>,
    /// `(station, interval)` of each charging node on the path.
    pub charger_use: Vec<(usize, usize)>,
    /// `ln P_s`.
    pub log_probability: f64,
}

impl Column {
    /// Builds a column from an arc path, computing its probability from scratch.
    pub fn from_arcs(
        graph: &DepotGraph,
        instance: &Instance,
        table: &ChargingTable,
        arcs: Vec<ArcId>,
    ) -> Result<Self> {
        let p = schedule_probability(graph.soc_steps(instance, &arcs), &instance.soc_policy, table)?;
        Ok(Self::from_arcs_with_probability(graph, instance, arcs, p))
    }

    /// Builds a column from an arc path with a known survival probability.
    pub fn from_arcs_with_probability(
        graph: &DepotGraph,
        _instance: &Instance,
        arcs: Vec<ArcId>,
        probability: f64,
    ) -> Self {
        let mut cost = 0.0;
        let mut trips = Vec::new();
        let mut charger_use = Vec::new();
        for &a in &arcs {
            let arc = graph.arc(a);
            cost += arc.cost;
            match graph.node(arc.head) {
                NodeKind::Trip(t) => trips.push(t),
                NodeKind::Charging { station, interval } => charger_use.push((station, interval)),
                _ => {}
            }
        }
        trips.sort_unstable();
        Self {
            depot: graph.depot(),
            arcs,
            cost,
            trips,
            charger_use,
            log_probability: probability.ln(),
        }
    }

    pub fn probability(&self) -> f64 {
        self.log_probability.exp()
    }

    pub fn recompute_probability(
        &self,
        graph: &DepotGraph,
        instance: &Instance,
        table: &ChargingTable,
    ) -> Result<f64> {
        schedule_probability(graph.soc_steps(instance, &self.arcs), &instance.soc_policy, table)
    }

    /// Node labels along the schedule, source and sink included.
    pub fn node_labels(&self, graph: &DepotGraph) -> Vec<String> {
        graph
            .path_nodes(&self.arcs)
            .into_iter()
            .map(|n| graph.node(n).label())
            .collect()
    }
}

/// Row layout of the master LP.
#[derive(Debug, Clone, Copy)]
struct Rows {
    trips: usize,
    depots: usize,
    stations: usize,
    intervals: usize,
}

impl Rows {
    fn cover(&self, i: usize) -> usize {
        i
    }
    fn depot(&self, d: usize) -> usize {
        self.trips + d
    }
    fn fleet(&self) -> usize {
        self.trips + self.depots
    }
    fn charger(&self, h: usize, r: usize) -> usize {
        self.trips + self.depots + 1 + h * self.intervals + r
    }
    fn chance(&self) -> usize {
        self.trips + self.depots + 1 + self.stations * self.intervals
    }
    fn count(&self) -> usize {
        self.chance() + 1
    }
}

/// Optimal solution of the restricted master problem.
#[derive(Debug, Clone)]
pub struct RmpSolution {
    pub objective: f64,
    pub dual_objective: f64,
    /// Values of the pooled schedule columns.
    pub y: Vec<f64>,
    pub artificial: Vec<f64>,
    pub under_cover: Vec<f64>,
    pub over_cover: Vec<f64>,
    pub duals: DualPrices,
    pub iterations: usize,
}

impl RmpSolution {
    pub fn uses_artificials(&self) -> bool {
        self.artificial.iter().any(|&a| a > INTEGRALITY_TOL)
    }

    pub fn uses_perturbation(&self) -> bool {
        self.under_cover
            .iter()
            .chain(&self.over_cover)
            .any(|&e| e > INTEGRALITY_TOL)
    }

    pub fn is_integral(&self) -> bool {
        self.y
            .iter()
            .all(|&v| v.min(1.0 - v).abs() <= INTEGRALITY_TOL || v < INTEGRALITY_TOL)
    }

    pub fn fleet_size(&self) -> f64 {
        self.y.iter().sum()
    }

    /// Indices of columns at value one.
    pub fn selected(&self) -> Vec<usize> {
        (0..self.y.len())
            .filter(|&k| self.y[k] > 1.0 - INTEGRALITY_TOL)
            .collect()
    }
}

/// Restricted master problem state.
pub struct MasterState {
    rows: Rows,
    lp: Box<dyn LpSolver + Send>,
    columns: Vec<Column>,
    keys: HashMap<(usize, Vec<ArcId>), usize>,
    under_caps: Vec<f64>,
    over_caps: Vec<f64>,
    perturbation_active: bool,
    log_bound: f64,
    costs: Vec<f64>,
    lp_cols: Vec<SparseColumn>,
    first_schedule: usize,
}

impl MasterState {
    pub fn new(instance: &Instance) -> Self {
        Self::with_solver(instance, |lo, up| Box::new(RevisedSimplex::new(lo, up)))
    }

    /// Builds the master with a custom LP engine.
    pub fn with_solver(
        instance: &Instance,
        make: impl FnOnce(&[f64], &[f64]) -> Box<dyn LpSolver + Send>,
    ) -> Self {
        let rows = Rows {
            trips: instance.trips.len(),
            depots: instance.depots.len(),
            stations: instance.stations.len(),
            intervals: instance.num_intervals(),
        };
        let m = rows.count();
        let mut lo = vec![0.0; m];
        let mut up = vec![0.0; m];
        for i in 0..rows.trips {
            lo[rows.cover(i)] = 1.0;
            up[rows.cover(i)] = 1.0;
        }
        for d in &instance.depots {
            lo[rows.depot(d.id)] = f64::NEG_INFINITY;
            up[rows.depot(d.id)] = d.capacity_vehicles as f64;
        }
        lo[rows.fleet()] = 0.0;
        up[rows.fleet()] = f64::INFINITY;
        for h in &instance.stations {
            for r in 0..rows.intervals {
                lo[rows.charger(h.id, r)] = f64::NEG_INFINITY;
                up[rows.charger(h.id, r)] = h.chargers as f64;
            }
        }
        let log_bound = instance.soc_policy.log_survival_bound();
        lo[rows.chance()] = log_bound;
        up[rows.chance()] = f64::INFINITY;

        let mut state = Self {
            rows,
            lp: make(&lo, &up),
            columns: Vec::new(),
            keys: HashMap::new(),
            under_caps: instance.costs.under_cover_caps.clone(),
            over_caps: instance.costs.over_cover_caps.clone(),
            perturbation_active: true,
            log_bound,
            costs: Vec::new(),
            lp_cols: Vec::new(),
            first_schedule: 0,
        };
        let n = rows.trips;
        for i in 0..n {
            state.push_lp_col(ARTIFICIAL_COST, 0.0, f64::INFINITY, vec![(rows.cover(i), 1.0)]);
        }
        for i in 0..n {
            state.push_lp_col(
                instance.costs.under_cover_penalty,
                0.0,
                state.under_caps[i],
                vec![(rows.cover(i), 1.0)],
            );
        }
        for i in 0..n {
            state.push_lp_col(
                instance.costs.over_cover_penalty,
                0.0,
                state.over_caps[i],
                vec![(rows.cover(i), -1.0)],
            );
        }
        state.first_schedule = 3 * n;
        state
    }

    fn push_lp_col(&mut self, cost: f64, lo: f64, up: f64, col: SparseColumn) -> usize {
        self.costs.push(cost);
        self.lp_cols.push(col.clone());
        self.lp.add_column(cost, lo, up, col)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, k: usize) -> &Column {
        &self.columns[k]
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn log_bound(&self) -> f64 {
        self.log_bound
    }

    pub fn perturbation_active(&self) -> bool {
        self.perturbation_active
    }

    /// Index of an already pooled schedule.
    pub fn find(&self, column: &Column) -> Option<usize> {
        self.keys.get(&(column.depot, column.arcs.clone())).copied()
    }

    /// Adds columns not yet in the pool and returns how many were added.
    pub fn add_columns(&mut self, columns: impl IntoIterator<Item = Column>) -> usize {
        let mut added = 0;
        for c in columns {
            let key = (c.depot, c.arcs.clone());
            if self.keys.contains_key(&key) {
                continue;
            }
            let mut entries: SparseColumn = c.trips.iter().map(|&t| (self.rows.cover(t), 1.0)).collect();
            entries.push((self.rows.depot(c.depot), 1.0));
            entries.push((self.rows.fleet(), 1.0));
            for &(h, r) in &c.charger_use {
                entries.push((self.rows.charger(h, r), 1.0));
            }
            if c.log_probability != 0.0 {
                entries.push((self.rows.chance(), c.log_probability));
            }
            self.push_lp_col(c.cost, 0.0, 1.0, entries);
            self.keys.insert(key, self.columns.len());
            self.columns.push(c);
            added += 1;
        }
        added
    }

    /// Sets the bounds of a pooled schedule variable.
    pub fn set_column_bounds(&mut self, k: usize, lower: f64, upper: f64) {
        self.lp.set_column_bounds(self.first_schedule + k, lower, upper);
    }

    pub fn column_bounds(&self, k: usize) -> (f64, f64) {
        self.lp.column_bounds(self.first_schedule + k)
    }

    /// Bounds on the total number of vehicles.
    pub fn set_fleet_bounds(&mut self, lower: f64, upper: f64) {
        self.lp.set_row_bounds(self.rows.fleet(), lower, upper);
    }

    pub fn fleet_bounds(&self) -> (f64, f64) {
        self.lp.row_bounds(self.rows.fleet())
    }

    /// Forces every perturbation variable to zero, restoring exact partitioning.
    pub fn strip_perturbation(&mut self) {
        let n = self.rows.trips;
        for i in 0..2 * n {
            self.lp.set_column_bounds(n + i, 0.0, 0.0);
        }
        self.perturbation_active = false;
    }

    /// Re-opens the perturbation variables with their original caps.
    pub fn restore_perturbation(&mut self) {
        let n = self.rows.trips;
        for i in 0..n {
            self.lp.set_column_bounds(n + i, 0.0, self.under_caps[i]);
            self.lp.set_column_bounds(2 * n + i, 0.0, self.over_caps[i]);
        }
        self.perturbation_active = true;
    }

    pub fn solve_rmp(&mut self) -> Result<RmpSolution> {
        let sol = self.lp.solve()?;
        let n = self.rows.trips;
        let r = self.rows;
        let fleet_dual = sol.duals[r.fleet()];
        let duals = DualPrices {
            trip: (0..n).map(|i| sol.duals[r.cover(i)]).collect(),
            depot: (0..r.depots).map(|d| sol.duals[r.depot(d)] + fleet_dual).collect(),
            charger: (0..r.stations)
                .map(|h| (0..r.intervals).map(|t| sol.duals[r.charger(h, t)]).collect())
                .collect(),
            chance: sol.duals[r.chance()],
        };
        let dual_objective = self.dual_objective(&sol);
        Ok(RmpSolution {
            objective: sol.objective,
            dual_objective,
            y: sol.x[self.first_schedule..].to_vec(),
            artificial: sol.x[..n].to_vec(),
            under_cover: sol.x[n..2 * n].to_vec(),
            over_cover: sol.x[2 * n..3 * n].to_vec(),
            duals,
            iterations: sol.iterations,
        })
    }

    fn dual_objective(&self, sol: &crate::lp::LpSolution) -> f64 {
        let mut obj = 0.0;
        let mut term = |d: f64, lo: f64, up: f64| {
            if d > 1e-9 {
                obj += d * lo;
            } else if d < -1e-9 {
                obj += d * up;
            }
        };
        for j in 0..self.lp.num_cols() {
            let (lo, up) = self.lp.column_bounds(j);
            term(sol.reduced_costs[j], lo, up);
        }
        for i in 0..self.lp.num_rows() {
            let (lo, up) = self.lp.row_bounds(i);
            term(sol.duals[i], lo, up);
        }
        obj
    }

    /// CPLEX-style LP text of the current restricted master.
    pub fn to_lp_text(&self) -> String {
        let mut s = String::from("Minimize\n obj:");
        for (j, c) in self.costs.iter().enumerate() {
            let _ = write!(s, " + {c} x{j}");
        }
        s.push_str("\nSubject To\n");
        let m = self.lp.num_rows();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (j, col) in self.lp_cols.iter().enumerate() {
            for &(i, a) in col {
                rows[i].push((j, a));
            }
        }
        for (i, terms) in rows.iter().enumerate() {
            let (lo, up) = self.lp.row_bounds(i);
            let lhs: String = terms.iter().map(|(j, a)| format!(" + {a} x{j}")).collect();
            let lhs = if lhs.is_empty() { " 0 x0".to_string() } else { lhs };
            if lo == up {
                let _ = writeln!(s, " r{i}:{lhs} = {lo}");
            } else {
                if lo.is_finite() {
                    let _ = writeln!(s, " r{i}_lo:{lhs} >= {lo}");
                }
                if up.is_finite() {
                    let _ = writeln!(s, " r{i}_up:{lhs} <= {up}");
                }
            }
        }
        s.push_str("Bounds\n");
        for j in 0..self.lp.num_cols() {
            let (lo, up) = self.lp.column_bounds(j);
            if up.is_finite() {
                let _ = writeln!(s, " {lo} <= x{j} <= {up}");
            } else {
                let _ = writeln!(s, " x{j} >= {lo}");
            }
        }
        s.push_str("End\n");
        s
    }
}

/// Checks an integer selection of columns against the original constraints: exact
/// coverage, depot and charger capacities, and the chance constraint.
pub fn validate_selection(instance: &Instance, columns: &[&Column]) -> Result<()> {
    let mut cover = vec![0u32; instance.trips.len()];
    let mut depot = vec![0u32; instance.depots.len()];
    let mut charger: HashMap<(usize, usize), u32> = HashMap::new();
    let mut log_p = 0.0;
    for c in columns {
        for &t in &c.trips {
            cover[t] += 1;
        }
        depot[c.depot] += 1;
        for &hr in &c.charger_use {
            *charger.entry(hr).or_default() += 1;
        }
        log_p += c.log_probability;
    }
    if let Some(t) = cover.iter().position(|&c| c != 1) {
        return Err(Error::Validation(format!("trip {t} covered {} times", cover[t])));
    }
    for d in &instance.depots {
        if depot[d.id] > d.capacity_vehicles {
            return Err(Error::Validation(format!("depot {} over capacity", d.id)));
        }
    }
    for (&(h, r), &used) in &charger {
        if used > instance.stations[h].chargers {
            return Err(Error::Validation(format!("station {h} interval {r}: {used} chargers in use")));
        }
    }
    let bound = instance.soc_policy.log_survival_bound();
    if log_p < bound - 1e-12 {
        return Err(Error::Validation(format!(
            "chance constraint violated: sum ln P = {log_p} < {bound}"
        )));
    }
    Ok(())
}
