//! Bounded-variable revised primal simplex for the restricted master problem.
//!
//! Rows are written as `A x - s = 0` with bounds on both the structural variables `x` and
//! the row activities `s`, so every constraint type is a bound. The basis inverse is kept
//! dense and updated in product form, with periodic refactorisation. Phase I minimises the
//! sum of bound violations of the basic variables and can start from any basis, which lets
//! the master warm-start after columns are added or bounds change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN_FOR_BLAND: usize = 50;
const PRICING_SEGMENT_MIN: usize = 512;
const PROGRESS_TOL: f64 = 1e-7;
const BLAND_TIE_TOL: f64 = 1e-12;
const BOUND_PERTURBATION: f64 = 1e-7;
const MAX_PERTURBATIONS: usize = 3;

/// A sparse column: `(row, coefficient)` pairs.
pub type SparseColumn = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    /// Values of the structural variables.
    pub x: Vec<f64>,
    /// Row activities `A x`.
    pub row_activity: Vec<f64>,
    /// Row duals: nonnegative on binding `>=` rows, nonpositive on binding `<=` rows.
    pub duals: Vec<f64>,
    /// Reduced costs `c_j - duals^T a_j` of the structural variables.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Interface of an LP engine usable by the master problem.
pub trait LpSolver {
    fn num_rows(&self) -> usize;
    fn num_cols(&self) -> usize;
    /// Appends a column and returns its index.
    fn add_column(&mut self, cost: f64, lower: f64, upper: f64, column: SparseColumn) -> usize;
    fn set_column_bounds(&mut self, col: usize, lower: f64, upper: f64);
    fn column_bounds(&self, col: usize) -> (f64, f64);
    fn set_row_bounds(&mut self, row: usize, lower: f64, upper: f64);
    fn row_bounds(&self, row: usize) -> (f64, f64);
    fn solve(&mut self) -> Result<LpSolution>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Dense-inverse bounded revised simplex.
#[derive(Debug, Clone)]
pub struct RevisedSimplex {
    m: usize,
    cols: Vec<SparseColumn>,
    cost: Vec<f64>,
    /// Bounds of all variables: one logical per row first, then the structurals.
    lower: Vec<f64>,
    upper: Vec<f64>,
    n_struct: usize,
    status: Vec<Status>,
    value: Vec<f64>,
    basis: Vec<usize>,
    price_start: usize,
    binv: Vec<f64>,
    pivots_since_refactor: usize,
    max_iterations: usize,
}

impl RevisedSimplex {
    /// Creates an LP with the given row bounds and no columns.
    pub fn new(row_lower: &[f64], row_upper: &[f64]) -> Self {
        assert_eq!(row_lower.len(), row_upper.len());
        let m = row_lower.len();
        let mut s = Self {
            m,
            cols: Vec::new(),
            cost: Vec::new(),
            lower: row_lower.to_vec(),
            upper: row_upper.to_vec(),
            n_struct: 0,
            status: vec![Status::Basic; m],
            value: vec![0.0; m],
            basis: (0..m).collect(),
            price_start: 0,
            binv: Vec::new(),
            pivots_since_refactor: 0,
            max_iterations: 1_000_000,
        };
        s.binv = identity_neg(m);
        s
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    #[inline]
    fn logical(&self, row: usize) -> usize {
        row
    }

    #[inline]
    fn structural(&self, col: usize) -> usize {
        self.m + col
    }

    #[inline]
    fn var_row_of_logical(&self, var: usize) -> Option<usize> {
        (var < self.m).then_some(var)
    }

    fn nonbasic_value(lower: f64, upper: f64) -> (Status, f64) {
        if lower.is_finite() {
            (Status::AtLower, lower)
        } else if upper.is_finite() {
            (Status::AtUpper, upper)
        } else {
            (Status::Zero, 0.0)
        }
    }

    /// `a_k^T y` for any variable.
    #[inline]
    fn col_dot(&self, var: usize, y: &[f64]) -> f64 {
        match self.var_row_of_logical(var) {
            Some(r) => -y[r],
            None => self.cols[var - self.m].iter().map(|&(i, a)| a * y[i]).sum(),
        }
    }

    /// `B^{-1} a_k` for any variable.
    fn ftran(&self, var: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        match self.var_row_of_logical(var) {
            Some(r) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = -self.binv[i * m + r];
                }
            }
            None => {
                for &(r, a) in &self.cols[var - self.m] {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += a * self.binv[i * m + r];
                    }
                }
            }
        }
        out
    }

    /// Rebuilds `B^{-1}` from scratch. Singular bases are repaired by swapping in logicals.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        loop {
            let mut b = vec![0.0; m * m];
            for (pos, &var) in self.basis.iter().enumerate() {
                match self.var_row_of_logical(var) {
                    Some(r) => b[r * m + pos] = -1.0,
                    None => {
                        for &(r, a) in &self.cols[var - m] {
                            b[r * m + pos] = a;
                        }
                    }
                }
            }
            match invert(&mut b, m) {
                Ok(inv) => {
                    self.binv = inv;
                    self.pivots_since_refactor = 0;
                    self.recompute_basics();
                    return Ok(());
                }
                Err(bad_pos) => {
                    // Replace the dependent basis column by a logical not yet basic.
                    let in_basis: std::collections::HashSet<usize> =
                        self.basis.iter().copied().collect();
                    let candidate = (0..m)
                        .map(|r| self.logical(r))
                        .find(|v| !in_basis.contains(v))
                        .ok_or_else(|| Error::LpNumerical("singular basis".into()))?;
                    let old = self.basis[bad_pos];
                    let (st, v) = Self::nonbasic_value(self.lower[old], self.upper[old]);
                    self.status[old] = st;
                    self.value[old] = v;
                    self.basis[bad_pos] = candidate;
                    self.status[candidate] = Status::Basic;
                }
            }
        }
    }

    /// `x_B = -B^{-1} N x_N`.
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for var in 0..self.status.len() {
            if self.status[var] == Status::Basic {
                continue;
            }
            let v = self.value[var];
            if v == 0.0 {
                continue;
            }
            match self.var_row_of_logical(var) {
                Some(r) => rhs[r] -= -v,
                None => {
                    for &(r, a) in &self.cols[var - m] {
                        rhs[r] -= a * v;
                    }
                }
            }
        }
        for pos in 0..m {
            let row = &self.binv[pos * m..(pos + 1) * m];
            let xb: f64 = row.iter().zip(&rhs).map(|(b, r)| b * r).sum();
            self.value[self.basis[pos]] = xb;
        }
    }

    /// Infeasibility direction of a basic variable: -1 below lower, +1 above upper.
    #[inline]
    fn infeasibility_sign(&self, var: usize) -> f64 {
        let x = self.value[var];
        if x < self.lower[var] - PRIMAL_TOL {
            -1.0
        } else if x > self.upper[var] + PRIMAL_TOL {
            1.0
        } else {
            0.0
        }
    }

    /// Simplex multipliers for the given basic costs.
    fn btran_costs(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (pos, &c) in cb.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[pos * m..(pos + 1) * m];
            for (yj, b) in y.iter_mut().zip(row) {
                *yj += c * b;
            }
        }
        y
    }

    #[inline]
    fn var_cost(&self, var: usize) -> f64 {
        if var >= self.m {
            self.cost[var - self.m]
        } else {
            0.0
        }
    }

    fn pivot_update(&mut self, leave_pos: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[leave_pos];
        let (before, rest) = self.binv.split_at_mut(leave_pos * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (i, chunk) in before.chunks_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (b, p) in chunk.iter_mut().zip(prow.iter()) {
                    *b -= f * p;
                }
            }
        }
        for (k, chunk) in after.chunks_mut(m).enumerate() {
            let f = alpha[leave_pos + 1 + k];
            if f != 0.0 {
                for (b, p) in chunk.iter_mut().zip(prow.iter()) {
                    *b -= f * p;
                }
            }
        }
        self.pivots_since_refactor += 1;
    }

    /// Widens every non-fixed bound by a small random amount to break degeneracy and returns
    /// the original bounds.
    fn perturb_bounds(&mut self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let saved = (self.lower.clone(), self.upper.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for var in 0..self.status.len() {
            let (lo, up) = (self.lower[var], self.upper[var]);
            if lo == up {
                continue;
            }
            if lo.is_finite() {
                self.lower[var] = lo - BOUND_PERTURBATION * (1.0 + lo.abs()) * rng.random_range(1.0..2.0);
            }
            if up.is_finite() {
                self.upper[var] = up + BOUND_PERTURBATION * (1.0 + up.abs()) * rng.random_range(1.0..2.0);
            }
            self.snap_nonbasic(var);
        }
        self.recompute_basics();
        saved
    }

    fn restore_bounds(&mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<()> {
        self.lower = lower;
        self.upper = upper;
        for var in 0..self.status.len() {
            self.snap_nonbasic(var);
        }
        self.refactor()
    }

    fn snap_nonbasic(&mut self, var: usize) {
        match self.status[var] {
            Status::AtLower => self.value[var] = self.lower[var],
            Status::AtUpper => self.value[var] = self.upper[var],
            Status::Zero | Status::Basic => {}
        }
    }

    fn run(&mut self) -> Result<usize> {
        self.refactor()?;
        let n_vars = self.status.len();
        let mut iterations = 0;
        let mut degenerate_run = 0;
        let mut bland = false;
        let mut perturbations = 0;
        let mut saved_bounds: Option<(Vec<f64>, Vec<f64>)> = None;
        loop {
            if iterations >= self.max_iterations {
                return Err(Error::LpNumerical("iteration limit reached".into()));
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let phase_one = self.basis.iter().any(|&v| self.infeasibility_sign(v) != 0.0);
            let cb: Vec<f64> = self
                .basis
                .iter()
                .map(|&v| {
                    if phase_one {
                        self.infeasibility_sign(v)
                    } else {
                        self.var_cost(v)
                    }
                })
                .collect();
            let y = self.btran_costs(&cb);
            if degenerate_run >= DEGENERATE_RUN_FOR_BLAND {
                if saved_bounds.is_none() && perturbations < MAX_PERTURBATIONS {
                    saved_bounds = Some(self.perturb_bounds(perturbations as u64));
                    perturbations += 1;
                    degenerate_run = 0;
                    continue;
                }
                bland = true;
            }

            // Partial pricing over rotating segments; a full cycle without candidates proves
            // optimality.
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            let segment = if bland { n_vars } else { (n_vars / 8).max(PRICING_SEGMENT_MIN) };
            let start = if bland { 0 } else { self.price_start % n_vars.max(1) };
            let mut scanned = 0;
            while scanned < n_vars {
                let end = (scanned + segment).min(n_vars);
                for k in scanned..end {
                    let var = (start + k) % n_vars;
                    let st = self.status[var];
                    if st == Status::Basic || self.lower[var] == self.upper[var] {
                        continue;
                    }
                    let c = if phase_one { 0.0 } else { self.var_cost(var) };
                    let d = c - self.col_dot(var, &y);
                    let eligible = match st {
                        Status::AtLower => d < -DUAL_TOL,
                        Status::AtUpper => d > DUAL_TOL,
                        Status::Zero => d.abs() > DUAL_TOL,
                        Status::Basic => false,
                    };
                    if !eligible {
                        continue;
                    }
                    if bland {
                        entering = Some((var, d));
                        break;
                    }
                    if d.abs() > best {
                        best = d.abs();
                        entering = Some((var, d));
                    }
                }
                scanned = end;
                if entering.is_some() {
                    self.price_start = start + end;
                    break;
                }
            }
            let Some((q, dq)) = entering else {
                if let Some((lo, up)) = saved_bounds.take() {
                    self.restore_bounds(lo, up)?;
                    degenerate_run = 0;
                    bland = false;
                    continue;
                }
                if phase_one {
                    return Err(Error::LpInfeasible);
                }
                return Ok(iterations);
            };
            iterations += 1;

            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(q);
            // Basic position i changes at rate -dir * alpha[i] per unit step.
            let flip = self.upper[q] - self.lower[q];
            let mut theta_max = if flip.is_finite() { flip } else { f64::INFINITY };

            // Harris pass 1.
            let limit = |s: &Self, var: usize, rate: f64, tol: f64| -> f64 {
                let x = s.value[var];
                let (lo, up) = (s.lower[var], s.upper[var]);
                if rate > 0.0 {
                    if x > up + PRIMAL_TOL {
                        f64::INFINITY
                    } else if x < lo - PRIMAL_TOL {
                        (lo - x + tol) / rate
                    } else if up.is_finite() {
                        (up - x + tol) / rate
                    } else {
                        f64::INFINITY
                    }
                } else if x < lo - PRIMAL_TOL {
                    f64::INFINITY
                } else if x > up + PRIMAL_TOL {
                    (x - up + tol) / -rate
                } else if lo.is_finite() {
                    (x - lo + tol) / -rate
                } else {
                    f64::INFINITY
                }
            };
            let mut rates = vec![0.0; self.m];
            for pos in 0..self.m {
                let rate = -dir * alpha[pos];
                rates[pos] = rate;
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let t = limit(self, self.basis[pos], rate, PRIMAL_TOL);
                if t < theta_max {
                    theta_max = t;
                }
            }
            if theta_max.is_infinite() {
                return Err(if phase_one {
                    Error::LpNumerical("unbounded phase one ray".into())
                } else {
                    Error::LpUnbounded
                });
            }
            // Harris pass 2: among rows reaching their bound within theta_max, take the largest
            // pivot. Under Bland's rule use the exact minimum ratio, ties to the lowest index.
            let mut leave: Option<usize> = None;
            let mut leave_rate = 0.0;
            if bland {
                let mut t_min = f64::INFINITY;
                for pos in 0..self.m {
                    if rates[pos].abs() > PIVOT_TOL {
                        t_min = t_min.min(limit(self, self.basis[pos], rates[pos], 0.0));
                    }
                }
                for pos in 0..self.m {
                    if rates[pos].abs() <= PIVOT_TOL {
                        continue;
                    }
                    let t = limit(self, self.basis[pos], rates[pos], 0.0);
                    if t <= t_min + BLAND_TIE_TOL && leave.is_none_or(|l| self.basis[pos] < self.basis[l]) {
                        leave = Some(pos);
                    }
                }
            } else {
                for pos in 0..self.m {
                    let rate = rates[pos];
                    if rate.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let t = limit(self, self.basis[pos], rate, 0.0);
                    if t <= theta_max && rate.abs() > leave_rate {
                        leave = Some(pos);
                        leave_rate = rate.abs();
                    }
                }
            }

            let bound_flip = flip.is_finite()
                && leave.is_none_or(|p| flip <= limit(self, self.basis[p], rates[p], 0.0));
            if bound_flip {
                let theta = flip;
                self.value[q] += dir * theta;
                for pos in 0..self.m {
                    let b = self.basis[pos];
                    self.value[b] += rates[pos] * theta;
                }
                self.status[q] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                self.value[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                degenerate_run = 0;
                continue;
            }
            let p = leave.expect("blocking row");
            let leaving = self.basis[p];
            let x_before = self.value[leaving];
            let theta = limit(self, leaving, rates[p], 0.0).max(0.0);
            if theta * dq.abs() <= PROGRESS_TOL {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
                bland = false;
            }
            self.value[q] += dir * theta;
            for pos in 0..self.m {
                let b = self.basis[pos];
                self.value[b] += rates[pos] * theta;
            }
            // The leaving variable settles on the bound it reached.
            let to_upper = if rates[p] > 0.0 {
                x_before >= self.lower[leaving] - PRIMAL_TOL
            } else {
                x_before > self.upper[leaving] + PRIMAL_TOL
            };
            let (st, v) = if to_upper {
                (Status::AtUpper, self.upper[leaving])
            } else {
                (Status::AtLower, self.lower[leaving])
            };
            self.status[leaving] = st;
            self.value[leaving] = v;
            self.status[q] = Status::Basic;
            self.basis[p] = q;
            self.pivot_update(p, &alpha);
        }
    }

    fn extract(&self, iterations: usize) -> LpSolution {
        let cb: Vec<f64> = self.basis.iter().map(|&v| self.var_cost(v)).collect();
        let duals = self.btran_costs(&cb);
        let x: Vec<f64> = self.value[self.m..].to_vec();
        let row_activity: Vec<f64> = (0..self.m).map(|r| self.value[self.logical(r)]).collect();
        let reduced_costs = (0..self.n_struct)
            .map(|j| self.cost[j] - self.col_dot(self.structural(j), &duals))
            .collect();
        let objective = x.iter().zip(&self.cost).map(|(x, c)| x * c).sum();
        LpSolution {
            objective,
            x,
            row_activity,
            duals,
            reduced_costs,
            iterations,
        }
    }

    /// Dual objective `sum_k min over bounds of d_k x_k` over all variables, using the
    /// duals of the last solution. Equals the primal objective at an optimal basis.
    pub fn dual_objective(&self, sol: &LpSolution) -> f64 {
        let mut obj = 0.0;
        let mut term = |d: f64, lo: f64, up: f64| {
            if d > DUAL_TOL {
                obj += d * lo;
            } else if d < -DUAL_TOL {
                obj += d * up;
            }
        };
        for j in 0..self.n_struct {
            let v = self.structural(j);
            term(sol.reduced_costs[j], self.lower[v], self.upper[v]);
        }
        for r in 0..self.m {
            let v = self.logical(r);
            // Logical column is -e_r, so its reduced cost is y_r.
            term(sol.duals[r], self.lower[v], self.upper[v]);
        }
        obj
    }
}

impl LpSolver for RevisedSimplex {
    fn num_rows(&self) -> usize {
        self.m
    }

    fn num_cols(&self) -> usize {
        self.n_struct
    }

    fn add_column(&mut self, cost: f64, lower: f64, upper: f64, column: SparseColumn) -> usize {
        assert!(column.iter().all(|&(r, _)| r < self.m), "row index out of range");
        let j = self.n_struct;
        let (st, v) = Self::nonbasic_value(lower, upper);
        self.cols.push(column);
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.status.push(st);
        self.value.push(v);
        self.n_struct += 1;
        if v != 0.0 {
            self.recompute_basics();
        }
        j
    }

    fn set_column_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        assert!(col < self.n_struct);
        self.set_var_bounds(self.structural(col), lower, upper);
    }

    fn column_bounds(&self, col: usize) -> (f64, f64) {
        let v = self.structural(col);
        (self.lower[v], self.upper[v])
    }

    fn set_row_bounds(&mut self, row: usize, lower: f64, upper: f64) {
        let v = self.logical(row);
        self.set_var_bounds(v, lower, upper);
    }

    fn row_bounds(&self, row: usize) -> (f64, f64) {
        let v = self.logical(row);
        (self.lower[v], self.upper[v])
    }

    fn solve(&mut self) -> Result<LpSolution> {
        let iterations = self.run()?;
        Ok(self.extract(iterations))
    }
}

impl RevisedSimplex {
    fn set_var_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        assert!(lower <= upper, "empty bound interval");
        self.lower[var] = lower;
        self.upper[var] = upper;
        if self.status[var] != Status::Basic {
            let (st, v) = match self.status[var] {
                Status::AtUpper if upper.is_finite() => (Status::AtUpper, upper),
                _ => Self::nonbasic_value(lower, upper),
            };
            let changed = v != self.value[var];
            self.status[var] = st;
            self.value[var] = v;
            if changed {
                self.recompute_basics();
            }
        }
    }
}

fn identity_neg(m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = -1.0;
    }
    v
}

/// Gauss-Jordan inversion with partial pivoting. On failure returns the column that has no
/// usable pivot.
fn invert(a: &mut [f64], m: usize) -> std::result::Result<Vec<f64>, usize> {
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for col in 0..m {
        let (piv_row, piv_val) = (col..m)
            .map(|r| (r, a[r * m + col].abs()))
            .fold((col, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if piv_val < 1e-11 {
            return Err(col);
        }
        if piv_row != col {
            for k in 0..m {
                a.swap(col * m + k, piv_row * m + k);
                inv.swap(col * m + k, piv_row * m + k);
            }
        }
        let p = a[col * m + col];
        for k in 0..m {
            a[col * m + k] /= p;
            inv[col * m + k] /= p;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[r * m + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..m {
                a[r * m + k] -= f * a[col * m + k];
                inv[r * m + k] -= f * inv[col * m + k];
            }
        }
    }
    Ok(inv)
}
