//! Discrete optimal transport between station supply and user allocation.
//!
//! The transportation LP is solved with a primal network simplex on the
//! bipartite station/user graph: a spanning-tree basis seeded by the
//! least-cost rule, dual potentials recomputed per pivot, Dantzig pricing, and
//! Bland's rule as an anti-cycling fallback after long runs of degenerate pivots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::LinkMatrix;

/// Marginal totals may differ by at most this much (scaled by the total).
pub const BALANCE_TOLERANCE: f64 = 1e-9;

/// Entries below this are omitted from sparse serialisations.
pub const SPARSE_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    weights: Vec<f64>,
    total: f64,
}

impl Marginal {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("marginal weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("marginal must carry positive mass"));
        }
        Ok(Marginal { weights, total })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Which side of a balanced pair received the virtual node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VirtualNode {
    Station,
    User,
}

/// Output of [`balance_marginals`]. When present, the virtual node is the last
/// entry of the side it was added to and all its transport costs are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Balanced {
    pub mu: Marginal,
    pub nu: Marginal,
    pub virtual_node: Option<VirtualNode>,
}

/// Pads the lighter marginal with a zero-cost virtual node absorbing the surplus.
pub fn balance_marginals(mu: &Marginal, nu: &Marginal) -> Balanced {
    let surplus = mu.total - nu.total;
    let scale = mu.total.max(nu.total);
    if surplus.abs() <= 1e-12 * scale {
        return Balanced { mu: mu.clone(), nu: nu.clone(), virtual_node: None };
    }
    let pad = |m: &Marginal, extra: f64| {
        let mut w = m.weights.clone();
        w.push(extra);
        Marginal { total: m.total + extra, weights: w }
    };
    if surplus > 0.0 {
        Balanced { mu: mu.clone(), nu: pad(nu, surplus), virtual_node: Some(VirtualNode::User) }
    } else {
        Balanced { mu: pad(mu, -surplus), nu: nu.clone(), virtual_node: Some(VirtualNode::Station) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub gamma: LinkMatrix,
    pub cost_value: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.gamma.rows()).map(|i| self.gamma.row(i).iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.gamma.cols()).map(|j| self.gamma.column(j).sum()).collect()
    }

    /// Non-negligible entries as `(station, user, value)` triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.gamma.rows() {
            for (j, &v) in self.gamma.row(i).iter().enumerate() {
                if v >= SPARSE_CUTOFF {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

fn check_cost(cost: &LinkMatrix, n: usize, m: usize) -> Result<()> {
    if cost.rows() != n || cost.cols() != m {
        return Err(Error::invalid(format!("cost is {}x{}, marginals are {n} and {m}", cost.rows(), cost.cols())));
    }
    if let Some(c) = cost.as_slice().iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::invalid(format!("cost entries must be finite and non-negative, found {c}")));
    }
    Ok(())
}

/// Optimal plan between balanced marginals `mu` (rows) and `nu` (columns).
pub fn solve_transport(mu: &Marginal, nu: &Marginal, cost: &LinkMatrix) -> Result<TransportPlan> {
    check_cost(cost, mu.len(), nu.len())?;
    if (mu.total - nu.total).abs() > BALANCE_TOLERANCE * mu.total.max(nu.total).max(1.0) {
        return Err(Error::InfeasibleMarginals { supply: mu.total, demand: nu.total });
    }
    solve_balanced(mu.weights(), nu.weights(), cost)
}

/// Optimal plan when supply may exceed demand or vice versa: the lighter side
/// is matched exactly and the heavier side ships at most its weights.
pub fn solve_transport_relaxed(mu: &Marginal, nu: &Marginal, cost: &LinkMatrix) -> Result<TransportPlan> {
    check_cost(cost, mu.len(), nu.len())?;
    let balanced = balance_marginals(mu, nu);
    let (n, m) = (mu.len(), nu.len());
    let padded = match balanced.virtual_node {
        None => return solve_balanced(mu.weights(), nu.weights(), cost),
        Some(VirtualNode::User) => LinkMatrix::from_fn(n, m + 1, |i, j| if j < m { cost.get(i, j) } else { 0.0 }),
        Some(VirtualNode::Station) => LinkMatrix::from_fn(n + 1, m, |i, j| if i < n { cost.get(i, j) } else { 0.0 }),
    };
    let full = solve_balanced(balanced.mu.weights(), balanced.nu.weights(), &padded)?;
    let gamma = LinkMatrix::from_fn(n, m, |i, j| full.gamma.get(i, j));
    Ok(TransportPlan { gamma, cost_value: full.cost_value })
}

fn solve_balanced(supply: &[f64], demand: &[f64], cost: &LinkMatrix) -> Result<TransportPlan> {
    let (n, m) = (supply.len(), demand.len());
    // Zero-weight rows and columns carry no flow; solve on the rest and scatter back.
    let rows: Vec<usize> = (0..n).filter(|&i| supply[i] > 0.0).collect();
    let cols: Vec<usize> = (0..m).filter(|&j| demand[j] > 0.0).collect();
    let mut gamma = vec![0.0; n * m];
    if !rows.is_empty() && !cols.is_empty() {
        let sub = Simplex::new(
            rows.iter().map(|&i| supply[i]).collect(),
            cols.iter().map(|&j| demand[j]).collect(),
            LinkMatrix::from_fn(rows.len(), cols.len(), |a, b| cost.get(rows[a], cols[b])),
        )
        .solve()?;
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                gamma[i * m + j] = sub[a * cols.len() + b];
            }
        }
    }
    let cost_value = gamma.iter().zip(cost.as_slice()).map(|(g, c)| g * c).sum();
    Ok(TransportPlan { gamma: LinkMatrix::from_fn(n, m, |i, j| gamma[i * m + j]), cost_value })
}

/// Basic cell of the spanning-tree basis.
#[derive(Debug, Clone, Copy)]
struct Cell {
    row: usize,
    col: usize,
    flow: f64,
}

struct Simplex {
    supply: Vec<f64>,
    demand: Vec<f64>,
    cost: LinkMatrix,
    basis: Vec<Cell>,
    /// Basic cell ids incident to each node; rows are `0..n`, columns `n..n+m`.
    incident: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
    parent: Vec<Option<(usize, usize)>>,
    depth: Vec<usize>,
}

impl Simplex {
    fn new(supply: Vec<f64>, demand: Vec<f64>, cost: LinkMatrix) -> Self {
        let (n, m) = (supply.len(), demand.len());
        Simplex {
            supply,
            demand,
            cost,
            basis: Vec::with_capacity(n + m - 1),
            incident: vec![Vec::new(); n + m],
            u: vec![0.0; n],
            v: vec![0.0; m],
            parent: vec![None; n + m],
            depth: vec![0; n + m],
        }
    }

    fn n(&self) -> usize {
        self.supply.len()
    }

    fn m(&self) -> usize {
        self.demand.len()
    }

    fn push_basic(&mut self, row: usize, col: usize, flow: f64) {
        let id = self.basis.len();
        self.basis.push(Cell { row, col, flow });
        let n = self.n();
        self.incident[row].push(id);
        self.incident[n + col].push(id);
    }

    /// Least-cost greedy allocation, completed to a spanning tree with zero-flow cells.
    fn initial_basis(&mut self) {
        let (n, m) = (self.n(), self.m());
        let mut order: Vec<usize> = (0..n * m).collect();
        let cost = self.cost.as_slice();
        order.sort_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(a.cmp(&b)));

        let mut left_s = self.supply.clone();
        let mut left_d = self.demand.clone();
        let mut dsu = Dsu::new(n + m);
        for &k in &order {
            let (i, j) = (k / m, k % m);
            if left_s[i] <= 0.0 || left_d[j] <= 0.0 {
                continue;
            }
            let x;
            if left_s[i] <= left_d[j] {
                x = left_s[i];
                left_s[i] = 0.0;
                left_d[j] -= x;
            } else {
                x = left_d[j];
                left_d[j] = 0.0;
                left_s[i] -= x;
            }
            if dsu.union(i, n + j) {
                self.push_basic(i, j, x);
            }
        }
        for &k in &order {
            if self.basis.len() == n + m - 1 {
                break;
            }
            let (i, j) = (k / m, k % m);
            if dsu.union(i, n + j) {
                self.push_basic(i, j, 0.0);
            }
        }
        debug_assert_eq!(self.basis.len(), n + m - 1);
    }

    /// Potentials with u[0] = 0 plus parent pointers of the tree rooted at row 0.
    fn potentials(&mut self) {
        let n = self.n();
        let total = n + self.m();
        let mut seen = vec![false; total];
        let mut stack = vec![0usize];
        seen[0] = true;
        self.u[0] = 0.0;
        self.parent[0] = None;
        self.depth[0] = 0;
        while let Some(node) = stack.pop() {
            for &id in &self.incident[node] {
                let cell = self.basis[id];
                let (other, is_col) = if node < n { (n + cell.col, true) } else { (cell.row, false) };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                let c = self.cost.get(cell.row, cell.col);
                if is_col {
                    self.v[cell.col] = c - self.u[cell.row];
                } else {
                    self.u[cell.row] = c - self.v[cell.col];
                }
                self.parent[other] = Some((node, id));
                self.depth[other] = self.depth[node] + 1;
                stack.push(other);
            }
        }
    }

    fn entering(&self, bland: bool) -> Option<(usize, usize)> {
        let (n, m) = (self.n(), self.m());
        let mut best: Option<(usize, usize)> = None;
        let mut best_rc = 0.0;
        for i in 0..n {
            let row = self.cost.row(i);
            let ui = self.u[i];
            for j in 0..m {
                let c = row[j];
                let rc = c - ui - self.v[j];
                let tol = 1e-12 * (c.abs() + ui.abs() + self.v[j].abs());
                if rc < -tol {
                    if bland {
                        return Some((i, j));
                    }
                    if rc < best_rc {
                        best_rc = rc;
                        best = Some((i, j));
                    }
                }
            }
        }
        best
    }

    /// Tree path from column node of `col` to row node `row`, as basic cell ids
    /// in walking order; signs alternate starting with a decrease.
    fn cycle(&self, row: usize, col: usize) -> Vec<usize> {
        let mut a = self.n() + col;
        let mut b = row;
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        while self.depth[a] > self.depth[b] {
            let (p, id) = self.parent[a].expect("non-root has parent");
            from_a.push(id);
            a = p;
        }
        while self.depth[b] > self.depth[a] {
            let (p, id) = self.parent[b].expect("non-root has parent");
            from_b.push(id);
            b = p;
        }
        while a != b {
            let (pa, ida) = self.parent[a].expect("non-root has parent");
            let (pb, idb) = self.parent[b].expect("non-root has parent");
            from_a.push(ida);
            from_b.push(idb);
            a = pa;
            b = pb;
        }
        from_a.extend(from_b.into_iter().rev());
        from_a
    }

    fn solve(mut self) -> Result<Vec<f64>> {
        let (n, m) = (self.n(), self.m());
        self.initial_basis();
        let limit = 50 * (n * m + n + m) + 1000;
        let mut degenerate_run = 0usize;
        let mut iterations = 0usize;
        loop {
            self.potentials();
            let bland = degenerate_run > 2 * (n + m);
            let Some((row, col)) = self.entering(bland) else {
                break;
            };
            iterations += 1;
            if iterations > limit {
                return Err(Error::NonConvergence { iterations, residual: f64::NAN, best: None });
            }

            let path = self.cycle(row, col);
            // Decreasing cells sit at even positions along the path.
            let mut leave_pos = 0;
            let mut theta = f64::INFINITY;
            for (pos, &id) in path.iter().enumerate().step_by(2) {
                let f = self.basis[id].flow;
                let better = f < theta || (bland && f == theta && id < path[leave_pos]);
                if better {
                    theta = f;
                    leave_pos = pos;
                }
            }
            degenerate_run = if theta > 0.0 { 0 } else { degenerate_run + 1 };
            for (pos, &id) in path.iter().enumerate() {
                let cell = &mut self.basis[id];
                if pos % 2 == 0 {
                    cell.flow = (cell.flow - theta).max(0.0);
                } else {
                    cell.flow += theta;
                }
            }
            let leave = path[leave_pos];
            let old = self.basis[leave];
            self.incident[old.row].retain(|&x| x != leave);
            self.incident[n + old.col].retain(|&x| x != leave);
            self.basis[leave] = Cell { row, col, flow: theta };
            self.incident[row].push(leave);
            self.incident[n + col].push(leave);
        }

        let mut gamma = vec![0.0; n * m];
        for cell in &self.basis {
            gamma[cell.row * m + cell.col] += cell.flow;
        }
        Ok(gamma)
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(size: usize) -> Self {
        Dsu { parent: (0..size).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets of `a` and `b`; false if they were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
