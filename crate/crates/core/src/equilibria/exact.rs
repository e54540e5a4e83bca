//! Exact equilibria via a structured primal-dual interior-point method.
//!
//! Variables are the link flows γ_a on the candidate arcs, one slack per
//! station (inequality supply only) and one slack per user demand cap. The
//! Hessian `Id_m ⊗ 2·1_{n,n}` is block diagonal per user, so every Newton
//! system reduces, after Sherman-Morrison on the user blocks and elimination
//! of the cap multipliers, to an n×n positive definite system in the station
//! multipliers. The interior solution fixes ν (unique by strict convexity in
//! ν); the final plan is a transport-optimal vertex for that ν, which removes
//! interior-point dust from the support.

use nalgebra::{DMatrix, DVector};

use super::{objective_value, zero_count, Diagnostics, Equilibrium, Method, SupplyMode, DUST};
use crate::error::{Error, Result};
use crate::radio::{LinkMatrix, RadioInstance};
use crate::transport::{solve_transport, solve_transport_relaxed, Marginal, TransportPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct ExactOptions {
    /// Bound on the reported KKT residual.
    pub tol: f64,
    pub max_iterations: usize,
    /// Multiplies the default interior starting point.
    pub start_scale: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { tol: 1e-8, max_iterations: 100_000, start_scale: 1.0 }
    }
}

/// The quadratic program of one instance.
#[derive(Debug, Clone)]
pub struct ExactProblem<'a> {
    instance: &'a RadioInstance,
    supply_mode: SupplyMode,
    share: Vec<f64>,
}

impl<'a> ExactProblem<'a> {
    pub fn new(instance: &'a RadioInstance, supply_mode: SupplyMode) -> Result<Self> {
        let share = instance.demand_share();
        if share.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
            return Err(Error::invalid("demand shares must lie in (0, 1]"));
        }
        let total: f64 = instance.mu.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("supply marginal sums to {total}, not 1")));
        }
        Ok(ExactProblem { instance, supply_mode, share })
    }

    pub fn instance(&self) -> &RadioInstance {
        self.instance
    }

    pub fn supply_mode(&self) -> SupplyMode {
        self.supply_mode
    }

    pub fn demand_share(&self) -> &[f64] {
        &self.share
    }
}

/// Candidate links grouped by user.
struct Arcs {
    station: Vec<usize>,
    cost: Vec<f64>,
    /// `start[j]..start[j + 1]` are the arcs of user j.
    start: Vec<usize>,
}

impl Arcs {
    fn build(problem: &ExactProblem) -> Self {
        let inst = problem.instance;
        let (n, m) = (inst.stations(), inst.users());
        let prune = problem.supply_mode == SupplyMode::Inequality;
        let mut station = Vec::new();
        let mut cost = Vec::new();
        let mut start = Vec::with_capacity(m + 1);
        for j in 0..m {
            start.push(station.len());
            for i in 0..n {
                let c = inst.cost.get(i, j);
                // With non-negative station prices, a link costing more than
                // 2·N_j/N_t has a strictly positive reduced cost at any optimum.
                if prune && c > 2.0 * problem.share[j] {
                    continue;
                }
                station.push(i);
                cost.push(c);
            }
        }
        start.push(station.len());
        Arcs { station, cost, start }
    }

    fn len(&self) -> usize {
        self.station.len()
    }

    fn of(&self, j: usize) -> std::ops::Range<usize> {
        self.start[j]..self.start[j + 1]
    }
}

/// Primal-dual iterate. Constraint rows: station i (`Σ x + s = μ`) and the
/// cap of every user with arcs (`Σ x + t = d`).
#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    zx: Vec<f64>,
    zs: Vec<f64>,
    zt: Vec<f64>,
}

struct Residuals {
    dual_x: Vec<f64>,
    dual_s: Vec<f64>,
    dual_t: Vec<f64>,
    primal_row: Vec<f64>,
    primal_cap: Vec<f64>,
    gap: f64,
    primal_inf: f64,
    dual_inf: f64,
}

struct Step {
    x: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    zx: Vec<f64>,
    zs: Vec<f64>,
    zt: Vec<f64>,
}

struct Ipm<'p> {
    arcs: Arcs,
    mu: &'p [f64],
    share: &'p [f64],
    n: usize,
    m: usize,
    slack_rows: bool,
}

impl<'p> Ipm<'p> {
    fn complementarity_pairs(&self) -> usize {
        self.arcs.len() + self.m + if self.slack_rows { self.n } else { 0 }
    }

    fn start(&self, scale: f64) -> Iterate {
        let (n, m) = (self.n, self.m);
        let mut x = vec![0.0; self.arcs.len()];
        let mut row = vec![0.0; n];
        let mut col = vec![0.0; m];
        for j in 0..m {
            let range = self.arcs.of(j);
            let k = range.len() as f64;
            for a in range {
                let i = self.arcs.station[a];
                x[a] = scale * 0.5 * self.share[j].min(self.mu[i]) / (k + 1.0);
                row[i] += x[a];
                col[j] += x[a];
            }
        }
        let s =
            (0..n).map(|i| if self.slack_rows { (self.mu[i] - row[i]).max(0.5 * self.mu[i]) } else { 0.0 }).collect();
        let t = (0..m).map(|j| (self.share[j] - col[j]).max(0.25 * self.share[j])).collect();
        // Dual slacks on the scale of the linear term.
        let typical = self.arcs.cost.iter().chain(self.share).fold(0.0f64, |a, &b| a + b.abs())
            / (self.arcs.len() + m).max(1) as f64;
        let floor = typical.max(1e-8);
        let zx = (0..self.arcs.len())
            .map(|a| {
                let j = self.user_of(a);
                (self.arcs.cost[a] + 2.0 * (col[j] - self.share[j])).max(floor)
            })
            .collect();
        Iterate {
            x,
            s,
            t,
            y: vec![0.0; n],
            w: vec![0.0; m],
            zx,
            zs: vec![if self.slack_rows { floor } else { 0.0 }; n],
            zt: vec![floor; m],
        }
    }

    fn user_of(&self, a: usize) -> usize {
        // arcs are grouped by user; binary search on the offsets
        self.arcs.start.partition_point(|&s| s <= a) - 1
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let (n, m) = (self.n, self.m);
        let mut row = vec![0.0; n];
        let mut col = vec![0.0; m];
        for j in 0..m {
            for a in self.arcs.of(j) {
                row[self.arcs.station[a]] += it.x[a];
                col[j] += it.x[a];
            }
        }
        let mut dual_x = vec![0.0; self.arcs.len()];
        for j in 0..m {
            for a in self.arcs.of(j) {
                let i = self.arcs.station[a];
                dual_x[a] = self.arcs.cost[a] + 2.0 * (col[j] - self.share[j]) - it.y[i] - it.w[j] - it.zx[a];
            }
        }
        let dual_s: Vec<f64> = (0..n).map(|i| if self.slack_rows { -it.y[i] - it.zs[i] } else { 0.0 }).collect();
        let dual_t: Vec<f64> = (0..m).map(|j| -it.w[j] - it.zt[j]).collect();
        let primal_row: Vec<f64> = (0..n).map(|i| row[i] + it.s[i] - self.mu[i]).collect();
        let primal_cap: Vec<f64> = (0..m).map(|j| col[j] + it.t[j] - self.share[j]).collect();

        let mut gap: f64 = it.x.iter().zip(&it.zx).map(|(a, b)| a * b).sum();
        gap += it.t.iter().zip(&it.zt).map(|(a, b)| a * b).sum::<f64>();
        if self.slack_rows {
            gap += it.s.iter().zip(&it.zs).map(|(a, b)| a * b).sum::<f64>();
        }
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        Residuals {
            primal_inf: inf(&primal_row).max(inf(&primal_cap)),
            dual_inf: inf(&dual_x).max(inf(&dual_s)).max(inf(&dual_t)),
            dual_x,
            dual_s,
            dual_t,
            primal_row,
            primal_cap,
            gap: gap / self.complementarity_pairs() as f64,
        }
    }

    /// Solves the Newton system for the given complementarity targets
    /// (`rc_* = x·z − target` componentwise).
    ///
    /// Per user, the flow block `(2·11ᵀ + diag(z/x))⁻¹` is applied in the
    /// cancellation-free form `(G v)_a = e_a (v_a + 2 Σ_{b≠a} e_b (v_a − v_b)) / (1 + 2E)`
    /// with `e = x/z`, `E = Σ e`: near convergence a single support link has
    /// `e_a` of order 1/gap, and the textbook rank-one update would subtract
    /// two such numbers to obtain a result of order one.
    fn newton(&self, it: &Iterate, r: &Residuals, rc_x: &[f64], rc_s: &[f64], rc_t: &[f64]) -> Option<Step> {
        let (n, m) = (self.n, self.m);
        let na = self.arcs.len();
        let rhs_x: Vec<f64> = (0..na).map(|a| -r.dual_x[a] - rc_x[a] / it.x[a]).collect();
        let rhs_s: Vec<f64> =
            (0..n).map(|i| if self.slack_rows { -r.dual_s[i] - rc_s[i] / it.s[i] } else { 0.0 }).collect();
        let rhs_t: Vec<f64> = (0..m).map(|j| -r.dual_t[j] - rc_t[j] / it.t[j]).collect();

        let e: Vec<f64> = (0..na).map(|a| it.x[a] / it.zx[a]).collect();
        let inv_dt: Vec<f64> = (0..m).map(|j| it.t[j] / it.zt[j]).collect();
        let inv_ds: Vec<f64> = (0..n).map(|i| if self.slack_rows { it.s[i] / it.zs[i] } else { 0.0 }).collect();

        // Applies the user-j block inverse to v (indexed like the arcs of j).
        let apply = |j: usize, v: &[f64], denom: f64| -> Vec<f64> {
            let range = self.arcs.of(j);
            let base = range.start;
            range
                .clone()
                .map(|a| {
                    let spread: f64 =
                        range.clone().filter(|&b| b != a).map(|b| e[b] * (v[a - base] - v[b - base])).sum();
                    e[a] * (v[a - base] + 2.0 * spread) / denom
                })
                .collect()
        };

        let mut denom = vec![1.0; m];
        let mut h = vec![0.0; m];
        let mut beta = vec![0.0; m];
        let mut g_rhs: Vec<Vec<f64>> = vec![Vec::new(); m];

        let mut schur = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 0..n {
            rhs[i] = -r.primal_row[i];
            if self.slack_rows {
                schur[(i, i)] += inv_ds[i];
                rhs[i] -= rhs_s[i] * inv_ds[i];
            }
        }
        for j in 0..m {
            let range = self.arcs.of(j);
            if range.is_empty() {
                continue;
            }
            let ej: f64 = range.clone().map(|a| e[a]).sum();
            denom[j] = 1.0 + 2.0 * ej;
            let gr = apply(j, &rhs_x[range.clone()], denom[j]);
            let one_g_rhs: f64 = range.clone().map(|a| e[a] * rhs_x[a]).sum::<f64>() / denom[j];
            h[j] = ej / denom[j] + inv_dt[j];
            beta[j] = -r.primal_cap[j] - rhs_t[j] * inv_dt[j] - one_g_rhs;
            for a in range.clone() {
                let ia = self.arcs.station[a];
                let ga = e[a] / denom[j];
                rhs[ia] -= gr[a - range.start] + ga * beta[j] / h[j];
                for b in range.clone() {
                    let ib = self.arcs.station[b];
                    let gb = e[b] / denom[j];
                    let block = if a == b {
                        let others: f64 = range.clone().filter(|&c| c != a).map(|c| e[c]).sum();
                        e[a] * (1.0 + 2.0 * others) / denom[j]
                    } else {
                        -2.0 * e[a] * e[b] / denom[j]
                    };
                    schur[(ia, ib)] += block - ga * gb / h[j];
                }
            }
            g_rhs[j] = gr;
        }
        // A station without arcs in equality mode has an empty row.
        for i in 0..n {
            if schur[(i, i)] <= 0.0 {
                schur[(i, i)] = 1.0;
            }
        }
        // Dependent rows (equality supply with total demand exactly met) make
        // the matrix singular; a tiny diagonal shift is absorbed by refinement.
        let peak = schur.diagonal().amax();
        let mut shift = 0.0;
        let dy = loop {
            let mut shifted = schur.clone();
            for i in 0..n {
                shifted[(i, i)] += shift;
            }
            if let Some(ch) = shifted.cholesky() {
                break ch.solve(&rhs);
            }
            shift = if shift == 0.0 { 1e-14 * peak } else { shift * 100.0 };
            if shift > 1e-4 * peak {
                return None;
            }
        };
        if dy.iter().any(|v| !v.is_finite()) {
            return None;
        }

        let mut dx = vec![0.0; na];
        let mut dw = vec![0.0; m];
        let mut dt = vec![0.0; m];
        for j in 0..m {
            let range = self.arcs.of(j);
            if range.is_empty() {
                dt[j] = -r.primal_cap[j];
                dw[j] = dt[j] / inv_dt[j] - rhs_t[j];
                continue;
            }
            let g_dy: f64 = range.clone().map(|a| e[a] * dy[self.arcs.station[a]]).sum::<f64>() / denom[j];
            dw[j] = (beta[j] - g_dy) / h[j];
            // dx = G (rhs + Aᵀdy + 1·dw) = G rhs + G Aᵀdy + g dw
            let v: Vec<f64> = range.clone().map(|a| dy[self.arcs.station[a]]).collect();
            let g_dy_vec = apply(j, &v, denom[j]);
            for a in range.clone() {
                let k = a - range.start;
                dx[a] = g_rhs[j][k] + g_dy_vec[k] + e[a] / denom[j] * dw[j];
            }
            dt[j] = (rhs_t[j] + dw[j]) * inv_dt[j];
        }
        let ds: Vec<f64> = (0..n).map(|i| if self.slack_rows { (rhs_s[i] + dy[i]) * inv_ds[i] } else { 0.0 }).collect();

        let dzx = (0..na).map(|a| (-rc_x[a] - it.zx[a] * dx[a]) / it.x[a]).collect();
        let dzs = (0..n).map(|i| if self.slack_rows { (-rc_s[i] - it.zs[i] * ds[i]) / it.s[i] } else { 0.0 }).collect();
        let dzt = (0..m).map(|j| (-rc_t[j] - it.zt[j] * dt[j]) / it.t[j]).collect();
        Some(Step { x: dx, s: ds, t: dt, y: dy.iter().copied().collect(), w: dw, zx: dzx, zs: dzs, zt: dzt })
    }

    /// Newton step followed by iterative refinement: the Schur complement is
    /// badly conditioned near convergence, and an unrefined step lets the
    /// primal residual drift upward while the gap shrinks.
    fn refined_newton(&self, it: &Iterate, r: &Residuals, rc_x: &[f64], rc_s: &[f64], rc_t: &[f64]) -> Option<Step> {
        let mut step = self.newton(it, r, rc_x, rc_s, rc_t)?;
        for _ in 0..2 {
            let (er, ex, es, et) = self.linear_error(it, r, rc_x, rc_s, rc_t, &step);
            let worst = [&er.dual_x, &er.dual_s, &er.dual_t, &er.primal_row, &er.primal_cap]
                .iter()
                .flat_map(|v| v.iter())
                .fold(0.0f64, |a, b| a.max(b.abs()));
            if worst == 0.0 {
                break;
            }
            let Some(fix) = self.newton(it, &er, &ex, &es, &et) else {
                break;
            };
            let add = |a: &mut Vec<f64>, b: &[f64]| a.iter_mut().zip(b).for_each(|(u, v)| *u += v);
            add(&mut step.x, &fix.x);
            add(&mut step.s, &fix.s);
            add(&mut step.t, &fix.t);
            add(&mut step.y, &fix.y);
            add(&mut step.w, &fix.w);
            add(&mut step.zx, &fix.zx);
            add(&mut step.zs, &fix.zs);
            add(&mut step.zt, &fix.zt);
        }
        Some(step)
    }

    /// Amount by which `step` misses each linearised equation, in the form
    /// `newton` accepts as residuals (solving with it yields the correction).
    #[allow(clippy::type_complexity)]
    fn linear_error(
        &self,
        it: &Iterate,
        r: &Residuals,
        rc_x: &[f64],
        rc_s: &[f64],
        rc_t: &[f64],
        step: &Step,
    ) -> (Residuals, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n, m) = (self.n, self.m);
        let mut drow = vec![0.0; n];
        let mut dcol = vec![0.0; m];
        for j in 0..m {
            for a in self.arcs.of(j) {
                drow[self.arcs.station[a]] += step.x[a];
                dcol[j] += step.x[a];
            }
        }
        let mut dual_x = vec![0.0; self.arcs.len()];
        let mut ex = vec![0.0; self.arcs.len()];
        for j in 0..m {
            for a in self.arcs.of(j) {
                let i = self.arcs.station[a];
                dual_x[a] = r.dual_x[a] + 2.0 * dcol[j] - step.y[i] - step.w[j] - step.zx[a];
                ex[a] = rc_x[a] + it.zx[a] * step.x[a] + it.x[a] * step.zx[a];
            }
        }
        let (dual_s, es): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|i| {
                if self.slack_rows {
                    (r.dual_s[i] - step.y[i] - step.zs[i], rc_s[i] + it.zs[i] * step.s[i] + it.s[i] * step.zs[i])
                } else {
                    (0.0, 0.0)
                }
            })
            .unzip();
        let dual_t = (0..m).map(|j| r.dual_t[j] - step.w[j] - step.zt[j]).collect();
        let et = (0..m).map(|j| rc_t[j] + it.zt[j] * step.t[j] + it.t[j] * step.zt[j]).collect();
        let primal_row = (0..n).map(|i| r.primal_row[i] + drow[i] + step.s[i]).collect();
        let primal_cap = (0..m).map(|j| r.primal_cap[j] + dcol[j] + step.t[j]).collect();
        let res =
            Residuals { dual_x, dual_s, dual_t, primal_row, primal_cap, gap: 0.0, primal_inf: 0.0, dual_inf: 0.0 };
        (res, ex, es, et)
    }

    fn max_step(&self, it: &Iterate, step: &Step) -> f64 {
        let mut alpha: f64 = 1.0;
        let mut limit = |v: &[f64], dv: &[f64]| {
            for (a, b) in v.iter().zip(dv) {
                if *b < 0.0 {
                    alpha = alpha.min(-a / b);
                }
            }
        };
        limit(&it.x, &step.x);
        limit(&it.zx, &step.zx);
        limit(&it.t, &step.t);
        limit(&it.zt, &step.zt);
        if self.slack_rows {
            limit(&it.s, &step.s);
            limit(&it.zs, &step.zs);
        }
        alpha
    }

    fn advance(&self, it: &Iterate, step: &Step, alpha: f64) -> Iterate {
        let mv = |v: &[f64], d: &[f64]| v.iter().zip(d).map(|(a, b)| a + alpha * b).collect::<Vec<_>>();
        Iterate {
            x: mv(&it.x, &step.x),
            s: if self.slack_rows { mv(&it.s, &step.s) } else { it.s.clone() },
            t: mv(&it.t, &step.t),
            y: mv(&it.y, &step.y),
            w: mv(&it.w, &step.w),
            zx: mv(&it.zx, &step.zx),
            zs: if self.slack_rows { mv(&it.zs, &step.zs) } else { it.zs.clone() },
            zt: mv(&it.zt, &step.zt),
        }
    }

    /// Mehrotra predictor-corrector iterations.
    fn run(&self, options: &ExactOptions) -> (Iterate, usize) {
        let mut it = self.start(options.start_scale);
        let scale_p = 1.0 + self.mu.iter().chain(self.share).fold(0.0f64, |a, b| a.max(b.abs()));
        let scale_d = 1.0 + self.arcs.cost.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut iterations = 0;
        let mut stalls = 0;
        // The best iterate seen is returned: once the residuals reach rounding
        // level, further steps only amplify the ill-conditioning.
        let mut best = (f64::INFINITY, it.clone());
        let mut since_progress = 0;
        let mut last_gap = f64::INFINITY;
        let mut cautious_left = 0u32;
        while iterations < options.max_iterations {
            let r = self.residuals(&it);
            let merit = (r.primal_inf / scale_p).max(r.dual_inf / scale_d).max(r.gap / (scale_p * scale_d));
            if !merit.is_finite() {
                break;
            }
            since_progress = if merit < 0.5 * best.0 { 0 } else { since_progress + 1 };
            if merit < best.0 {
                best = (merit, it.clone());
            }
            let converged =
                r.primal_inf <= 1e-12 * scale_p && r.dual_inf <= 1e-12 * scale_d && r.gap <= 1e-14 * scale_p * scale_d;
            if converged || since_progress > 15 || merit > 1e6 * best.0 {
                break;
            }
            iterations += 1;
            if r.gap > 0.9 * last_gap {
                cautious_left = 5;
            }
            let cautious = cautious_left > 0;
            cautious_left = cautious_left.saturating_sub(1);
            last_gap = r.gap;

            let rc_x: Vec<f64> = it.x.iter().zip(&it.zx).map(|(a, b)| a * b).collect();
            let rc_s: Vec<f64> = it.s.iter().zip(&it.zs).map(|(a, b)| a * b).collect();
            let rc_t: Vec<f64> = it.t.iter().zip(&it.zt).map(|(a, b)| a * b).collect();
            let Some(affine) = self.refined_newton(&it, &r, &rc_x, &rc_s, &rc_t) else {
                break;
            };
            let alpha_aff = self.max_step(&it, &affine);
            let trial = self.advance(&it, &affine, alpha_aff);
            let gap_aff = self.residuals(&trial).gap;
            // Mehrotra's heuristic can cycle on this problem class; after a
            // step that failed to shrink the gap, take a few plain centred steps.
            let sigma = if cautious { 0.3 } else { (gap_aff / r.gap).clamp(0.0, 1.0).powi(3) };
            let target = sigma * r.gap;

            let corr = |v: &[f64], z: &[f64], dv: &[f64], dz: &[f64]| {
                let second = if cautious { 0.0 } else { 1.0 };
                (0..v.len()).map(|k| v[k] * z[k] + second * dv[k] * dz[k] - target).collect::<Vec<_>>()
            };
            let cx = corr(&it.x, &it.zx, &affine.x, &affine.zx);
            let cs = if self.slack_rows { corr(&it.s, &it.zs, &affine.s, &affine.zs) } else { vec![0.0; self.n] };
            let ct = corr(&it.t, &it.zt, &affine.t, &affine.zt);
            let Some(step) = self.refined_newton(&it, &r, &cx, &cs, &ct) else {
                break;
            };
            let alpha = (0.995 * self.max_step(&it, &step)).min(1.0);
            if alpha < 1e-12 {
                stalls += 1;
                if stalls > 5 {
                    break;
                }
                continue;
            }
            stalls = 0;
            it = self.advance(&it, &step, alpha);
        }
        (best.1, iterations)
    }
}

/// Exact Cournot-Nash equilibrium of `problem`.
pub fn solve_exact(problem: &ExactProblem, options: &ExactOptions) -> Result<Equilibrium> {
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let inst = problem.instance;
    let (n, m) = (inst.stations(), inst.users());
    let share = &problem.share;
    let total_share: f64 = share.iter().sum();
    if problem.supply_mode == SupplyMode::Equality && total_share < 1.0 - 1e-12 {
        return Err(Error::Infeasible(format!("equality supply needs total demand share >= 1, got {total_share}")));
    }

    let ipm = Ipm {
        arcs: Arcs::build(problem),
        mu: &inst.mu,
        share,
        n,
        m,
        slack_rows: problem.supply_mode == SupplyMode::Inequality,
    };
    let (it, iterations) = ipm.run(options);

    // Two candidates for ν: the interior primal iterate, and the allocation
    // the station prices imply. The latter is exact on degenerate users
    // (cheapest effective cost exactly 2·N_j/N_t), where interior iterates
    // approach zero only at the square root of the gap.
    let mut primal = vec![0.0; m];
    for (j, v) in primal.iter_mut().enumerate() {
        *v = ipm.arcs.of(j).map(|a| it.x[a]).sum();
    }
    let (dual, w_dual) = price_response(problem, &it.y);
    let mut best: Option<(f64, Vec<f64>, TransportPlan)> = None;
    for (candidate, w) in [(primal, &it.w), (dual, &w_dual)] {
        let nu = snap(problem, candidate);
        let gamma = route(problem, &nu)?;
        let residual = kkt_residual(problem, &gamma.gamma, &nu, &it.y, w);
        if best.as_ref().is_none_or(|(r, _, _)| residual < *r || r.is_nan()) {
            best = Some((residual, nu, gamma));
        }
    }
    let (residual, nu, gamma) = best.expect("two candidates");
    let objective = objective_value(&gamma.gamma, inst)?;
    let equilibrium = Equilibrium {
        diagnostics: Diagnostics {
            method: Method::Exact,
            kkt_residual: Some(residual),
            iterations,
            active_zero_count: zero_count(&nu),
        },
        nu,
        gamma,
        objective,
    };
    if residual.is_finite() && residual <= options.tol {
        Ok(equilibrium)
    } else {
        Err(Error::NonConvergence { iterations, residual, best: Some(Box::new(equilibrium)) })
    }
}

/// Snaps dust to zero, clips at the demand caps and restores the load bound.
fn snap(problem: &ExactProblem, mut nu: Vec<f64>) -> Vec<f64> {
    for (v, d) in nu.iter_mut().zip(&problem.share) {
        *v = if *v < DUST { 0.0 } else { v.min(*d) };
    }
    let load: f64 = nu.iter().sum();
    match problem.supply_mode {
        SupplyMode::Inequality if load > 1.0 => nu.iter_mut().for_each(|v| *v /= load),
        SupplyMode::Equality if load > 0.0 => nu.iter_mut().for_each(|v| *v /= load),
        _ => {}
    }
    nu
}

/// Minimum-cost plan delivering `nu`.
fn route(problem: &ExactProblem, nu: &[f64]) -> Result<TransportPlan> {
    let inst = problem.instance;
    if nu.iter().all(|&v| v == 0.0) {
        return Ok(TransportPlan {
            gamma: LinkMatrix::from_fn(inst.stations(), inst.users(), |_, _| 0.0),
            cost_value: 0.0,
        });
    }
    let mu = Marginal::new(inst.mu.clone())?;
    let target = Marginal::new(nu.to_vec())?;
    match problem.supply_mode {
        SupplyMode::Inequality => solve_transport_relaxed(&mu, &target, &inst.cost),
        SupplyMode::Equality => solve_transport(&mu, &target, &inst.cost),
    }
}

/// Every user's best response to the station multipliers `y`: buy on the
/// link of least effective cost `c̃_j = min_i c_ij − y_i` the amount
/// `clamp(N_j/N_t − c̃_j/2, 0, N_j/N_t)`. Also returns the matching cap
/// multipliers.
fn price_response(problem: &ExactProblem, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let inst = problem.instance;
    let eq = problem.supply_mode == SupplyMode::Equality;
    let mut nu = Vec::with_capacity(inst.users());
    let mut w = Vec::with_capacity(inst.users());
    for (j, &d) in problem.share.iter().enumerate() {
        let effective = (0..inst.stations())
            .map(|i| inst.cost.get(i, j) - if eq { y[i] } else { y[i].min(0.0) })
            .fold(f64::INFINITY, f64::min);
        let v = (d - 0.5 * effective).clamp(0.0, d);
        nu.push(v);
        w.push((effective + 2.0 * (v - d)).min(0.0));
    }
    (nu, w)
}

/// Largest violation of primal feasibility, dual feasibility and
/// complementary slackness for plan `gamma` with station multipliers `y`
/// (`−y` are station prices) and cap multipliers `w`.
fn kkt_residual(problem: &ExactProblem, gamma: &LinkMatrix, nu: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let inst = problem.instance;
    let (n, m) = (inst.stations(), inst.users());
    let share = &problem.share;
    let eq = problem.supply_mode == SupplyMode::Equality;
    let mut worst = 0.0f64;
    for i in 0..n {
        let row: f64 = gamma.row(i).iter().sum();
        let slack = inst.mu[i] - row;
        if eq {
            worst = worst.max(slack.abs());
        } else {
            worst = worst.max((-slack).max(0.0)).max(y[i].max(0.0)).max((y[i] * slack).abs());
        }
    }
    for j in 0..m {
        let col: f64 = gamma.column(j).sum();
        worst = worst.max((col - nu[j]).abs());
        let slack = share[j] - nu[j];
        worst = worst.max((-slack).max(0.0)).max(w[j].max(0.0)).max((w[j] * slack).abs());
        for i in 0..n {
            let g = gamma.get(i, j);
            let reduced = inst.cost.get(i, j) + 2.0 * (nu[j] - share[j]) - y[i] - w[j];
            worst = worst.max((-g).max(0.0)).max((-reduced).max(0.0)).max((g * reduced).abs());
        }
    }
    worst
}
