//! Independent reference solvers, random instance generators and the
//! invariant suite shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use cn_alloc::equilibria::{approx_allocate, approx_solve, simplex_project_oracle, DUST};
use cn_alloc::geometry::{sample_beta_ginibre, sample_poisson};
use cn_alloc::metrics::{run_instance, Outcome, Scenario};
use cn_alloc::radio::{compute_sinr, demand_vector};
use cn_alloc::transport::{solve_transport, Marginal};
use cn_alloc::{
    solve_exact, AllocateMode, Equilibrium, ExactOptions, ExactProblem, LinkMatrix, Method, RadioInstance, RadioParams,
    SupplyMode, Window,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_marginal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn random_cost(rng: &mut ChaCha8Rng, n: usize, m: usize, scale: f64) -> LinkMatrix {
    LinkMatrix::from_fn(n, m, |_, _| scale * rng.random::<f64>())
}

/// Instance posed directly by its cost matrix.
pub fn instance_from_cost(cost: LinkMatrix, demand: Vec<u32>, rb_per_station: u32) -> RadioInstance {
    let sinr = cost.map(|c| 1.0 / c);
    RadioInstance::from_cost(sinr, cost, demand, rb_per_station).expect("valid instance")
}

/// Small random QP instance: costs comparable to the demand shares so that
/// interior, capped and empty allocations all occur.
pub fn random_small_instance(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> RadioInstance {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    let rb = rng.random_range(2..=10u32);
    let nt = rb * n as u32;
    let demand = (0..m).map(|_| rng.random_range(1..=nt)).collect();
    let scale = rng.random_range(0.05..1.0);
    instance_from_cost(random_cost(rng, n, m, scale), demand, rb)
}

/// Optimal transport value by enumerating every basis of the constraint
/// matrix (n + m − 1 cells), solving it densely and keeping feasible ones.
pub fn vertex_enumeration_value(mu: &[f64], nu: &[f64], cost: &LinkMatrix) -> f64 {
    let (n, m) = (mu.len(), nu.len());
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = n + m - 1;
    // Rows: every station, every user but the last (the dropped one is implied).
    let mut rhs = DVector::<f64>::zeros(k);
    for i in 0..n {
        rhs[i] = mu[i];
    }
    for j in 0..m - 1 {
        rhs[n + j] = nu[j];
    }
    let mut best = f64::INFINITY;
    let mut chosen: Vec<usize> = (0..k).collect();
    loop {
        let a = DMatrix::<f64>::from_fn(k, k, |r, c| {
            let (i, j) = cells[chosen[c]];
            if (r < n && r == i) || (r >= n && r - n == j) {
                1.0
            } else {
                0.0
            }
        });
        if a.determinant().abs() > 0.5 {
            if let Some(x) = a.lu().solve(&rhs) {
                let last: f64 = (0..k).filter(|&c| cells[chosen[c]].1 == m - 1).map(|c| x[c]).sum();
                if x.iter().all(|&v| v >= -1e-12) && (last - nu[m - 1]).abs() <= 1e-9 {
                    let value: f64 = (0..k)
                        .map(|c| {
                            let (i, j) = cells[chosen[c]];
                            x[c] * cost.get(i, j)
                        })
                        .sum();
                    best = best.min(value);
                }
            }
        }
        // next combination of k out of n·m
        let total = cells.len();
        let mut p = k;
        while p > 0 && chosen[p - 1] == total - k + p - 1 {
            p -= 1;
        }
        if p == 0 {
            break;
        }
        chosen[p - 1] += 1;
        for q in p..k {
            chosen[q] = chosen[q - 1] + 1;
        }
    }
    best
}

/// Euclidean projection onto `{x ≥ 0, Σx ≤ cap}` (or `= cap`).
fn project_capped(v: &mut [f64], cap: f64, equality: bool) {
    let clipped: f64 = v.iter().map(|x| x.max(0.0)).sum();
    if !equality && clipped <= cap {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
        return;
    }
    let scaled: Vec<f64> = v.iter().map(|x| x / cap).collect();
    let p = simplex_project_oracle(&scaled);
    v.iter_mut().zip(p).for_each(|(x, y)| *x = y * cap);
}

/// Projection onto the exact problem's feasible set by Dykstra's alternating
/// projections between the station sets and the user sets.
fn project_feasible(x0: &[f64], n: usize, m: usize, mu: &[f64], d: &[f64], equality: bool) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut p = vec![0.0; n * m];
    let mut q = vec![0.0; n * m];
    for _ in 0..20_000 {
        let mut y: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        for i in 0..n {
            project_capped(&mut y[i * m..(i + 1) * m], mu[i], equality);
        }
        for k in 0..n * m {
            p[k] += x[k] - y[k];
        }
        let mut z: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        for j in 0..m {
            let mut col: Vec<f64> = (0..n).map(|i| z[i * m + j]).collect();
            project_capped(&mut col, d[j], false);
            for i in 0..n {
                z[i * m + j] = col[i];
            }
        }
        for k in 0..n * m {
            q[k] += y[k] - z[k];
        }
        let change = x.iter().zip(&z).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        x = z;
        if change < 1e-14 {
            break;
        }
    }
    x
}

/// Reference optimum of the exact problem by accelerated projected gradient
/// (restarted FISTA) — deliberately unrelated to the interior-point method.
pub fn reference_objective(instance: &RadioInstance, mode: SupplyMode) -> f64 {
    let (n, m) = (instance.stations(), instance.users());
    let d = instance.demand_share();
    let equality = mode == SupplyMode::Equality;
    let objective = |g: &[f64]| -> f64 {
        let mut v = 0.0;
        for j in 0..m {
            let nu: f64 = (0..n).map(|i| g[i * m + j]).sum();
            v += (nu - d[j]).powi(2);
        }
        v + g.iter().zip(instance.cost.as_slice()).map(|(a, b)| a * b).sum::<f64>()
    };
    let step = 1.0 / (2.0 * n as f64);
    let mut x = project_feasible(&vec![0.0; n * m], n, m, &instance.mu, &d, equality);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&x);
    for _ in 0..5_000 {
        let mut grad = instance.cost.as_slice().to_vec();
        for j in 0..m {
            let nu: f64 = (0..n).map(|i| y[i * m + j]).sum();
            for i in 0..n {
                grad[i * m + j] += 2.0 * (nu - d[j]);
            }
        }
        let trial: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        let next = project_feasible(&trial, n, m, &instance.mu, &d, equality);
        let f = objective(&next);
        if f > f_prev {
            // restart momentum
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = next.iter().zip(&x).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        let done = (f_prev - f).abs() < 1e-15;
        x = next;
        t = t_next;
        f_prev = f;
        if done {
            break;
        }
    }
    f_prev
}

pub fn exact(instance: &RadioInstance, mode: SupplyMode) -> cn_alloc::Result<Equilibrium> {
    solve_exact(&ExactProblem::new(instance, mode)?, &ExactOptions::default())
}

// ---------------------------------------------------------------------------
// Invariant suite

pub type Invariant = (&'static str, fn(u32) -> Result<(), String>);

pub fn invariants() -> Vec<Invariant> {
    vec![
        ("transport marginal consistency", transport_marginals),
        ("transport permutation equivariance", transport_permutation),
        ("transport scale equivariance", transport_scale),
        ("approximate allocation bounds", approx_bounds),
        ("projection idempotence", projection_idempotence),
        ("approximate determinism", approx_determinism),
        ("exact equilibrium invariants", exact_invariants),
        ("exact nu independent of start point", exact_start_uniqueness),
        ("exact user permutation equivariance", exact_permutation),
        ("point patterns inside window and deterministic", geometry_invariants),
        ("sinr tx-power invariance and demand monotonicity", radio_invariants),
        ("indicator ranges and load identity", indicator_invariants),
    ]
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = RunnerConfig { cases, failure_persistence: None, ..RunnerConfig::default() };
    let mut runner = TestRunner::new(config);
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn transport_case(seed: u64) -> (Vec<f64>, Vec<f64>, LinkMatrix) {
    let mut r = rng(seed);
    let n = r.random_range(1..=6);
    let m = r.random_range(1..=8);
    let mu = random_marginal(&mut r, n);
    let nu = random_marginal(&mut r, m);
    let cost = random_cost(&mut r, n, m, 10.0);
    (mu, nu, cost)
}

fn transport_marginals(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let (mu, nu, cost) = transport_case(seed);
        let plan = solve_transport(&Marginal::new(mu.clone()).unwrap(), &Marginal::new(nu.clone()).unwrap(), &cost)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        check(plan.gamma.as_slice().iter().all(|&g| g >= 0.0), || "negative flow".into())?;
        for (a, b) in plan.row_sums().iter().zip(&mu) {
            check((a - b).abs() <= 1e-9, || format!("row sum {a} vs {b}"))?;
        }
        for (a, b) in plan.column_sums().iter().zip(&nu) {
            check((a - b).abs() <= 1e-9, || format!("column sum {a} vs {b}"))?;
        }
        Ok(())
    })
}

fn transport_permutation(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), any::<u64>()), |(seed, shuffle)| {
        let (mu, nu, cost) = transport_case(seed);
        let n = mu.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut r = rng(shuffle);
        for k in (1..n).rev() {
            perm.swap(k, r.random_range(0..=k));
        }
        let mu_p: Vec<f64> = perm.iter().map(|&i| mu[i]).collect();
        let cost_p = LinkMatrix::from_fn(n, nu.len(), |i, j| cost.get(perm[i], j));
        let a = solve_transport(&Marginal::new(mu).unwrap(), &Marginal::new(nu.clone()).unwrap(), &cost).unwrap();
        let b = solve_transport(&Marginal::new(mu_p).unwrap(), &Marginal::new(nu).unwrap(), &cost_p).unwrap();
        check((a.cost_value - b.cost_value).abs() <= 1e-9 * (1.0 + a.cost_value), || {
            format!("{} vs {}", a.cost_value, b.cost_value)
        })
    })
}

fn transport_scale(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 0.01f64..100.0), |(seed, alpha)| {
        let (mu, nu, cost) = transport_case(seed);
        let mu = Marginal::new(mu).unwrap();
        let nu = Marginal::new(nu).unwrap();
        let a = solve_transport(&mu, &nu, &cost).unwrap();
        let scaled = cost.map(|c| alpha * c);
        let b = solve_transport(&mu, &nu, &scaled).unwrap();
        let tol = 1e-9 * (1.0 + b.cost_value);
        check((b.cost_value - alpha * a.cost_value).abs() <= tol, || "value does not scale".into())?;
        let original_plan_scaled: f64 = a.gamma.as_slice().iter().zip(scaled.as_slice()).map(|(g, c)| g * c).sum();
        check((original_plan_scaled - b.cost_value).abs() <= tol, || "plan not optimal after scaling".into())
    })
}

fn approx_case(seed: u64) -> RadioInstance {
    let mut r = rng(seed);
    let n = r.random_range(1..=5);
    let m = r.random_range(1..=30);
    let rb = r.random_range(1..=20u32);
    let nt = rb * n as u32;
    let demand = (0..m).map(|_| r.random_range(1..=nt.min(12))).collect();
    let scale = r.random_range(0.001..0.5);
    instance_from_cost(random_cost(&mut r, n, m, scale), demand, rb)
}

fn approx_bounds(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), any::<bool>()), |(seed, simplex)| {
        let inst = approx_case(seed);
        let mode = if simplex { AllocateMode::SimplexEquality } else { AllocateMode::DemandCapped };
        let eq = approx_solve(&inst, mode).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let d = inst.demand_share();
        let load = eq.load();
        if simplex {
            check((load - 1.0).abs() <= 1e-9, || format!("load {load}"))?;
            let alloc = approx_allocate(&inst, mode).unwrap();
            check(alloc.iterations < inst.users().max(1), || "zero-fixing ran too long".into())?;
        } else {
            check(load <= 1.0 + 1e-9, || format!("load {load}"))?;
            for (v, dj) in eq.nu.iter().zip(&d) {
                check(*v <= dj + 1e-9, || format!("nu {v} above cap {dj}"))?;
            }
        }
        check(eq.nu.iter().all(|&v| v >= 0.0), || "negative nu".into())?;
        for (a, b) in eq.gamma.column_sums().iter().zip(&eq.nu) {
            check((a - b).abs() <= 1e-9, || format!("column sum {a} vs nu {b}"))?;
        }
        for (a, b) in eq.gamma.row_sums().iter().zip(&inst.mu) {
            check(*a <= b + 1e-9, || format!("station over-allocated: {a} > {b}"))?;
        }
        Ok(())
    })
}

/// Instance whose unconstrained centre `d − c_min/2` is exactly `target`
/// (single station, large block count).
pub fn instance_with_centre(rng: &mut ChaCha8Rng, target: &[f64]) -> (RadioInstance, Vec<f64>) {
    let rb = 1_000_000u32;
    let demand: Vec<u32> = target
        .iter()
        .map(|&t| {
            let low = ((t.max(0.0) * rb as f64).ceil() as u32).max(1);
            rng.random_range(low..=rb)
        })
        .collect();
    let d: Vec<f64> = demand.iter().map(|&n| n as f64 / rb as f64).collect();
    let cost = LinkMatrix::from_fn(1, target.len(), |_, j| 2.0 * (d[j] - target[j]));
    let inst = instance_from_cost(cost.clone(), demand, rb);
    // the centre as the solver will see it after rounding
    let centre = (0..target.len()).map(|j| d[j] - 0.5 * cost.get(0, j)).collect();
    (inst, centre)
}

fn projection_idempotence(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 2usize..50), |(seed, m)| {
        let mut r = rng(seed);
        let point = simplex_project_oracle(&(0..m).map(|_| r.random_range(-0.5..1.0)).collect::<Vec<_>>());
        let (inst, centre) = instance_with_centre(&mut r, &point);
        let once = approx_allocate(&inst, AllocateMode::SimplexEquality).unwrap().nu;
        let (inst2, _) = instance_with_centre(&mut r, &once);
        let twice = approx_allocate(&inst2, AllocateMode::SimplexEquality).unwrap().nu;
        for k in 0..m {
            check((once[k] - centre[k]).abs() <= 1e-12, || {
                format!("feasible point moved: {} vs {}", once[k], centre[k])
            })?;
            check((once[k] - twice[k]).abs() <= 1e-12, || "projection not idempotent".into())?;
        }
        Ok(())
    })
}

fn approx_determinism(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let inst = approx_case(seed);
        for mode in [AllocateMode::DemandCapped, AllocateMode::SimplexEquality] {
            let a = approx_allocate(&inst, mode).unwrap();
            let b = approx_allocate(&inst, mode).unwrap();
            check(a.nu.iter().map(|x| x.to_bits()).eq(b.nu.iter().map(|x| x.to_bits())), || {
                "not bitwise identical".into()
            })?;
        }
        Ok(())
    })
}

fn exact_case(seed: u64) -> RadioInstance {
    let mut r = rng(seed);
    random_small_instance(&mut r, 4, 8)
}

fn exact_invariants(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let inst = exact_case(seed);
        let eq = exact(&inst, SupplyMode::Inequality).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let d = inst.demand_share();
        check(eq.diagnostics.kkt_residual.unwrap() <= 1e-8, || "kkt residual".into())?;
        check(eq.load() <= 1.0 + 1e-9, || "load above one".into())?;
        for (v, dj) in eq.nu.iter().zip(&d) {
            check(*v >= 0.0 && *v <= dj + 1e-9, || format!("nu {v} outside [0, {dj}]"))?;
        }
        for (a, b) in eq.gamma.column_sums().iter().zip(&eq.nu) {
            check((a - b).abs() <= 1e-9, || format!("column sum {a} vs nu {b}"))?;
        }
        for (a, b) in eq.gamma.row_sums().iter().zip(&inst.mu) {
            check(*a <= b + 1e-9, || "station over-allocated".into())?;
        }
        let approx = approx_solve(&inst, AllocateMode::DemandCapped).unwrap();
        check(eq.objective <= approx.objective + 1e-8, || {
            format!("exact {} above approximate {}", eq.objective, approx.objective)
        })?;
        // Equality supply: compare only when the approximate plan is feasible for it.
        if d.iter().sum::<f64>() >= 1.0 {
            let eq_eq = exact(&inst, SupplyMode::Equality).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for (a, b) in eq_eq.gamma.row_sums().iter().zip(&inst.mu) {
                check((a - b).abs() <= 1e-9, || "equality supply violated".into())?;
            }
            let ap = approx_solve(&inst, AllocateMode::SimplexEquality).unwrap();
            if ap.nu.iter().zip(&d).all(|(v, dj)| *v <= dj + 1e-12) {
                check(eq_eq.objective <= ap.objective + 1e-8, || "equality-mode dominance".into())?;
            }
        }
        Ok(())
    })
}

fn exact_start_uniqueness(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 0.05f64..1.9), |(seed, scale)| {
        let inst = exact_case(seed);
        let problem = ExactProblem::new(&inst, SupplyMode::Inequality).unwrap();
        let a = solve_exact(&problem, &ExactOptions::default()).unwrap();
        let b = solve_exact(&problem, &ExactOptions { start_scale: scale, ..ExactOptions::default() }).unwrap();
        for (x, y) in a.nu.iter().zip(&b.nu) {
            check((x - y).abs() <= 1e-6, || format!("nu differs: {x} vs {y}"))?;
        }
        Ok(())
    })
}

fn exact_permutation(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), any::<u64>()), |(seed, shuffle)| {
        let inst = exact_case(seed);
        let (n, m) = (inst.stations(), inst.users());
        let mut perm: Vec<usize> = (0..m).collect();
        let mut r = rng(shuffle);
        for k in (1..m).rev() {
            perm.swap(k, r.random_range(0..=k));
        }
        let cost = LinkMatrix::from_fn(n, m, |i, j| inst.cost.get(i, perm[j]));
        let demand = perm.iter().map(|&j| inst.demand[j]).collect();
        let permuted = instance_from_cost(cost, demand, (inst.n_total / n as u64) as u32);
        let a = exact(&inst, SupplyMode::Inequality).unwrap();
        let b = exact(&permuted, SupplyMode::Inequality).unwrap();
        check((a.objective - b.objective).abs() <= 1e-9, || "objective changed".into())?;
        for j in 0..m {
            check((a.nu[perm[j]] - b.nu[j]).abs() <= 1e-6, || "nu not permuted".into())?;
        }
        Ok(())
    })
}

fn geometry_invariants(cases: u32) -> Result<(), String> {
    // Keep the parent Ginibre matrix small: its eigenvalues cost O(K³).
    let params = (any::<u64>(), 0.5f64..40.0, 0.2f64..3.0, 0.05f64..=1.0)
        .prop_filter("parent process too large", |(_, intensity, side, beta)| intensity / beta * side * side <= 60.0);
    run(cases, params, |(seed, intensity, side, beta)| {
        let w = Window::new(side).unwrap();
        let p = sample_poisson(intensity, w, seed).unwrap();
        let g = sample_beta_ginibre(beta, intensity, w, seed).unwrap();
        for pat in [&p, &g] {
            check(pat.points().iter().all(|&pt| w.contains(pt)), || "point outside window".into())?;
        }
        check(p == sample_poisson(intensity, w, seed).unwrap(), || "poisson not deterministic".into())?;
        check(g == sample_beta_ginibre(beta, intensity, w, seed).unwrap(), || "ginibre not deterministic".into())
    })
}

fn radio_invariants(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 1e-3f64..1e3), |(seed, alpha)| {
        let w = Window::unit();
        let stations = sample_poisson(8.0, w, seed).unwrap();
        let users = sample_poisson(20.0, w, seed ^ 1).unwrap();
        if stations.len() < 2 || users.is_empty() {
            return Ok(());
        }
        let params = RadioParams::default();
        let a = compute_sinr(&stations, &users, &params, seed).unwrap();
        let b = compute_sinr(&stations, &users, &RadioParams { tx_power: alpha, ..params.clone() }, seed).unwrap();
        check(a == b, || "tx power changed the SINR".into())?;
        let boosted = a.map(|s| 2.0 * s);
        let (da, db) = (demand_vector(&a, &params), demand_vector(&boosted, &params));
        check(da.iter().zip(&db).all(|(x, y)| y <= x), || "higher SINR raised demand".into())?;
        check(da.iter().all(|&x| (1..=params.rb_max_per_user).contains(&x)), || "demand out of range".into())
    })
}

fn indicator_invariants(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 0.5f64..40.0, any::<bool>()), |(seed, ratio, exact_method)| {
        let method = if exact_method { Method::Exact } else { Method::Approximate };
        let sc = Scenario::default().with_method(method);
        let outcome = run_instance(&sc, ratio * sc.lambda_n, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let Outcome::Solved(run) = outcome else {
            return Ok(());
        };
        let ind = run.indicators;
        for (name, v) in [("r_u", ind.r_u), ("r_n", ind.r_n), ("r_c", ind.r_c)] {
            check((0.0..=1.0 + 1e-9).contains(&v), || format!("{name} = {v}"))?;
        }
        let load: f64 = run.equilibrium.nu.iter().sum();
        check((ind.r_n - load).abs() <= 1e-9, || "r_n differs from load".into())?;
        if exact_method {
            check(run.equilibrium.nu.iter().all(|&v| v == 0.0 || v >= DUST), || "dust in nu".into())?;
        }
        Ok(())
    })
}
