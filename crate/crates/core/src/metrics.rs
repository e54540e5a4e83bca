//! Network indicators, Monte-Carlo sweeps over user density and the optimum
//! working point (where user satisfaction meets network load).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{
    approx_solve, solve_exact, AllocateMode, Equilibrium, ExactOptions, ExactProblem, Method, SupplyMode,
};
use crate::error::{Error, Result};
use crate::geometry::{Deployment, PointPattern, Window};
use crate::radio::{build_instance, RadioInstance, RadioParams};
use crate::rng::{self, Stream};

/// Indicators above `1` by less than this are rounding, not a bug.
pub const INDICATOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Indicators {
    /// Mean ratio of allocated to requested resource blocks.
    pub r_u: f64,
    /// Share of all resource blocks in use.
    pub r_n: f64,
    /// Share of users whose number of serving stations is not exactly one.
    pub r_c: f64,
}

/// Indicators of an equilibrium. A link serves its user when its flow is at
/// least `support_threshold`; users with no serving station count towards
/// `r_c` as well, since they do not have exactly one.
pub fn indicators(eq: &Equilibrium, instance: &RadioInstance, support_threshold: f64) -> Indicators {
    let m = instance.users();
    let serving: Vec<usize> =
        (0..m).map(|j| eq.gamma.gamma.column(j).filter(|&g| g >= support_threshold).count()).collect();
    indicators_from_parts(&eq.nu, &instance.demand, instance.n_total, &serving)
}

/// Indicators from the user allocation and the number of serving stations
/// of every user.
pub fn indicators_from_parts(nu: &[f64], demand: &[u32], n_total: u64, serving: &[usize]) -> Indicators {
    let m = nu.len() as f64;
    let nt = n_total as f64;
    let r_u = nt / m * nu.iter().zip(demand).map(|(v, &d)| v / d as f64).sum::<f64>();
    let r_n = nu.iter().sum();
    let r_c = serving.iter().filter(|&&k| k != 1).count() as f64 / m;
    Indicators { r_u, r_n, r_c }
}

/// Everything that defines one simulated network except the user density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Station intensity per unit area.
    pub lambda_n: f64,
    pub deployment: Deployment,
    pub window: Window,
    pub radio: RadioParams,
    pub method: Method,
    pub supply_mode: SupplyMode,
    pub allocate_mode: AllocateMode,
    pub support_threshold: f64,
    pub tolerance: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            lambda_n: 10.0,
            deployment: Deployment::Poisson,
            window: Window::unit(),
            radio: RadioParams::default(),
            method: Method::Exact,
            supply_mode: SupplyMode::Inequality,
            allocate_mode: AllocateMode::DemandCapped,
            support_threshold: 1e-9,
            tolerance: 1e-8,
        }
    }
}

impl Scenario {
    pub fn with_method(&self, method: Method) -> Self {
        Scenario { method, ..self.clone() }
    }

    /// Equilibrium of a prepared instance under this scenario's solver settings.
    pub fn solve(&self, instance: &RadioInstance) -> Result<Equilibrium> {
        match self.method {
            Method::Exact => {
                let problem = ExactProblem::new(instance, self.supply_mode)?;
                let options = ExactOptions { tol: self.tolerance, ..ExactOptions::default() };
                solve_exact(&problem, &options)
            }
            Method::Approximate => approx_solve(instance, self.allocate_mode),
        }
    }
}

/// One solved instance with everything needed to reproduce or report it.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRun {
    pub seed: u64,
    pub stations: PointPattern,
    pub users: PointPattern,
    pub instance: RadioInstance,
    pub equilibrium: Equilibrium,
    pub indicators: Indicators,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Solved(Box<InstanceRun>),
    /// Fewer than two stations or no user: nothing to allocate.
    Degenerate {
        stations: usize,
        users: usize,
    },
}

/// Samples, builds and solves one instance at user intensity `lambda_m`.
/// Deterministic in `seed`; errors carry the seed.
pub fn run_instance(scenario: &Scenario, lambda_m: f64, seed: u64) -> Result<Outcome> {
    if !(lambda_m.is_finite() && lambda_m > 0.0) {
        return Err(Error::invalid(format!("user intensity must be positive, got {lambda_m}")));
    }
    let tag = |e: Error| Error::Instance { seed, source: Box::new(e) };
    let stations = scenario
        .deployment
        .sample(scenario.lambda_n, scenario.window, &mut rng::stream_rng(seed, Stream::Stations))
        .map_err(tag)?;
    let users = Deployment::Poisson
        .sample(lambda_m, scenario.window, &mut rng::stream_rng(seed, Stream::Users))
        .map_err(tag)?;
    if stations.len() < 2 || users.is_empty() {
        return Ok(Outcome::Degenerate { stations: stations.len(), users: users.len() });
    }
    let instance = build_instance(&stations, &users, &scenario.radio, seed).map_err(tag)?;
    let equilibrium = scenario.solve(&instance).map_err(tag)?;
    let indicators = indicators(&equilibrium, &instance, scenario.support_threshold);
    Ok(Outcome::Solved(Box::new(InstanceRun { seed, stations, users, instance, equilibrium, indicators })))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean; 0 for a single sample, NaN for none.
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let k = samples.len();
        if k == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = samples.iter().sum::<f64>() / k as f64;
        if k == 1 {
            return Estimate { mean, stderr: 0.0 };
        }
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1) as f64;
        Estimate { mean, stderr: (var / k as f64).sqrt() }
    }
}

/// Aggregated indicators at one density ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub density_ratio: f64,
    pub r_u: Estimate,
    pub r_n: Estimate,
    pub r_c: Estimate,
    /// Instances that entered the averages.
    pub iterations_used: usize,
    pub degenerate_count: usize,
}

/// A per-instance failure excluded from the averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub density_ratio: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub ratio: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Instances attempted per ratio.
    pub iterations: usize,
    pub crossing: Option<Crossing>,
    pub failures: Vec<Failure>,
}

impl SweepResult {
    /// Assembles a result from rows, locating the crossing.
    pub fn from_rows(rows: Vec<SweepRow>, iterations: usize, failures: Vec<Failure>) -> Self {
        let crossing = crossing_of_rows(&rows);
        SweepResult { rows, iterations, crossing, failures }
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.density_ratio).collect()
    }
}

fn crossing_of_rows(rows: &[SweepRow]) -> Option<Crossing> {
    let ratios: Vec<f64> = rows.iter().map(|r| r.density_ratio).collect();
    let r_u: Vec<f64> = rows.iter().map(|r| r.r_u.mean).collect();
    let r_n: Vec<f64> = rows.iter().map(|r| r.r_n.mean).collect();
    find_crossing(&ratios, &r_u, &r_n)
}

/// Density-ratio grid `start, start + step, …` up to `stop` (inclusive up to
/// rounding).
pub fn ratio_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || start <= 0.0 || step <= 0.0 || stop < start {
        return Err(Error::invalid(format!("bad ratio grid {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

/// Monte-Carlo sweep: `iterations` independent instances per density ratio
/// `λ_m/λ_n`. Instance `(k, t)` uses seed `derive_seed(base_seed, k, t)`, so
/// the result does not depend on scheduling.
pub fn sweep(scenario: &Scenario, ratios: &[f64], iterations: usize, base_seed: u64) -> Result<SweepResult> {
    if iterations == 0 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) || ratios.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("density ratios must be positive and strictly increasing"));
    }
    let jobs: Vec<(usize, usize)> = (0..ratios.len()).flat_map(|k| (0..iterations).map(move |t| (k, t))).collect();
    let outcomes: Vec<(u64, Result<Outcome>)> = jobs
        .par_iter()
        .map(|&(k, t)| {
            let seed = rng::derive_seed(base_seed, k as u64, t as u64);
            (seed, run_instance(scenario, ratios[k] * scenario.lambda_n, seed))
        })
        .collect();

    let mut rows = Vec::with_capacity(ratios.len());
    let mut failures = Vec::new();
    for (k, chunk) in outcomes.chunks(iterations).enumerate() {
        let mut samples = [Vec::new(), Vec::new(), Vec::new()];
        let mut degenerate = 0;
        for (seed, outcome) in chunk {
            match outcome {
                Ok(Outcome::Solved(run)) => {
                    samples[0].push(run.indicators.r_u);
                    samples[1].push(run.indicators.r_n);
                    samples[2].push(run.indicators.r_c);
                }
                Ok(Outcome::Degenerate { .. }) => degenerate += 1,
                Err(e) => {
                    failures.push(Failure { density_ratio: ratios[k], seed: *seed, message: e.root().to_string() })
                }
            }
        }
        rows.push(SweepRow {
            density_ratio: ratios[k],
            r_u: Estimate::from_samples(&samples[0]),
            r_n: Estimate::from_samples(&samples[1]),
            r_c: Estimate::from_samples(&samples[2]),
            iterations_used: samples[0].len(),
            degenerate_count: degenerate,
        });
    }
    Ok(SweepResult::from_rows(rows, iterations, failures))
}

/// First intersection of the `r_u` and `r_n` curves, by linear interpolation
/// between consecutive grid points. Points with a non-finite mean are skipped.
pub fn find_crossing(ratios: &[f64], r_u: &[f64], r_n: &[f64]) -> Option<Crossing> {
    let points: Vec<(f64, f64, f64)> = ratios
        .iter()
        .zip(r_u.iter().zip(r_n))
        .map(|(&x, (&u, &n))| (x, u, u - n))
        .filter(|(x, u, d)| x.is_finite() && u.is_finite() && d.is_finite())
        .collect();
    if points.len() < 2 {
        return None;
    }
    for (k, &(x0, u0, d0)) in points.iter().enumerate() {
        if d0 == 0.0 {
            return Some(Crossing { ratio: x0, level: u0 });
        }
        let Some(&(x1, u1, d1)) = points.get(k + 1) else {
            break;
        };
        if d1 != 0.0 && (d0 < 0.0) != (d1 < 0.0) {
            let t = d0 / (d0 - d1);
            return Some(Crossing { ratio: x0 + t * (x1 - x0), level: u0 + t * (u1 - u0) });
        }
    }
    None
}
