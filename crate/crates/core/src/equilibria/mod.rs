//! Cournot-Nash equilibria of the joint allocation/cooperation problem.
//!
//! An equilibrium is a plan γ (stations × users) minimising
//!
//! ```text
//!     Σ c_ij γ_ij  +  Σ_j (ν_j − N_j/N_t)²,      ν_j = Σ_i γ_ij
//! ```
//!
//! under station supply `Σ_j γ_ij ≤ μ_i` (or `=`), demand caps `ν_j ≤ N_j/N_t`
//! and `γ ≥ 0`. [`solve_exact`] solves this quadratic program directly;
//! [`approx_solve`] first allocates ν on the cheapest link of every user and
//! then routes it with an optimal transport plan.

mod approximate;
mod exact;

use serde::{Deserialize, Serialize};

pub use approximate::{approx_allocate, approx_solve, simplex_project_oracle, Allocation};
pub use exact::{solve_exact, ExactOptions, ExactProblem};

use crate::error::{Error, Result};
use crate::radio::{LinkMatrix, RadioInstance};
use crate::transport::TransportPlan;

/// Allocations below this are treated as solver dust when snapping ν.
pub const DUST: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Exact,
    Approximate,
}

/// Station supply constraint of the exact problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupplyMode {
    /// Every station hands out all of its blocks (`T_n γ = μ`).
    Equality,
    /// Stations may keep blocks idle (`T_n γ ≤ μ`).
    #[default]
    Inequality,
}

/// Allocation rule of the approximate solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocateMode {
    /// Clip the unconstrained optimum at zero; project onto the simplex only
    /// when the network is over-subscribed.
    #[default]
    DemandCapped,
    /// Always project onto `{Σν = 1, ν ≥ 0}`.
    SimplexEquality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: Method,
    /// Largest KKT violation of the exact problem; absent for approximate solves.
    pub kkt_residual: Option<f64>,
    pub iterations: usize,
    /// Number of users whose allocation is exactly zero.
    pub active_zero_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub nu: Vec<f64>,
    pub gamma: TransportPlan,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

impl Equilibrium {
    pub fn load(&self) -> f64 {
        self.nu.iter().sum()
    }
}

/// `Σ c·γ + ‖ν − N/N_t‖²` evaluated without forming the nm×nm Hessian.
pub fn objective_value(gamma: &LinkMatrix, instance: &RadioInstance) -> Result<f64> {
    let (n, m) = (instance.stations(), instance.users());
    if gamma.rows() != n || gamma.cols() != m {
        return Err(Error::invalid(format!("plan is {}x{} but instance is {n}x{m}", gamma.rows(), gamma.cols())));
    }
    if gamma.as_slice().iter().any(|g| *g < 0.0 || !g.is_finite()) {
        return Err(Error::invalid("plan entries must be finite and non-negative"));
    }
    let transport: f64 = gamma.as_slice().iter().zip(instance.cost.as_slice()).map(|(g, c)| g * c).sum();
    let fairness: f64 = instance
        .demand_share()
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let nu: f64 = gamma.column(j).sum();
            (nu - d) * (nu - d)
        })
        .sum();
    Ok(transport + fairness)
}

fn zero_count(nu: &[f64]) -> usize {
    nu.iter().filter(|&&v| v == 0.0).count()
}
