use serde::{Deserialize, Serialize};

use super::{zero_count, AllocateMode, Diagnostics, Equilibrium, Method};
use crate::error::{Error, Result};
use crate::radio::{LinkMatrix, RadioInstance};
use crate::transport::{solve_transport, solve_transport_relaxed, Marginal, TransportPlan};

/// User-level allocation produced before routing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub nu: Vec<f64>,
    /// Zero coordinates of `nu`.
    pub zeroed: usize,
    /// Passes of the zero-fixing loop (0 when no projection was needed).
    pub iterations: usize,
}

/// Centre of the simplified problem: `N/N_t − c_min/2`, with `c_min` the
/// cheapest link of every user.
fn unconstrained_centre(instance: &RadioInstance) -> Vec<f64> {
    let share = instance.demand_share();
    (0..instance.users())
        .map(|j| {
            let c_min = instance.cost.column(j).fold(f64::INFINITY, f64::min);
            share[j] - 0.5 * c_min
        })
        .collect()
}

/// Euclidean projection onto `{Σν = 1, ν ≥ 0}` by alternating zero-fixing and
/// re-projection onto the hyperplane of the surviving coordinates.
///
/// Each pass projects the centre onto `Σ_{j∈S} ν_j = 1` (subtracting the same
/// amount from every surviving coordinate), then removes the coordinates that
/// went negative from `S`. `S` shrinks strictly, so at most `m − 1` passes
/// remove anything.
fn zero_fixing_projection(centre: &[f64]) -> Result<Allocation> {
    let m = centre.len();
    let mut alive = vec![true; m];
    let mut survivors = m;
    let mut nu = vec![0.0; m];
    let mut iterations = 0;
    loop {
        if survivors == 0 {
            return Err(Error::DegenerateProjection);
        }
        let mass: f64 = centre.iter().zip(&alive).filter(|(_, &a)| a).map(|(v, _)| v).sum();
        let shift = (mass - 1.0) / survivors as f64;
        let mut dropped = 0;
        for j in 0..m {
            if !alive[j] {
                nu[j] = 0.0;
                continue;
            }
            nu[j] = centre[j] - shift;
            if nu[j] < 0.0 {
                alive[j] = false;
                nu[j] = 0.0;
                dropped += 1;
            }
        }
        if dropped == 0 {
            break;
        }
        survivors -= dropped;
        iterations += 1;
    }
    Ok(Allocation { zeroed: zero_count(&nu), nu, iterations })
}

/// User allocation of the approximate scheme.
pub fn approx_allocate(instance: &RadioInstance, mode: AllocateMode) -> Result<Allocation> {
    let centre = unconstrained_centre(instance);
    match mode {
        AllocateMode::SimplexEquality => zero_fixing_projection(&centre),
        AllocateMode::DemandCapped => {
            let clipped: Vec<f64> = centre.iter().map(|&v| v.max(0.0)).collect();
            if clipped.iter().sum::<f64>() <= 1.0 {
                Ok(Allocation { zeroed: zero_count(&clipped), nu: clipped, iterations: 0 })
            } else {
                zero_fixing_projection(&centre)
            }
        }
    }
}

/// Approximate equilibrium: allocate ν, then route it at minimum cost.
pub fn approx_solve(instance: &RadioInstance, mode: AllocateMode) -> Result<Equilibrium> {
    let allocation = approx_allocate(instance, mode)?;
    let (n, m) = (instance.stations(), instance.users());
    let gamma = if allocation.nu.iter().all(|&v| v == 0.0) {
        TransportPlan { gamma: LinkMatrix::from_fn(n, m, |_, _| 0.0), cost_value: 0.0 }
    } else {
        let mu = Marginal::new(instance.mu.clone())?;
        let nu = Marginal::new(allocation.nu.clone())?;
        match mode {
            AllocateMode::SimplexEquality => solve_transport(&mu, &nu, &instance.cost)?,
            AllocateMode::DemandCapped => solve_transport_relaxed(&mu, &nu, &instance.cost)?,
        }
    };
    let objective = super::objective_value(&gamma.gamma, instance)?;
    Ok(Equilibrium {
        diagnostics: Diagnostics {
            method: Method::Approximate,
            kkt_residual: None,
            iterations: allocation.iterations,
            active_zero_count: allocation.zeroed,
        },
        nu: allocation.nu,
        gamma,
        objective,
    })
}

/// Projection onto the probability simplex by sorting and thresholding.
///
/// Independent of the zero-fixing loop; kept as a cross-check for it.
pub fn simplex_project_oracle(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            threshold = t;
        }
    }
    v.iter().map(|&x| (x - threshold).max(0.0)).collect()
}
