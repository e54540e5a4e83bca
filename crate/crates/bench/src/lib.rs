//! Shared fixtures for the benchmarks: simulated instances at fixed seeds.

use cn_alloc::metrics::{run_instance, Outcome, Scenario};
use cn_alloc::RadioInstance;

/// First non-degenerate default-scenario instance at `ratio` users per station.
pub fn instance_at(ratio: f64) -> RadioInstance {
    let sc = Scenario::default().with_method(cn_alloc::Method::Approximate);
    (0..)
        .find_map(|seed| match run_instance(&sc, ratio * sc.lambda_n, seed) {
            Ok(Outcome::Solved(run)) => Some(run.instance),
            _ => None,
        })
        .expect("some seed gives a solvable instance")
}
