//! Statistical checks of the samplers and of the simulated indicators.

use cn_alloc::geometry::{sample_beta_ginibre, sample_poisson};
use cn_alloc::metrics::{ratio_grid, run_instance, sweep, Outcome, Scenario};
use cn_alloc::{Method, Window};
use rayon::prelude::*;

/// Sample mean and variance of the in-window counts, with the standard error
/// of the variance estimate (normal approximation).
fn count_stats(counts: &[f64]) -> (f64, f64, f64) {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = counts.iter().map(|c| (c - mean).powi(4)).sum::<f64>() / n;
    let var_se = ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    (mean, var, var_se)
}

fn poisson_counts(intensity: f64, window: Window, reps: u64) -> Vec<f64> {
    (0..reps).into_par_iter().map(|s| sample_poisson(intensity, window, s).unwrap().len() as f64).collect()
}

fn ginibre_counts(beta: f64, intensity: f64, window: Window, reps: u64) -> Vec<f64> {
    (0..reps)
        .into_par_iter()
        .map(|s| sample_beta_ginibre(beta, intensity, window, 1_000_000 + s).unwrap().len() as f64)
        .collect()
}

#[test]
fn poisson_mean_count() {
    let (mean, _, _) = count_stats(&poisson_counts(10.0, Window::unit(), 10_000));
    assert!((9.4..=10.6).contains(&mean), "mean {mean}");
}

#[test]
fn ginibre_intensity_and_reduced_variance() {
    let window = Window::unit();
    let (g_mean, g_var, g_se) = count_stats(&ginibre_counts(1.0, 10.0, window, 1000));
    let (p_mean, p_var, p_se) = count_stats(&poisson_counts(10.0, window, 1000));
    assert!((g_mean - 10.0).abs() <= 0.8, "ginibre mean {g_mean}");
    assert!((p_mean - 10.0).abs() <= 0.8, "poisson mean {p_mean}");
    assert!(g_var < p_var, "ginibre variance {g_var} vs poisson {p_var}");
    assert!(p_var - g_var > 2.0 * (g_se * g_se + p_se * p_se).sqrt());
}

#[test]
fn count_variance_decreases_with_beta() {
    let window = Window::unit();
    let stats: Vec<(f64, f64)> = [0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&b| {
            let (mean, var, se) = count_stats(&ginibre_counts(b, 10.0, window, 1000));
            let mean_se = (var / 1000.0).sqrt();
            assert!((mean - 10.0).abs() <= 3.0 * mean_se, "beta {b}: mean {mean}");
            (var, se)
        })
        .collect();
    for w in stats.windows(2) {
        let slack = 2.0 * (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt();
        assert!(w[1].0 <= w[0].0 + slack, "variance rose: {:?}", stats);
    }
}

#[test]
fn small_beta_approaches_poisson() {
    // Small window keeps the parent process (intensity / β) tractable.
    let window = Window::new(0.5).unwrap();
    let (_, g_var, _) = count_stats(&ginibre_counts(0.05, 10.0, window, 1000));
    let (_, p_var, _) = count_stats(&poisson_counts(10.0, window, 1000));
    assert!((g_var - p_var).abs() <= 0.15 * p_var, "beta 0.05 variance {g_var} vs poisson {p_var}");
}

#[test]
fn light_load_at_unit_ratio() {
    let sc = Scenario::default();
    let light = (0..200u64)
        .filter(|&seed| match run_instance(&sc, sc.lambda_n, seed).unwrap() {
            Outcome::Solved(run) => run.indicators.r_n < 0.2,
            Outcome::Degenerate { .. } => true,
        })
        .count();
    assert!(light as f64 >= 0.95 * 200.0, "{light}/200");
}

#[test]
fn approximate_satisfaction_does_not_exceed_exact_by_much() {
    let exact = Scenario::default();
    let approx = exact.with_method(Method::Approximate);
    let (mut ok, mut total) = (0, 0);
    for seed in 0..200u64 {
        let (Outcome::Solved(e), Outcome::Solved(a)) =
            (run_instance(&exact, 100.0, seed).unwrap(), run_instance(&approx, 100.0, seed).unwrap())
        else {
            continue;
        };
        total += 1;
        if a.indicators.r_u <= e.indicators.r_u + 0.05 {
            ok += 1;
        }
    }
    assert!(ok as f64 >= 0.9 * total as f64, "{ok}/{total}");
}

#[test]
fn satisfaction_does_not_rise_beyond_ratio_ten() {
    let sc = Scenario::default();
    let ratios = ratio_grid(1.0, 50.0, 1.0).unwrap();
    let result = sweep(&sc, &ratios, 200, 7).unwrap();
    assert!(result.failures.is_empty(), "{:?}", result.failures);
    let tail: Vec<_> = result.rows.iter().filter(|r| r.density_ratio >= 10.0).collect();
    for w in tail.windows(2) {
        let slack = 2.0 * (w[0].r_u.stderr.powi(2) + w[1].r_u.stderr.powi(2)).sqrt();
        assert!(
            w[1].r_u.mean <= w[0].r_u.mean + slack,
            "r_u rose from {} at {} to {} at {}",
            w[0].r_u.mean,
            w[0].density_ratio,
            w[1].r_u.mean,
            w[1].density_ratio
        );
    }
}
