//! Planar point processes for base-station and user deployments.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::eigen::Hessenberg;
use crate::error::{Error, Result};
use crate::rng;

/// Relative margin added to the window circumradius for the Ginibre guard disk.
pub const GUARD_MARGIN: f64 = 0.2;

/// Axis-aligned square observation window centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    side_length: f64,
}

impl Window {
    pub fn new(side_length: f64) -> Result<Self> {
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::invalid(format!("window side must be positive, got {side_length}")));
        }
        Ok(Window { side_length })
    }

    pub fn unit() -> Self {
        Window { side_length: 1.0 }
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn area(&self) -> f64 {
        self.side_length * self.side_length
    }

    pub fn half_side(&self) -> f64 {
        0.5 * self.side_length
    }

    pub fn circumradius(&self) -> f64 {
        self.side_length / SQRT_2
    }

    pub fn contains(&self, p: Point) -> bool {
        let h = self.half_side();
        p.x.abs() <= h && p.y.abs() <= h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A finite realisation of a point process restricted to its window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    points: Vec<Point>,
    window: Window,
    intensity_requested: f64,
}

impl PointPattern {
    /// Builds a pattern from explicit positions, checking window membership.
    pub fn new(points: Vec<Point>, window: Window, intensity_requested: f64) -> Result<Self> {
        if !(intensity_requested.is_finite() && intensity_requested > 0.0) {
            return Err(Error::invalid(format!("intensity must be positive, got {intensity_requested}")));
        }
        if let Some(p) = points.iter().find(|p| !window.contains(**p)) {
            return Err(Error::invalid(format!("point ({}, {}) lies outside the window", p.x, p.y)));
        }
        Ok(PointPattern { points, window, intensity_requested })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn intensity_requested(&self) -> f64 {
        self.intensity_requested
    }
}

/// Base-station deployment model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deployment {
    Poisson,
    BetaGinibre { beta: f64 },
}

impl Deployment {
    pub fn sample(&self, intensity: f64, window: Window, rng: &mut ChaCha8Rng) -> Result<PointPattern> {
        match *self {
            Deployment::Poisson => poisson_with(intensity, window, rng),
            Deployment::BetaGinibre { beta } => beta_ginibre_with(beta, intensity, window, rng),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Deployment::Poisson => "poisson".to_string(),
            Deployment::BetaGinibre { beta } => format!("beta_ginibre({beta})"),
        }
    }
}

fn check_intensity(intensity: f64) -> Result<()> {
    if intensity.is_finite() && intensity > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("intensity must be positive, got {intensity}")))
    }
}

/// Homogeneous Poisson process of `intensity` points per unit area on `window`.
pub fn sample_poisson(intensity: f64, window: Window, seed: u64) -> Result<PointPattern> {
    poisson_with(intensity, window, &mut rng::rng(seed))
}

pub(crate) fn poisson_with(intensity: f64, window: Window, rng: &mut ChaCha8Rng) -> Result<PointPattern> {
    check_intensity(intensity)?;
    let mean = intensity * window.area();
    let count =
        Poisson::new(mean).map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?.sample(rng) as usize;
    let h = window.half_side();
    let points = (0..count).map(|_| Point::new(rng.random_range(-h..=h), rng.random_range(-h..=h))).collect();
    Ok(PointPattern { points, window, intensity_requested: intensity })
}

/// β-thinned Ginibre process with final intensity `intensity` on `window`.
///
/// The parent Ginibre process has intensity `intensity / beta` and is taken
/// from the eigenvalues of a K×K standard complex Gaussian matrix, which fill a
/// disk of radius √K uniformly with density 1/π. The disk is rescaled onto a
/// guard disk of radius `(1 + GUARD_MARGIN)` times the window circumradius,
/// thinned with retention probability `beta`, then cropped to the window.
pub fn sample_beta_ginibre(beta: f64, intensity: f64, window: Window, seed: u64) -> Result<PointPattern> {
    beta_ginibre_with(beta, intensity, window, &mut rng::rng(seed))
}

pub(crate) fn beta_ginibre_with(
    beta: f64,
    intensity: f64,
    window: Window,
    rng: &mut ChaCha8Rng,
) -> Result<PointPattern> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!("beta must lie in (0, 1], got {beta}")));
    }
    check_intensity(intensity)?;

    let parent = intensity / beta;
    let guard = window.circumradius() * (1.0 + GUARD_MARGIN);
    let k = (parent * PI * guard * guard).round() as usize;
    let scale = 1.0 / (PI * parent).sqrt();

    let eigenvalues = ginibre_eigenvalues(k, rng)?;
    let points = eigenvalues
        .into_iter()
        .map(|z| Point::new(scale * z.re, scale * z.im))
        .filter(|_| beta >= 1.0 || rng.random::<f64>() < beta)
        .filter(|p| window.contains(*p))
        .collect();
    Ok(PointPattern { points, window, intensity_requested: intensity })
}

/// Eigenvalues of a `k`×`k` matrix with i.i.d. standard complex Gaussian entries.
///
/// Householder reduction of such a matrix yields, in distribution, an upper
/// Hessenberg matrix with i.i.d. standard complex Gaussians on and above the
/// diagonal and independent real subdiagonal entries `sqrt(Gamma(k - 1 - c, 1))`
/// in column `c`. Sampling that form directly skips the O(k³) reduction.
pub fn ginibre_eigenvalues(k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>> {
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("finite std dev");
    let mut a = vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        if i > 0 {
            let shape = (k - i) as f64;
            let g = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
            a[i * k + i - 1] = Complex64::new(g.sqrt(), 0.0);
        }
        for j in i..k {
            a[i * k + j] = Complex64::new(normal.sample(rng), normal.sample(rng));
        }
    }
    Hessenberg::new(k, a).eigenvalues()
}
