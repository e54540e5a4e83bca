//! Per-instance radio quantities: SINR, transport cost, demand and supply.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::rng::{self, Stream};

/// Link-budget and resource-block parameters. Defaults follow the reference
/// simulation setup (capacity read as 500 kB/s = 4 Mbit/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub tx_power: f64,
    pub noise_power: f64,
    pub capacity_target_bps: f64,
    pub rb_bandwidth_hz: f64,
    pub rb_per_station: u32,
    pub rb_max_per_user: u32,
    pub min_distance: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            pathloss_exponent: 3.0,
            shadowing_sigma_db: 10.0,
            tx_power: 1.0,
            noise_power: 0.0,
            capacity_target_bps: 4.0e6,
            rb_bandwidth_hz: 1.8e5,
            rb_per_station: 100,
            rb_max_per_user: 10,
            min_distance: 1e-3,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(what.to_string()))
            }
        };
        check(self.pathloss_exponent > 2.0 && self.pathloss_exponent.is_finite(), "pathloss_exponent must exceed 2")?;
        check(
            self.shadowing_sigma_db >= 0.0 && self.shadowing_sigma_db.is_finite(),
            "shadowing_sigma_db must be >= 0",
        )?;
        check(self.tx_power > 0.0 && self.tx_power.is_finite(), "tx_power must be positive")?;
        check(self.noise_power >= 0.0 && self.noise_power.is_finite(), "noise_power must be >= 0")?;
        check(
            self.capacity_target_bps > 0.0 && self.capacity_target_bps.is_finite(),
            "capacity_target_bps must be positive",
        )?;
        check(self.rb_bandwidth_hz > 0.0 && self.rb_bandwidth_hz.is_finite(), "rb_bandwidth_hz must be positive")?;
        check(self.rb_per_station >= 1, "rb_per_station must be >= 1")?;
        check(self.rb_max_per_user >= 1, "rb_max_per_user must be >= 1")?;
        check(self.min_distance > 0.0 && self.min_distance.is_finite(), "min_distance must be positive")
    }
}

/// Dense row-major n×m matrix; row i is a base station, column j a user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl LinkMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        LinkMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged matrix rows"));
        }
        Ok(LinkMatrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        LinkMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

/// Everything the equilibrium solvers need about one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioInstance {
    pub sinr: LinkMatrix,
    pub cost: LinkMatrix,
    pub demand: Vec<u32>,
    pub n_total: u64,
    pub mu: Vec<f64>,
}

impl RadioInstance {
    /// Assembles an instance from an SINR matrix and demand vector.
    pub fn from_parts(sinr: LinkMatrix, demand: Vec<u32>, rb_per_station: u32) -> Result<Self> {
        let cost = sinr.map(|s| 1.0 / s);
        Self::from_cost(sinr, cost, demand, rb_per_station)
    }

    /// Like [`RadioInstance::from_parts`] but with an explicit cost matrix;
    /// used to pose solver problems directly.
    pub fn from_cost(sinr: LinkMatrix, cost: LinkMatrix, demand: Vec<u32>, rb_per_station: u32) -> Result<Self> {
        let n = cost.rows();
        let m = cost.cols();
        if n == 0 || m == 0 {
            return Err(Error::invalid("instance needs at least one station and one user"));
        }
        if sinr.rows() != n || sinr.cols() != m || demand.len() != m {
            return Err(Error::invalid("dimension mismatch between sinr, cost and demand"));
        }
        if cost.as_slice().iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("costs must be finite and non-negative"));
        }
        if demand.contains(&0) {
            return Err(Error::invalid("every user demands at least one resource block"));
        }
        let n_total = rb_per_station as u64 * n as u64;
        if demand.iter().any(|&d| d as u64 > n_total) {
            return Err(Error::invalid("a user demands more blocks than the network owns"));
        }
        Ok(RadioInstance { sinr, cost, demand, n_total, mu: vec![1.0 / n as f64; n] })
    }

    pub fn stations(&self) -> usize {
        self.cost.rows()
    }

    pub fn users(&self) -> usize {
        self.cost.cols()
    }

    /// Demand as a share of the network's resource blocks, N_j / N_t.
    pub fn demand_share(&self) -> Vec<f64> {
        let nt = self.n_total as f64;
        self.demand.iter().map(|&d| d as f64 / nt).collect()
    }
}

/// Linear-scale SINR of every station/user link under full frequency reuse.
pub fn compute_sinr(
    stations: &PointPattern,
    users: &PointPattern,
    params: &RadioParams,
    seed: u64,
) -> Result<LinkMatrix> {
    params.validate()?;
    let n = stations.len();
    let m = users.len();
    if m == 0 {
        return Err(Error::invalid("no users"));
    }
    if n == 0 || (n == 1 && params.noise_power == 0.0) {
        return Err(Error::DegenerateInstance(format!("{n} station(s) with zero noise power gives no interference")));
    }

    // Path gains without tx power: SINR only sees tx power through noise/tx_power,
    // so rescaling the power leaves an interference-limited matrix bit-identical.
    let mut shadow_rng = rng::stream_rng(seed, Stream::Shadowing);
    let shadowing = (params.shadowing_sigma_db > 0.0)
        .then(|| Normal::new(0.0, params.shadowing_sigma_db).expect("validated sigma"));
    let gain = LinkMatrix::from_fn(n, m, |i, j| {
        let d = stations.points()[i].distance(&users.points()[j]).max(params.min_distance);
        let s = shadowing.as_ref().map_or(1.0, |z| 10f64.powf(z.sample(&mut shadow_rng) / 10.0));
        s * d.powf(-params.pathloss_exponent)
    });

    let noise = params.noise_power / params.tx_power;
    Ok(LinkMatrix::from_fn(n, m, |i, j| {
        let interference: f64 = (0..n).filter(|&k| k != i).map(|k| gain.get(k, j)).sum();
        gain.get(i, j) / (interference + noise)
    }))
}

/// Blocks requested by each user from Shannon capacity on its best link,
/// capped at `rb_max_per_user`.
pub fn demand_vector(sinr: &LinkMatrix, params: &RadioParams) -> Vec<u32> {
    (0..sinr.cols())
        .map(|j| {
            let best = sinr.column(j).fold(f64::NEG_INFINITY, f64::max);
            blocks_for(best, params)
        })
        .collect()
}

fn blocks_for(best_sinr: f64, params: &RadioParams) -> u32 {
    let spectral = (1.0 + best_sinr).log2();
    let raw = (params.capacity_target_bps / (params.rb_bandwidth_hz * spectral)).ceil();
    if raw.is_nan() || raw >= params.rb_max_per_user as f64 {
        params.rb_max_per_user
    } else {
        (raw as u32).max(1)
    }
}

pub fn build_instance(
    stations: &PointPattern,
    users: &PointPattern,
    params: &RadioParams,
    seed: u64,
) -> Result<RadioInstance> {
    if stations.is_empty() || users.is_empty() {
        return Err(Error::invalid("empty point pattern"));
    }
    let sinr = compute_sinr(stations, users, params, seed)?;
    let demand = demand_vector(&sinr, params);
    RadioInstance::from_parts(sinr, demand, params.rb_per_station)
}
