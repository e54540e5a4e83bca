//! Flat key-value (TOML) run configuration.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::equilibria::{AllocateMode, Method, SupplyMode};
use crate::error::{Error, Result};
use crate::geometry::{Deployment, Window};
use crate::metrics::Scenario;
use crate::radio::RadioParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeploymentKind {
    #[default]
    Poisson,
    BetaGinibre,
}

/// Every key a configuration document may contain; missing keys take their
/// defaults. `density_ratio` is only used by single-instance runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub lambda_n: f64,
    pub deployment: DeploymentKind,
    pub beta: Option<f64>,
    pub window_side: f64,
    pub density_ratio: f64,
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub tx_power: f64,
    pub noise_power: f64,
    pub capacity_target_bps: f64,
    pub rb_bandwidth_hz: f64,
    pub rb_per_station: u32,
    pub rb_max_per_user: u32,
    pub min_distance: f64,
    pub method: Method,
    pub supply_mode: SupplyMode,
    pub allocate_mode: AllocateMode,
    pub support_threshold: f64,
    pub tolerance: f64,
}

impl Default for Config {
    fn default() -> Self {
        let r = RadioParams::default();
        let s = Scenario::default();
        Config {
            lambda_n: s.lambda_n,
            deployment: DeploymentKind::Poisson,
            beta: None,
            window_side: s.window.side_length(),
            density_ratio: 1.0,
            pathloss_exponent: r.pathloss_exponent,
            shadowing_sigma_db: r.shadowing_sigma_db,
            tx_power: r.tx_power,
            noise_power: r.noise_power,
            capacity_target_bps: r.capacity_target_bps,
            rb_bandwidth_hz: r.rb_bandwidth_hz,
            rb_per_station: r.rb_per_station,
            rb_max_per_user: r.rb_max_per_user,
            min_distance: r.min_distance,
            method: s.method,
            supply_mode: s.supply_mode,
            allocate_mode: s.allocate_mode,
            support_threshold: s.support_threshold,
            tolerance: s.tolerance,
        }
    }
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), message: message.into() }
}

/// Removes `key` from `table` and converts it, reporting failures against the key.
fn take<T: DeserializeOwned>(table: &mut toml::Table, key: &str, slot: &mut T) -> Result<()> {
    if let Some(value) = table.remove(key) {
        *slot = value.try_into().map_err(|e: toml::de::Error| config_err(key, e.message().to_string()))?;
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(key, format!("must be positive and finite, got {v}")))
    }
}

impl Config {
    /// Checks the invariants of every field, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        positive("lambda_n", self.lambda_n)?;
        positive("window_side", self.window_side)?;
        positive("density_ratio", self.density_ratio)?;
        positive("support_threshold", self.support_threshold)?;
        positive("tolerance", self.tolerance)?;
        if let Some(beta) = self.beta {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(config_err("beta", format!("must lie in (0, 1], got {beta}")));
            }
            if self.deployment == DeploymentKind::Poisson {
                return Err(config_err("beta", "only applies to deployment = \"beta_ginibre\""));
            }
        }
        self.radio().validate().map_err(|e| {
            let message = e.to_string();
            let key = RADIO_KEYS.iter().find(|k| message.contains(*k)).copied().unwrap_or("radio");
            config_err(key, message)
        })
    }

    pub fn radio(&self) -> RadioParams {
        RadioParams {
            pathloss_exponent: self.pathloss_exponent,
            shadowing_sigma_db: self.shadowing_sigma_db,
            tx_power: self.tx_power,
            noise_power: self.noise_power,
            capacity_target_bps: self.capacity_target_bps,
            rb_bandwidth_hz: self.rb_bandwidth_hz,
            rb_per_station: self.rb_per_station,
            rb_max_per_user: self.rb_max_per_user,
            min_distance: self.min_distance,
        }
    }

    pub fn deployment(&self) -> Deployment {
        match self.deployment {
            DeploymentKind::Poisson => Deployment::Poisson,
            DeploymentKind::BetaGinibre => Deployment::BetaGinibre { beta: self.beta.unwrap_or(1.0) },
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.validate()?;
        Ok(Scenario {
            lambda_n: self.lambda_n,
            deployment: self.deployment(),
            window: Window::new(self.window_side)?,
            radio: self.radio(),
            method: self.method,
            supply_mode: self.supply_mode,
            allocate_mode: self.allocate_mode,
            support_threshold: self.support_threshold,
            tolerance: self.tolerance,
        })
    }
}

const RADIO_KEYS: [&str; 9] = [
    "pathloss_exponent",
    "shadowing_sigma_db",
    "tx_power",
    "noise_power",
    "capacity_target_bps",
    "rb_bandwidth_hz",
    "rb_per_station",
    "rb_max_per_user",
    "min_distance",
];

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let key = e.span().map(|s| text[s].trim().to_string()).unwrap_or_default();
        config_err(&key, e.message().to_string())
    })?;
    let explicit_deployment = table.contains_key("deployment");
    let mut c = Config::default();
    take(&mut table, "lambda_n", &mut c.lambda_n)?;
    take(&mut table, "deployment", &mut c.deployment)?;
    take(&mut table, "window_side", &mut c.window_side)?;
    take(&mut table, "density_ratio", &mut c.density_ratio)?;
    take(&mut table, "pathloss_exponent", &mut c.pathloss_exponent)?;
    take(&mut table, "shadowing_sigma_db", &mut c.shadowing_sigma_db)?;
    take(&mut table, "tx_power", &mut c.tx_power)?;
    take(&mut table, "noise_power", &mut c.noise_power)?;
    take(&mut table, "capacity_target_bps", &mut c.capacity_target_bps)?;
    take(&mut table, "rb_bandwidth_hz", &mut c.rb_bandwidth_hz)?;
    take(&mut table, "rb_per_station", &mut c.rb_per_station)?;
    take(&mut table, "rb_max_per_user", &mut c.rb_max_per_user)?;
    take(&mut table, "min_distance", &mut c.min_distance)?;
    take(&mut table, "method", &mut c.method)?;
    take(&mut table, "supply_mode", &mut c.supply_mode)?;
    take(&mut table, "allocate_mode", &mut c.allocate_mode)?;
    take(&mut table, "support_threshold", &mut c.support_threshold)?;
    take(&mut table, "tolerance", &mut c.tolerance)?;
    if let Some(value) = table.remove("beta") {
        let beta: f64 = value.try_into().map_err(|e: toml::de::Error| config_err("beta", e.message().to_string()))?;
        c.beta = Some(beta);
        // A bare β selects the β-Ginibre deployment.
        if !explicit_deployment {
            c.deployment = DeploymentKind::BetaGinibre;
        }
    }
    if let Some(key) = table.keys().next() {
        return Err(config_err(key, "unknown key"));
    }
    c.validate()?;
    Ok(c)
}
