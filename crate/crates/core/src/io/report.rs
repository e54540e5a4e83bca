//! Single-instance JSON report.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Config;
use crate::equilibria::Diagnostics;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::metrics::{indicators_from_parts, Indicators, InstanceRun, Outcome};
use crate::transport::SPARSE_CUTOFF;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub station: usize,
    pub user: usize,
    pub value: f64,
}

/// One instance end to end. Solver fields are absent for degenerate draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub seed: u64,
    pub config: Config,
    pub degenerate: bool,
    pub stations: Vec<Point>,
    pub users: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_total: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    /// Plan entries of at least `1e-12`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<Triplet>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indicators: Option<Indicators>,
}

impl InstanceReport {
    pub fn solved(config: &Config, run: &InstanceRun) -> Self {
        let eq = &run.equilibrium;
        InstanceReport {
            seed: run.seed,
            config: config.clone(),
            degenerate: false,
            stations: run.stations.points().to_vec(),
            users: run.users.points().to_vec(),
            demand: Some(run.instance.demand.clone()),
            n_total: Some(run.instance.n_total),
            nu: Some(eq.nu.clone()),
            gamma: Some(
                eq.gamma
                    .triplets()
                    .into_iter()
                    .map(|(station, user, value)| Triplet { station, user, value })
                    .collect(),
            ),
            objective: Some(eq.objective),
            diagnostics: Some(eq.diagnostics.clone()),
            indicators: Some(run.indicators),
        }
    }

    pub fn from_outcome(config: &Config, seed: u64, outcome: &Outcome) -> Self {
        match outcome {
            Outcome::Solved(run) => Self::solved(config, run),
            Outcome::Degenerate { .. } => InstanceReport {
                seed,
                config: config.clone(),
                degenerate: true,
                stations: Vec::new(),
                users: Vec::new(),
                demand: None,
                n_total: None,
                nu: None,
                gamma: None,
                objective: None,
                diagnostics: None,
                indicators: None,
            },
        }
    }

    /// Indicators recomputed from the stored allocation and plan support.
    pub fn recompute_indicators(&self) -> Option<Indicators> {
        let (nu, demand, n_total, gamma) =
            (self.nu.as_ref()?, self.demand.as_ref()?, self.n_total?, self.gamma.as_ref()?);
        let threshold = self.config.support_threshold.max(SPARSE_CUTOFF);
        let mut serving = vec![0; nu.len()];
        for t in gamma {
            if t.value >= threshold {
                serving[t.user] += 1;
            }
        }
        Some(indicators_from_parts(nu, demand, n_total, &serving))
    }
}

pub fn write_instance_json<W: Write>(report: &InstanceReport, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, report).map_err(|e| Error::Format(e.to_string()))
}

pub fn emit_instance_json(report: &InstanceReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_instance_json(report, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_instance_json(path: &Path) -> Result<InstanceReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Format(e.to_string()))
}
