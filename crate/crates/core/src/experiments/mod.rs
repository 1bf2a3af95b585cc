//! Scenario files, trace experiments and parameter sweeps.

mod sweep;
mod trace;
pub mod validate;

pub use sweep::{run_sweep, write_sweep, SweepPoint, SweepRow, SweepTable};
pub use trace::{run_trace_experiment, write_trace_bundle, ModeResult, TraceBundle};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aoi::{default_hi_count, Criticality, LinkProfile};
use crate::error::{Error, Result};
use crate::network::{generate_topology, PlacementBounds, RadioParams, Topology, TopologyFile, TopologyParams};
use crate::sca::ScaConfig;
use crate::sim::AccessMode;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "AOI_FORGE_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySpec {
    pub links: usize,
    pub power_dbm: f64,
    pub radio: RadioParams,
    pub placement: PlacementBounds,
    /// Explicit placement; overrides `links` and the random generator.
    pub file: Option<TopologyFile>,
}

impl Default for TopologySpec {
    fn default() -> Self {
        Self {
            links: 5,
            power_dbm: 20.0,
            radio: RadioParams::default(),
            placement: PlacementBounds::default(),
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSpec {
    pub payload_bits: f64,
    pub tau_bar_s: f64,
    /// Indices of safety-critical links; the first `⌈0.4K⌉` when absent.
    pub hi_links: Option<Vec<usize>>,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self { payload_bits: 5e4, tau_bar_s: 10.0, hi_links: None }
    }
}

impl ProfileSpec {
    pub fn build(&self, links: usize) -> Result<LinkProfile> {
        let class = match &self.hi_links {
            None => {
                let hi = default_hi_count(links);
                (0..links).map(|k| if k < hi { Criticality::Hi } else { Criticality::Lo }).collect()
            }
            Some(ids) => {
                if let Some(bad) = ids.iter().find(|&&i| i >= links) {
                    return Err(Error::InvalidInput(format!("hi link {bad} out of range for {links} links")));
                }
                (0..links)
                    .map(|k| if ids.contains(&k) { Criticality::Hi } else { Criticality::Lo })
                    .collect()
            }
        };
        LinkProfile::new(vec![self.payload_bits; links], class, self.tau_bar_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub horizon_s: f64,
    pub coherence_s: f64,
    /// Sampling step of the running empirical Ψ.
    pub psi_step_s: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self { horizon_s: 60.0, coherence_s: 0.15, psi_step_s: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub power_dbm: Vec<f64>,
    pub links: Vec<usize>,
    /// Topology seeds averaged per grid point.
    pub seeds: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            power_dbm: (0..=6).map(|i| 5.0 * i as f64).collect(),
            links: vec![2, 3, 5, 8],
            seeds: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub topology: TopologySpec,
    pub profile: ProfileSpec,
    pub solver: ScaConfig,
    pub sim: SimSpec,
    pub sweep: SweepSpec,
    pub modes: Vec<AccessMode>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: 0,
            topology: TopologySpec::default(),
            profile: ProfileSpec::default(),
            solver: ScaConfig::default(),
            sim: SimSpec::default(),
            sweep: SweepSpec::default(),
            modes: vec![AccessMode::Noma, AccessMode::Oma],
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(format!("parsing {}", path.display())))
    }

    pub fn check(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidInput("scenario lists no access modes".into()));
        }
        if self.sweep.power_dbm.is_empty() || self.sweep.links.is_empty() || self.sweep.seeds == 0 {
            return Err(Error::InvalidInput("sweep grids must be non-empty".into()));
        }
        if !(self.sim.horizon_s > 0.0) || !(self.sim.coherence_s > 0.0) {
            return Err(Error::InvalidInput("simulation horizon and coherence time must be positive".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }

    /// The scenario topology: the explicit file if given, else a random
    /// placement with `links` pairs drawn from `seed`.
    pub fn build_topology(&self, links: usize, seed: u64) -> Result<Topology> {
        match &self.topology.file {
            Some(file) => Topology::try_from(file.clone()),
            None => {
                let params = TopologyParams {
                    placement: self.topology.placement,
                    radio: self.topology.radio,
                    power_dbm: self.topology.power_dbm,
                };
                generate_topology(seed, links, &params)
            }
        }
    }

    pub fn link_count(&self) -> usize {
        self.topology.file.as_ref().map_or(self.topology.links, |f| f.links.len())
    }
}

/// Machine-readable summary written next to every output set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario_hash: String,
    pub scenario: Scenario,
    pub threads: usize,
    pub files: Vec<String>,
    /// Columns whose values depend on the machine rather than the scenario.
    pub nondeterministic_columns: Vec<String>,
    pub failures: usize,
}

impl RunManifest {
    pub fn new(command: &str, scenario: &Scenario, threads: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            scenario_hash: scenario.hash(),
            scenario: scenario.clone(),
            threads,
            files: Vec::new(),
            nondeterministic_columns: Vec::new(),
            failures: 0,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Worker count from [`THREADS_ENV`], falling back to the available cores.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {threads} worker threads: {e}")))
}
