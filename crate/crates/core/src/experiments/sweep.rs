use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sca::{iterate, ScaConfig};
use crate::sim::{oma_topology, AccessMode};

use super::{thread_pool, Scenario};

/// One optimized grid point for one topology seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub mode: AccessMode,
    pub links: usize,
    pub power_dbm: f64,
    pub seed: u64,
    pub psi: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_s: f64,
    pub error: Option<String>,
}

/// Seed average at one `(mode, K, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: AccessMode,
    pub links: usize,
    pub power_dbm: f64,
    pub seeds_ok: usize,
    pub seeds_failed: usize,
    pub psi_mean: Option<f64>,
    pub psi_std: Option<f64>,
    pub iterations_mean: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub scenario_hash: String,
    pub points: Vec<SweepPoint>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, mode: AccessMode, links: usize, power_dbm: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.mode == mode && r.links == links && r.power_dbm == power_dbm)
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

fn solve_point(scenario: &Scenario, mode: AccessMode, links: usize, power_dbm: f64, seed: u64) -> SweepPoint {
    let started = Instant::now();
    let outcome = (|| {
        let topology = scenario.build_topology(links, seed)?.with_power_dbm(power_dbm);
        let links = topology.link_count();
        let topology = match mode {
            AccessMode::Noma => topology,
            AccessMode::Oma => oma_topology(&topology, links),
        };
        let profile = scenario.profile.build(links)?;
        iterate(&topology, &profile, &ScaConfig { seed, ..scenario.solver })
    })();
    let runtime_s = started.elapsed().as_secs_f64();
    match outcome {
        Ok(report) => SweepPoint {
            mode,
            links,
            power_dbm,
            seed,
            psi: Some(report.final_psi()),
            iterations: report.iterations,
            converged: report.converged(),
            runtime_s,
            error: None,
        },
        Err(e) => SweepPoint {
            mode,
            links,
            power_dbm,
            seed,
            psi: None,
            iterations: 0,
            converged: false,
            runtime_s,
            error: Some(e.to_string()),
        },
    }
}

/// Optimizes every `(mode, K, q, seed)` combination on `threads` workers.
///
/// The same topology seeds are reused across modes and powers, so grid
/// points are paired comparisons. Failed points are kept with their error.
pub fn run_sweep(scenario: &Scenario, threads: usize) -> Result<SweepTable> {
    scenario.check()?;
    let link_grid = match &scenario.topology.file {
        Some(f) => vec![f.links.len()],
        None => scenario.sweep.links.clone(),
    };
    let mut jobs = Vec::new();
    for &mode in &scenario.modes {
        for &links in &link_grid {
            for &q in &scenario.sweep.power_dbm {
                for s in 0..scenario.sweep.seeds as u64 {
                    jobs.push((mode, links, q, scenario.seed + s));
                }
            }
        }
    }
    let pool = thread_pool(threads)?;
    let points: Vec<SweepPoint> = pool.install(|| {
        jobs.par_iter()
            .map(|&(mode, links, q, seed)| solve_point(scenario, mode, links, q, seed))
            .collect()
    });

    let rows = points
        .chunks(scenario.sweep.seeds)
        .map(|group| {
            let ok: Vec<f64> = group.iter().filter_map(|p| p.psi).collect();
            let n = ok.len();
            let mean = (n > 0).then(|| ok.iter().sum::<f64>() / n as f64);
            let std = mean.filter(|_| n > 1).map(|m| (ok.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
            SweepRow {
                mode: group[0].mode,
                links: group[0].links,
                power_dbm: group[0].power_dbm,
                seeds_ok: n,
                seeds_failed: group.len() - n,
                psi_mean: mean,
                psi_std: std,
                iterations_mean: group.iter().map(|p| p.iterations as f64).sum::<f64>() / group.len() as f64,
                runtime_s: group.iter().map(|p| p.runtime_s).sum::<f64>() / group.len() as f64,
            }
        })
        .collect();
    Ok(SweepTable { scenario_hash: scenario.hash(), points, rows })
}

/// Writes `sweep.csv` (seed averages) and `sweep_points.csv` (per seed).
pub fn write_sweep(table: &SweepTable, dir: &Path) -> Result<Vec<String>> {
    let hash = table.scenario_hash.as_str();
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    w.write_record([
        "scenario_hash",
        "mode",
        "links",
        "power_dbm",
        "psi_mean",
        "psi_std",
        "seeds_ok",
        "seeds_failed",
        "iterations_mean",
        "runtime_s",
    ])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in &table.rows {
        w.write_record([
            hash.to_string(),
            r.mode.label().to_string(),
            r.links.to_string(),
            r.power_dbm.to_string(),
            opt(r.psi_mean),
            opt(r.psi_std),
            r.seeds_ok.to_string(),
            r.seeds_failed.to_string(),
            r.iterations_mean.to_string(),
            r.runtime_s.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("sweep_points.csv"))?;
    w.write_record([
        "scenario_hash",
        "mode",
        "links",
        "power_dbm",
        "seed",
        "psi",
        "iterations",
        "converged",
        "runtime_s",
        "error",
    ])?;
    for p in &table.points {
        w.write_record([
            hash.to_string(),
            p.mode.label().to_string(),
            p.links.to_string(),
            p.power_dbm.to_string(),
            p.seed.to_string(),
            opt(p.psi),
            p.iterations.to_string(),
            p.converged.to_string(),
            p.runtime_s.to_string(),
            p.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(vec!["sweep.csv".into(), "sweep_points.csv".into()])
}
