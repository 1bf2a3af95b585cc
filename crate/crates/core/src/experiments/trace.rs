use std::path::Path;

use serde::Serialize;

use crate::aoi::{Criticality, LinkProfile};
use crate::error::Result;
use crate::network::Topology;
use crate::sca::{iterate, SolveReport};
use crate::sim::{oma_topology, run_trace, AccessMode, AoiTrace, SimConfig, TraceEvent};

use super::Scenario;

#[derive(Debug, Clone)]
pub struct ModeResult {
    pub mode: AccessMode,
    /// Topology the optimizer saw (band-split under OMA).
    pub topology: Topology,
    pub report: SolveReport,
    pub trace: AoiTrace,
    pub empirical_psi: Option<f64>,
    pub psi_series: Vec<(f64, f64)>,
}

impl ModeResult {
    pub fn optimized_psi(&self) -> f64 {
        self.report.final_psi()
    }

    /// Mean instantaneous AoI averaged over the links of `class`.
    pub fn class_mean_aoi(&self, profile: &LinkProfile, class: Criticality) -> Option<f64> {
        let v: Vec<f64> = profile.links_of(class).map(|k| self.trace.links[k].mean_aoi_s).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TraceBundle {
    pub scenario_hash: String,
    pub profile: LinkProfile,
    pub modes: Vec<ModeResult>,
}

impl TraceBundle {
    pub fn mode(&self, mode: AccessMode) -> Option<&ModeResult> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

/// Optimizes the scenario topology under every requested access mode and
/// simulates each optimized allocation with the same channel seed.
pub fn run_trace_experiment(scenario: &Scenario) -> Result<TraceBundle> {
    scenario.check()?;
    let links = scenario.link_count();
    let ctx = |what: String| move |e: crate::error::Error| e.context(format!("scenario '{}': {what}", scenario.name));
    let topology = scenario.build_topology(links, scenario.seed).map_err(ctx("topology".into()))?;
    let profile = scenario.profile.build(links).map_err(ctx("profile".into()))?;
    let mut modes = Vec::new();
    for &mode in &scenario.modes {
        let seen = match mode {
            AccessMode::Noma => topology.clone(),
            AccessMode::Oma => oma_topology(&topology, links),
        };
        let report = iterate(&seen, &profile, &scenario.solver).map_err(ctx(format!("{} optimization", mode.label())))?;
        let sim = SimConfig {
            horizon_s: scenario.sim.horizon_s,
            coherence_s: scenario.sim.coherence_s,
            seed: scenario.seed,
            mode,
        };
        let trace = run_trace(&topology, &report.allocation, &profile, &sim)
            .map_err(ctx(format!("{} simulation", mode.label())))?;
        let empirical_psi = trace.empirical_psi(&profile).ok();
        let psi_series = trace.psi_series(&profile, scenario.sim.psi_step_s);
        modes.push(ModeResult { mode, topology: seen, report, trace, empirical_psi, psi_series });
    }
    Ok(TraceBundle { scenario_hash: scenario.hash(), profile, modes })
}

#[derive(Serialize)]
struct TraceRow<'a> {
    scenario_hash: &'a str,
    mode: &'a str,
    time_s: f64,
    link_id: usize,
    aoi_s: f64,
    event: TraceEvent,
}

#[derive(Serialize)]
struct PeakRow<'a> {
    scenario_hash: &'a str,
    mode: &'a str,
    link_id: usize,
    index: usize,
    peak_aoi_s: f64,
}

#[derive(Serialize)]
struct PsiRow<'a> {
    scenario_hash: &'a str,
    mode: &'a str,
    time_s: f64,
    psi_empirical: f64,
    psi_optimized: f64,
}

#[derive(Serialize)]
struct LinkRow<'a> {
    scenario_hash: &'a str,
    mode: &'a str,
    link_id: usize,
    class: Criticality,
    t_s: f64,
    p: f64,
    rate_bps: f64,
    outage_rate: f64,
    mean_aoi_s: f64,
    peak_samples: usize,
}

#[derive(Serialize)]
struct HistoryRow<'a> {
    scenario_hash: &'a str,
    mode: &'a str,
    iteration: usize,
    psi: f64,
    surrogate: Option<f64>,
    damping: Option<f64>,
    kkt_max: Option<f64>,
    newton_iterations: Option<usize>,
}

/// Writes the bundle CSVs into `dir`, returning the file names.
pub fn write_trace_bundle(bundle: &TraceBundle, dir: &Path) -> Result<Vec<String>> {
    let hash = bundle.scenario_hash.as_str();
    let mut files = Vec::new();
    let mut psi = csv::Writer::from_path(dir.join("psi_series.csv"))?;
    let mut links = csv::Writer::from_path(dir.join("links.csv"))?;
    let mut history = csv::Writer::from_path(dir.join("sca_history.csv"))?;
    for m in &bundle.modes {
        let mode = m.mode.label();
        let lower = mode.to_lowercase();

        let name = format!("trace_{lower}.csv");
        let mut w = csv::Writer::from_path(dir.join(&name))?;
        for (link_id, l) in m.trace.links.iter().enumerate() {
            for b in &l.breakpoints {
                w.serialize(TraceRow { scenario_hash: hash, mode, time_s: b.time_s, link_id, aoi_s: b.aoi_s, event: b.event })?;
            }
        }
        w.flush()?;
        files.push(name);

        let name = format!("peaks_{lower}.csv");
        let mut w = csv::Writer::from_path(dir.join(&name))?;
        for (link_id, l) in m.trace.links.iter().enumerate() {
            for (index, &peak_aoi_s) in l.peaks.iter().enumerate() {
                w.serialize(PeakRow { scenario_hash: hash, mode, link_id, index, peak_aoi_s })?;
            }
        }
        w.flush()?;
        files.push(name);

        for &(time_s, psi_empirical) in &m.psi_series {
            psi.serialize(PsiRow { scenario_hash: hash, mode, time_s, psi_empirical, psi_optimized: m.optimized_psi() })?;
        }
        for (link_id, l) in m.trace.links.iter().enumerate() {
            links.serialize(LinkRow {
                scenario_hash: hash,
                mode,
                link_id,
                class: bundle.profile.class(link_id),
                t_s: m.report.allocation.t[link_id],
                p: m.report.allocation.p[link_id],
                rate_bps: l.rate_bps,
                outage_rate: l.outage_rate(),
                mean_aoi_s: l.mean_aoi_s,
                peak_samples: l.peaks.len(),
            })?;
        }
        for (iteration, &value) in m.report.psi_history.iter().enumerate() {
            let inner = iteration.checked_sub(1).map(|i| m.report.inner[i]);
            history.serialize(HistoryRow {
                scenario_hash: hash,
                mode,
                iteration,
                psi: value,
                surrogate: inner.map(|s| s.surrogate),
                damping: inner.map(|s| s.damping),
                kkt_max: inner.map(|s| s.kkt.max()),
                newton_iterations: inner.map(|s| s.newton_iterations),
            })?;
        }
    }
    psi.flush()?;
    links.flush()?;
    history.flush()?;
    files.extend(["psi_series.csv", "links.csv", "sca_history.csv"].map(String::from));
    Ok(files)
}
