//! Block-fading link-level simulation of a fixed allocation.
//!
//! Channels are redrawn every coherence time. Each sensor sends packets back
//! to back; a packet of duration `t_k` succeeds only if its rate `N_k/t_k` is
//! supported in every coherence block it overlaps. A delivery resets the
//! receiver's AoI to `t_k`.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aoi::{empirical_psi, Allocation, LinkProfile};
use crate::error::{Error, Result};
use crate::network::{sample_channel, sinr, sinr_threshold, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AccessMode {
    Noma,
    Oma,
}

impl AccessMode {
    pub fn label(&self) -> &'static str {
        match self {
            AccessMode::Noma => "NOMA",
            AccessMode::Oma => "OMA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon_s: f64,
    pub coherence_s: f64,
    pub seed: u64,
    pub mode: AccessMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { horizon_s: 60.0, coherence_s: 0.15, seed: 0, mode: AccessMode::Noma }
    }
}

/// Equal bandwidth split `B/shares` without cross-link interference; the
/// noise power follows the narrower band.
pub fn oma_topology(topology: &Topology, shares: usize) -> Topology {
    topology.orthogonalized(topology.bandwidth() / shares.max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceEvent {
    None,
    Delivery,
    Outage,
}

/// Instantaneous AoI at `time_s`; the trace is linear with slope 1 between
/// consecutive breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub time_s: f64,
    pub aoi_s: f64,
    pub event: TraceEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub start_s: f64,
    pub duration_s: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTrace {
    pub transmission_s: f64,
    pub rate_bps: f64,
    pub breakpoints: Vec<Breakpoint>,
    pub packets: Vec<PacketRecord>,
    /// Peak AoI before every delivery except the first.
    pub peaks: Vec<f64>,
    /// Time-average of the instantaneous AoI over the horizon.
    pub mean_aoi_s: f64,
}

impl LinkTrace {
    pub fn outage_rate(&self) -> f64 {
        let fails = self.packets.iter().filter(|p| !p.success).count();
        fails as f64 / self.packets.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiTrace {
    pub mode: AccessMode,
    pub horizon_s: f64,
    pub links: Vec<LinkTrace>,
}

#[derive(Serialize)]
struct TraceRow {
    time_s: f64,
    link_id: usize,
    aoi_s: f64,
    event: TraceEvent,
}

#[derive(Serialize)]
struct PeakRow {
    link_id: usize,
    index: usize,
    peak_aoi_s: f64,
}

impl AoiTrace {
    pub fn peak_samples(&self) -> Vec<Vec<f64>> {
        self.links.iter().map(|l| l.peaks.clone()).collect()
    }

    pub fn empirical_psi(&self, profile: &LinkProfile) -> Result<f64> {
        empirical_psi(&self.peak_samples(), profile)
    }

    /// Running empirical Ψ at every multiple of `step_s`, using the peaks
    /// completed so far; points where some link has no peak yet are skipped.
    pub fn psi_series(&self, profile: &LinkProfile, step_s: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if !(step_s > 0.0) {
            return out;
        }
        // delivery time of each peak sample
        let times: Vec<Vec<f64>> = self
            .links
            .iter()
            .map(|l| {
                l.breakpoints
                    .iter()
                    .filter(|b| b.event == TraceEvent::Delivery)
                    .skip(1)
                    .map(|b| b.time_s)
                    .collect()
            })
            .collect();
        let steps = (self.horizon_s / step_s).floor() as usize;
        for s in 1..=steps {
            let now = s as f64 * step_s;
            let samples: Vec<Vec<f64>> = self
                .links
                .iter()
                .zip(&times)
                .map(|(l, ts)| l.peaks[..ts.partition_point(|t| *t <= now)].to_vec())
                .collect();
            if let Ok(psi) = empirical_psi(&samples, profile) {
                out.push((now, psi));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for (link_id, l) in self.links.iter().enumerate() {
            for b in &l.breakpoints {
                w.serialize(TraceRow { time_s: b.time_s, link_id, aoi_s: b.aoi_s, event: b.event })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_peaks_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for (link_id, l) in self.links.iter().enumerate() {
            for (index, &peak_aoi_s) in l.peaks.iter().enumerate() {
                w.serialize(PeakRow { link_id, index, peak_aoi_s })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates every link of `topology` under `alloc` for `sim.horizon_s`.
///
/// Under [`AccessMode::Oma`] the topology is split into `K` orthogonal
/// bands first; the channel draws are identical in both modes.
pub fn run_trace(topology: &Topology, alloc: &Allocation, profile: &LinkProfile, sim: &SimConfig) -> Result<AoiTrace> {
    let links = topology.link_count();
    if alloc.link_count() != links || profile.link_count() != links {
        return Err(Error::InvalidInput("allocation, profile and topology sizes differ".into()));
    }
    if !(sim.horizon_s > 0.0) || !(sim.coherence_s > 0.0) {
        return Err(Error::InvalidInput("horizon and coherence time must be positive".into()));
    }
    alloc.validate(profile.tau_bar())?;
    let topo = match sim.mode {
        AccessMode::Noma => topology.clone(),
        AccessMode::Oma => oma_topology(topology, links),
    };

    let blocks = (sim.horizon_s / sim.coherence_s).ceil() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    // sinr[b * K + k]
    let mut block_sinr = Vec::with_capacity(blocks * links);
    for _ in 0..blocks {
        let h = sample_channel(&topo, &mut rng);
        block_sinr.extend((0..links).map(|k| sinr(&topo, &h, k)));
    }

    let eps = 1e-9;
    let traces = (0..links)
        .map(|k| {
            let t = alloc.t[k];
            let rate = profile.payload(k) / t;
            let theta = sinr_threshold(rate, topo.bandwidth());
            let packets_total = (sim.horizon_s / t * (1.0 + 1e-12)).floor() as usize;
            let mut packets = Vec::with_capacity(packets_total);
            let mut breakpoints = vec![Breakpoint { time_s: 0.0, aoi_s: 0.0, event: TraceEvent::None }];
            let mut peaks = Vec::new();
            let mut aoi_at_last = 0.0;
            let mut last_time = 0.0;
            let mut last_delivery: Option<f64> = None;
            let mut area = 0.0;
            for j in 0..packets_total {
                let start = j as f64 * t;
                let end = (j + 1) as f64 * t;
                let first = (start / sim.coherence_s + eps).floor() as usize;
                let last = ((end / sim.coherence_s - eps).ceil() as usize).max(first + 1) - 1;
                let success = (first..=last.min(blocks - 1)).all(|b| block_sinr[b * links + k] >= theta);
                packets.push(PacketRecord { start_s: start, duration_s: t, success });

                let aoi_end = aoi_at_last + (end - last_time);
                area += 0.5 * (aoi_at_last + aoi_end) * (end - last_time);
                if success {
                    if let Some(prev) = last_delivery {
                        peaks.push(t + (end - prev));
                    }
                    last_delivery = Some(end);
                    breakpoints.push(Breakpoint { time_s: end, aoi_s: aoi_end, event: TraceEvent::None });
                    breakpoints.push(Breakpoint { time_s: end, aoi_s: t, event: TraceEvent::Delivery });
                    aoi_at_last = t;
                } else {
                    breakpoints.push(Breakpoint { time_s: end, aoi_s: aoi_end, event: TraceEvent::Outage });
                    aoi_at_last = aoi_end;
                }
                last_time = end;
            }
            let tail = sim.horizon_s - last_time;
            if tail > 0.0 {
                area += (aoi_at_last + 0.5 * tail) * tail;
                breakpoints.push(Breakpoint { time_s: sim.horizon_s, aoi_s: aoi_at_last + tail, event: TraceEvent::None });
            }
            LinkTrace {
                transmission_s: t,
                rate_bps: rate,
                breakpoints,
                packets,
                peaks,
                mean_aoi_s: area / sim.horizon_s,
            }
        })
        .collect();
    Ok(AoiTrace { mode: sim.mode, horizon_s: sim.horizon_s, links: traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{closed_form_outage, generate_topology, RadioParams, TopologyParams};

    fn strong_single() -> (Topology, LinkProfile) {
        let topo = Topology::new(vec![[0.0, 0.0]], vec![[5.0, 0.0]], vec![1e6], RadioParams::default()).unwrap();
        (topo, LinkProfile::uniform(1, 5e4, 10.0, 0).unwrap())
    }

    #[test]
    fn sawtooth_without_outage() {
        let (topo, profile) = strong_single();
        let alloc = Allocation::new(vec![0.01], vec![0.0]);
        let sim = SimConfig { horizon_s: 1.0, coherence_s: 0.15, seed: 3, mode: AccessMode::Noma };
        let trace = run_trace(&topo, &alloc, &profile, &sim).unwrap();
        let link = &trace.links[0];
        assert!(link.packets.iter().all(|p| p.success));
        assert_eq!(link.peaks.len(), link.packets.len() - 1);
        assert!(link.peaks.iter().all(|p| (p - 0.02).abs() < 1e-12));
    }

    #[test]
    fn slope_is_one_between_resets() {
        let topo = generate_topology(4, 3, &TopologyParams::default()).unwrap();
        let profile = LinkProfile::uniform(3, 5e4, 10.0, 1).unwrap();
        let alloc = Allocation::new(vec![0.004, 0.006, 0.01], vec![0.5; 3]);
        let sim = SimConfig { horizon_s: 5.0, ..SimConfig::default() };
        let trace = run_trace(&topo, &alloc, &profile, &sim).unwrap();
        for (k, l) in trace.links.iter().enumerate() {
            for w in l.breakpoints.windows(2) {
                let dt = w[1].time_s - w[0].time_s;
                if dt > 0.0 {
                    assert!((w[1].aoi_s - w[0].aoi_s - dt).abs() < 1e-9);
                } else {
                    assert_eq!(w[1].event, TraceEvent::Delivery);
                    assert!((w[1].aoi_s - alloc.t[k]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn oma_single_link_matches_noma() {
        let topo = generate_topology(9, 1, &TopologyParams::default()).unwrap();
        let oma = oma_topology(&topo, 1);
        assert_eq!(oma.bandwidth(), topo.bandwidth());
        assert_eq!(oma.noise_power(), topo.noise_power());
        let profile = LinkProfile::uniform(1, 5e4, 10.0, 1).unwrap();
        let alloc = Allocation::new(vec![0.003], vec![0.3]);
        let noma = run_trace(&topo, &alloc, &profile, &SimConfig::default()).unwrap();
        let oma_trace = run_trace(&topo, &alloc, &profile, &SimConfig { mode: AccessMode::Oma, ..SimConfig::default() }).unwrap();
        assert_eq!(noma.links, oma_trace.links);
    }

    #[test]
    fn oma_splits_band() {
        let topo = generate_topology(9, 5, &TopologyParams::default()).unwrap();
        let oma = oma_topology(&topo, 5);
        assert_eq!(oma.bandwidth(), 2e6);
        assert!((oma.noise_power() - topo.noise_power() / 5.0).abs() < 1e-25);
        let theta: f64 = 0.8;
        let single = 1.0 - (-theta * oma.distance(2, 2) * oma.noise_power() / oma.power(2)).exp();
        let rate = 2e6 * theta.ln_1p() / std::f64::consts::LN_2;
        assert!((closed_form_outage(&oma, &[rate; 5], 2) - single).abs() < 1e-15);
    }

    #[test]
    fn deterministic_per_seed() {
        let topo = generate_topology(4, 2, &TopologyParams::default()).unwrap();
        let profile = LinkProfile::uniform(2, 5e4, 10.0, 1).unwrap();
        let alloc = Allocation::new(vec![0.004, 0.006], vec![0.5; 2]);
        let a = run_trace(&topo, &alloc, &profile, &SimConfig::default()).unwrap();
        let b = run_trace(&topo, &alloc, &profile, &SimConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
