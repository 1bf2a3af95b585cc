//! Simulates a hand-picked allocation and compares the empirical objective
//! and outage rates with their analytical values.

use aoi_forge::aoi::{objective_psi, Allocation, LinkProfile};
use aoi_forge::network::{closed_form_outage, generate_topology, TopologyParams};
use aoi_forge::sim::{run_trace, AccessMode, SimConfig};

fn main() -> aoi_forge::error::Result<()> {
    let topology = generate_topology(3, 3, &TopologyParams::default())?;
    let profile = LinkProfile::uniform(3, 5e4, 10.0, 1)?;
    let t = vec![0.01; 3];
    let rates: Vec<f64> = t.iter().map(|t| 5e4 / t).collect();
    let p = (0..3).map(|k| closed_form_outage(&topology, &rates, k)).collect();
    let alloc = Allocation::new(t, p);
    // one packet per coherence block keeps outages independent
    let sim = SimConfig { horizon_s: 200.0, coherence_s: 0.01, seed: 5, mode: AccessMode::Noma };
    let trace = run_trace(&topology, &alloc, &profile, &sim)?;
    for (k, l) in trace.links.iter().enumerate() {
        println!(
            "link {k}  outage analytical {:.4}  simulated {:.4}  packets {}",
            alloc.p[k],
            l.outage_rate(),
            l.packets.len()
        );
    }
    println!("psi analytical {:.6}  empirical {:.6}", objective_psi(&alloc, &profile)?, trace.empirical_psi(&profile)?);
    Ok(())
}
