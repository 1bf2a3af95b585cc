//! Optimizes one deployment under shared and split spectrum, then simulates
//! both allocations on the same channel seed.

use aoi_forge::experiments::{run_trace_experiment, Scenario};
use aoi_forge::sim::AccessMode;

fn main() -> aoi_forge::error::Result<()> {
    let scenario = Scenario { seed: 7, ..Scenario::default() };
    let bundle = run_trace_experiment(&scenario)?;
    for mode in [AccessMode::Noma, AccessMode::Oma] {
        let m = bundle.mode(mode).expect("both modes requested");
        println!(
            "{:<4}  optimized psi {:.6}  empirical {:.6}  iterations {}",
            mode.label(),
            m.optimized_psi(),
            m.empirical_psi.unwrap_or(f64::NAN),
            m.report.iterations
        );
        for (k, l) in m.trace.links.iter().enumerate() {
            println!("      link {k}  t {:.3e} s  outage {:.3}", l.transmission_s, l.outage_rate());
        }
    }
    Ok(())
}
