//! Seed-averaged optimal objective over transmit power and link count.
//! Worker count comes from `AOI_FORGE_THREADS`.

use aoi_forge::experiments::{run_sweep, thread_count, Scenario, SweepSpec};

fn main() -> aoi_forge::error::Result<()> {
    let scenario = Scenario {
        sweep: SweepSpec { power_dbm: vec![0.0, 10.0, 20.0, 30.0], links: vec![2, 5, 8], seeds: 5 },
        ..Scenario::default()
    };
    let table = run_sweep(&scenario, thread_count())?;
    println!("mode  K   q[dBm]  psi_mean     psi_std");
    for r in &table.rows {
        println!(
            "{:<4} {:2}  {:6.1}  {:.7}  {:.2e}",
            r.mode.label(),
            r.links,
            r.power_dbm,
            r.psi_mean.unwrap_or(f64::NAN),
            r.psi_std.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
