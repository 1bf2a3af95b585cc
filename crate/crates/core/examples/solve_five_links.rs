//! Optimizes a random five-link deployment and prints the SCA trajectory.

use aoi_forge::aoi::LinkProfile;
use aoi_forge::network::{generate_topology, TopologyParams};
use aoi_forge::sca::{iterate, ScaConfig};

fn main() -> aoi_forge::error::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let topology = generate_topology(seed, 5, &TopologyParams::default())?;
    let profile = LinkProfile::uniform(5, 5e4, 10.0, 2)?;
    let report = iterate(&topology, &profile, &ScaConfig { seed, ..ScaConfig::default() })?;

    println!("status {:?} after {} iterations ({:.3} s)", report.status, report.iterations, report.wall_time_s);
    for (v, psi) in report.psi_history.iter().enumerate() {
        let inner = v.checked_sub(1).map(|i| report.inner[i]);
        match inner {
            Some(s) => println!("{v:3}  psi {psi:.9e}  damping {:<7} kkt {:.1e}  newton {}", s.damping, s.kkt.max(), s.newton_iterations),
            None => println!("{v:3}  psi {psi:.9e}  (worst-case start)"),
        }
    }
    for k in 0..5 {
        println!(
            "link {k} {:?}  t = {:.4e} s  p = {:.4e}",
            profile.class(k),
            report.allocation.t[k],
            report.allocation.p[k]
        );
    }
    Ok(())
}
