//! Closed-form outage against a Monte Carlo estimate on a fixed deployment.

use aoi_forge::network::{achievable_rate, closed_form_outage, generate_topology, sample_channel, TopologyParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> aoi_forge::error::Result<()> {
    let topology = generate_topology(1, 3, &TopologyParams::default())?;
    let rates = [2e6, 5e6, 1e7];
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut misses = [0u32; 3];
    for _ in 0..draws {
        let ch = sample_channel(&topology, &mut rng);
        for k in 0..3 {
            misses[k] += (achievable_rate(&topology, &ch, k) < rates[k]) as u32;
        }
    }
    for k in 0..3 {
        println!(
            "link {k}  rate {:>5.1} Mbit/s  closed form {:.5}  monte carlo {:.5}",
            rates[k] / 1e6,
            closed_form_outage(&topology, &rates, k),
            misses[k] as f64 / draws as f64
        );
    }
    Ok(())
}
