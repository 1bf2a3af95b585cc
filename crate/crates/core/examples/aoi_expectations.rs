//! Expected peak AoI of both criticality classes along a sweep of outage
//! probabilities, with the regulation margin.

use aoi_forge::aoi::{expected_exp_aoi, expected_linear_aoi, regulation};

fn main() {
    let (t, tau) = (0.5, 10.0);
    println!("   p     E[tau/tau_bar]   E[2^(tau/tau_bar)]   regulation");
    for i in 0..10 {
        let p = i as f64 / 10.0;
        let exp = expected_exp_aoi(t, p, tau).map_or("diverges".into(), |v| format!("{v:.6}"));
        println!("{p:5.2}   {:14.6}   {exp:>18}   {:10.4}", expected_linear_aoi(t, p, tau), regulation(t, p, tau));
    }
}
