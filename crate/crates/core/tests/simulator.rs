use statrs::distribution::{ChiSquared, ContinuousCDF};

use aoi_forge::aoi::{objective_psi, peak_aoi_pmf, Allocation, LinkProfile};
use aoi_forge::network::{closed_form_outage, generate_topology, Topology, TopologyParams};
use aoi_forge::sim::{oma_topology, run_trace, AccessMode, SimConfig, TraceEvent};

fn single_link() -> Topology {
    generate_topology(12, 1, &TopologyParams::default()).unwrap()
}

/// Transmission time at which a single link NOMA sees outage near `target`.
fn time_for_outage(topo: &Topology, target: f64) -> f64 {
    let (mut lo, mut hi): (f64, f64) = (1e-6, 10.0);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if closed_form_outage(topo, &[5e4 / mid], 0) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[test]
fn peak_aoi_follows_geometric_law() {
    let topo = single_link();
    let profile = LinkProfile::uniform(1, 5e4, 10.0, 0).unwrap();
    let t = time_for_outage(&topo, 0.35);
    let p = closed_form_outage(&topo, &[5e4 / t], 0);
    let sim = SimConfig { horizon_s: 1e5 * t, coherence_s: t, seed: 21, mode: AccessMode::Noma };
    let trace = run_trace(&topo, &Allocation::new(vec![t], vec![p]), &profile, &sim).unwrap();
    let peaks = &trace.links[0].peaks;
    assert!(peaks.len() > 50_000);

    // bins v = 0..=5 plus the tail v ≥ 6
    let mut observed = [0.0f64; 7];
    for &peak in peaks {
        let v = (peak / t).round() as usize - 2;
        observed[v.min(6)] += 1.0;
    }
    let pmf = peak_aoi_pmf(t, p, 5);
    let n = peaks.len() as f64;
    let mut expected: Vec<f64> = pmf.iter().map(|(_, m)| m * n).collect();
    expected.push(p.powi(6) * n);
    let stat: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let critical = ChiSquared::new(6.0).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat:.2} ≥ {critical:.2}");
}

#[test]
fn empirical_objective_converges_to_closed_form() {
    let topo = single_link();
    for hi in [0, 1] {
        let profile = LinkProfile::uniform(1, 5e4, 10.0, hi).unwrap();
        let t = time_for_outage(&topo, 0.2);
        let p = closed_form_outage(&topo, &[5e4 / t], 0);
        let alloc = Allocation::new(vec![t], vec![p]);
        let sim = SimConfig { horizon_s: 1e5 * t, coherence_s: t, seed: 3 + hi as u64, mode: AccessMode::Noma };
        let trace = run_trace(&topo, &alloc, &profile, &sim).unwrap();
        let link = &trace.links[0];

        let se_out = (p * (1.0 - p) / link.packets.len() as f64).sqrt();
        assert!((link.outage_rate() - p).abs() <= 3.0 * se_out);

        let cost: Vec<f64> = link
            .peaks
            .iter()
            .map(|v| if hi == 1 { (v / 10.0).exp2() } else { v / 10.0 })
            .collect();
        let n = cost.len() as f64;
        let mean = cost.iter().sum::<f64>() / n;
        let var = cost.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let psi = objective_psi(&alloc, &profile).unwrap();
        assert!((trace.empirical_psi(&profile).unwrap() - mean).abs() < 1e-12 * mean);
        assert!((mean - psi).abs() <= 3.0 * (var / n).sqrt(), "empirical {mean} vs {psi}");
    }
}

#[test]
fn trace_is_a_unit_slope_sawtooth() {
    let topo = generate_topology(5, 3, &TopologyParams::default()).unwrap();
    let profile = LinkProfile::uniform(3, 5e4, 10.0, 1).unwrap();
    let alloc = Allocation::new(vec![0.004, 0.01, 0.02], vec![0.3, 0.3, 0.3]);
    let trace = run_trace(&topo, &alloc, &profile, &SimConfig { horizon_s: 5.0, ..SimConfig::default() }).unwrap();
    for (k, l) in trace.links.iter().enumerate() {
        let t = alloc.t[k];
        let mut deliveries = Vec::new();
        for w in l.breakpoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            let before_reset = a.aoi_s + (b.time_s - a.time_s);
            match b.event {
                TraceEvent::Delivery => {
                    assert!((b.aoi_s - t).abs() < 1e-12);
                    deliveries.push((b.time_s, before_reset));
                }
                _ => assert!((b.aoi_s - before_reset).abs() < 1e-9),
            }
        }
        // every peak is t_k plus the gap to the previous delivery
        assert_eq!(l.peaks.len(), deliveries.len().saturating_sub(1));
        for (i, peak) in l.peaks.iter().enumerate() {
            let gap = deliveries[i + 1].0 - deliveries[i].0;
            assert!((peak - (t + gap)).abs() < 1e-9);
            assert!((peak - deliveries[i + 1].1).abs() < 1e-9);
        }
    }
}

#[test]
fn oma_band_split_and_outage() {
    let topo = generate_topology(8, 5, &TopologyParams::default()).unwrap();
    let oma = oma_topology(&topo, 5);
    assert_eq!(oma.bandwidth(), 2e6);
    assert!((oma.noise_power() - topo.noise_power() / 5.0).abs() < 1e-24);
    let rates = vec![1e6; 5];
    for k in 0..5 {
        assert!(!(0..5).any(|i| oma.interferes(i, k)));
        let theta = (1e6 / 2e6 * std::f64::consts::LN_2).exp_m1();
        let d = oma.distance(k, k).powf(oma.path_loss_exponent() / 2.0);
        let single = -(-theta * d * oma.noise_power() / oma.power(k)).exp_m1();
        assert!((closed_form_outage(&oma, &rates, k) - single).abs() < 1e-15);
    }
    let single = single_link();
    assert_eq!(oma_topology(&single, 1).bandwidth(), single.bandwidth());
}

#[test]
fn multi_block_packets_need_every_block() {
    // packets twice the coherence time fail more often than the single-block outage
    let topo = single_link();
    let profile = LinkProfile::uniform(1, 5e4, 10.0, 0).unwrap();
    let t = time_for_outage(&topo, 0.3);
    let p = closed_form_outage(&topo, &[5e4 / t], 0);
    let sim = SimConfig { horizon_s: 2e4 * t, coherence_s: t / 2.0, seed: 1, mode: AccessMode::Noma };
    let trace = run_trace(&topo, &Allocation::new(vec![t], vec![p]), &profile, &sim).unwrap();
    let two_blocks = 1.0 - (1.0 - p).powi(2);
    let n = trace.links[0].packets.len() as f64;
    let se = (two_blocks * (1.0 - two_blocks) / n).sqrt();
    assert!((trace.links[0].outage_rate() - two_blocks).abs() <= 4.0 * se);
}
