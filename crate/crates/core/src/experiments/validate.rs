//! Quick self-checks of the numerical building blocks against independent
//! estimates. Used by the `validate` subcommand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aoi::{expected_exp_aoi, expected_linear_aoi, objective_psi, peak_aoi_pmf, Allocation, LinkProfile};
use crate::error::Result;
use crate::network::{achievable_rate, closed_form_outage, generate_topology, sample_channel, TopologyParams};
use crate::sca::{initialize, iterate, update_multipliers, ScaConfig, SurrogateObjective};
use crate::solver::{solve, BarrierOptions, LinearConstraint, NlpProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Monte Carlo outage frequency versus the closed form on every link.
fn outage_monte_carlo(seed: u64) -> Result<Check> {
    let topo = generate_topology(seed, 4, &TopologyParams::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let draws = 20_000;
    // rate set at the median of a pilot run so outages sit near one half
    let pilot: Vec<Vec<f64>> = (0..501).map(|_| {
        let ch = sample_channel(&topo, &mut rng);
        (0..4).map(|k| achievable_rate(&topo, &ch, k)).collect()
    }).collect();
    let rates: Vec<f64> = (0..4)
        .map(|k| {
            let mut r: Vec<f64> = pilot.iter().map(|v| v[k]).collect();
            r.sort_by(f64::total_cmp);
            r[250]
        })
        .collect();
    let mut misses = [0usize; 4];
    for _ in 0..draws {
        let ch = sample_channel(&topo, &mut rng);
        for k in 0..4 {
            if achievable_rate(&topo, &ch, k) < rates[k] {
                misses[k] += 1;
            }
        }
    }
    let mut worst_z: f64 = 0.0;
    for k in 0..4 {
        let p = closed_form_outage(&topo, &rates, k);
        let freq = misses[k] as f64 / draws as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt().max(1e-6);
        worst_z = worst_z.max((freq - p).abs() / sigma);
    }
    Ok(Check::new("outage closed form vs Monte Carlo", worst_z < 4.0, format!("max |z| = {worst_z:.2}")))
}

/// Closed-form expectations versus truncated sums over the peak-AoI law.
fn expectation_series() -> Check {
    let mut worst: f64 = 0.0;
    for &(t, p) in &[(0.5, 0.1), (1.0, 0.3), (2.0, 0.6), (0.05, 0.9)] {
        let pmf = peak_aoi_pmf(t, p, 4000);
        let lin: f64 = pmf.iter().map(|(v, m)| v / 10.0 * m).sum();
        let exp: f64 = pmf.iter().map(|(v, m)| (v / 10.0).exp2() * m).sum();
        worst = worst.max((lin - expected_linear_aoi(t, p, 10.0)).abs());
        worst = worst.max(((exp - expected_exp_aoi(t, p, 10.0).unwrap_or(f64::NAN)) / exp).abs());
    }
    Check::new("AoI expectations vs series", worst < 1e-9, format!("max error {worst:.1e}"))
}

/// The surrogate matches Ψ at its own expansion point.
fn surrogate_tightness(seed: u64) -> Result<Check> {
    let topo = generate_topology(seed, 5, &TopologyParams::default())?;
    let profile = LinkProfile::uniform(5, 5e4, 10.0, 2)?;
    let fp = initialize(&topo, &profile, 500, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let qt = update_multipliers(&fp, &profile)?;
    let psi = objective_psi(&fp.allocation(), &profile)?;
    let sur = SurrogateObjective::new(&fp, &qt, &profile).value(&fp.allocation());
    let gap = (psi - sur).abs() / psi.abs().max(1.0);
    Ok(Check::new("surrogate tight at expansion point", gap < 1e-9, format!("relative gap {gap:.1e}")))
}

/// `min −(x+y)` over the triangle `x + 2y ≤ 2, 2x + y ≤ 2`, optimum (2/3, 2/3).
fn barrier_triangle() -> Check {
    let problem = NlpProblem::new(vec![-1.0, -1.0], vec![0.1, 0.1])
        .with_constraint(LinearConstraint { coeffs: vec![(0, 1.0), (1, 2.0)], constant: -2.0 })
        .with_constraint(LinearConstraint { coeffs: vec![(0, 2.0), (1, 1.0)], constant: -2.0 })
        .with_bounds(vec![0.0; 2], vec![f64::INFINITY; 2]);
    match solve(&problem, &BarrierOptions::new(1e-8, 500)) {
        Ok(sol) => {
            let err = (sol.x[0] - 2.0 / 3.0).abs().max((sol.x[1] - 2.0 / 3.0).abs());
            Check::new("barrier solver on a linear program", err < 1e-6 && sol.kkt.passes(1e-8), format!("error {err:.1e}, kkt {:.1e}", sol.kkt.max()))
        }
        Err(e) => Check::new("barrier solver on a linear program", false, e.to_string()),
    }
}

/// Single link: the optimizer against a dense grid over `t` with the
/// outage pinned to the closed form.
fn single_link_grid(seed: u64) -> Result<Check> {
    let topo = generate_topology(seed, 1, &TopologyParams::default())?;
    let profile = LinkProfile::uniform(1, 5e4, 10.0, 1)?;
    let report = iterate(&topo, &profile, &ScaConfig { tol_outer: 1e-9, seed, ..ScaConfig::default() })?;
    let (lo, hi) = (1e-5f64.ln(), 10f64.ln());
    let best = (0..=4000)
        .filter_map(|i| {
            let t = (lo + (hi - lo) * i as f64 / 4000.0).exp();
            let p = closed_form_outage(&topo, &[5e4 / t], 0).max(1e-9);
            objective_psi(&Allocation::new(vec![t], vec![p]), &profile).ok()
        })
        .fold(f64::INFINITY, f64::min);
    let psi = report.final_psi();
    let gap = (psi - best) / best;
    Ok(Check::new("single link optimum vs grid search", gap < 1e-4, format!("optimizer {psi:.8}, grid {best:.8}")))
}

pub fn run_checks(seed: u64) -> Vec<Check> {
    let wrap = |name: &'static str, r: Result<Check>| r.unwrap_or_else(|e| Check::new(name, false, e.to_string()));
    vec![
        wrap("outage closed form vs Monte Carlo", outage_monte_carlo(seed)),
        expectation_series(),
        wrap("surrogate tight at expansion point", surrogate_tightness(seed)),
        barrier_triangle(),
        wrap("single link optimum vs grid search", single_link_grid(seed)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_checks(3) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
