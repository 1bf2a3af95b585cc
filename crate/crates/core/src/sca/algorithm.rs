use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aoi::{objective_psi, regulation, Allocation, LinkProfile};
use crate::error::{Error, Result};
use crate::network::{sample_rate_extremes, sinr_threshold, Topology};
use crate::solver::{solve, BarrierOptions, KktResiduals};

use super::constraints::{log_gain, softplus};
use super::{build_constraints, update_multipliers, FixedPoint, Limits, ScaConfig, SurrogateObjective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Initialization {
    pub fixed_point: FixedPoint,
    pub limits: Limits,
    pub worst_rates: Vec<f64>,
    /// Closed-form outage at the starting transmission times.
    pub outage: Vec<f64>,
    /// Links whose worst-case point broke the regulation and were restarted
    /// at a shorter transmission time.
    pub shortened: Vec<bool>,
}

/// `(y, a, outage)` with `y = ln θ` and the exponential and product
/// constraints tight at threshold `θ` on link `k`.
fn tight_auxiliaries(topology: &Topology, k: usize, theta: f64) -> (f64, f64, f64) {
    let y = theta.ln();
    let x_kk = log_gain(topology, k, k);
    let mut h = topology.noise_power() * (y - x_kk).exp();
    for i in 0..topology.link_count() {
        if topology.interferes(i, k) {
            h += softplus(y + log_gain(topology, i, k) - x_kk);
        }
    }
    (y, h.exp(), -(-h).exp_m1())
}

/// Worst-case starting point with the default clamps of `ScaConfig`.
pub fn initialize<R: rand::Rng + ?Sized>(
    topology: &Topology,
    profile: &LinkProfile,
    samples: usize,
    rng: &mut R,
) -> Result<FixedPoint> {
    let config = ScaConfig { worst_case_samples: samples, ..ScaConfig::default() };
    initialize_with(topology, profile, &config, rng).map(|init| init.fixed_point)
}

/// Sets every link to the worst rate seen over `M` channel draws, its
/// outage to the closed form at that rate, and derives the box limits.
///
/// A link whose worst-case point violates the regulation is restarted at
/// the longest halving of its transmission time that satisfies it; the
/// error is returned only if no such time above `t_min` exists.
pub fn initialize_with<R: rand::Rng + ?Sized>(
    topology: &Topology,
    profile: &LinkProfile,
    config: &ScaConfig,
    rng: &mut R,
) -> Result<Initialization> {
    let links = topology.link_count();
    if profile.link_count() != links {
        return Err(Error::InvalidInput("profile and topology sizes differ".into()));
    }
    let extremes = sample_rate_extremes(topology, config.worst_case_samples, rng);
    let b = topology.bandwidth();
    let tau = profile.tau_bar();
    let p_ceiling = 1.0 - config.p_ceiling_gap;
    let t_max = 32.0 * tau;
    let mut fp = FixedPoint { t: vec![0.0; links], p: vec![0.0; links], y: vec![0.0; links], a: vec![0.0; links] };
    let mut outage = vec![0.0; links];
    let mut t_min = vec![0.0; links];
    let mut shortened = vec![false; links];
    for k in 0..links {
        let n = profile.payload(k);
        let rate = extremes.worst_rate[k];
        if !(rate > 0.0) {
            return Err(Error::InvalidInput(format!("link {k} has zero worst-case rate")));
        }
        t_min[k] = config.t_min_safety * n / (b * extremes.best_sinr[k].ln_1p() / std::f64::consts::LN_2);
        let cap_at = |t: f64| ((1.0 - config.epsilon) / (t / tau).exp2()).min(p_ceiling);
        let mut t = n / rate;
        let (mut y, mut a, mut out) = tight_auxiliaries(topology, k, sinr_threshold(rate, b));
        if out > cap_at(t) || t > t_max || config.p_floor > cap_at(t) {
            // The worst case is too slow for the regulation: halve t until the
            // regulation product drops to one half.
            let first_cap = cap_at(t);
            let first_out = out;
            t = t.min(t_max);
            loop {
                t *= 0.5;
                if t <= t_min[k] {
                    return Err(Error::InitializationInfeasible { link: k, outage: first_out, cap: first_cap });
                }
                (y, a, out) = tight_auxiliaries(topology, k, sinr_threshold(n / t, b));
                if out <= p_ceiling && regulation(t, out.max(config.p_floor), tau) <= 0.5 {
                    break;
                }
            }
            shortened[k] = true;
        }
        fp.t[k] = t;
        fp.p[k] = out.max(config.p_floor);
        fp.y[k] = y;
        fp.a[k] = a;
        outage[k] = out;
    }
    Ok(Initialization {
        fixed_point: fp,
        limits: Limits { t_min, t_max, p_floor: config.p_floor, p_ceiling },
        worst_rates: extremes.worst_rate,
        outage,
        shortened,
    })
}

/// Tightens the auxiliaries of a blended point: `y` from the rate `N/t`,
/// `a` at equality in the product constraint and `p` raised to the true
/// outage when needed. `None` if the point leaves the `p` box or breaks the
/// regulation margin.
fn restore(
    topology: &Topology,
    profile: &LinkProfile,
    limits: &Limits,
    epsilon: f64,
    blended: &FixedPoint,
) -> Option<FixedPoint> {
    let mut fp = blended.clone();
    let tau = profile.tau_bar();
    for k in 0..fp.link_count() {
        let theta = sinr_threshold(profile.payload(k) / fp.t[k], topology.bandwidth());
        let (y, a, out) = tight_auxiliaries(topology, k, theta);
        let p = fp.p[k].max(out).max(limits.p_floor);
        if !(p <= limits.p_ceiling) || !(regulation(fp.t[k], p, tau) < 1.0 - epsilon) {
            return None;
        }
        fp.y[k] = y;
        fp.a[k] = a;
        fp.p[k] = p;
    }
    Some(fp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerStats {
    pub kkt: KktResiduals,
    pub newton_iterations: usize,
    pub phase_one: bool,
    /// Optimal surrogate value of the subproblem.
    pub surrogate: f64,
    /// Step fraction finally applied toward the subproblem solution.
    pub damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaStatus {
    Converged,
    MaxIterations,
    /// No admissible step even at the smallest damping factor.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentViolation {
    pub iteration: usize,
    pub increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub allocation: Allocation,
    pub fixed_point: FixedPoint,
    pub initialization: Initialization,
    /// Ψ at the start and after every outer iteration.
    pub psi_history: Vec<f64>,
    pub inner: Vec<InnerStats>,
    pub iterations: usize,
    pub status: ScaStatus,
    pub descent_violations: Vec<DescentViolation>,
    pub wall_time_s: f64,
    pub variable_count: usize,
    pub constraint_count: usize,
}

impl SolveReport {
    pub fn final_psi(&self) -> f64 {
        *self.psi_history.last().expect("history holds the starting value")
    }

    pub fn converged(&self) -> bool {
        self.status == ScaStatus::Converged
    }

    pub fn surrogate_history(&self) -> Vec<f64> {
        self.inner.iter().map(|s| s.surrogate).collect()
    }
}

/// Runs the outer loop from the worst-case initialization.
pub fn iterate(topology: &Topology, profile: &LinkProfile, config: &ScaConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = initialize_with(topology, profile, config, &mut rng)?;
    let limits = init.limits.clone();
    let opts = BarrierOptions::new(config.tol_kkt, config.inner_max_iters);

    let mut fp = init.fixed_point.clone();
    let mut psi = objective_psi(&fp.allocation(), profile)?;
    let mut psi_history = vec![psi];
    let mut inner = Vec::new();
    let mut descent_violations = Vec::new();
    let mut status = ScaStatus::MaxIterations;
    let mut variable_count = 0;
    let mut constraint_count = 0;

    for v in 1..=config.max_iterations {
        let qt = update_multipliers(&fp, profile)?;
        let sub = build_constraints(&fp, topology, profile, &limits, config)?
            .with_objective(SurrogateObjective::new(&fp, &qt, profile));
        variable_count = sub.variable_count();
        constraint_count = sub.constraints.len();
        let wrap = |source| Error::InnerSolve { iteration: v, source };
        let (start, phase_one) = sub.interior_start(&opts).map_err(wrap)?;
        let sol = solve(&sub.to_nlp(start), &opts).map_err(wrap)?;
        let target = FixedPoint::from_solution(&sol.x, sub.layout);

        let floor = if config.damping { config.min_damping } else { 1.0 };
        let mut theta = 1.0;
        let accepted = loop {
            let candidate = restore(topology, profile, &limits, config.epsilon, &fp.blend(&target, theta));
            let value = candidate.as_ref().and_then(|c| objective_psi(&c.allocation(), profile).ok());
            match (candidate, value) {
                (Some(c), Some(val)) if val <= psi + config.descent_tol * psi.abs().max(1.0) || theta <= floor => {
                    if val > psi + config.descent_tol * psi.abs().max(1.0) {
                        descent_violations.push(DescentViolation { iteration: v, increase: val - psi });
                    }
                    break Some((c, val));
                }
                _ if theta <= floor => break None,
                _ => theta *= 0.5,
            }
        };
        inner.push(InnerStats {
            kkt: sol.kkt,
            newton_iterations: sol.newton_iterations,
            phase_one,
            surrogate: sub.objective.as_ref().map_or(0.0, |o| o.value(&target.allocation())),
            damping: if accepted.is_some() { theta } else { 0.0 },
        });
        let Some((next, next_psi)) = accepted else {
            status = ScaStatus::Stalled;
            break;
        };
        let change = (next_psi - psi).abs();
        fp = next;
        psi = next_psi;
        psi_history.push(psi);
        if change <= config.tol_outer * psi.abs().max(1.0) {
            status = ScaStatus::Converged;
            break;
        }
    }

    Ok(SolveReport {
        allocation: fp.allocation(),
        fixed_point: fp,
        initialization: init,
        iterations: inner.len(),
        psi_history,
        inner,
        status,
        descent_violations,
        wall_time_s: started.elapsed().as_secs_f64(),
        variable_count,
        constraint_count,
    })
}
