//! Convex inner approximation of the feasible set around a fixed point.

use std::f64::consts::LN_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::aoi::LinkProfile;
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::solver::{find_interior_point, BarrierOptions, NlpProblem, SmoothConstraint, SolverError};

use super::{FixedPoint, ScaConfig, SurrogateObjective, VarLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintOrigin {
    /// `N/t ≤ B log₂(1 + e^y)`, right side linearized.
    RateCoupling,
    /// `e^(y − x_kk) ≤ z`.
    ExpLink,
    /// `e^(σ² z) Π (1 + e^(x_ik − x_kk + y)) ≤ a`.
    OutageProduct,
    /// `a(1 − p) ≤ 1`, bilinear term linearized.
    Bilinear,
    /// `2^(t/τ̄) p ≤ 1 − ε`, linearized.
    Regulation,
}

impl ConstraintOrigin {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintOrigin::RateCoupling => "rate coupling",
            ConstraintOrigin::ExpLink => "exponential link",
            ConstraintOrigin::OutageProduct => "outage product",
            ConstraintOrigin::Bilinear => "bilinear outage bound",
            ConstraintOrigin::Regulation => "regulation",
        }
    }
}

pub(super) fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// One convexified constraint `g(x) ≤ 0`, each scaled to unit magnitude at
/// the fixed point.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaConstraint {
    /// `n_over_b / t − [softplus(ỹ) + σ(ỹ)(y − ỹ)] / ln 2`.
    RateCoupling { t: usize, y: usize, n_over_b: f64, y0: f64 },
    /// `e^(y − x_kk) / scale − z`, with `z` measured in units of `scale`.
    ExpLink { y: usize, z: usize, x_kk: f64, scale: f64 },
    /// `(exp(noise·z + Σ softplus(y + c_i)) − a) / scale`, `c_i = x_ik − x_kk`,
    /// `noise = σ²` times the unit of `z`.
    OutageProduct { y: usize, z: usize, a: usize, noise: f64, offsets: Vec<f64>, scale: f64 },
    /// `a + ¼(p − a)² − ¼(p̃ + ã)² − w[(p − p̃) + (a − ã)] − 1`.
    Bilinear { p: usize, a: usize, p0: f64, a0: f64, weight: f64 },
    /// `G p̃ + (ln 2/τ̄) G p̃ (t − t̃) + G (p − p̃) − (1 − ε)`, `G = 2^(t̃/τ̄)`.
    Regulation { t: usize, p: usize, t0: f64, p0: f64, tau_bar: f64, epsilon: f64 },
}

impl ScaConstraint {
    fn product_exponent(&self, x: &[f64]) -> (f64, f64, f64) {
        // (h, ∂h/∂y, ∂²h/∂y²)
        let ScaConstraint::OutageProduct { y, z, noise, offsets, .. } = self else {
            unreachable!()
        };
        let mut h = noise * x[*z];
        let mut dh = 0.0;
        let mut d2h = 0.0;
        for c in offsets {
            let v = x[*y] + c;
            let s = logistic(v);
            h += softplus(v);
            dh += s;
            d2h += s * (1.0 - s);
        }
        (h, dh, d2h)
    }
}

impl SmoothConstraint for ScaConstraint {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            ScaConstraint::RateCoupling { t, y, n_over_b, y0 } => {
                n_over_b / x[*t] - (softplus(*y0) + logistic(*y0) * (x[*y] - y0)) / LN_2
            }
            ScaConstraint::ExpLink { y, z, x_kk, scale } => (x[*y] - x_kk).exp() / scale - x[*z],
            ScaConstraint::OutageProduct { a, scale, .. } => {
                let (h, _, _) = self.product_exponent(x);
                (h.exp() - x[*a]) / scale
            }
            ScaConstraint::Bilinear { p, a, p0, a0, weight } => {
                let (pv, av) = (x[*p], x[*a]);
                let s0 = p0 + a0;
                av + 0.25 * (pv - av).powi(2) - 0.25 * s0 * s0 - weight * ((pv - p0) + (av - a0)) - 1.0
            }
            ScaConstraint::Regulation { t, p, t0, p0, tau_bar, epsilon } => {
                let g = (t0 / tau_bar).exp2();
                g * p0 + LN_2 / tau_bar * g * p0 * (x[*t] - t0) + g * (x[*p] - p0) - (1.0 - epsilon)
            }
        }
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        match self {
            ScaConstraint::RateCoupling { t, y, n_over_b, y0 } => {
                grad[*t] -= n_over_b / (x[*t] * x[*t]);
                grad[*y] -= logistic(*y0) / LN_2;
            }
            ScaConstraint::ExpLink { y, z, x_kk, scale } => {
                grad[*y] += (x[*y] - x_kk).exp() / scale;
                grad[*z] -= 1.0;
            }
            ScaConstraint::OutageProduct { y, z, a, noise, scale, .. } => {
                let (h, dh, _) = self.product_exponent(x);
                let f = h.exp() / scale;
                grad[*y] += f * dh;
                grad[*z] += f * noise;
                grad[*a] -= 1.0 / scale;
            }
            ScaConstraint::Bilinear { p, a, weight, .. } => {
                let d = 0.5 * (x[*p] - x[*a]);
                grad[*p] += d - weight;
                grad[*a] += 1.0 - d - weight;
            }
            ScaConstraint::Regulation { t, p, t0, p0, tau_bar, .. } => {
                let g = (t0 / tau_bar).exp2();
                grad[*t] += LN_2 / tau_bar * g * p0;
                grad[*p] += g;
            }
        }
    }

    fn add_hessian(&self, x: &[f64], weight: f64, hess: &mut DMatrix<f64>) {
        match self {
            ScaConstraint::RateCoupling { t, n_over_b, .. } => {
                hess[(*t, *t)] += weight * 2.0 * n_over_b / x[*t].powi(3);
            }
            ScaConstraint::ExpLink { y, x_kk, scale, .. } => {
                hess[(*y, *y)] += weight * (x[*y] - x_kk).exp() / scale;
            }
            ScaConstraint::OutageProduct { y, z, noise, scale, .. } => {
                let (h, dh, d2h) = self.product_exponent(x);
                let f = weight * h.exp() / scale;
                hess[(*y, *y)] += f * (dh * dh + d2h);
                hess[(*y, *z)] += f * dh * noise;
                hess[(*z, *y)] += f * dh * noise;
                hess[(*z, *z)] += f * noise * noise;
            }
            ScaConstraint::Bilinear { p, a, .. } => {
                let w = 0.5 * weight;
                hess[(*p, *p)] += w;
                hess[(*a, *a)] += w;
                hess[(*p, *a)] -= w;
                hess[(*a, *p)] -= w;
            }
            ScaConstraint::Regulation { .. } => {}
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaggedConstraint {
    pub origin: ConstraintOrigin,
    pub link: usize,
    pub constraint: Arc<ScaConstraint>,
}

/// Box limits on `t` and `p` shared by every outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub t_min: Vec<f64>,
    pub t_max: f64,
    pub p_floor: f64,
    pub p_ceiling: f64,
}

/// Convex program solved at one outer iteration.
#[derive(Debug, Clone)]
pub struct ConvexSubproblem {
    pub layout: VarLayout,
    pub objective: Option<SurrogateObjective>,
    pub constraints: Vec<TaggedConstraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `[t̃ | p̃ | ỹ | 1 | ã]`; `z` is stored relative to `e^(ỹ − x_kk)`.
    pub anchor: Vec<f64>,
}

impl ConvexSubproblem {
    pub fn variable_count(&self) -> usize {
        self.layout.len()
    }

    pub fn with_objective(mut self, objective: SurrogateObjective) -> Self {
        self.objective = Some(objective);
        self
    }

    /// Barrier-solver view started at `start`, objective divided by its
    /// largest coefficient.
    pub fn to_nlp(&self, start: Vec<f64>) -> NlpProblem {
        let n = self.variable_count();
        let mut c = vec![0.0; n];
        let mut constant = 0.0;
        if let Some(obj) = &self.objective {
            for k in 0..self.layout.links {
                c[self.layout.t(k)] = obj.coeff_t[k];
                c[self.layout.p(k)] = obj.coeff_p[k];
            }
            constant = obj.constant;
        }
        // unit objective scale so the KKT tolerance is relative
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale > 0.0 {
            c.iter_mut().for_each(|v| *v /= scale);
            constant /= scale;
        }
        NlpProblem {
            objective: c,
            objective_constant: constant,
            constraints: self
                .constraints
                .iter()
                .map(|tc| Arc::clone(&tc.constraint) as Arc<dyn SmoothConstraint>)
                .collect(),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            start,
        }
    }

    /// Largest constraint value at `x` with its tag.
    pub fn worst_residual(&self, x: &[f64]) -> Option<(ConstraintOrigin, usize, f64)> {
        self.constraints
            .iter()
            .map(|tc| (tc.origin, tc.link, tc.constraint.value(x)))
            .max_by(|a, b| a.2.total_cmp(&b.2))
    }

    /// A strictly feasible start: the anchor itself when it has slack,
    /// otherwise the phase-I point found from the anchor pulled inside the
    /// bounds. The flag reports whether phase I ran.
    pub fn interior_start(&self, opts: &BarrierOptions) -> std::result::Result<(Vec<f64>, bool), SolverError> {
        let mut x = self.anchor.clone();
        for j in 0..x.len() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let pad = 1e-6 * (hi - lo).min(lo.abs().max(1e-3));
            let pad = if pad.is_finite() { pad } else { 1e-9 * x[j].abs().max(1.0) };
            if lo.is_finite() && x[j] <= lo + pad {
                x[j] = lo + pad;
            }
            if hi.is_finite() && x[j] >= hi - pad {
                x[j] = hi - pad;
            }
        }
        let probe = self.to_nlp(x.clone());
        let feasible = self.constraints.iter().all(|tc| tc.constraint.value(&x) < 0.0);
        if feasible {
            return Ok((x, false));
        }
        match find_interior_point(&probe, opts)? {
            Some(p) => Ok((p, true)),
            None => Err(SolverError::InfeasibleStart {
                index: self.worst_residual(&x).map(|w| w.1).unwrap_or(0),
                value: self.worst_residual(&x).map(|w| w.2).unwrap_or(0.0),
            }),
        }
    }
}

/// `x_ik = ln(q_i / d_ik^(μ/2))`.
pub(super) fn log_gain(topology: &Topology, i: usize, k: usize) -> f64 {
    topology.power(i).ln() - topology.path_loss_exponent() / 2.0 * topology.distance(i, k).ln()
}

/// Builds the convexified constraints around `fp` and checks that `fp`
/// itself (with `z` at equality) satisfies them.
pub fn build_constraints(
    fp: &FixedPoint,
    topology: &Topology,
    profile: &LinkProfile,
    limits: &Limits,
    config: &ScaConfig,
) -> Result<ConvexSubproblem> {
    let links = topology.link_count();
    if fp.link_count() != links || profile.link_count() != links || limits.t_min.len() != links {
        return Err(Error::InvalidInput("fixed point, profile and topology sizes differ".into()));
    }
    let layout = VarLayout { links };
    let bandwidth = topology.bandwidth();
    let noise = topology.noise_power();
    let tau = profile.tau_bar();
    let mut constraints = Vec::with_capacity(5 * links);
    let mut anchor = vec![0.0; layout.len()];
    let mut push = |origin, link, c: ScaConstraint| {
        constraints.push(TaggedConstraint { origin, link, constraint: Arc::new(c) });
    };
    for k in 0..links {
        let x_kk = log_gain(topology, k, k);
        let z0 = (fp.y[k] - x_kk).exp();
        anchor[layout.t(k)] = fp.t[k];
        anchor[layout.p(k)] = fp.p[k];
        anchor[layout.y(k)] = fp.y[k];
        anchor[layout.z(k)] = 1.0;
        anchor[layout.a(k)] = fp.a[k];

        push(
            ConstraintOrigin::RateCoupling,
            k,
            ScaConstraint::RateCoupling { t: layout.t(k), y: layout.y(k), n_over_b: profile.payload(k) / bandwidth, y0: fp.y[k] },
        );
        push(
            ConstraintOrigin::ExpLink,
            k,
            ScaConstraint::ExpLink { y: layout.y(k), z: layout.z(k), x_kk, scale: z0 },
        );
        let offsets = (0..links)
            .filter(|&i| topology.interferes(i, k))
            .map(|i| log_gain(topology, i, k) - x_kk)
            .collect();
        push(
            ConstraintOrigin::OutageProduct,
            k,
            ScaConstraint::OutageProduct {
                y: layout.y(k),
                z: layout.z(k),
                a: layout.a(k),
                noise: noise * z0,
                offsets,
                scale: fp.a[k].max(1.0),
            },
        );
        let s0 = fp.p[k] + fp.a[k];
        push(
            ConstraintOrigin::Bilinear,
            k,
            ScaConstraint::Bilinear {
                p: layout.p(k),
                a: layout.a(k),
                p0: fp.p[k],
                a0: fp.a[k],
                weight: if config.paper_faithful_bilinear { 0.5 * s0 * s0 } else { 0.5 * s0 },
            },
        );
        push(
            ConstraintOrigin::Regulation,
            k,
            ScaConstraint::Regulation { t: layout.t(k), p: layout.p(k), t0: fp.t[k], p0: fp.p[k], tau_bar: tau, epsilon: config.epsilon },
        );
    }

    let inf = f64::INFINITY;
    let mut lower = vec![-inf; layout.len()];
    let mut upper = vec![inf; layout.len()];
    for k in 0..links {
        lower[layout.t(k)] = limits.t_min[k];
        upper[layout.t(k)] = limits.t_max;
        lower[layout.p(k)] = limits.p_floor;
        upper[layout.p(k)] = limits.p_ceiling;
    }

    let sub = ConvexSubproblem { layout, objective: None, constraints, lower, upper, anchor };
    let tol = 1e-9;
    for tc in &sub.constraints {
        let v = tc.constraint.value(&sub.anchor);
        if !(v <= tol) {
            return Err(Error::InfeasibleFixedPoint { constraint: tc.origin.name(), link: tc.link, residual: v });
        }
    }
    for j in 0..layout.len() {
        let x = sub.anchor[j];
        if x < sub.lower[j] - tol * sub.lower[j].abs().max(1.0) || x > sub.upper[j] + tol * sub.upper[j].abs().max(1.0) {
            return Err(Error::InfeasibleFixedPoint {
                constraint: "variable bounds",
                link: j % links,
                residual: (sub.lower[j] - x).max(x - sub.upper[j]),
            });
        }
    }
    Ok(sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_topology, TopologyParams};

    fn check_derivatives(c: &ScaConstraint, x: &[f64]) {
        let n = x.len();
        let mut g = vec![0.0; n];
        c.gradient(x, &mut g);
        let mut hess = DMatrix::zeros(n, n);
        c.add_hessian(x, 1.0, &mut hess);
        for j in 0..n {
            let h = 1e-6 * x[j].abs().max(1e-3);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[j] += h;
            dn[j] -= h;
            let fd = (c.value(&up) - c.value(&dn)) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-5 * fd.abs().max(1.0), "grad {j}: {fd} vs {}", g[j]);
            let mut gu = vec![0.0; n];
            let mut gd = vec![0.0; n];
            c.gradient(&up, &mut gu);
            c.gradient(&dn, &mut gd);
            for i in 0..n {
                let fd2 = (gu[i] - gd[i]) / (2.0 * h);
                assert!((fd2 - hess[(i, j)]).abs() <= 1e-4 * fd2.abs().max(1.0), "hess {i},{j}: {fd2} vs {}", hess[(i, j)]);
            }
        }
    }

    #[test]
    fn constraint_derivatives() {
        let x = [0.7, 0.2, -1.3, 0.4, 2.5];
        let cases = [
            ScaConstraint::RateCoupling { t: 0, y: 2, n_over_b: 0.005, y0: -1.0 },
            ScaConstraint::ExpLink { y: 2, z: 3, x_kk: -2.0, scale: 1.5 },
            ScaConstraint::OutageProduct { y: 2, z: 3, a: 4, noise: 0.3, offsets: vec![-4.0, -1.0, 0.5], scale: 2.0 },
            ScaConstraint::Bilinear { p: 1, a: 4, p0: 0.1, a0: 1.2, weight: 0.65 },
            ScaConstraint::Regulation { t: 0, p: 1, t0: 0.5, p0: 0.2, tau_bar: 10.0, epsilon: 1e-6 },
        ];
        for c in &cases {
            check_derivatives(c, &x);
        }
    }

    #[test]
    fn product_matches_closed_form_success() {
        let topo = generate_topology(3, 4, &TopologyParams::default()).unwrap();
        let k = 2;
        let theta: f64 = 0.3;
        let x_kk = log_gain(&topo, k, k);
        let offsets = (0..4).filter(|&i| i != k).map(|i| log_gain(&topo, i, k) - x_kk).collect();
        let c = ScaConstraint::OutageProduct { y: 0, z: 1, a: 2, noise: topo.noise_power(), offsets, scale: 1.0 };
        let x = [theta.ln(), (theta.ln() - x_kk).exp(), 0.0];
        // unit z scale here
        let success = 1.0 - crate::network::outage_at_threshold(&topo, theta, k);
        assert!((c.value(&x) * success - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_infeasible_fixed_point() {
        let topo = generate_topology(1, 2, &TopologyParams::default()).unwrap();
        let profile = LinkProfile::uniform(2, 5e4, 10.0, 1).unwrap();
        let limits = Limits { t_min: vec![1e-4; 2], t_max: 320.0, p_floor: 1e-9, p_ceiling: 1.0 - 1e-6 };
        // rate implied by y far above N/t
        let fp = FixedPoint { t: vec![1e-2; 2], p: vec![0.1; 2], y: vec![-20.0; 2], a: vec![1.2; 2] };
        match build_constraints(&fp, &topo, &profile, &limits, &ScaConfig::default()) {
            Err(Error::InfeasibleFixedPoint { constraint, .. }) => assert_eq!(constraint, "rate coupling"),
            other => panic!("{other:?}"),
        }
    }
}
