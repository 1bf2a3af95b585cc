//! Successive convex approximation of the mixed-criticality AoI problem.
//!
//! Every outer iteration linearizes the objective and the non-convex
//! constraints around the current feasible fixed point, solves the resulting
//! convex program with the barrier solver, and moves the fixed point toward
//! the solution.

mod algorithm;
mod constraints;
mod surrogate;

pub use algorithm::{initialize, initialize_with, iterate, InnerStats, Initialization, ScaStatus, SolveReport};
pub use constraints::{build_constraints, ConstraintOrigin, ConvexSubproblem, Limits, ScaConstraint, TaggedConstraint};
pub use surrogate::{surrogate_objective, SurrogateObjective};

use serde::{Deserialize, Serialize};

use crate::aoi::{Allocation, Criticality, LinkProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaConfig {
    /// Channel draws used for the worst-case initialization (`M`).
    pub worst_case_samples: usize,
    /// Outer iteration cap (`V_max`).
    pub max_iterations: usize,
    pub tol_outer: f64,
    /// Slack turning strict inequalities into closed ones.
    pub epsilon: f64,
    pub p_floor: f64,
    /// Upper bound on `p` is `1 − p_ceiling_gap`.
    pub p_ceiling_gap: f64,
    /// Factor applied to the best-channel transmission time to get `t_min`.
    pub t_min_safety: f64,
    pub damping: bool,
    pub min_damping: f64,
    /// Use the `½(p̃+ã)²` bilinear linearization coefficient instead of `½(p̃+ã)`.
    pub paper_faithful_bilinear: bool,
    pub tol_kkt: f64,
    pub inner_max_iters: usize,
    /// Allowed per-iteration increase of the true objective before it counts as a violation.
    pub descent_tol: f64,
    pub seed: u64,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self {
            worst_case_samples: 1000,
            max_iterations: 100,
            tol_outer: 1e-5,
            epsilon: 1e-6,
            p_floor: 1e-9,
            p_ceiling_gap: 1e-6,
            t_min_safety: 0.5,
            damping: true,
            min_damping: 1.0 / 16.0,
            paper_faithful_bilinear: false,
            tol_kkt: 1e-7,
            inner_max_iters: 5_000,
            descent_tol: 1e-8,
            seed: 0,
        }
    }
}

/// Variables are stored block-wise: `[t | p | y | z | a]`, `K` entries each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub links: usize,
}

impl VarLayout {
    pub const BLOCKS: usize = 5;

    pub fn t(&self, k: usize) -> usize {
        k
    }
    pub fn p(&self, k: usize) -> usize {
        self.links + k
    }
    pub fn y(&self, k: usize) -> usize {
        2 * self.links + k
    }
    pub fn z(&self, k: usize) -> usize {
        3 * self.links + k
    }
    pub fn a(&self, k: usize) -> usize {
        4 * self.links + k
    }
    pub fn len(&self) -> usize {
        Self::BLOCKS * self.links
    }
    pub fn is_empty(&self) -> bool {
        self.links == 0
    }
}

/// Expansion point of the current outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    /// `ln(2^(r/B) − 1)`.
    pub y: Vec<f64>,
    pub a: Vec<f64>,
}

impl FixedPoint {
    pub fn link_count(&self) -> usize {
        self.t.len()
    }

    pub fn allocation(&self) -> Allocation {
        Allocation::new(self.t.clone(), self.p.clone())
    }

    /// `self + θ (other − self)` on every stored vector.
    pub fn blend(&self, other: &FixedPoint, theta: f64) -> FixedPoint {
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + theta * (y - x)).collect();
        FixedPoint {
            t: mix(&self.t, &other.t),
            p: mix(&self.p, &other.p),
            y: mix(&self.y, &other.y),
            a: mix(&self.a, &other.a),
        }
    }

    pub(crate) fn from_solution(x: &[f64], layout: VarLayout) -> FixedPoint {
        let k = layout.links;
        FixedPoint {
            t: x[..k].to_vec(),
            p: x[k..2 * k].to_vec(),
            y: x[2 * k..3 * k].to_vec(),
            a: x[4 * k..5 * k].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Multiplier {
    Alpha(f64),
    Beta(f64),
}

impl Multiplier {
    pub fn value(&self) -> f64 {
        match *self {
            Multiplier::Alpha(v) | Multiplier::Beta(v) => v,
        }
    }
}

/// Quadratic-transform multipliers, `α` on non-critical links and `β` on
/// safety-critical ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtMultipliers {
    pub per_link: Vec<Multiplier>,
}

impl QtMultipliers {
    pub fn alpha(&self, k: usize) -> Option<f64> {
        match self.per_link[k] {
            Multiplier::Alpha(v) => Some(v),
            Multiplier::Beta(_) => None,
        }
    }

    pub fn beta(&self, k: usize) -> Option<f64> {
        match self.per_link[k] {
            Multiplier::Beta(v) => Some(v),
            Multiplier::Alpha(_) => None,
        }
    }
}

/// Optimal quadratic-transform multipliers at the fixed point:
/// `α = √(p̃ t̃/τ̄) / (1 − p̃)`, `β = √(2^(2t̃/τ̄)(1 − p̃)) / (1 − 2^(t̃/τ̄) p̃)`.
pub fn update_multipliers(fp: &FixedPoint, profile: &LinkProfile) -> Result<QtMultipliers> {
    if fp.link_count() != profile.link_count() {
        return Err(Error::InvalidInput("fixed point and profile sizes differ".into()));
    }
    let tau = profile.tau_bar();
    let per_link = (0..fp.link_count())
        .map(|k| {
            let (t, p) = (fp.t[k], fp.p[k]);
            if !(t > 0.0) || !(0.0..1.0).contains(&p) {
                return Err(Error::MultiplierDomain {
                    link: k,
                    reason: format!("need t > 0 and 0 ≤ p < 1, got t = {t}, p = {p}"),
                });
            }
            match profile.class(k) {
                Criticality::Lo => Ok(Multiplier::Alpha((p * t / tau).sqrt() / (1.0 - p))),
                Criticality::Hi => {
                    let g = (t / tau).exp2();
                    let denom = 1.0 - g * p;
                    if !(denom > 0.0) {
                        return Err(Error::MultiplierDomain {
                            link: k,
                            reason: format!("regulation 2^(t/τ̄)·p = {} ≥ 1", g * p),
                        });
                    }
                    Ok(Multiplier::Beta((g * g * (1.0 - p)).sqrt() / denom))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QtMultipliers { per_link })
}
