//! Affine surrogate of Ψ obtained from the quadratic transform.
//!
//! With the multipliers fixed at their optimum, the transformed objective is
//! linearized around the fixed point so that the surrogate and Ψ agree in
//! value and first derivatives there.

use std::f64::consts::LN_2;

use crate::aoi::{Allocation, Criticality, LinkProfile};

use super::{FixedPoint, QtMultipliers};

/// `Σ_k (c_t[k]·t_k + c_p[k]·p_k) + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateObjective {
    pub coeff_t: Vec<f64>,
    pub coeff_p: Vec<f64>,
    pub constant: f64,
}

impl SurrogateObjective {
    pub fn new(fp: &FixedPoint, qt: &QtMultipliers, profile: &LinkProfile) -> Self {
        let tau = profile.tau_bar();
        let k_links = fp.link_count();
        let mut coeff_t = vec![0.0; k_links];
        let mut coeff_p = vec![0.0; k_links];
        let mut constant = 0.0;
        for k in 0..k_links {
            let (t0, p0) = (fp.t[k], fp.p[k]);
            match profile.class(k) {
                Criticality::Lo => {
                    // 2t/τ̄ + 2α·lin(√(pt/τ̄)) − α² + α²p
                    let alpha = qt.alpha(k).unwrap_or_default();
                    let root = (p0 * t0 / tau).sqrt();
                    // α / √(p̃t̃/τ̄), equal to 1/(1−p̃) and finite at p̃ = 0
                    let ratio = if root > 0.0 { alpha / root } else { 1.0 / (1.0 - p0) };
                    let dt = ratio * p0 / tau;
                    let dp = ratio * t0 / tau;
                    coeff_t[k] += 2.0 / tau + dt;
                    coeff_p[k] += dp + alpha * alpha;
                    constant += 2.0 * alpha * root - dt * t0 - dp * p0 - alpha * alpha;
                }
                Criticality::Hi => {
                    // 2β·lin(2^(t/τ̄)√(1−p)) − β² + β²·lin(2^(t/τ̄)p)
                    let beta = qt.beta(k).unwrap_or_default();
                    let g = (t0 / tau).exp2();
                    let s = (1.0 - p0).sqrt();
                    let num_t = g * s * LN_2 / tau;
                    let num_p = -g / (2.0 * s);
                    let den_t = g * p0 * LN_2 / tau;
                    let den_p = g;
                    let bb = beta * beta;
                    coeff_t[k] += 2.0 * beta * num_t + bb * den_t;
                    coeff_p[k] += 2.0 * beta * num_p + bb * den_p;
                    constant += 2.0 * beta * (g * s - num_t * t0 - num_p * p0)
                        + bb * (g * p0 - den_t * t0 - den_p * p0)
                        - bb;
                }
            }
        }
        Self { coeff_t, coeff_p, constant }
    }

    pub fn value(&self, alloc: &Allocation) -> f64 {
        self.constant
            + self.coeff_t.iter().zip(&alloc.t).map(|(c, t)| c * t).sum::<f64>()
            + self.coeff_p.iter().zip(&alloc.p).map(|(c, p)| c * p).sum::<f64>()
    }
}

/// Surrogate value at `alloc` for the expansion `(fp, qt)`.
pub fn surrogate_objective(alloc: &Allocation, fp: &FixedPoint, qt: &QtMultipliers, profile: &LinkProfile) -> f64 {
    SurrogateObjective::new(fp, qt, profile).value(alloc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aoi::objective_psi;
    use crate::sca::update_multipliers;

    fn setup(t: Vec<f64>, p: Vec<f64>) -> (FixedPoint, LinkProfile) {
        let k = t.len();
        let fp = FixedPoint { y: vec![0.0; k], a: vec![1.0; k], t, p };
        let profile = LinkProfile::uniform(k, 5e4, 10.0, k / 2).unwrap();
        (fp, profile)
    }

    #[test]
    fn tight_at_fixed_point() {
        let (fp, profile) = setup(vec![0.8, 1.3, 0.2, 2.0], vec![0.05, 0.4, 0.0, 0.3]);
        let qt = update_multipliers(&fp, &profile).unwrap();
        let psi = objective_psi(&fp.allocation(), &profile).unwrap();
        let sur = surrogate_objective(&fp.allocation(), &fp, &qt, &profile);
        assert!((psi - sur).abs() <= 1e-12 * psi.max(1.0), "{psi} vs {sur}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (fp, profile) = setup(vec![0.8, 1.3, 0.7, 2.0], vec![0.05, 0.4, 0.2, 0.3]);
        let qt = update_multipliers(&fp, &profile).unwrap();
        let s = SurrogateObjective::new(&fp, &qt, &profile);
        let h = 1e-6;
        for k in 0..4 {
            let mut up = fp.allocation();
            let mut dn = fp.allocation();
            up.t[k] += h;
            dn.t[k] -= h;
            let fd = (objective_psi(&up, &profile).unwrap() - objective_psi(&dn, &profile).unwrap()) / (2.0 * h);
            assert!((fd - s.coeff_t[k]).abs() < 1e-6 * fd.abs().max(1.0), "t{k}: {fd} vs {}", s.coeff_t[k]);
            let mut up = fp.allocation();
            let mut dn = fp.allocation();
            up.p[k] += h;
            dn.p[k] -= h;
            let fd = (objective_psi(&up, &profile).unwrap() - objective_psi(&dn, &profile).unwrap()) / (2.0 * h);
            assert!((fd - s.coeff_p[k]).abs() < 1e-6 * fd.abs().max(1.0), "p{k}: {fd} vs {}", s.coeff_p[k]);
        }
    }
}
