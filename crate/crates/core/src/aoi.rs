//! Peak-AoI statistics for links that retransmit immediately after an outage.
//!
//! With per-packet outage probability `p` and transmission time `t`, the peak
//! AoI takes the value `(2 + v)·t` with probability `p^v (1 − p)`. Linear aging
//! is charged for non-critical links, base-2 exponential aging for
//! safety-critical ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Criticality {
    Lo,
    Hi,
}

/// Number of safety-critical links used by default: `⌈0.4·K⌉`.
pub fn default_hi_count(link_count: usize) -> usize {
    (2 * link_count).div_ceil(5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    payload_bits: Vec<f64>,
    class: Vec<Criticality>,
    tau_bar: f64,
}

impl LinkProfile {
    pub fn new(payload_bits: Vec<f64>, class: Vec<Criticality>, tau_bar: f64) -> Result<Self> {
        if payload_bits.is_empty() || payload_bits.len() != class.len() {
            return Err(Error::InvalidInput(format!(
                "profile needs one payload and one class per link ({} vs {})",
                payload_bits.len(),
                class.len()
            )));
        }
        if let Some(n) = payload_bits.iter().find(|n| !(**n > 0.0) || !n.is_finite()) {
            return Err(Error::InvalidInput(format!("payload must be positive, got {n}")));
        }
        if !(tau_bar > 0.0) || !tau_bar.is_finite() {
            return Err(Error::InvalidInput(format!("tau_bar must be positive, got {tau_bar}")));
        }
        Ok(Self {
            payload_bits,
            class,
            tau_bar,
        })
    }

    /// Same payload on every link, the first `hi_count` links safety-critical.
    pub fn uniform(link_count: usize, payload_bits: f64, tau_bar: f64, hi_count: usize) -> Result<Self> {
        let class = (0..link_count)
            .map(|k| if k < hi_count { Criticality::Hi } else { Criticality::Lo })
            .collect();
        Self::new(vec![payload_bits; link_count], class, tau_bar)
    }

    pub fn link_count(&self) -> usize {
        self.class.len()
    }

    pub fn payload(&self, k: usize) -> f64 {
        self.payload_bits[k]
    }

    pub fn class(&self, k: usize) -> Criticality {
        self.class[k]
    }

    pub fn tau_bar(&self) -> f64 {
        self.tau_bar
    }

    pub fn links_of(&self, class: Criticality) -> impl Iterator<Item = usize> + '_ {
        self.class.iter().enumerate().filter(move |(_, c)| **c == class).map(|(k, _)| k)
    }
}

/// Per-link transmission time (s) and outage-probability bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub t: Vec<f64>,
    pub p: Vec<f64>,
}

impl Allocation {
    pub fn new(t: Vec<f64>, p: Vec<f64>) -> Self {
        Self { t, p }
    }

    pub fn link_count(&self) -> usize {
        self.t.len()
    }

    /// Checks `t > 0`, `0 ≤ p < 1` and `2^(t/τ̄)·p < 1` on every link.
    pub fn validate(&self, tau_bar: f64) -> Result<()> {
        if self.t.len() != self.p.len() {
            return Err(Error::InvalidInput("t and p lengths differ".into()));
        }
        for (k, (&t, &p)) in self.t.iter().zip(&self.p).enumerate() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidInput(format!("t[{k}] = {t} must be positive")));
            }
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("p[{k}] = {p} outside [0, 1)")));
            }
            let reg = regulation(t, p, tau_bar);
            if reg >= 1.0 {
                return Err(Error::RegulationViolated { link: k, value: reg });
            }
        }
        Ok(())
    }
}

/// `2^(t/τ̄)·p`; the exponential expectation converges only below 1.
pub fn regulation(t: f64, p: f64, tau_bar: f64) -> f64 {
    (t / tau_bar).exp2() * p
}

/// Atoms `((2+v)·t, p^v (1−p))` for `v = 0..=v_max`.
pub fn peak_aoi_pmf(t: f64, p: f64, v_max: usize) -> Vec<(f64, f64)> {
    let mut mass = 1.0 - p;
    (0..=v_max)
        .map(|v| {
            let atom = ((2 + v) as f64 * t, mass);
            mass *= p;
            atom
        })
        .collect()
}

/// `E[τ/τ̄] = 2t/τ̄ + p/(1−p) · t/τ̄`.
pub fn expected_linear_aoi(t: f64, p: f64, tau_bar: f64) -> f64 {
    let x = t / tau_bar;
    2.0 * x + p / (1.0 - p) * x
}

/// `E[2^(τ/τ̄)] = 2^(2t/τ̄)(1−p) / (1 − 2^(t/τ̄) p)`.
pub fn expected_exp_aoi(t: f64, p: f64, tau_bar: f64) -> Result<f64> {
    let g = (t / tau_bar).exp2();
    let reg = g * p;
    if !(reg < 1.0) {
        return Err(Error::RegulationViolated { link: 0, value: reg });
    }
    Ok(g * g * (1.0 - p) / (1.0 - reg))
}

/// Expected aging cost of a single link.
pub fn link_cost(t: f64, p: f64, class: Criticality, tau_bar: f64) -> Result<f64> {
    match class {
        Criticality::Lo => Ok(expected_linear_aoi(t, p, tau_bar)),
        Criticality::Hi => expected_exp_aoi(t, p, tau_bar),
    }
}

/// Mixed-criticality objective Ψ(t, p).
pub fn objective_psi(alloc: &Allocation, profile: &LinkProfile) -> Result<f64> {
    if alloc.link_count() != profile.link_count() {
        return Err(Error::InvalidInput("allocation and profile sizes differ".into()));
    }
    (0..profile.link_count())
        .map(|k| {
            link_cost(alloc.t[k], alloc.p[k], profile.class(k), profile.tau_bar()).map_err(|e| match e {
                Error::RegulationViolated { value, .. } => Error::RegulationViolated { link: k, value },
                other => other,
            })
        })
        .sum()
}

/// Sample-mean estimate of Ψ from per-link peak-AoI samples (seconds).
pub fn empirical_psi(samples: &[Vec<f64>], profile: &LinkProfile) -> Result<f64> {
    if samples.len() != profile.link_count() {
        return Err(Error::InvalidInput("one sample list per link required".into()));
    }
    let tau = profile.tau_bar();
    let mut total = 0.0;
    for (k, s) in samples.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::EmptyTrace { link: k });
        }
        let sum: f64 = match profile.class(k) {
            Criticality::Lo => s.iter().map(|v| v / tau).sum(),
            Criticality::Hi => s.iter().map(|v| (v / tau).exp2()).sum(),
        };
        total += sum / s.len() as f64;
    }
    Ok(total)
}
