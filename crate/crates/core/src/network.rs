//! Physical-layer model of the D2D network.
//!
//! Sensor `i` transmits to actuator `i` with power `q_i`; every actuator hears
//! every sensor (treating interference as noise). The instantaneous power gain
//! from sensor `i` to actuator `k` is `|g|² · d_ik^(−μ/2)` with `|g|²` an
//! independent unit-mean exponential draw (Rayleigh amplitude). With that
//! convention the closed-form outage below is exact for the sampled channel.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Radio constants shared by all links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub path_loss_exponent: f64,
    pub d_norm_m: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            noise_psd_dbm_per_hz: -134.0,
            path_loss_exponent: 2.0,
            d_norm_m: 1.0,
        }
    }
}

/// Rejection-sampling bounds for random placements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementBounds {
    pub area_m: f64,
    pub min_pair_m: f64,
    pub max_pair_m: f64,
    pub min_cross_m: f64,
    pub max_attempts: usize,
}

impl Default for PlacementBounds {
    fn default() -> Self {
        Self {
            area_m: 100.0,
            min_pair_m: 5.0,
            max_pair_m: 25.0,
            min_cross_m: 20.0,
            max_attempts: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub placement: PlacementBounds,
    pub radio: RadioParams,
    pub power_dbm: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self {
            placement: PlacementBounds::default(),
            radio: RadioParams::default(),
            power_dbm: 20.0,
        }
    }
}

/// Device placement and radio constants. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyFile", into = "TopologyFile")]
pub struct Topology {
    sensors: Vec<[f64; 2]>,
    actuators: Vec<[f64; 2]>,
    /// Row-major `K × K`, `[i * K + k]` is sensor `i` → actuator `k`, in units of `d_norm`.
    distance: Vec<f64>,
    power_w: Vec<f64>,
    radio: RadioParams,
    noise_psd_w_per_hz: f64,
    orthogonal: bool,
}

impl Topology {
    pub fn new(
        sensors: Vec<[f64; 2]>,
        actuators: Vec<[f64; 2]>,
        power_w: Vec<f64>,
        radio: RadioParams,
    ) -> Result<Self> {
        let k = sensors.len();
        if k == 0 {
            return Err(Error::InvalidInput("topology needs at least one link".into()));
        }
        if actuators.len() != k || power_w.len() != k {
            return Err(Error::InvalidInput(format!(
                "length mismatch: {} sensors, {} actuators, {} powers",
                k,
                actuators.len(),
                power_w.len()
            )));
        }
        if !(radio.bandwidth_hz > 0.0) || !(radio.d_norm_m > 0.0) || !(radio.path_loss_exponent >= 0.0)
        {
            return Err(Error::InvalidInput(format!("invalid radio parameters {radio:?}")));
        }
        if !radio.noise_psd_dbm_per_hz.is_finite() {
            return Err(Error::InvalidInput("noise PSD must be finite".into()));
        }
        if let Some(q) = power_w.iter().find(|q| !(**q > 0.0) || !q.is_finite()) {
            return Err(Error::InvalidInput(format!("transmit power must be positive, got {q}")));
        }
        let mut distance = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                let d = euclid(sensors[i], actuators[j]) / radio.d_norm_m;
                if !(d > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "sensor {i} and actuator {j} coincide"
                    )));
                }
                distance[i * k + j] = d;
            }
        }
        Ok(Self {
            sensors,
            actuators,
            distance,
            power_w,
            noise_psd_w_per_hz: dbm_to_watts(radio.noise_psd_dbm_per_hz),
            radio,
            orthogonal: false,
        })
    }

    pub fn link_count(&self) -> usize {
        self.sensors.len()
    }

    /// Normalized distance sensor `i` → actuator `k`.
    pub fn distance(&self, i: usize, k: usize) -> f64 {
        self.distance[i * self.link_count() + k]
    }

    pub fn power(&self, k: usize) -> f64 {
        self.power_w[k]
    }

    pub fn powers(&self) -> &[f64] {
        &self.power_w
    }

    pub fn sensors(&self) -> &[[f64; 2]] {
        &self.sensors
    }

    pub fn actuators(&self) -> &[[f64; 2]] {
        &self.actuators
    }

    pub fn radio(&self) -> RadioParams {
        self.radio
    }

    pub fn bandwidth(&self) -> f64 {
        self.radio.bandwidth_hz
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.radio.path_loss_exponent
    }

    /// Total noise power over the occupied band, in watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_psd_w_per_hz * self.radio.bandwidth_hz
    }

    /// `true` when cross-link interference is absent (orthogonal access).
    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    /// Mean power gain `d_ik^(−μ/2)`.
    pub fn mean_gain(&self, i: usize, k: usize) -> f64 {
        self.distance(i, k).powf(-self.radio.path_loss_exponent / 2.0)
    }

    /// Whether sensor `i` interferes at actuator `k`.
    pub fn interferes(&self, i: usize, k: usize) -> bool {
        i != k && !self.orthogonal
    }

    /// Copy with a different common transmit power.
    pub fn with_power_dbm(&self, dbm: f64) -> Self {
        let mut t = self.clone();
        t.power_w = vec![dbm_to_watts(dbm); self.link_count()];
        t
    }

    /// Copy with the bandwidth replaced and cross-link interference removed.
    pub(crate) fn orthogonalized(&self, bandwidth_hz: f64) -> Self {
        let mut t = self.clone();
        t.radio.bandwidth_hz = bandwidth_hz;
        t.orthogonal = true;
        t
    }
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Random placement satisfying the pair and cross-distance rules.
pub fn generate_topology(seed: u64, link_count: usize, params: &TopologyParams) -> Result<Topology> {
    if link_count == 0 {
        return Err(Error::InvalidInput("link count must be at least 1".into()));
    }
    let b = &params.placement;
    if !(b.min_pair_m > 0.0 && b.min_pair_m <= b.max_pair_m && b.max_pair_m < b.area_m) {
        return Err(Error::InvalidInput(format!("unsatisfiable placement bounds {b:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sensors: Vec<[f64; 2]> = Vec::with_capacity(link_count);
    let mut actuators: Vec<[f64; 2]> = Vec::with_capacity(link_count);
    for link in 0..link_count {
        let mut placed = false;
        for _ in 0..b.max_attempts {
            let s = [rng.random::<f64>() * b.area_m, rng.random::<f64>() * b.area_m];
            let r = b.min_pair_m + rng.random::<f64>() * (b.max_pair_m - b.min_pair_m);
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            let a = [s[0] + r * phi.cos(), s[1] + r * phi.sin()];
            let inside = |p: [f64; 2]| (0.0..=b.area_m).contains(&p[0]) && (0.0..=b.area_m).contains(&p[1]);
            if !inside(a) {
                continue;
            }
            let clear = sensors.iter().all(|&other| euclid(other, a) >= b.min_cross_m)
                && actuators.iter().all(|&other| euclid(s, other) >= b.min_cross_m);
            if clear {
                sensors.push(s);
                actuators.push(a);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PlacementFailed {
                link,
                attempts: b.max_attempts,
            });
        }
    }
    let power = vec![dbm_to_watts(params.power_dbm); link_count];
    Topology::new(sensors, actuators, power, params.radio)
}

/// One block-fading draw of every sensor → actuator power gain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    link_count: usize,
    gain: Vec<f64>,
}

impl ChannelRealization {
    pub fn from_gains(link_count: usize, gain: Vec<f64>) -> Result<Self> {
        if gain.len() != link_count * link_count {
            return Err(Error::InvalidInput("gain matrix must be K×K".into()));
        }
        if gain.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::InvalidInput("gains must be non-negative".into()));
        }
        Ok(Self { link_count, gain })
    }

    pub fn gain(&self, i: usize, k: usize) -> f64 {
        self.gain[i * self.link_count + k]
    }
}

pub fn sample_channel<R: Rng + ?Sized>(topology: &Topology, rng: &mut R) -> ChannelRealization {
    let k = topology.link_count();
    let mut gain = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let fading: f64 = rng.sample(Exp1);
            gain.push(fading * topology.mean_gain(i, j));
        }
    }
    ChannelRealization { link_count: k, gain }
}

pub fn sinr(topology: &Topology, realization: &ChannelRealization, k: usize) -> f64 {
    let n = topology.link_count();
    let interference: f64 = (0..n)
        .filter(|&i| topology.interferes(i, k))
        .map(|i| realization.gain(i, k) * topology.power(i))
        .sum();
    realization.gain(k, k) * topology.power(k) / (topology.noise_power() + interference)
}

/// Shannon rate under treating-interference-as-noise, bit/s.
pub fn achievable_rate(topology: &Topology, realization: &ChannelRealization, k: usize) -> f64 {
    topology.bandwidth() * sinr(topology, realization, k).ln_1p() / std::f64::consts::LN_2
}

/// `2^(r/B) − 1`, the SINR needed to support rate `r`.
pub fn sinr_threshold(rate: f64, bandwidth: f64) -> f64 {
    (rate / bandwidth * std::f64::consts::LN_2).exp_m1()
}

/// Probability that link `k` cannot support `rates[k]` under Rayleigh fading.
///
/// `1 − exp(−θ d_kk^(μ/2) σ²/q_k) · Π_{i≠k} q_k / (q_k + θ (d_kk/d_ik)^(μ/2) q_i)`
/// with `θ = 2^(r_k/B) − 1`. Evaluated in log space so tiny outages keep precision.
pub fn closed_form_outage(topology: &Topology, rates: &[f64], k: usize) -> f64 {
    outage_at_threshold(topology, sinr_threshold(rates[k].max(0.0), topology.bandwidth()), k)
}

pub(crate) fn outage_at_threshold(topology: &Topology, theta: f64, k: usize) -> f64 {
    if theta <= 0.0 {
        return 0.0;
    }
    let half_mu = topology.path_loss_exponent() / 2.0;
    let d_kk = topology.distance(k, k).powf(half_mu);
    let q_k = topology.power(k);
    let mut log_success = -theta * d_kk * topology.noise_power() / q_k;
    for i in 0..topology.link_count() {
        if topology.interferes(i, k) {
            let ratio = d_kk / topology.distance(i, k).powf(half_mu);
            log_success -= (theta * ratio * topology.power(i) / q_k).ln_1p();
        }
    }
    (-log_success.exp_m1()).clamp(0.0, 1.0)
}

/// Per-link minimum rate and maximum SINR over `samples` channel draws.
#[derive(Debug, Clone, PartialEq)]
pub struct RateExtremes {
    pub worst_rate: Vec<f64>,
    pub best_sinr: Vec<f64>,
}

pub fn sample_rate_extremes<R: Rng + ?Sized>(
    topology: &Topology,
    samples: usize,
    rng: &mut R,
) -> RateExtremes {
    let k = topology.link_count();
    let mut worst_sinr = vec![f64::INFINITY; k];
    let mut best_sinr = vec![0.0f64; k];
    for _ in 0..samples.max(1) {
        let h = sample_channel(topology, rng);
        for j in 0..k {
            let s = sinr(topology, &h, j);
            worst_sinr[j] = worst_sinr[j].min(s);
            best_sinr[j] = best_sinr[j].max(s);
        }
    }
    let b = topology.bandwidth();
    RateExtremes {
        worst_rate: worst_sinr
            .into_iter()
            .map(|s| b * s.ln_1p() / std::f64::consts::LN_2)
            .collect(),
        best_sinr,
    }
}

/// Minimum achievable rate per link over `samples` draws.
pub fn worst_case_rates<R: Rng + ?Sized>(topology: &Topology, samples: usize, rng: &mut R) -> Vec<f64> {
    sample_rate_extremes(topology, samples, rng).worst_rate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPlacement {
    pub sensor_m: [f64; 2],
    pub actuator_m: [f64; 2],
    pub power_dbm: f64,
}

/// On-disk form of [`Topology`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub links: Vec<LinkPlacement>,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub path_loss_exponent: f64,
    pub d_norm_m: f64,
    #[serde(default)]
    pub orthogonal: bool,
}

impl TryFrom<TopologyFile> for Topology {
    type Error = Error;

    fn try_from(f: TopologyFile) -> Result<Self> {
        let radio = RadioParams {
            bandwidth_hz: f.bandwidth_hz,
            noise_psd_dbm_per_hz: f.noise_psd_dbm_per_hz,
            path_loss_exponent: f.path_loss_exponent,
            d_norm_m: f.d_norm_m,
        };
        let mut t = Topology::new(
            f.links.iter().map(|l| l.sensor_m).collect(),
            f.links.iter().map(|l| l.actuator_m).collect(),
            f.links.iter().map(|l| dbm_to_watts(l.power_dbm)).collect(),
            radio,
        )?;
        t.orthogonal = f.orthogonal;
        Ok(t)
    }
}

impl From<Topology> for TopologyFile {
    fn from(t: Topology) -> Self {
        TopologyFile {
            links: (0..t.link_count())
                .map(|k| LinkPlacement {
                    sensor_m: t.sensors[k],
                    actuator_m: t.actuators[k],
                    power_dbm: watts_to_dbm(t.power_w[k]),
                })
                .collect(),
            bandwidth_hz: t.radio.bandwidth_hz,
            noise_psd_dbm_per_hz: t.radio.noise_psd_dbm_per_hz,
            path_loss_exponent: t.radio.path_loss_exponent,
            d_norm_m: t.radio.d_norm_m,
            orthogonal: t.orthogonal,
        }
    }
}
