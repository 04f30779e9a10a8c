//! Detection probability, QBER, single-photon fraction and secure key rate.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::protocol::ProtocolSpec;
use crate::source_detector::{poisson_pair_stats, HeraldResponse, PhotonStatistics};

/// Bob's dark-count probability above which the first-order click model is suspect.
pub const DARK_B_ADVISORY: f64 = 1e-2;
/// Pump strength above which the perturbative pair statistics are suspect.
pub const LAMBDA_ADVISORY: f64 = 1.0;

/// Channel transmission (including Bob's efficiency) and Bob's dark counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub transmission: f64,
    pub dark_b: f64,
}

impl ChannelParams {
    pub fn new(transmission: f64, dark_b: f64) -> Result<Self> {
        check_probability("transmission", transmission)?;
        if !(0.0..1.0).contains(&dark_b) {
            return Err(Error::Domain {
                what: "dark_b",
                value: dark_b,
                domain: "[0, 1)",
            });
        }
        Ok(Self {
            transmission,
            dark_b,
        })
    }

    pub fn with_transmission(self, transmission: f64) -> Result<Self> {
        Self::new(transmission, self.dark_b)
    }

    /// True when `d_B` is large enough to break the `d_B << 1` assumption.
    pub fn dark_b_advisory(&self) -> bool {
        self.dark_b > DARK_B_ADVISORY
    }
}

/// Mean pair number per pump pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub lambda: f64,
}

impl SourceParams {
    pub fn new(lambda: f64) -> Result<Self> {
        poisson_pair_stats(lambda)?;
        Ok(Self { lambda })
    }

    pub fn stats(&self) -> PhotonStatistics {
        poisson_pair_stats(self.lambda).expect("validated on construction")
    }

    pub fn lambda_advisory(&self) -> bool {
        self.lambda > LAMBDA_ADVISORY
    }
}

/// Whether the security model could be evaluated at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelStatus {
    /// The key rate was evaluated and the PNS model applies.
    Valid,
    /// The key rate was evaluated, but Eve gains more from single photons
    /// than from multiphoton pulses, so the PNS model does not apply.
    PnsInapplicable,
    /// `y <= 0` or `Q/y` leaves the domain of the information functions.
    OutOfDomain,
}

/// Every intermediate quantity of one key-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub p_exp: f64,
    pub qber: f64,
    pub y: f64,
    /// Secure bits per pulse, unclamped; `None` when out of domain.
    pub key_rate: Option<f64>,
    pub pns_valid: bool,
    pub secure: bool,
    pub status: ModelStatus,
}

impl KeyRateReport {
    /// Key rate usable as an optimization score: `-inf` unless the model is valid.
    pub fn score(&self) -> f64 {
        match (self.status, self.key_rate) {
            (ModelStatus::Valid, Some(k)) => k,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// `p0 q0 + p1 q1 + p2 q2`: probability that the herald fires.
fn herald_probability(stats: &PhotonStatistics, r: &HeraldResponse) -> f64 {
    stats.p0 * r.q0 + stats.p1 * r.q1 + stats.p2 * r.q2
}

/// Probability of a detection event at Bob per pulse, to first order in `T` and `d_B`.
pub fn expected_click_prob(
    stats: &PhotonStatistics,
    r: &HeraldResponse,
    ch: &ChannelParams,
) -> f64 {
    let t = ch.transmission;
    t * stats.p1 * r.q1 + 2.0 * t * stats.p2 * r.q2 + 2.0 * ch.dark_b * herald_probability(stats, r)
}

fn nonzero_click_prob(
    stats: &PhotonStatistics,
    r: &HeraldResponse,
    ch: &ChannelParams,
    what: &'static str,
) -> Result<f64> {
    let p_exp = expected_click_prob(stats, r, ch);
    if p_exp > 0.0 {
        Ok(p_exp)
    } else {
        Err(Error::UndefinedRate(what))
    }
}

/// QBER: half of all dark-count clicks are errors.
pub fn qber(stats: &PhotonStatistics, r: &HeraldResponse, ch: &ChannelParams) -> Result<f64> {
    let p_exp = nonzero_click_prob(stats, r, ch, "QBER")?;
    Ok(ch.dark_b * herald_probability(stats, r) / p_exp)
}

/// Fraction of detections attributed to single-photon pulses, `1 - p2 q2 / p_exp`.
pub fn single_photon_fraction(
    stats: &PhotonStatistics,
    r: &HeraldResponse,
    ch: &ChannelParams,
) -> Result<f64> {
    let p_exp = nonzero_click_prob(stats, r, ch, "single-photon fraction")?;
    Ok(1.0 - stats.p2 * r.q2 / p_exp)
}

/// Secure key rate per pulse together with its ingredients.
pub fn key_rate(
    spec: &ProtocolSpec,
    stats: &PhotonStatistics,
    r: &HeraldResponse,
    ch: &ChannelParams,
) -> Result<KeyRateReport> {
    let p_exp = nonzero_click_prob(stats, r, ch, "key rate")?;
    let herald = herald_probability(stats, r);
    let q = ch.dark_b * herald / p_exp;
    let y = 1.0 - stats.p2 * r.q2 / p_exp;

    let bracket = spec.secrecy_bracket(q, y);
    let pns_valid = bracket.is_some() && spec.pns_applicable(q, y);
    let key_rate = bracket.map(|b| p_exp * spec.p_sift() * b);
    let status = match (bracket, pns_valid) {
        (None, _) => ModelStatus::OutOfDomain,
        (Some(_), false) => ModelStatus::PnsInapplicable,
        (Some(_), true) => ModelStatus::Valid,
    };
    Ok(KeyRateReport {
        p_exp,
        qber: q,
        y,
        key_rate,
        pns_valid,
        secure: pns_valid && key_rate.is_some_and(|k| k > 0.0),
        status,
    })
}

/// Key rate per detection event, `K / p_exp`.
///
/// `None` marks the blanked region where the PNS model does not apply.
pub fn renormalized_key_rate(spec: &ProtocolSpec, qber: f64, y: f64) -> Option<f64> {
    if !spec.pns_applicable(qber, y) {
        return None;
    }
    spec.secrecy_bracket(qber, y).map(|b| spec.p_sift() * b)
}
