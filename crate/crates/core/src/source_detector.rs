//! Pair-source photon statistics and heralding-detector response.
//!
//! The heralding apparatus is reduced to three numbers `(q0, q1, q2)`: the
//! probability that it reports "exactly one photon" when 0, 1 or 2 photons
//! arrive. The multiplexed detector is a balanced `N`-stage splitter tree
//! feeding `2^N` binary detectors; couplers with transmission `eta_c` are
//! folded into the effective efficiency `eta_a * eta_c^N`.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// Largest stage count accepted by [`brute_force_response`].
pub const MAX_ENUMERATED_STAGES: u32 = 6;

/// Probabilities of generating 0, 1 and at least 2 pairs per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonStatistics {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Poissonian pair statistics with mean `lambda`.
///
/// `p2` is the exact complement `1 - (1 + lambda) e^{-lambda}`, evaluated
/// without cancellation for small `lambda`.
pub fn poisson_pair_stats(lambda: f64) -> Result<PhotonStatistics> {
    if !(lambda >= 0.0) || lambda.is_infinite() {
        return Err(Error::Domain {
            what: "pump strength lambda",
            value: lambda,
            domain: "[0, inf)",
        });
    }
    let p0 = (-lambda).exp();
    let p1 = lambda * p0;
    // 1 - e^{-l} - l e^{-l}; expm1 keeps the small-lambda tail accurate.
    let p2 = (-(-lambda).exp_m1() - p1).max(0.0);
    Ok(PhotonStatistics { p0, p1, p2 })
}

/// Physical parameters of the splitter-tree heralding detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplexedDetectorParams {
    /// Number of splitting stages; `0` is a single binary detector.
    pub stages: u32,
    /// Efficiency of each binary detector.
    pub eta_a: f64,
    /// Dark-count probability per gate of each binary detector.
    pub dark_a: f64,
    /// Power transmission of each coupler stage.
    pub eta_c: f64,
}

impl MultiplexedDetectorParams {
    pub fn new(stages: u32, eta_a: f64, dark_a: f64, eta_c: f64) -> Result<Self> {
        let params = Self {
            stages,
            eta_a,
            dark_a,
            eta_c,
        };
        params.validate()?;
        Ok(params)
    }

    /// Binary on/off detector (no multiplexing).
    pub fn binary(eta_a: f64, dark_a: f64) -> Result<Self> {
        Self::new(0, eta_a, dark_a, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("eta_a", self.eta_a)?;
        check_probability("dark_a", self.dark_a)?;
        check_probability("eta_c", self.eta_c)?;
        if self.stages > 62 {
            return Err(Error::InvalidParameter(format!(
                "{} stages exceed the supported maximum of 62",
                self.stages
            )));
        }
        Ok(())
    }

    /// Number of output detectors, `2^N`.
    pub fn outputs(&self) -> u64 {
        1u64 << self.stages
    }

    /// `eta_a * eta_c^N`: detection probability of one photon including coupler loss.
    pub fn effective_efficiency(&self) -> f64 {
        self.eta_a * self.eta_c.powi(self.stages as i32)
    }
}

/// Conditional probabilities of the "exactly one photon" heralding outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldResponse {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
}

impl HeraldResponse {
    /// Response from an explicit triple; only range validation is applied.
    pub fn new(q0: f64, q1: f64, q2: f64) -> Result<Self> {
        check_probability("q0", q0)?;
        check_probability("q1", q1)?;
        check_probability("q2", q2)?;
        Ok(Self { q0, q1, q2 })
    }

    /// Ideal photon-number-resolving heralding, `(0, 1, 0)`.
    pub const fn ideal() -> Self {
        Self {
            q0: 0.0,
            q1: 1.0,
            q2: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.q0, self.q1, self.q2]
    }
}

/// The no-heralding case that reproduces weak coherent pulses.
pub const fn wcp_response() -> HeraldResponse {
    HeraldResponse {
        q0: 1.0,
        q1: 1.0,
        q2: 1.0,
    }
}

/// Closed-form response of the splitter-tree detector.
pub fn multiplexed_response(params: &MultiplexedDetectorParams) -> HeraldResponse {
    let eta = params.effective_efficiency();
    let m = params.outputs() as f64;
    let d = params.dark_a;
    let quiet = (1.0 - d).powf(m - 1.0);
    HeraldResponse {
        q0: quiet * m * d,
        q1: quiet * (m * d * (1.0 - eta) + eta),
        q2: quiet * (m * d * (1.0 - eta).powi(2) + 2.0 * eta * (1.0 - eta) + eta * eta / m),
    }
}

/// Probability of exactly one click among the `2^N` outputs given
/// `n_photons` input photons, by exhaustive enumeration.
///
/// Every photon independently lands in one of the `2^N` bins with equal
/// probability and is detected with probability `eta_a * eta_c^N`; every bin
/// independently fires a dark count with probability `d_A`. A bin clicks if
/// a photon was detected there or it fired a dark count. All photon
/// routings and detection outcomes are enumerated explicitly. Dark-count
/// patterns with two or more firing bins always yield at least two clicks,
/// so only the empty pattern and the `2^N` single-bin patterns are visited.
pub fn brute_force_response(params: &MultiplexedDetectorParams, n_photons: u32) -> Result<f64> {
    params.validate()?;
    if params.stages > MAX_ENUMERATED_STAGES {
        return Err(Error::EnumerationLimit {
            stages: params.stages,
            limit: MAX_ENUMERATED_STAGES,
        });
    }
    if n_photons > 2 {
        return Err(Error::Domain {
            what: "photon number",
            value: n_photons as f64,
            domain: "{0, 1, 2}",
        });
    }

    let bins = params.outputs();
    let eta = params.effective_efficiency();
    let route_p = 1.0 / bins as f64;

    // (mask of bins lit by detected photons, probability) for every path
    let mut lit: Vec<(u64, f64)> = Vec::new();
    let paths = bins.pow(n_photons);
    for path in 0..paths {
        let mut route = path;
        let mut photon_bins = [0u64; 2];
        for slot in photon_bins.iter_mut().take(n_photons as usize) {
            *slot = route % bins;
            route /= bins;
        }
        for detected in 0..(1u32 << n_photons) {
            let mut mask = 0u64;
            let mut p = 1.0;
            for (k, bin) in photon_bins.iter().take(n_photons as usize).enumerate() {
                p *= route_p;
                if detected >> k & 1 == 1 {
                    p *= eta;
                    mask |= 1 << bin;
                } else {
                    p *= 1.0 - eta;
                }
            }
            lit.push((mask, p));
        }
    }

    let d = params.dark_a;
    let no_dark = (1.0 - d).powi(bins as i32);
    let one_dark = d * (1.0 - d).powi(bins as i32 - 1);
    let mut dark_patterns: Vec<(u64, f64)> = Vec::with_capacity(bins as usize + 1);
    dark_patterns.push((0, no_dark));
    dark_patterns.extend((0..bins).map(|b| (1u64 << b, one_dark)));

    // Neumaier summation; up to 4 * 64^2 paths contribute
    let (mut total, mut carry) = (0.0f64, 0.0f64);
    for &(photon_mask, p_photons) in &lit {
        for &(dark_mask, p_dark) in &dark_patterns {
            if (photon_mask | dark_mask).count_ones() == 1 {
                let term = p_photons * p_dark;
                let t = total + term;
                carry += if total.abs() >= term.abs() {
                    (total - t) + term
                } else {
                    (term - t) + total
                };
                total = t;
            }
        }
    }
    Ok(total + carry)
}

/// Short-distance figure of merit `q1^2 / q2`.
///
/// `q2 = 0` (perfect multiphoton rejection) is reported as
/// [`Error::DivisionByZero`]; callers treat the factor as unbounded.
pub fn short_distance_factor(r: &HeraldResponse) -> Result<f64> {
    if r.q2 == 0.0 {
        return Err(Error::DivisionByZero(
            "q2 = 0: perfect multiphoton rejection",
        ));
    }
    Ok(r.q1 * r.q1 / r.q2)
}

/// Long-distance figure of merit `sqrt(q0 q2) / q1`.
pub fn distance_factor(r: &HeraldResponse) -> Result<f64> {
    if r.q1 == 0.0 {
        return Err(Error::DivisionByZero("q1 = 0: no single-photon heralds"));
    }
    Ok((r.q0 * r.q2).sqrt() / r.q1)
}

/// Low-dark-count approximation of [`distance_factor`] for the splitter tree.
pub fn approx_distance_factor(params: &MultiplexedDetectorParams) -> Result<f64> {
    let eta = params.effective_efficiency();
    if eta == 0.0 {
        return Err(Error::Domain {
            what: "effective efficiency",
            value: eta,
            domain: "(0, 1]",
        });
    }
    let fan_out = 2f64.powi(params.stages as i32 + 1);
    Ok((params.dark_a * (1.0 + fan_out * (1.0 - eta) / eta)).sqrt())
}

/// Minimum effective efficiency `eta_a eta_c^N` above which `q1^2/q2 > 1`
/// with negligible dark counts.
pub fn advantage_threshold(stages: u32) -> f64 {
    2.0 / (3.0 - 0.5f64.powi(stages as i32))
}
