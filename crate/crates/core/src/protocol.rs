//! Four-state protocols (BB84, SARG04) and their information functions.
//!
//! A [`ProtocolSpec`] bundles the sifting fraction, Eve's single- and
//! two-photon information gain, and two derived constants used by the
//! linearized security bound: the threshold QBER `q_threshold` at which an
//! ideal single-photon source stops producing key, and the factor `xi` by
//! which a multiphoton fraction `1 - y` tightens that threshold:
//!
//! ```text
//! Q < q_threshold * (1 - xi * (1 - y))
//! ```
//!
//! Both constants are solved numerically on first access and cached.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Bracket margin used when searching `(0, 1/2)` for the threshold QBER.
const THRESHOLD_EDGE: f64 = 1e-12;
/// Offsets `1 - y` used to extract the linearization factor.
const XI_STEPS: [f64; 2] = [1e-3, 1e-4];

/// `x log2 x` with the `0 log2 0 = 0` convention.
fn xlog2x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Binary entropy `H(x) = -x log2 x - (1-x) log2 (1-x)` in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            what: "binary entropy argument",
            value: x,
            domain: "[0, 1]",
        });
    }
    Ok(-xlog2x(x) - xlog2x(1.0 - x))
}

/// Alice-Bob mutual information `1 - H(Q)` for QBER `Q` in `[0, 1/2]`.
pub fn mutual_info_ab(qber: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&qber) {
        return Err(Error::Domain {
            what: "QBER",
            value: qber,
            domain: "[0, 1/2]",
        });
    }
    Ok(1.0 - binary_entropy(qber)?)
}

/// Protocol identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Bb84,
    Sarg04,
}

impl Protocol {
    /// Shared, lazily-solved specification for this protocol.
    pub fn spec(self) -> &'static ProtocolSpec {
        static BB84: ProtocolSpec = ProtocolSpec::new(Protocol::Bb84);
        static SARG04: ProtocolSpec = ProtocolSpec::new(Protocol::Sarg04);
        match self {
            Protocol::Bb84 => &BB84,
            Protocol::Sarg04 => &SARG04,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::Sarg04 => "sarg04",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bb84" => Ok(Protocol::Bb84),
            "sarg04" => Ok(Protocol::Sarg04),
            other => Err(Error::InvalidParameter(format!(
                "unknown protocol `{other}` (expected bb84 or sarg04)"
            ))),
        }
    }
}

/// Protocol constants and information functions.
#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    protocol: Protocol,
    q_threshold: OnceLock<f64>,
    xi: OnceLock<f64>,
    pns_ratio_limit: OnceLock<f64>,
}

impl ProtocolSpec {
    pub const fn new(protocol: Protocol) -> Self {
        Self {
            protocol,
            q_threshold: OnceLock::new(),
            xi: OnceLock::new(),
            pns_ratio_limit: OnceLock::new(),
        }
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    /// Fraction of detection events kept after sifting.
    pub fn p_sift(&self) -> f64 {
        match self.protocol {
            Protocol::Bb84 => 0.5,
            Protocol::Sarg04 => 0.25,
        }
    }

    /// Domain of [`eve_info_single`](Self::eve_info_single).
    /// SARG04 excludes the endpoint itself.
    fn single_domain_contains(&self, q: f64) -> bool {
        match self.protocol {
            Protocol::Bb84 => (0.0..=0.5).contains(&q),
            Protocol::Sarg04 => (0.0..0.5).contains(&q),
        }
    }

    /// Eve's information gain per single-photon pulse, `I_AE^(1)(Q)`.
    pub fn eve_info_single(&self, qber: f64) -> Result<f64> {
        if !self.single_domain_contains(qber) {
            return Err(Error::Domain {
                what: "QBER",
                value: qber,
                domain: match self.protocol {
                    Protocol::Bb84 => "[0, 1/2]",
                    Protocol::Sarg04 => "[0, 1/2)",
                },
            });
        }
        Ok(match self.protocol {
            Protocol::Bb84 => binary_entropy(qber)?,
            Protocol::Sarg04 => xlog2x(1.0 - qber) - xlog2x(1.0 - 2.0 * qber) + qber - xlog2x(qber),
        })
    }

    /// Eve's information gain per multiphoton pulse, `I_AE^(2)`.
    ///
    /// BB84 two-photon pulses are fully compromised by photon-number
    /// splitting. For SARG04 the gain is the Holevo bound for two
    /// equiprobable states with overlap `1/sqrt(2)`.
    pub fn eve_info_two(&self) -> f64 {
        match self.protocol {
            Protocol::Bb84 => 1.0,
            Protocol::Sarg04 => {
                let x = (2.0 + std::f64::consts::SQRT_2) / 4.0;
                -xlog2x(x) - xlog2x(1.0 - x)
            }
        }
    }

    /// Bracket of the key-rate formula per sifted detection:
    /// `I_AB(Q) - y I_AE^(1)(Q/y) - (1-y) I_AE^(2)`.
    ///
    /// `None` when `y <= 0` or `Q/y` leaves the information-function domain.
    pub fn secrecy_bracket(&self, qber: f64, y: f64) -> Option<f64> {
        if !(y > 0.0 && y <= 1.0) {
            return None;
        }
        let i_ab = mutual_info_ab(qber).ok()?;
        let i_single = self.eve_info_single(qber / y).ok()?;
        Some(i_ab - y * i_single - (1.0 - y) * self.eve_info_two())
    }

    /// Whether the photon-number-splitting model applies at `(Q, y)`:
    /// `Q/y` is in range, `I_AE^(1)(Q/y) <= I_AE^(2)`, and `Q/y` lies on the
    /// low-ratio branch.
    ///
    /// The SARG04 single-photon gain peaks at `Q/y = 1/3` and falls back below
    /// `I_AE^(2)` just short of `1/2`; that second window is excluded.
    pub fn pns_applicable(&self, qber: f64, y: f64) -> bool {
        if !(y > 0.0 && qber >= 0.0) {
            return false;
        }
        let ratio = qber / y;
        match self.eve_info_single(ratio) {
            Ok(i) => i <= self.eve_info_two() && ratio <= self.pns_ratio_limit(),
            Err(_) => false,
        }
    }

    /// Largest `Q/y` for which the PNS model applies: `1/2` for BB84, the
    /// lower root of `I_AE^(1)(x) = I_AE^(2)` for SARG04.
    pub fn pns_ratio_limit(&self) -> f64 {
        *self.pns_ratio_limit.get_or_init(|| match self.protocol {
            Protocol::Bb84 => 0.5,
            Protocol::Sarg04 => {
                let gap = |x: f64| {
                    self.eve_info_single(x)
                        .map_or(f64::NAN, |i| i - self.eve_info_two())
                };
                // below the root the gap is negative; nudge onto the inclusive side
                let root = bisect(gap, 0.0, 1.0 / 3.0, 1e-16)
                    .expect("I_AE^(1) rises from 0 to 1 on [0, 1/3]");
                if gap(root) <= 0.0 {
                    root
                } else {
                    root.next_down()
                }
            }
        })
    }

    /// Threshold QBER, solved once and cached.
    pub fn q_threshold(&self) -> f64 {
        *self
            .q_threshold
            .get_or_init(|| solve_qber_threshold(self).expect("built-in protocols bracket a root"))
    }

    /// Linearization factor, solved once and cached.
    pub fn xi(&self) -> f64 {
        *self
            .xi
            .get_or_init(|| compute_xi(self).expect("built-in protocols have a zero contour"))
    }

    /// Linearized bound on the QBER: `Q^th [1 - xi (1 - y)]`.
    pub fn linearized_qber_bound(&self, y: f64) -> f64 {
        self.q_threshold() * (1.0 - self.xi() * (1.0 - y))
    }
}

/// Root of `I_AB(Q) = I_AE^(1)(Q)` on `(0, 1/2)`, by bisection.
pub fn solve_qber_threshold(spec: &ProtocolSpec) -> Result<f64> {
    let gap = |q: f64| match (mutual_info_ab(q), spec.eve_info_single(q)) {
        (Ok(a), Ok(e)) => a - e,
        _ => f64::NAN,
    };
    bisect(gap, THRESHOLD_EDGE, 0.5 - THRESHOLD_EDGE, 1e-15)
}

/// QBER on the zero contour of the secrecy bracket at single-photon fraction `y`.
pub fn key_positivity_contour(spec: &ProtocolSpec, y: f64) -> Result<f64> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(Error::Domain {
            what: "single-photon fraction",
            value: y,
            domain: "(0, 1]",
        });
    }
    let q_th = spec.q_threshold();
    // The bracket is positive at Q -> 0 whenever (1 - y) I_AE^(2) < 1, and
    // non-positive at Q^th for y <= 1.
    let hi = (q_th * (1.0 + 1e-9)).min(0.5 * y * (1.0 - 1e-12));
    bisect(
        |q| spec.secrecy_bracket(q, y).unwrap_or(f64::NAN),
        0.0,
        hi,
        1e-16,
    )
}

/// Linearization factor `xi` of the zero contour around `(Q^th, y = 1)`.
///
/// The contour is solved at `y = 1 - eps` for two offsets and the one-sided
/// slopes are Richardson-extrapolated to `eps -> 0`.
pub fn compute_xi(spec: &ProtocolSpec) -> Result<f64> {
    let q_th = spec.q_threshold();
    let slope = |eps: f64| -> Result<f64> {
        let q = key_positivity_contour(spec, 1.0 - eps)
            .map_err(|_| Error::NotConverged("zero-contour solve"))?;
        Ok((1.0 - q / q_th) / eps)
    };
    let [coarse, fine] = XI_STEPS;
    let (s_coarse, s_fine) = (slope(coarse)?, slope(fine)?);
    let ratio = coarse / fine;
    Ok((ratio * s_fine - s_coarse) / (ratio - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BB84: Protocol = Protocol::Bb84;
    const SARG04: Protocol = Protocol::Sarg04;

    #[test]
    fn entropy_edges() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn entropy_at_011() {
        // 40-digit reference value
        let h = binary_entropy(0.11).unwrap();
        assert!((h - 0.499_915_958_164_528).abs() < 1e-12);
        // bisecting H(Q) = 1/2 lands at 0.1100
        let q = bisect(|q| binary_entropy(q).unwrap() - 0.5, 0.0, 0.5, 1e-14).unwrap();
        assert!((q - 0.11).abs() < 1e-4);
    }

    #[test]
    fn mutual_info_values() {
        assert_eq!(mutual_info_ab(0.0).unwrap(), 1.0);
        assert_eq!(mutual_info_ab(0.5).unwrap(), 0.0);
        assert!((mutual_info_ab(0.11).unwrap() - 0.500_084_041_835_472).abs() < 1e-12);
        assert!(mutual_info_ab(0.51).is_err());
        assert!(mutual_info_ab(-1e-9).is_err());
    }

    #[test]
    fn eve_single_values() {
        let h = binary_entropy(0.11).unwrap();
        assert_eq!(BB84.spec().eve_info_single(0.11).unwrap(), h);
        assert_eq!(SARG04.spec().eve_info_single(0.0).unwrap(), 0.0);
        let v = SARG04.spec().eve_info_single(0.1).unwrap();
        assert!((v - 0.552_932_501_298_081).abs() < 1e-12);
        assert!(SARG04.spec().eve_info_single(0.5).is_err());
        assert!(SARG04.spec().eve_info_single(-0.01).is_err());
        assert!(BB84.spec().eve_info_single(0.5).is_ok());
    }

    #[test]
    fn eve_two_values() {
        assert_eq!(BB84.spec().eve_info_two(), 1.0);
        let s = SARG04.spec().eve_info_two();
        assert!((s - 0.6009).abs() < 1e-4);
        let mirrored = binary_entropy((2.0 - std::f64::consts::SQRT_2) / 4.0).unwrap();
        assert!((s - mirrored).abs() < 1e-15);
    }

    #[test]
    fn thresholds() {
        let bb = solve_qber_threshold(BB84.spec()).unwrap();
        let sa = solve_qber_threshold(SARG04.spec()).unwrap();
        assert!((bb - 0.1100).abs() < 5e-4);
        assert!((sa - 0.0968).abs() < 5e-4);
        assert!((binary_entropy(bb).unwrap() - 0.5).abs() < 1e-9);
        for spec in [BB84.spec(), SARG04.spec()] {
            let q = spec.q_threshold();
            let residual = mutual_info_ab(q).unwrap() - spec.eve_info_single(q).unwrap();
            assert!(residual.abs() < 1e-9, "{residual}");
            assert!(q > 0.0 && q < 0.5);
        }
    }

    #[test]
    fn xi_values() {
        assert!((BB84.spec().xi() - 1.25).abs() < 0.01);
        assert!((SARG04.spec().xi() - 0.64).abs() < 0.01);
        for spec in [BB84.spec(), SARG04.spec()] {
            assert_eq!(spec.linearized_qber_bound(1.0), spec.q_threshold());
        }
    }

    #[test]
    fn pns_ratio_limit_values() {
        assert_eq!(BB84.spec().pns_ratio_limit(), 0.5);
        // lower root of I_AE^(1)(x) = I_AE^(2), 40-digit reference
        let x = SARG04.spec().pns_ratio_limit();
        assert!((x - 0.112_944_730_577_605_02).abs() < 1e-15);
        assert!(SARG04.spec().pns_applicable(x, 1.0));
        assert!(!SARG04.spec().pns_applicable(x * (1.0 + 1e-12), 1.0));
    }

    #[test]
    fn pns_examples() {
        assert!(BB84.spec().pns_applicable(0.1, 0.5));
        assert!(SARG04.spec().pns_applicable(0.0, 1.0));
        // I_AE^(1)(0.4) = 0.95098 > 0.6009 for SARG04
        assert!(!SARG04.spec().pns_applicable(0.2, 0.5));
        // second window below 1/2 where the single-photon gain drops again
        assert!(SARG04.spec().eve_info_single(0.495).unwrap() < SARG04.spec().eve_info_two());
        assert!(!SARG04.spec().pns_applicable(0.495, 1.0));
        assert!(!BB84.spec().pns_applicable(0.3, 0.5));
        assert!(!BB84.spec().pns_applicable(0.1, 0.0));
    }

    #[test]
    fn protocol_parsing() {
        assert_eq!("BB84".parse::<Protocol>().unwrap(), Protocol::Bb84);
        assert_eq!("sarg04".parse::<Protocol>().unwrap(), Protocol::Sarg04);
        assert!("e91".parse::<Protocol>().is_err());
    }
}
